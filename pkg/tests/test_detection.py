import pytest
from hypothesis import given, strategies as st

from ares_sim.detection import DetectorConfig, DetectorState, looks_jammed, score_latencies, update
from ares_sim.rate_control import Transition

CFG = DetectorConfig(window_s=0.5, pdr_low=0.1, rssi_margin_db=20, confirm_count=2)


def test_low_pdr_needs_strong_energy():
    assert looks_jammed(0.05, -50, CFG)
    assert not looks_jammed(0.05, -72, CFG)   # weak link, not jamming
    assert not looks_jammed(0.5, -40, CFG)


def test_flip_after_confirmations():
    s = DetectorState()
    s, e = update(s, 0.0, -50, CFG)
    assert e is Transition.NONE and not s.jammed
    s, e = update(s, 0.0, -50, CFG)
    assert e is Transition.SLEEP_TO_ACTIVE and s.jammed
    s, e = update(s, 1.0, -50, CFG)
    s, e = update(s, 0.0, -50, CFG)           # blip resets the count
    assert e is Transition.NONE and s.jammed
    s, _ = update(s, 1.0, -50, CFG)
    s, e = update(s, 1.0, -50, CFG)
    assert e is Transition.ACTIVE_TO_SLEEP and not s.jammed


def test_config_validation_and_bound():
    assert CFG.max_latency_s == 1.0
    with pytest.raises(ValueError):
        DetectorConfig(window_s=0)
    with pytest.raises(ValueError):
        DetectorConfig(confirm_count=0)


def test_latency_scoring_from_window_boundary():
    truth = [(1.2, True), (4.0, False)]
    det = [(2.5, True), (5.0, False)]
    out = score_latencies(truth, det, 0.5)
    # 1.2 -> first boundary 1.5, flip at 2.5; 4.0 is itself a boundary
    assert out["count"] == 2 and out["missed"] == 0
    assert out["max_s"] == pytest.approx(1.0)
    assert out["mean_s"] == pytest.approx(1.0)


def test_missed_edges_are_counted():
    out = score_latencies([(1.0, True), (2.0, False), (9.0, True)], [(3.0, False)], 0.5)
    assert out["count"] == 1 and out["missed"] == 2


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(-95, -30)), max_size=50), st.integers(1, 4))
def test_never_flips_without_enough_agreeing_windows(windows, k):
    cfg = DetectorConfig(confirm_count=k)
    s, run, flips = DetectorState(), 0, 0
    for p, r in windows:
        raw = looks_jammed(p, r, cfg)
        run = run + 1 if raw != s.jammed else 0
        s, e = update(s, p, r, cfg)
        if e is not Transition.NONE:
            assert run >= k
            run = 0
            flips += 1
    assert flips <= len(windows) // k

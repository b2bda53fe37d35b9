import pytest

from ares_sim import ConfigError, from_dict, route_throughput, run
from ares_sim.engine import TRACE_COLUMNS

from scenarios import link, single_link


def no_jammer(links, duration=60, **top):
    return from_dict({"name": "quiet", "kind": "simulate", "duration_s": duration,
                      "detection": {"enabled": False}, "links": links, **top})


def test_same_seed_same_run():
    cfg = single_link(policy="ladder", cycles=200, detection=True, trace_period_s=0.5, seed=9)
    a, b = run(cfg), run(cfg)
    assert a.rows == b.rows and a.summary == b.summary
    assert run(cfg, seed=10).rows != a.rows


def test_trace_columns():
    res = run(single_link(cycles=20, trace_period_s=0.5))
    assert len(res.rows[0]) == len(TRACE_COLUMNS)
    assert res.rows[1][0] - res.rows[0][0] == pytest.approx(0.5)


def test_strong_jammer_silences_the_link():
    s = run(single_link(rate=54, cycles=300)).summary["links"]["L1"]
    assert s["active_mbps"] == 0.0
    assert s["sleep_mbps"] == pytest.approx(27.0)


def test_weak_jammer_spares_low_rates_only():
    # jammer inaudible at the sender, about 18 dB under the signal at the receiver
    links = [link(id="slow", rate=6, path_loss=50), link(id="fast", rate=54, path_loss=50)]
    cfg = single_link(links=links, cycles=300, jammer_path_loss=(100, 68))
    s = run(cfg).summary["links"]
    assert s["slow"]["active_mbps"] == pytest.approx(6.0)
    assert s["fast"]["active_mbps"] == 0.0


def test_without_jammer_throughput_is_pdr_times_saturated():
    cfg = no_jammer([link(rate=36, pdr=0.8)])
    assert run(cfg).link_mean("L1") == pytest.approx(0.8 * 26, rel=0.01)


def test_offered_load_caps_goodput():
    cfg = no_jammer([link(rate=54, offered_mbps=10)])
    assert run(cfg).link_mean("L1") == pytest.approx(10.0)


def test_route_hops_share_the_channel():
    cfg = no_jammer([link(id="a", rate=12), link(id="b", rate=12)], routes={"r": ["a", "b"]})
    res = run(cfg)
    assert res.summary["routes"]["r"] == pytest.approx(6.0)
    assert route_throughput(res.rows, ["a", "b"]) == pytest.approx(6.0)
    with pytest.raises(KeyError):
        route_throughput(res.rows, ["a", "zz"])


def test_unknown_route_link_rejected():
    with pytest.raises(ConfigError) as exc:
        no_jammer([link(id="a")], routes={"r": ["a", "ghost"]})
    assert exc.value.errors[0]["path"] == "$.routes.r"


def test_throughput_split_is_conserved():
    s = run(single_link(policy="ladder", preset="rare", cycles=500)).summary["links"]["L1"]
    f = s["active_fraction"]
    assert s["mean_mbps"] == pytest.approx(f * s["active_mbps"] + (1 - f) * s["sleep_mbps"])
    assert 0.2 < f < 0.4   # rare preset duty is 1.5 / 4.5


def test_jammer_cycle_count():
    res = run(single_link(cycles=400, seed=4))
    assert 370 <= res.summary["jammer_cycles"]["J1"] <= 400


def test_engine_rejects_other_kinds():
    cfg = from_dict({"name": "a", "kind": "analyze", "analysis": {"jammer_preset": "balanced", "rates": [6]}})
    with pytest.raises(ValueError):
        run(cfg)

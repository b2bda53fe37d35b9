"""Small scenario builders shared by the tests."""

from ares_sim import from_dict
from ares_sim.jammers import PRESET_DISTRIBUTIONS


def jammer_link(jt=60.0, jr=60.0):
    return {"path_loss_jt_db": jt, "path_loss_jr_db": jr}


def link(id="L1", rate=54, policy="fixed", pdr=1.0, path_loss=68, **extra):
    pol = policy if isinstance(policy, dict) else {"kind": policy}
    return {"id": id, "tx": f"{id}-tx", "rx": f"{id}-rx", "path_loss_db": path_loss,
            "app_rate_mbps": rate, "base_pdr": pdr, "policy": pol, **extra}


def single_link(
    policy="fixed",
    rate=54,
    preset="balanced",
    cycles=1000,
    pdr=1.0,
    sleep=None,
    active=None,
    detection=False,
    window_s=0.5,
    trace_period_s=None,
    dwell=None,
    seed=1,
    jammer_path_loss=(60.0, 60.0),
    links=None,
    **top,
):
    """One or more links under a single strong random jammer, sized by jammer cycles."""
    s, a = PRESET_DISTRIBUTIONS[preset]
    s = tuple(sleep or s)
    a = tuple(active or a)
    duration = max(1, round(cycles * (sum(s) / 2 + sum(a) / 2)))
    links = links or [link(rate=rate, policy=policy, pdr=pdr)]
    doc = {
        "name": "test",
        "kind": "simulate",
        "seed": seed,
        "duration_s": duration,
        "detection": {"enabled": detection, "window_s": window_s},
        "trace": {"period_s": trace_period_s},
        "links": links,
        "jammers": [
            {
                "id": "J1",
                "kind": "random",
                "sleep": list(s),
                "active": list(a),
                "links": {l["id"]: jammer_link(*jammer_path_loss) for l in links},
            }
        ],
        **top,
    }
    if dwell is not None:
        doc["dwell"] = dwell
    return from_dict(doc)

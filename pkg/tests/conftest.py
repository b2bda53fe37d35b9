import pathlib
from importlib import resources

import pytest

from ares_sim.config import load_variants
from ares_sim.experiments import execute

PRESET_DIR = pathlib.Path(str(resources.files("ares_sim").joinpath("presets")))
PRESETS = sorted(p.stem for p in PRESET_DIR.glob("*.scn"))

# Acceptance outcomes, printed once at the end of the session.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def _run_all(root: pathlib.Path) -> dict[str, dict[str, dict]]:
    out = {}
    for name in PRESETS:
        out[name] = {}
        for variant, cfg in load_variants(PRESET_DIR / f"{name}.scn").items():
            out[name][variant] = execute(cfg, root / name / (variant or "base"))
    return out


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("presets_a")
    return root, _run_all(root)


@pytest.fixture(scope="session")
def preset_runs_again(tmp_path_factory):
    root = tmp_path_factory.mktemp("presets_b")
    return root, _run_all(root)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

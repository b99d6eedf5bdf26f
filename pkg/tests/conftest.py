import numpy as np
import pytest

from waveop4d.harness import builtin_config, run_scenario
from waveop4d.potential import RadialPotential
from waveop4d.zero_energy import solve_sector

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def states():
    p = RadialPotential("gaussian", coupling=-1.0)
    return {ell: solve_sector(p, ell) for ell in (1, 2)}


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    """The built-in two-sector scenario, run once for the whole session."""
    out = tmp_path_factory.mktemp("l1-dichotomy")
    status, report = run_scenario(builtin_config("l1-dichotomy"), out, threads=1, log=None)
    return {"status": status, "report": report, "out": out,
            "checks": {str(c["id"]): c for c in report["checks"]}}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split(".")[0]), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

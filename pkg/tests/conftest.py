import numpy as np
import pytest

from badband.cube import HyperspectralCube

ACCEPTANCE = []


def record(criterion, passed, detail=""):
    ACCEPTANCE.append((criterion, "PASS" if passed else "FAIL", detail))


def record_skip(criterion, reason):
    ACCEPTANCE.append((criterion, "SKIP", reason))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")


def random_cube(rng, bands, lines, samples, scale=1.0):
    return HyperspectralCube(lines, samples, scale * rng.standard_normal((bands, lines * samples)))


@pytest.fixture
def rs():
    return np.random.default_rng(12345)

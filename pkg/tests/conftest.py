import numpy as np
import pytest

from openchain import BoundaryParams, ModelParams

ETA = 1.0
BOUNDARY = BoundaryParams(0.8, 1.2, 0.6, 0.0)
SEED = 42

CONFIGS = {
    "A": ("1/2", (0.31, -0.17, 0.23)),
    "B": ("1", (0.31, -0.17)),
    "C": ("3/2", (0.31,)),
}


def make_params(name: str, homogeneous: bool = False, eta=ETA, boundary=BOUNDARY) -> ModelParams:
    spin, theta = CONFIGS[name]
    if homogeneous:
        theta = (0.0,) * len(theta)
    return ModelParams(spin, len(theta), eta, boundary, theta)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def random_complex(rng, *shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def spectral_pairs(rng, count, scale=0.6):
    return [
        (complex(*rng.uniform(-scale, scale, 2)), complex(*rng.uniform(-scale, scale, 2)))
        for _ in range(count)
    ]


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

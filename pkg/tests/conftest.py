from __future__ import annotations

import numpy as np
import pytest

from cellfront.mechanics import ForceLaw, GrowthLaw, JkrForce, JkrParams, jkr_coefficients

# acceptance outcomes, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def params() -> JkrParams:
    return JkrParams.reference()


@pytest.fixture(scope="session")
def jkr(params) -> JkrForce:
    return JkrForce(params)


@pytest.fixture(scope="session")
def cubic(params):
    return jkr_coefficients(params)


@pytest.fixture(scope="session")
def law(jkr) -> ForceLaw:
    return ForceLaw(jkr, 5e-3)


@pytest.fixture(scope="session")
def cubic_law(cubic) -> ForceLaw:
    return ForceLaw(cubic, 5e-3)


@pytest.fixture(scope="session")
def deq(jkr) -> float:
    return jkr.d_eq


@pytest.fixture(scope="session")
def growth(deq) -> GrowthLaw:
    rq = 1.0 / deq
    return GrowthLaw(alpha=0.5, rho_M=4.0 / 3.0 * rq, eps=0.01 * 4.0 / 3.0 * rq)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

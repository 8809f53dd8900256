from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfront.errors import MaxStepsExceeded, NonFiniteDerivative, StepUnderflow
from cellfront.odeint import IntegratorSettings, integrate


def test_zero_rhs_is_exact():
    y0 = np.array([1.0, -2.5, 3e-7])
    res = integrate(lambda t, y: np.zeros_like(y), y0, (0.0, 10.0))
    np.testing.assert_array_equal(res.y, y0)
    assert res.t == 10.0


@pytest.mark.parametrize("rtol", [1e-4, 1e-6, 1e-8, 1e-10])
def test_exponential_decay_within_tolerance(rtol):
    res = integrate(lambda t, y: -y, [1.0], (0.0, 1.0), IntegratorSettings(rtol=rtol, atol=rtol * 1e-3))
    assert abs(res.y[0] - np.exp(-1.0)) <= 10 * rtol * np.exp(-1.0)


def test_error_falls_with_tolerance():
    errs = []
    for rtol in (1e-5, 1e-7, 1e-9):
        res = integrate(lambda t, y: -y, [1.0], (0.0, 5.0), IntegratorSettings(rtol=rtol, atol=1e-14))
        errs.append(abs(res.y[0] - np.exp(-5.0)))
    assert errs[0] > errs[1] > errs[2]


def test_harmonic_oscillator_and_dense_output():
    rhs = lambda t, y: np.array([y[1], -y[0]])
    te = np.linspace(0.0, 2 * np.pi, 17)
    res = integrate(rhs, [1.0, 0.0], (0.0, 2 * np.pi), IntegratorSettings(rtol=1e-10, atol=1e-12), t_eval=te)
    np.testing.assert_allclose(res.y, [1.0, 0.0], atol=1e-8)
    np.testing.assert_array_equal(res.t_eval, te)
    # cubic Hermite interpolation: error ~ h^4/384 between 5th-order points
    res = integrate(rhs, [1.0, 0.0], (0.0, 2 * np.pi), IntegratorSettings(rtol=1e-10, atol=1e-12, hmax=0.1), t_eval=te)
    np.testing.assert_allclose(res.y_eval[:, 0], np.cos(te), atol=1e-6)


def test_backward_integration():
    res = integrate(lambda t, y: -y, [np.exp(-2.0)], (2.0, 0.0), IntegratorSettings(rtol=1e-10, atol=1e-14))
    assert res.y[0] == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("method", ["dopri5", "bdf"])
def test_stiff_linear_problem(method):
    lam = 1e4

    def exact(t):
        # y' = lam (cos t - y), y(0) = 0
        k = lam / (1 + lam * lam)
        return k * (lam * np.cos(t) + np.sin(t)) - k * lam * np.exp(-lam * t)

    res = integrate(
        lambda t, y: lam * (np.cos(t) - y),
        [0.0],
        (0.0, 2.0),
        IntegratorSettings(rtol=1e-8, atol=1e-10, method=method),
    )
    assert res.y[0] == pytest.approx(exact(2.0), rel=1e-6)
    if method == "bdf":
        assert res.n_steps < 500


def test_stiff_mode_takes_far_fewer_steps():
    lam = 1e4
    rhs = lambda t, y: lam * (np.cos(t) - y)
    a = integrate(rhs, [0.0], (0.0, 2.0), IntegratorSettings(rtol=1e-6, atol=1e-9))
    b = integrate(rhs, [0.0], (0.0, 2.0), IntegratorSettings(rtol=1e-6, atol=1e-9, method="bdf"))
    assert b.n_steps * 10 < a.n_steps


@pytest.mark.parametrize("method", ["dopri5", "bdf"])
def test_callback_fires_on_every_accepted_step_and_can_stop(method):
    seen = []
    res = integrate(
        lambda t, y: -y, [1.0], (0.0, 10.0), IntegratorSettings(method=method), step_callback=lambda t, y: seen.append(t)
    )
    np.testing.assert_array_equal(np.array(seen), res.step_times)
    res = integrate(lambda t, y: -y, [1.0], (0.0, 10.0), IntegratorSettings(method=method), step_callback=lambda t, y: t > 1.0)
    assert res.stopped and 1.0 < res.t < 10.0


def test_deterministic():
    rhs = lambda t, y: np.array([y[1], (1 - y[0] ** 2) * y[1] - y[0]])
    a = integrate(rhs, [2.0, 0.0], (0.0, 20.0))
    b = integrate(rhs, [2.0, 0.0], (0.0, 20.0))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.step_times, b.step_times)


def test_vector_atol_and_hmax():
    res = integrate(lambda t, y: -y, [1.0, 1e-9], (0.0, 1.0), IntegratorSettings(hmax=0.01), atol=np.array([1e-10, 1e-20]))
    assert np.all(np.diff(np.concatenate([[0.0], res.step_times])) <= 0.01 + 1e-15)
    np.testing.assert_allclose(res.y, [np.exp(-1), 1e-9 * np.exp(-1)], rtol=1e-7)


def test_max_steps_exceeded():
    with pytest.raises(MaxStepsExceeded):
        integrate(lambda t, y: -y, [1.0], (0.0, 100.0), IntegratorSettings(hmax=0.1, max_steps=10))


def test_non_finite_derivative():
    with pytest.raises(NonFiniteDerivative):
        integrate(lambda t, y: np.array([np.nan]), [1.0], (0.0, 1.0))
    with pytest.raises(NonFiniteDerivative):
        integrate(lambda t, y: np.array([np.inf]), [1.0], (0.0, 1.0), IntegratorSettings(method="bdf"))


def test_step_underflow_at_blowup():
    # y' = y^2 blows up at t = 1
    with pytest.raises((StepUnderflow, NonFiniteDerivative)):
        integrate(lambda t, y: y * y, [1.0], (0.0, 2.0), IntegratorSettings(rtol=1e-10, atol=1e-12))


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorSettings(h0=2.0, hmax=1.0)
    with pytest.raises(ValueError):
        IntegratorSettings(method="euler")
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, [1.0], (1.0, 1.0))


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=0.1, max_value=3.0))
def test_linear_scalar_property(k, T):
    res = integrate(lambda t, y: k * y, [1.0], (0.0, T), IntegratorSettings(rtol=1e-9, atol=1e-12))
    assert res.y[0] == pytest.approx(np.exp(k * T), rel=1e-7)

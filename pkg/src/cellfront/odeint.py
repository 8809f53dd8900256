"""Adaptive time integration shared by the IBM and the continuum solver.

Default method is the Dormand-Prince 5(4) embedded pair with local
extrapolation, FSAL, and cubic Hermite dense output. A stiff mode drives
scipy's variable-order BDF stepper through the same interface (accepted-step
callbacks, dense output at requested times, step log).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MaxStepsExceeded, NonFiniteDerivative, StepUnderflow

Rhs = Callable[[float, np.ndarray], np.ndarray]
StepCallback = Callable[[float, np.ndarray], Optional[bool]]

METHODS = ("dopri5", "bdf")


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    h0: Optional[float] = None
    hmax: float = np.inf
    max_steps: int = 1_000_000
    method: str = "dopri5"

    def __post_init__(self) -> None:
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.h0 is not None and not 0 < self.h0 <= self.hmax:
            raise ValueError("need 0 < h0 <= hmax")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    step_times: np.ndarray
    t_eval: np.ndarray
    y_eval: np.ndarray
    n_rhs: int
    n_rejected: int
    stopped: bool = False
    last_h: float = field(default=np.nan)

    @property
    def n_steps(self) -> int:
        return len(self.step_times)


# Dormand-Prince coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between 5th and embedded 4th order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _initial_step(rhs, t0, y0, f0, direction, order, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = rhs(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def integrate(
    rhs: Rhs,
    y0: Sequence[float] | np.ndarray,
    t_span: tuple[float, float],
    settings: IntegratorSettings = IntegratorSettings(),
    step_callback: Optional[StepCallback] = None,
    t_eval: Optional[Sequence[float]] = None,
    atol: Optional[np.ndarray] = None,
    jac_sparsity=None,
) -> IntegrationResult:
    """Advance y' = rhs(t, y) over t_span.

    ``atol`` overrides the scalar tolerance in ``settings`` with a
    per-component vector. ``step_callback(t, y)`` runs after every accepted
    step; returning True stops the integration at that step.
    ``jac_sparsity`` is only used in stiff mode.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 == t0:
        raise ValueError("degenerate time span")
    y0 = np.array(y0, dtype=float)
    at = settings.atol if atol is None else np.asarray(atol, dtype=float)
    te = np.asarray([] if t_eval is None else t_eval, dtype=float)
    if settings.method == "bdf":
        return _integrate_bdf(rhs, y0, t0, t1, settings, at, step_callback, te, jac_sparsity)
    return _integrate_dopri(rhs, y0, t0, t1, settings, at, step_callback, te)


def _integrate_dopri(rhs, y, t, t1, st, atol, callback, te):
    direction = 1.0 if t1 > t else -1.0
    rtol = st.rtol
    f = np.asarray(rhs(t, y), dtype=float)
    n_rhs = 1
    if not np.all(np.isfinite(f)):
        raise NonFiniteDerivative(f"non-finite derivative at t = {t}")
    if st.h0 is not None:
        h = st.h0
    else:
        h = _initial_step(rhs, t, y, f, direction, 4, rtol, atol)
        n_rhs += 1
    h = min(h, st.hmax, abs(t1 - t))
    y_eval = np.empty((len(te), y.size))
    ie = 0
    while ie < len(te) and (te[ie] - t) * direction <= 0:
        y_eval[ie] = y
        ie += 1
    steps: list[float] = []
    n_rej = 0
    bad_in_row = 0
    k = np.empty((7, y.size))
    stopped = False
    last_h = h
    while (t1 - t) * direction > 0:
        if len(steps) >= st.max_steps:
            raise MaxStepsExceeded(f"more than {st.max_steps} steps before t = {t1}")
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepUnderflow(f"step size underflow at t = {t}")
        if abs(t1 - t) <= 1.01 * h:
            h = abs(t1 - t)
        hd = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y + hd * np.dot(_A[i], k[:i])
            k[i] = rhs(t + _C[i] * hd, yi)
        n_rhs += 6
        y_new = yi  # the 7th stage argument is the 5th-order solution
        f_new = k[6].copy()  # k is overwritten by the next step
        if not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(y_new))):
            bad_in_row += 1
            if bad_in_row > 30:
                raise NonFiniteDerivative(f"non-finite derivative near t = {t}")
            n_rej += 1
            h *= 0.25
            continue
        bad_in_row = 0
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((hd * np.dot(_E, k) / scale) ** 2)) if y.size else 0.0
        if err <= 1.0:
            t_new = t + hd
            if abs(t1 - t_new) < 1e-14 * max(abs(t1), 1.0):
                t_new = t1
            while ie < len(te) and (te[ie] - t_new) * direction <= 0:
                y_eval[ie] = _hermite(t, y, f, t_new, y_new, f_new, te[ie])
                ie += 1
            t, y, f = t_new, y_new, f_new
            steps.append(t)
            last_h = h
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * fac, st.hmax)
            if callback is not None and callback(t, y):
                stopped = True
                break
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    return IntegrationResult(
        t=t,
        y=y,
        step_times=np.asarray(steps),
        t_eval=te[:ie],
        y_eval=y_eval[:ie],
        n_rhs=n_rhs,
        n_rejected=n_rej,
        stopped=stopped,
        last_h=last_h,
    )


def _integrate_bdf(rhs, y, t, t1, st, atol, callback, te, jac_sparsity):
    from scipy.integrate import BDF

    calls = [0]

    def fun(tt, yy):
        calls[0] += 1
        out = np.asarray(rhs(tt, yy), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteDerivative(f"non-finite derivative at t = {tt}")
        return out

    solver = BDF(
        fun,
        t,
        y,
        t1,
        rtol=st.rtol,
        atol=atol,
        max_step=st.hmax,
        first_step=st.h0,
        jac_sparsity=jac_sparsity,
    )
    direction = 1.0 if t1 > t else -1.0
    y_eval = np.empty((len(te), y.size))
    ie = 0
    while ie < len(te) and (te[ie] - t) * direction <= 0:
        y_eval[ie] = y
        ie += 1
    steps: list[float] = []
    stopped = False
    while solver.status == "running":
        if len(steps) >= st.max_steps:
            raise MaxStepsExceeded(f"more than {st.max_steps} steps before t = {t1}")
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(f"stiff solver failed at t = {solver.t}: {msg}")
        steps.append(solver.t)
        if ie < len(te) and (te[ie] - solver.t) * direction <= 0:
            dense = solver.dense_output()
            while ie < len(te) and (te[ie] - solver.t) * direction <= 0:
                y_eval[ie] = dense(te[ie])
                ie += 1
        if callback is not None and callback(solver.t, solver.y):
            stopped = True
            break
    return IntegrationResult(
        t=solver.t,
        y=solver.y.copy(),
        step_times=np.asarray(steps),
        t_eval=te[:ie],
        y_eval=y_eval[:ie],
        n_rhs=calls[0],
        n_rejected=0,
        stopped=stopped,
        last_h=solver.step_size if solver.step_size is not None else np.nan,
    )

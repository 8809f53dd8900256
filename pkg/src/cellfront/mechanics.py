"""Constitutive laws: intercellular force, nonlinear diffusion, pressure, growth.

All quantities are SI. Distances in m, densities in 1/m (cells per unit
length), forces in N, damping in kg/s. The pressure has the units of a
diffusivity (m^2/s) because it is defined through dP/drho = D(rho)/rho.

Two force profiles are available and are interchangeable wherever a
``ForceLaw`` is expected:

* ``CubicForceCoeffs``: third-order Taylor surrogate of the JKR law around
  the equilibrium distance.
* ``JkrForce``: the exact equal-cell JKR law, evaluated through its
  parametrisation by the contact radius. Monotone on the whole contact
  range, so it is the default for simulations (the cubic loses
  monotonicity at about 1.13 rho_eq, see notes in the README).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import constants, optimize, special

from .errors import NoBracket, NonConvergence, NonPositiveEquilibriumDistance

ArrayLike = Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JkrParams:
    """Equal-cell JKR contact parameters."""

    R: float
    E: float
    nu: float
    gamma: float

    def __post_init__(self) -> None:
        if not (self.R > 0 and self.E > 0 and self.gamma > 0):
            raise ValueError("R, E and gamma must be positive")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError("nu must lie in [0, 1)")

    @property
    def Etilde(self) -> float:
        return self.E / (2.0 * (1.0 - self.nu**2))

    @property
    def R_eff(self) -> float:
        # R_ij for two equal spheres
        return 0.5 * self.R

    @classmethod
    def from_adhesion_density(
        cls, R: float, E: float, nu: float, zeta: float, T: float
    ) -> "JkrParams":
        return cls(R=R, E=E, nu=nu, gamma=zeta * constants.Boltzmann * T)

    @classmethod
    def reference(cls) -> "JkrParams":
        """Parameter set used throughout the examples and tests."""
        return cls.from_adhesion_density(R=7.5e-6, E=300.0, nu=0.4, zeta=1e15, T=298.0)


def _equilibrium(p: JkrParams) -> tuple[float, float]:
    """Return (d_eq, delta_eq)."""
    pg = np.pi * p.gamma
    delta_eq = 0.5 * pg ** (2.0 / 3.0) * (3.0 * p.R) ** (1.0 / 3.0) / p.Etilde ** (2.0 / 3.0)
    d_eq = 2.0 * p.R - delta_eq
    if not d_eq > 0:
        raise NonPositiveEquilibriumDistance(
            f"2R - delta_eq = {d_eq:.6g} m is not positive; adhesion too strong for this modulus"
        )
    return d_eq, delta_eq


# ---------------------------------------------------------------------------
# cubic surrogate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicForceCoeffs:
    """F(d) = a1 x + a2 x^2 + a3 x^3 with x = (d - d_eq)/d_eq, zero for d >= d_eq.

    The a_k carry units of N, so the displacement enters as a ratio.
    """

    d_eq: float
    a1: float
    a2: float
    a3: float

    def __post_init__(self) -> None:
        if not self.d_eq > 0:
            raise NonPositiveEquilibriumDistance("d_eq must be positive")
        if not self.a1 < 0:
            raise ValueError("a1 must be negative")

    @property
    def dimensional(self) -> tuple[float, float, float]:
        """Coefficients b_k with F = sum b_k (d - d_eq)^k, in N/m^k."""
        return (self.a1 / self.d_eq, self.a2 / self.d_eq**2, self.a3 / self.d_eq**3)

    def force(self, d: ArrayLike) -> ArrayLike:
        d = np.asarray(d, dtype=float)
        x = np.minimum(d / self.d_eq - 1.0, 0.0)
        f = x * (self.a1 + x * (self.a2 + x * self.a3))
        return f if f.ndim else float(f)

    def dforce(self, d: ArrayLike) -> ArrayLike:
        d = np.asarray(d, dtype=float)
        x = d / self.d_eq - 1.0
        fp = (self.a1 + x * (2.0 * self.a2 + 3.0 * x * self.a3)) / self.d_eq
        fp = np.where(x < 0.0, fp, 0.0)
        return fp if fp.ndim else float(fp)

    def force_and_dforce(self, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.force(d)), np.asarray(self.dforce(d))

    def turning_distance(self) -> float:
        """Largest d < d_eq where F'(d) = 0, i.e. where the surrogate stops
        being monotone. Returns 0 if there is none on (0, d_eq)."""
        roots = np.roots([3.0 * self.a3, 2.0 * self.a2, self.a1])
        xs = [r.real for r in roots if abs(r.imag) < 1e-14 and -1.0 < r.real < 0.0]
        return self.d_eq * (1.0 + max(xs)) if xs else 0.0

    def energy(self, d: ArrayLike) -> ArrayLike:
        """Overlap energy V(d) = int_d^{d_eq} F(s) ds, so that V' = -F."""
        d = np.asarray(d, dtype=float)
        x = np.minimum(d / self.d_eq - 1.0, 0.0)
        v = -self.d_eq * x * x * (self.a1 / 2.0 + x * (self.a2 / 3.0 + x * self.a3 / 4.0))
        return v if v.ndim else float(v)

    def pressure(self, rho: ArrayLike, eta: float) -> ArrayLike:
        b1, b2, b3 = self.dimensional
        req = 1.0 / self.d_eq
        al1 = b1 * req**2 - 2.0 * b2 * req + 3.0 * b3
        al2 = b2 * req**2 - 3.0 * b3 * req
        al3 = b3 * req**2

        def closed(r):
            return (0.5 * al1 * r**2 + (2.0 / 3.0) * al2 * r + 0.75 * al3) / (eta * req**2 * r**4)

        rho = np.asarray(rho, dtype=float)
        p = np.where(rho > req, closed(np.maximum(rho, req)) - closed(req), 0.0)
        return p if p.ndim else float(p)


def jkr_coefficients(p: JkrParams) -> CubicForceCoeffs:
    d_eq, _ = _equilibrium(p)
    pg = np.pi * p.gamma
    Et = p.Etilde
    a1 = -0.6 * (3.0 * p.R * Et) ** (2.0 / 3.0) * pg ** (1.0 / 3.0) * d_eq
    a2 = (33.0 / 125.0) * Et ** (4.0 / 3.0) * (3.0 * p.R) ** (1.0 / 3.0) / pg ** (1.0 / 3.0) * d_eq**2
    a3 = (209.0 / 3125.0) * Et**2 / pg * d_eq**3
    return CubicForceCoeffs(d_eq=d_eq, a1=a1, a2=a2, a3=a3)


def force_cubic(d: ArrayLike, c: CubicForceCoeffs) -> ArrayLike:
    return c.force(d)


# ---------------------------------------------------------------------------
# exact JKR
# ---------------------------------------------------------------------------


def force_implicit_jkr(d: float, p: JkrParams, tol: float = 1e-13, maxiter: int = 200) -> float:
    """Solve the implicit JKR system for the force at centre distance d.

    Bracketed root-finding on F, with the contact radius a(F) given in
    closed form. Zero for d >= d_eq. Scalar only; this is the slow oracle.
    """
    d_eq, _ = _equilibrium(p)
    if d >= d_eq:
        return 0.0
    Rs, Es = p.R_eff, p.Etilde
    al = 3.0 * np.pi * p.gamma * Rs
    delta_target = 2.0 * p.R - d
    if delta_target > 2.0 * p.R:
        raise NoBracket("negative distance")

    def delta_of_force(F: float) -> float:
        a = (0.75 * Rs / Es * (F + al + np.sqrt(max(2.0 * al * F + al * al, 0.0)))) ** (1.0 / 3.0)
        return a * a / Rs - np.sqrt(2.0 * np.pi * p.gamma * a / Es)

    def resid(F: float) -> float:
        return delta_of_force(F) - delta_target

    lo = -0.5 * al
    if resid(lo) > 0:
        raise NoBracket(f"d = {d:.6g} m lies outside the stable JKR branch")
    hi = max(al, 1e-30)
    for _ in range(200):
        if resid(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NoBracket("could not bracket the JKR force")
    try:
        F, info = optimize.brentq(
            resid, lo, hi, xtol=1e-300, rtol=max(tol, 4 * np.finfo(float).eps), maxiter=maxiter, full_output=True
        )
    except RuntimeError as exc:
        raise NonConvergence(str(exc)) from exc
    if not info.converged:
        raise NonConvergence("JKR root-finding did not converge")
    return float(F)


@dataclass(frozen=True)
class JkrForce:
    """Exact equal-cell JKR force, explicit in the contact radius a:

        delta(a) = a^2/R* - k3 sqrt(a),   F(a) = k1 a^3 - k2 a^(3/2),

    with R* = R/2, k1 = 4E*/(3R*), k2 = sqrt(8 pi gamma E*), k3 = sqrt(2 pi gamma/E*).
    For a given d the contact radius is found by Newton iteration on the
    convex map delta(a).
    """

    params: JkrParams
    d_eq: float = field(init=False)
    delta_eq: float = field(init=False)
    a_eq: float = field(init=False)
    _k: tuple[float, float, float] = field(init=False, repr=False)
    _q_eq: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        p = self.params
        d_eq, delta_eq = _equilibrium(p)
        Rs, Es = p.R_eff, p.Etilde
        k1 = 4.0 * Es / (3.0 * Rs)
        k2 = np.sqrt(8.0 * np.pi * p.gamma * Es)
        k3 = np.sqrt(2.0 * np.pi * p.gamma / Es)
        a_eq = (9.0 * np.pi * p.gamma * Rs**2 / (2.0 * Es)) ** (1.0 / 3.0)
        object.__setattr__(self, "d_eq", d_eq)
        object.__setattr__(self, "delta_eq", delta_eq)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "_k", (k1, k2, k3))
        object.__setattr__(self, "_q_eq", self._q(np.asarray(a_eq)))

    def _q(self, a: np.ndarray) -> np.ndarray:
        # antiderivative of F(a) delta'(a)
        k1, k2, k3 = self._k
        Rs = self.params.R_eff
        return 0.4 * k1 * a**5 / Rs - (0.5 * k1 * k3 + 2.0 * k2 / Rs) * a**3.5 / 3.5 + 0.25 * k2 * k3 * a**2

    def contact_radius(self, d: ArrayLike) -> np.ndarray:
        """Contact radius on the stable branch, for d <= d_eq (clipped)."""
        Rs = self.params.R_eff
        k3 = self._k[2]
        delta = np.maximum(2.0 * self.params.R - np.asarray(d, dtype=float), self.delta_eq)
        # Hertz guess lies left of the root but right of the minimum of delta(a);
        # delta(a) is convex there so Newton converges monotonically after one step
        a = np.maximum(np.sqrt(Rs * delta), self.a_eq)
        for _ in range(60):
            sa = np.sqrt(a)
            g = a * a / Rs - k3 * sa - delta
            gp = 2.0 * a / Rs - 0.5 * k3 / sa
            step = g / gp
            a = a - step
            # non-finite entries are left for the caller to reject
            if not np.any(np.abs(step) > 1e-15 * a):
                break
        else:
            raise NonConvergence("contact radius iteration did not converge")
        return a

    def force(self, d: ArrayLike) -> ArrayLike:
        d = np.asarray(d, dtype=float)
        k1, k2, _ = self._k
        a = self.contact_radius(d)
        f = np.where(d < self.d_eq, k1 * a**3 - k2 * a**1.5, 0.0)
        return f if f.ndim else float(f)

    def dforce(self, d: ArrayLike) -> ArrayLike:
        d = np.asarray(d, dtype=float)
        k1, k2, k3 = self._k
        Rs = self.params.R_eff
        a = self.contact_radius(d)
        sa = np.sqrt(a)
        dfda = 3.0 * k1 * a * a - 1.5 * k2 * sa
        ddda = 2.0 * a / Rs - 0.5 * k3 / sa
        # d(delta) = -d(d)
        fp = np.where(d < self.d_eq, -dfda / ddda, 0.0)
        return fp if fp.ndim else float(fp)

    def energy(self, d: ArrayLike) -> ArrayLike:
        """Overlap energy V(d) = int_d^{d_eq} F(s) ds, so that V' = -F."""
        d = np.asarray(d, dtype=float)
        v = np.where(d < self.d_eq, self._q(self.contact_radius(d)) - self._q_eq, 0.0)
        return v if v.ndim else float(v)

    def force_and_dforce(self, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.asarray(d, dtype=float)
        k1, k2, k3 = self._k
        Rs = self.params.R_eff
        a = self.contact_radius(d)
        sa = np.sqrt(a)
        inside = d < self.d_eq
        f = np.where(inside, k1 * a**3 - k2 * a * sa, 0.0)
        fp = np.where(inside, -(3.0 * k1 * a * a - 1.5 * k2 * sa) / (2.0 * a / Rs - 0.5 * k3 / sa), 0.0)
        return f, fp

    def pressure(self, rho: ArrayLike, eta: float) -> ArrayLike:
        # P = F(1/rho)/(eta rho) + (1/eta) int_{1/rho}^{d_eq} F(s) ds
        rho = np.asarray(rho, dtype=float)
        r = np.maximum(rho, 1.0 / self.d_eq)
        d = 1.0 / r
        k1, k2, _ = self._k
        a = self.contact_radius(d)
        f = k1 * a**3 - k2 * a**1.5
        work = self._q(a) - self._q_eq
        p = np.where(rho * self.d_eq > 1.0, (f / r + work) / eta, 0.0)
        return p if p.ndim else float(p)

    def turning_distance(self) -> float:
        return 0.0


ForceProfile = Union[CubicForceCoeffs, JkrForce]


# ---------------------------------------------------------------------------
# force law, diffusion, pressure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForceLaw:
    """A force profile together with the damping coefficient of a population."""

    profile: ForceProfile
    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def d_eq(self) -> float:
        return self.profile.d_eq

    @property
    def rho_eq(self) -> float:
        return 1.0 / self.profile.d_eq

    @property
    def rho_max(self) -> float:
        """Upper end of the density range on which the law is monotone."""
        dt = self.profile.turning_distance()
        return 1.0 / dt if dt > 0 else np.inf

    def force(self, d: ArrayLike) -> ArrayLike:
        return self.profile.force(d)

    def dforce(self, d: ArrayLike) -> ArrayLike:
        return self.profile.dforce(d)

    def energy(self, d: ArrayLike) -> ArrayLike:
        return self.profile.energy(d)

    def potential_and_diffusion(self, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(F(1/rho)/eta, D(rho)) in one pass; used by the interface solvers."""
        rho = np.asarray(rho, dtype=float)
        r = np.maximum(rho, self.rho_eq)
        f, fp = self.profile.force_and_dforce(1.0 / r)
        D = np.where(rho > self.rho_eq, -fp / (self.eta * r * r), 0.0)
        return f / self.eta, D

    def potential(self, rho: ArrayLike) -> ArrayLike:
        """F(1/rho)/eta. Its x-derivative is minus the mass flux D rho_x."""
        return self.profile.force(1.0 / np.asarray(rho, dtype=float)) / self.eta

    def force_inverse(self, f: float) -> float:
        """Density rho > rho_eq with F(1/rho) = f (f > 0)."""
        if f <= 0:
            return self.rho_eq
        lo, hi = self.rho_eq, 2.0 * self.rho_eq
        hi_cap = min(self.rho_max, 1e3 * self.rho_eq)
        while self.profile.force(1.0 / hi) < f:
            lo, hi = hi, min(2.0 * hi, hi_cap)
            if lo >= hi_cap:
                raise NonConvergence(f"force {f:.6g} N is out of range")
        return float(optimize.brentq(lambda r: self.profile.force(1.0 / r) - f, lo, hi, xtol=1e-300, rtol=1e-14))


def diffusion_coeff(rho: ArrayLike, law: ForceLaw) -> ArrayLike:
    rho = np.asarray(rho, dtype=float)
    r = np.maximum(rho, law.rho_eq)
    D = np.where(rho > law.rho_eq, -law.dforce(1.0 / r) / (law.eta * r * r), 0.0)
    return D if D.ndim else float(D)


def pressure(rho: ArrayLike, law: ForceLaw) -> ArrayLike:
    return law.profile.pressure(rho, law.eta)


def pressure_inverse(P: ArrayLike, law: ForceLaw, rtol: float = 1e-13) -> ArrayLike:
    """Invert the barotropic relation on (rho_eq, rho_max). Vectorised
    safeguarded Newton (dP/drho = D/rho) inside a bisection bracket."""
    P = np.asarray(P, dtype=float)
    scalar = P.ndim == 0
    P = np.atleast_1d(P)
    if np.any(P < 0):
        raise ValueError("pressure must be nonnegative")
    req = law.rho_eq
    out = np.full(P.shape, req)
    m = P > 0
    if not np.any(m):
        return float(out[0]) if scalar else out
    target = P[m]
    cap = law.rho_max * (1.0 - 1e-9) if np.isfinite(law.rho_max) else 1e3 * req
    lo = np.full(target.shape, req)
    hi = np.full(target.shape, min(2.0 * req, cap))
    for _ in range(64):
        short = pressure(hi, law) < target
        if not np.any(short):
            break
        if np.any(hi[short] >= cap):
            raise NonConvergence("pressure is above the range of the force law")
        lo[short] = hi[short]
        hi[short] = np.minimum(2.0 * hi[short], cap)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = pressure(x, law) - target
        lo = np.where(r < 0, x, lo)
        hi = np.where(r >= 0, x, hi)
        slope = diffusion_coeff(x, law) / x
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - r / slope
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= rtol * x
        x = xn
        if np.all(done):
            break
    else:
        raise NonConvergence("pressure inversion did not converge")
    out[m] = x
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# growth
# ---------------------------------------------------------------------------

SHAPES = ("smoothstep", "logistic")


@dataclass(frozen=True)
class GrowthLaw:
    """G(rho) = alpha * H(rho_M - rho) with a smoothed Heaviside H of width eps.

    ``smoothstep``: C^3 septic ramp, H = 0 for x <= 0 and 1 for x >= eps, so
    growth stops exactly at rho_M.
    ``logistic``: H(x) = 1/(1 + exp(-x/eps)), H(0) = 1/2.
    """

    alpha: float
    rho_M: float
    eps: float
    shape: str = "smoothstep"

    def __post_init__(self) -> None:
        if self.alpha < 0 or not self.rho_M > 0 or not self.eps > 0:
            raise ValueError("need alpha >= 0, rho_M > 0, eps > 0")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown growth shape {self.shape!r}")

    @classmethod
    def none(cls, rho_M: float = 1.0) -> "GrowthLaw":
        return cls(alpha=0.0, rho_M=rho_M, eps=1e-3 * rho_M)

    def heaviside(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        if self.shape == "logistic":
            h = special.expit(x / self.eps)
        else:
            s = np.clip(x / self.eps, 0.0, 1.0)
            h = s**4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
        return h if h.ndim else float(h)

    def rate(self, rho: ArrayLike) -> ArrayLike:
        return self.alpha * self.heaviside(self.rho_M - np.asarray(rho, dtype=float))

    def rate_of_gap(self, d: ArrayLike) -> ArrayLike:
        """g(d) = G(1/d), the per-cell division rate seen by the IBM."""
        return self.rate(1.0 / np.asarray(d, dtype=float))


def growth_rate(rho: ArrayLike, g: GrowthLaw) -> ArrayLike:
    return g.rate(rho)

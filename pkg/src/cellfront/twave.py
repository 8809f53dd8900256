"""Travelling waves rho(x - c t) of the free-boundary problem.

In the co-moving frame z = x - s1(t) the B population occupies [0, ell]
and its pressure is linear,

    P_B(z) = c (ell - z) + P_B(ell),   F_B(1/rho_B(ell)) = eta_B c / 2,

with ell fixed by the B mass. The A population on z < 0 satisfies

    rho_A P_A' = -c rho_A + int_z^0 G rho_A,   P_A(0) from F_A/eta_A = F_B/eta_B,

and has to approach the contact-inhibition pressure P^M as z -> -inf.
The speed is found by shooting: too fast and P_A crosses P^M, too slow
and P_A turns back before reaching it.

The A-side ODE is integrated in (rho, I) with I(z) = int_z^0 G rho,
using P' = (D/rho) rho', which avoids inverting the pressure at every
stage:

    d rho/ds = (c rho - I)/D(rho),   dI/ds = G(rho) rho,   s = -z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BisectionFailure, InsufficientOverlap, NoSignChange, NonConvergence, ProfileBlowup
from .fbp import FbpTrajectory, front_speed, state_profile
from .mechanics import ForceLaw, GrowthLaw, diffusion_coeff, pressure, pressure_inverse
from .odeint import IntegratorSettings, integrate

_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


@dataclass(frozen=True)
class WaveProfile:
    c: float
    ell: float
    M: float
    zgrid_A: np.ndarray
    P_A: np.ndarray
    rho_A: np.ndarray
    zgrid_B: np.ndarray
    P_B: np.ndarray
    rho_B: np.ndarray
    P_M: float = np.nan
    status: str = "converged"

    def density_at(self, z: np.ndarray) -> np.ndarray:
        """Density at co-moving positions; A for z < 0, B for z >= 0, NaN outside."""
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, np.nan)
        a = (z < 0) & (z >= self.zgrid_A[-1])
        b = (z >= 0) & (z <= self.ell)
        # zgrid_A runs from 0 down to z_min
        out[a] = np.interp(z[a], self.zgrid_A[::-1], self.rho_A[::-1])
        out[b] = np.interp(z[b], self.zgrid_B, self.rho_B)
        return out


# ---------------------------------------------------------------------------
# B plug
# ---------------------------------------------------------------------------


def _plug_mass(ell: float, c: float, P_ell: float, law_B: ForceLaw) -> float:
    # int_0^ell rho dz = (1/c) int_{P_ell}^{P_ell + c ell} rho(p) dp
    if ell <= 0:
        return 0.0
    a, b = P_ell, P_ell + c * ell
    p = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.dot(_GL_W, pressure_inverse(p, law_B)) / c)


def end_density(c: float, law_B: ForceLaw) -> float:
    """rho_B(ell) solving F_B(1/rho) = eta_B c / 2."""
    return law_B.force_inverse(0.5 * law_B.eta * c)


def wave_profile_B(
    c: float, M: float, law_B: ForceLaw, n: int = 401, rtol: float = 1e-13
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Return (ell, z, P_B, rho_B) for speed c and B mass M (number of cells)."""
    if not c > 0:
        raise ValueError("c must be positive")
    if not M > 0:
        raise ValueError("M must be positive")
    P_ell = float(pressure(end_density(c, law_B), law_B))
    lo, hi = 0.0, M / law_B.rho_eq
    if _plug_mass(hi, c, P_ell, law_B) < M:
        raise BisectionFailure("B mass not attainable")
    # bisection bracket, accelerated by Newton steps (d mass / d ell = rho_B(0))
    ell = 0.5 * (lo + hi)
    for _ in range(300):
        f = _plug_mass(ell, c, P_ell, law_B) - M
        if f < 0:
            lo = ell
        else:
            hi = ell
        step = f / float(pressure_inverse(P_ell + c * ell, law_B))
        nxt = ell - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - ell) <= rtol * ell or hi - lo <= rtol * hi:
            ell = nxt
            break
        ell = nxt
    else:
        raise BisectionFailure("plug width iteration did not converge")
    z = np.linspace(0.0, ell, n)
    P = c * (ell - z) + P_ell
    rho = pressure_inverse(P, law_B)
    return ell, z, P, rho


# ---------------------------------------------------------------------------
# A side
# ---------------------------------------------------------------------------


@dataclass
class _Shot:
    status: str  # "overshoot", "undershoot", "reached"
    s: np.ndarray
    rho: np.ndarray
    I: np.ndarray


def _shoot_A(
    c: float,
    rho0: float,
    law_A: ForceLaw,
    growth: GrowthLaw,
    length: float,
    integ: IntegratorSettings,
) -> _Shot:
    rho_M = growth.rho_M
    if rho0 >= rho_M:
        return _Shot("overshoot", np.array([0.0]), np.array([rho0]), np.array([0.0]))

    def rhs(_s, y):
        r, I = y
        D = diffusion_coeff(r, law_A)
        return np.array([(c * r - I) / D, growth.rate(r) * r])

    ss, rr, II = [0.0], [rho0], [0.0]
    status = ["reached"]

    def cb(s, y):
        ss.append(s)
        rr.append(y[0])
        II.append(y[1])
        if y[0] > rho_M:
            status[0] = "overshoot"
            return True
        if c * y[0] - y[1] < 0:
            status[0] = "undershoot"
            return True
        return False

    scale = np.array([law_A.rho_eq, c * law_A.rho_eq])
    integrate(rhs, np.array([rho0, 0.0]), (0.0, length), integ, step_callback=cb, atol=integ.atol * scale)
    return _Shot(status[0], np.array(ss), np.array(rr), np.array(II))


def interface_density_A(rho_B0: float, law_A: ForceLaw, law_B: ForceLaw) -> float:
    """rho_A(0) from the force balance F_A/eta_A = F_B/eta_B."""
    f = float(law_B.force(1.0 / rho_B0)) * law_A.eta / law_B.eta
    return law_A.force_inverse(f)


def wave_profile_A(
    c: float,
    P_A0: float,
    law_A: ForceLaw,
    growth: GrowthLaw,
    z_min: float,
    integ: IntegratorSettings = IntegratorSettings(rtol=1e-11, atol=1e-14),
    n: Optional[int] = None,
    guard: float = 1e-3,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward integration from z = 0 to z_min. Returns (z, P_A, rho_A) on
    the accepted steps (or on ``n`` uniformly spaced points)."""
    if not (c > 0 and z_min < 0):
        raise ValueError("need c > 0 and z_min < 0")
    if not P_A0 > 0:
        raise ValueError("P_A0 must exceed the equilibrium pressure")
    rho0 = float(pressure_inverse(P_A0, law_A))
    P_M = float(pressure(growth.rho_M, law_A))
    shot = _shoot_A(c, rho0, law_A, growth, -z_min, integ)
    P = pressure(shot.rho, law_A)
    if shot.status == "overshoot" and P.max() > P_M * (1 + guard):
        raise ProfileBlowup(f"P_A exceeds P^M before z_min (c = {c:.6g} too large)")
    if shot.status == "undershoot":
        # past the turning point P_A falls; only a problem if it heads to P_eq
        pass
    z = -shot.s
    if n is not None:
        zz = np.linspace(0.0, z[-1], n)
        rho = np.interp(-zz, shot.s, shot.rho)
        return zz, pressure(rho, law_A), rho
    return z, P, shot.rho


def _trial(c, M, law_A, law_B, growth, length, integ):
    try:
        ell, zB, PB, rhoB = wave_profile_B(c, M, law_B)
        rhoA0 = interface_density_A(rhoB[0], law_A, law_B)
    except (NonConvergence, BisectionFailure):
        # the plug would need densities beyond the force law: far too fast
        return _Shot("overshoot", np.array([0.0]), np.array([np.nan]), np.array([0.0])), None
    shot = _shoot_A(c, rhoA0, law_A, growth, length, integ)
    return shot, (ell, zB, PB, rhoB)


def find_wave_speed(
    M: float,
    law_A: ForceLaw,
    law_B: ForceLaw,
    growth: GrowthLaw,
    z_min: float,
    tol: float = 1e-6,
    c_bracket: Optional[tuple[float, float]] = None,
    integ: IntegratorSettings = IntegratorSettings(rtol=1e-11, atol=1e-14),
    max_iter: int = 200,
) -> WaveProfile:
    """Shoot on c until the A profile stays within tol*P^M of P^M at z_min."""
    if not z_min < 0:
        raise ValueError("z_min must be negative")
    length = -z_min
    P_M = float(pressure(growth.rho_M, law_A))
    deq = law_A.d_eq
    if c_bracket is None:
        # low: a tiny speed always undershoots; high: grow until overshoot
        lo = 1e-9 * P_M / (M * deq)
        hi = P_M / (M * deq)
        for _ in range(80):
            shot, _ = _trial(hi, M, law_A, law_B, growth, length, integ)
            if shot.status == "overshoot":
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise NoSignChange("no overshooting speed found")
    else:
        lo, hi = c_bracket
    s_lo, _ = _trial(lo, M, law_A, law_B, growth, length, integ)
    s_hi, _ = _trial(hi, M, law_A, law_B, growth, length, integ)
    if s_lo.status != "undershoot" or s_hi.status != "overshoot":
        raise NoSignChange(f"bracket [{lo:.6g}, {hi:.6g}] gives ({s_lo.status}, {s_hi.status})")

    best = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        shot, plug = _trial(mid, M, law_A, law_B, growth, length, integ)
        if shot.status == "reached":
            P_end = float(pressure(shot.rho[-1], law_A))
            if abs(P_end - P_M) <= tol * P_M:
                best = (mid, shot, plug)
                break
            # a trajectory that stalls short of P^M behaves like an undershoot
            if P_end < P_M:
                lo = mid
            else:
                hi = mid
        elif shot.status == "overshoot":
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    if best is None:
        raise NoSignChange(f"shooting stalled at c in [{lo:.6g}, {hi:.6g}] without meeting tol")
    c, shot, (ell, zB, PB, rhoB) = best
    return WaveProfile(
        c=c,
        ell=ell,
        M=M,
        zgrid_A=-shot.s,
        P_A=pressure(shot.rho, law_A),
        rho_A=shot.rho,
        zgrid_B=zB,
        P_B=PB,
        rho_B=rhoB,
        P_M=P_M,
    )


def wave_from_speed(
    c: float,
    M: float,
    law_A: ForceLaw,
    law_B: ForceLaw,
    growth: GrowthLaw,
    z_min: float,
    integ: IntegratorSettings = IntegratorSettings(rtol=1e-11, atol=1e-14),
) -> WaveProfile:
    """Profile for an externally supplied speed (e.g. measured), no shooting."""
    ell, zB, PB, rhoB = wave_profile_B(c, M, law_B)
    shot = _shoot_A(c, interface_density_A(rhoB[0], law_A, law_B), law_A, growth, -z_min, integ)
    return WaveProfile(
        c=c,
        ell=ell,
        M=M,
        zgrid_A=-shot.s,
        P_A=pressure(shot.rho, law_A),
        rho_A=shot.rho,
        zgrid_B=zB,
        P_B=PB,
        rho_B=rhoB,
        P_M=float(pressure(growth.rho_M, law_A)),
        status=shot.status,
    )


def check_profile(wp: WaveProfile, law_A: ForceLaw, law_B: ForceLaw, growth: GrowthLaw, tol: float = 1e-6) -> list[str]:
    """Violations of the travelling-wave invariants (empty list if none)."""
    bad = []
    expected = wp.c * (wp.ell - wp.zgrid_B) + wp.P_B[-1]
    if np.max(np.abs(wp.P_B - expected)) > 1e-12 * max(wp.P_B.max(), 1e-300):
        bad.append("P_B not linear with slope -c")
    if not wp.rho_B[-1] > law_B.rho_eq:
        bad.append("rho_B(ell) not above rho_eq")
    if np.any(np.diff(wp.rho_B) >= 0):
        bad.append("rho_B not strictly decreasing")
    # zgrid_A runs towards -inf, so rho_A must increase along it
    if np.any(np.diff(wp.rho_A) <= 0):
        bad.append("rho_A not strictly decreasing in z")
    if not (law_A.rho_eq < wp.rho_A[0] and wp.rho_A.max() < growth.rho_M):
        bad.append("rho_A outside (rho_eq, rho_M)")
    if abs(wp.P_A[-1] - wp.P_M) > tol * wp.P_M:
        bad.append("rho_A(z_min) not at the contact-inhibition level")
    return bad


def plug_mass(wp: WaveProfile, law_B: ForceLaw) -> float:
    """Mass of the B plug by Gauss quadrature in the pressure variable."""
    return _plug_mass(wp.ell, wp.c, float(wp.P_B[-1]), law_B)


# ---------------------------------------------------------------------------
# comparison with the FBP
# ---------------------------------------------------------------------------


@dataclass
class WaveComparison:
    times: np.ndarray
    l2_rel: np.ndarray
    linf_rel: np.ndarray
    c_shot: float
    c_measured: float
    c2_measured: float
    per_snapshot: list = field(default_factory=list)

    @property
    def speed_gap(self) -> float:
        return self.c_measured - self.c_shot

    @property
    def speed_gap_rel(self) -> float:
        return abs(self.speed_gap) / self.c_shot


def compare_wave_to_fbp(
    profile: WaveProfile, traj: FbpTrajectory, window: tuple[float, float], min_points: int = 10
) -> WaveComparison:
    """Shift every snapshot in the window to the co-moving frame of its own
    interface and measure the density mismatch on the overlap. Norms are
    relative to the wave profile and weighted by the FBP cell widths."""
    problem = traj.problem
    times, l2s, lis = [], [], []
    for st in traj.states:
        if not window[0] <= st.t <= window[1]:
            continue
        x, rho, pop = state_profile(problem, st)
        z = x - st.s1
        # cell centres only (the appended traces carry no volume)
        wA = problem.grid_A.widths * (st.s1 - st.s0)
        wB = problem.grid_B.widths * (st.s2 - st.s1)
        zc = np.concatenate([z[1 : problem.nA + 1], z[problem.nA + 3 : -1]])
        rc = np.concatenate([rho[1 : problem.nA + 1], rho[problem.nA + 3 : -1]])
        wc = np.concatenate([wA, wB])
        ref = profile.density_at(zc)
        ok = np.isfinite(ref)
        if ok.sum() < min_points:
            raise InsufficientOverlap(f"only {int(ok.sum())} overlapping points at t = {st.t}")
        d = rc[ok] - ref[ok]
        l2s.append(float(np.sqrt(np.sum(wc[ok] * d * d) / np.sum(wc[ok] * ref[ok] ** 2))))
        lis.append(float(np.max(np.abs(d) / ref[ok])))
        times.append(st.t)
    if not times:
        raise InsufficientOverlap("no snapshots in the comparison window")
    t, s1, s2 = traj.all_boundaries()
    fit = front_speed(t, s1, s2, window)
    return WaveComparison(
        times=np.array(times),
        l2_rel=np.array(l2s),
        linf_rel=np.array(lis),
        c_shot=profile.c,
        c_measured=fit.c1,
        c2_measured=fit.c2,
    )

"""Continuum free-boundary problem for the two populations.

    rho_t = (D(rho) rho_x)_x + G(rho) rho   on (s0, s1)   (population A)
    rho_t = (D(rho) rho_x)_x                 on (s1, s2)   (population B)

with D = -F'(1/rho)/(eta rho^2), so that D rho_x = d/dx [F(1/rho)/eta].
Boundary and transmission conditions:

    zero flux at s0,
    F_A/eta_A = F_B/eta_B and equal velocities -(F_l(1/rho)/eta_l)_x / rho at s1,
    velocity = 2 F_B/eta_B at s2,

and both moving boundaries travel with the material velocity there.

Discretisation: each domain is mapped onto [0, 1] (front fixing) and
split into finite volumes. The unknowns are the cell masses, so the
advective correction of the moving frame appears as a face flux
-xdot*u. Outer faces carry no flux because the boundaries are material,
which makes the B mass exact up to round-off. Boundary traces come from
second-order one-sided differences: a 2x2 Newton solve at s1 and a scalar
Newton solve at s2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.sparse import lil_matrix

from .errors import DomainCollapse, InsufficientData, InterfaceFailure, ToleranceNotMet
from .mechanics import ForceLaw, GrowthLaw
from .odeint import IntegratorSettings, integrate


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Finite-volume grid on [0, 1]; ``faces`` includes both ends."""

    faces: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.faces, dtype=float)
        if f[0] != 0.0 or f[-1] != 1.0 or np.any(np.diff(f) <= 0):
            raise ValueError("faces must increase from 0 to 1")
        object.__setattr__(self, "faces", f)

    @property
    def n(self) -> int:
        return self.faces.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.faces)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.faces[1:] + self.faces[:-1])


def make_grid(n: int, stretch: float = 0.0, cluster: str = "right") -> Grid:
    """Uniform grid, or tanh clustering of strength ``stretch`` towards one end."""
    if n < 4:
        raise ValueError("need at least 4 cells")
    xi = np.linspace(0.0, 1.0, n + 1)
    if stretch > 0:
        if cluster == "right":
            xi = np.tanh(stretch * xi) / np.tanh(stretch)
        elif cluster == "left":
            xi = 1.0 - np.tanh(stretch * (1.0 - xi)) / np.tanh(stretch)
        else:
            raise ValueError("cluster must be 'left' or 'right'")
        xi[0], xi[-1] = 0.0, 1.0
    return Grid(xi)


def _one_sided(h1: float, h2: float) -> tuple[float, float, float]:
    """Weights (cb, c1, c2) with f'(0) ~ cb f(0) + c1 f(-h1) + c2 f(-h2),
    exact for quadratics."""
    cb = 1.0 / h1 + 1.0 / h2
    c1 = -h2 / (h1 * (h2 - h1))
    c2 = h1 / (h2 * (h2 - h1))
    return cb, c1, c2


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterfaceState:
    rhoA_if: float
    rhoB_if: float
    flux_if: float  # common velocity of the interface, m/s
    rhoB_end: float
    end_speed: float
    force_residual: float  # |F_A/eta_A - F_B/eta_B| / max of the two
    velocity_residual: float


@dataclass(frozen=True)
class FbpState:
    t: float
    s0: float
    s1: float
    s2: float
    uA: np.ndarray
    uB: np.ndarray
    interface: Optional[InterfaceState] = None

    def __post_init__(self) -> None:
        if not self.s0 < self.s1 < self.s2:
            raise ValueError("need s0 < s1 < s2")

    def massB(self, grid_B: Grid) -> float:
        return float(np.sum(self.uB * grid_B.widths) * (self.s2 - self.s1))

    def massA(self, grid_A: Grid) -> float:
        return float(np.sum(self.uA * grid_A.widths) * (self.s1 - self.s0))


@dataclass(frozen=True)
class FbpProblem:
    law_A: ForceLaw
    law_B: ForceLaw
    growth: GrowthLaw
    grid_A: Grid
    grid_B: Grid
    s0: float = 0.0
    collapse_cells: int = 4
    newton_tol: float = 1e-13
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nA(self) -> int:
        return self.grid_A.n

    @property
    def nB(self) -> int:
        return self.grid_B.n

    # -- state packing -------------------------------------------------------

    def pack(self, st: FbpState) -> np.ndarray:
        LA, LB = st.s1 - st.s0, st.s2 - st.s1
        return np.concatenate(
            [st.uA * self.grid_A.widths * LA, st.uB * self.grid_B.widths * LB, [st.s1, st.s2]]
        )

    def unpack(self, y: np.ndarray, t: float = 0.0) -> FbpState:
        nA, nB = self.nA, self.nB
        s1, s2 = float(y[-2]), float(y[-1])
        uA = y[:nA] / (self.grid_A.widths * (s1 - self.s0))
        uB = y[nA : nA + nB] / (self.grid_B.widths * (s2 - s1))
        return FbpState(t=t, s0=self.s0, s1=s1, s2=s2, uA=uA, uB=uB)

    def jac_sparsity(self):
        nA, nB = self.nA, self.nB
        n = nA + nB + 2
        S = lil_matrix((n, n), dtype=np.int8)
        for i in range(nA + nB):
            for j in (i - 1, i, i + 1):
                if 0 <= j < nA + nB:
                    S[i, j] = 1
        coupled = [nA - 2, nA - 1, nA, nA + 1, nA + nB - 2, nA + nB - 1, n - 2, n - 1]
        for j in coupled:
            S[:, j] = 1
        return S.tocsc()

    # -- boundary solves -----------------------------------------------------

    def _pd(self, law: ForceLaw, rho: np.ndarray):
        return law.potential_and_diffusion(rho)

    def boundary_solve(self, uA: np.ndarray, uB: np.ndarray, LA: float, LB: float) -> InterfaceState:
        gA, gB = self.grid_A, self.grid_B
        la, lb = self.law_A, self.law_B
        # distances from s1 of the two nearest centres on each side, and from s2
        cA = _one_sided(LA * (1.0 - gA.centers[-1]), LA * (1.0 - gA.centers[-2]))
        cB = _one_sided(LB * gB.centers[0], LB * gB.centers[1])
        cE = _one_sided(LB * (1.0 - gB.centers[-1]), LB * (1.0 - gB.centers[-2]))
        phiA_near, _ = self._pd(la, uA[-2:])
        phiB_near, _ = self._pd(lb, np.array([uB[0], uB[1], uB[-1], uB[-2]]))
        kA = cA[1] * phiA_near[1] + cA[2] * phiA_near[0]
        # B side at s1: derivative into the domain (left boundary), sign flipped
        kB = cB[1] * phiB_near[0] + cB[2] * phiB_near[1]
        kE = cE[1] * phiB_near[2] + cE[2] * phiB_near[3]

        # start from the adjacent cell values so the result is a function of
        # the state alone (a cached guess makes the rhs history dependent)
        ra, rb, re = uA[-1], uB[0], uB[-1]
        same = la.profile is lb.profile
        ok = False
        for it in range(60):
            if same:
                phi, D = self._pd(la, np.array([ra, rb, re]))
                pa, da = phi[0], D[0]
                # same profile, only the damping differs
                k = la.eta / lb.eta
                pb, db, pe, de = phi[1] * k, D[1] * k, phi[2] * k, D[2] * k
            else:
                (pa,), (da,) = self._pd(la, np.array([ra]))
                phi, D = self._pd(lb, np.array([rb, re]))
                pb, db, pe, de = phi[0], D[0], phi[1], D[1]
            gradA = cA[0] * pa + kA
            gradB = -(cB[0] * pb + kB)
            gradE = cE[0] * pe + kE
            vA, vB, vE = -gradA / ra, -gradB / rb, -gradE / re
            R1 = pa - pb
            R2 = vA - vB
            R3 = vE - 2.0 * pe
            if R1 == 0.0 and R2 == 0.0 and R3 == 0.0:
                # exact solution, e.g. a resting state at rho_eq where D = 0
                ok = True
                break
            J11, J12 = da, -db
            J21 = -cA[0] * da / ra + gradA / ra**2
            J22 = -(cB[0] * db / rb - (cB[0] * pb + kB) / rb**2)
            det = J11 * J22 - J12 * J21
            J3 = -cE[0] * de / re + gradE / re**2 - 2.0 * de
            if not (np.isfinite(det) and det != 0 and J3 != 0):
                break
            dra = (R1 * J22 - J12 * R2) / det
            drb = (J11 * R2 - J21 * R1) / det
            dre = R3 / J3
            # keep the iterates in the non-degenerate range
            lam = 1.0
            while lam > 1e-4 and (
                ra - lam * dra <= la.rho_eq or rb - lam * drb <= lb.rho_eq or re - lam * dre <= lb.rho_eq
            ):
                lam *= 0.5
            ra, rb, re = ra - lam * dra, rb - lam * drb, re - lam * dre
            if ok:
                break
            # one polishing iteration after the tolerance is reached
            ok = max(abs(dra) / ra, abs(drb) / rb, abs(dre) / re) <= self.newton_tol
        if not ok or not np.isfinite(ra + rb + re):
            return self._bracketed_solve(uA, uB, cA, cB, cE, kA, kB, kE)
        scale = max(abs(pa), abs(pb), 1e-300)
        vscale = max(abs(vA), abs(vB), 1e-300)
        return InterfaceState(
            rhoA_if=float(ra),
            rhoB_if=float(rb),
            flux_if=float(vA),
            rhoB_end=float(re),
            end_speed=float(2.0 * pe),
            force_residual=float(abs(pa - pb) / scale),
            velocity_residual=float(abs(vA - vB) / vscale),
        )

    def _bracketed_solve(self, uA, uB, cA, cB, cE, kA, kB, kE) -> InterfaceState:
        """Fallback for states next to rho_eq, where D jumps to zero and the
        Newton Jacobian is singular. The force balance gives rho_B as a
        function of rho_A, which leaves one scalar root for s1 and one for
        s2, each bracketed on [rho_eq, cap]. A root that sits on the
        degenerate end rho_eq is accepted as is."""
        la, lb = self.law_A, self.law_B

        def cap(law, u):
            top = 2.0 * max(float(np.max(u)), law.rho_eq)
            return min(top, law.rho_max * (1.0 - 1e-9))

        def rb_of(ra):
            return lb.force_inverse(float(la.force(1.0 / ra)) * lb.eta / la.eta)

        def v_mismatch(ra):
            rb = rb_of(ra)
            vA = -(cA[0] * float(la.potential(ra)) + kA) / ra
            vB = (cB[0] * float(lb.potential(rb)) + kB) / rb
            return vA - vB

        def end_residual(re):
            pe = float(lb.potential(re))
            return -(cE[0] * pe + kE) / re - 2.0 * pe

        def root(f, lo, hi):
            flo, fhi = f(lo), f(hi)
            if flo == 0.0 or flo * fhi > 0:
                # no interior root: the trace rests on the degenerate end
                if flo * fhi > 0 and abs(fhi) < abs(flo):
                    raise InterfaceFailure("interface equations have no root above rho_eq")
                return lo
            return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

        ra = root(v_mismatch, la.rho_eq, cap(la, uA[-2:]))
        rb = rb_of(ra)
        re = root(end_residual, lb.rho_eq, cap(lb, uB[-2:]))
        pa, pb, pe = float(la.potential(ra)), float(lb.potential(rb)), float(lb.potential(re))
        vA = -(cA[0] * pa + kA) / ra
        vB = (cB[0] * pb + kB) / rb
        return InterfaceState(
            rhoA_if=float(ra),
            rhoB_if=float(rb),
            flux_if=float(vA),
            rhoB_end=float(re),
            end_speed=float(2.0 * pe),
            force_residual=float(abs(pa - pb) / max(abs(pa), abs(pb), 1e-300)),
            velocity_residual=float(abs(vA - vB) / max(abs(vA), abs(vB), 1e-300)),
        )

    # -- right-hand side -----------------------------------------------------

    def rhs(self, t: float, y: np.ndarray, want_interface: bool = False):
        nA, nB = self.nA, self.nB
        gA, gB = self.grid_A, self.grid_B
        s1, s2 = y[-2], y[-1]
        LA, LB = s1 - self.s0, s2 - s1
        if LA <= self.collapse_cells * self._h_ref("A") or LB <= self.collapse_cells * self._h_ref("B"):
            raise DomainCollapse(f"domain shorter than {self.collapse_cells} reference cells at t = {t}")
        wA, wB = y[:nA], y[nA : nA + nB]
        uA = wA / (gA.widths * LA)
        uB = wB / (gB.widths * LB)
        itf = self.boundary_solve(uA, uB, LA, LB)
        ds1, ds2 = itf.flux_if, itf.end_speed

        phiA = self.law_A.potential(uA)
        phiB = self.law_B.potential(uB)

        dA = np.empty(nA)
        FlA = np.zeros(nA + 1)
        xf = gA.faces[1:-1]
        dc = np.diff(gA.centers)
        wgt = (xf - gA.centers[:-1]) / dc
        uf = (1.0 - wgt) * uA[:-1] + wgt * uA[1:]
        FlA[1:-1] = -(phiA[1:] - phiA[:-1]) / (LA * dc) - xf * ds1 * uf
        dA[:] = -(FlA[1:] - FlA[:-1]) + self.growth.rate(uA) * wA

        FlB = np.zeros(nB + 1)
        xf = gB.faces[1:-1]
        dc = np.diff(gB.centers)
        wgt = (xf - gB.centers[:-1]) / dc
        uf = (1.0 - wgt) * uB[:-1] + wgt * uB[1:]
        FlB[1:-1] = -(phiB[1:] - phiB[:-1]) / (LB * dc) - (ds1 + xf * (ds2 - ds1)) * uf
        dB = -(FlB[1:] - FlB[:-1])

        out = np.concatenate([dA, dB, [ds1, ds2]])
        if want_interface:
            return out, itf
        return out

    def _h_ref(self, which: str) -> float:
        return self._cache.get("h_ref_" + which, 0.0)

    def prepare(self, st: FbpState) -> None:
        self._cache["h_ref_A"] = (st.s1 - st.s0) / self.nA
        self._cache["h_ref_B"] = (st.s2 - st.s1) / self.nB

    def interface_of(self, st: FbpState) -> InterfaceState:
        return self.boundary_solve(st.uA, st.uB, st.s1 - st.s0, st.s2 - st.s1)


def initial_state(problem: FbpProblem, s1: float, s2: float, rho_A, rho_B) -> FbpState:
    """Initial data from constants or callables of the physical coordinate."""
    xa = problem.s0 + (s1 - problem.s0) * problem.grid_A.centers
    xb = s1 + (s2 - s1) * problem.grid_B.centers
    uA = np.asarray(rho_A(xa) if callable(rho_A) else np.full(xa.shape, float(rho_A)), dtype=float)
    uB = np.asarray(rho_B(xb) if callable(rho_B) else np.full(xb.shape, float(rho_B)), dtype=float)
    return FbpState(t=0.0, s0=problem.s0, s1=s1, s2=s2, uA=uA, uB=uB)


def fbp_rhs(problem: FbpProblem, st: FbpState) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Time derivatives (duA/dt, duB/dt, ds1/dt, ds2/dt) of the cell averages."""
    if not problem._cache.get("h_ref_A"):
        problem.prepare(st)
    y = problem.pack(st)
    dy = problem.rhs(st.t, y)
    nA, nB = problem.nA, problem.nB
    LA, LB = st.s1 - st.s0, st.s2 - st.s1
    ds1, ds2 = dy[-2], dy[-1]
    # w = u h L  =>  u' = (w' - u h L') / (h L)
    duA = (dy[:nA] - st.uA * problem.grid_A.widths * ds1) / (problem.grid_A.widths * LA)
    duB = (dy[nA : nA + nB] - st.uB * problem.grid_B.widths * (ds2 - ds1)) / (problem.grid_B.widths * LB)
    return duA, duB, float(ds1), float(ds2)


def solve_interface(
    uA_near: Sequence[float],
    uB_near: Sequence[float],
    law_A: ForceLaw,
    law_B: ForceLaw,
    hA: Sequence[float],
    hB: Sequence[float],
) -> InterfaceState:
    """Interface traces from two A-side and two B-side stencil values.

    ``uA_near = (u at distance hA[1], u at distance hA[0])`` ordered left to
    right, ``uB_near`` likewise ordered left to right, distances measured from
    s1. Only the s1 part of the returned state is meaningful; the end fields
    are filled with the B stencil solve of the same form.
    """
    cA = _one_sided(hA[0], hA[1])
    cB = _one_sided(hB[0], hB[1])
    ua = np.asarray(uA_near, dtype=float)
    ub = np.asarray(uB_near, dtype=float)
    phiA, _ = law_A.potential_and_diffusion(ua)
    phiB, _ = law_B.potential_and_diffusion(ub)
    kA = cA[1] * phiA[1] + cA[2] * phiA[0]
    kB = cB[1] * phiB[0] + cB[2] * phiB[1]
    ra, rb = ua[1], ub[0]
    for _ in range(80):
        (pa,), (da,) = law_A.potential_and_diffusion(np.array([ra]))
        (pb,), (db,) = law_B.potential_and_diffusion(np.array([rb]))
        gradA = cA[0] * pa + kA
        gradB = -(cB[0] * pb + kB)
        vA, vB = -gradA / ra, -gradB / rb
        R1, R2 = pa - pb, vA - vB
        J11, J12 = da, -db
        J21 = -cA[0] * da / ra + gradA / ra**2
        J22 = -(cB[0] * db / rb - (cB[0] * pb + kB) / rb**2)
        det = J11 * J22 - J12 * J21
        if not np.isfinite(det) or det == 0:
            raise InterfaceFailure("singular interface Jacobian")
        dra = (R1 * J22 - J12 * R2) / det
        drb = (J11 * R2 - J21 * R1) / det
        lam = 1.0
        while lam > 1e-6 and (ra - lam * dra <= law_A.rho_eq or rb - lam * drb <= law_B.rho_eq):
            lam *= 0.5
        ra, rb = ra - lam * dra, rb - lam * drb
        if max(abs(dra) / ra, abs(drb) / rb) <= 1e-13:
            break
    else:
        raise InterfaceFailure("interface Newton iteration did not converge")
    (pa,), _ = law_A.potential_and_diffusion(np.array([ra]))
    (pb,), _ = law_B.potential_and_diffusion(np.array([rb]))
    gradA = cA[0] * pa + kA
    gradB = -(cB[0] * pb + kB)
    vA, vB = -gradA / ra, -gradB / rb
    return InterfaceState(
        rhoA_if=float(ra),
        rhoB_if=float(rb),
        flux_if=float(vA),
        rhoB_end=float("nan"),
        end_speed=float("nan"),
        force_residual=float(abs(pa - pb) / max(abs(pa), abs(pb), 1e-300)),
        velocity_residual=float(abs(vA - vB) / max(abs(vA), abs(vB), 1e-300)),
    )


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


@dataclass
class FbpTrajectory:
    problem: FbpProblem
    states: list[FbpState] = field(default_factory=list)
    # per accepted step
    step_t: list[float] = field(default_factory=list)
    step_s1: list[float] = field(default_factory=list)
    step_s2: list[float] = field(default_factory=list)
    step_residual: list[float] = field(default_factory=list)
    step_jump: list[float] = field(default_factory=list)
    step_massB: list[float] = field(default_factory=list)
    step_massA: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def boundaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.array(self.step_t), np.array(self.step_s1), np.array(self.step_s2)

    def snapshot_boundaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.times, np.array([s.s1 for s in self.states]), np.array([s.s2 for s in self.states])

    def all_boundaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Step log and snapshots merged in time order (stiff runs take few,
        long steps, so the step log alone can be too sparse for a fit)."""
        t = np.concatenate([np.array(self.step_t), np.asarray(self.times, dtype=float)])
        s1 = np.concatenate([np.array(self.step_s1), [s.s1 for s in self.states]])
        s2 = np.concatenate([np.array(self.step_s2), [s.s2 for s in self.states]])
        t, idx = np.unique(t, return_index=True)
        return t, s1[idx], s2[idx]


def fbp_run(
    problem: FbpProblem,
    st0: FbpState,
    T: float,
    snapshot_times: Sequence[float],
    integ: IntegratorSettings = IntegratorSettings(method="bdf"),
    bound_tol: float = 1e-6,
    callback: Optional[Callable[[float, FbpState], None]] = None,
) -> FbpTrajectory:
    """Integrate to time T and collect snapshots. Absolute tolerances are
    interpreted in units of rho_eq (masses) and d_eq (boundaries). At every
    accepted step the interface residual and the density bounds are checked;
    ``bound_tol`` is relative to rho_eq."""
    problem.prepare(st0)
    if integ.h0 is None:
        # the automatic first-step probe can push end cells below rho_eq
        integ = replace(integ, h0=min(1e-4, T))
    y0 = problem.pack(st0)
    nA, nB = problem.nA, problem.nB
    deq = problem.law_A.d_eq
    req = problem.law_A.rho_eq
    LA0, LB0 = st0.s1 - st0.s0, st0.s2 - st0.s1
    atol = np.concatenate(
        [
            np.full(nA, integ.atol * LA0 * req) * problem.grid_A.widths * nA,
            np.full(nB, integ.atol * LB0 * req) * problem.grid_B.widths * nB,
            [integ.atol * deq, integ.atol * deq],
        ]
    )
    # invariant region: each side is capped by its own initial maximum and by
    # the force-balance image of the other side's cap
    lA, lB = problem.law_A, problem.law_B
    upB0 = float(np.max(st0.uB))
    upper_A = max(problem.growth.rho_M, float(np.max(st0.uA)),
                  lA.force_inverse(lB.force(1.0 / upB0) * lA.eta / lB.eta))
    upper_B = max(upB0, lB.force_inverse(lA.force(1.0 / upper_A) * lB.eta / lA.eta))
    lower_A, lower_B = problem.law_A.rho_eq, problem.law_B.rho_eq

    traj = FbpTrajectory(problem=problem)
    snaps = np.array(sorted(s for s in snapshot_times if 0.0 <= s <= T))

    def log(t, y):
        st = problem.unpack(y, t)
        tol = bound_tol * req
        if (
            st.uA.min() < lower_A - tol
            or st.uA.max() > upper_A + tol
            or st.uB.min() < lower_B - tol
            or st.uB.max() > upper_B + tol
        ):
            raise ToleranceNotMet(
                f"density bounds violated at t = {t:.6g}: A in [{st.uA.min() / req:.6f}, {st.uA.max() / req:.6f}],"
                f" B in [{st.uB.min() / req:.6f}, {st.uB.max() / req:.6f}] (units rho_eq)"
            )
        itf = problem.interface_of(st)
        traj.step_t.append(t)
        traj.step_s1.append(st.s1)
        traj.step_s2.append(st.s2)
        traj.step_residual.append(itf.force_residual)
        traj.step_jump.append(itf.rhoA_if - itf.rhoB_if)
        traj.step_massB.append(float(np.sum(y[nA : nA + nB])))
        traj.step_massA.append(float(np.sum(y[:nA])))
        if callback is not None:
            callback(t, st)

    log(0.0, y0)
    res = integrate(
        problem.rhs,
        y0,
        (0.0, T),
        integ,
        step_callback=lambda t, y: log(t, y),
        t_eval=snaps,
        atol=atol,
        jac_sparsity=problem.jac_sparsity() if integ.method == "bdf" else None,
    )
    for t, y in zip(res.t_eval, res.y_eval):
        st = problem.unpack(y, float(t))
        itf = problem.interface_of(st)
        traj.states.append(
            FbpState(t=float(t), s0=st.s0, s1=st.s1, s2=st.s2, uA=st.uA, uB=st.uB, interface=itf)
        )
    return traj


def state_profile(problem: FbpProblem, st: FbpState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unified density profile: cell centres plus the boundary traces, as
    (x, rho, pop) with pop 'A' or 'B'."""
    itf = st.interface if st.interface is not None else problem.interface_of(st)
    LA, LB = st.s1 - st.s0, st.s2 - st.s1
    xa = st.s0 + LA * problem.grid_A.centers
    xb = st.s1 + LB * problem.grid_B.centers
    # zero-flux trace at s0 from the even extension
    h1, h2 = LA * problem.grid_A.centers[0], LA * problem.grid_A.centers[1]
    u0 = (h2 * h2 * st.uA[0] - h1 * h1 * st.uA[1]) / (h2 * h2 - h1 * h1)
    x = np.concatenate([[st.s0], xa, [st.s1], [st.s1], xb, [st.s2]])
    rho = np.concatenate([[u0], st.uA, [itf.rhoA_if], [itf.rhoB_if], st.uB, [itf.rhoB_end]])
    pop = np.array(["A"] * (problem.nA + 2) + ["B"] * (problem.nB + 2))
    return x, rho, pop


def density_at(problem: FbpProblem, st: FbpState, x: np.ndarray, pop: np.ndarray) -> np.ndarray:
    """Piecewise-linear reconstruction of the FBP density, evaluated with the
    population given per point (A left of s1, B right of it)."""
    xs, rho, pp = state_profile(problem, st)
    out = np.empty(len(x))
    ma = pp == "A"
    isA = np.asarray(pop) == "A"
    out[isA] = np.interp(np.asarray(x)[isA], xs[ma], rho[ma])
    out[~isA] = np.interp(np.asarray(x)[~isA], xs[~ma], rho[~ma])
    return out


@dataclass(frozen=True)
class SpeedFit:
    c1: float
    c2: float
    residual1: float  # rms residual relative to the displacement over the window
    residual2: float
    width_mean: float
    width_spread: float  # (max - min)/mean of s2 - s1 over the window


def front_speed(t: np.ndarray, s1: np.ndarray, s2: np.ndarray, window: tuple[float, float]) -> SpeedFit:
    t, s1, s2 = map(np.asarray, (t, s1, s2))
    m = (t >= window[0]) & (t <= window[1])
    if m.sum() < 10:
        raise InsufficientData(f"only {int(m.sum())} samples in the fitting window")
    tt = t[m]

    def fit(s):
        A = np.vstack([tt, np.ones_like(tt)]).T
        coef, *_ = np.linalg.lstsq(A, s, rcond=None)
        r = s - A @ coef
        disp = abs(s[-1] - s[0])
        rel = float(np.sqrt(np.mean(r * r)) / disp) if disp > 0 else 0.0
        return float(coef[0]), rel

    c1, r1 = fit(s1[m])
    c2, r2 = fit(s2[m])
    w = s2[m] - s1[m]
    return SpeedFit(c1, c2, r1, r2, float(w.mean()), float((w.max() - w.min()) / w.mean()))

"""Individual-based model: an overdamped chain of cell centres.

Cells 1..m belong to the proliferating population A, cells m+1..n to the
non-proliferating population B. The first centre is pinned. Mechanics and
division are combined by Lie splitting: relax the chain over dtau, then
apply the divisions accumulated over the same dtau.

Division bookkeeping comes in two flavours.

* Literal: shifts (Delta i)_i = ceil(sum_{j=2}^{i} g(r_j - r_{j-1}) dtau)
  followed by r_i <- r_{i - (Delta i)_i}. Used when the chain carries no
  cycle clocks.
* Cycle clocks (default for simulations): every A cell carries a phase
  that advances by g dtau; a cell whose phase passes 1 divides. The shifts
  are then the running count of divisions left of each index, and the
  same reindexing map is applied. This keeps the division rate equal to g
  for any dtau, whereas the literal ceiling adds one cell per step as soon
  as any gap is below the contact-inhibition density.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OrderViolation, StepTooLarge
from .mechanics import ForceLaw, GrowthLaw
from .odeint import IntegratorSettings, integrate

DUPLICATE_OFFSET = 1e-6  # in units of d_eq
GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class CellChain:
    positions: np.ndarray
    m: int
    s0: float
    law_A: ForceLaw
    law_B: ForceLaw
    growth: GrowthLaw
    phase: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        r = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", r)
        n = r.size
        if not 1 <= self.m < n:
            raise ValueError(f"need 1 <= m < n, got m={self.m}, n={n}")
        if r[0] != self.s0:
            raise ValueError("first cell must sit at the anchor s0")
        if self.phase is not None and np.asarray(self.phase).shape != r.shape:
            raise ValueError("phase must have one entry per cell")

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def n_B(self) -> int:
        return self.n - self.m

    @property
    def s1(self) -> float:
        return float(self.positions[self.m - 1])

    @property
    def s2(self) -> float:
        return float(self.positions[-1])

    @property
    def d_eq(self) -> float:
        return self.law_A.d_eq


def initial_chain(
    n_A: int,
    n_B: int,
    law_A: ForceLaw,
    law_B: ForceLaw,
    growth: GrowthLaw,
    rho_A: float,
    rho_B: float,
    s0: float = 0.0,
    clocks: bool = True,
) -> CellChain:
    """Equispaced chain: n_A cells of A at density rho_A followed by n_B
    cells of B at density rho_B. The gap between the last A centre and the
    first B centre is B-type."""
    if n_A < 2 or n_B < 1:
        raise ValueError("need at least two A cells and one B cell")
    gaps = np.concatenate([np.full(n_A - 1, 1.0 / rho_A), np.full(n_B, 1.0 / rho_B)])
    r = s0 + np.concatenate([[0.0], np.cumsum(gaps)])
    r[0] = s0
    phase = None
    if clocks:
        phase = np.mod(np.arange(n_A + n_B) * GOLDEN, 1.0)
        phase[n_A - 1 :] = 0.0
        phase[0] = 0.0
    return CellChain(positions=r, m=n_A, s0=s0, law_A=law_A, law_B=law_B, growth=growth, phase=phase)


def _velocities(r: np.ndarray, m: int, law_A: ForceLaw, law_B: ForceLaw) -> np.ndarray:
    gaps = np.diff(r)
    f = np.empty_like(gaps)
    f[: m - 1] = law_A.force(gaps[: m - 1]) / law_A.eta
    f[m - 1 :] = law_B.force(gaps[m - 1 :]) / law_B.eta
    v = np.empty_like(r)
    v[0] = 0.0
    v[1:-1] = f[:-1] - f[1:]
    v[-1] = f[-1]
    return v


def chain_rhs(c: CellChain) -> np.ndarray:
    """Velocities of all centres (m/s)."""
    return _velocities(c.positions, c.m, c.law_A, c.law_B)


def chain_energy(c: CellChain) -> float:
    gaps = np.diff(c.positions)
    return float(np.sum(c.law_A.energy(gaps[: c.m - 1])) + np.sum(c.law_B.energy(gaps[c.m - 1 :])))


def division_rates(c: CellChain) -> np.ndarray:
    """g(r_j - r_{j-1}) for every cell; zero outside j = 2..m-1."""
    g = np.zeros(c.n)
    if c.m >= 3:
        g[1 : c.m - 1] = c.growth.rate_of_gap(np.diff(c.positions[: c.m - 1]))
    return g


def reindex_shifts(c: CellChain, dtau: float) -> np.ndarray:
    """(Delta i)_i over the A block (index 0 <-> cell 1); entries outside
    2..m-1 are zero. Literal ceiling form."""
    g = division_rates(c)
    s = np.cumsum(g * dtau)
    shifts = np.zeros(c.n, dtype=int)
    if c.m >= 3:
        shifts[1 : c.m - 1] = np.ceil(s[1 : c.m - 1]).astype(int)
    return shifts


def _apply_shifts(c: CellChain, shifts_A: np.ndarray, phase: Optional[np.ndarray]) -> CellChain:
    """Reindex with shifts given on cells 1..m-1 (0-based 0..m-2); the block
    m..n shifts by the value at m-1."""
    m, n = c.m, c.n
    last = int(shifts_A[m - 2]) if m >= 2 else 0
    if last == 0:
        return c if phase is None else replace(c, phase=phase)
    n_new = n + last
    idx_new = np.arange(n_new)
    shift_full = np.empty(n_new, dtype=int)
    shift_full[: m - 1] = shifts_A[: m - 1]
    shift_full[m - 1 :] = last
    src = idx_new - shift_full
    r_old = c.positions
    r_new = r_old[src]
    dup = np.zeros(n_new, dtype=bool)
    dup[1:] = src[1:] == src[:-1]
    r_new[dup] += DUPLICATE_OFFSET * c.d_eq
    ph_new = None
    if phase is not None:
        ph_new = phase[src]
    chain = CellChain(
        positions=r_new, m=m + last, s0=c.s0, law_A=c.law_A, law_B=c.law_B, growth=c.growth, phase=ph_new
    )
    if np.any(np.diff(r_new) <= 0):
        raise OrderViolation("reindexing produced overlapping centres")
    return chain


def proliferation_reindex(c: CellChain, dtau: float) -> CellChain:
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    if c.phase is None:
        shifts = reindex_shifts(c, dtau)
        if shifts.max(initial=0) > 1:
            raise StepTooLarge(f"max shift {shifts.max()} > 1 for dtau = {dtau:.6g}; shrink the splitting step")
        return _apply_shifts(c, shifts, None)
    g = division_rates(c)
    phase = c.phase + g * dtau
    if phase.max(initial=0.0) >= 2.0:
        raise StepTooLarge(f"a cell would divide twice within dtau = {dtau:.6g}")
    divides = phase >= 1.0
    phase = np.where(divides, phase - 1.0, phase)
    k = np.flatnonzero(divides)
    if k.size == 0:
        return replace(c, phase=phase)
    # the copy of cell k is inserted right after it; this is the reindexing
    # map with (Delta i)_i = number of divisions left of i
    r = c.positions
    r_new = np.insert(r, k + 1, r[k] + DUPLICATE_OFFSET * c.d_eq)
    ph_new = np.insert(phase, k + 1, phase[k])
    if np.any(np.diff(r_new) <= 0):
        raise OrderViolation("division produced overlapping centres")
    return CellChain(
        positions=r_new, m=c.m + k.size, s0=c.s0, law_A=c.law_A, law_B=c.law_B, growth=c.growth, phase=ph_new
    )


def max_stable_dtau(c: CellChain, safety: float = 0.9) -> float:
    """Largest dtau allowed by the one-division-per-step rule."""
    g = division_rates(c)
    if c.phase is None:
        total = g.sum()
        return np.inf if total == 0 else safety / total
    # a clock may overrun 1 once (the division is then carried to the next
    # step) but never 2
    gm = g.max(initial=0.0)
    return np.inf if gm == 0 else safety / gm


# the DOPRI5 stability region reaches about -3.3 on the negative real axis
_EXPLICIT_STABILITY = 3.0


def stiffness_bound(c: CellChain) -> float:
    """Gershgorin bound on the spectral radius of the velocity Jacobian, 1/s.

    Gaps at or beyond d_eq are given the one-sided stiffness at d_eq, so a
    chain at rest still has a finite explicit step limit.
    """
    gaps = np.minimum(np.diff(c.positions), c.d_eq * (1.0 - 1e-9))
    k = np.empty_like(gaps)
    k[: c.m - 1] = np.abs(c.law_A.profile.dforce(gaps[: c.m - 1])) / c.law_A.eta
    k[c.m - 1 :] = np.abs(c.law_B.profile.dforce(gaps[c.m - 1 :])) / c.law_B.eta
    rows = np.zeros(c.n)
    rows[:-1] += k
    rows[1:] += k
    return float(2.0 * rows.max())


def _mechanics(c: CellChain, dtau: float, integ: IntegratorSettings, h0: Optional[float] = None):
    m, la, lb = c.m, c.law_A, c.law_B

    def rhs(_t, y):
        return _velocities(y, m, la, lb)

    settings = integ
    if integ.method == "dopri5":
        # near rest the error estimate vanishes and would let the step grow
        # past the stability limit, amplifying round-off without bound
        lam = stiffness_bound(c)
        if lam > 0:
            settings = replace(settings, hmax=min(integ.hmax, _EXPLICIT_STABILITY / lam))
    if h0 is not None:
        settings = replace(settings, h0=min(h0, dtau, settings.hmax))
    elif settings.h0 is not None and settings.h0 > settings.hmax:
        settings = replace(settings, h0=settings.hmax)
    res = integrate(rhs, c.positions, (0.0, dtau), settings, atol=integ.atol * c.d_eq)
    r = res.y
    r[0] = c.s0
    if np.any(np.diff(r) <= 0):
        raise OrderViolation("mechanics step crossed two cell centres")
    return replace(c, positions=r), res


def ibm_step(c: CellChain, dtau: float, integ: IntegratorSettings = IntegratorSettings()) -> CellChain:
    """One Lie step: relax over dtau, then divide. Integrator tolerances are
    in units of d_eq for the positions."""
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    c, _ = _mechanics(c, dtau, integ)
    return proliferation_reindex(c, dtau)


@dataclass(frozen=True)
class DensitySample:
    x: float
    rho: float
    pop: str


def chain_densities(c: CellChain) -> list[DensitySample]:
    x, rho, pop = chain_density_arrays(c)
    return [DensitySample(float(a), float(b), p) for a, b, p in zip(x, rho, pop)]


def chain_density_arrays(c: CellChain) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = c.positions
    x = r[:-1]
    rho = 1.0 / np.diff(r)
    pop = np.where(np.arange(1, c.n) <= c.m, "A", "B")
    return x, rho, pop


@dataclass
class IbmTrajectory:
    snapshots: list[CellChain] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    # boundary history, one entry per splitting step
    bt: list[float] = field(default_factory=list)
    bs1: list[float] = field(default_factory=list)
    bs2: list[float] = field(default_factory=list)
    bnB: list[int] = field(default_factory=list)
    n_steps: int = 0

    def boundaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.asarray(self.bt), np.asarray(self.bs1), np.asarray(self.bs2)


def ibm_run(
    chain: CellChain,
    T: float,
    snapshot_times: Sequence[float],
    integ: IntegratorSettings = IntegratorSettings(),
    dtau_max: float = 10.0,
    callback: Optional[Callable[[float, CellChain], None]] = None,
) -> IbmTrajectory:
    """Run the split scheme to time T. Steps are shortened to land on every
    snapshot time and to respect the one-division-per-step rule."""
    snaps = sorted(float(s) for s in snapshot_times if 0.0 <= s <= T)
    traj = IbmTrajectory()
    t = 0.0
    k = 0
    c = chain
    h_prev: Optional[float] = None

    def record(tt, cc):
        traj.bt.append(tt)
        traj.bs1.append(cc.s1)
        traj.bs2.append(cc.s2)
        traj.bnB.append(cc.n_B)

    record(t, c)
    while k < len(snaps) and snaps[k] <= t:
        traj.snapshots.append(c)
        traj.times.append(t)
        k += 1
    while t < T:
        dtau = min(dtau_max, max_stable_dtau(c), T - t)
        if k < len(snaps):
            dtau = min(dtau, snaps[k] - t)
        for _ in range(40):
            relaxed, res = _mechanics(c, dtau, integ, h_prev)
            try:
                c_next = proliferation_reindex(relaxed, dtau)
                break
            except StepTooLarge:
                # rates grew during the relaxation: retry the step shorter
                dtau *= 0.5
        else:
            raise StepTooLarge(f"could not find an admissible splitting step at t = {t:.6g}")
        c = c_next
        h_prev = res.last_h
        t_new = t + dtau
        if k < len(snaps) and abs(snaps[k] - t_new) <= 1e-9 * max(dtau, 1.0):
            t_new = snaps[k]
        t = T if abs(T - t_new) <= 1e-9 * max(dtau, 1.0) else t_new
        traj.n_steps += 1
        record(t, c)
        while k < len(snaps) and snaps[k] <= t + 1e-9:
            traj.snapshots.append(c)
            traj.times.append(t)
            k += 1
        if callback is not None:
            callback(t, c)
    return traj

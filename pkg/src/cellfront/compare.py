"""Cross-model experiments: IBM against FBP, and FBP against the wave."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import SimConfig
from .errors import InsufficientData
from .fbp import FbpProblem, FbpTrajectory, SpeedFit, density_at, fbp_run, front_speed, initial_state
from .ibm import CellChain, IbmTrajectory, chain_density_arrays, ibm_run, initial_chain
from .output import REPORT_HEADER, Scales, write_rows
from .twave import WaveComparison, WaveProfile, compare_wave_to_fbp, find_wave_speed

# samples within this many cells of a front are left out of the norms
FRONT_EXCLUSION = 2


def keep_mask(n: int, m: int, k: int = FRONT_EXCLUSION) -> np.ndarray:
    """Samples i = 1..n-1 (one per gap, at cell i) that are more than k
    cells away from cell m (at s1) and from cell n (at s2)."""
    i = np.arange(1, n)
    return (np.abs(i - m) > k) & (i < n - k)


def density_errors(rho: np.ndarray, ref: np.ndarray, width: np.ndarray) -> tuple[float, float]:
    """Pointwise-relative max error and width-weighted relative L2 error."""
    d = rho - ref
    linf = float(np.max(np.abs(d) / ref)) if d.size else 0.0
    l2 = float(np.sqrt(np.sum(width * d * d) / np.sum(width * ref * ref))) if d.size else 0.0
    return linf, l2


def chain_errors(
    c: CellChain, reference: Callable[[np.ndarray, np.ndarray], np.ndarray], k: int = FRONT_EXCLUSION
) -> tuple[float, float]:
    x, rho, pop = chain_density_arrays(c)
    keep = keep_mask(c.n, c.m, k)
    ref = reference(x[keep], pop[keep])
    return density_errors(rho[keep], ref, 1.0 / rho[keep])


@dataclass
class ComparisonReport:
    times: np.ndarray
    linf_rel: np.ndarray
    l2_rel: np.ndarray
    gap_s1: np.ndarray
    gap_s2: np.ndarray
    jump: np.ndarray
    transmission_residual: np.ndarray
    d_eq: float
    rho_eq: float
    speeds_ibm: Optional[SpeedFit] = None
    speeds_fbp: Optional[SpeedFit] = None
    wave: Optional[WaveProfile] = None
    wave_match: Optional[WaveComparison] = None
    meta: dict = field(default_factory=dict)
    ibm_traj: Optional[IbmTrajectory] = field(default=None, repr=False)
    fbp_traj: Optional[FbpTrajectory] = field(default=None, repr=False)

    def late(self, frac: float = 0.5) -> np.ndarray:
        return self.times >= frac * self.times[-1]

    def rows(self, sc: Scales = Scales()) -> list[tuple]:
        return [
            (t, li, l2, g1 / sc.length, g2 / sc.length, j / sc.density, r)
            for t, li, l2, g1, g2, j, r in zip(
                self.times, self.linf_rel, self.l2_rel, self.gap_s1, self.gap_s2, self.jump, self.transmission_residual
            )
        ]

    def check(self) -> None:
        arrs = (self.linf_rel, self.l2_rel, self.gap_s1, self.gap_s2, self.jump, self.transmission_residual)
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ValueError("report contains non-finite entries")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("report times are not increasing")


def write_report(path: str, rep: ComparisonReport, sc: Scales = Scales()) -> int:
    rep.check()
    return write_rows(path, REPORT_HEADER, rep.rows(sc))


def compare_trajectories(
    ibm: IbmTrajectory, fbp: FbpTrajectory, k: int = FRONT_EXCLUSION
) -> ComparisonReport:
    """Snapshot-by-snapshot comparison; both runs must share snapshot times."""
    problem = fbp.problem
    if len(ibm.times) != len(fbp.states) or not np.allclose(ibm.times, fbp.times, rtol=0, atol=1e-9):
        raise InsufficientData("IBM and FBP snapshot times differ")
    li, l2, g1, g2, jump, res = [], [], [], [], [], []
    for c, st in zip(ibm.snapshots, fbp.states):
        a, b = chain_errors(c, lambda x, p: density_at(problem, st, x, p), k)
        li.append(a)
        l2.append(b)
        g1.append(c.s1 - st.s1)
        g2.append(c.s2 - st.s2)
        itf = st.interface if st.interface is not None else problem.interface_of(st)
        jump.append(itf.rhoA_if - itf.rhoB_if)
        res.append(itf.force_residual)
    return ComparisonReport(
        times=np.asarray(ibm.times, dtype=float),
        linf_rel=np.array(li),
        l2_rel=np.array(l2),
        gap_s1=np.array(g1),
        gap_s2=np.array(g2),
        jump=np.array(jump),
        transmission_residual=np.array(res),
        d_eq=problem.law_A.d_eq,
        rho_eq=problem.law_A.rho_eq,
    )


# -- runners -----------------------------------------------------------------


def build_chain(cfg: SimConfig) -> CellChain:
    law_A, law_B = cfg.laws()
    rho_A, rho_B = cfg.initial_densities()
    return initial_chain(
        cfg.initial.n_A, cfg.initial.n_B, law_A, law_B, cfg.growth_law(), rho_A, rho_B,
        s0=cfg.initial.s0, clocks=cfg.ibm.clocks,
    )


def run_ibm(cfg: SimConfig, snapshot_times: Optional[Sequence[float]] = None) -> IbmTrajectory:
    times = cfg.snapshot_times() if snapshot_times is None else snapshot_times
    return ibm_run(build_chain(cfg), cfg.schedule.T, times, cfg.ibm_integrator(), dtau_max=cfg.ibm.dtau_max)


def run_fbp(
    cfg: SimConfig, snapshot_times: Optional[Sequence[float]] = None, scale: int = 1
) -> tuple[FbpProblem, FbpTrajectory]:
    """FBP from the piecewise-constant densities implied by the IBM spacing."""
    pr = cfg.fbp_problem(scale)
    rho_A, rho_B = cfg.initial_densities()
    st0 = initial_state(pr, cfg.s1_init, cfg.s2_init, rho_A, rho_B)
    times = cfg.snapshot_times() if snapshot_times is None else snapshot_times
    return pr, fbp_run(pr, st0, cfg.schedule.T, times, cfg.fbp_integrator())


def run_wave(cfg: SimConfig) -> WaveProfile:
    law_A, law_B = cfg.laws()
    z_min = cfg.twave.z_min * law_A.d_eq
    return find_wave_speed(cfg.initial.n_B, law_A, law_B, cfg.growth_law(), z_min, tol=cfg.twave.tol)


def speed_window(T: float) -> tuple[float, float]:
    """Final third of the run."""
    return (2.0 * T / 3.0, T)


def compare_models(cfg: SimConfig, with_wave: bool = True) -> ComparisonReport:
    """Run IBM and FBP from matched initial data (and optionally the
    travelling wave) and collect the comparison."""
    ibm = run_ibm(cfg)
    _, fbp = run_fbp(cfg, ibm.times)
    rep = compare_trajectories(ibm, fbp)
    win = speed_window(cfg.schedule.T)
    rep.speeds_ibm = front_speed(*ibm.boundaries(), win)
    rep.speeds_fbp = front_speed(*fbp.all_boundaries(), win)
    if with_wave:
        rep.wave = run_wave(cfg)
        rep.wave_match = compare_wave_to_fbp(rep.wave, fbp, win)
    massB = np.array(fbp.step_massB)
    rep.meta = {
        "ibm_steps": ibm.n_steps,
        "fbp_steps": len(fbp.step_t),
        "ibm_B_count_constant": all(n == cfg.initial.n_B for n in ibm.bnB),
        "fbp_massB_drift": float(np.max(np.abs(massB - massB[0])) / massB[0]),
        "fbp_max_step_residual_late": float(
            np.max(np.array(fbp.step_residual)[np.array(fbp.step_t) >= 0.5 * cfg.schedule.T])
        ),
    }
    rep.ibm_traj, rep.fbp_traj = ibm, fbp
    rep.check()
    return rep

"""Command line entry point.

    cellfront [--out DIR] [--format csv] [--quiet] [--nondim] COMMAND CONFIG

Errors from the models are reported on stderr as one JSON object
``{"error": code, "message": ...}`` and mapped to the exit status carried
by the exception class.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from .compare import compare_models, run_fbp, run_ibm, run_wave, write_report
from .config import SimConfig, load_config
from .errors import CellfrontError
from .output import (
    Scales,
    write_boundaries,
    write_fbp_snapshots,
    write_ibm_snapshots,
    write_jkr_table,
    write_rows,
    write_summary,
    SNAPSHOT_HEADER,
)

COMMANDS = ("simulate-ibm", "simulate-fbp", "travelling-wave", "compare", "jkr-table")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellfront", description="Two-population cell front models.")
    p.add_argument("--out", default=None, help="output directory (default $CELLFRONT_OUT or ./cellfront_out)")
    p.add_argument("--format", default="csv", choices=["csv"], help="output format")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    p.add_argument("--nondim", action="store_true", help="write x in units of d_eq and rho in units of rho_eq")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", help="INI configuration file")
    return p


class _Log:
    def __init__(self, quiet: bool) -> None:
        self.quiet = quiet
        self.t0 = time.perf_counter()

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(f"[{time.perf_counter() - self.t0:7.1f}s] {msg}")


def _scales(cfg: SimConfig, nondim: bool) -> Scales:
    return Scales.nondimensional(cfg.force_profile().d_eq) if nondim else Scales.si()


def cmd_simulate_ibm(cfg: SimConfig, out: str, sc: Scales, log: _Log) -> None:
    tr = run_ibm(cfg)
    write_ibm_snapshots(os.path.join(out, "ibm_snapshots.csv"), tr.times, tr.snapshots, sc)
    write_boundaries(os.path.join(out, "ibm_boundaries.csv"), *tr.boundaries(), sc)
    log(f"IBM: {tr.n_steps} steps, {len(tr.snapshots)} snapshots, final m = {tr.snapshots[-1].m}")


def cmd_simulate_fbp(cfg: SimConfig, out: str, sc: Scales, log: _Log) -> None:
    pr, tr = run_fbp(cfg)
    write_fbp_snapshots(os.path.join(out, "fbp_snapshots.csv"), pr, tr.states, sc)
    write_boundaries(os.path.join(out, "fbp_boundaries.csv"), *tr.boundaries(), sc)
    log(f"FBP: {len(tr.step_t)} steps, {len(tr.states)} snapshots")


def _wave_rows(wp, sc: Scales) -> list[tuple]:
    rows = [(0.0, z / sc.length, r / sc.density, "A") for z, r in zip(wp.zgrid_A[::-1], wp.rho_A[::-1])]
    rows += [(0.0, z / sc.length, r / sc.density, "B") for z, r in zip(wp.zgrid_B, wp.rho_B)]
    return rows


def _wave_summary(wp) -> dict:
    return {
        "c": wp.c,
        "ell": wp.ell,
        "M": wp.M,
        "P_M": wp.P_M,
        "rho_A0": float(wp.rho_A[0]),
        "rho_B0": float(wp.rho_B[0]),
        "rho_B_end": float(wp.rho_B[-1]),
        "status": str(wp.status),
    }


def cmd_travelling_wave(cfg: SimConfig, out: str, sc: Scales, log: _Log) -> None:
    wp = run_wave(cfg)
    # the wave is stationary in its frame; t is written as 0 and x holds z
    write_rows(os.path.join(out, "wave_profile.csv"), SNAPSHOT_HEADER, _wave_rows(wp, sc))
    write_summary(os.path.join(out, "wave_summary.csv"), _wave_summary(wp))
    log(f"wave: c = {wp.c:.6g} m/s, ell = {wp.ell:.6g} m")


def cmd_compare(cfg: SimConfig, out: str, sc: Scales, log: _Log) -> None:
    rep = compare_models(cfg)
    write_report(os.path.join(out, "report.csv"), rep, sc)
    ibm, fbp = rep.ibm_traj, rep.fbp_traj
    write_ibm_snapshots(os.path.join(out, "ibm_snapshots.csv"), ibm.times, ibm.snapshots, sc)
    write_boundaries(os.path.join(out, "ibm_boundaries.csv"), *ibm.boundaries(), sc)
    write_fbp_snapshots(os.path.join(out, "fbp_snapshots.csv"), fbp.problem, fbp.states, sc)
    write_boundaries(os.path.join(out, "fbp_boundaries.csv"), *fbp.boundaries(), sc)
    summary = {
        "c1_ibm": rep.speeds_ibm.c1,
        "c2_ibm": rep.speeds_ibm.c2,
        "c1_fbp": rep.speeds_fbp.c1,
        "c2_fbp": rep.speeds_fbp.c2,
        "width_fbp": rep.speeds_fbp.width_mean,
    }
    if rep.wave is not None:
        summary.update({f"wave_{k}": v for k, v in _wave_summary(rep.wave).items()})
        summary["wave_l2_rel_max"] = float(np.max(rep.wave_match.l2_rel))
        summary["wave_speed_gap_rel"] = rep.wave_match.speed_gap_rel
        write_rows(os.path.join(out, "wave_profile.csv"), SNAPSHOT_HEADER, _wave_rows(rep.wave, sc))
    summary.update({k: float(v) if not isinstance(v, str) else v for k, v in rep.meta.items()})
    write_summary(os.path.join(out, "summary.csv"), summary)
    late = rep.late()
    log(
        f"late-time max L-inf {rep.linf_rel[late].max():.4f}, "
        f"max |gap s1| {np.abs(rep.gap_s1[late]).max() / rep.d_eq:.3f} d_eq, "
        f"jump {rep.jump[-1] / rep.rho_eq:+.4f} rho_eq"
    )


def cmd_jkr_table(cfg: SimConfig, out: str, sc: Scales, log: _Log) -> None:
    law_A, _ = cfg.laws()
    paths = write_jkr_table(out, law_A, sc)
    log("wrote " + ", ".join(os.path.basename(p) for p in paths))


_DISPATCH = {
    "simulate-ibm": cmd_simulate_ibm,
    "simulate-fbp": cmd_simulate_fbp,
    "travelling-wave": cmd_travelling_wave,
    "compare": cmd_compare,
    "jkr-table": cmd_jkr_table,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    out = args.out or os.environ.get("CELLFRONT_OUT") or "cellfront_out"
    log = _Log(args.quiet)
    try:
        cfg = load_config(args.config)
        os.makedirs(out, exist_ok=True)
        _DISPATCH[args.command](cfg, out, _scales(cfg, args.nondim), log)
    except CellfrontError as e:
        print(json.dumps({"error": e.code, "message": str(e)}), file=sys.stderr)
        return e.exit_status
    except OSError as e:
        print(json.dumps({"error": "io_error", "message": str(e)}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

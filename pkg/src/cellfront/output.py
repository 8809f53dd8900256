"""CSV emission and parsing.

Floats are written with ``repr`` so a file read back reproduces the values
bit for bit. Nondimensional output divides lengths by d_eq and densities by
rho_eq; nothing upstream of this module is scaled.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import OutputError
from .fbp import FbpProblem, FbpState
from .ibm import CellChain, chain_density_arrays
from .mechanics import ForceLaw, diffusion_coeff, pressure

SNAPSHOT_HEADER = ("t", "x", "rho", "pop")
BOUNDARY_HEADER = ("t", "s1", "s2")
REPORT_HEADER = ("t", "linf_rel", "l2_rel", "gap_s1", "gap_s2", "jump", "transmission_residual")
FORCE_HEADER = ("d", "F")
DIFFUSION_HEADER = ("rho", "D")
PRESSURE_HEADER = ("rho", "P")


@dataclass(frozen=True)
class Scales:
    """Divisors applied on output. ``Scales.si()`` leaves values untouched."""

    length: float = 1.0
    density: float = 1.0

    @classmethod
    def si(cls) -> "Scales":
        return cls()

    @classmethod
    def nondimensional(cls, d_eq: float) -> "Scales":
        return cls(length=d_eq, density=1.0 / d_eq)


def _num(v: float) -> str:
    return repr(float(v))


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    n = 0
    try:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([x if isinstance(x, str) else _num(x) for x in r])
                n += 1
    except OSError as e:
        raise OutputError(f"cannot write {path!r}: {e.strerror}") from None
    return n


def _cell(v: str):
    if v in ("A", "B"):
        return v
    try:
        return float(v)
    except ValueError:
        return v


def read_rows(path: str, header: Sequence[str]) -> list[list]:
    """Parse a file written by ``write_rows``; string columns stay strings."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            got = next(r, None)
            if tuple(got or ()) != tuple(header):
                raise OutputError(f"{path!r}: expected header {','.join(header)}, got {got}")
            return [[_cell(v) for v in row] for row in r]
    except OSError as e:
        raise OutputError(f"cannot read {path!r}: {e.strerror}") from None


# -- snapshot rows -----------------------------------------------------------


def chain_rows(t: float, c: CellChain, sc: Scales = Scales()) -> list[tuple]:
    """One row per gap, x at the left cell of the gap."""
    x, rho, pop = chain_density_arrays(c)
    return [(t, xi / sc.length, ri / sc.density, p) for xi, ri, p in zip(x, rho, pop)]


def fbp_rows(t: float, problem: FbpProblem, st: FbpState, sc: Scales = Scales()) -> list[tuple]:
    """One row per finite volume, at the cell centre, A block first."""
    xa = st.s0 + (st.s1 - st.s0) * problem.grid_A.centers
    xb = st.s1 + (st.s2 - st.s1) * problem.grid_B.centers
    rows = [(t, x / sc.length, u / sc.density, "A") for x, u in zip(xa, st.uA)]
    rows += [(t, x / sc.length, u / sc.density, "B") for x, u in zip(xb, st.uB)]
    return rows


def boundary_rows(t: Sequence[float], s1: Sequence[float], s2: Sequence[float], sc: Scales = Scales()) -> list[tuple]:
    return [(a, b / sc.length, c / sc.length) for a, b, c in zip(t, s1, s2)]


def write_ibm_snapshots(path: str, times: Sequence[float], chains: Sequence[CellChain], sc: Scales = Scales()) -> int:
    rows = (r for t, c in zip(times, chains) for r in chain_rows(t, c, sc))
    return write_rows(path, SNAPSHOT_HEADER, rows)


def write_fbp_snapshots(path: str, problem: FbpProblem, states: Sequence[FbpState], sc: Scales = Scales()) -> int:
    rows = (r for st in states for r in fbp_rows(st.t, problem, st, sc))
    return write_rows(path, SNAPSHOT_HEADER, rows)


def write_boundaries(path: str, t, s1, s2, sc: Scales = Scales()) -> int:
    return write_rows(path, BOUNDARY_HEADER, boundary_rows(t, s1, s2, sc))


def read_snapshots(path: str) -> dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """{t: (x, rho, pop)} in file order."""
    out: dict[float, tuple[list, list, list]] = {}
    for t, x, rho, pop in read_rows(path, SNAPSHOT_HEADER):
        xs, rs, ps = out.setdefault(t, ([], [], []))
        xs.append(x)
        rs.append(rho)
        ps.append(pop)
    return {t: (np.array(a), np.array(b), np.array(c)) for t, (a, b, c) in out.items()}


# -- JKR table ---------------------------------------------------------------


def jkr_table(law: ForceLaw, n: int = 201, d_lo: float = 0.7, rho_hi: float = 1.6):
    """Curves F(d), D(rho), P(rho) on d/d_eq in [d_lo, 1] and rho/rho_eq in
    [1, rho_hi] (clipped to the monotone range of the law)."""
    deq, req = law.d_eq, law.rho_eq
    rho_top = min(rho_hi * req, 0.999 * law.rho_max)
    d = np.linspace(max(d_lo * deq, 1.0 / rho_top), deq, n)
    rho = np.linspace(req, rho_top, n)
    F = np.asarray(law.force(d), dtype=float)
    D = np.asarray(diffusion_coeff(rho, law), dtype=float)
    P = np.asarray(pressure(rho, law), dtype=float)
    return (d, F), (rho, D), (rho, P)


def write_jkr_table(out_dir: str, law: ForceLaw, sc: Scales = Scales(), n: int = 201) -> list[str]:
    (d, F), (rho, D), (_, P) = jkr_table(law, n)
    paths = [os.path.join(out_dir, f) for f in ("jkr_force.csv", "jkr_diffusion.csv", "jkr_pressure.csv")]
    # D and P keep their SI units; only the abscissae follow the scaling
    write_rows(paths[0], FORCE_HEADER, zip(d / sc.length, F))
    write_rows(paths[1], DIFFUSION_HEADER, zip(rho / sc.density, D))
    write_rows(paths[2], PRESSURE_HEADER, zip(rho / sc.density, P))
    return paths


def write_summary(path: str, items: dict, header: Optional[Sequence[str]] = ("key", "value")) -> int:
    rows = [(k, v if isinstance(v, str) else _num(v)) for k, v in items.items()]
    return write_rows(path, header, rows)

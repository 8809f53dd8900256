"""Run configuration as INI text.

Every section maps onto one small dataclass. Densities are given in units
of rho_eq and lengths of the travelling-wave window in units of d_eq; all
other quantities are SI. The builders at the bottom turn a parsed config
into the model objects, so the numerical code never sees the text format.

    [jkr]
    law = jkr            # or cubic
    R = 7.5e-06
    ...
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from .errors import ConfigError
from .fbp import FbpProblem, Grid, make_grid
from .mechanics import (
    ForceLaw,
    GrowthLaw,
    JkrForce,
    JkrParams,
    jkr_coefficients,
)
from .odeint import METHODS, IntegratorSettings


@dataclass(frozen=True)
class JkrSection:
    law: str = "jkr"
    R: float = 7.5e-6
    E: float = 300.0
    nu: float = 0.4
    zeta: float = 1e15
    temperature: float = 298.0


@dataclass(frozen=True)
class PopulationsSection:
    eta_A: float = 5e-3
    eta_B: float = 5e-3


@dataclass(frozen=True)
class GrowthSection:
    alpha: float = 0.5
    rho_M: float = 4.0 / 3.0
    # ramp width as a fraction of rho_M
    width: float = 0.01
    shape: str = "smoothstep"


@dataclass(frozen=True)
class InitialSection:
    s0: float = 0.0
    n_A: int = 100
    n_B: int = 100
    rho_A: float = 4.0 / 3.0
    # "compatible": B density that balances the interface forces against A
    rho_B: Union[float, str] = "compatible"


@dataclass(frozen=True)
class FbpSection:
    N_A: int = 200
    N_B: int = 200
    stretch: float = 2.5
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "bdf"


@dataclass(frozen=True)
class IbmSection:
    rtol: float = 1e-6
    atol: float = 1e-8
    dtau_max: float = 20.0
    clocks: bool = True


@dataclass(frozen=True)
class TwaveSection:
    z_min: float = -20.0
    tol: float = 1e-6


@dataclass(frozen=True)
class ScheduleSection:
    T: float = 8e4
    snapshot_interval: float = 2000.0


@dataclass(frozen=True)
class RunSection:
    # the models are deterministic; kept so files written now stay readable
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    jkr: JkrSection = field(default_factory=JkrSection)
    populations: PopulationsSection = field(default_factory=PopulationsSection)
    growth: GrowthSection = field(default_factory=GrowthSection)
    initial: InitialSection = field(default_factory=InitialSection)
    fbp: FbpSection = field(default_factory=FbpSection)
    ibm: IbmSection = field(default_factory=IbmSection)
    twave: TwaveSection = field(default_factory=TwaveSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self) -> None:
        validate(self)

    # -- derived quantities ---------------------------------------------------

    def jkr_params(self) -> JkrParams:
        j = self.jkr
        return JkrParams.from_adhesion_density(R=j.R, E=j.E, nu=j.nu, zeta=j.zeta, T=j.temperature)

    def force_profile(self):
        p = self.jkr_params()
        return JkrForce(p) if self.jkr.law == "jkr" else jkr_coefficients(p)

    def laws(self) -> tuple[ForceLaw, ForceLaw]:
        prof = self.force_profile()
        return ForceLaw(prof, self.populations.eta_A), ForceLaw(prof, self.populations.eta_B)

    def growth_law(self) -> GrowthLaw:
        g = self.growth
        rq = 1.0 / self.force_profile().d_eq
        return GrowthLaw(alpha=g.alpha, rho_M=g.rho_M * rq, eps=g.width * g.rho_M * rq, shape=g.shape)

    def initial_densities(self) -> tuple[float, float]:
        """(rho_A, rho_B) in SI."""
        law_A, law_B = self.laws()
        rq = law_A.rho_eq
        rho_A = self.initial.rho_A * rq
        if self.initial.rho_B == "compatible":
            f = law_A.force(1.0 / rho_A) * law_B.eta / law_A.eta
            rho_B = law_B.force_inverse(f) if f > 0 else law_B.rho_eq
        else:
            rho_B = float(self.initial.rho_B) * rq
        return rho_A, rho_B

    @property
    def s0(self) -> float:
        return self.initial.s0

    @property
    def s1_init(self) -> float:
        rho_A, _ = self.initial_densities()
        return self.initial.s0 + (self.initial.n_A - 1) / rho_A

    @property
    def s2_init(self) -> float:
        _, rho_B = self.initial_densities()
        return self.s1_init + self.initial.n_B / rho_B

    def snapshot_times(self) -> list[float]:
        T, dt = self.schedule.T, self.schedule.snapshot_interval
        k = int(math.floor(T / dt + 1e-9))
        times = [i * dt for i in range(k + 1)]
        if T - times[-1] > 1e-9 * T:
            times.append(T)
        return times

    def fbp_grids(self, N_A: Optional[int] = None, N_B: Optional[int] = None) -> tuple[Grid, Grid]:
        f = self.fbp
        return make_grid(N_A or f.N_A, f.stretch, "right"), make_grid(N_B or f.N_B)

    def fbp_problem(self, scale: int = 1) -> FbpProblem:
        law_A, law_B = self.laws()
        gA, gB = self.fbp_grids(self.fbp.N_A * scale, self.fbp.N_B * scale)
        return FbpProblem(law_A, law_B, self.growth_law(), gA, gB, s0=self.initial.s0)

    def fbp_integrator(self) -> IntegratorSettings:
        return IntegratorSettings(rtol=self.fbp.rtol, atol=self.fbp.atol, method=self.fbp.method)

    def ibm_integrator(self) -> IntegratorSettings:
        return IntegratorSettings(rtol=self.ibm.rtol, atol=self.ibm.atol)


def validate(cfg: SimConfig) -> None:
    def need(ok: bool, where: str, msg: str) -> None:
        if not ok:
            raise ConfigError(f"[{where}] {msg}")

    need(cfg.jkr.law in ("jkr", "cubic"), "jkr", "law must be 'jkr' or 'cubic'")
    for k in ("R", "E", "zeta", "temperature"):
        need(getattr(cfg.jkr, k) > 0, "jkr", f"{k} must be positive")
    need(-1.0 < cfg.jkr.nu < 0.5, "jkr", "nu must lie in (-1, 0.5)")
    need(cfg.populations.eta_A > 0 and cfg.populations.eta_B > 0, "populations", "damping must be positive")
    need(cfg.growth.alpha >= 0, "growth", "alpha must be nonnegative")
    need(cfg.growth.rho_M > 1.0, "growth", "rho_M must exceed 1 (units rho_eq)")
    need(0 < cfg.growth.width < 1, "growth", "width must lie in (0, 1)")
    need(cfg.growth.shape in ("smoothstep", "logistic"), "growth", "shape must be smoothstep or logistic")
    ini = cfg.initial
    need(ini.n_A >= 2 and ini.n_B >= 1, "initial", "need n_A >= 2 and n_B >= 1")
    need(ini.rho_A >= 1.0, "initial", "rho_A must be >= 1 (units rho_eq)")
    need(
        ini.rho_B == "compatible" or (isinstance(ini.rho_B, float) and ini.rho_B >= 1.0),
        "initial",
        "rho_B must be 'compatible' or a number >= 1",
    )
    need(cfg.fbp.N_A >= 4 and cfg.fbp.N_B >= 4, "fbp", "need at least 4 cells per domain")
    need(cfg.fbp.stretch >= 0, "fbp", "stretch must be nonnegative")
    need(cfg.fbp.method in METHODS, "fbp", f"method must be one of {METHODS}")
    for sec in (cfg.fbp, cfg.ibm):
        need(sec.rtol > 0 and sec.atol > 0, type(sec).__name__.replace("Section", "").lower(), "tolerances must be positive")
    need(cfg.ibm.dtau_max > 0, "ibm", "dtau_max must be positive")
    need(cfg.twave.z_min < 0, "twave", "z_min must be negative")
    need(cfg.twave.tol > 0, "twave", "tol must be positive")
    need(cfg.schedule.T > 0 and cfg.schedule.snapshot_interval > 0, "schedule", "T and snapshot_interval must be positive")


# -- text format ---------------------------------------------------------------

_SECTIONS = [f.name for f in dataclasses.fields(SimConfig)]


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    cur = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            cur = line[1:-1].strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name.lower() == key.lower():
                return i
    return None


def _convert(text: str, section: str, f: dataclasses.Field, raw: str) -> Any:
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("Union"):
            # number or keyword
            try:
                return float(raw)
            except ValueError:
                return raw.strip()
        return raw.strip()
    except ValueError:
        line = _line_of(text, section, f.name)
        where = f"line {line}: " if line else ""
        raise ConfigError(f"{where}[{section}] {f.name}: cannot read {raw!r} as {kind}") from None


def parse_config(text: str) -> SimConfig:
    """Parse INI text. Missing sections and keys take their defaults; unknown
    ones are errors so typos do not pass silently."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keep key case (eta_A, N_A, ...)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        where = f"line {line}: " if line else ""
        raise ConfigError(f"{where}{e.message if hasattr(e, 'message') else e}") from None
    if cp.defaults():
        raise ConfigError("keys outside of any section are not allowed")
    parts: dict[str, Any] = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            line = _line_of(text, name, None)
            where = f"line {line}: " if line else ""
            raise ConfigError(f"{where}unknown section [{name}]")
        cls = SimConfig.__dataclass_fields__[name].default_factory
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in cp.items(name):
            if key not in fields:
                line = _line_of(text, name, key)
                where = f"line {line}: " if line else ""
                raise ConfigError(f"{where}[{name}] unknown key {key!r}")
            values[key] = _convert(text, name, fields[key], raw)
        try:
            parts[name] = cls(**values)
        except TypeError as e:
            raise ConfigError(f"[{name}] {e}") from None
    return SimConfig(**parts)


def load_config(path: str) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e.strerror}") from None
    return parse_config(text)


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        r = repr(v)
        if "e" not in r and v != 0 and not 1e-4 <= abs(v) < 1e6:
            # shortest round-trip digits in scientific form
            r = np.format_float_scientific(v, unique=True, trim="-")
        return r
    return str(v)


def format_config(cfg: SimConfig) -> str:
    out = []
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in dataclasses.fields(sec):
            out.append(f"{f.name} = {_fmt(getattr(sec, f.name))}")
        out.append("")
    return "\n".join(out)


def paper_config(**overrides: Any) -> SimConfig:
    """Reference parameter set. ``overrides`` take section__key names, e.g.
    ``populations__eta_B=1e-2``."""
    cfg = SimConfig()
    grouped: dict[str, dict[str, Any]] = {}
    for k, v in overrides.items():
        sec, _, key = k.partition("__")
        if sec not in _SECTIONS or not key:
            raise ConfigError(f"bad override {k!r}")
        grouped.setdefault(sec, {})[key] = v
    for sec, vals in grouped.items():
        cfg = dataclasses.replace(cfg, **{sec: dataclasses.replace(getattr(cfg, sec), **vals)})
    return cfg

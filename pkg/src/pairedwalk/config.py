"""Run configuration: an INI file with sections, layered over a named preset.

Keys are case-sensitive so the symbols ``M`` (black-hole mass) and ``m``
(particle mass) keep their conventional spelling.
"""

import configparser
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, OddLattice
from .linalg import SIGMA_X, SIGMA_Z
from .spacetime import HORIZON_GUARD, flat, horizon_cutoff, schwarzschild, tabulated

REPRESENTATIONS = {
    "chiral": (SIGMA_Z, SIGMA_X),
    "standard": (SIGMA_X, SIGMA_Z),
}
METRIC_KINDS = ("flat", "schwarzschild", "tabulated")
ENERGIES = ("positive", "negative", "both")


@dataclass(frozen=True)
class SimConfig:
    # metric
    kind: str = "flat"
    M: float = 0.5
    speed: float = 1.0
    table: str = ""
    horizon_guard: float = HORIZON_GUARD
    rescale: bool = True
    # particle
    m: float = 1.0
    representation: str = "chiral"
    # domain
    x_min: float = -8.0
    x_max: float = 8.0
    boundary: str = "periodic"
    # lattice
    eps: float = 1e-3
    steps: int = 1000
    stride: int = 100
    site_stride: int = 1
    # packet
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = 1.0
    energy: str = "both"
    tail_tol: float = 1e-12
    # converge
    t_final: float = 1.0
    oracle_dx: float = 0.0
    eps_list: tuple = ()
    # output
    out: str = "run"
    geodesic_dt: float = 1e-2
    heatmap_width: int = 2048
    preset: str = ""

    def __post_init__(self):
        validate(self)

    @property
    def n_sites(self):
        span = self.x_max - self.x_min
        n = int(round(span / self.eps))
        if abs(n * self.eps - span) > 1e-9 * max(1.0, abs(span)):
            raise ConfigError(f"domain length {span} is not a whole number of lattice spacings eps={self.eps}")
        if n % 4:
            raise OddLattice(f"the domain holds {n} fine sites; it must be a multiple of 4")
        return n

    @property
    def alpha_beta(self):
        return REPRESENTATIONS[self.representation]

    def metric(self):
        """The physical metric on ``[x_min, x_max]``, before any causality rescaling."""
        x_range = (self.x_min, self.x_max)
        if self.kind == "flat":
            met = flat(self.m, speed=self.speed, x_range=x_range)
        elif self.kind == "schwarzschild":
            met = schwarzschild(self.M, mass=self.m, x_range=x_range, guard=self.horizon_guard)
        else:
            met = tabulated(self.table, mass=self.m)
            lo, hi = met.x_range
            if self.x_min < lo - 1e-12 or self.x_max > hi + 1e-12:
                raise DomainError(f"domain [{self.x_min}, {self.x_max}] extends past the table's x range [{lo}, {hi}]")
            met = replace(met, x_range=x_range)
        alpha, beta = self.alpha_beta
        return replace(met, alpha=alpha.copy(), beta=beta.copy())

    def as_sections(self):
        """Nested dict mirroring the INI layout, used for the metadata echo."""
        flat_values = asdict(self)
        flat_values["eps_list"] = list(self.eps_list)
        return {section: {key: flat_values[key] for key in keys} for section, keys in SECTIONS.items()}

    def to_ini(self):
        lines = []
        for section, values in self.as_sections().items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                if isinstance(value, (list, tuple)):
                    value = ", ".join(repr(v) for v in value)
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


SECTIONS = {
    "metric": ("kind", "M", "speed", "table", "horizon_guard", "rescale"),
    "particle": ("m", "representation"),
    "domain": ("x_min", "x_max", "boundary"),
    "lattice": ("eps", "steps", "stride", "site_stride"),
    "packet": ("x0", "p0", "sigma", "energy", "tail_tol"),
    "converge": ("t_final", "oracle_dx", "eps_list"),
    "output": ("out", "geodesic_dt", "heatmap_width", "preset"),
}

# Desk scale: Schwarzschild with M=0.5, m=5 and an ingoing packet of momentum 5.
# The packet sits at x0=7 so the positive-energy spinor tails clear the horizon guard.
PRESETS = {
    "desk": dict(
        kind="schwarzschild", M=0.5, m=5.0, x_min=horizon_cutoff(0.5), x_max=horizon_cutoff(0.5) + 12.0,
        eps=1e-3, steps=4000, stride=200, site_stride=10,
        x0=7.0, p0=-5.0, sigma=4.0, energy="positive",
    ),
    # Large Schwarzschild run (M=0.5, m=50, eps=5e-5); takes hours on one core.
    "full": dict(
        kind="schwarzschild", M=0.5, m=50.0, x_min=horizon_cutoff(0.5), x_max=horizon_cutoff(0.5) + 12.0,
        eps=5e-5, steps=40000, stride=1000, site_stride=100,
        x0=3.0, p0=50.0, sigma=1.56, energy="both", tail_tol=2e-2,
    ),
}


def _field_types():
    return {f.name: f.type for f in fields(SimConfig)}


def _parse_value(name, raw, kind):
    raw = raw.strip()
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        if kind is tuple or kind == "tuple":
            return tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from exc
    return raw


def parse_ini(text, source="<string>"):
    """Flat ``{field: value}`` dict from INI text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    types = _field_types()
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            values[key] = _parse_value(key, raw, types[key])
    return values


def load_config(path=None, preset=None, **overrides):
    """Preset defaults, then the file at ``path``, then keyword overrides."""
    values = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
        values["preset"] = preset
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        values.update(parse_ini(p.read_text(encoding="utf-8"), source=str(p)))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def validate(cfg):
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{f.name} must be finite, got {v}")
    if cfg.kind not in METRIC_KINDS:
        raise ConfigError(f"metric kind must be one of {METRIC_KINDS}, got {cfg.kind!r}")
    if cfg.kind == "tabulated" and not cfg.table:
        raise ConfigError("a tabulated metric needs [metric] table = PATH")
    if cfg.representation not in REPRESENTATIONS:
        raise ConfigError(f"representation must be one of {sorted(REPRESENTATIONS)}")
    if cfg.boundary != "periodic":
        raise ConfigError("only periodic boundaries are supported")
    if cfg.energy not in ENERGIES:
        raise ConfigError(f"energy must be one of {ENERGIES}")
    if cfg.eps <= 0:
        raise ConfigError("eps must be positive")
    if cfg.steps < 1:
        raise ConfigError("steps must be at least 1")
    if cfg.stride < 1 or cfg.site_stride < 1 or cfg.heatmap_width < 1:
        raise ConfigError("stride, site_stride and heatmap_width must be positive")
    if cfg.x_max <= cfg.x_min:
        raise ConfigError("x_max must exceed x_min")
    if not cfg.x_min <= cfg.x0 < cfg.x_max:
        raise ConfigError(f"packet centre x0={cfg.x0} lies outside [{cfg.x_min}, {cfg.x_max})")
    if cfg.sigma <= 0 or cfg.speed <= 0 or cfg.geodesic_dt <= 0 or cfg.t_final <= 0:
        raise ConfigError("sigma, speed, geodesic_dt and t_final must be positive")
    if cfg.oracle_dx < 0 or any(e <= 0 or not np.isfinite(e) for e in cfg.eps_list):
        raise ConfigError("oracle_dx and eps_list entries must be positive")

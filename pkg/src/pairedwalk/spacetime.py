"""Metrics, dyads and the map from (metric, mass) to the walk's PDE coefficients.

Coordinates are ``(t, x)`` in natural units.  A metric is described by its
dyad components ``e^mu_a`` named ``e00, e11, e01, e10`` (``e10`` is
``e^1_0``: coordinate index 1, frame index 0).  The matching onto the
continuum walk equation is

    b1 = -(e11 / e00) alpha - e10,     c = -(m / e00) beta.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ConfigError, DomainError, HorizonDomain, UnboundedMetric
from .linalg import I2, SIGMA_X, SIGMA_Z, TAU_ALG, hermitian_eig2, max_abs
from .synthesis import HermitianField

MINKOWSKI = np.diag([1.0, -1.0])
HORIZON_GUARD = 0.05
CAUSALITY_MARGIN = 0.01
DYAD_NAMES = ("e00", "e11", "e01", "e10")


def _const(v):
    return lambda t, x: np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, float(v))


@dataclass
class MetricSpec:
    """Dyad fields, particle mass and Dirac representation on a coordinate rectangle.

    ``derivatives`` optionally maps ``"d{t,x}_{name}"`` to analytic partial
    derivatives of the dyads.  ``time_scale`` divides the generator after a
    causality rescaling (walk time = ``time_scale`` * coordinate time).
    """

    e00: Callable
    e11: Callable
    e01: Callable
    e10: Callable
    mass: float = 0.0
    t_range: tuple = (0.0, np.inf)
    x_range: tuple = (-np.inf, np.inf)
    alpha: np.ndarray = field(default_factory=lambda: SIGMA_Z.copy())
    beta: np.ndarray = field(default_factory=lambda: SIGMA_X.copy())
    kind: str = "flat"
    params: dict = field(default_factory=dict)
    derivatives: dict = field(default_factory=dict)
    metric: Optional[Callable] = None
    static: bool = True
    time_scale: float = 1.0

    def dyad_matrix(self, t, x):
        """``E[..., mu, a] = e^mu_a``."""
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        out = np.empty(t.shape + (2, 2))
        out[..., 0, 0] = self.e00(t, x)
        out[..., 0, 1] = self.e01(t, x)
        out[..., 1, 0] = self.e10(t, x)
        out[..., 1, 1] = self.e11(t, x)
        return out

    def metric_tensor(self, t, x):
        if self.metric is not None:
            return np.asarray(self.metric(t, x), dtype=float)
        E = self.dyad_matrix(t, x)
        Einv = np.linalg.inv(E)
        return np.swapaxes(Einv, -1, -2) @ MINKOWSKI @ Einv

    def check_point(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_range
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            if self.kind == "schwarzschild" and np.any(x < lo):
                raise HorizonDomain(f"x must stay above the horizon guard {lo:.6g}")
            raise DomainError(f"x outside the metric domain [{lo}, {hi}]")
        t0, t1 = self.t_range
        if np.any(t < t0 - 1e-12) or np.any(t > t1 + 1e-12):
            raise DomainError(f"t outside the metric domain [{t0}, {t1}]")

    def with_mass(self, mass):
        return replace(self, mass=float(mass))


def clifford_residual(alpha, beta):
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    return max(
        max_abs(alpha @ alpha - I2),
        max_abs(beta @ beta - I2),
        max_abs(alpha @ beta + beta @ alpha),
        max_abs(alpha - alpha.conj().T),
        max_abs(beta - beta.conj().T),
    )


def dyad_residual(metric, t, x):
    """max |g_{mu nu} e^mu_a e^nu_b - eta_ab| over the sample points."""
    E = metric.dyad_matrix(t, x)
    g = metric.metric_tensor(t, x)
    return max_abs(np.swapaxes(E, -1, -2) @ g @ E - MINKOWSKI)


def flat(mass=0.0, speed=1.0, x_range=(-np.inf, np.inf), t_range=(0.0, np.inf)):
    """Minkowski space, optionally with the spatial coordinate stretched so the light speed is ``speed``."""
    zero = _const(0.0)
    return MetricSpec(
        e00=_const(1.0),
        e11=_const(speed),
        e01=zero,
        e10=zero,
        mass=float(mass),
        t_range=tuple(t_range),
        x_range=tuple(x_range),
        kind="flat",
        params={"speed": float(speed)},
        derivatives={f"d{c}_{n}": zero for c in "tx" for n in DYAD_NAMES},
        metric=lambda t, x: np.broadcast_to(np.diag([1.0, -1.0 / speed**2]), np.broadcast(np.asarray(t), np.asarray(x)).shape + (2, 2)),
    )


def horizon_cutoff(M, guard=HORIZON_GUARD):
    return 2 * M * (1 + guard)


def schwarzschild(M, mass=0.0, x_range=None, t_range=(0.0, np.inf), guard=HORIZON_GUARD):
    """Radial Schwarzschild metric ``ds^2 = f dt^2 - dx^2 / f`` with ``f = 1 - 2M/x``.

    The domain is clipped at ``x = 2M (1 + guard)``; the dyads diverge at the horizon.
    """
    if M <= 0:
        raise ConfigError("Schwarzschild mass parameter must be positive")
    cut = horizon_cutoff(M, guard)
    if x_range is None:
        x_range = (cut, np.inf)
    if x_range[0] < cut - 1e-12:
        raise HorizonDomain(f"requested domain starts at x={x_range[0]:.6g}, inside the horizon guard x>{cut:.6g}")

    def f(x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 2 * M):
            raise HorizonDomain("Schwarzschild dyads evaluated at or inside the horizon")
        return 1 - 2 * M / x

    def bshape(t, x):
        return np.broadcast(np.asarray(t), np.asarray(x)).shape

    zero = _const(0.0)
    e00 = lambda t, x: np.broadcast_to(f(x) ** -0.5, bshape(t, x))
    e11 = lambda t, x: np.broadcast_to(f(x) ** 0.5, bshape(t, x))
    # d/dx (1 - 2M/x) = 2M / x^2
    dx_e00 = lambda t, x: np.broadcast_to(-0.5 * f(x) ** -1.5 * 2 * M / np.asarray(x, float) ** 2, bshape(t, x))
    dx_e11 = lambda t, x: np.broadcast_to(0.5 * f(x) ** -0.5 * 2 * M / np.asarray(x, float) ** 2, bshape(t, x))

    def g(t, x):
        fx = np.broadcast_to(f(x), bshape(t, x))
        out = np.zeros(fx.shape + (2, 2))
        out[..., 0, 0] = fx
        out[..., 1, 1] = -1 / fx
        return out

    derivs = {f"dt_{n}": zero for n in DYAD_NAMES}
    derivs.update({"dx_e00": dx_e00, "dx_e11": dx_e11, "dx_e01": zero, "dx_e10": zero})
    return MetricSpec(
        e00=e00,
        e11=e11,
        e01=zero,
        e10=zero,
        mass=float(mass),
        t_range=tuple(t_range),
        x_range=tuple(x_range),
        kind="schwarzschild",
        params={"M": float(M), "horizon_guard": float(guard)},
        derivatives=derivs,
        metric=g,
    )


# -- tabulated metrics -------------------------------------------------------

TABLE_COLUMNS = ("t", "x", "e00", "e11", "e01", "e10")


def read_table(path):
    """Parse a tabulated-metric file into ``(header, t_grid, x_grid, {name: values[nt, nx]})``.

    Layout: ``key = value`` header lines (``t_min, t_max, nt, x_min, x_max, nx``),
    then the column line ``t,x,e00,e11,e01,e10``, then ``nt * nx`` rows in
    t-major order.  Lines starting with ``#`` are ignored.
    """
    header = {}
    rows = []
    seen_columns = False
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_columns:
            if line.replace(" ", "") == ",".join(TABLE_COLUMNS):
                seen_columns = True
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: expected 'key = value' header line, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            header[key] = value
            continue
        parts = line.split(",")
        if len(parts) != len(TABLE_COLUMNS):
            raise ConfigError(f"{path}: row has {len(parts)} columns, expected {len(TABLE_COLUMNS)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ConfigError(f"{path}: non-numeric row {line!r}") from None
    try:
        nt, nx = int(header["nt"]), int(header["nx"])
        t_grid = np.linspace(float(header["t_min"]), float(header["t_max"]), nt)
        x_grid = np.linspace(float(header["x_min"]), float(header["x_max"]), nx)
    except KeyError as exc:
        raise ConfigError(f"{path}: missing header key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed header value ({exc})") from None
    data = np.asarray(rows)
    if data.shape != (nt * nx, len(TABLE_COLUMNS)):
        raise ConfigError(f"{path}: expected {nt * nx} rows, found {len(rows)}")
    grid_t = data[:, 0].reshape(nt, nx)
    grid_x = data[:, 1].reshape(nt, nx)
    if max_abs(grid_t - t_grid[:, None]) > 1e-9 * max(1, np.ptp(t_grid)) or max_abs(grid_x - x_grid[None, :]) > 1e-9 * max(1, np.ptp(x_grid)):
        raise ConfigError(f"{path}: rows do not lie on the declared uniform grid")
    values = {name: data[:, 2 + i].reshape(nt, nx) for i, name in enumerate(TABLE_COLUMNS[2:])}
    return header, t_grid, x_grid, values


def write_table(path, t_grid, x_grid, values):
    t_grid = np.atleast_1d(t_grid)
    lines = [
        "# tabulated dyads",
        f"t_min = {float(t_grid[0])!r}",
        f"t_max = {float(t_grid[-1])!r}",
        f"nt = {len(t_grid)}",
        f"x_min = {float(x_grid[0])!r}",
        f"x_max = {float(x_grid[-1])!r}",
        f"nx = {len(x_grid)}",
        ",".join(TABLE_COLUMNS),
    ]
    for i, tv in enumerate(t_grid):
        for j, xv in enumerate(x_grid):
            lines.append(",".join(repr(float(v)) for v in (tv, xv, *(values[n][i, j] for n in DYAD_NAMES))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def tabulated(path, mass=0.0):
    """Metric from a dyad table, cubic-interpolated (bicubic when the table has several time rows)."""
    header, t_grid, x_grid, values = read_table(path)
    if len(x_grid) < 4:
        raise ConfigError("tabulated metric needs at least 4 x samples")
    funcs, derivs = {}, {}
    static = len(t_grid) == 1
    if not static and len(t_grid) < 4:
        raise ConfigError("time-dependent tabulated metric needs at least 4 t samples")
    for name in DYAD_NAMES:
        if static:
            spline = CubicSpline(x_grid, values[name][0])
            dspline = spline.derivative()

            def fn(t, x, s=spline):
                t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
                return s(x)

            def dfn(t, x, s=dspline):
                t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
                return s(x)

            funcs[name] = fn
            derivs[f"dx_{name}"] = dfn
            derivs[f"dt_{name}"] = _const(0.0)
        else:
            spline = RectBivariateSpline(t_grid, x_grid, values[name], kx=3, ky=3)

            def fn(t, x, s=spline, dt=0, dx=0):
                t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
                return s.ev(t, x, dx=dt, dy=dx)

            funcs[name] = fn
            derivs[f"dt_{name}"] = lambda t, x, fn=fn: fn(t, x, dt=1)
            derivs[f"dx_{name}"] = lambda t, x, fn=fn: fn(t, x, dx=1)
    t_range = (float(t_grid[0]), float(t_grid[-1]) if not static else np.inf)
    return MetricSpec(
        e00=funcs["e00"],
        e11=funcs["e11"],
        e01=funcs["e01"],
        e10=funcs["e10"],
        mass=float(mass),
        t_range=t_range,
        x_range=(float(x_grid[0]), float(x_grid[-1])),
        kind="tabulated",
        params={"path": str(path)},
        derivatives=derivs,
        static=static,
    )


# -- matching onto the walk PDE ----------------------------------------------


def dirac_matching(metric, extra_c=None):
    """Hermitian fields ``(b1, c)`` realizing the curved Dirac equation for ``metric``.

    ``extra_c`` is an optional :class:`HermitianField` in coordinate time added
    to the generator's potential term, e.g. an external coupling.  It enters
    ``c`` exactly as the mass term does, divided by ``e00``.
    """
    alpha = np.asarray(metric.alpha, dtype=complex)
    beta = np.asarray(metric.beta, dtype=complex)
    if clifford_residual(alpha, beta) > TAU_ALG:
        raise ConfigError("alpha and beta must be hermitian, square to I and anticommute")
    k = 1.0 / metric.time_scale
    m = metric.mass

    # walk time is time_scale * coordinate time
    def b1(t, x):
        t = np.asarray(t, dtype=float) * k
        metric.check_point(t, x)
        ratio = metric.e11(t, x) / metric.e00(t, x)
        return -k * (ratio[..., None, None] * alpha + metric.e10(t, x)[..., None, None] * I2)

    def c(t, x):
        t = np.asarray(t, dtype=float) * k
        metric.check_point(t, x)
        out = -k * (m / metric.e00(t, x))[..., None, None] * beta
        if extra_c is not None:
            out = out + k * extra_c(t, x) / metric.e00(t, x)[..., None, None]
        return out

    d = metric.derivatives
    have = all(f"d{cc}_{n}" in d for cc in "tx" for n in ("e00", "e11", "e10"))
    have = have and (extra_c is None or extra_c.has_derivatives)
    b1_field = HermitianField(b1, static=metric.static)
    c_field = HermitianField(c, static=metric.static)
    if have:

        # chain rule: d/d(walk time) = k d/dt
        chain = {"t": k, "x": 1.0}

        def db1(coord):
            def fn(t, x):
                t = np.asarray(t, dtype=float) * k
                e00, e11 = metric.e00(t, x), metric.e11(t, x)
                de00, de11 = d[f"d{coord}_e00"](t, x), d[f"d{coord}_e11"](t, x)
                dratio = (de11 * e00 - e11 * de00) / e00**2
                return -k * chain[coord] * (dratio[..., None, None] * alpha + d[f"d{coord}_e10"](t, x)[..., None, None] * I2)

            return fn

        def dc(coord):
            def fn(t, x):
                t = np.asarray(t, dtype=float) * k
                e00 = metric.e00(t, x)
                de00 = d[f"d{coord}_e00"](t, x)
                out = k * chain[coord] * (m * de00 / e00**2)[..., None, None] * beta
                if extra_c is not None:
                    v = extra_c(t, x)
                    dv = extra_c.dt(t, x) if coord == "t" else extra_c.dx(t, x)
                    out = out + k * chain[coord] * (dv / e00[..., None, None] - v * (de00 / e00**2)[..., None, None])
                return out

            return fn

        b1_field = HermitianField(b1, dt_value=db1("t"), dx_value=db1("x"), static=metric.static)
        c_field = HermitianField(c, dt_value=dc("t"), dx_value=dc("x"), static=metric.static)
    return b1_field, c_field


def _sample_grid(metric, samples):
    lo, hi = metric.x_range
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise UnboundedMetric("causality rescaling needs a finite x domain")
    if metric.static:
        return np.zeros(samples), np.linspace(lo, hi, samples)
    t0, t1 = metric.t_range
    if not np.isfinite(t1):
        raise UnboundedMetric("causality rescaling of a time-dependent metric needs a finite t domain")
    n = int(np.sqrt(samples))
    tt, xx = np.meshgrid(np.linspace(t0, t1, n), np.linspace(lo, hi, n), indexing="ij")
    return tt.ravel(), xx.ravel()


def spectral_radius(metric, samples=10_000):
    b1_field, _ = dirac_matching(metric)
    t, x = _sample_grid(metric, samples)
    with np.errstate(all="ignore"):
        b1 = b1_field(t, x)
    if not np.all(np.isfinite(b1)):
        raise UnboundedMetric("b1 is not finite on the sampled domain")
    spec = hermitian_eig2(b1)
    return float(max(np.max(np.abs(spec.d1)), np.max(np.abs(spec.d2))))


def rescale_for_causality(metric, margin=CAUSALITY_MARGIN, samples=10_000):
    """Stretch the time coordinate so the walk's light cone contains the physical one.

    Returns ``(metric, scale)``; ``scale == 1`` when the b1 spectrum is already
    inside ``[-1, 1]``, otherwise the spectrum is brought to ``1 - margin``.
    """
    radius = spectral_radius(metric, samples)
    if radius <= 1 + TAU_ALG:
        return metric, 1.0
    scale = radius / (1 - margin)
    return replace(metric, time_scale=metric.time_scale * scale), scale


# -- characteristics ---------------------------------------------------------


@dataclass
class Geodesic:
    samples: np.ndarray  # (n, 2) rows of (t, x)
    kind: str  # "outgoing" | "ingoing"
    seed: float
    exited: bool = False

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def x(self):
        return self.samples[:, 1]


def characteristic_speeds(b1_field, t, x):
    """(ingoing, outgoing) speeds: extreme eigenvalues of ``-b1``."""
    spec = hermitian_eig2(-b1_field(t, x))
    return spec.d2, spec.d1


def null_geodesics(metric, seeds, t_max, dt, t0=0.0):
    """Integrate both null families from each seed with classical RK4 at fixed step ``dt``."""
    b1_field, _ = dirac_matching(metric)
    lo, hi = metric.x_range
    out = []
    for seed in seeds:
        if not lo <= seed <= hi:
            raise DomainError(f"seed x0={seed} outside the domain [{lo}, {hi}]")
        for kind, which in (("outgoing", 1), ("ingoing", 0)):

            def rate(t, x):
                return float(characteristic_speeds(b1_field, t, x)[which])

            t, x = t0, float(seed)
            pts = [(t, x)]
            exited = False
            n_steps = int(round((t_max - t0) / dt))
            for _ in range(n_steps):
                try:
                    k1 = rate(t, x)
                    k2 = rate(t + dt / 2, x + dt / 2 * k1)
                    k3 = rate(t + dt / 2, x + dt / 2 * k2)
                    k4 = rate(t + dt, x + dt * k3)
                except DomainError:
                    exited = True
                    break
                x_new = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += dt
                if not lo <= x_new <= hi:
                    exited = True
                    break
                x = x_new
                pts.append((t, x))
            out.append(Geodesic(samples=np.array(pts), kind=kind, seed=float(seed), exited=exited))
    return out

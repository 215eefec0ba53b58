"""Independent continuum reference: a finite-difference integrator for

    d_t psi = b1 d_x psi + (1/2)(d_x b1) psi + i c psi

(fourth-order centred differences, classical RK4, periodic), flat-space
dispersion, and walk-versus-PDE error reports.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CFLViolation, GridMismatch
from .linalg import SIGMA_X, SIGMA_Z

DEFAULT_CFL = 0.25
MAX_CFL = 0.5


@dataclass
class PDEGrid:
    psi: np.ndarray  # (n, 2)
    dx: float
    dt: float
    t: float = 0.0
    x_min: float = 0.0

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.psi.shape[0])

    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.dx)


def ddx(f, dx):
    """Fourth-order periodic first derivative along axis 0."""
    return (8 * (np.roll(f, -1, 0) - np.roll(f, 1, 0)) - (np.roll(f, -2, 0) - np.roll(f, 2, 0))) / (12 * dx)


def _field_dx(field_, t, x, h):
    if getattr(field_, "dx_value", None) is not None:
        return field_.dx(t, x)
    # fourth-order stencil on the field itself, not on the periodic samples
    return (8 * (field_(t, x + h) - field_(t, x - h)) - (field_(t, x + 2 * h) - field_(t, x - 2 * h))) / (12 * h)


class _Coefficients:
    def __init__(self, b1_field, c_field, x, h):
        self.b1_field, self.c_field, self.x, self.h = b1_field, c_field, x, h
        self.static = bool(getattr(b1_field, "static", False) and getattr(c_field, "static", False))
        self._cached = None

    def __call__(self, t):
        if self.static and self._cached is not None:
            return self._cached
        b1 = self.b1_field(t, self.x)
        zeroth = 0.5 * _field_dx(self.b1_field, t, self.x, self.h) + 1j * self.c_field(t, self.x)
        out = (b1, zeroth)
        if self.static:
            self._cached = out
        return out


def _rhs(coeffs, t, psi, dx):
    b1, zeroth = coeffs(t)
    return np.einsum("iab,ib->ia", b1, ddx(psi, dx)) + np.einsum("iab,ib->ia", zeroth, psi)


def pde_step(grid, b1_field, c_field, cfl_max=MAX_CFL, _coeffs=None):
    """Advance one RK4 step of size ``grid.dt``."""
    if grid.dt > cfl_max * grid.dx * (1 + 1e-12):
        raise CFLViolation(f"dt={grid.dt:.3e} exceeds {cfl_max} * dx={grid.dx:.3e}")
    coeffs = _coeffs or _Coefficients(b1_field, c_field, grid.x, grid.dx)
    t, dt, dx, y = grid.t, grid.dt, grid.dx, grid.psi
    k1 = _rhs(coeffs, t, y, dx)
    k2 = _rhs(coeffs, t + dt / 2, y + dt / 2 * k1, dx)
    k3 = _rhs(coeffs, t + dt / 2, y + dt / 2 * k2, dx)
    k4 = _rhs(coeffs, t + dt, y + dt * k3, dx)
    return replace(grid, psi=y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t=t + dt)


def pde_evolve(grid, b1_field, c_field, t_final):
    """Integrate to ``t_final``, shrinking the last step sizes uniformly so the final time is hit exactly."""
    span = t_final - grid.t
    if span <= 0:
        return grid
    n = int(np.ceil(span / grid.dt - 1e-9))
    grid = replace(grid, dt=span / n)
    coeffs = _Coefficients(b1_field, c_field, grid.x, grid.dx)
    for _ in range(n):
        grid = pde_step(grid, b1_field, c_field, _coeffs=coeffs)
    return grid


def dispersion_check(m, p):
    """Energy magnitude of a free Dirac plane wave, ``sqrt(p^2 + m^2)``."""
    return float(np.hypot(p, m))


def symbol(b1, c, p):
    """Generator of a plane wave ``exp(i p x) v`` for constant coefficients: ``d_t v = (i p b1 + i c) v``."""
    return 1j * p * np.asarray(b1) + 1j * np.asarray(c)


# -- comparison --------------------------------------------------------------


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)  # (eps, l2_error, linf_error)
    slope: float = float("nan")
    r2: float = float("nan")

    def fit(self):
        if len(self.rows) >= 2:
            e = np.log([r[0] for r in self.rows])
            err = np.log([r[1] for r in self.rows])
            if np.all(np.isfinite(err)):
                coef = np.polyfit(e, err, 1)
                pred = np.polyval(coef, e)
                ss_res = float(np.sum((err - pred) ** 2))
                ss_tot = float(np.sum((err - err.mean()) ** 2))
                self.slope = float(coef[0])
                self.r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return self

    def to_text(self):
        lines = ["eps,l2_error,linf_error"]
        lines += [f"{e!r},{l2!r},{li!r}" for e, l2, li in self.rows]
        lines.append(f"# slope={self.slope!r} r2={self.r2!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rep = cls()
        for line in text.splitlines():
            if line.startswith("eps,") or not line.strip():
                continue
            if line.startswith("#"):
                fields = dict(kv.split("=") for kv in line[1:].split())
                rep.slope, rep.r2 = float(fields["slope"]), float(fields["r2"])
                continue
            rep.rows.append(tuple(float(v) for v in line.split(",")))
        return rep


def resample(x_src, values, x_dst, period=None):
    """Linear interpolation of ``values`` from ``x_src`` onto ``x_dst`` (periodic if ``period`` is given)."""
    return np.interp(x_dst, x_src, values, period=period)


def compare(walk_x, walk_density, pde, t_walk=None, tol=1e-9):
    """L2 and Linf errors of the walk density resampled onto the oracle grid."""
    walk_x = np.asarray(walk_x)
    span_walk = walk_x[1] - walk_x[0]
    length_walk = span_walk * len(walk_x)
    length_pde = pde.dx * pde.psi.shape[0]
    if abs(walk_x[0] - pde.x_min) > tol or abs(length_walk - length_pde) > tol * max(1, length_pde):
        raise GridMismatch("walk and oracle grids cover different domains")
    if t_walk is not None and abs(t_walk - pde.t) > tol * max(1, abs(pde.t)):
        raise GridMismatch(f"walk time {t_walk} differs from oracle time {pde.t}")
    rho_pde = np.sum(np.abs(pde.psi) ** 2, axis=1)
    rho_walk = resample(walk_x, walk_density, pde.x, period=length_pde)
    diff = rho_walk - rho_pde
    return float(np.sqrt(np.sum(diff**2) * pde.dx)), float(np.max(np.abs(diff)))

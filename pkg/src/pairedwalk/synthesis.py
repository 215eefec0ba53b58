"""Construction of the paired-walk operators from the target PDE coefficients.

Given hermitian fields ``b1(t, x)`` and ``c(t, x)`` for

    d_t psi = b1 d_x psi + (1/2)(d_x b1) psi + i c psi,

build, point by point, the involution ``B``, the zeroth-order encoding ``E0``,
the primed-block unitary ``U``, the zeroth-order coin ``W0``, the first-order
block matrix ``T`` and the hermitian coin generator ``Wtilde``.  The finite
coin is ``W' = W0 exp(i eps Wtilde)`` and the encoding is ``E = E0``.

Every function broadcasts over leading batch dimensions so a whole lattice
row can be synthesized in one call.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConstraintUnsatisfiable,
    InvalidCase,
    NonSmoothField,
    SkewnessViolation,
    SpectrumOutOfRange,
)
from .linalg import (
    I2,
    SIGMA_X,
    SIGMA_Z,
    TAU_ALG,
    X,
    Z,
    Spectral2,
    assemble,
    block,
    dagger,
    direct_sum,
    herm_part,
    hermitian_eig2,
    hermitian_residual,
    im_part,
    max_abs,
    skew_part,
    unitary_exp,
    unitary_residual,
)

TAU_SYN = 1e-10
TAU_DER = 1e-6
H_DER = 1e-5
NEAR_LIGHT_SPEED = 1 - 1e-9


@dataclass
class HermitianField:
    """A hermitian 2x2 matrix field of continuum coordinates ``(t, x)``.

    ``value`` (and the optional partial derivatives) must broadcast over
    array arguments and return shape ``broadcast(t, x).shape + (2, 2)``.
    When both derivatives are given they are used instead of finite
    differences.
    """

    value: Callable
    dt_value: Optional[Callable] = None
    dx_value: Optional[Callable] = None
    static: bool = False

    def __call__(self, t, x):
        return _evaluate(self.value, t, x)

    @property
    def has_derivatives(self):
        return self.dt_value is not None and self.dx_value is not None

    def dt(self, t, x):
        return _evaluate(self.dt_value, t, x)

    def dx(self, t, x):
        return _evaluate(self.dx_value, t, x)


def _evaluate(fn, t, x):
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    out = np.asarray(fn(t, x), dtype=complex)
    return np.broadcast_to(out, t.shape + (2, 2)).copy()


def constant_field(matrix):
    m = np.asarray(matrix, dtype=complex)
    zero = np.zeros((2, 2), dtype=complex)
    return HermitianField(
        value=lambda t, x: m,
        dt_value=lambda t, x: zero,
        dx_value=lambda t, x: zero,
        static=True,
    )


# -- zeroth order ------------------------------------------------------------


def _spectrum_angles(spec):
    """Clip the spectrum to [-1, 1] and return (d, lambda, eta) stacked on a last axis of size 2."""
    d = np.stack([spec.d1, spec.d2], axis=-1)
    worst = float(np.max(np.abs(d))) if d.size else 0.0
    if worst > 1 + TAU_ALG:
        raise SpectrumOutOfRange(f"b1 eigenvalue of modulus {worst:.6g} exceeds 1")
    d = np.clip(d, -1.0, 1.0)
    lam = np.sqrt(1 - d**2)
    eta = np.arcsin(np.abs(d))  # sin(eta) = +|d|
    return d, lam, eta


def _diag2(a, b):
    out = np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b)) + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def _conjugate_by(V, m):
    VV = direct_sum(V, V)
    return VV @ m @ dagger(VV)


def build_B(b1):
    """Canonical involution ``B`` with ``block(B, 1) == b1``.

    Returns ``(B, spec, eta)`` where ``eta`` has shape ``(..., 2)``.
    """
    spec = hermitian_eig2(b1)
    d, lam, eta = _spectrum_angles(spec)
    phase = lam * np.exp(1j * eta)
    D = _diag2(d[..., 0], d[..., 1])
    Bbar = assemble(D, -np.conj(_diag2(phase[..., 0], phase[..., 1])), -_diag2(phase[..., 0], phase[..., 1]), -D)
    return _conjugate_by(spec.V, Bbar), spec, eta


def encoding_bar(d, eta):
    """The explicit 4x4 encoding diagonalizing the canonical involution in the eigenbasis of b1."""
    d = np.asarray(d, dtype=float)
    nu_p = np.sqrt(np.clip(1 + d, 0, None))
    nu_m = np.sqrt(np.clip(1 - d, 0, None))
    e = np.exp(1j * np.asarray(eta))
    out = np.zeros(d.shape[:-1] + (4, 4), dtype=complex)
    for i in range(2):
        out[..., i, i] = nu_p[..., i]
        out[..., i, i + 2] = -nu_m[..., i] * e[..., i]
        out[..., i + 2, i] = nu_m[..., i]
        out[..., i + 2, i + 2] = nu_p[..., i] * e[..., i]
    return out / np.sqrt(2)


def build_E0(spec, eta):
    d = np.clip(np.stack([spec.d1, spec.d2], axis=-1), -1.0, 1.0)
    Vd = dagger(spec.V)
    return encoding_bar(d, eta) @ direct_sum(Vd, Vd)


def build_U(B, tol=TAU_SYN):
    """Primed-block unitary fixed by ``U (I + 2 B2) = I``."""
    m = I2 + 2 * block(B, 2)
    res = unitary_residual(m)
    if res > tol:
        raise ConstraintUnsatisfiable(f"I + 2 B2 is not unitary (residual {res:.3e})")
    return dagger(m)


def build_W0(E0, U):
    """Zeroth-order coin solving ``E0^dagger W0 X E0 = I (+) U``."""
    return E0 @ direct_sum(np.broadcast_to(I2, U.shape), U) @ dagger(E0) @ X


def encoding(b1):
    """``E0`` for a stack of b1 values (convenience for derivative evaluation)."""
    B, spec, eta = build_B(b1)
    return build_E0(spec, eta)


# -- first order -------------------------------------------------------------


def _encoding_derivative(b1, db1):
    """Analytic derivative of ``encoding(b1)`` along the direction ``db1``."""
    spec = hermitian_eig2(b1)
    d, lam, eta = _spectrum_angles(spec)
    V = spec.V
    Vd = dagger(V)
    rot = Vd @ db1 @ V  # db1 in the eigenbasis
    dd = np.stack([rot[..., 0, 0].real, rot[..., 1, 1].real], axis=-1)

    gap = d[..., 0] - d[..., 1]
    coupling = rot[..., 1, 0]
    degenerate = gap <= TAU_ALG
    if np.any(degenerate & (np.abs(coupling) > TAU_ALG)):
        raise NonSmoothField("eigenvector derivative undefined at a degenerate spectrum")
    safe_gap = np.where(degenerate, 1.0, gap)
    c10 = np.where(degenerate, 0.0, coupling / safe_gap)
    # parallel-transport derivative of the eigenvector columns
    dV = np.zeros_like(V)
    dV[..., :, 0] = V[..., :, 1] * c10[..., None]
    dV[..., :, 1] = -V[..., :, 0] * np.conj(c10)[..., None]
    # restore the phase convention (pinned component stays real)
    for k in range(2):
        col = V[..., :, k]
        mag = np.abs(col)
        pin = (mag[..., 1] > mag[..., 0] * (1 + 1e-12)).astype(int)
        pinned = np.take_along_axis(col, pin[..., None], axis=-1)[..., 0].real
        dpinned = np.take_along_axis(dV[..., :, k], pin[..., None], axis=-1)[..., 0]
        theta = -dpinned.imag / np.where(pinned > 0, pinned, 1.0)
        dV[..., :, k] = dV[..., :, k] + 1j * theta[..., None] * col

    # derivative of the explicit encoding with respect to the eigenvalues
    moving = dd != 0
    edge = (np.abs(d) >= 1) | (d == 0)
    if np.any(moving & edge):
        raise NonSmoothField("encoding is not differentiable where |d| = 1 or d = 0")
    nu_p = np.sqrt(1 + d)
    nu_m = np.sqrt(1 - d)
    safe = lambda a: np.where(moving, a, 1.0)
    dnu_p = np.where(moving, dd / (2 * safe(nu_p)), 0.0)
    dnu_m = np.where(moving, -dd / (2 * safe(nu_m)), 0.0)
    deta = np.where(moving, np.sign(d) * dd / safe(lam), 0.0)
    e = np.exp(1j * eta)
    de = 1j * e * deta
    dbar = np.zeros(d.shape[:-1] + (4, 4), dtype=complex)
    for i in range(2):
        dbar[..., i, i] = dnu_p[..., i]
        dbar[..., i, i + 2] = -(dnu_m[..., i] * e[..., i] + nu_m[..., i] * de[..., i])
        dbar[..., i + 2, i] = dnu_m[..., i]
        dbar[..., i + 2, i + 2] = dnu_p[..., i] * e[..., i] + nu_p[..., i] * de[..., i]
    dbar /= np.sqrt(2)
    Ebar = encoding_bar(d, eta)
    dVd = dagger(dV)
    return dbar @ direct_sum(Vd, Vd) + Ebar @ direct_sum(dVd, dVd)


def _central(f, h):
    """Richardson-extrapolated central difference of a function of one offset, plus an error estimate."""
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(2 * h) - f(-2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3, max_abs(d1 - d2) / 3


def derivative_blocks(b1_field, t, x, h=H_DER, tol=TAU_DER):
    """``N = (d_t E0^dagger) E0`` and ``M = E0^dagger Z d_x E0`` at ``(t, x)``.

    Uses the field's analytic derivatives when it supplies them, otherwise
    central differences of the synthesized ``E0`` with step ``h``.  Returns
    ``(N, M)`` with ``N`` projected onto its skew-hermitian part.
    """
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    b1 = b1_field(t, x)
    E0 = encoding(b1)
    if b1_field.has_derivatives:
        dE_t = _encoding_derivative(b1, b1_field.dt(t, x))
        dE_x = _encoding_derivative(b1, b1_field.dx(t, x))
    else:
        if b1_field.static:
            dE_t = np.zeros_like(E0)
        else:
            dE_t, err_t = _central(lambda s: encoding(b1_field(t + s, x)), h)
            if err_t > tol:
                raise NonSmoothField(f"time derivative of the encoding unreliable (estimate {err_t:.2e})")
        dE_x, err_x = _central(lambda s: encoding(b1_field(t, x + s)), h)
        if err_x > tol:
            raise NonSmoothField(f"space derivative of the encoding unreliable (estimate {err_x:.2e})")

    N = dagger(dE_t) @ E0
    M = dagger(E0) @ Z @ dE_x
    skew_err = max_abs(N + dagger(N))
    if skew_err > tol:
        raise NonSmoothField(f"N is not skew-hermitian (residual {skew_err:.2e})")
    return skew_part(N), M


def build_T_and_Wtilde(E0, U, N, M, C, tol=TAU_SYN):
    """First-order block matrix ``T`` and hermitian coin generator ``Wtilde``.

    The encoding correction is taken to vanish, and ``T4 = 0``.
    """
    N1, N2 = block(N, 1), block(N, 2)
    M1, M2 = block(M, 1), block(M, 2)
    T1 = 2 * (1j * C - N1 - 1j * im_part(M1))
    skew = max_abs(T1 + dagger(T1))
    if skew > tol:
        raise SkewnessViolation(f"T1 is not skew-hermitian (residual {skew:.3e})")
    T2 = -2 * (N2 + U @ M2)
    T3 = -dagger(T2) @ U
    T = assemble(T1, T2, T3, np.zeros_like(T1))
    S = direct_sum(np.broadcast_to(I2, U.shape), dagger(U)) @ T
    Wtilde = -1j * X @ E0 @ S @ dagger(E0) @ X
    return T, Wtilde


@dataclass
class WalkOperators:
    """Synthesized operators at one spacetime point, or a stack of points."""

    b1: np.ndarray
    c: np.ndarray
    spectral: Spectral2
    eta: np.ndarray
    B: np.ndarray
    E0: np.ndarray
    U: np.ndarray
    W0: np.ndarray
    N: np.ndarray
    M: np.ndarray
    T: np.ndarray
    Wtilde: np.ndarray
    certificates: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def eta1(self):
        return self.eta[..., 0]

    @property
    def eta2(self):
        return self.eta[..., 1]

    @property
    def N1(self):
        return block(self.N, 1)

    @property
    def N2(self):
        return block(self.N, 2)

    @property
    def M1(self):
        return block(self.M, 1)

    @property
    def M2(self):
        return block(self.M, 2)

    def passed(self, tol=TAU_SYN):
        return all(v <= tol for v in self.certificates.values())


def certify(ops):
    """Residuals of every defining relation, maximized over the batch."""
    B, E0, U, W0 = ops.B, ops.E0, ops.U, ops.W0
    I_U = direct_sum(np.broadcast_to(I2, U.shape), U)
    T = ops.T
    S = direct_sum(np.broadcast_to(I2, U.shape), dagger(U)) @ T
    c = {
        "B_hermitian": hermitian_residual(B),
        "B_involution": max_abs(B @ B - np.eye(4)),
        "B_traceless": max_abs(np.trace(B, axis1=-2, axis2=-1)),
        "B_block1": max_abs(block(B, 1) - ops.b1),
        "E0_unitary": unitary_residual(E0),
        "B_from_E0": max_abs(dagger(E0) @ Z @ E0 - B),
        "zeroth_order": max_abs(dagger(E0) @ W0 @ X @ E0 - I_U),
        "U_unitary": unitary_residual(U),
        "constraint_UB": max_abs(U @ (I2 + 2 * block(B, 2)) - I2),
        "constraint_NMT": max_abs(2 * ops.N2 + 2 * U @ ops.M2 + block(T, 2)),
        "T_skew": max_abs(S + dagger(S)),
        "C_recovered": max_abs(ops.N1 + block(T, 1) / 2 + 1j * im_part(ops.M1) - 1j * ops.c),
        "Wtilde_hermitian": hermitian_residual(ops.Wtilde),
        "W0_unitary": unitary_residual(W0),
    }
    return c


def synthesize(b1_field, c_field, t, x, h=H_DER):
    """Synthesize the full operator set at the points ``(t, x)`` (broadcast)."""
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    b1 = b1_field(t, x)
    c = c_field(t, x)
    if hermitian_residual(c) > TAU_ALG * max(1.0, max_abs(c)):
        raise SkewnessViolation("c field is not hermitian")
    B, spec, eta = build_B(b1)
    E0 = build_E0(spec, eta)
    U = build_U(B)
    W0 = build_W0(E0, U)
    N, M = derivative_blocks(b1_field, t, x, h=h)
    T, Wtilde = build_T_and_Wtilde(E0, U, N, M, c)
    ops = WalkOperators(b1=b1, c=c, spectral=spec, eta=eta, B=B, E0=E0, U=U, W0=W0, N=N, M=M, T=T, Wtilde=Wtilde)
    ops.certificates = certify(ops)
    edge = np.maximum(np.abs(spec.d1), np.abs(spec.d2))
    if np.any(edge > NEAR_LIGHT_SPEED):
        ops.warnings.append(f"b1 spectrum within 1e-9 of the light-cone bound at {int(np.sum(edge > NEAR_LIGHT_SPEED))} point(s)")
    return ops


def synthesize_point(b1_field, c_field, t, x, h=H_DER):
    return synthesize(b1_field, c_field, float(t), float(x), h=h)


def finite_walk(ops, eps):
    """Finite-spacing coin ``W' = W0 exp(i eps Wtilde)`` and encoding ``E = E0``."""
    Wprime = ops.W0 @ unitary_exp(herm_part(ops.Wtilde), eps)
    return Wprime, ops.E0


# -- general involution family -----------------------------------------------


def _degenerate(spec, tol=TAU_ALG):
    return abs(float(spec.d1) ** 2 - float(spec.d2) ** 2) <= tol


def general_B2(spec, eta_signs=(1, 1), K=None):
    """Lower-left block of an admissible involution for the spectrum ``spec``.

    ``eta_signs`` picks ``sin(eta_i) = s_i |d_i|``.  In the degenerate case
    ``d1**2 == d2**2`` equal signs give the scalar solution and opposite
    signs the ``K``-parametrized one (``K`` defaults to the identity).
    """
    signs = tuple(int(s) for s in eta_signs)
    if len(signs) != 2 or any(s not in (-1, 1) for s in signs):
        raise InvalidCase(f"eta signs must be +/-1, got {eta_signs!r}")
    d = np.clip(np.array([float(spec.d1), float(spec.d2)]), -1, 1)
    if np.any(np.abs([spec.d1, spec.d2]) > 1 + TAU_ALG):
        raise SpectrumOutOfRange("b1 spectrum outside [-1, 1]")
    lam = np.sqrt(1 - d**2)
    eta = np.array(signs) * np.arcsin(np.abs(d))
    if not _degenerate(spec):
        V = spec.V
        return -V @ np.diag(lam * np.exp(1j * eta)) @ dagger(V)
    if signs[0] == signs[1]:
        return -lam[0] * np.exp(1j * eta[0]) * I2
    K = I2 if K is None else np.asarray(K, dtype=complex)
    rot = np.diag(np.exp(1j * eta[0] * np.array([1, -1])))
    return -lam[0] * K @ rot @ dagger(K)


def general_B4(spec, K=None):
    """Lower-right block: ``-b1`` unless ``d1 == -d2``, then ``d1 K sigma_z K^dagger``."""
    d1, d2 = float(spec.d1), float(spec.d2)
    b1 = spec.reconstruct()
    if not _degenerate(spec) or abs(d1 - d2) <= TAU_ALG:
        return -b1
    K = I2 if K is None else np.asarray(K, dtype=complex)
    return d1 * K @ SIGMA_Z @ dagger(K)


def compatible_B4_gauge(spec, B2):
    """The ``K`` for :func:`general_B4` that matches a given ``B2`` when ``d1 == -d2``.

    The off-diagonal conditions force ``B4 = -Q b1 Q^dagger`` with ``Q = -B2 / lambda``.
    """
    lam = np.sqrt(max(0.0, 1 - float(spec.d1) ** 2))
    if lam <= TAU_ALG:
        return I2
    Q = -np.asarray(B2) / lam
    return Q @ spec.V @ SIGMA_X


def general_B(spec, eta_signs=(1, 1), K=None):
    """Assemble a full admissible involution from the general block family."""
    B2 = general_B2(spec, eta_signs, K)
    K4 = compatible_B4_gauge(spec, B2)
    B4 = general_B4(spec, K4)
    return assemble(spec.reconstruct(), B2, dagger(B2), B4)


def involution_residuals(B):
    """Residuals of the four block conditions plus hermiticity, unitarity and tracelessness."""
    B1, B2, B4 = block(B, 1), block(B, 2), block(B, 4)
    return {
        "diag_1": max_abs(B1 @ B1 + dagger(B2) @ B2 - I2),
        "diag_2": max_abs(B4 @ B4 + B2 @ dagger(B2) - I2),
        "offdiag_1": max_abs(B2 @ B1 + B4 @ B2),
        "offdiag_2": max_abs(B1 @ dagger(B2) + dagger(B2) @ B4),
        "hermitian": hermitian_residual(B),
        "unitary": unitary_residual(B),
        "traceless": max_abs(np.trace(B, axis1=-2, axis2=-1)),
    }

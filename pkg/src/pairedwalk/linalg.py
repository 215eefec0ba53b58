"""Fixed-size complex linear algebra on 2x2 and 4x4 matrices.

All functions accept a single matrix or a stack with arbitrary leading batch
dimensions, ``(..., n, n)``, and broadcast like numpy's ``@``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianInput

TAU_ALG = 1e-12

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

X = np.kron(SIGMA_X, I2)
Y = np.kron(SIGMA_Y, I2)
Z = np.kron(SIGMA_Z, I2)

# 2x4 projectors onto the unprimed (u, d) and primed (u', d') coordinates
P = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=complex)
P_PRIME = np.array([[0, 0, 1, 0], [0, 0, 0, 1]], dtype=complex)


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def max_abs(m):
    """Entrywise max-norm; 0.0 for empty input."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermitian_residual(m):
    return max_abs(m - dagger(m))


def unitary_residual(m):
    n = m.shape[-1]
    return max_abs(dagger(m) @ m - np.eye(n))


def is_hermitian(m, tol=TAU_ALG):
    return hermitian_residual(m) <= tol


def is_unitary(m, tol=TAU_ALG):
    return unitary_residual(m) <= tol


# Block layout of a 4x4 matrix A = [[A1, A3], [A2, A4]]: A2 is the lower-left block.
_BLOCK_SLICES = {
    1: (slice(0, 2), slice(0, 2)),
    2: (slice(2, 4), slice(0, 2)),
    3: (slice(0, 2), slice(2, 4)),
    4: (slice(2, 4), slice(2, 4)),
}


def block(m, j):
    rows, cols = _BLOCK_SLICES[j]
    return m[..., rows, cols]


def assemble(b1, b2, b3, b4):
    """Inverse of :func:`block`: build ``[[b1, b3], [b2, b4]]``."""
    b1, b2, b3, b4 = np.broadcast_arrays(*(np.asarray(b, dtype=complex) for b in (b1, b2, b3, b4)))
    top = np.concatenate([b1, b3], axis=-1)
    bottom = np.concatenate([b2, b4], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def direct_sum(a, b):
    """Block-diagonal ``a (+) b`` of two 2x2 stacks."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    zeros = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    return assemble(a, zeros, zeros, b)


def herm_part(m):
    return 0.5 * (m + dagger(m))


def skew_part(m):
    return 0.5 * (m - dagger(m))


def im_part(m):
    """Matrix imaginary part (m - m^dagger) / 2i, a hermitian matrix."""
    return (m - dagger(m)) / 2j


@dataclass(frozen=True)
class Spectral2:
    """``h = V diag(d1, d2) V^dagger`` with ``d1 >= d2``."""

    V: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def D(self):
        d = np.zeros(np.shape(self.d1) + (2, 2), dtype=complex)
        d[..., 0, 0] = self.d1
        d[..., 1, 1] = self.d2
        return d

    def reconstruct(self):
        return self.V @ self.D @ dagger(self.V)


def _fix_phase(v):
    # Largest-modulus component (first one on ties) made real and non-negative.
    mag = np.abs(v)
    pick_second = mag[..., 1] > mag[..., 0] * (1 + 1e-12)
    lead = np.where(pick_second, v[..., 1], v[..., 0])
    lead_abs = np.abs(lead)
    phase = np.where(lead_abs > 0, np.conj(lead) / np.where(lead_abs > 0, lead_abs, 1), 1)
    return v * phase[..., None]


def hermitian_eig2(h, tol=TAU_ALG):
    """Closed-form eigendecomposition of hermitian 2x2 matrices.

    Eigenvalues come back in descending order; each eigenvector column is
    normalized with its largest-modulus entry real and non-negative, so the
    result is deterministic.  Exactly degenerate input returns ``V = I``.
    """
    h = np.asarray(h, dtype=complex)
    if hermitian_residual(h) > tol:
        raise NonHermitianInput(f"input is not hermitian (residual {hermitian_residual(h):.3e})")
    a = h[..., 0, 0].real
    c = h[..., 1, 1].real
    b = h[..., 0, 1]
    mean = 0.5 * (a + c)
    half_diff = 0.5 * (a - c)
    r = np.hypot(half_diff, np.abs(b))
    d1 = mean + r
    d2 = mean - r

    # Two algebraically equivalent eigenvectors for d1; keep the better conditioned one.
    upper = half_diff >= 0
    v0 = np.where(upper, r + half_diff, b)
    v1 = np.where(upper, np.conj(b), r - half_diff)
    norm = np.sqrt(np.abs(v0) ** 2 + np.abs(v1) ** 2)
    degenerate = norm == 0
    safe = np.where(degenerate, 1.0, norm)
    v0 = np.where(degenerate, 1.0, v0 / safe)
    v1 = np.where(degenerate, 0.0, v1 / safe)

    first = _fix_phase(np.stack([v0, v1], axis=-1))
    second = _fix_phase(np.stack([-np.conj(first[..., 1]), np.conj(first[..., 0])], axis=-1))
    V = np.stack([first, second], axis=-1)
    return Spectral2(V=V, d1=d1, d2=d2)


def unitary_exp(h, s):
    """``exp(i s h)`` for hermitian ``h`` via its eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if hermitian_residual(h) > TAU_ALG * max(1.0, max_abs(h)):
        raise NonHermitianInput("unitary_exp needs a hermitian generator")
    w, q = np.linalg.eigh(herm_part(h))
    phases = np.exp(1j * np.asarray(s)[..., None] * w)
    return (q * phases[..., None, :]) @ dagger(q)

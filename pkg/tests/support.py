"""Shared fixtures-as-functions: random matrices, smooth test fields and the acceptance reporter."""

import numpy as np

from pairedwalk.linalg import HADAMARD, I2, P, P_PRIME, dagger, direct_sum
from pairedwalk.synthesis import HermitianField, encoding, finite_walk, synthesize

ACCEPTANCE_LINES = []


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] acceptance {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, scale=1.0, n=2):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + dagger(a)) / 2


def random_b1(rng, radius=0.99):
    """Hermitian 2x2 with spectrum uniform in [-radius, radius] and a Haar-random eigenbasis."""
    V = random_unitary(rng)
    return V @ np.diag(rng.uniform(-radius, radius, 2)) @ dagger(V)


def random_c(rng, bound=5.0):
    """Hermitian 2x2 with real and imaginary parts of every entry in [-bound, bound]."""
    a = rng.uniform(-bound, bound, (2, 2)) + 1j * rng.uniform(-bound, bound, (2, 2))
    h = (a + dagger(a)) / 2
    return h


def smooth_fields(seed=1, analytic=False):
    """Time- and space-dependent b1, c with spectrum of b1 inside (-1, 1)."""
    rng = np.random.default_rng(seed)
    H0 = random_hermitian(rng)
    H0 = H0 / np.max(np.abs(np.linalg.eigvalsh(H0))) * 0.7
    # each perturbation has spectral norm 0.1, so the spectrum of b1 stays inside [-0.9, 0.9]
    H1, H2 = (h / np.max(np.abs(np.linalg.eigvalsh(h))) * 0.1 for h in (random_hermitian(rng), random_hermitian(rng)))
    C0, C1 = random_hermitian(rng, 2.0), random_hermitian(rng, 1.0)

    def b1(t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return H0 + np.multiply.outer(np.sin(x), H1) + np.multiply.outer(np.sin(t) * np.cos(x), H2)

    def c(t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return C0 + np.multiply.outer(np.cos(x + t), C1)

    if not analytic:
        return HermitianField(b1), HermitianField(c)

    def b1_dt(t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return np.multiply.outer(np.cos(t) * np.cos(x), H2)

    def b1_dx(t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return np.multiply.outer(np.cos(x), H1) - np.multiply.outer(np.sin(t) * np.sin(x), H2)

    return HermitianField(b1, dt_value=b1_dt, dx_value=b1_dx), HermitianField(c)


def smooth_spinor(seed=2):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    return lambda x: np.multiply.outer(np.exp(-np.asarray(x) ** 2), a) + np.multiply.outer(np.sin(2 * np.asarray(x)), b)


def paired_cell(psi, x, eps):
    """(u, d, u', d') of the cell centred at ``x`` built from the continuous spinor ``psi``."""
    plus, minus = psi(x + eps), psi(x - eps)
    u, up = HADAMARD @ np.array([plus[0], minus[0]])
    d, dp = HADAMARD @ np.array([plus[1], minus[1]])
    return np.array([u, d, up, dp])


def first_order_residual(b1_field, c_field, psi, t0, x0, eps):
    """Norm of one discrete step minus the predicted first-order expression at ``(t0, x0)``."""
    ops = synthesize(b1_field, c_field, t0, x0)
    Wp, _ = finite_walk(ops, eps)
    E_left = encoding(b1_field(t0, x0 - 2 * eps))
    E_right = encoding(b1_field(t0, x0 + 2 * eps))
    E_out = encoding(b1_field(t0 + 2 * eps, x0))
    fed = np.concatenate([P_PRIME @ E_left @ paired_cell(psi, x0 - 2 * eps, eps), P @ E_right @ paired_cell(psi, x0 + 2 * eps, eps)])
    out = dagger(E_out) @ Wp @ fed
    u, d, up, dp = paired_cell(psi, x0, eps)
    IU = direct_sum(I2, ops.U)
    smooth = np.array([u, d, 0, 0])
    predicted = (
        smooth
        + IU @ np.array([0, 0, up, dp])
        + IU @ ops.B @ np.array([2 * up, 2 * dp, 0, 0])
        + eps * (2 * ops.N @ IU + 2 * IU @ ops.M + ops.T) @ smooth
    )
    return float(np.linalg.norm(out - predicted))

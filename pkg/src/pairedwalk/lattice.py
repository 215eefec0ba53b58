"""The paired quantum walk on a periodic lattice.

Fine sites ``i = 0 .. n-1`` sit at continuum positions ``x_min + i * eps``.
A paired cell centred on fine site ``c`` bundles the fine sites ``c - 1`` and
``c + 1`` through the Hadamard transform into ``(u, d, u', d')``.  Cells
advance two fine sites per step, so the lattice splits into two interleaved
light-like sublattices; at step parity ``p`` the centre of cell ``j`` is

    c_j = 4 * (j // 2) + 1 + (j % 2) + 2 * p   (mod n),

which tiles the ``n = 2L`` fine sites exactly once with ``L`` cells.  One step
advances continuum time by ``2 * eps``.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OddLattice, PacketTruncated, SynthesisFailure, PairedWalkError
from .linalg import SIGMA_X, SIGMA_Z, dagger, hermitian_eig2
from .synthesis import encoding, finite_walk, synthesize

SQRT2 = np.sqrt(2.0)
TAU_EVO = 1e-12


@dataclass
class FineState:
    psi: np.ndarray  # (n, 2) complex: columns psi_plus, psi_minus
    eps: float
    t: float = 0.0
    x_min: float = 0.0

    @property
    def n_sites(self):
        return self.psi.shape[0]

    @property
    def x(self):
        return self.x_min + self.eps * np.arange(self.n_sites)

    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.eps)


@dataclass
class PairedState:
    phi: np.ndarray  # (L, 4) complex: columns u, d, u', d'
    eps: float
    t: float = 0.0
    x_min: float = 0.0
    parity: int = 0

    @property
    def n_cells(self):
        return self.phi.shape[0]

    @property
    def n_sites(self):
        return 2 * self.n_cells

    def centers(self, parity=None):
        return cell_centers(self.n_cells, self.parity if parity is None else parity)

    def norm(self):
        return float(np.sum(np.abs(self.phi) ** 2) * self.eps)


def cell_centers(n_cells, parity):
    j = np.arange(n_cells)
    return (4 * (j // 2) + 1 + (j % 2) + 2 * (parity % 2)) % (2 * n_cells)


def _check_sites(n_sites):
    if n_sites % 4:
        raise OddLattice(f"the fine lattice needs a multiple of 4 sites, got {n_sites}")


def pair(fine, parity=0):
    """Hadamard pairing of a fine state into cells ``(u, d, u', d')``."""
    n = fine.n_sites
    _check_sites(n)
    c = cell_centers(n // 2, parity)
    right = fine.psi[(c + 1) % n]
    left = fine.psi[(c - 1) % n]
    phi = np.empty((n // 2, 4), dtype=complex)
    phi[:, 0:2] = (right + left) / SQRT2
    phi[:, 2:4] = (right - left) / SQRT2
    return PairedState(phi=phi, eps=fine.eps, t=fine.t, x_min=fine.x_min, parity=parity % 2)


def unpair(paired):
    n = paired.n_sites
    c = paired.centers()
    psi = np.empty((n, 2), dtype=complex)
    psi[(c + 1) % n] = (paired.phi[:, 0:2] + paired.phi[:, 2:4]) / SQRT2
    psi[(c - 1) % n] = (paired.phi[:, 0:2] - paired.phi[:, 2:4]) / SQRT2
    return FineState(psi=psi, eps=paired.eps, t=paired.t, x_min=paired.x_min)


# -- evolution ---------------------------------------------------------------


@dataclass
class LatticeWalk:
    """Operators of the walk on a fixed periodic lattice, with per-parity caching for static fields."""

    b1_field: object
    c_field: object
    eps: float
    x_min: float
    n_sites: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _check_sites(self.n_sites)
        self.static = bool(getattr(self.b1_field, "static", False) and getattr(self.c_field, "static", False))

    @property
    def x(self):
        return self.x_min + self.eps * np.arange(self.n_sites)

    def _site_x(self, c):
        return self.x_min + self.eps * (np.asarray(c) % self.n_sites)

    def _coin(self, t, c):
        x = self._site_x(c)
        try:
            ops = synthesize(self.b1_field, self.c_field, t, x)
        except PairedWalkError as exc:
            raise SynthesisFailure(f"synthesis failed near t={t:.6g}: {exc}", t=t) from exc
        Wprime, _ = finite_walk(ops, self.eps)
        return Wprime

    def _static_tables(self):
        if "coin" not in self._cache:
            c = np.arange(self.n_sites)
            self._cache["coin"] = self._coin(0.0, c)
            self._cache["enc"] = encoding(self.b1_field(0.0, self._site_x(c)))
        return self._cache["coin"], self._cache["enc"]

    def transfer(self, t, parity):
        """Matrices ``(A, R)`` with ``new[j] = A[j] @ phi[left(j)] + R[j] @ phi[right(j)]``."""
        key = ("transfer", parity % 2)
        if self.static and key in self._cache:
            return self._cache[key]
        L = self.n_sites // 2
        c_out = cell_centers(L, parity + 1)
        c_left, c_right = c_out - 2, c_out + 2
        if self.static:
            coin_all, enc_all = self._static_tables()
            n = self.n_sites
            coin = coin_all[c_out % n]
            E_out = enc_all[c_out % n]
            E_left = enc_all[c_left % n]
            E_right = enc_all[c_right % n]
        else:
            coin = self._coin(t, c_out)
            E_out = encoding(self.b1_field(t + 2 * self.eps, self._site_x(c_out)))
            E_left = encoding(self.b1_field(t, self._site_x(c_left)))
            E_right = encoding(self.b1_field(t, self._site_x(c_right)))
        G = dagger(E_out) @ coin
        # left neighbour feeds its primed half into the upper slot, right neighbour its unprimed half into the lower slot
        A = G[:, :, 0:2] @ E_left[:, 2:4, :]
        R = G[:, :, 2:4] @ E_right[:, 0:2, :]
        if self.static:
            self._cache[key] = (A, R)
        return A, R

    def neighbours(self, parity):
        j = np.arange(self.n_sites // 2)
        L = len(j)
        if parity % 2 == 0:
            return j, (j + 2) % L
        return (j - 2) % L, j

    def step(self, state):
        """One application of the local rule to every cell: time advances by ``2 eps``."""
        A, R = self.transfer(state.t, state.parity)
        left, right = self.neighbours(state.parity)
        phi = np.einsum("jab,jb->ja", A, state.phi[left]) + np.einsum("jab,jb->ja", R, state.phi[right])
        return PairedState(phi=phi, eps=state.eps, t=state.t + 2 * self.eps, x_min=state.x_min, parity=(state.parity + 1) % 2)


def step(paired, walk):
    return walk.step(paired)


@dataclass
class Run:
    """Snapshots of a simulation: times, fine spinors and the norm history."""

    x: np.ndarray
    eps: float
    times: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    @property
    def densities(self):
        return [np.sum(np.abs(p) ** 2, axis=1) for p in self.psi]

    def norm_drift(self):
        n = np.asarray(self.norms)
        return float(np.max(np.abs(n - n[0])) / n[0]) if len(n) else 0.0


def evolve(walk, state, steps, stride=None, run=None):
    """Advance ``steps`` steps recording the fine state every ``stride`` steps (and the last one)."""
    if isinstance(state, FineState):
        state = pair(state)
    stride = steps if not stride or stride > steps else stride
    if run is None:
        run = Run(x=walk.x, eps=walk.eps)
        first = unpair(state)
        run.times.append(state.t)
        run.psi.append(first.psi)
        run.norms.append(state.norm())
    for k in range(1, steps + 1):
        state = walk.step(state)
        if k % stride == 0 or k == steps:
            run.times.append(state.t)
            run.psi.append(unpair(state).psi)
            run.norms.append(state.norm())
    return state, run


# -- initial data and observables --------------------------------------------


def dirac_spinors(p, m, alpha=SIGMA_Z, beta=SIGMA_X, reference=None):
    """Positive and negative energy eigenvectors of ``alpha p + m beta``.

    Phases are aligned to the eigenvectors at ``reference`` so the result is
    smooth in ``p`` around it.
    """
    p = np.asarray(p, dtype=float)
    h = p[..., None, None] * np.asarray(alpha) + m * np.asarray(beta)
    V = hermitian_eig2(h).V
    if reference is not None:
        V_ref = hermitian_eig2(reference * np.asarray(alpha) + m * np.asarray(beta)).V
        overlap = np.einsum("ak,...ak->...k", np.conj(V_ref), V)
        mag = np.abs(overlap)
        phase = np.where(mag > 0, np.conj(overlap) / np.where(mag > 0, mag, 1), 1)
        V = V * phase[..., None, :]
    return V[..., :, 0], V[..., :, 1]


def gaussian_wavepacket(x0, p0, sigma, m, eps, n_sites, x_min=0.0, energy="both", alpha=SIGMA_Z, beta=SIGMA_X, tail_tol=1e-12):
    """Gaussian packet synthesized exactly on the lattice's Fourier modes.

    ``energy`` selects ``"positive"``, ``"negative"`` or ``"both"`` branches of
    the free Dirac Hamiltonian.  The result is normalized to unit L2 norm.
    """
    if sigma <= 0:
        raise PacketTruncated("sigma must be positive")
    _check_sites(n_sites)
    k = 2 * np.pi * np.fft.fftfreq(n_sites, d=eps)
    weight = np.exp(-((k - p0) ** 2) / (2 * sigma**2))
    up, um = dirac_spinors(k, m, alpha, beta, reference=p0)
    spinor = {"positive": up, "negative": um, "both": up + um}[energy]
    coeff = (weight * np.exp(-1j * k * (x0 - x_min)))[:, None] * spinor
    psi = np.fft.ifft(coeff, axis=0) * n_sites
    amp = np.sqrt(np.sum(np.abs(psi) ** 2, axis=1))
    edge = max(amp[0], amp[-1]) / amp.max()
    if edge > tail_tol:
        raise PacketTruncated(f"packet tail at the domain boundary is {edge:.2e} of its peak (limit {tail_tol:.0e})")
    fine = FineState(psi=psi, eps=eps, t=0.0, x_min=x_min)
    fine.psi = psi / np.sqrt(fine.norm())
    return fine


def density(fine):
    return np.sum(np.abs(fine.psi) ** 2, axis=1)


def refine_peak(x, rho):
    """Argmax of ``rho`` refined by a three-point parabola."""
    i = int(np.argmax(rho))
    if 0 < i < len(rho) - 1:
        y0, y1, y2 = rho[i - 1], rho[i], rho[i + 1]
        den = y0 - 2 * y1 + y2
        offset = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        return float(x[i] + offset * (x[i + 1] - x[i]))
    return float(x[i])


def peak_trajectory(run, smooth=0):
    """``[(t, x_peak)]`` for every snapshot; ``smooth > 0`` applies a box filter of that half-width first."""
    out = []
    for t, rho in zip(run.times, run.densities):
        if smooth:
            kernel = np.ones(2 * smooth + 1) / (2 * smooth + 1)
            rho = np.convolve(np.concatenate([rho[-smooth:], rho, rho[:smooth]]), kernel, mode="valid")
        out.append((float(t), refine_peak(run.x, rho)))
    return out


# -- output ------------------------------------------------------------------

SNAPSHOT_HEADER = ("t", "x", "density", "re_psi_plus", "im_psi_plus", "re_psi_minus", "im_psi_minus")


def write_snapshots(path, run, site_stride=1):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_HEADER)
        for t, psi in zip(run.times, run.psi):
            sel = slice(None, None, site_stride)
            xs = run.x[sel]
            p = psi[sel]
            rho = np.sum(np.abs(p) ** 2, axis=1)
            for row in zip(xs, rho, p[:, 0].real, p[:, 0].imag, p[:, 1].real, p[:, 1].imag):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def write_heatmap(path, run, max_width=2048):
    """8-bit binary PGM, one row per snapshot (time increasing downwards), each row scaled to its own max."""
    rows = []
    for rho in run.densities:
        n = len(rho)
        factor = max(1, int(np.ceil(n / max_width)))
        usable = (n // factor) * factor
        binned = rho[:usable].reshape(-1, factor).mean(axis=1)
        peak = binned.max()
        rows.append(np.zeros_like(binned) if peak <= 0 else binned / peak)
    img = np.clip(np.rint(np.asarray(rows) * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return img.shape

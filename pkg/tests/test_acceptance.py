"""Acceptance criteria 1-7.  Each test prints one PASS/FAIL line (also collected in the pytest summary).

Run alone with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from support import (  # noqa: E402
    first_order_residual,
    random_b1,
    random_c,
    random_hermitian,
    random_unitary,
    report,
    smooth_fields,
    smooth_spinor,
)

from pairedwalk.config import load_config  # noqa: E402
from pairedwalk.experiments import (  # noqa: E402
    build_fields,
    causality_profile,
    cmd_converge,
    light_cone_ok,
    packet_seeds,
    run_simulation,
)
from pairedwalk.lattice import LatticeWalk, evolve, gaussian_wavepacket, peak_trajectory  # noqa: E402
from pairedwalk.linalg import SIGMA_Z, I2, Spectral2, dagger  # noqa: E402
from pairedwalk.spacetime import dirac_matching, flat, null_geodesics  # noqa: E402
from pairedwalk.synthesis import HermitianField, general_B, general_B2, involution_residuals, synthesize  # noqa: E402

REQUIRED_CERTIFICATES = ("B_involution", "B_from_E0", "zeroth_order", "constraint_UB", "constraint_NMT", "Wtilde_hermitian")


def _table_field(values, dt_values=None, dx_values=None):
    """A field whose value at ``x = k`` is ``values[k]``: one independent random matrix per sample point."""

    def lookup(table):
        return lambda t, x: table[np.asarray(x).astype(int)]

    return HermitianField(
        lookup(values),
        dt_value=None if dt_values is None else lookup(dt_values),
        dx_value=None if dx_values is None else lookup(dx_values),
    )


def test_1_certificate_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 1000
    b1 = np.array([random_b1(rng) for _ in range(n)])
    c = np.array([random_c(rng) for _ in range(n)])
    db1_dt = np.array([random_hermitian(rng) for _ in range(n)])
    db1_dx = np.array([random_hermitian(rng) for _ in range(n)])
    ops = synthesize(_table_field(b1, db1_dt, db1_dx), _table_field(c), np.zeros(n), np.arange(n, dtype=float))
    worst_required = max(ops.certificates[k] for k in REQUIRED_CERTIFICATES)
    worst_all = max(ops.certificates.values())
    elapsed = time.perf_counter() - start
    passed = worst_all <= 1e-10 and elapsed < 10
    report(1, "synthesis certificates on 1000 random points", passed, f"max required residual {worst_required:.2e}, max any {worst_all:.2e}, {elapsed:.2f} s")
    assert passed


def _family_draws(case, rng):
    """``(spec, eta_signs)`` for one structural case of the general involution family."""
    V = random_unitary(rng)
    if case == "generic":
        while True:
            d = np.sort(rng.uniform(-0.99, 0.99, 2))[::-1]
            if abs(d[0] ** 2 - d[1] ** 2) > 1e-3:
                break
        signs = tuple(rng.choice([-1, 1], 2))
    else:
        a = rng.uniform(0.01, 0.99)
        d = np.array([a, a]) if case.startswith("equal") else np.array([a, -a])
        s = rng.choice([-1, 1])
        signs = (s, s) if case.endswith("same") else (s, -s)
    return Spectral2(V=V, d1=d[0], d2=d[1]), signs


def test_2_involution_family_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    # generic: B2 case 1 / B4 = -B1; equal-*: B4 = -B1 (d1 = d2); opposite-*: B4 = d1 K sigma_z K^dagger.
    # *-same: B2 scalar case; *-flip: B2 K-parametrized case.
    cases = ("generic", "equal-same", "equal-flip", "opposite-same", "opposite-flip")
    worst = 0.0
    gauge = 0.0
    for case in cases:
        for _ in range(200):
            spec, signs = _family_draws(case, rng)
            K = random_unitary(rng)
            B = general_B(spec, signs, K)
            worst = max(worst, max(involution_residuals(B).values()))
            if case.endswith("flip"):
                theta = rng.uniform(0, 2 * np.pi)
                K_rot = K @ (np.cos(theta) * I2 + 1j * np.sin(theta) * SIGMA_Z)
                gauge = max(gauge, float(np.max(np.abs(general_B2(spec, signs, K) - general_B2(spec, signs, K_rot)))))
                gauge = max(gauge, float(np.max(np.abs(B - general_B(spec, signs, K_rot)))))
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-10 and gauge <= 1e-12 and elapsed < 5
    report(2, "general involution family, 5 x 200 draws", passed, f"max block residual {worst:.2e}, K-gauge spread {gauge:.2e}, {elapsed:.2f} s")
    assert passed


def test_3_unitarity_and_causality():
    start = time.perf_counter()
    desk = load_config(preset="desk")
    configs = {
        "schwarzschild": desk,
        "flat": load_config(preset="desk", kind="flat", x_min=-6.0, x_max=6.0, x0=0.0, p0=5.0),
    }
    details = []
    passed = True
    for name, cfg in configs.items():
        _, _, _, b1, c = build_fields(cfg)
        walk = LatticeWalk(b1, c, cfg.eps, cfg.x_min, cfg.n_sites)
        state = gaussian_wavepacket(cfg.x0, cfg.p0, cfg.sigma, cfg.m, cfg.eps, cfg.n_sites, x_min=cfg.x_min, energy=cfg.energy)
        _, run = evolve(walk, state, 10_000, stride=100)
        drift = run.norm_drift()
        site = cfg.n_sites // 2 + 1
        exact = light_cone_ok(causality_profile(walk, site, 40), exact=True)
        passed &= drift <= 1e-10 and exact
        details.append(f"{name}: drift {drift:.2e}, light cone {'exact' if exact else 'VIOLATED'}")
    elapsed = time.perf_counter() - start
    passed &= elapsed < 120
    report(3, "unitarity and causality over 1e4 steps", passed, "; ".join(details) + f", {elapsed:.1f} s")
    assert passed


def test_4_group_velocity():
    start = time.perf_counter()
    m, eps, n, x_min, steps = 10.0, 1e-3, 20_000, -8.0, 2000
    b1, c = dirac_matching(flat(m))
    walk = LatticeWalk(b1, c, eps, x_min, n)
    errors = []
    for p0 in (5.0, 10.0, 20.0):
        state = gaussian_wavepacket(0.0, p0, 1.0, m, eps, n, x_min=x_min, energy="positive")
        _, run = evolve(walk, state, steps, stride=100)
        traj = np.array(peak_trajectory(run))
        measured = np.polyfit(traj[:, 0], traj[:, 1], 1)[0]
        expected = p0 / np.hypot(p0, m)
        errors.append((p0, (measured - expected) / expected))
    elapsed = time.perf_counter() - start
    passed = all(abs(e) <= 0.02 for _, e in errors) and elapsed < 120
    detail = ", ".join(f"p0={p0:g}: {100 * e:+.2f}%" for p0, e in errors)
    report(4, "flat group velocity vs p0/sqrt(p0^2+m^2), m=10", passed, f"{detail}, {elapsed:.1f} s")
    assert passed


def test_5_convergence():
    start = time.perf_counter()
    cfg = load_config(kind="flat", m=1.0, x_min=-32.0, x_max=32.0, x0=0.0, p0=2.0, sigma=1.0, energy="both", t_final=1.0)
    rep = cmd_converge(cfg, [4e-3, 2e-3, 1e-3])
    errs = [r[1] for r in rep.rows]
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    elapsed = time.perf_counter() - start
    passed = decreasing and rep.slope >= 0.8 and elapsed < 300
    table = ", ".join(f"{e:g}: {l2:.3e}" for e, l2, _ in rep.rows)
    report(5, "flat m=1 walk vs oracle at T=1", passed, f"L2 errors {table}; slope {rep.slope:.3f}, r2 {rep.r2:.4f}, {elapsed:.1f} s")
    assert passed


def test_6_schwarzschild_desk():
    start = time.perf_counter()
    cfg = load_config(preset="desk")
    run, scale, metric = run_simulation(cfg)
    traj = np.array(peak_trajectory(run))
    t, x = traj[:, 0], traj[:, 1]
    monotone = bool(np.all(np.diff(x) < 0))
    outside = bool(np.all(x > 2 * cfg.M))
    geos = null_geodesics(metric, packet_seeds(cfg), t_max=t[-1], dt=t[-1] / 800)
    curves = np.array([np.interp(t, g.t, g.x) for g in geos])
    lower, upper = curves.min(axis=0), curves.max(axis=0)
    inside = bool(np.all((x >= lower) & (x <= upper)))
    elapsed = time.perf_counter() - start
    passed = monotone and outside and inside and elapsed < 180
    report(
        6,
        "Schwarzschild desk run (M=0.5, m=5, |p0|=5 ingoing, eps=1e-3)",
        passed,
        f"peak {x[0]:.3f} -> {x[-1]:.3f} over t={t[-1]:.2f}, monotone {monotone}, above 2M {outside}, "
        f"inside null envelope {inside} (min margin {np.min(np.minimum(x - lower, upper - x)):.3f}), {elapsed:.1f} s",
    )
    assert passed


def test_7_first_order_expansion():
    start = time.perf_counter()
    b1, c = smooth_fields(seed=3)
    psi = smooth_spinor(seed=4)
    eps_values = (1e-2, 5e-3, 2.5e-3)
    residuals = [first_order_residual(b1, c, psi, 0.3, 0.2, e) for e in eps_values]
    ratios = [a / b for a, b in zip(residuals, residuals[1:])]
    K = [r / e**2 for r, e in zip(residuals, eps_values)]
    elapsed = time.perf_counter() - start
    passed = all(abs(q - 4) <= 0.8 for q in ratios) and elapsed < 60
    report(7, "first-order expansion residual is O(eps^2)", passed, f"K = {', '.join(f'{k:.2f}' for k in K)}; halving ratios {', '.join(f'{q:.3f}' for q in ratios)}, {elapsed:.2f} s")
    assert passed


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)

"""Experiment drivers behind the command-line subcommands.

Each ``cmd_*`` function takes a :class:`~pairedwalk.config.SimConfig`, writes
its artifacts into its own output directory and returns a JSON-serializable
summary.
"""

import csv
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, PairedWalkError
from .lattice import (
    FineState,
    LatticeWalk,
    density,
    evolve,
    gaussian_wavepacket,
    pair,
    peak_trajectory,
    unpair,
    write_heatmap,
    write_snapshots,
)
from .linalg import dagger, hermitian_eig2
from .oracle import ConvergenceReport, PDEGrid, compare, pde_evolve
from .spacetime import dirac_matching, null_geodesics, rescale_for_causality
from .synthesis import TAU_SYN, general_B, involution_residuals, synthesize

OPERATOR_NAMES = ("b1", "c", "B", "E0", "U", "W0", "N", "M", "T", "Wtilde")


def _ensure_dir(out):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _matrix_json(m):
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def build_fields(cfg):
    """``(metric, walk_metric, time_scale, b1_field, c_field)`` for a config.

    ``walk_metric`` is the causality-rescaled metric whose time coordinate is
    the walk time; ``metric`` keeps the physical time.
    """
    metric = cfg.metric()
    walk_metric, scale = rescale_for_causality(metric) if cfg.rescale else (metric, 1.0)
    b1_field, c_field = dirac_matching(walk_metric)
    return metric, walk_metric, scale, b1_field, c_field


# -- synthesize --------------------------------------------------------------


def cmd_synthesize(cfg, t, x, out=None):
    """Operators and certificate residuals at one point; ``t`` is physical time."""
    metric, _, scale, b1_field, c_field = build_fields(cfg)
    metric.check_point(t, x)
    ops = synthesize(b1_field, c_field, float(t) * scale, float(x))
    dump = {
        "t": float(t),
        "x": float(x),
        "time_scale": scale,
        "eta": np.asarray(ops.eta).tolist(),
        "spectrum": [float(ops.spectral.d1), float(ops.spectral.d2)],
        "operators": {name: _matrix_json(getattr(ops, name)) for name in OPERATOR_NAMES},
        "certificates": ops.certificates,
        "passed": ops.passed(),
        "warnings": ops.warnings,
    }
    if out is not None:
        path = _ensure_dir(out) / "operators.json"
        path.write_text(json.dumps(dump, indent=2) + "\n", encoding="utf-8")
    return dump


# -- simulate ----------------------------------------------------------------


def initial_packet(cfg, n_sites=None, eps=None):
    return gaussian_wavepacket(
        cfg.x0,
        cfg.p0,
        cfg.sigma,
        cfg.m,
        cfg.eps if eps is None else eps,
        cfg.n_sites if n_sites is None else n_sites,
        x_min=cfg.x_min,
        energy=cfg.energy,
        alpha=cfg.alpha_beta[0],
        beta=cfg.alpha_beta[1],
        tail_tol=cfg.tail_tol,
    )


def packet_seeds(cfg):
    """Geodesic seeds at ``x0 -+ 3 w`` with ``w = 1/sigma`` the spatial width of the packet."""
    half = 3.0 / cfg.sigma
    return [cfg.x0 - half, cfg.x0 + half]


def write_geodesics(path, geodesics):
    """CSV polylines ``seed,family,t,x``; an empty list gives an empty file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not geodesics:
            return
        writer = csv.writer(fh)
        writer.writerow(("seed", "family", "t", "x"))
        for g in geodesics:
            for t, x in g.samples:
                writer.writerow((repr(float(g.seed)), g.kind, repr(float(t)), repr(float(x))))


def _clip_seeds(metric, seeds):
    lo, hi = metric.x_range
    return [float(np.clip(s, lo, hi)) for s in seeds]


def run_simulation(cfg):
    """Evolve the configured packet; returns ``(run, scale, metric)`` with ``run.times`` in physical time."""
    metric, _, scale, b1_field, c_field = build_fields(cfg)
    walk = LatticeWalk(b1_field, c_field, cfg.eps, cfg.x_min, cfg.n_sites)
    state = initial_packet(cfg)
    _, run = evolve(walk, state, cfg.steps, stride=cfg.stride)
    run.times = [t / scale for t in run.times]
    return run, scale, metric


def cmd_simulate(cfg, out=None):
    out = _ensure_dir(out or cfg.out)
    run, scale, metric = run_simulation(cfg)
    write_snapshots(out / "snapshots.csv", run, site_stride=cfg.site_stride)
    shape = write_heatmap(out / "heatmap.pgm", run, max_width=cfg.heatmap_width)
    t_end = run.times[-1]
    n_geo = max(1, int(round(t_end / cfg.geodesic_dt)))
    geodesics = null_geodesics(metric, _clip_seeds(metric, packet_seeds(cfg)), t_max=t_end, dt=t_end / n_geo)
    write_geodesics(out / "geodesics.csv", geodesics)
    peaks = peak_trajectory(run)
    meta = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.as_sections(),
        "n_sites": cfg.n_sites,
        "time_scale": scale,
        "horizon_guard": cfg.horizon_guard if cfg.kind == "schwarzschild" else None,
        "norm_drift": run.norm_drift(),
        "snapshots": len(run.times),
        "heatmap_shape": list(shape),
        "peak_trajectory": [[float(t), float(x)] for t, x in peaks],
        "boundary": cfg.boundary,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    (out / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    return meta


# -- converge ----------------------------------------------------------------


def _steps_for(t_final, eps):
    steps = t_final / (2 * eps)
    n = int(round(steps))
    if n < 1 or abs(steps - n) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"t_final={t_final} is not a whole number of walk steps (2*eps={2 * eps})")
    return n


def walk_error(cfg, eps, reference, b1_field, c_field):
    """``(eps, l2, linf)`` density errors of the walk at spacing ``eps`` against the oracle grid."""
    span = cfg.x_max - cfg.x_min
    n_sites = int(round(span / eps))
    sub = replace(cfg, eps=eps)
    sub.n_sites  # validates divisibility
    walk = LatticeWalk(b1_field, c_field, eps, cfg.x_min, n_sites)
    state, _ = evolve(walk, pair(initial_packet(cfg, n_sites, eps)), _steps_for(cfg.t_final, eps))
    fine = unpair(state)
    l2, linf = compare(walk.x, density(fine), reference, t_walk=state.t)
    return (float(eps), l2, linf)


def oracle_solution(cfg, dx, b1_field, c_field):
    span = cfg.x_max - cfg.x_min
    n = int(round(span / dx))
    packet = initial_packet(cfg, n, dx)
    grid = PDEGrid(psi=packet.psi, dx=dx, dt=0.25 * dx, x_min=cfg.x_min)
    return pde_evolve(grid, b1_field, c_field, cfg.t_final)


def cmd_converge(cfg, eps_list=None, out=None, threads=1):
    eps_list = sorted(eps_list or cfg.eps_list, reverse=True)
    if len(eps_list) < 3:
        raise ConfigError("convergence needs at least three eps values")
    _, _, _, b1_field, c_field = build_fields(cfg)
    reference = oracle_solution(cfg, cfg.oracle_dx or max(eps_list), b1_field, c_field)
    job = lambda e: walk_error(cfg, e, reference, b1_field, c_field)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, eps_list))
    else:
        rows = [job(e) for e in eps_list]
    report = ConvergenceReport(rows=rows).fit()
    if out is not None:
        (_ensure_dir(out) / "convergence.csv").write_text(report.to_text(), encoding="utf-8")
    return report


# -- check -------------------------------------------------------------------


def support(psi):
    """Indices of the first and last fine site carrying a nonzero amplitude."""
    nz = np.flatnonzero(np.any(psi != 0, axis=1))
    return (int(nz[0]), int(nz[-1])) if nz.size else None


def causality_profile(walk, site, steps, seed=0):
    """Fine-site support ``(lo, hi)`` of a random single-site excitation after each step (step 0 first)."""
    rng = np.random.default_rng(seed)
    psi = np.zeros((walk.n_sites, 2), dtype=complex)
    psi[site] = rng.normal(size=2) + 1j * rng.normal(size=2)
    state = pair(FineState(psi=psi, eps=walk.eps, t=0.0, x_min=walk.x_min))
    profile = [support(unpair(state).psi)]
    for _ in range(steps):
        state = walk.step(state)
        profile.append(support(unpair(state).psi))
    return profile


def light_cone_ok(profile, exact=True):
    """Support check: one paired cell (two fine sites) per side per step; ``exact`` demands equality.

    The first step starts from the excitation's cell, whose two fine sites are
    two apart, so it may reach four sites from the excited one.
    """
    site = profile[0][0]
    for k in range(1, len(profile)):
        lo, hi = profile[k]
        if k == 1:
            ok = site - 4 <= lo and hi <= site + 4
        else:
            plo, phi = profile[k - 1]
            ok = (lo == plo - 2 and hi == phi + 2) if exact else (lo >= plo - 2 and hi <= phi + 2)
        if not ok:
            return False
    return True


def _random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def involution_sweep(draws=50, seed=0):
    """Max block-condition residual over random draws of every B2/B4 case of the general family."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in ("generic", "equal", "opposite"):
        for _ in range(draws):
            V = _random_unitary(rng)
            if case == "generic":
                d = np.sort(rng.uniform(-0.99, 0.99, 2))[::-1]
            elif case == "equal":
                d = np.full(2, rng.uniform(-0.99, 0.99))
            else:
                a = rng.uniform(0.01, 0.99)
                d = np.array([a, -a])
            spec = hermitian_eig2(V @ np.diag(d) @ dagger(V))
            signs = tuple(rng.choice([-1, 1], size=2))
            B = general_B(spec, signs, _random_unitary(rng))
            worst = max(worst, max(involution_residuals(B).values()))
    return worst


def _sweep_points(cfg, n=257):
    lo, hi = cfg.x_min, cfg.x_max - cfg.eps
    x = np.linspace(lo, hi, n)
    t_end = 2 * cfg.eps * cfg.steps
    return np.concatenate([np.zeros(n), np.full(n, 0.5 * t_end)]), np.concatenate([x, x])


def cmd_check(cfg, out=None, unitarity_steps=20):
    """Invariant suite; returns ``(ok, summary)``."""
    summary = {"version": __version__, "checks": {}}

    def record(name, fn):
        try:
            passed, detail = fn()
        except PairedWalkError as exc:
            passed, detail = False, {"error": type(exc).__name__, "message": str(exc)}
        summary["checks"][name] = {"passed": bool(passed), **detail}

    state = {}

    def certificates():
        _, _, scale, b1_field, c_field = build_fields(cfg)
        state["fields"] = (b1_field, c_field)
        t, x = _sweep_points(cfg)
        ops = synthesize(b1_field, c_field, t, x)
        worst = max(ops.certificates.values())
        return worst <= TAU_SYN, {"max_residual": worst, "time_scale": scale, "points": int(t.size)}

    def unitarity():
        b1_field, c_field = state["fields"]
        walk = LatticeWalk(b1_field, c_field, cfg.eps, cfg.x_min, cfg.n_sites)
        rng = np.random.default_rng(1)
        psi = rng.normal(size=(cfg.n_sites, 2)) + 1j * rng.normal(size=(cfg.n_sites, 2))
        fine = FineState(psi=psi, eps=cfg.eps, t=0.0, x_min=cfg.x_min)
        _, run = evolve(walk, fine, unitarity_steps, stride=1)
        drift = run.norm_drift()
        return drift <= 1e-10, {"norm_drift": drift, "steps": unitarity_steps}

    def causality():
        b1_field, c_field = state["fields"]
        walk = LatticeWalk(b1_field, c_field, cfg.eps, cfg.x_min, cfg.n_sites)
        steps = min(20, cfg.n_sites // 16)
        profile = causality_profile(walk, cfg.n_sites // 2, steps)
        return light_cone_ok(profile, exact=False), {"saturated": light_cone_ok(profile, exact=True), "steps": steps}

    def involutions():
        worst = involution_sweep()
        return worst <= TAU_SYN, {"max_residual": worst}

    record("certificates", certificates)
    if "fields" in state:
        record("unitarity", unitarity)
        record("causality", causality)
    record("involution_family", involutions)
    ok = all(c["passed"] for c in summary["checks"].values())
    summary["passed"] = ok
    if out is not None:
        (_ensure_dir(out) / "check.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return ok, summary


# -- geodesics ---------------------------------------------------------------


def cmd_geodesics(cfg, seeds, out=None, t_max=None):
    metric = cfg.metric()
    t_max = 2 * cfg.eps * cfg.steps if t_max is None else t_max
    n = max(1, int(round(t_max / cfg.geodesic_dt)))
    for s in seeds:
        lo, hi = metric.x_range
        if not lo <= s <= hi:
            raise DomainError(f"seed x0={s} outside the domain [{lo}, {hi}]")
    geodesics = null_geodesics(metric, list(seeds), t_max=t_max, dt=t_max / n) if seeds else []
    path = _ensure_dir(out or cfg.out) / "geodesics.csv"
    write_geodesics(path, geodesics)
    return path, geodesics

import numpy as np
import pytest

from pairedwalk.errors import ConfigError, SkewnessViolation, DomainError, HorizonDomain, UnboundedMetric
from pairedwalk.linalg import I2, SIGMA_X, SIGMA_Z
from pairedwalk.spacetime import (
    CAUSALITY_MARGIN,
    characteristic_speeds,
    clifford_residual,
    dirac_matching,
    dyad_residual,
    flat,
    horizon_cutoff,
    null_geodesics,
    read_table,
    rescale_for_causality,
    schwarzschild,
    spectral_radius,
    tabulated,
    write_table,
)
from pairedwalk.synthesis import HermitianField, derivative_blocks, synthesize


def test_flat_massless_matching():
    b1, c = dirac_matching(flat(0.0))
    assert np.allclose(b1(0.0, 0.3), -SIGMA_Z)
    assert np.allclose(c(0.0, 0.3), 0)


def test_schwarzschild_matching_at_three():
    b1, c = dirac_matching(schwarzschild(0.5, mass=2.0))
    assert np.allclose(b1(0.0, 3.0), -(2 / 3) * SIGMA_Z)
    assert np.allclose(c(0.0, 3.0), -2.0 * np.sqrt(2 / 3) * SIGMA_X)


def test_schwarzschild_fields_vanish_at_horizon():
    M = 0.5
    met = schwarzschild(M, mass=1.0, guard=1e-9)
    b1, c = dirac_matching(met)
    x = 2 * M * (1 + 1e-8)
    assert np.max(np.abs(b1(0.0, x))) < 1e-7
    assert np.max(np.abs(c(0.0, x))) < 1e-3


def test_schwarzschild_dyads_and_horizon():
    met = schwarzschild(0.5)
    assert np.isclose(met.e11(0.0, 3.0), np.sqrt(2 / 3))
    assert np.isclose(met.e00(0.0, 3.0), np.sqrt(3 / 2))
    assert np.isclose(horizon_cutoff(0.5), 1.05)
    with pytest.raises(HorizonDomain):
        schwarzschild(0.5, x_range=(1.02, 5.0))
    with pytest.raises(HorizonDomain):
        met.check_point(0.0, 1.01)
    with pytest.raises(ConfigError):
        schwarzschild(0.0)


def test_schwarzschild_small_mass_approaches_flat():
    b1, c = dirac_matching(schwarzschild(1e-12, mass=1.0))
    b1f, cf = dirac_matching(flat(1.0))
    assert np.allclose(b1(0.0, 2.0), b1f(0.0, 2.0))
    assert np.allclose(c(0.0, 2.0), cf(0.0, 2.0))


def test_dyad_metric_consistency():
    rng = np.random.default_rng(0)
    x = rng.uniform(1.06, 20.0, 1000)
    t = np.zeros_like(x)
    met = schwarzschild(0.5)
    assert dyad_residual(met, t, x) <= 1e-10
    g = met.metric_tensor(t[:100], x[:100])
    assert np.allclose(g[:, 0, 0] * met.e00(t[:100], x[:100]) ** 2, 1)
    assert dyad_residual(flat(1.0, speed=0.7), t, x) <= 1e-10


def test_chiral_clifford_relations():
    assert clifford_residual(SIGMA_Z, SIGMA_X) <= 1e-14
    assert clifford_residual(SIGMA_Z, SIGMA_Z) > 1


def test_flat_fields_have_no_derivative_blocks():
    b1, _ = dirac_matching(flat(3.0))
    N, M = derivative_blocks(b1, 0.5, np.linspace(-1, 1, 7))
    assert np.allclose(N, 0) and np.allclose(M, 0)


def test_schwarzschild_analytic_derivative_matches_difference():
    b1, c = dirac_matching(schwarzschild(0.5, mass=3.0))
    x, h = 2.5, 1e-6
    assert np.allclose(b1.dx(0.0, x), (b1(0.0, x + h) - b1(0.0, x - h)) / (2 * h), atol=1e-8)
    assert np.allclose(c.dx(0.0, x), (c(0.0, x + h) - c(0.0, x - h)) / (2 * h), atol=1e-7)
    assert np.allclose(b1.dt(0.0, x), 0)


def test_rescale_identity_when_bounded():
    met = schwarzschild(0.5, x_range=(1.05, 50.0))
    out, scale = rescale_for_causality(met)
    assert scale == 1.0 and out is met
    assert rescale_for_causality(flat(1.0, x_range=(-1, 1)))[1] == 1.0


def test_rescale_fast_metric():
    met = flat(1.0, speed=2.0, x_range=(-1.0, 1.0))
    out, scale = rescale_for_causality(met)
    assert np.isclose(scale, 2 / (1 - CAUSALITY_MARGIN))
    assert np.isclose(spectral_radius(out), 1 - CAUSALITY_MARGIN)
    ops = synthesize(*dirac_matching(out), 0.0, np.linspace(-1, 1, 5))
    assert ops.passed()


def test_rescale_needs_finite_domain():
    with pytest.raises(UnboundedMetric):
        rescale_for_causality(flat(1.0))


def test_rescale_maps_walk_time_to_coordinate_time(tmp_path):
    t = np.linspace(0.0, 2.0, 9)
    x = np.linspace(-1.0, 1.0, 11)
    T, Xg = np.meshgrid(t, x, indexing="ij")
    speed = 2.0 + 0.1 * T
    write_table(tmp_path / "m.txt", t, x, {"e00": np.ones_like(T), "e11": speed, "e01": 0 * T, "e10": 0 * T})
    met = tabulated(tmp_path / "m.txt")
    scaled, scale = rescale_for_causality(met)
    b1, _ = dirac_matching(scaled)
    # walk time tau corresponds to coordinate time tau / scale
    assert np.allclose(b1(scale * 1.5, 0.0), -(2.15 / scale) * SIGMA_Z, atol=1e-8)
    assert np.allclose(b1.dt(scale * 1.5, 0.0), -(0.1 / scale**2) * SIGMA_Z, atol=1e-8)


def test_flat_null_geodesics_are_diagonals():
    geos = null_geodesics(flat(0.0), [0.0], t_max=2.0, dt=0.01)
    out, inn = geos
    assert out.kind == "outgoing" and inn.kind == "ingoing"
    assert np.max(np.abs(out.x - out.t)) <= 1e-10
    assert np.max(np.abs(inn.x + inn.t)) <= 1e-10
    assert np.all(np.diff(out.t) > 0)


def test_schwarzschild_outgoing_speed_at_three():
    b1, _ = dirac_matching(schwarzschild(0.5))
    ingoing, outgoing = characteristic_speeds(b1, 0.0, 3.0)
    assert np.isclose(outgoing, 2 / 3) and np.isclose(ingoing, -2 / 3)


def test_geodesic_slope_matches_characteristic_speed():
    met = schwarzschild(0.5)
    b1, _ = dirac_matching(met)
    dt = 1e-3
    for g in null_geodesics(met, [3.0], t_max=1.0, dt=dt):
        slope = (g.x[2:] - g.x[:-2]) / (2 * dt)
        speeds = characteristic_speeds(b1, 0.0, g.x[1:-1])
        expect = speeds[1] if g.kind == "outgoing" else speeds[0]
        assert np.max(np.abs(slope - expect)) <= 1e-8


def test_ingoing_geodesic_never_crosses_horizon():
    met = schwarzschild(0.5, guard=1e-6)
    geos = null_geodesics(met, [3.0], t_max=30.0, dt=0.01)
    inn = [g for g in geos if g.kind == "ingoing"][0]
    assert np.all(np.diff(inn.x) < 0)
    assert np.all(inn.x > 1.0)
    assert inn.x[-1] - 1.0 < 0.01


def test_geodesic_seed_outside_domain():
    with pytest.raises(DomainError):
        null_geodesics(schwarzschild(0.5), [0.5], t_max=1.0, dt=0.1)


def test_geodesic_truncated_at_domain_edge():
    geos = null_geodesics(flat(0.0, x_range=(-1.0, 1.0)), [0.0], t_max=5.0, dt=0.01)
    assert all(g.exited for g in geos)
    assert all(np.all(np.abs(g.x) <= 1.0) for g in geos)


def test_table_roundtrip_and_static_interpolation(tmp_path):
    x = np.linspace(1.2, 6.0, 200)
    f = 1 - 1.0 / x
    vals = {"e00": f[None] ** -0.5, "e11": f[None] ** 0.5, "e01": 0 * f[None], "e10": 0 * f[None]}
    write_table(tmp_path / "s.txt", np.array([0.0]), x, vals)
    header, t_grid, x_grid, values = read_table(tmp_path / "s.txt")
    assert np.allclose(values["e11"], vals["e11"]) and len(t_grid) == 1
    met = tabulated(tmp_path / "s.txt", mass=1.0)
    exact = schwarzschild(0.5, mass=1.0)
    xs = np.linspace(1.5, 5.5, 37)
    b1t, ct = dirac_matching(met)
    b1e, ce = dirac_matching(exact)
    assert np.max(np.abs(b1t(0.0, xs) - b1e(0.0, xs))) <= 1e-6
    assert np.max(np.abs(b1t.dx(0.0, xs) - b1e.dx(0.0, xs))) <= 1e-4


def test_table_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nt = 1\nnx = 2\nt,x,e00,e11,e01,e10\n0,0,1,1,0,0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_table(bad)
    bad.write_text("t_min = 0\nt_max = 0\nnt = 1\nx_min = 0\nx_max = 1\nnx = 2\nt,x,e00,e11,e01,e10\n0,0,1,1,0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_table(bad)


def test_e10_enters_as_identity():
    met = flat(0.0)
    met.e10 = lambda t, x: np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, 0.25)
    b1, _ = dirac_matching(met)
    assert np.allclose(b1(0.0, 0.0), -SIGMA_Z - 0.25 * I2)


def _potential(strength):
    return HermitianField(
        lambda t, x: strength * np.sin(x)[..., None, None] * I2,
        dt_value=lambda t, x: np.zeros(np.shape(x))[..., None, None] * I2,
        dx_value=lambda t, x: strength * np.cos(x)[..., None, None] * I2,
    )


def test_extra_potential_enters_c_over_e00():
    met = schwarzschild(0.5, mass=1.0)
    _, c0 = dirac_matching(met)
    _, c1 = dirac_matching(met, extra_c=_potential(0.7))
    x = 3.0
    e00 = 1 / np.sqrt(1 - 1 / x)
    assert np.allclose(c1(0.0, x) - c0(0.0, x), 0.7 * np.sin(x) / e00 * I2)


def test_extra_potential_derivative_matches_difference():
    _, c = dirac_matching(schwarzschild(0.5, mass=1.0), extra_c=_potential(0.7))
    assert c.has_derivatives
    h, x = 1e-6, 2.5
    fd = (c(0.0, x + h) - c(0.0, x - h)) / (2 * h)
    assert np.allclose(c.dx(0.0, x), fd, atol=1e-7)


def test_non_hermitian_extra_potential_is_rejected():
    bad = HermitianField(lambda t, x: 0.3j * np.ones(np.shape(x))[..., None, None] * I2)
    b1, c = dirac_matching(flat(1.0), extra_c=bad)
    with pytest.raises(SkewnessViolation):
        synthesize(b1, c, 0.0, 0.0)

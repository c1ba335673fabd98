import numpy as np
import pytest

from slipflow import (ConfigurationError, ShapeError, build_halfspace_grid,
                      build_sphere_grid, kolmogorov_scale, surface_integral,
                      volume_integral)
from slipflow.geometry import VelocityField


def test_halfspace_kolmogorov_example():
    g = build_halfspace_grid(0.05, 10.0)
    assert g.dy == pytest.approx(0.05 ** 0.75, rel=1e-12)
    assert g.dy == pytest.approx(0.10574, abs=5e-6)
    # ceil(10 / dy) = 95 interior steps -> 96 nodes
    assert g.n_nodes == 96
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] >= 10.0


def test_halfspace_nu_one_gives_unit_spacing():
    g = build_halfspace_grid(1.0, 10.0)
    assert g.dy == 1.0
    assert g.n_nodes == 11


def test_halfspace_explicit_spacing():
    g = build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=0.1)
    assert g.n_nodes == 101
    assert np.allclose(g.nodes, np.arange(101) * 0.1, atol=1e-12)


@pytest.mark.parametrize("nu,y_max", [(-1.0, 10.0), (0.0, 10.0), (0.5, -2.0)])
def test_halfspace_bad_parameters(nu, y_max):
    with pytest.raises(ConfigurationError):
        build_halfspace_grid(nu, y_max)


def test_halfspace_too_few_nodes():
    with pytest.raises(ConfigurationError):
        build_halfspace_grid(10.0, 1.0)  # dy = 10^0.75 > y_max
    with pytest.raises(ConfigurationError):
        build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=5.0)


@pytest.mark.parametrize("nu,y_max", [(0.5, 10.0), (0.05, 10.0), (0.31, 7.3)])
def test_halfspace_weights_sum_to_y_max(nu, y_max):
    g = build_halfspace_grid(nu, y_max)
    assert abs(g.weights.sum() - y_max) <= 1e-12 * y_max


def test_halfspace_uniform_spacing():
    g = build_halfspace_grid(0.07, 10.0)
    d = np.diff(g.nodes)
    assert np.all(d > 0)
    assert np.max(np.abs(d - g.dy)) <= 4 * np.finfo(float).eps * g.nodes[-1]


def test_kolmogorov_rule_halving():
    for nu in (0.5, 0.1, 0.034):
        a = build_halfspace_grid(nu, 10.0).dy
        b = build_halfspace_grid(nu / 2, 10.0).dy
        assert b == pytest.approx(a * 2 ** -0.75, rel=1e-14)


def test_node_count_monotone_in_dy():
    counts = [build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=d).n_nodes
              for d in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 2.5)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_sphere_kolmogorov_shell_counts():
    g = build_sphere_grid(0.5, 5.0)
    assert g.n_r == 9  # ceil(5 / 0.5^0.75)
    # spacing snapped so shells tile the ball, within one cell of nu^(3/4)
    assert g.dr == pytest.approx(5.0 / 9, rel=1e-12)
    assert abs(g.dr - kolmogorov_scale(0.5)) <= kolmogorov_scale(0.5) / g.n_r
    g2 = build_sphere_grid(0.05, 5.0)
    assert g2.n_r == 48
    assert abs(g2.dr - 0.10574) < 0.10574 / 40


def test_sphere_bad_radius():
    with pytest.raises(ConfigurationError):
        build_sphere_grid(0.5, -5.0)
    with pytest.raises(ConfigurationError):
        build_sphere_grid(0.5, 0.0)


def test_sphere_too_coarse():
    with pytest.raises(ConfigurationError):
        build_sphere_grid(20.0, 5.0)  # fewer than 5 radial shells


@pytest.mark.parametrize("mode", ["axisymmetric", "full3d"])
def test_sphere_quadrature_exactness(mode):
    kw = dict(mesh_rule="explicit", dr=0.5, dtheta=np.pi / 12,
              dphi=np.pi / 8) if mode == "full3d" else {}
    g = build_sphere_grid(0.5, 5.0, mode=mode, **kw)
    vol = g.volume_weights().sum()
    assert vol == pytest.approx(4.0 / 3.0 * np.pi * 125.0, rel=1e-3)
    assert vol == pytest.approx(4.0 / 3.0 * np.pi * 125.0, rel=1e-12)
    surf = g.surface_weights().sum()
    assert surf == pytest.approx(4.0 * np.pi * 25.0, rel=1e-3)
    assert surf == pytest.approx(4.0 * np.pi * 25.0, rel=1e-12)


def test_sphere_nodes_avoid_singular_points():
    g = build_sphere_grid(0.25, 5.0)
    assert g.r[0] == pytest.approx(g.dr / 2)
    assert g.r[-1] == pytest.approx(5.0 - g.dr / 2)
    assert g.theta[0] > 0 and g.theta[-1] < np.pi
    assert g.origin_shell == 0
    assert g.wall_shell == g.n_r - 1


def test_axisymmetric_phi_dimension_has_extent_one():
    g = build_sphere_grid(0.5, 5.0)
    assert g.n_phi == 1
    assert g.phi_extent == pytest.approx(2 * np.pi)
    assert g.shape == (g.n_r, g.n_theta)


def test_volume_integral_examples():
    sg = build_sphere_grid(0.5, 5.0)
    assert volume_integral(np.ones(sg.shape), sg) == pytest.approx(
        4.0 / 3.0 * np.pi * 125.0, rel=1e-3)
    hg = build_halfspace_grid(0.5, 10.0)
    assert volume_integral(np.ones(hg.shape), hg) == pytest.approx(10.0, rel=1e-12)
    assert volume_integral(np.zeros(hg.shape), hg) == 0.0


def test_surface_integral_examples():
    sg = build_sphere_grid(0.5, 5.0)
    assert surface_integral(np.ones(sg.shape), sg) == pytest.approx(
        4.0 * np.pi * 25.0, rel=1e-3)
    hg = build_halfspace_grid(0.5, 10.0)
    v = np.zeros(hg.shape)
    v[0] = 3.7
    assert surface_integral(v, hg) == pytest.approx(3.7)
    assert surface_integral(np.zeros(sg.shape), sg) == 0.0


def test_integral_shape_mismatch():
    hg = build_halfspace_grid(0.5, 10.0)
    with pytest.raises(ShapeError):
        volume_integral(np.ones(3), hg)
    sg = build_sphere_grid(0.5, 5.0)
    with pytest.raises(ShapeError):
        surface_integral(np.ones((2, 2)), sg)


def test_origin_value_is_shell_average():
    g = build_sphere_grid(0.5, 5.0)
    v = np.zeros(g.shape)
    v[0, :] = 2.0
    assert g.origin_value(v) == pytest.approx(2.0)
    v[0, :] = np.arange(g.n_theta, dtype=float)
    expect = np.sum(g.sine_weights * v[0]) / np.sum(g.sine_weights)
    assert g.origin_value(v) == pytest.approx(expect)


def test_velocity_field_validation():
    g = build_halfspace_grid(0.5, 10.0)
    VelocityField(grid=g, values=np.zeros(g.shape)).validate()
    with pytest.raises(ShapeError):
        VelocityField(grid=g, values=np.zeros(4)).validate()
    bad = np.zeros(g.shape)
    bad[2] = np.nan
    with pytest.raises(FloatingPointError):
        VelocityField(grid=g, values=bad).validate()


def test_full3d_impermeability_enforced():
    g = build_sphere_grid(0.5, 5.0, mode="full3d", mesh_rule="explicit",
                          dr=0.5, dtheta=np.pi / 8, dphi=np.pi / 6)
    vals = np.ones((3,) + g.shape)
    f = VelocityField(grid=g, values=vals).enforce_impermeability()
    assert np.all(f.values[0, g.wall_shell] == 0.0)
    assert np.all(f.values[2] == 1.0)


def test_grids_are_immutable():
    g = build_halfspace_grid(0.5, 10.0)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0
    sg = build_sphere_grid(0.5, 5.0)
    with pytest.raises(ValueError):
        sg.r[0] = 1.0

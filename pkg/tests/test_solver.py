import numpy as np
import pytest

from slipflow import (ConfigurationError, NoiseStream, NumericsError,
                      SimConfig, apply_laplacian, build_forcing,
                      build_grid, build_halfspace_grid, build_sphere_grid,
                      kinetic_energy, make_operator, run_realization, step,
                      validate_stability)
from slipflow.geometry import VelocityField
from slipflow.solver import final_state, noise_coefficient, resolve_time_grid


def _hs_config(**kw):
    base = dict(nu=0.25, delta=0.75, alpha=5e-4, dt=0.005, T=1.0,
                realizations=1, seed=11, sample_every=10)
    base.update(kw)
    return SimConfig(**base)


# ---------------------------------------------------------------- stability

def test_stability_examples_1d():
    for nu, expect in ((0.05, np.sqrt(0.05) / 2), (0.5, np.sqrt(0.5) / 2)):
        cfg = _hs_config(nu=nu)
        rep = validate_stability(cfg, build_grid(cfg))
        assert rep.dt_max == pytest.approx(expect, rel=1e-12)
        assert rep.passed
    cfg = _hs_config(nu=0.5, dt=1.0)
    rep = validate_stability(cfg, build_grid(cfg))
    assert not rep.passed


def test_stability_sphere_report_fields():
    cfg = SimConfig(nu=0.1, geometry="sphere", dt="auto", realizations=1)
    grid = build_grid(cfg)
    rep = validate_stability(cfg, grid)
    assert rep.d_eff == 2
    assert rep.h_min == pytest.approx(grid.r[0] * grid.dtheta)
    assert rep.dt_limit == min(rep.dt_max, rep.dt_max_operator)


def test_stability_verdict_uses_the_sharper_bound():
    # a stiff Robin wall tightens the operator bound below the textbook
    # spacing estimate; a dt between the two must be rejected
    cfg = _hs_config(nu=0.5, alpha=100.0, dt=0.005)
    grid = build_grid(cfg)
    rep = validate_stability(cfg, grid)
    assert rep.dt_max_operator < rep.dt_max
    mid = 0.5 * (rep.dt_max_operator + rep.dt_max)
    rep2 = validate_stability(_hs_config(nu=0.5, alpha=100.0, dt=mid), grid)
    assert not rep2.passed


def test_auto_dt_respects_limit():
    cfg = SimConfig(nu=0.25, geometry="sphere", dt="auto", realizations=1)
    grid = build_grid(cfg)
    dt, n = resolve_time_grid(cfg, grid)
    rep = validate_stability(cfg, grid)
    assert dt <= rep.dt_limit
    assert n * dt == pytest.approx(cfg.T)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(nu=-0.1)
    with pytest.raises(ConfigurationError):
        SimConfig(nu=0.1, dt=-1.0)
    with pytest.raises(ConfigurationError):
        SimConfig(nu=0.1, T=0.001, dt=0.005)
    with pytest.raises(ConfigurationError):
        SimConfig(nu=0.1, alpha=-1.0)
    with pytest.raises(ConfigurationError):
        SimConfig(nu=0.1, realizations=0)
    with pytest.raises(ConfigurationError):
        SimConfig(nu=0.1, noise_mode="pink")


# ---------------------------------------------------------------- laplacian

def test_laplacian_full_slip_wall():
    g = build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=0.5)
    u = np.linspace(1.0, 3.0, g.n_nodes) ** 2
    state = VelocityField(grid=g, values=u)
    lap = apply_laplacian(state, g, alpha=0.0)
    assert lap[0] == pytest.approx(2 * (u[1] - u[0]) / g.dy ** 2, rel=1e-12)


def test_laplacian_linear_profile_vanishes_inside():
    g = build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=0.25)
    state = VelocityField(grid=g, values=3.0 * g.nodes)
    lap = apply_laplacian(state, g, alpha=0.0)
    assert np.allclose(lap[1:-1], 0.0, atol=1e-9)


def test_laplacian_exact_on_quadratics():
    g = build_halfspace_grid(0.5, 10.0, dy_rule="explicit", dy=0.2)
    state = VelocityField(grid=g, values=g.nodes ** 2)
    lap = apply_laplacian(state, g, alpha=0.0)
    assert np.allclose(lap[1:-1], 2.0, atol=1e-9)


def test_laplacian_rejects_nan():
    g = build_halfspace_grid(0.5, 10.0)
    u = np.zeros(g.shape)
    u[3] = np.inf
    with pytest.raises(NumericsError):
        apply_laplacian(VelocityField(grid=g, values=u), g, alpha=0.0)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 2.0])
def test_operator_symmetric_negative_definite(alpha):
    # <u, Lv>_w == <Lu, v>_w and <u, Lu>_w = -(grad energy + alpha*wall)
    sg = build_sphere_grid(0.4, 5.0)
    op = make_operator(sg, alpha)
    w = sg.volume_weights()
    rng = np.random.default_rng(5)
    u, v = rng.standard_normal(sg.shape), rng.standard_normal(sg.shape)
    a = np.sum(w * u * op.apply(v))
    b = np.sum(w * v * op.apply(u))
    assert a == pytest.approx(b, rel=1e-12)
    q = np.sum(w * u * op.apply(u))
    assert q == pytest.approx(-(op.gradient_energy(u) + alpha * op.wall_energy(u)),
                              rel=1e-12)
    assert q < 0


def test_full3d_operator_energy_identity():
    sg = build_sphere_grid(0.5, 5.0, mode="full3d", mesh_rule="explicit",
                           dr=0.5, dtheta=np.pi / 8, dphi=np.pi / 6)
    op = make_operator(sg, alpha=0.2)
    w = sg.volume_weights()
    rng = np.random.default_rng(6)
    u = rng.standard_normal(sg.shape)
    q = np.sum(w * u * op.apply(u))
    assert q == pytest.approx(-(op.gradient_energy(u) + 0.2 * op.wall_energy(u)),
                              rel=1e-12)


# --------------------------------------------------------------------- step

def test_step_keeps_uniform_state_with_full_slip():
    cfg = _hs_config(alpha=0.0, noise_mode="off", top_bc="neumann")
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    state = VelocityField(grid=g, values=np.full(g.shape, 1.7))
    for n in range(50):
        state = step(state, f, cfg, None, step_index=n)
    assert np.array_equal(state.values, np.full(g.shape, 1.7))


def test_step_zero_dynamics_stays_zero():
    cfg = _hs_config(noise_mode="off")
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    state = VelocityField(grid=g, values=np.zeros(g.shape))
    state = step(state, f, cfg, None)
    assert np.array_equal(state.values, np.zeros(g.shape))


def test_single_euler_step_equals_dt_g():
    cfg = _hs_config(noise_mode="off", deterministic_forcing=True)
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    state = VelocityField(grid=g, values=np.zeros(g.shape))
    out = step(state, f, cfg, None)
    expect = cfg.dt * f.values.copy()
    expect[-1] = 0.0  # Dirichlet top
    assert np.allclose(out.values, expect, rtol=1e-14)
    assert out.time_stamp == pytest.approx(cfg.dt)


def test_one_step_noise_statistics():
    # E[z] = 0 and Var[z_j] = g_j^2 dt after one step from rest
    cfg = _hs_config(nu=0.5, dy=1.0, seed=99)
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    n_draw = 10_000
    vals = np.empty((n_draw, g.n_nodes))
    zero = VelocityField(grid=g, values=np.zeros(g.shape))
    for r in range(n_draw):
        vals[r] = step(zero, f, cfg, NoiseStream(cfg.seed, r)).values
    target = f.values ** 2 * cfg.dt
    target[-1] = 0.0
    mean_band = 3.0 * np.sqrt(target / n_draw)
    assert np.all(np.abs(vals.mean(axis=0)) <= mean_band + 1e-15)
    var = vals.var(axis=0, ddof=1)
    var_band = 3.0 * target * np.sqrt(2.0 / (n_draw - 1))
    assert np.all(np.abs(var - target) <= var_band + 1e-15)


def test_white_noise_scaling_uses_cell_volume():
    cfg = _hs_config(noise_mode="white_noise_scaled")
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    coef = noise_coefficient(cfg, g, f, cfg.dt)
    inner = slice(1, -2)
    assert np.allclose(coef[inner],
                       f.values[inner] * np.sqrt(cfg.dt / g.weights[inner]),
                       rtol=1e-13)
    # zero-measure cells carry no noise, wall cell is half-size
    assert coef[0] == pytest.approx(f.values[0] * np.sqrt(cfg.dt / (g.dy / 2)))


# ----------------------------------------------------------- realizations

def test_realization_zero_dynamics_all_zero():
    cfg = _hs_config(noise_mode="off")
    s = run_realization(cfg)
    for name in ("kinetic_energy", "dissipation_rate", "wall_energy",
                 "slip_norm", "cumulative_dissipation"):
        assert np.all(s.channel(name) == 0.0)


def test_realization_deterministic_replay():
    cfg = _hs_config()
    a = run_realization(cfg, realization_index=3)
    b = run_realization(cfg, realization_index=3)
    assert np.array_equal(a.kinetic_energy, b.kinetic_energy)
    assert np.array_equal(a.cumulative_dissipation, b.cumulative_dissipation)
    c = run_realization(cfg, realization_index=4)
    assert not np.array_equal(a.kinetic_energy, c.kinetic_energy)


def test_amplitude_two_scales_energies_by_four():
    base = _hs_config(seed=21)
    twice = _hs_config(seed=21, amplitude=2.0)
    a = run_realization(base, realization_index=0)
    b = run_realization(twice, realization_index=0)
    for name in ("kinetic_energy", "dissipation_rate", "wall_energy",
                 "slip_norm", "cumulative_dissipation"):
        assert np.array_equal(4.0 * a.channel(name), b.channel(name))


def test_superposition_of_forcing_and_noise():
    # trajectory(noise + f) == trajectory(noise) + trajectory(f)
    kw = dict(nu=0.25, dt=0.005, T=0.25, seed=77, realizations=1)
    both = SimConfig(noise_mode="node_iid", deterministic_forcing=True, **kw)
    noise_only = SimConfig(noise_mode="node_iid", **kw)
    det_only = SimConfig(noise_mode="off", deterministic_forcing=True, **kw)
    zb = final_state(both).values
    zn = final_state(noise_only).values
    zd = final_state(det_only).values
    assert np.allclose(zb, zn + zd, atol=1e-12 * np.max(np.abs(zb)))


def test_kernel_matches_reference_stepper_halfspace():
    cfg = _hs_config(T=0.25, sample_every=1000)
    series = run_realization(cfg)
    state = final_state(cfg)
    assert series.kinetic_energy[-1] == pytest.approx(
        kinetic_energy(state.values, state.grid), rel=1e-12)


def test_kernel_matches_reference_stepper_sphere():
    cfg = SimConfig(nu=0.5, geometry="sphere", dt="auto", T=0.05,
                    realizations=1, noise_mode="off",
                    deterministic_forcing=True, sample_every="auto")
    series = run_realization(cfg)
    state = final_state(cfg)
    assert series.kinetic_energy[-1] == pytest.approx(
        kinetic_energy(state.values, state.grid), rel=1e-12)


def test_unforced_energy_decay_quick():
    rng = np.random.default_rng(8)
    cfg = _hs_config(noise_mode="off", alpha=0.1)
    g = build_grid(cfg)
    f = build_forcing(cfg.forcing_spec(), g)
    rep = validate_stability(cfg, g)
    dt = 0.5 * rep.dt_limit
    vals = rng.standard_normal(g.shape)
    vals[-1] = 0.0
    state = VelocityField(grid=g, values=vals)
    e = kinetic_energy(state.values, g)
    for n in range(60):
        state = step(state, f, cfg, None, step_index=n, dt=dt)
        e2 = kinetic_energy(state.values, g)
        assert e2 <= e * (1 + 1e-13)
        e = e2


def test_overflow_raises_numerics_error():
    # amplification factor |1 - 4 nu dt/dy^2| ~ 99 per step for 100 steps
    cfg = _hs_config(nu=0.5, dy=0.1, dt=0.5, T=50.0)
    with pytest.raises(NumericsError):
        run_realization(cfg, check_stability=False)


def test_stability_gate_in_run_realization():
    from slipflow import StabilityError
    cfg = _hs_config(nu=0.5, dt=1.0)
    with pytest.raises(StabilityError):
        run_realization(cfg)


# ----------------------------------------------------------------- noise

def test_noise_is_pure_function_of_key():
    a = NoiseStream(123, 7)
    b = NoiseStream(123, 7)
    assert np.array_equal(a.step_normals(5, 16), b.step_normals(5, 16))
    assert not np.array_equal(a.step_normals(5, 16), a.step_normals(6, 16))
    assert not np.array_equal(NoiseStream(123, 8).step_normals(5, 16),
                              a.step_normals(5, 16))


def test_noise_draws_align_across_grid_sizes():
    # node j at step n sees the same draw whatever the grid size: the
    # common-random-number coupling across a viscosity sweep relies on it
    a = NoiseStream(123, 0)
    small = a.step_normals(9, 17)
    large = a.step_normals(9, 96)
    assert np.array_equal(small, large[:17])


def test_block_normals_deterministic():
    a = NoiseStream(123, 0)
    x = a.block_normals(2, 8, (3, 4))
    y = NoiseStream(123, 0).block_normals(2, 8, (3, 4))
    assert np.array_equal(x, y)
    assert x.shape == (8, 3, 4)

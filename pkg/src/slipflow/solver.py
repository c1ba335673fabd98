"""Explicit Euler-Maruyama integration of dz = (nu*Lap z + f) dt + g dW
with Navier-slip walls.

The wall condition n . grad z_tau + alpha z_tau = 0 enters through the
discrete operators: in the half-space via the second-order ghost node
w_{-1} = w_1 - 2*dy*alpha*w_0 (outward normal -e_y), on the sphere via a
Robin flux -alpha*u*R^2 through the wall face of the conservative stencil.
Both make the operator self-adjoint and negative semi-definite in the
dual-cell inner product (exactly on the sphere; in the half-space up to
the clipped quadrature cells at the column top), so unforced energy decay
and the discrete Ito energy balance hold step by step, not just
asymptotically.

Noise is counter-keyed: every Gaussian draw is a pure function of (seed,
realization, step, node), independent of worker scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericsError, StabilityError
from .diagnostics import DiagnosticsSeries
from .forcing import ForcingField, ForcingSpec, build_forcing
from .geometry import (HalfSpaceGrid, SphereGrid, VelocityField,
                       build_halfspace_grid, build_sphere_grid)

NOISE_MODES = ("node_iid", "white_noise_scaled", "off")

# steps per noise block when draws are generated block-wise (3-D state)
NOISE_BLOCK = 64


@dataclass(frozen=True)
class SimConfig:
    """All physical and numerical parameters of one run."""

    nu: float
    delta: float = 0.75
    alpha: float = 5e-4
    dt: float | str = 0.005          # 'auto' snaps to the stability limit
    T: float = 1.0
    geometry: str = "halfspace"      # 'halfspace' | 'sphere'
    mode: str = "axisymmetric"       # sphere only: 'axisymmetric' | 'full3d'
    y_max: float = 10.0
    R: float = 5.0
    noise_mode: str = "node_iid"
    deterministic_forcing: bool = False
    realizations: int = 250
    seed: int = 20240
    sample_every: int | str = "auto"
    amplitude: float = 1.0
    regularization: str = "cell_average"
    mesh_rule: str = "kolmogorov"
    dy: float | None = None
    dr: float | None = None
    dtheta: float | None = None
    dphi: float | None = None
    top_bc: str = "dirichlet"        # half-space far field; 'neumann' for tests

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive or 'auto', got {self.dt}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if self.dt != "auto" and self.T < self.dt:
            raise ConfigurationError("horizon T must be at least one time step")
        if self.alpha < 0:
            raise ConfigurationError(f"slip length alpha must be >= 0, got {self.alpha}")
        if self.realizations < 1:
            raise ConfigurationError("realizations must be >= 1")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigurationError(f"unknown noise_mode {self.noise_mode!r}")
        if self.geometry not in ("halfspace", "sphere"):
            raise ConfigurationError(f"unknown geometry {self.geometry!r}")
        if self.top_bc not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown top_bc {self.top_bc!r}")
        if self.sample_every != "auto" and int(self.sample_every) < 1:
            raise ConfigurationError("sample_every must be >= 1")

    def forcing_spec(self) -> ForcingSpec:
        return ForcingSpec(delta=self.delta, geometry=self.geometry,
                           R=self.R if self.geometry == "sphere" else None,
                           regularization=self.regularization,
                           amplitude=self.amplitude)

    def label(self) -> str:
        mode = "deterministic" if self.deterministic_forcing else "stochastic"
        return f"{self.geometry}-nu{self.nu:g}-delta{self.delta:g}-{mode}"


def build_grid(config: SimConfig):
    if config.geometry == "halfspace":
        rule = "explicit" if config.dy is not None else config.mesh_rule
        return build_halfspace_grid(config.nu, config.y_max, dy_rule=rule,
                                    dy=config.dy)
    return build_sphere_grid(config.nu, config.R, mode=config.mode,
                             mesh_rule="explicit" if config.dr is not None
                             else config.mesh_rule,
                             dr=config.dr, dtheta=config.dtheta,
                             dphi=config.dphi)


class NoiseStream:
    """Reproducible Gaussian increments, keyed by counter.

    The Philox key is derived from (seed, realization); the counter word
    encodes the step (or step block), so each draw is a pure function of
    (seed, realization, step, node) and runs are schedule-independent.
    """

    def __init__(self, seed: int, realization: int):
        self.seed = int(seed)
        self.realization = int(realization)
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.realization,))
        self._key = ss.generate_state(2, np.uint64)

    def step_normals(self, step: int, shape) -> np.ndarray:
        """Standard normals for one step (counter word 3 = step index)."""
        gen = np.random.Generator(
            np.random.Philox(counter=[0, 0, 0, int(step)], key=self._key))
        return gen.standard_normal(shape)

    def block_normals(self, block: int, n_steps: int, shape) -> np.ndarray:
        """Standard normals for a block of steps (counter word 2 = block)."""
        gen = np.random.Generator(
            np.random.Philox(counter=[0, 0, int(block), 0], key=self._key))
        return gen.standard_normal((n_steps,) + tuple(shape))


class HalfSpaceOperator:
    """Laplacian on the column with Robin wall and Dirichlet/Neumann top."""

    def __init__(self, grid: HalfSpaceGrid, alpha: float,
                 top_bc: str = "dirichlet"):
        self.grid = grid
        self.alpha = float(alpha)
        self.top_bc = top_bc
        self.dy = grid.dy

    def apply(self, u: np.ndarray) -> np.ndarray:
        dy = self.dy
        lap = np.empty_like(u)
        lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        lap[0] = 2.0 * (u[1] - u[0]) - 2.0 * dy * self.alpha * u[0]
        if self.top_bc == "neumann":
            lap[-1] = 2.0 * (u[-2] - u[-1])
        else:
            lap[-1] = 0.0
        return lap / dy ** 2

    def rate_bound(self) -> float:
        """Gershgorin bound on the spectral radius of -L (per unit nu)."""
        return (4.0 + 2.0 * self.dy * self.alpha) / self.dy ** 2

    def gradient_energy(self, u: np.ndarray) -> float:
        d = np.diff(u)
        return float(np.sum(d * d) / self.dy)

    def wall_energy(self, u: np.ndarray) -> float:
        return float(u[0] * u[0])


class SphereOperator:
    """Vector Laplacian of an azimuthal, phi-independent field u_phi(r, theta).

    Conservative flux form with exact cell weights.  The inner radial face
    sits at r = 0 where the face area vanishes, so the origin needs no
    ghost value; the origin state itself is reported as the average over
    the innermost shell (`SphereGrid.origin_value`).  Includes the metric
    damping -u/(r sin theta)^2 of the vector Laplacian.
    """

    def __init__(self, grid: SphereGrid, alpha: float):
        if grid.mode != "axisymmetric":
            raise ConfigurationError("SphereOperator needs an axisymmetric grid")
        self.grid = grid
        self.alpha = float(alpha)
        g = grid
        self.cr = g.r_faces[1:-1] ** 2 / g.dr           # interior radial faces
        self.vr = g.radial_weights
        self.st = g.sine_weights
        self.stf = np.sin(g.theta_faces[1:-1])          # interior theta faces
        self.dr_over_dth = g.dr / g.dtheta
        self.wall_coef = g.R ** 2 * self.alpha / g.radial_weights[-1]
        # cell-averaged radial metric r~^2 = (cell integral of r^2 dr)/dr;
        # using it in the azimuthal damping makes the operator separate
        # exactly into radial x angular parts (see moments.py)
        self.r_metric_sq = self.vr / g.dr
        self.curv = 1.0 / np.outer(self.r_metric_sq, np.sin(g.theta) ** 2)
        phi = g.phi_extent
        self.w = np.outer(self.vr, self.st) * phi
        self.grw = np.outer(g.r_faces[1:-1] ** 2, self.st) * phi / g.dr
        self.gtw = self.stf * phi * g.dr / g.dtheta
        self.cw = self.w * self.curv
        self.sw = g.R ** 2 * self.st * phi

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        fr = self.cr[:, None] * (u[1:, :] - u[:-1, :])
        out[:-1, :] += fr
        out[1:, :] -= fr
        out[-1, :] -= self.grid.R ** 2 * self.alpha * u[-1, :]
        out /= self.vr[:, None]
        ft = self.stf[None, :] * (u[:, 1:] - u[:, :-1]) * self.dr_over_dth
        tmp = np.zeros_like(u)
        tmp[:, :-1] += ft
        tmp[:, 1:] -= ft
        out += tmp / (self.vr[:, None] * self.st[None, :])
        out -= self.curv * u
        return out

    def rate_bound(self) -> float:
        Nr, Nt = self.grid.shape
        diag = np.zeros((Nr, Nt))
        off = np.zeros((Nr, Nt))
        crd = np.zeros(Nr)
        crd[:-1] += self.cr
        crd[1:] += self.cr
        rad = crd[:, None] / self.vr[:, None]
        diag += rad
        off += rad
        diag[-1, :] += self.wall_coef
        std = np.zeros(Nt)
        std[:-1] += self.stf
        std[1:] += self.stf
        ang = self.dr_over_dth * std[None, :] / (self.vr[:, None] * self.st[None, :])
        diag += ang
        off += ang
        diag += self.curv
        return float(np.max(diag + off))

    def gradient_energy(self, u: np.ndarray, covariant: bool = True) -> float:
        dr_ = u[1:, :] - u[:-1, :]
        ge = np.sum(self.grw * dr_ * dr_)
        dt_ = u[:, 1:] - u[:, :-1]
        ge += np.sum(self.gtw * dt_ * dt_)
        if covariant:
            ge += np.sum(self.cw * u * u)
        return float(ge)

    def wall_energy(self, u: np.ndarray) -> float:
        uw = u[-1, :]
        return float(np.sum(self.sw * uw * uw))


class Sphere3DOperator:
    """Full (r, theta, phi) mesh, azimuthal-ansatz state: the r and theta
    components are pinned to zero and only u_phi evolves, under the phi
    component of the vector Laplacian (now with azimuthal diffusion)."""

    def __init__(self, grid: SphereGrid, alpha: float):
        if grid.mode != "full3d":
            raise ConfigurationError("Sphere3DOperator needs a full3d grid")
        self.grid = grid
        self.alpha = float(alpha)
        g = grid
        self.cr = g.r_faces[1:-1] ** 2 / g.dr
        self.vr = g.radial_weights
        self.st = g.sine_weights
        self.stf = np.sin(g.theta_faces[1:-1])
        self.dr_over_dth = g.dr / g.dtheta
        self.r_metric_sq = self.vr / g.dr
        self.curv = 1.0 / np.outer(self.r_metric_sq, np.sin(g.theta) ** 2)
        # azimuthal face coefficient dr * csc(theta) * dtheta / dphi,
        # periodic in phi; the nodal csc regularizes the pole cells (the
        # exact cell integral of csc diverges there)
        self.csc_cell = g.dtheta / np.sin(g.theta)
        self.cphi = g.dr * self.csc_cell / g.dphi
        phi = g.phi_extent
        self.w2 = np.outer(self.vr, self.st) * phi          # (Nr, Nt)
        self.grw = np.outer(g.r_faces[1:-1] ** 2, self.st) * phi / g.dr
        self.gtw = self.stf * phi * g.dr / g.dtheta
        self.cw = self.w2 * self.curv
        self.sw2 = g.R ** 2 * self.st * phi                  # per theta node

    def apply(self, u: np.ndarray) -> np.ndarray:
        """u has shape (Nr, Nt, Np): the phi component only."""
        out = np.zeros_like(u)
        fr = self.cr[:, None, None] * (u[1:] - u[:-1])
        out[:-1] += fr
        out[1:] -= fr
        out[-1] -= self.grid.R ** 2 * self.alpha * u[-1]
        out /= self.vr[:, None, None]
        ft = self.stf[None, :, None] * (u[:, 1:] - u[:, :-1]) * self.dr_over_dth
        tmp = np.zeros_like(u)
        tmp[:, :-1] += ft
        tmp[:, 1:] -= ft
        out += tmp / (self.vr[:, None, None] * self.st[None, :, None])
        fp = self.cphi[None, :, None] * (np.roll(u, -1, axis=2) - u)
        out += (fp - np.roll(fp, 1, axis=2)) / (
            self.vr[:, None, None] * self.st[None, :, None] * self.grid.dphi)
        out -= self.curv[:, :, None] * u
        return out

    def rate_bound(self) -> float:
        Nr, Nt = self.grid.n_r, self.grid.n_theta
        diag = np.zeros((Nr, Nt))
        crd = np.zeros(Nr)
        crd[:-1] += self.cr
        crd[1:] += self.cr
        diag += crd[:, None] / self.vr[:, None]
        diag[-1, :] += self.grid.R ** 2 * self.alpha / self.vr[-1]
        std = np.zeros(Nt)
        std[:-1] += self.stf
        std[1:] += self.stf
        diag += self.dr_over_dth * std[None, :] / (self.vr[:, None] * self.st[None, :])
        diag += 2.0 * self.cphi[None, :] / (
            self.vr[:, None] * self.st[None, :] * self.grid.dphi)
        diag += self.curv
        return float(2.0 * np.max(diag))

    def gradient_energy(self, u: np.ndarray, covariant: bool = True) -> float:
        # grw/gtw/cw carry the per-node dphi measure already
        dr_ = u[1:] - u[:-1]
        ge = np.sum(self.grw[:, :, None] * dr_ * dr_)
        dt_ = u[:, 1:] - u[:, :-1]
        ge += np.sum(self.gtw[None, :, None] * dt_ * dt_)
        dp_ = np.roll(u, -1, axis=2) - u
        ge += np.sum(self.cphi[None, :, None] * dp_ * dp_)
        if covariant:
            ge += np.sum(self.cw[:, :, None] * u * u)
        return float(ge)

    def wall_energy(self, u: np.ndarray) -> float:
        uw = u[-1]
        return float(np.sum(self.sw2[:, None] * uw * uw))


def make_operator(grid, alpha: float, top_bc: str = "dirichlet"):
    if isinstance(grid, HalfSpaceGrid):
        return HalfSpaceOperator(grid, alpha, top_bc)
    if grid.mode == "axisymmetric":
        return SphereOperator(grid, alpha)
    return Sphere3DOperator(grid, alpha)


def apply_laplacian(state: VelocityField, grid, alpha: float,
                    top_bc: str = "dirichlet") -> np.ndarray:
    """Laplacian with Navier-slip closure applied to a velocity state."""
    values = np.asarray(state.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericsError("NaN/Inf in state passed to apply_laplacian")
    return make_operator(grid, alpha, top_bc).apply(values)


@dataclass(frozen=True)
class StabilityReport:
    dt: float | None
    dt_max: float           # textbook limit h_min^2 / (2 * d_eff * nu)
    dt_max_operator: float  # 2 / (nu * Gershgorin bound of -L)
    h_min: float
    d_eff: int
    passed: bool

    @property
    def dt_limit(self) -> float:
        return min(self.dt_max, self.dt_max_operator)


def validate_stability(config: SimConfig, grid, operator=None) -> StabilityReport:
    """Explicit-scheme step-size limit for this grid.

    Returns both the textbook estimate h^2/(2*d*nu) and the sharper
    operator (Gershgorin) bound; the pass/fail verdict uses the smaller of
    the two, since on the sphere the metric damping term near the pole
    cells can exceed what the spacing estimate accounts for.
    """
    op = operator or make_operator(grid, config.alpha, config.top_bc)
    if isinstance(grid, HalfSpaceGrid):
        h_min, d_eff = grid.dy, 1
    else:
        h_min = min(grid.dr, float(grid.r[0]) * grid.dtheta)
        d_eff = 2
        if grid.mode == "full3d":
            sin_min = min(np.sin(grid.theta[0]), np.sin(grid.theta[-1]))
            h_min = min(h_min, float(grid.r[0]) * sin_min * grid.dphi)
            d_eff = 3
    dt_max = h_min ** 2 / (2.0 * d_eff * config.nu)
    dt_op = 2.0 / (config.nu * op.rate_bound())
    dt = None if config.dt == "auto" else float(config.dt)
    passed = dt is None or dt <= min(dt_max, dt_op) * (1.0 + 1e-9)
    return StabilityReport(dt=dt, dt_max=dt_max, dt_max_operator=dt_op,
                           h_min=h_min, d_eff=d_eff, passed=passed)


def resolve_time_grid(config: SimConfig, grid, operator=None):
    """(dt, n_steps) honoring 'auto' snapping to 90% of the stability limit."""
    if config.dt == "auto":
        report = validate_stability(config, grid, operator)
        dt = 0.9 * report.dt_limit
        n_steps = int(np.ceil(config.T / dt - 1e-9))
        return config.T / n_steps, n_steps
    dt = float(config.dt)
    ratio = config.T / dt
    n_steps = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-6 \
        else int(np.ceil(ratio))
    return dt, max(1, n_steps)


def resolve_sample_every(config: SimConfig, n_steps: int) -> int:
    if config.sample_every == "auto":
        return max(1, n_steps // 200)
    return int(config.sample_every)


def noise_coefficient(config: SimConfig, grid, forcing: ForcingField,
                      dt: float) -> np.ndarray:
    """Per-node multiplier of the standard normal draw: g .* dW scale.

    node_iid: g*sqrt(dt).  white_noise_scaled: g*sqrt(dt/cell_volume),
    the cell-average discretization of space-time white noise (zero-measure
    cells, e.g. the clipped column top, receive no noise).
    """
    g = forcing.values
    if config.noise_mode == "node_iid":
        coef = g * np.sqrt(dt)
    elif config.noise_mode == "white_noise_scaled":
        w = grid.weights if isinstance(grid, HalfSpaceGrid) else grid.volume_weights()
        coef = np.zeros_like(g)
        np.divide(dt, w, out=coef, where=w > 0)
        coef = g * np.sqrt(coef)
    else:
        coef = np.zeros_like(g)
    if isinstance(grid, HalfSpaceGrid) and config.top_bc == "dirichlet":
        coef = coef.copy()
        coef[-1] = 0.0
    return coef


def step(state: VelocityField, forcing: ForcingField, config: SimConfig,
         noise: NoiseStream | None, operator=None, step_index: int = 0,
         dt: float | None = None) -> VelocityField:
    """One explicit Euler-Maruyama step (reference numpy path).

    z <- z + dt*(nu*Lap z + f) + g .* dW with f = g when
    deterministic_forcing is on.  Stability must have been validated.
    """
    grid = state.grid
    if dt is None:
        if config.dt == "auto":
            raise ConfigurationError("step() needs a numeric dt")
        dt = float(config.dt)
    op = operator or make_operator(grid, config.alpha, config.top_bc)
    values = np.asarray(state.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericsError(f"NaN/Inf in state at step {step_index}")
    new = values + dt * config.nu * op.apply(values)
    if config.deterministic_forcing:
        f = forcing.values
        if isinstance(grid, HalfSpaceGrid) and config.top_bc == "dirichlet":
            f = f.copy()
            f[-1] = 0.0
        new = new + dt * f
    if config.noise_mode != "off":
        if noise is None:
            raise ConfigurationError("noise_mode is on but no NoiseStream given")
        coef = noise_coefficient(config, grid, forcing, dt)
        new = new + coef * noise.step_normals(step_index, grid.shape)
    if isinstance(grid, HalfSpaceGrid) and config.top_bc == "dirichlet":
        new[-1] = 0.0
    if not np.all(np.isfinite(new)):
        raise NumericsError(f"numeric overflow at step {step_index}")
    return VelocityField(grid=grid, values=new,
                         time_stamp=state.time_stamp + dt)


def _sample_times(n_steps: int, se: int, dt: float) -> np.ndarray:
    steps = np.append(np.arange(0, n_steps, se), n_steps)
    return steps * dt


def run_realization(config: SimConfig, grid=None, forcing=None,
                    realization_index: int = 0, operator=None,
                    check_stability: bool = True) -> DiagnosticsSeries:
    """Integrate one realization from z(0) = 0 and collect diagnostics.

    Deterministic function of (config, realization_index); diagnostics are
    sampled every `sample_every` steps plus the final state, while the
    time integrals (dissipation, slip norm) accumulate every step.
    """
    grid = grid if grid is not None else build_grid(config)
    forcing = forcing if forcing is not None else build_forcing(
        config.forcing_spec(), grid)
    operator = operator or make_operator(grid, config.alpha, config.top_bc)
    if check_stability and config.dt != "auto":
        report = validate_stability(config, grid, operator)
        if not report.passed:
            raise StabilityError(
                f"dt={report.dt:g} exceeds the stability limit "
                f"{report.dt_limit:g} ({config.label()})", report)
    dt, n_steps = resolve_time_grid(config, grid, operator)
    se = resolve_sample_every(config, n_steps)
    times = _sample_times(n_steps, se, dt)
    n_rec = times.size
    chans = {name: np.zeros(n_rec) for name in
             ("ke", "diss", "wall", "slip", "cumd", "cums")}
    noise_on = config.noise_mode != "off"
    det_on = config.deterministic_forcing
    noise = NoiseStream(config.seed, realization_index) if noise_on else None
    coef = noise_coefficient(config, grid, forcing, dt)

    if isinstance(grid, HalfSpaceGrid):
        u = np.zeros(grid.n_nodes)
        if noise_on:
            xi = np.empty((n_steps, grid.n_nodes))
            for n in range(n_steps):
                xi[n] = noise.step_normals(n, grid.n_nodes)
        else:
            xi = np.zeros((1, grid.n_nodes))
        f_dt = forcing.values * dt
        if config.top_bc == "dirichlet":
            f_dt = f_dt.copy()
            f_dt[-1] = 0.0
        kernels.halfspace_trajectory(
            u, xi, noise_on, coef, f_dt, det_on,
            config.nu * dt / grid.dy ** 2, 2.0 * grid.dy * config.alpha,
            config.top_bc == "neumann", grid.weights, grid.dy, config.nu,
            config.alpha, dt, n_steps, se, chans["ke"], chans["diss"],
            chans["wall"], chans["slip"], chans["cumd"], chans["cums"])
    elif grid.mode == "axisymmetric":
        op = operator
        u = np.zeros(grid.shape)
        f_dt = forcing.values * dt
        acc = np.zeros(2)
        n = 0
        block = 0
        dummy = np.zeros((1,) + grid.shape)
        while n < n_steps:
            m = min(NOISE_BLOCK, n_steps - n)
            xi = noise.block_normals(block, m, grid.shape) if noise_on else dummy
            kernels.sphere_block(
                u, xi, noise_on, coef, f_dt, det_on, config.nu * dt,
                op.cr, op.vr, op.st, op.stf, op.dr_over_dth, op.wall_coef,
                op.curv, op.w, op.grw, op.gtw, op.cw, op.sw, dt, config.nu,
                config.alpha, n, m, se, chans["ke"], chans["diss"],
                chans["wall"], chans["slip"], chans["cumd"], chans["cums"],
                acc)
            n += m
            block += 1
        kernels.sphere_final_sample(
            u, op.w, op.grw, op.gtw, op.cw, op.sw, config.nu, config.alpha,
            chans["ke"], chans["diss"], chans["wall"], chans["slip"],
            chans["cumd"], chans["cums"], acc)
    else:
        # full3d: coarse consistency mode, plain numpy stepping
        op = operator
        u = np.zeros(grid.shape)
        f_dt = forcing.values * dt
        cumd = cums = 0.0
        rec = 0
        for n in range(n_steps):
            ge = op.gradient_energy(u)
            wke = op.wall_energy(u)
            sl = config.nu * (ge + config.alpha * wke)
            if n % se == 0:
                chans["ke"][rec] = float(np.sum(grid.volume_weights() * u * u))
                chans["diss"][rec] = config.nu * ge
                chans["wall"][rec] = wke
                chans["slip"][rec] = sl
                chans["cumd"][rec] = cumd
                chans["cums"][rec] = cums
                rec += 1
            cumd += dt * config.nu * ge
            cums += dt * sl
            u = u + dt * config.nu * op.apply(u)
            if det_on:
                u = u + f_dt
            if noise_on:
                u = u + coef * noise.step_normals(n, grid.shape)
        ge = op.gradient_energy(u)
        wke = op.wall_energy(u)
        chans["ke"][-1] = float(np.sum(grid.volume_weights() * u * u))
        chans["diss"][-1] = config.nu * ge
        chans["wall"][-1] = wke
        chans["slip"][-1] = config.nu * (ge + config.alpha * wke)
        chans["cumd"][-1] = cumd
        chans["cums"][-1] = cums

    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(chans["ke"]))):
        raise NumericsError(
            f"numeric overflow ({config.label()}, "
            f"realization {realization_index})")
    return DiagnosticsSeries(
        times=times, kinetic_energy=chans["ke"],
        dissipation_rate=chans["diss"], wall_energy=chans["wall"],
        slip_norm=chans["slip"], cumulative_dissipation=chans["cumd"],
        cumulative_slip=chans["cums"], config_label=config.label(),
        realization=realization_index)


def final_state(config: SimConfig, grid=None, forcing=None,
                realization_index: int = 0) -> VelocityField:
    """Integrate one realization with the reference stepper and return z(T).

    Slower than run_realization (no fused kernel); intended for tests and
    for inspecting fields.  Noise draws are keyed per step, which matches
    run_realization on the half-space; sphere runs draw noise in blocks,
    so a stochastic sphere trajectory here is an equally valid but
    different realization."""
    grid = grid if grid is not None else build_grid(config)
    forcing = forcing if forcing is not None else build_forcing(
        config.forcing_spec(), grid)
    op = make_operator(grid, config.alpha, config.top_bc)
    dt, n_steps = resolve_time_grid(config, grid, op)
    noise = NoiseStream(config.seed, realization_index) \
        if config.noise_mode != "off" else None
    shape = grid.shape
    state = VelocityField(grid=grid, values=np.zeros(shape), time_stamp=0.0)
    for n in range(n_steps):
        state = step(state, forcing, config, noise, operator=op,
                     step_index=n, dt=dt)
    return state

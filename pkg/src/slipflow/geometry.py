"""Discrete geometry for the two simulation domains.

Half-space mode is the 1-D column perpendicular to an infinite plate at
y = 0 (all energies per unit plate area).  Sphere mode is a ball of radius
R meshed in spherical coordinates with nodes offset half a cell from the
origin, the poles and the wall, so no node sits on a coordinate
singularity.  Quadrature weights are exact cell integrals of the metric
factors, which makes the volume and surface sums reproduce |D| and |dD|
to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

# dissipation-scale mesh rule: spacing ~ nu^(3/4)
KOLMOGOROV_EXPONENT = 0.75


def kolmogorov_scale(nu: float) -> float:
    """Dissipation length scale nu^(3/4) used by the default mesh rules."""
    return float(nu) ** KOLMOGOROV_EXPONENT


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HalfSpaceGrid:
    """Uniform 1-D column 0 = y_0 < y_1 < ... < y_J with y_J >= y_max.

    weights are dual-cell lengths clipped to [0, y_max], so they sum to
    y_max exactly; the wall node owns [0, dy/2].
    """

    dy: float
    y_max: float
    nodes: np.ndarray
    weights: np.ndarray
    wall_index: int = 0

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def top_index(self) -> int:
        return self.nodes.size - 1

    @property
    def shape(self) -> tuple:
        return (self.nodes.size,)

    def wall_distance(self) -> np.ndarray:
        return self.nodes


@dataclass(frozen=True)
class SphereGrid:
    """Ball of radius R meshed in (r, theta[, phi]) with half-cell offsets.

    In axisymmetric mode the phi dimension has extent 1 and the full 2*pi
    revolution is folded into the weights.  radial_weights holds the exact
    cell integrals of r^2 dr, sine_weights the exact cell integrals of
    sin(theta) dtheta; their telescoping sums give (4/3)*pi*R^3 and
    4*pi*R^2 to rounding.
    """

    R: float
    mode: str  # 'axisymmetric' | 'full3d'
    dr: float
    dtheta: float
    dphi: float
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    r_faces: np.ndarray
    theta_faces: np.ndarray
    radial_weights: np.ndarray  # integral of r^2 dr over each shell
    sine_weights: np.ndarray    # integral of sin(theta) dtheta over each band

    @property
    def n_r(self) -> int:
        return self.r.size

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def n_phi(self) -> int:
        return self.phi.size

    @property
    def phi_extent(self) -> float:
        """Azimuthal measure carried by one phi node."""
        return 2.0 * np.pi if self.mode == "axisymmetric" else self.dphi

    @property
    def shape(self) -> tuple:
        if self.mode == "axisymmetric":
            return (self.n_r, self.n_theta)
        return (self.n_r, self.n_theta, self.n_phi)

    @property
    def origin_shell(self) -> int:
        """Radial index of the smallest r > 0 shell."""
        return 0

    @property
    def wall_shell(self) -> int:
        """Radial index of the shell adjacent to r = R."""
        return self.n_r - 1

    def volume_weights(self) -> np.ndarray:
        w = np.multiply.outer(self.radial_weights, self.sine_weights) * self.phi_extent
        if self.mode == "full3d":
            w = np.repeat(w[:, :, None], self.n_phi, axis=2)
        return w

    def surface_weights(self) -> np.ndarray:
        """Quadrature weights for the wall shell trace at r = R."""
        sw = self.R ** 2 * self.sine_weights * self.phi_extent
        if self.mode == "full3d":
            sw = np.repeat(sw[:, None], self.n_phi, axis=1)
        return sw

    def wall_distance(self) -> np.ndarray:
        d = self.R - self.r
        return np.broadcast_to(d.reshape((-1,) + (1,) * (len(self.shape) - 1)), self.shape)

    def origin_value(self, values: np.ndarray) -> float:
        """State at the origin: average over the smallest shell containing it."""
        inner = values[0] if values.shape == self.shape else values
        if self.mode == "axisymmetric":
            return float(np.sum(self.sine_weights * inner) / np.sum(self.sine_weights))
        w = self.sine_weights[:, None]
        return float(np.sum(w * inner) / (np.sum(w) * self.n_phi))


@dataclass
class VelocityField:
    """State z at one instant: scalar per node in the reduced modes
    (half-space vertical velocity, sphere azimuthal component), 3-vector
    per node in full3d mode (components ordered r, theta, phi)."""

    grid: object
    values: np.ndarray
    time_stamp: float = 0.0

    def validate(self) -> "VelocityField":
        expected = self.grid.shape
        if isinstance(self.grid, SphereGrid) and self.grid.mode == "full3d":
            if self.values.shape not in ((3,) + expected, expected):
                raise ShapeError(
                    f"full3d field shape {self.values.shape} does not match grid {expected}")
        elif self.values.shape != expected:
            raise ShapeError(
                f"field shape {self.values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("velocity field contains NaN/Inf")
        return self

    def enforce_impermeability(self) -> "VelocityField":
        """Zero the wall-normal component.  The scalar (tangential) modes
        satisfy z . n = 0 structurally; full3d zeroes u_r on the wall shell."""
        if isinstance(self.grid, SphereGrid) and self.grid.mode == "full3d" \
                and self.values.ndim == 4:
            self.values[0, self.grid.wall_shell, :, :] = 0.0
        return self


def build_halfspace_grid(nu: float, y_max: float = 10.0,
                         dy_rule: str = "kolmogorov",
                         dy: float | None = None) -> HalfSpaceGrid:
    """Uniform column grid from 0 to at least y_max.

    Under the kolmogorov rule dy = nu^(3/4); the column is extended past
    y_max to the next node, with the dual-cell quadrature clipped at y_max.
    """
    if not nu > 0:
        raise ConfigurationError(f"viscosity must be positive, got {nu}")
    if not y_max > 0:
        raise ConfigurationError(f"y_max must be positive, got {y_max}")
    if dy_rule == "kolmogorov":
        dy = kolmogorov_scale(nu)
    elif dy_rule == "explicit":
        if dy is None or not (0 < dy <= y_max / 4):
            raise ConfigurationError(
                f"explicit dy must lie in (0, y_max/4], got {dy}")
    else:
        raise ConfigurationError(f"unknown dy_rule {dy_rule!r}")

    n_steps = int(np.ceil(y_max / dy - 1e-12))
    nodes = np.arange(n_steps + 1, dtype=float) * dy
    if nodes.size < 5:
        raise ConfigurationError(
            f"grid has {nodes.size} nodes (< 5); decrease dy or increase y_max")
    lo = np.maximum(0.0, nodes - dy / 2)
    hi = np.minimum(y_max, nodes + dy / 2)
    weights = np.clip(hi - lo, 0.0, None)
    return HalfSpaceGrid(dy=float(dy), y_max=float(y_max),
                         nodes=_lock(nodes), weights=_lock(weights))


def build_sphere_grid(nu: float, R: float = 5.0, mode: str = "axisymmetric",
                      mesh_rule: str = "kolmogorov",
                      dr: float | None = None, dtheta: float | None = None,
                      dphi: float | None = None) -> SphereGrid:
    """Spherical ball grid with half-cell offsets from r = 0 and the poles.

    The kolmogorov rule targets dr ~ nu^(3/4) and angular spacings whose
    arc length at r = R is ~ nu^(3/4); spacings are then snapped to an
    integer number of cells so the mesh tiles the ball exactly (within one
    cell of the target).
    """
    if not nu > 0:
        raise ConfigurationError(f"viscosity must be positive, got {nu}")
    if not R > 0:
        raise ConfigurationError(f"radius must be positive, got {R}")
    if mode not in ("axisymmetric", "full3d"):
        raise ConfigurationError(f"unknown sphere mode {mode!r}")

    if mesh_rule == "kolmogorov":
        eta = kolmogorov_scale(nu)
        dr = dtheta = dphi = None
        target_r, target_t, target_p = eta, eta / R, eta / R
    elif mesh_rule == "explicit":
        if dr is None or dtheta is None:
            raise ConfigurationError("explicit mesh rule needs dr and dtheta")
        if dphi is None:
            dphi = dtheta
        target_r, target_t, target_p = dr, dtheta, dphi
    else:
        raise ConfigurationError(f"unknown mesh_rule {mesh_rule!r}")

    n_r = int(np.ceil(R / target_r - 1e-12))
    if n_r < 5:
        raise ConfigurationError(
            f"grid has {n_r} radial shells (< 5); decrease the mesh size")
    dr = R / n_r
    n_t = max(4, int(np.ceil(np.pi / target_t - 1e-12)))
    dtheta = np.pi / n_t
    if mode == "axisymmetric":
        n_p, dphi = 1, 2.0 * np.pi
    else:
        n_p = max(4, int(np.ceil(2.0 * np.pi / target_p - 1e-12)))
        dphi = 2.0 * np.pi / n_p

    r_faces = np.arange(n_r + 1, dtype=float) * dr
    r_faces[-1] = R
    theta_faces = np.arange(n_t + 1, dtype=float) * dtheta
    theta_faces[-1] = np.pi
    r = 0.5 * (r_faces[:-1] + r_faces[1:])
    theta = 0.5 * (theta_faces[:-1] + theta_faces[1:])
    phi = (np.arange(n_p) + 0.5) * dphi

    radial_weights = (r_faces[1:] ** 3 - r_faces[:-1] ** 3) / 3.0
    sine_weights = np.cos(theta_faces[:-1]) - np.cos(theta_faces[1:])

    return SphereGrid(R=float(R), mode=mode, dr=float(dr), dtheta=float(dtheta),
                      dphi=float(dphi), r=_lock(r), theta=_lock(theta),
                      phi=_lock(phi), r_faces=_lock(r_faces),
                      theta_faces=_lock(theta_faces),
                      radial_weights=_lock(radial_weights),
                      sine_weights=_lock(sine_weights))


def _node_values(field_or_values) -> np.ndarray:
    values = getattr(field_or_values, "values", field_or_values)
    return np.asarray(values)


def volume_integral(field_or_values, grid) -> float:
    """Quadrature of a per-node scalar over the domain (exact for constants)."""
    values = _node_values(field_or_values)
    if isinstance(grid, HalfSpaceGrid):
        if values.shape != grid.shape:
            raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
        return float(np.dot(grid.weights, values))
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
    return float(np.sum(grid.volume_weights() * values))


def surface_integral(field_or_values, grid) -> float:
    """Boundary-node trace quadrature over the wall.

    Half-space: the wall-node value itself (per unit plate area).  Sphere:
    sum of the wall-shell values against R^2 sin(theta) cell weights.
    Accepts either the full field or just the boundary slice.
    """
    values = _node_values(field_or_values)
    if isinstance(grid, HalfSpaceGrid):
        if values.ndim == 0:
            return float(values)
        if values.shape != grid.shape:
            raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
        return float(values[grid.wall_index])
    sw = grid.surface_weights()
    if values.shape == grid.shape:
        values = values[grid.wall_shell]
    if values.shape != sw.shape:
        raise ShapeError(f"boundary field shape {values.shape} vs wall {sw.shape}")
    return float(np.sum(sw * values))

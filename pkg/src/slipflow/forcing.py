"""Boundary-singular divergence-free forcing fields.

The amplitude is dist^(-delta/2) where dist is the distance to the wall
(y above the plate, R - r inside the ball), so |g|^2 ~ dist^(-delta).
In the half-space the field points along the plate; in the ball it points
along the azimuthal unit vector and is phi-independent, which makes the
discrete divergence vanish identically in both reduced representations.

The wall cell contains the singularity, so the amplitude there needs a
regularization rule; both rules agree as the mesh is refined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .geometry import HalfSpaceGrid, SphereGrid, VelocityField

REGULARIZATIONS = ("cell_average", "half_cell_offset")


@dataclass(frozen=True)
class ForcingSpec:
    """Parameters of the singular forcing amplitude dist^(-delta/2)."""

    delta: float
    geometry: str = "halfspace"  # 'halfspace' | 'sphere'
    R: float | None = None
    regularization: str = "cell_average"
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(
                f"singularity strength delta must lie in (0, 1), got {self.delta}")
        if self.geometry not in ("halfspace", "sphere"):
            raise ConfigurationError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "sphere" and (self.R is None or self.R <= 0):
            raise ConfigurationError("sphere forcing needs a positive radius R")
        if self.regularization not in REGULARIZATIONS:
            raise ConfigurationError(
                f"unknown regularization {self.regularization!r}")


@dataclass(frozen=True)
class ForcingField:
    """Scalar amplitude per node (plate-parallel / azimuthal component)."""

    grid: object
    spec: ForcingSpec
    values: np.ndarray


def _regularized_amplitude(dist, cell_lo, cell_hi, delta, rule):
    """Pointwise dist^(-delta/2) with the singular cell treated by `rule`.

    [cell_lo, cell_hi] is the node's dual cell in the wall-distance
    coordinate (one-sided [0, h] at a node on the wall).  A node is
    singular when the wall lies within half a cell of it.  cell_average
    replaces the value with the cell mean of u^(-delta/2);
    half_cell_offset evaluates at dist + h/2.
    """
    dist = np.asarray(dist, dtype=float)
    cell_lo = np.broadcast_to(np.asarray(cell_lo, dtype=float), dist.shape)
    cell_hi = np.broadcast_to(np.asarray(cell_hi, dtype=float), dist.shape)
    h = cell_hi - cell_lo
    out = np.empty_like(dist)
    # tolerant comparison: half-cell-offset nodes sit exactly at h/2
    singular = dist < 0.5 * h * (1.0 - 1e-12)
    np.power(dist, -delta / 2, out=out, where=~singular)
    if np.any(singular):
        p = 1.0 - delta / 2
        lo = np.maximum(0.0, cell_lo[singular])
        hi = cell_hi[singular]
        if rule == "cell_average":
            out[singular] = (hi ** p - lo ** p) / ((hi - lo) * p)
        else:  # half_cell_offset
            out[singular] = (dist[singular] + h[singular] / 2) ** (-delta / 2)
    return out


def build_forcing(spec: ForcingSpec, grid) -> ForcingField:
    """Evaluate the forcing amplitude on a grid, regularized at the wall."""
    if spec.geometry == "halfspace" and not isinstance(grid, HalfSpaceGrid):
        raise ConfigurationError("half-space forcing needs a HalfSpaceGrid")
    if spec.geometry == "sphere":
        if not isinstance(grid, SphereGrid):
            raise ConfigurationError("sphere forcing needs a SphereGrid")
        if abs(grid.R - spec.R) > 1e-12 * spec.R:
            raise ConfigurationError(
                f"grid radius {grid.R} does not match forcing radius {spec.R}")
    if isinstance(grid, HalfSpaceGrid):
        dist = grid.nodes
        lo = np.maximum(0.0, grid.nodes - grid.dy / 2)
        hi = grid.nodes + grid.dy / 2
    else:
        shape_tail = (1,) * (len(grid.shape) - 1)
        dist = (grid.R - grid.r).reshape((-1,) + shape_tail)
        lo = (grid.R - grid.r_faces[1:]).reshape(dist.shape)
        hi = (grid.R - grid.r_faces[:-1]).reshape(dist.shape)
    values = spec.amplitude * np.broadcast_to(
        _regularized_amplitude(dist, lo, hi, spec.delta, spec.regularization),
        grid.shape).copy()
    values.setflags(write=False)
    return ForcingField(grid=grid, spec=spec, values=values)


def forcing_l2_norm_sq(spec: ForcingSpec, y_max: float | None = None) -> float:
    """Closed-form squared L2 norm of the un-regularized forcing.

    Ball: 4*pi * int_0^R r^2 (R-r)^(-delta) dr
        = 8*pi*R^(3-delta) / ((1-delta)(2-delta)(3-delta)).
    Half-space (per unit plate area): int_0^y_max y^(-delta) dy.
    """
    d = spec.delta
    if d >= 1.0:
        raise ConfigurationError(f"L2 norm diverges for delta = {d} >= 1")
    if spec.geometry == "sphere":
        R = spec.R
        core = 8.0 * np.pi * R ** (3 - d) / ((1 - d) * (2 - d) * (3 - d))
    else:
        if y_max is None or y_max <= 0:
            raise ConfigurationError("half-space L2 norm needs a positive y_max")
        core = y_max ** (1 - d) / (1 - d)
    return spec.amplitude ** 2 * core


def divergence_residual(field) -> float:
    """Maximum absolute discrete divergence over interior nodes.

    The reduced representations (plate-parallel w(y), azimuthal
    phi-independent u_phi) are divergence-free exactly: the only nonzero
    term would be the derivative along the field direction, and the data
    carry no dependence on that coordinate.  Full 3-vector fields on a
    sphere grid are checked with centered differences of the spherical
    divergence.
    """
    grid = field.grid
    values = np.asarray(field.values)

    if isinstance(grid, HalfSpaceGrid):
        # div [0, 0, w(y)] = d_z w; the column carries no z dependence
        return float(np.max(np.abs(np.zeros_like(values))))

    if values.shape == grid.shape:
        # azimuthal component only: div = (1/(r sin)) d_phi u_phi
        if grid.mode == "axisymmetric":
            return 0.0
        dphi_u = np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)
        dphi_u /= 2.0 * grid.dphi
        r = grid.r.reshape(-1, 1, 1)
        sin_t = np.sin(grid.theta).reshape(1, -1, 1)
        return float(np.max(np.abs(dphi_u / (r * sin_t))))

    if values.shape != (3,) + grid.shape:
        raise ShapeError(f"unexpected field shape {values.shape}")
    if grid.mode != "full3d":
        raise ShapeError("3-vector fields require a full3d grid")

    u_r, u_t, u_p = values
    r = grid.r.reshape(-1, 1, 1)
    theta = grid.theta.reshape(1, -1, 1)
    sin_t = np.sin(theta)
    # interior centered differences; one-sided rows dropped from the max
    div = np.zeros(grid.shape)
    term_r = np.zeros(grid.shape)
    rsq_ur = (r ** 2) * u_r
    term_r[1:-1] = (rsq_ur[2:] - rsq_ur[:-2]) / (2 * grid.dr)
    div += term_r / r ** 2
    term_t = np.zeros(grid.shape)
    sin_ut = sin_t * u_t
    term_t[:, 1:-1] = (sin_ut[:, 2:] - sin_ut[:, :-2]) / (2 * grid.dtheta)
    div += term_t / (r * sin_t)
    term_p = (np.roll(u_p, -1, axis=2) - np.roll(u_p, 1, axis=2)) / (2 * grid.dphi)
    div += term_p / (r * sin_t)
    interior = div[1:-1, 1:-1, :]
    return float(np.max(np.abs(interior))) if interior.size else 0.0

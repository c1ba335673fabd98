"""Observables: energies, dissipation, wall traces, scaling fits,
fractional seminorms and the local (Duchon-Robert style) dissipation
density, plus ensemble reduction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError, ShapeError
from .geometry import HalfSpaceGrid, SphereGrid, surface_integral, volume_integral

CHANNELS = ("kinetic_energy", "dissipation_rate", "wall_energy",
            "slip_norm", "cumulative_dissipation", "cumulative_slip")


@dataclass
class DiagnosticsSeries:
    """Per-realization time series of the energy observables.

    kinetic_energy   ||z||^2 over the domain
    dissipation_rate nu * ||grad z||^2 (covariant gradient on the sphere)
    wall_energy      ||z||^2 over the wall trace
    slip_norm        nu * (||grad z||^2 + alpha * wall_energy)
    cumulative_*     left-Riemann time integrals accumulated every step
    """

    times: np.ndarray
    kinetic_energy: np.ndarray
    dissipation_rate: np.ndarray
    wall_energy: np.ndarray
    slip_norm: np.ndarray
    cumulative_dissipation: np.ndarray
    cumulative_slip: np.ndarray
    config_label: str = ""
    realization: int = -1

    def channel(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def validate(self) -> "DiagnosticsSeries":
        n = self.times.size
        for name in CHANNELS:
            ch = self.channel(name)
            if ch.shape != (n,):
                raise ShapeError(f"channel {name} has shape {ch.shape}, "
                                 f"expected ({n},)")
            if np.any(ch < 0):
                raise ValueError(f"channel {name} has negative entries")
        if np.any(np.diff(self.cumulative_dissipation) < 0):
            raise ValueError("cumulative dissipation must be non-decreasing")
        return self


@dataclass
class EnsembleStats:
    """Per-sample mean and standard error over N realizations."""

    times: np.ndarray
    n_realizations: int
    mean: dict = field(default_factory=dict)
    sem: dict = field(default_factory=dict)

    def final(self, name: str) -> float:
        return float(self.mean[name][-1])


def accumulate_ensemble(series_list) -> EnsembleStats:
    """Reduce realizations to means and standard errors.

    Summation runs in list order (callers pass realization order), so the
    reduction is deterministic.
    """
    if not series_list:
        raise ShapeError("empty ensemble")
    t0 = series_list[0].times
    for s in series_list[1:]:
        if s.times.shape != t0.shape or not np.allclose(s.times, t0,
                                                        rtol=0, atol=1e-12):
            raise ShapeError("series sample times do not match")
    n = len(series_list)
    stats = EnsembleStats(times=t0.copy(), n_realizations=n)
    for name in CHANNELS:
        stacked = np.stack([s.channel(name) for s in series_list], axis=0)
        stats.mean[name] = stacked.mean(axis=0)
        if n > 1:
            stats.sem[name] = stacked.std(axis=0, ddof=1) / np.sqrt(n)
        else:
            stats.sem[name] = np.zeros_like(t0)
    return stats


def _derivative(values, h, axis, periodic=False):
    """Centered differences, one-sided at the ends (periodic wraps)."""
    if periodic:
        return (np.roll(values, -1, axis=axis)
                - np.roll(values, 1, axis=axis)) / (2.0 * h)
    out = np.empty_like(values)

    def sl(spec):
        s = [slice(None)] * values.ndim
        s[axis] = spec
        return tuple(s)

    out[sl(slice(1, -1))] = (values[sl(slice(2, None))]
                             - values[sl(slice(None, -2))]) / (2.0 * h)
    out[sl(0)] = (values[sl(1)] - values[sl(0)]) / h
    out[sl(-1)] = (values[sl(-1)] - values[sl(-2)]) / h
    return out


def gradient_energy(values, grid, covariant: bool = True) -> float:
    """||grad z||^2 over the whole domain.

    1-D: sum over faces of ((w_{j+1}-w_j)/dy)^2 * dy.  Sphere azimuthal
    mode: full covariant gradient of u_phi phi-hat, i.e. (d_r u)^2 +
    ((1/r) d_theta u)^2 plus the metric term u^2/(r sin theta)^2,
    quadratured node-centered over the full ball (the solver's internal
    face-based form differs by a wall half-shell tied to the Robin flux).
    covariant=False drops the metric term (component-wise gradient).
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if isinstance(grid, HalfSpaceGrid):
        if values.shape != grid.shape:
            raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
        d = np.diff(values)
        return float(np.sum(d * d) / grid.dy)
    if not isinstance(grid, SphereGrid):
        raise ShapeError(f"unsupported grid type {type(grid).__name__}")
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
    axisym = grid.mode == "axisymmetric"
    tail = (1,) if axisym else (1, 1)
    r = grid.r.reshape((-1,) + tail)
    sin_t = np.sin(grid.theta).reshape((1, -1) + ((1,) if not axisym else ()))
    dens = _derivative(values, grid.dr, axis=0) ** 2
    dens += (_derivative(values, grid.dtheta, axis=1) / r) ** 2
    if not axisym:
        dens += (_derivative(values, grid.dphi, axis=2, periodic=True)
                 / (r * sin_t)) ** 2
    if covariant:
        dens += (values / (r * sin_t)) ** 2
    return volume_integral(dens, grid)


def kinetic_energy(values, grid) -> float:
    values = np.asarray(getattr(values, "values", values), dtype=float)
    return volume_integral(values * values, grid)


def wall_energy(values, grid) -> float:
    values = np.asarray(getattr(values, "values", values), dtype=float)
    return surface_integral(values * values, grid)


def slip_norm(values, grid, nu: float, alpha: float) -> float:
    """nu * (||grad z||^2 + ||sqrt(alpha) z||^2 on the wall)."""
    return nu * (gradient_energy(values, grid) + alpha * wall_energy(values, grid))


def weak_dissipation_value(stats_or_energy, nu: float) -> float:
    """nu times the mean kinetic energy at the final sample."""
    if isinstance(stats_or_energy, EnsembleStats):
        ke = stats_or_energy.final("kinetic_energy")
    else:
        ke = float(stats_or_energy)
    return nu * ke


def fit_scaling_exponent(pairs) -> tuple[float, float, float]:
    """Least-squares line through (log nu, log observable).

    Returns (slope, intercept, r^2); exact power laws give residual 0.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 (nu, observable) pairs, got {len(pairs)}")
    x = np.log([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if np.any(y <= 0) or np.any(np.array([p[0] for p in pairs]) <= 0):
        raise ValueError("scaling fit needs positive nu and observable values")
    y = np.log(y)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 and ss_res < 1e-20 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return float(slope), float(intercept), float(r2)


def _pair_sum_1d(y, w, f, s, h):
    """Double sum of w_i w_j (f_i - f_j)^2 / |y_i - y_j|^(1+2s), diagonal
    band |y_i - y_j| < h/2 excluded."""
    dyij = np.abs(y[:, None] - y[None, :])
    df = f[:, None] - f[None, :]
    mask = dyij >= h / 2
    ww = w[:, None] * w[None, :]
    out = np.zeros_like(dyij)
    np.divide(df * df, dyij ** (1.0 + 2.0 * s), out=out, where=mask)
    return float(np.sum(ww * out * mask))


def _sphere_points(grid, values, n_phi_samples):
    """Cartesian sample points, field vectors and weights for a ball field."""
    r = grid.r
    th = grid.theta
    ph = (np.arange(n_phi_samples) + 0.5) * (2 * np.pi / n_phi_samples)
    R_, T_, P_ = np.meshgrid(r, th, ph, indexing="ij")
    u = np.repeat(values[:, :, None], n_phi_samples, axis=2)
    st, ct = np.sin(T_), np.cos(T_)
    x = R_ * st * np.cos(P_)
    y = R_ * st * np.sin(P_)
    z = R_ * ct
    pts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    # azimuthal vector field u_phi * phi_hat
    vec = np.stack([-u * np.sin(P_), u * np.cos(P_), np.zeros_like(u)],
                   axis=-1).reshape(-1, 3)
    w = (np.multiply.outer(grid.radial_weights, grid.sine_weights)
         * (2 * np.pi / n_phi_samples))
    w = np.repeat(w[:, :, None], n_phi_samples, axis=2).reshape(-1)
    return pts, vec, w


def hs_seminorm_sq(values, grid, s: float, sampling: str = "full",
                   n_pairs: int = 200_000, seed: int = 0,
                   full_cap: int = 2_000_000) -> float:
    """Fractional (Gagliardo) seminorm squared of order s in (0, 1).

    1-D fields use the |x-y|^(1+2s) kernel, ball fields the 3-D
    |x-y|^(3+2s) kernel with the azimuthal unit vector carried along.
    Node pairs closer than half a cell are excluded (the continuum
    integral is finite there; the discrete diagonal is not).
    monte_carlo sampling draws pairs by volume measure.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"seminorm order s must lie in (0, 1), got {s}")
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if isinstance(grid, HalfSpaceGrid):
        if values.shape != grid.shape:
            raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
        return _pair_sum_1d(grid.nodes, grid.weights, values, s, grid.dy)
    if not isinstance(grid, SphereGrid) or grid.mode != "axisymmetric":
        raise ShapeError("hs_seminorm_sq supports 1-D columns and "
                         "axisymmetric ball fields")
    h = grid.dr
    if sampling == "full":
        n_phi = max(8, grid.n_theta // 2)
        pts, vec, w = _sphere_points(grid, values, n_phi)
        if pts.shape[0] ** 2 > full_cap:
            raise ResolutionError(
                f"full pair sum would need {pts.shape[0]**2} terms; "
                "use sampling='monte_carlo'")
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        dv = vec[:, None, :] - vec[None, :, :]
        num = np.sum(dv * dv, axis=-1)
        mask = dist >= h / 2
        out = np.zeros_like(dist)
        np.divide(num, dist ** (3.0 + 2.0 * s), out=out, where=mask)
        return float(np.sum(w[:, None] * w[None, :] * out * mask))
    if sampling != "monte_carlo":
        raise ValueError(f"unknown sampling {sampling!r}")
    n_phi = max(8, grid.n_theta // 2)
    pts, vec, w = _sphere_points(grid, values, n_phi)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    p = w / w.sum()
    i = rng.choice(w.size, size=n_pairs, p=p)
    j = rng.choice(w.size, size=n_pairs, p=p)
    diff = pts[i] - pts[j]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    dv = vec[i] - vec[j]
    num = np.sum(dv * dv, axis=-1)
    mask = dist >= h / 2
    vals = np.zeros(n_pairs)
    np.divide(num, dist ** (3.0 + 2.0 * s), out=vals, where=mask)
    total_w = w.sum()
    return float(np.mean(vals * mask) * total_w ** 2)


def mollifier_bump(t: np.ndarray) -> np.ndarray:
    """C-infinity bump on (-1, 1), unnormalized: exp(-1/(1-t^2))."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


def duchon_robert_density(values, grid, ell: float) -> np.ndarray:
    """Local dissipation density at mollification width ell (1-D fields).

    D_ell(u)(x) = (1/4) * int phi_ell'(y) * du(x; y) * |du(x; y)|^2 dy
    with du(x; y) = u(x+y) - u(x) and phi_ell a unit-mass bump supported
    on (-ell, ell).  Returned on the grid with NaN at nodes closer than
    ell to either end of the column.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if not isinstance(grid, HalfSpaceGrid):
        raise ShapeError("duchon_robert_density is implemented for 1-D columns")
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} vs grid {grid.shape}")
    h = grid.dy
    if ell < 2.0 * h:
        raise ResolutionError(f"mollifier width {ell} under-resolved: need >= 2*dy = {2*h}")
    m = int(np.floor(ell / h))
    offs = np.arange(-m, m + 1)
    yoff = offs * h
    # unit-mass bump and its derivative, sampled on the offsets
    norm = np.trapezoid(mollifier_bump(np.linspace(-1, 1, 4097)),
                        np.linspace(-1, 1, 4097)) * ell
    t = yoff / ell
    phi_prime = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    phi_prime[inside] = mollifier_bump(ti) * (-2.0 * ti / (1.0 - ti * ti) ** 2)
    phi_prime /= norm * ell
    n = values.size
    out = np.full(n, np.nan)
    lo = int(np.ceil(ell / h))
    hi = n - 1 - lo
    if hi < lo:
        raise ResolutionError("mollifier width exceeds half the column")
    idx = np.arange(lo, hi + 1)
    acc = np.zeros(idx.size)
    for o, pp in zip(offs, phi_prime):
        if pp == 0.0:
            continue
        du = values[idx + o] - values[idx]
        acc += pp * du * np.abs(du) ** 2
    out[idx] = 0.25 * acc * h
    return out

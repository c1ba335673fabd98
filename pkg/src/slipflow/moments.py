"""Exact ensemble moments of the spherical solver.

The axisymmetric update is linear with additive Gaussian noise, so every
second moment of the ensemble is computable in closed form once the
operator is diagonalized.  The operator separates exactly,

    L = L_r (x) I  +  diag(1/r~^2) (x) M_theta,

because the azimuthal metric damping uses the cell-averaged radial metric
r~^2 = Vr/dr (see SphereOperator).  With node-iid noise the amplitude is
theta-independent, and both the kinetic-energy and the wall-trace
quadratures are proportional to the sine weights, so angular cross terms
drop out and everything reduces to one small radial eigenproblem per
angular mode.  Runs in milliseconds; no Monte-Carlo error.

Useful both as the exact evaluation of ensemble trends across a viscosity
sweep and as an independent oracle for the stochastic time-stepping
machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .forcing import build_forcing
from .geometry import SphereGrid
from .solver import (SimConfig, build_grid, make_operator,
                     noise_coefficient, resolve_time_grid)


@dataclass(frozen=True)
class SphereMoments:
    """Exact N -> infinity ensemble statistics at the final time."""

    nu: float
    dt: float
    n_steps: int
    kinetic_energy: float
    wall_energy: float
    cumulative_dissipation: float   # nu * int E||grad z||^2 dt (operator form)
    cumulative_slip: float          # adds the alpha wall term
    weak_dissipation: float


def _geometric(p: np.ndarray, n: int) -> np.ndarray:
    """sum_{k=0}^{n-1} p^k, stable through p -> 1."""
    out = np.full_like(p, float(n))
    far = np.abs(1.0 - p) > 1e-13
    out[far] = (1.0 - p[far] ** n) / (1.0 - p[far])
    return out


def _geometric_cumsum(p: np.ndarray, n: int) -> np.ndarray:
    """sum_{m=0}^{n-1} sum_{k=0}^{m-1} p^k = (n - geometric(p, n))/(1 - p)."""
    out = np.full_like(p, n * (n - 1) / 2.0)
    far = np.abs(1.0 - p) > 1e-13
    out[far] = (n - _geometric(p[far], n)) / (1.0 - p[far])
    return out


def exact_sphere_moments(config: SimConfig, grid: SphereGrid | None = None
                         ) -> SphereMoments:
    """Exact final-time ensemble moments for an axisymmetric sphere run.

    Requires node_iid noise (theta-independent amplitude) and the zero
    initial state.  The cumulative dissipation is the operator (flux) form
    accumulated left-Riemann, i.e. exactly what the time stepper reports.
    """
    if config.geometry != "sphere" or config.mode != "axisymmetric":
        raise ConfigurationError("exact moments need an axisymmetric sphere run")
    if config.noise_mode != "node_iid":
        raise ConfigurationError("exact moments are derived for node_iid noise")
    grid = grid if grid is not None else build_grid(config)
    op = make_operator(grid, config.alpha)
    dt, n_steps = resolve_time_grid(config, grid, op)
    forcing = build_forcing(config.forcing_spec(), grid)
    coef = noise_coefficient(config, grid, forcing, dt)[:, 0]  # radial profile
    nu, alpha, phi = config.nu, config.alpha, grid.phi_extent

    st = grid.sine_weights
    vr = grid.radial_weights
    n_t, n_r = grid.n_theta, grid.n_r

    # angular operator M_theta, symmetric w.r.t. the sine weights
    stf = op.stf
    csc2 = 1.0 / np.sin(grid.theta) ** 2
    M = np.zeros((n_t, n_t))
    idx = np.arange(n_t - 1)
    c = stf / grid.dtheta
    M[idx, idx + 1] += c / st[:-1]
    M[idx + 1, idx] += c / st[1:]
    M[idx, idx] -= c / st[:-1]
    M[idx + 1, idx + 1] -= c / st[1:]
    M[np.diag_indices(n_t)] -= csc2
    sq = np.sqrt(st)
    mu, phi_modes = np.linalg.eigh((sq[:, None] * M) / sq[None, :])
    phi_modes = phi_modes / sq[:, None]      # sine-weight orthonormal

    # noise variance picked up by each angular mode (iid nodes, so the
    # projection carries the squared sine weights)
    s_m = (st ** 2) @ (phi_modes ** 2)

    # radial operator pieces
    cr = op.cr
    Lr = np.zeros((n_r, n_r))
    idx = np.arange(n_r - 1)
    Lr[idx, idx + 1] += cr / vr[:-1]
    Lr[idx + 1, idx] += cr / vr[1:]
    Lr[idx, idx] -= cr / vr[:-1]
    Lr[idx + 1, idx + 1] -= cr / vr[1:]
    Lr[-1, -1] -= grid.R ** 2 * alpha / vr[-1]
    inv_metric = grid.dr / vr                # 1 / r~^2

    wall = 0.0
    ke = 0.0
    cum_quadratic = 0.0   # sum_n E <u, -L u>_w dt nu
    cum_wall = 0.0        # sum_n E wall(t_n) dt nu (for the alpha term)
    sqv = np.sqrt(vr)
    for m in range(n_t):
        Rm = Lr + np.diag(mu[m] * inv_metric)
        lam, psi = np.linalg.eigh((sqv[:, None] * Rm) / sqv[None, :])
        lam = -lam                            # decay rates, >= 0
        psi = psi / sqv[:, None]              # Vr-orthonormal columns
        x = 1.0 - dt * nu * lam
        # modal noise covariance Q_ab = sum_i Vr_i^2 psi_a psi_b coef_i^2
        B = psi * (vr * coef)[:, None]        # (i, a)
        Q = B.T @ B
        xx = np.outer(x, x)
        G = _geometric(xx, n_steps)
        H = _geometric_cumsum(xx, n_steps)
        QG = Q * G
        QH = Q * H
        pj = psi[-1, :]                       # radial vectors at the wall shell
        wall_m = s_m[m] * pj @ QG @ pj
        wall += wall_m
        ke += s_m[m] * np.sum(np.diag(QG))
        cum_quadratic += s_m[m] * float(np.sum(lam * np.diag(QH)))
        cum_wall += s_m[m] * pj @ QH @ pj

    wall_ke = grid.R ** 2 * phi * wall
    kinetic = phi * ke
    cum_ge = phi * cum_quadratic - alpha * grid.R ** 2 * phi * cum_wall
    cum_diss = nu * dt * cum_ge
    cum_slip = nu * dt * (phi * cum_quadratic)
    # cum_slip = nu int (GE + alpha wall) = nu int <u, -Lu>_w exactly
    return SphereMoments(nu=nu, dt=dt, n_steps=n_steps,
                         kinetic_energy=kinetic, wall_energy=wall_ke,
                         cumulative_dissipation=cum_diss,
                         cumulative_slip=cum_slip,
                         weak_dissipation=nu * kinetic)

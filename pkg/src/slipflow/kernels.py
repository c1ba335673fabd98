"""Hot time-stepping loops, JIT-compiled.

Each kernel advances the explicit update

    u <- u + dt*nu*L(u) + f*dt + coef .* xi

while accumulating the energy diagnostics every step (left-Riemann time
integrals) and recording channel samples every `sample_every` steps.
The arithmetic here must stay in lockstep with the numpy operators in
`solver`; a unit test pins the two against each other.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def halfspace_trajectory(u, xi, noise_on, coef, f_dt, det_on, lam, a2,
                         top_neumann, weights, dy, nu, alpha, dt, n_steps,
                         sample_every, ke, diss, wall, slip, cumd, cums):
    """Advance the 1-D column for n_steps.

    lam = nu*dt/dy^2, a2 = 2*dy*alpha (Robin ghost at the wall).  With a
    Dirichlet top the last node stays pinned at 0 and receives no forcing.
    Sample arrays must have ceil(n_steps/sample_every)+1 entries; the last
    entry records the final state.
    """
    J = u.size - 1
    cd = 0.0
    cs = 0.0
    lap = np.empty(J + 1)
    for n in range(n_steps):
        ge = 0.0
        for j in range(J):
            d = u[j + 1] - u[j]
            ge += d * d
        ge /= dy
        wke = u[0] * u[0]
        sl = nu * (ge + alpha * wke)
        if n % sample_every == 0:
            m = n // sample_every
            s = 0.0
            for j in range(J + 1):
                s += weights[j] * u[j] * u[j]
            ke[m] = s
            diss[m] = nu * ge
            wall[m] = wke
            slip[m] = sl
            cumd[m] = cd
            cums[m] = cs
        cd += dt * nu * ge
        cs += dt * sl
        lap[0] = 2.0 * (u[1] - u[0]) - a2 * u[0]
        for j in range(1, J):
            lap[j] = u[j + 1] - 2.0 * u[j] + u[j - 1]
        if top_neumann:
            lap[J] = 2.0 * (u[J - 1] - u[J])
        else:
            lap[J] = 0.0
        for j in range(J + 1):
            un = u[j] + lam * lap[j]
            if det_on:
                un += f_dt[j]
            if noise_on:
                un += coef[j] * xi[n, j]
            u[j] = un
        if not top_neumann:
            u[J] = 0.0
    # final sample
    ge = 0.0
    for j in range(J):
        d = u[j + 1] - u[j]
        ge += d * d
    ge /= dy
    wke = u[0] * u[0]
    s = 0.0
    for j in range(J + 1):
        s += weights[j] * u[j] * u[j]
    m = ke.size - 1
    ke[m] = s
    diss[m] = nu * ge
    wall[m] = wke
    slip[m] = nu * (ge + alpha * wke)
    cumd[m] = cd
    cums[m] = cs


@numba.njit(cache=True)
def sphere_block(u, xi, noise_on, coef, f_dt, det_on, dtnu, cr, vr, st, stf,
                 dr_over_dth, wall_coef, curv, w, grw, gtw, cw, sw, dt, nu,
                 alpha, n0, n_block, sample_every, ke, diss, wall, slip,
                 cumd, cums, acc):
    """Advance the axisymmetric (r, theta) ball state by n_block steps.

    Conservative flux form: radial face areas r^2 (zero at the origin),
    Robin wall flux -alpha*u*R^2, zero-flux theta faces at the poles, and
    the diagonal azimuthal curvature term -u/(r sin)^2.  acc carries the
    running (cum_diss, cum_slip) across blocks.
    """
    Nr, Nt = u.shape
    lap = np.empty((Nr, Nt))
    cd = acc[0]
    cs = acc[1]
    for jstep in range(n_block):
        n = n0 + jstep
        ge = 0.0
        for i in range(Nr - 1):
            for k in range(Nt):
                d = u[i + 1, k] - u[i, k]
                ge += grw[i, k] * d * d
        for i in range(Nr):
            for k in range(Nt - 1):
                d = u[i, k + 1] - u[i, k]
                ge += gtw[k] * d * d
        for i in range(Nr):
            for k in range(Nt):
                ge += cw[i, k] * u[i, k] * u[i, k]
        wke = 0.0
        for k in range(Nt):
            wke += sw[k] * u[Nr - 1, k] * u[Nr - 1, k]
        sl = nu * (ge + alpha * wke)
        if n % sample_every == 0:
            m = n // sample_every
            s = 0.0
            for i in range(Nr):
                for k in range(Nt):
                    s += w[i, k] * u[i, k] * u[i, k]
            ke[m] = s
            diss[m] = nu * ge
            wall[m] = wke
            slip[m] = sl
            cumd[m] = cd
            cums[m] = cs
        cd += dt * nu * ge
        cs += dt * sl
        for i in range(Nr):
            for k in range(Nt):
                acc_l = 0.0
                if i < Nr - 1:
                    acc_l += cr[i] * (u[i + 1, k] - u[i, k])
                if i > 0:
                    acc_l -= cr[i - 1] * (u[i, k] - u[i - 1, k])
                acc_l /= vr[i]
                if i == Nr - 1:
                    acc_l -= wall_coef * u[i, k]
                t = 0.0
                if k < Nt - 1:
                    t += stf[k] * (u[i, k + 1] - u[i, k])
                if k > 0:
                    t -= stf[k - 1] * (u[i, k] - u[i, k - 1])
                acc_l += t * dr_over_dth / (vr[i] * st[k])
                acc_l -= curv[i, k] * u[i, k]
                lap[i, k] = acc_l
        for i in range(Nr):
            for k in range(Nt):
                un = u[i, k] + dtnu * lap[i, k]
                if det_on:
                    un += f_dt[i, k]
                if noise_on:
                    un += coef[i, k] * xi[jstep, i, k]
                u[i, k] = un
    acc[0] = cd
    acc[1] = cs


@numba.njit(cache=True)
def sphere_final_sample(u, w, grw, gtw, cw, sw, nu, alpha, ke, diss, wall,
                        slip, cumd, cums, acc):
    """Record the final-state sample into the last slot of each channel."""
    Nr, Nt = u.shape
    ge = 0.0
    for i in range(Nr - 1):
        for k in range(Nt):
            d = u[i + 1, k] - u[i, k]
            ge += grw[i, k] * d * d
    for i in range(Nr):
        for k in range(Nt - 1):
            d = u[i, k + 1] - u[i, k]
            ge += gtw[k] * d * d
    for i in range(Nr):
        for k in range(Nt):
            ge += cw[i, k] * u[i, k] * u[i, k]
    wke = 0.0
    for k in range(Nt):
        wke += sw[k] * u[Nr - 1, k] * u[Nr - 1, k]
    s = 0.0
    for i in range(Nr):
        for k in range(Nt):
            s += w[i, k] * u[i, k] * u[i, k]
    m = ke.size - 1
    ke[m] = s
    diss[m] = nu * ge
    wall[m] = wke
    slip[m] = nu * (ge + alpha * wke)
    cumd[m] = acc[0]
    cums[m] = acc[1]

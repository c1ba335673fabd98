"""Figure rendering: one panel per observable for a viscosity sweep, and
the sweep-level scaling view with a fitted log-log slope."""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import collect_series, load_sweep

plt.rcParams.update({
    "figure.figsize": (5.2, 3.6),
    "figure.dpi": 130,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
})

SERIES_PANELS = (
    ("kinetic_energy", "ke_mean", "ke_sem", "average kinetic energy"),
    ("dissipation", "diss_mean", "diss_sem", "average viscous dissipation"),
    ("wall_energy", "wall_ke_mean", "wall_ke_sem",
     "average kinetic energy at the wall"),
)


def _nu_label(entry):
    return f"nu = {entry['nu']:g}" if entry["nu"] is not None \
        else os.path.basename(entry["path"])


def plot_series(inputs, out_dir: str, prefix: str = "series") -> dict:
    """Render the three observable panels, one curve per viscosity with a
    shaded +- standard-error band.  Returns {panel name: (path, n_curves)}.
    """
    series = collect_series(inputs)
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for name, mean_col, sem_col, title in SERIES_PANELS:
        fig, ax = plt.subplots()
        for entry in series:
            cols = entry["cols"]
            t, m, s = cols["time"], cols[mean_col], cols[sem_col]
            line, = ax.plot(t, m, label=_nu_label(entry), lw=1.2)
            ax.fill_between(t, m - s, m + s, alpha=0.25,
                            color=line.get_color(), lw=0)
        ax.set_xlabel("time")
        ax.set_ylabel(title)
        ax.legend(loc="best")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{prefix}_{name}.png")
        fig.savefig(path)
        plt.close(fig)
        written[name] = (path, len(series))
    return written


def fit_loglog_slope(nu, values):
    """Least-squares slope of log(values) against log(nu)."""
    x = np.log(np.asarray(nu, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def plot_sweep(sweep_csv: str, out_dir: str, name: str = "sweep.png") -> dict:
    """Two-panel sweep view: log-log final wall energy vs nu with the
    fitted slope annotated, and time-integrated dissipation vs nu on
    linear axes.  With fewer than 3 viscosities the points are drawn
    without a fit.  Returns {path, n_points, slope}.
    """
    sweep = load_sweep(sweep_csv)
    cols = sweep["cols"]
    order = np.argsort(-cols["nu"])
    nu = cols["nu"][order]
    wall = cols["final_wall_ke"][order]
    diss = cols["time_integrated_diss"][order]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ax1.loglog(nu, wall, "o-", lw=1.0)
    ax1.set_xlabel("viscosity nu")
    ax1.set_ylabel("final wall kinetic energy")
    ax1.invert_xaxis()
    slope = None
    if nu.size >= 3 and np.all(wall > 0):
        slope, intercept = fit_loglog_slope(nu, wall)
        ax1.plot(nu, np.exp(intercept) * nu ** slope, "--", lw=0.9,
                 label=f"slope = {slope:+.3f}")
        ax1.legend(loc="best")
    ax2.plot(nu, diss, "s-", lw=1.0)
    ax2.set_xlabel("viscosity nu")
    ax2.set_ylabel("time-integrated dissipation")
    ax2.invert_xaxis()
    ax2.set_ylim(bottom=0.0)
    fig.tight_layout()
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.savefig(path)
    plt.close(fig)
    return {"path": path, "n_points": int(nu.size), "slope": slope}

"""Figure rendering for the experiment runner.

Every experiment writes its data as CSV/JSON; these helpers render one PNG
per experiment from the same in-memory objects so a run leaves both the
numbers and a picture.  Rendering is headless (Agg) and stateless: each
function builds one figure, saves it, and closes it.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 130


def _finish(fig, path):
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def save_trajectory(traj, path, title: str = "") -> None:
    """Component paths of a single trajectory against nominal time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = traj.times_nominal
    for j in range(traj.states.shape[1]):
        ax.plot(t, traj.states[:, j], label=f"component {j}")
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    _finish(fig, path)


def save_fan(panels, path) -> None:
    """Stacked fans of one coordinate: panels = [(scale, times, (M, K) paths)]."""
    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 2.4 * len(panels)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, (scale, times, paths) in zip(axes, panels):
        for row in paths:
            ax.plot(times, row, lw=0.5, alpha=0.6, color="tab:blue")
        ax.set_ylabel("x(t)")
        ax.set_title(f"perturbation scale {scale:g}", fontsize=9)
    axes[-1].set_xlabel("t")
    _finish(fig, path)


def save_estimator(comp, path) -> None:
    """True error with the embedded and spread estimators, log scale."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(comp.times, comp.true_error, color="black", label="true error")
    ax.semilogy(comp.times, comp.embedded_estimate, color="tab:blue", label="embedded estimate")
    ax.semilogy(comp.times, comp.spread_indicator, color="tab:red", label="ensemble spread")
    ax.set_xlabel("t")
    ax.set_ylabel("error")
    ax.legend(frameon=False)
    _finish(fig, path)


def save_order_panels(groups, path, ylabel: str) -> None:
    """Log-log error curves per study: groups = [(panel title, [studies])]."""
    fig, axes = plt.subplots(1, len(groups), figsize=(5.2 * len(groups), 4), squeeze=False)
    for ax, (title, studies) in zip(axes[0], groups):
        for study in studies:
            ax.loglog(study.h_grid, study.errors, "o-", ms=4, label=study.label)
        ax.set_xlabel("h")
        ax.set_ylabel(ylabel)
        ax.set_title(title, fontsize=10)
        ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def save_mse(knee_study, knee_label, pq_study, pq_label, path) -> None:
    """Estimator MSE against h with the bias/variance theory slopes."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for study, label, marker in ((knee_study, knee_label, "o"), (pq_study, pq_label, "s")):
        ax.loglog(study.h_grid, study.mse, marker + "-", ms=4, label=label)
        anchor = study.mse[-1] / study.h_grid[-1] ** (2.0 * study.bias_exponent)
        guide = anchor * np.asarray(study.h_grid) ** (2.0 * study.bias_exponent)
        ax.loglog(study.h_grid, guide, "--", lw=0.8, color="gray")
    ax.set_xlabel("h")
    ax.set_ylabel("MSE")
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def save_chemistry(times, blocks, path, species_names) -> None:
    """Concentration paths per species (rows) and scheme (columns).

    blocks = [(scheme label, (M, K, d) recorded states)].
    """
    d = blocks[0][1].shape[2]
    fig, axes = plt.subplots(d, len(blocks), figsize=(4.6 * len(blocks), 1.9 * d),
                             sharex=True, squeeze=False)
    for col, (label, states) in enumerate(blocks):
        for row in range(d):
            ax = axes[row][col]
            for traj in states[:10]:
                ax.plot(times, traj[:, row], lw=0.5, alpha=0.7)
            ax.axhline(0.0, color="black", lw=0.5)
            ax.set_ylabel(species_names[row], fontsize=8)
            if row == 0:
                ax.set_title(label, fontsize=10)
    for col in range(len(blocks)):
        axes[-1][col].set_xlabel("t")
    _finish(fig, path)


def save_drift(series, path, ylabel: str) -> None:
    """Log-log drift curves: series = [(label, SeriesReport)]."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, report in series:
        mask = report.times > 0
        ax.loglog(report.times[mask], np.maximum(report.values[mask], 1e-18), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    _finish(fig, path)


def save_longtime(reports, path) -> None:
    """Mean energy error against time with the 2 h^2 guide levels."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for h, report in reports:
        mask = report.times > 0
        (line,) = ax.loglog(report.times[mask], report.values[mask], label=f"h = {h:g}")
        ax.axhline(2.0 * h**2, color=line.get_color(), ls="--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("mean |Q - Q0|")
    ax.legend(frameon=False)
    _finish(fig, path)


def save_densities(blocks, path, truth: float) -> None:
    """Posterior densities per noise level: blocks = [(sigma, grid, {kind: values})]."""
    n = len(blocks)
    ncol = 2 if n > 1 else 1
    nrow = (n + ncol - 1) // ncol
    fig, axes = plt.subplots(nrow, ncol, figsize=(5.2 * ncol, 3.4 * nrow), squeeze=False)
    flat = axes.ravel()
    for ax, (sigma, grid, curves) in zip(flat, blocks):
        for kind, values in curves.items():
            ax.plot(grid, values, label=kind)
        ax.axvline(truth, color="black", ls="--", lw=0.8)
        ax.set_title(f"sigma = {sigma:g}", fontsize=10)
        ax.set_xlabel("theta")
        ax.set_ylabel("density")
        ax.legend(frameon=False, fontsize=8)
    for ax in flat[n:]:
        ax.set_axis_off()
    _finish(fig, path)


def save_chain_hist(samples, truth, path, names) -> None:
    """Marginal histograms of a chain with the true values marked."""
    d = samples.shape[1]
    fig, axes = plt.subplots(1, d, figsize=(3.2 * d, 3.0), squeeze=False)
    for j, ax in enumerate(axes[0]):
        ax.hist(samples[:, j], bins=60, density=True, color="tab:blue", alpha=0.8)
        ax.axvline(truth[j], color="black", ls="--", lw=0.8)
        ax.set_xlabel(names[j])
    axes[0][0].set_ylabel("density")
    _finish(fig, path)

"""Matplotlib figure rendering for fits, predictions, and prior draws.

Figures are written straight to files (Agg backend); the CLI exposes them
behind --plot / --out-dir flags next to the CSV outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gpr import GPModel, predict_y


def _grid_for(model: GPModel, pred_times=None, n: int = 300) -> np.ndarray:
    lo = float(np.min(model.X))
    hi = float(np.max(model.X))
    if pred_times is not None and len(pred_times):
        lo = min(lo, float(np.min(pred_times)))
        hi = max(hi, float(np.max(pred_times)))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    return np.linspace(lo - pad, hi + pad, n)


def _draw_fit(ax, model: GPModel, pred_times=None, ylabel: str = "value"):
    grid = _grid_for(model, pred_times)
    post = predict_y(model, grid)
    std = np.sqrt(post.variances)
    ax.fill_between(grid, post.means - 2 * std, post.means + 2 * std,
                    color="C0", alpha=0.2, lw=0, label="mean ± 2σ")
    ax.plot(grid, post.means, color="C0", lw=1.5, label="mean")
    ax.plot(model.X, model.y, "kx", ms=7, label="training")
    if pred_times is not None and len(pred_times):
        pp = predict_y(model, np.asarray(pred_times, dtype=float))
        ax.plot(pp.times, pp.means, "r+", ms=10, mew=1.8, label="prediction")
    ax.set_xlabel("time")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)


def fit_figure(path, models: dict, pred_times=None, title: str | None = None):
    """One panel per axis model showing data, posterior band, predictions."""
    fig, axes = plt.subplots(len(models), 1, figsize=(7, 3.2 * len(models)), squeeze=False)
    for ax, (axis, model) in zip(axes.ravel(), models.items()):
        _draw_fit(ax, model, pred_times, ylabel=axis)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def prediction_figure(path, preds, title: str | None = None):
    """Located predictions over time: lon and lat with ±2 std bands."""
    t = np.array([p.t for p in preds])
    fig, axes = plt.subplots(2, 1, figsize=(7, 6.4), sharex=True)
    for ax, axis in zip(axes, ("lon", "lat")):
        mean = np.array([getattr(p, f"{axis}_mean") for p in preds])
        std = np.array([getattr(p, f"{axis}_std") for p in preds])
        ax.fill_between(t, mean - 2 * std, mean + 2 * std, color="C0", alpha=0.2, lw=0)
        ax.plot(t, mean, "r+-", ms=9, mew=1.6, lw=0.8)
        ax.set_ylabel(axis)
    axes[-1].set_xlabel("time")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def samples_figure(path, times, samples, title: str | None = None):
    """Prior function draws, one line per sample."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for row in np.atleast_2d(samples):
        ax.plot(times, row, lw=1.0, alpha=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Figure rendering for evaluation artifacts.

Renders alongside the delimited outputs: per-horizon error curves, the node-wise
error map, and the training curve. All figures go to files (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import GridDomain

FIG_DPI = 120


def plot_horizon_errors(report: dict, out_path, baselines: dict | None = None) -> None:
    """MAE and RMSE against forecast horizon, with optional baseline MAE curves."""
    horizons = report["horizons_hours"]
    mae = [report["mae_c"][str(h)] for h in horizons]
    rmse = [report["rmse_c"][str(h)] for h in horizons]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(horizons, mae, marker="o", label="model MAE")
    ax.plot(horizons, rmse, marker="s", label="model RMSE")
    for name, entry in (baselines or {}).items():
        base = [entry["mae_c"][str(h)] for h in horizons]
        ax.plot(horizons, base, linestyle="--", marker=".", label=f"{name} MAE")
    ax.set_xlabel("forecast horizon (h)")
    ax.set_ylabel("error (°C)")
    ax.set_xticks(horizons)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)


def plot_node_map(nodewise_mae_c: np.ndarray, domain: GridDomain, out_path,
                  title: str = "node-wise MAE") -> None:
    grid = nodewise_mae_c.reshape(domain.n_lat, domain.n_lon)
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    image = ax.imshow(
        grid,
        origin="lower",
        extent=(domain.lon_min, domain.lon_max, domain.lat_min, domain.lat_max),
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(image, ax=ax, label="MAE (°C)")
    ax.set_xlabel("longitude (°)")
    ax.set_ylabel("latitude (°)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)


def plot_training_curve(train_mse: list[float], val_mse: list[float], out_path) -> None:
    epochs = np.arange(1, len(train_mse) + 1)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(epochs, train_mse, label="train MSE")
    ax.plot(epochs, val_mse, label="validation MSE")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (standardized)")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)

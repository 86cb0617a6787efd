"""Evaluation: per-horizon MAE/RMSE in degrees Celsius, node-wise error maps,
naive baselines (persistence, hour-of-day climatology), the random-weight control,
and report emission (JSON + CSV + portable graymap with a scale sidecar).

Predictions and targets enter in standardized units; errors are reported in
physical degrees Celsius (the Kelvin offset cancels in differences).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .graph import NormalizedAdjacency
from .grid import GridDomain, SampleIndex, Standardizer, hours_of_day
from .model import ModelConfig, init_params, predict_batches


@dataclass(frozen=True)
class EvalReport:
    horizons_hours: tuple[int, ...]
    mae_c: np.ndarray            # (K,)
    rmse_c: np.ndarray           # (K,)
    mean_mae_c: float
    nodewise_mae_c: np.ndarray   # (N,)
    samples_per_horizon: np.ndarray  # (K,) ints
    control: bool = False

    def to_dict(self) -> dict:
        return {
            "horizons_hours": list(self.horizons_hours),
            "mae_c": {str(h): float(v) for h, v in zip(self.horizons_hours, self.mae_c)},
            "rmse_c": {str(h): float(v) for h, v in zip(self.horizons_hours, self.rmse_c)},
            "mean_mae_c": float(self.mean_mae_c),
            "samples_per_horizon": {
                str(h): int(v) for h, v in zip(self.horizons_hours, self.samples_per_horizon)
            },
            "control": self.control,
        }


def _check_aligned(predictions: np.ndarray, targets: np.ndarray) -> None:
    if predictions.ndim != 3 or predictions.shape != targets.shape:
        raise ValidationError(
            f"predictions {predictions.shape} and targets {targets.shape} must both be (S, K, N)"
        )
    if predictions.shape[0] == 0:
        raise ValidationError("empty (no-sample) evaluation set")


def _errors_celsius(predictions: np.ndarray, targets: np.ndarray,
                    standardizer: Standardizer, t2m_index: int) -> np.ndarray:
    # De-standardize both sides; the mean and the Kelvin->Celsius offset cancel.
    return standardizer.invert_var(predictions, t2m_index) - standardizer.invert_var(
        targets, t2m_index
    )


def compute_metrics(predictions: np.ndarray, targets: np.ndarray,
                    standardizer: Standardizer, t2m_index: int,
                    horizons_hours: tuple[int, ...], control: bool = False) -> EvalReport:
    """Aggregate |error| and error^2 over samples x nodes per horizon, then average
    the per-horizon MAEs (unweighted) into the headline mean."""
    _check_aligned(predictions, targets)
    if predictions.shape[1] != len(horizons_hours):
        raise ValidationError("horizon axis does not match the horizon list")
    err = _errors_celsius(predictions, targets, standardizer, t2m_index)
    mae = np.abs(err).mean(axis=(0, 2))
    rmse = np.sqrt((err * err).mean(axis=(0, 2)))
    samples = np.full(len(horizons_hours), err.shape[0], dtype=np.int64)
    return EvalReport(
        horizons_hours=tuple(horizons_hours),
        mae_c=mae,
        rmse_c=rmse,
        mean_mae_c=float(mae.mean()),
        nodewise_mae_c=nodewise_mae(predictions, targets, standardizer, t2m_index),
        samples_per_horizon=samples,
        control=control,
    )


def nodewise_mae(predictions: np.ndarray, targets: np.ndarray,
                 standardizer: Standardizer, t2m_index: int) -> np.ndarray:
    """Mean |error| per node in degrees Celsius, over samples and horizons."""
    _check_aligned(predictions, targets)
    err = _errors_celsius(predictions, targets, standardizer, t2m_index)
    return np.abs(err).mean(axis=(0, 1))


def aligned_targets(target_values: np.ndarray, index: SampleIndex) -> np.ndarray:
    """(S, K, N) target tensor for the given anchors and horizons."""
    offsets = index.anchors[:, None] + np.asarray(index.horizons)[None, :]
    return target_values[offsets]


def persistence_baseline(target_values: np.ndarray, index: SampleIndex) -> np.ndarray:
    """Forecast = last observed target in the window, for every horizon.

    ``target_values`` is the (T, N) target field in the same units the metrics
    will receive (standardized in the standard pipeline).
    """
    last = target_values[index.anchors]  # (S, N)
    return np.repeat(last[:, None, :], len(index.horizons), axis=1)


def climatology_baseline(target_values: np.ndarray, timestamps: np.ndarray,
                         train_range: range, index: SampleIndex) -> np.ndarray:
    """Forecast = per-node mean for the target's hour of day, fit on train only."""
    if len(train_range) == 0:
        raise ValidationError("climatology needs a non-empty training range")
    hod = hours_of_day(timestamps)
    n = target_values.shape[1]
    sums = np.zeros((24, n))
    counts = np.zeros(24)
    train_hod = hod[train_range.start : train_range.stop]
    np.add.at(sums, train_hod, target_values[train_range.start : train_range.stop])
    np.add.at(counts, train_hod, 1.0)

    preds = np.empty((len(index.anchors), len(index.horizons), n))
    for k, h in enumerate(index.horizons):
        target_hod = hod[index.anchors + h]
        if (counts[target_hod] == 0).any():
            missing = int(target_hod[counts[target_hod] == 0][0])
            raise ValidationError(
                f"hour-of-day bucket {missing:02d}:00 is empty in the training range"
            )
        preds[:, k, :] = sums[target_hod] / counts[target_hod][:, None]
    return preds


def control_model_eval(features: np.ndarray, targets: np.ndarray,
                       adj: NormalizedAdjacency, index: SampleIndex,
                       model_config: ModelConfig, standardizer: Standardizer,
                       t2m_index: int, horizons_hours: tuple[int, ...],
                       seed: int, batch_size: int) -> EvalReport:
    """Evaluate a freshly initialized (untrained) model; the report is flagged."""
    params = init_params(model_config, seed)
    preds, targs = predict_batches(features, targets, index.anchors, adj, params,
                                   model_config, batch_size)
    return compute_metrics(preds, targs, standardizer, t2m_index, horizons_hours,
                           control=True)


def write_nodemap_csv(path, domain: GridDomain, nodewise_mae_c: np.ndarray) -> None:
    coords = domain.node_coords()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,lat,lon,mae_c\n")
        for node in range(domain.node_count):
            fh.write(
                f"{node},{coords[node, 0]!r},{coords[node, 1]!r},{nodewise_mae_c[node]!r}\n"
            )


def write_nodemap_pgm(path, domain: GridDomain, nodewise_mae_c: np.ndarray) -> None:
    """8-bit binary portable graymap, scaled to [min, max]; the sidecar written by
    :func:`write_scale_sidecar` records the scale. Top image row = northernmost."""
    grid = nodewise_mae_c.reshape(domain.n_lat, domain.n_lon)
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo
    if span > 0:
        pixels = np.round(255.0 * (grid - lo) / span).astype(np.uint8)
    else:
        pixels = np.zeros_like(grid, dtype=np.uint8)
    pixels = pixels[::-1]  # latitude ascending in memory; image rows go north->south
    with open(path, "wb") as fh:
        fh.write(f"P5\n{domain.n_lon} {domain.n_lat}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_scale_sidecar(path, nodewise_mae_c: np.ndarray, domain: GridDomain) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"min_c={float(nodewise_mae_c.min())!r}\n")
        fh.write(f"max_c={float(nodewise_mae_c.max())!r}\n")
        fh.write(f"rows={domain.n_lat}\n")
        fh.write(f"cols={domain.n_lon}\n")
        fh.write("row_order=north_to_south\n")

"""Experiment driver: run configuration, batching, the epoch loop with
validation-based model selection, and the tab-separated training log.

Run configs are flat ``key = value`` text files whose keys mirror
:class:`TrainConfig`; presets shipped under ``gridcast/presets`` encode the
standard per-region setups.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, fields, replace
from importlib import resources

import numpy as np

from .errors import ConfigError, NumericError, ValidationError
from .graph import NormalizedAdjacency
from .grid import SampleIndex, SplitSpec
from .model import (ModelConfig, ModelParams, Workspace, gather_samples, init_params,
                    loss_and_gradients, predict_batches)
from .numerics import AdamState, adam_step, clip_global_norm

log = logging.getLogger(__name__)

DEFAULT_HORIZONS_HOURS = (1, 6, 12, 18, 24, 36, 48)
GRAD_CLIP_NORM = 5.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    window_hours: int
    hidden_dim: int
    dist_km: float
    gcn_layers: int = 2
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    stride_hours: int = 1
    horizons_hours: tuple[int, ...] = DEFAULT_HORIZONS_HOURS
    split_mode: str = "ratio"
    train_frac: float = 0.70
    val_frac: float = 0.15
    train_end: str | None = None
    val_end: str | None = None

    def __post_init__(self) -> None:
        positive = {
            "learning_rate": self.learning_rate, "batch_size": self.batch_size,
            "window_hours": self.window_hours, "hidden_dim": self.hidden_dim,
            "dist_km": self.dist_km, "gcn_layers": self.gcn_layers,
            "max_epochs": self.max_epochs,
        }
        for key, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{key} must be positive, got {value!r}")
        if self.patience < 0:
            raise ConfigError(f"patience must be nonnegative, got {self.patience!r}")
        if self.stride_hours not in (1, 6):
            raise ConfigError(f"stride_hours must be 1 or 6, got {self.stride_hours!r}")
        hs = self.horizons_hours
        if not hs or any(h < 1 for h in hs) or list(hs) != sorted(set(hs)):
            raise ConfigError("horizons_hours must be positive, unique, and ascending")
        if self.stride_hours == 6 and 1 in hs:
            raise ConfigError("horizon 1 cannot be combined with a 6-hour stride")
        for h in hs:
            if h % self.stride_hours:
                raise ConfigError(f"horizon {h} h is not a multiple of the {self.stride_hours} h stride")
        if self.window_hours % self.stride_hours:
            raise ConfigError("window_hours must be a multiple of the stride")
        if self.split_mode not in ("ratio", "manual"):
            raise ConfigError(f"split_mode must be 'ratio' or 'manual', got {self.split_mode!r}")
        if self.split_mode == "manual" and (self.train_end is None or self.val_end is None):
            raise ConfigError("manual split requires train_end and val_end timestamps")
        if not (0 < self.train_frac < 1 and 0 < self.val_frac < 1
                and self.train_frac + 2 * self.val_frac <= 1 + 1e-9):
            raise ConfigError("split fractions out of range")

    @property
    def window_steps(self) -> int:
        return self.window_hours // self.stride_hours

    @property
    def horizons_steps(self) -> tuple[int, ...]:
        return tuple(h // self.stride_hours for h in self.horizons_hours)

    def model_config(self, n_features: int) -> ModelConfig:
        return ModelConfig(
            n_features=n_features, hidden_dim=self.hidden_dim, n_layers=self.gcn_layers,
            window_steps=self.window_steps, horizons_steps=self.horizons_steps,
        )

    def split_spec(self) -> SplitSpec:
        if self.split_mode == "manual":
            return SplitSpec(
                mode="manual",
                train_end=np.datetime64(self.train_end, "s"),
                val_end=np.datetime64(self.val_end, "s"),
            )
        test_frac = 1.0 - self.train_frac - self.val_frac
        return SplitSpec(mode="ratio", fractions=(self.train_frac, self.val_frac, test_frac))


_REQUIRED_KEYS = ("learning_rate", "batch_size", "window_hours", "hidden_dim", "dist_km")

_PARSERS = {
    "learning_rate": float, "batch_size": int, "window_hours": int, "hidden_dim": int,
    "dist_km": float, "gcn_layers": int, "max_epochs": int, "patience": int,
    "seed": int, "stride_hours": int,
    "horizons_hours": lambda s: tuple(int(x) for x in s.split(",")),
    "split_mode": str, "train_frac": float, "val_frac": float,
    "train_end": str, "val_end": str,
}


def load_run_config(path) -> TrainConfig:
    """Parse and validate a flat key = value run configuration."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
    kwargs = {}
    for key, value in raw.items():
        try:
            kwargs[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {value!r}") from exc
    return TrainConfig(**kwargs)


def preset_path(name: str):
    """Filesystem path of a shipped run-config preset (e.g. ``region_c``)."""
    candidate = resources.files("gridcast").joinpath("presets", f"{name}.cfg")
    if not candidate.is_file():
        raise ConfigError(f"no shipped preset named {name!r}")
    return candidate


@dataclass
class TrainHistory:
    train_mse: list[float]
    val_mse: list[float]
    selected_epoch: int
    epoch_seconds: list[float]


class EarlyStopper:
    """Track the best validation loss; stop after ``patience`` non-improving epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = -1
        self.since_best = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.since_best = 0
            return False
        self.since_best += 1
        return self.since_best > self.patience


def run_training(features: np.ndarray, targets: np.ndarray, adj: NormalizedAdjacency,
                 train_index: SampleIndex, val_index: SampleIndex,
                 config: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Seeded mini-batch training with Adam, returning the best-validation params.

    ``features`` is the standardized (T, N, F) tensor and ``targets`` the
    standardized (T, N) target field. Only the train and validation anchors are
    accepted, so the held-out range cannot leak in.
    """
    model_config = config.model_config(features.shape[-1])
    params = init_params(model_config, config.seed)
    state = AdamState.for_params(params.arrays(), config.learning_rate)
    stopper = EarlyStopper(config.patience)
    history = TrainHistory(train_mse=[], val_mse=[], selected_epoch=-1, epoch_seconds=[])
    best_params = params.copy()
    anchors = train_index.anchors
    workspace = Workspace()

    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])  # per-epoch derived seed
        order = rng.permutation(len(anchors))
        sq_sum = 0.0
        count = 0
        for lo in range(0, len(order), config.batch_size):
            batch_anchors = anchors[order[lo : lo + config.batch_size]]
            x, y = gather_samples(features, targets, batch_anchors,
                                  model_config.window_steps, model_config.horizons_steps)
            try:
                loss, grads = loss_and_gradients(x, y, adj, params, model_config,
                                                 workspace=workspace)
            except NumericError as exc:
                raise NumericError(
                    f"training diverged at epoch {epoch + 1}, batch {lo // config.batch_size + 1}: {exc}"
                ) from exc
            grad_arrays = grads.arrays()
            clip_global_norm(grad_arrays, GRAD_CLIP_NORM)
            adam_step(params.arrays(), grad_arrays, state)
            n_vals = y.size
            sq_sum += loss * n_vals
            count += n_vals

        val_mse = evaluate_mse(features, targets, val_index.anchors, adj, params,
                               model_config, config.batch_size, workspace=workspace)
        history.train_mse.append(sq_sum / count)
        history.val_mse.append(val_mse)
        history.epoch_seconds.append(time.perf_counter() - started)
        improved = val_mse < stopper.best
        stop = stopper.update(epoch, val_mse)
        if improved:
            best_params = params.copy()
        log.info("epoch %d: train %.6f val %.6f", epoch + 1, history.train_mse[-1], val_mse)
        if stop:
            break

    history.selected_epoch = stopper.best_epoch
    return best_params, history


def evaluate_mse(features: np.ndarray, targets: np.ndarray, anchors: np.ndarray,
                 adj: NormalizedAdjacency, params: ModelParams, model_config: ModelConfig,
                 batch_size: int, workspace: Workspace | None = None) -> float:
    preds, targs = predict_batches(features, targets, anchors, adj, params,
                                   model_config, batch_size, workspace=workspace)
    diff = preds - targs
    return float(np.mean(diff * diff))


def write_training_log(path, history: TrainHistory) -> None:
    """One tab-separated line per epoch: epoch, train MSE, val MSE, seconds."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, (tr, va, sec) in enumerate(
            zip(history.train_mse, history.val_mse, history.epoch_seconds), start=1
        ):
            fh.write(f"{i}\t{tr!r}\t{va!r}\t{sec:.3f}\n")

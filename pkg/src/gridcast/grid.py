"""Gridded dataset model.

Holds the domain geometry, the (T x N x F) dataset container with its missing-value
mask, neighbor-mean fill, train-set standardization, chronological splitting, and
sliding-window sample enumeration. Node indices are row-major: latitude ascending,
then longitude ascending, so node = i_lat * n_lon + i_lon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError

# Known variable abbreviations -> (unit, static over time).
VARIABLE_CATALOG: dict[str, tuple[str, bool]] = {
    "t2m": ("K", False),
    "d2m": ("K", False),
    "u10": ("m/s", False),
    "v10": ("m/s", False),
    "sp": ("Pa", False),
    "orog": ("m", True),
}

TARGET_VARIABLE = "t2m"
KELVIN_OFFSET = 273.15
# Sanity bounds for non-missing 2-meter temperature, in Kelvin.
T2M_RANGE_K = (180.0, 340.0)
# Floor applied to stored standard deviations so constant variables stay invertible.
STD_FLOOR = 1e-8
SECONDS_PER_HOUR = 3600


@dataclass(frozen=True)
class GridDomain:
    """Bounding box plus grid shape; maps node index <-> (lat, lon)."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    n_lat: int
    n_lon: int

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max):
            raise ValidationError("domain requires lat_min < lat_max")
        if not (self.lon_min < self.lon_max):
            raise ValidationError("domain requires lon_min < lon_max")
        if self.n_lat < 2 or self.n_lon < 2:
            raise ValidationError("domain requires n_lat >= 2 and n_lon >= 2")

    @property
    def node_count(self) -> int:
        return self.n_lat * self.n_lon

    def latitudes(self) -> np.ndarray:
        return np.linspace(self.lat_min, self.lat_max, self.n_lat)

    def longitudes(self) -> np.ndarray:
        return np.linspace(self.lon_min, self.lon_max, self.n_lon)

    def node_latlon(self, node: int) -> tuple[float, float]:
        if not 0 <= node < self.node_count:
            raise ValidationError(f"node index {node} outside [0, {self.node_count})")
        i_lat, i_lon = divmod(node, self.n_lon)
        return float(self.latitudes()[i_lat]), float(self.longitudes()[i_lon])

    def node_index(self, i_lat: int, i_lon: int) -> int:
        if not (0 <= i_lat < self.n_lat and 0 <= i_lon < self.n_lon):
            raise ValidationError(f"grid position ({i_lat}, {i_lon}) outside the domain")
        return i_lat * self.n_lon + i_lon

    def node_coords(self) -> np.ndarray:
        """(N, 2) array of (lat, lon) per node, in node-index order."""
        lat = np.repeat(self.latitudes(), self.n_lon)
        lon = np.tile(self.longitudes(), self.n_lat)
        return np.column_stack([lat, lon])


@dataclass(frozen=True)
class VariableSpec:
    abbreviation: str
    unit: str
    is_static: bool

    @classmethod
    def from_catalog(cls, abbreviation: str) -> "VariableSpec":
        try:
            unit, is_static = VARIABLE_CATALOG[abbreviation]
        except KeyError:
            raise ValidationError(f"unknown variable abbreviation {abbreviation!r}") from None
        return cls(abbreviation, unit, is_static)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable (T x N x F) record of gridded values with a missing-value mask.

    Timestamps are datetime64[s], strictly increasing with a constant stride of
    ``stride_hours``. Values at masked cells are not meaningful (loaders store NaN).
    """

    domain: GridDomain
    variables: tuple[VariableSpec, ...]
    timestamps: np.ndarray
    stride_hours: int
    values: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self) -> None:
        names = [v.abbreviation for v in self.variables]
        if len(set(names)) != len(names):
            raise ValidationError("variable abbreviations must be unique")
        if TARGET_VARIABLE not in names:
            raise ValidationError(f"dataset must include the target variable {TARGET_VARIABLE!r}")
        t = len(self.timestamps)
        if t < 1:
            raise ValidationError("dataset needs at least one timestep")
        n = self.domain.node_count
        f = len(self.variables)
        if self.values.shape != (t, n, f):
            raise ValidationError(
                f"values shape {self.values.shape} does not match (T={t}, N={n}, F={f})"
            )
        if self.missing_mask.shape != self.values.shape or self.missing_mask.dtype != bool:
            raise ValidationError("missing_mask must be boolean and shaped like values")
        if self.stride_hours < 1:
            raise ValidationError("stride must be at least one hour")
        step = np.timedelta64(self.stride_hours * SECONDS_PER_HOUR, "s")
        if t > 1:
            deltas = np.diff(self.timestamps)
            if not (deltas == step).all():
                raise ValidationError("non-constant stride: timestamps must advance uniformly")
        observed = ~self.missing_mask
        if not np.isfinite(self.values[observed]).all():
            raise ValidationError("non-finite value outside the missing mask")
        t2m = self.values[:, :, names.index(TARGET_VARIABLE)]
        t2m_obs = t2m[observed[:, :, names.index(TARGET_VARIABLE)]]
        lo, hi = T2M_RANGE_K
        if t2m_obs.size and (t2m_obs.min() < lo or t2m_obs.max() > hi):
            raise ValidationError(f"t2m outside the sanity range [{lo}, {hi}] K")
        _readonly(self.values)
        _readonly(self.missing_mask)
        _readonly(self.timestamps)

    @property
    def n_steps(self) -> int:
        return len(self.timestamps)

    @property
    def node_count(self) -> int:
        return self.domain.node_count

    @property
    def n_features(self) -> int:
        return len(self.variables)

    def var_index(self, abbreviation: str) -> int:
        for i, v in enumerate(self.variables):
            if v.abbreviation == abbreviation:
                return i
        raise ValidationError(f"variable {abbreviation!r} not in dataset")

    @property
    def t2m_index(self) -> int:
        return self.var_index(TARGET_VARIABLE)

    def with_values(self, values: np.ndarray, missing_mask: np.ndarray) -> "Dataset":
        return replace(self, values=values, missing_mask=missing_mask)


def fill_missing(dataset: Dataset, graph) -> Dataset:
    """Replace every missing cell by the mean of its non-missing graph neighbors.

    Fallbacks, in order: the timestep's variable mean over observed nodes, then the
    variable's global mean. Returns a dataset with an all-false mask; applying the
    fill twice is a no-op.
    """
    if graph.node_count != dataset.node_count:
        raise ValidationError("graph and dataset cover different node sets")
    mask = dataset.missing_mask
    if not mask.any():
        return dataset
    values = dataset.values
    observed = ~mask
    fully_missing = ~observed.any(axis=(0, 1))
    if fully_missing.any():
        bad = dataset.variables[int(np.argmax(fully_missing))].abbreviation
        raise ValidationError(f"variable {bad!r} has no observed values; cannot fill")

    t, n, f = values.shape
    zeroed = np.where(mask, 0.0, values)
    counts = observed.astype(np.float64)
    adj = graph.adjacency_csr()  # binary, no self-loops

    # Neighbor sums/counts for all timesteps at once: fold (T, F) into columns.
    cols = zeroed.transpose(1, 0, 2).reshape(n, t * f)
    nbr_sum = (adj @ cols).reshape(n, t, f).transpose(1, 0, 2)
    cols = counts.transpose(1, 0, 2).reshape(n, t * f)
    nbr_cnt = (adj @ cols).reshape(n, t, f).transpose(1, 0, 2)

    step_sum = zeroed.sum(axis=1)  # (T, F)
    step_cnt = counts.sum(axis=1)
    global_mean = zeroed.sum(axis=(0, 1)) / counts.sum(axis=(0, 1))  # (F,)

    with np.errstate(invalid="ignore", divide="ignore"):
        nbr_mean = nbr_sum / nbr_cnt
        step_mean = step_sum / step_cnt
    fallback = np.where(step_cnt > 0, step_mean, global_mean)  # (T, F)
    fill = np.where(nbr_cnt > 0, nbr_mean, fallback[:, None, :])

    out = values.copy()
    out[mask] = fill[mask]
    return dataset.with_values(out, np.zeros_like(mask))


@dataclass(frozen=True)
class Standardizer:
    """Per-variable zero-mean/unit-variance scaling fit on the training range.

    Uses the population standard deviation (divide by count), floored at
    ``STD_FLOOR`` so constant variables stay invertible.
    """

    mean: np.ndarray
    std: np.ndarray

    convention = "population"

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValidationError("standardizer mean/std must be matching 1-d arrays")
        if (self.std < STD_FLOOR).any():
            raise ValidationError(f"standard deviations must be floored at {STD_FLOOR}")
        _readonly(self.mean)
        _readonly(self.std)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def apply_var(self, values: np.ndarray, index: int) -> np.ndarray:
        return (values - self.mean[index]) / self.std[index]

    def invert_var(self, values: np.ndarray, index: int) -> np.ndarray:
        return values * self.std[index] + self.mean[index]


def fit_standardizer_array(values: np.ndarray, train_range: range) -> Standardizer:
    """Fit on ``values[train_range]``; values shaped (T, N, F)."""
    if len(train_range) == 0:
        raise ValidationError("cannot fit a standardizer on an empty training range")
    block = values[train_range.start : train_range.stop].reshape(-1, values.shape[-1])
    mean = block.mean(axis=0)
    std = np.maximum(block.std(axis=0), STD_FLOOR)  # population (ddof=0)
    return Standardizer(mean=mean, std=std)


def fit_standardizer(dataset: Dataset, splits: "Splits") -> Standardizer:
    if dataset.missing_mask.any():
        raise ValidationError("fill_missing must run before fitting a standardizer")
    return fit_standardizer_array(dataset.values, splits.train)


@dataclass(frozen=True)
class SplitSpec:
    """How to carve the record into chronological train/val/test ranges.

    ``ratio`` mode uses fractions of T (train gets floor(f_train * T), val gets
    floor(f_val * T), test the remainder; one sample moves test -> val if the two
    tail fractions are equal and test would exceed val + 1). ``manual`` mode cuts at
    two timestamps: train ends at ``train_end``, validation at ``val_end``.
    """

    mode: str = "ratio"
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    train_end: np.datetime64 | None = None
    val_end: np.datetime64 | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("ratio", "manual"):
            raise ValidationError(f"unknown split mode {self.mode!r}")
        if self.mode == "ratio":
            if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
                raise ValidationError("ratio split needs three positive fractions")
            if abs(sum(self.fractions) - 1.0) > 1e-9:
                raise ValidationError("ratio split fractions must sum to 1")
        else:
            if self.train_end is None or self.val_end is None:
                raise ValidationError("manual split needs train_end and val_end timestamps")
            if not self.train_end < self.val_end:
                raise ValidationError("manual split needs train_end < val_end")


@dataclass(frozen=True)
class Splits:
    """Resolved index ranges: contiguous, chronological, disjoint, exhaustive."""

    train: range
    val: range
    test: range

    def __post_init__(self) -> None:
        if not (self.train.stop == self.val.start and self.val.stop == self.test.start):
            raise ValidationError("split ranges must be contiguous and chronological")
        if self.train.start != 0:
            raise ValidationError("train range must start at 0")
        if min(len(self.train), len(self.val), len(self.test)) == 0:
            raise ValidationError("empty resulting split")


def _ratio_counts(n_steps: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    # The 1e-9 nudge restores real-arithmetic floor semantics when f * T lands
    # epsilon below an integer (e.g. 0.7 * 10).
    n_train = math.floor(fractions[0] * n_steps + 1e-9)
    n_val = math.floor(fractions[1] * n_steps + 1e-9)
    n_test = n_steps - n_train - n_val
    if fractions[1] == fractions[2]:
        while n_test > n_val + 1:
            n_val += 1
            n_test -= 1
    return n_train, n_val, n_test


def split_series(timestamps: np.ndarray, spec: SplitSpec) -> Splits:
    """Resolve a SplitSpec against a timestamp record."""
    t = len(timestamps)
    if spec.mode == "ratio":
        n_train, n_val, n_test = _ratio_counts(t, spec.fractions)
        if min(n_train, n_val, n_test) < 1:
            raise ValidationError(f"record of {t} steps is too short for a ratio split")
        a, b = n_train, n_train + n_val
    else:
        if not (timestamps[0] < spec.train_end <= timestamps[-1]
                and timestamps[0] < spec.val_end <= timestamps[-1]):
            raise ValidationError("manual split boundary outside the record")
        a = int(np.searchsorted(timestamps, spec.train_end, side="left"))
        b = int(np.searchsorted(timestamps, spec.val_end, side="left"))
    return Splits(train=range(0, a), val=range(a, b), test=range(b, t))


def split_dataset(dataset: Dataset, spec: SplitSpec) -> Splits:
    return split_series(dataset.timestamps, spec)


@dataclass(frozen=True)
class SampleIndex:
    """Valid forecast anchors within one split.

    For anchor t, the input window covers [t - W + 1, t] and targets sit at
    t + h for each horizon h; both must stay inside the split.
    """

    window: int
    horizons: tuple[int, ...]
    anchors: np.ndarray
    split: range

    def __post_init__(self) -> None:
        _readonly(self.anchors)

    def __len__(self) -> int:
        return len(self.anchors)


def make_windows(split: range, window: int, horizons: Sequence[int]) -> SampleIndex:
    """Enumerate every anchor whose window and targets fit inside ``split``."""
    if window < 1:
        raise ValidationError("window must be at least one timestep")
    hs = tuple(int(h) for h in horizons)
    if not hs or any(h < 1 for h in hs) or list(hs) != sorted(set(hs)):
        raise ValidationError("horizons must be positive, unique, and sorted ascending")
    max_h = hs[-1]
    first = split.start + window - 1
    last = split.stop - 1 - max_h
    if last < first:
        raise ValidationError(
            f"split of length {len(split)} cannot fit window {window} plus horizon {max_h}"
        )
    anchors = np.arange(first, last + 1, dtype=np.int64)
    return SampleIndex(window=window, horizons=hs, anchors=anchors, split=split)


def hours_of_day(timestamps: np.ndarray) -> np.ndarray:
    """Hour-of-day (0..23) for each timestamp."""
    return (timestamps.astype("datetime64[h]").astype(np.int64)) % 24

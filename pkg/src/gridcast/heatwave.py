"""Heatwave post-processing on daily-maximum temperature series.

Definitions vary by jurisdiction, so the rule is a configurable object: an event
is a maximal run of at least ``min_days`` consecutive days whose daily maximum
exceeds a threshold, either absolute (degrees Celsius) or a percentile of a
reference period (computed per node).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import Dataset, KELVIN_OFFSET


@dataclass(frozen=True)
class HeatwaveDefinition:
    mode: str  # "absolute" | "percentile"
    min_days: int
    threshold_c: float | None = None
    percentile: float | None = None
    daily_statistic: str = "daily-max"

    def __post_init__(self) -> None:
        if self.mode not in ("absolute", "percentile"):
            raise ValidationError(f"unknown heatwave mode {self.mode!r}")
        if self.min_days < 1:
            raise ValidationError("min_days must be at least 1")
        if self.mode == "absolute" and self.threshold_c is None:
            raise ValidationError("absolute mode needs threshold_c")
        if self.mode == "percentile":
            if self.percentile is None or not 0.0 < self.percentile < 100.0:
                raise ValidationError("percentile must lie in (0, 100)")
        if self.daily_statistic != "daily-max":
            raise ValidationError(f"unsupported daily statistic {self.daily_statistic!r}")


@dataclass(frozen=True)
class HeatwaveEvent:
    node: int
    start_day: int
    length_days: int
    peak_c: float


def detect_heatwaves(daily_max_c: np.ndarray, definition: HeatwaveDefinition,
                     reference_c: np.ndarray | None = None) -> list[HeatwaveEvent]:
    """Maximal runs of >= min_days days with the daily max above the threshold.

    ``daily_max_c`` is (days, nodes). Percentile mode derives one threshold per
    node from ``reference_c`` (same layout), which must be provided and non-empty.
    Events are returned sorted by (node, start_day); runs never overlap per node
    and cannot be extended in either direction.
    """
    if daily_max_c.ndim != 2:
        raise ValidationError("daily series must be (days, nodes)")
    days, nodes = daily_max_c.shape
    if days < definition.min_days:
        raise ValidationError(
            f"series of {days} days is shorter than min_days={definition.min_days}"
        )
    if definition.mode == "absolute":
        thresholds = np.full(nodes, float(definition.threshold_c))
    else:
        if reference_c is None or reference_c.size == 0:
            raise ValidationError("percentile mode needs a non-empty reference period")
        if reference_c.ndim != 2 or reference_c.shape[1] != nodes:
            raise ValidationError("reference period must cover the same nodes")
        thresholds = np.percentile(reference_c, definition.percentile, axis=0)

    events: list[HeatwaveEvent] = []
    exceed = daily_max_c > thresholds[None, :]
    for node in range(nodes):
        col = exceed[:, node]
        day = 0
        while day < days:
            if not col[day]:
                day += 1
                continue
            start = day
            while day < days and col[day]:
                day += 1
            length = day - start
            if length >= definition.min_days:
                peak = float(daily_max_c[start:day, node].max())
                events.append(HeatwaveEvent(node, start, length, peak))
    return events


def daily_max_series(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-node daily maxima in Celsius plus each day's starting date.

    Requires the stride to divide 24 h; a trailing partial day is dropped.
    """
    if 24 % dataset.stride_hours:
        raise ValidationError("daily aggregation needs a stride dividing 24 hours")
    if dataset.missing_mask.any():
        raise ValidationError("fill_missing must run before daily aggregation")
    steps = 24 // dataset.stride_hours
    n_days = dataset.n_steps // steps
    if n_days < 1:
        raise ValidationError("record shorter than one day")
    t2m = dataset.values[: n_days * steps, :, dataset.t2m_index] - KELVIN_OFFSET
    daily = t2m.reshape(n_days, steps, dataset.node_count).max(axis=1)
    dates = dataset.timestamps[: n_days * steps : steps].astype("datetime64[D]")
    return daily, dates


def write_events_csv(path, events: list[HeatwaveEvent], dates: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,start_date,length_days,peak_c\n")
        for ev in events:
            fh.write(f"{ev.node},{dates[ev.start_day]},{ev.length_days},{ev.peak_c!r}\n")

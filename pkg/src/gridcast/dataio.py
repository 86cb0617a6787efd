"""Dataset readers and writers.

Two formats carry the same (T x N x F) record:

* csv: three header lines (`#domain ...`, `#stride_hours k`, `#vars a,b,...`), then
  one row per (timestamp, node) holding an ISO-8601 timestamp, the node index, and
  F comma-separated values. An empty field marks a missing value.
* binary: magic ``GCD1``, little-endian header (domain, stride, start time, T, F,
  variable table), then the full float64 array in C order with quiet NaN marking
  missing values. Binary round-trips are bit-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataFormatError, ValidationError
from .grid import Dataset, GridDomain, SECONDS_PER_HOUR, VariableSpec

BINARY_MAGIC = b"GCD1"
_HEAD = struct.Struct("<4d2IIqII")  # bbox, n_lat, n_lon, stride, t0, T, F


def _iso(ts: np.datetime64) -> str:
    return np.datetime_as_string(ts.astype("datetime64[s]"), unit="s")


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(dataset: Dataset, path, format: str) -> None:
    if format == "csv":
        _save_csv(dataset, path)
    elif format == "binary":
        _save_binary(dataset, path)
    else:
        raise ValidationError(f"unknown dataset format {format!r}")


def load_dataset(path, format: str) -> Dataset:
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise ValidationError(f"unknown dataset format {format!r}")


def sniff_format(path) -> str:
    """Pick csv vs binary by the leading magic bytes."""
    with open(path, "rb") as fh:
        return "binary" if fh.read(4) == BINARY_MAGIC else "csv"


def _save_csv(dataset: Dataset, path) -> None:
    d = dataset.domain
    names = ",".join(v.abbreviation for v in dataset.variables)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"#domain {_fmt(d.lat_min)} {_fmt(d.lat_max)} {_fmt(d.lon_min)} "
            f"{_fmt(d.lon_max)} {d.n_lat} {d.n_lon}\n"
        )
        fh.write(f"#stride_hours {dataset.stride_hours}\n")
        fh.write(f"#vars {names}\n")
        for t in range(dataset.n_steps):
            stamp = _iso(dataset.timestamps[t])
            for node in range(dataset.node_count):
                fields = [
                    "" if dataset.missing_mask[t, node, f] else _fmt(dataset.values[t, node, f])
                    for f in range(dataset.n_features)
                ]
                fh.write(f"{stamp},{node}," + ",".join(fields) + "\n")


def _load_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 4:
        raise DataFormatError(f"{path}: truncated csv dataset")
    try:
        head = lines[0].split()
        if head[0] != "#domain" or len(head) != 7:
            raise ValueError
        domain = GridDomain(
            lat_min=float(head[1]), lat_max=float(head[2]),
            lon_min=float(head[3]), lon_max=float(head[4]),
            n_lat=int(head[5]), n_lon=int(head[6]),
        )
        stride_parts = lines[1].split()
        if stride_parts[0] != "#stride_hours" or len(stride_parts) != 2:
            raise ValueError
        stride_hours = int(stride_parts[1])
        if not lines[2].startswith("#vars "):
            raise ValueError
        names = lines[2][len("#vars "):].split(",")
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: malformed header") from exc

    variables = tuple(VariableSpec.from_catalog(n.strip()) for n in names)
    n = domain.node_count
    f = len(variables)

    stamps: list[str] = []
    stamp_index: dict[str, int] = {}
    rows: list[tuple[int, int, list[str]]] = []
    for lineno, line in enumerate(lines[3:], start=4):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2 + f:
            raise DataFormatError(f"{path}:{lineno}: expected {2 + f} fields, got {len(parts)}")
        stamp, node_s = parts[0], parts[1]
        if stamp not in stamp_index:
            stamp_index[stamp] = len(stamps)
            stamps.append(stamp)
        try:
            node = int(node_s)
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad node index {node_s!r}") from exc
        if not 0 <= node < n:
            raise DataFormatError(
                f"{path}:{lineno}: node {node} outside the {n}-node domain"
            )
        rows.append((stamp_index[stamp], node, parts[2:]))

    try:
        timestamps = np.array([np.datetime64(s, "s") for s in stamps])
    except ValueError as exc:
        raise DataFormatError(f"{path}: unparseable timestamp") from exc
    order = np.argsort(timestamps, kind="stable")
    if len(np.unique(timestamps)) != len(timestamps):
        raise DataFormatError(f"{path}: duplicate timestamp")
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))

    t = len(timestamps)
    values = np.full((t, n, f), np.nan)
    mask = np.ones((t, n, f), dtype=bool)
    seen = np.zeros((t, n), dtype=bool)
    for raw_t, node, fields in rows:
        ti = remap[raw_t]
        if seen[ti, node]:
            raise DataFormatError(f"{path}: duplicate row for ({stamps[raw_t]}, node {node})")
        seen[ti, node] = True
        for fi, field in enumerate(fields):
            if field == "":
                continue
            try:
                values[ti, node, fi] = float(field)
            except ValueError as exc:
                raise DataFormatError(f"{path}: bad value {field!r}") from exc
            mask[ti, node, fi] = False
    if not seen.all():
        ti, node = np.argwhere(~seen)[0]
        raise DataFormatError(
            f"{path}: missing row for ({_iso(timestamps[ti])}, node {node})"
        )
    return Dataset(
        domain=domain,
        variables=variables,
        timestamps=timestamps[order],
        stride_hours=stride_hours,
        values=values,
        missing_mask=mask,
    )


def _save_binary(dataset: Dataset, path) -> None:
    d = dataset.domain
    t0 = int(dataset.timestamps[0].astype("datetime64[s]").astype(np.int64))
    payload = np.where(dataset.missing_mask, np.nan, dataset.values)
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(_HEAD.pack(
            d.lat_min, d.lat_max, d.lon_min, d.lon_max,
            d.n_lat, d.n_lon, dataset.stride_hours, t0,
            dataset.n_steps, dataset.n_features,
        ))
        for v in dataset.variables:
            for text in (v.abbreviation, v.unit):
                raw = text.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
            fh.write(struct.pack("<B", int(v.is_static)))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def _load_binary(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != BINARY_MAGIC:
        raise DataFormatError(f"{path}: not a {BINARY_MAGIC.decode()} dataset")
    off = 4
    try:
        (lat_min, lat_max, lon_min, lon_max, n_lat, n_lon,
         stride_hours, t0, t, f) = _HEAD.unpack_from(blob, off)
        off += _HEAD.size
        variables = []
        for _ in range(f):
            texts = []
            for _ in range(2):
                (ln,) = struct.unpack_from("<H", blob, off)
                off += 2
                texts.append(blob[off:off + ln].decode("utf-8"))
                off += ln
            (is_static,) = struct.unpack_from("<B", blob, off)
            off += 1
            variables.append(VariableSpec(texts[0], texts[1], bool(is_static)))
    except (struct.error, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: malformed header") from exc
    for spec in variables:
        VariableSpec.from_catalog(spec.abbreviation)  # reject unknown abbreviations
    domain = GridDomain(lat_min, lat_max, lon_min, lon_max, n_lat, n_lon)
    n = domain.node_count
    expected = t * n * f * 8
    if len(blob) - off != expected:
        raise DataFormatError(
            f"{path}: payload holds {len(blob) - off} bytes, expected {expected}"
        )
    values = np.frombuffer(blob, dtype="<f8", count=t * n * f, offset=off)
    values = values.reshape(t, n, f).astype(np.float64)
    mask = np.isnan(values)
    timestamps = (
        np.datetime64(int(t0), "s")
        + np.arange(t, dtype=np.int64) * np.timedelta64(stride_hours * SECONDS_PER_HOUR, "s")
    )
    return Dataset(
        domain=domain,
        variables=tuple(variables),
        timestamps=timestamps,
        stride_hours=stride_hours,
        values=values,
        missing_mask=mask,
    )

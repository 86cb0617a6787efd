"""Alternate input pathway: observations rendered as text, encoded to 768-d
vectors by a pluggable encoder, reduced with from-scratch PCA (fit on train
rows only), and standardized into node features for the same forecasting model.

Two encoders ship: a deterministic hashing stub that needs no external model,
and a file importer for vectors produced elsewhere, keyed by (timestep, node).
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .errors import DataFormatError, ValidationError
from .grid import (Dataset, GridDomain, SECONDS_PER_HOUR, Splits,
                   fit_standardizer_array)

log = logging.getLogger(__name__)

EMBEDDING_DIM = 768
EMBEDDING_MAGIC = b"GEMB1"
FEATURES_MAGIC = b"GFEA1"

TEXT_TEMPLATE = (
    "temperature is {t2m:.1f} K, dew point is {d2m:.1f} K, "
    "u wind component is {u10:.1f} m/s, v wind component is {v10:.1f} m/s, "
    "surface pressure is {sp:.0f} Pa, elevation is {orog:.1f} meters."
)
_TEMPLATE_FIELDS = ("t2m", "d2m", "u10", "v10", "sp", "orog")


def textualize(record: Mapping[str, float]) -> str:
    """Render one (timestamp, node) observation as its fixed text paragraph.

    Formatting is deterministic and locale-independent; all six variables must
    be present (run the fill first).
    """
    missing = [name for name in _TEMPLATE_FIELDS if name not in record]
    if missing:
        raise ValidationError(f"record is missing variables: {', '.join(missing)}")
    values = {name: float(record[name]) for name in _TEMPLATE_FIELDS}
    if not all(np.isfinite(v) for v in values.values()):
        raise ValidationError("record contains non-finite values")
    return TEXT_TEMPLATE.format(**values)


class Encoder(Protocol):
    def embed_record(self, t_index: int, node_index: int, text: str) -> np.ndarray: ...


class StubEncoder:
    """Seeded hash of token n-grams into 768 signed bins, unit-normalized.

    Deterministic, sensitive to any digit change, and requires no external
    model. n-gram signatures are cached across records (texts share most tokens).
    """

    def __init__(self, seed: int = 0, dim: int = EMBEDDING_DIM):
        self.seed = seed
        self.dim = dim
        self._key = int(seed).to_bytes(16, "little", signed=True)
        self._cache: dict[str, tuple[int, float]] = {}

    def _signature(self, ngram: str) -> tuple[int, float]:
        hit = self._cache.get(ngram)
        if hit is None:
            digest = hashlib.blake2b(ngram.encode("utf-8"), digest_size=8,
                                     key=self._key).digest()
            value = int.from_bytes(digest, "little")
            hit = (value % self.dim, 1.0 if value >> 63 == 0 else -1.0)
            self._cache[ngram] = hit
        return hit

    def embed_text(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            raise ValidationError("cannot encode empty text")
        vec = np.zeros(self.dim)
        for n in (1, 2, 3):
            for i in range(len(tokens) - n + 1):
                bin_index, sign = self._signature(" ".join(tokens[i : i + n]))
                vec[bin_index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValidationError("degenerate text hashed to the zero vector")
        return vec / norm

    def embed_record(self, t_index: int, node_index: int, text: str) -> np.ndarray:
        return self.embed_text(text)


class FileEncoder:
    """Precomputed vectors keyed by (timestep index, node index)."""

    def __init__(self, path):
        self.vectors = load_embeddings(path)

    def embed_record(self, t_index: int, node_index: int, text: str) -> np.ndarray:
        try:
            return self.vectors[(t_index, node_index)]
        except KeyError:
            raise ValidationError(
                f"no imported embedding for record (t={t_index}, node={node_index})"
            ) from None


def encode(text: str, encoder, t_index: int = 0, node_index: int = 0) -> np.ndarray:
    vec = np.asarray(encoder.embed_record(t_index, node_index, text), dtype=np.float64)
    if vec.shape != (EMBEDDING_DIM,):
        raise ValidationError(f"encoder produced shape {vec.shape}, expected ({EMBEDDING_DIM},)")
    if not np.isfinite(vec).all():
        raise ValidationError("encoder produced non-finite values")
    return vec


def save_embeddings(path, vectors: Mapping[tuple[int, int], np.ndarray]) -> None:
    """Binary import file: magic, record count, then (t, node, 768 doubles) records."""
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<Q", len(vectors)))
        for (t, node), vec in vectors.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (EMBEDDING_DIM,):
                raise ValidationError(f"embedding for ({t}, {node}) has shape {vec.shape}")
            fh.write(struct.pack("<II", t, node))
            fh.write(np.ascontiguousarray(vec, dtype="<f8").tobytes())


def load_embeddings(path) -> dict[tuple[int, int], np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
        raise DataFormatError(f"{path}: not a {EMBEDDING_MAGIC.decode()} embedding file")
    off = len(EMBEDDING_MAGIC)
    try:
        (count,) = struct.unpack_from("<Q", blob, off)
        off += 8
        record = struct.Struct("<II")
        out: dict[tuple[int, int], np.ndarray] = {}
        for _ in range(count):
            t, node = record.unpack_from(blob, off)
            off += record.size
            vec = np.frombuffer(blob, dtype="<f8", count=EMBEDDING_DIM, offset=off)
            off += EMBEDDING_DIM * 8
            out[(t, node)] = vec.astype(np.float64)
    except struct.error as exc:
        raise DataFormatError(f"{path}: truncated embedding file") from exc
    if off != len(blob):
        raise DataFormatError(f"{path}: {len(blob) - off} trailing bytes")
    return out


@dataclass(frozen=True)
class PcaModel:
    """Mean + orthonormal top-k component columns from a covariance eigensolve."""

    mean: np.ndarray              # (D,)
    components: np.ndarray        # (D, k), orthonormal columns
    explained_variance: np.ndarray  # (k,), nonincreasing
    explained_variance_ratio: np.ndarray  # (k,)


def pca_fit(x: np.ndarray, k: int) -> PcaModel:
    """Eigendecomposition of the mean-centered covariance; top-k by eigenvalue.

    Component signs are fixed so each column's largest-magnitude coordinate is
    positive. Raises when ``k`` exceeds the numerical rank of the data.
    """
    if x.ndim != 2:
        raise ValidationError("PCA input must be a 2-d matrix")
    rows, dim = x.shape
    if not 1 <= k <= dim:
        raise ValidationError(f"component count {k} outside [1, {dim}]")
    if rows < k:
        raise ValidationError(f"need at least {k} rows to fit {k} components")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / rows
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]

    total = float(eigvals.sum())
    rank = int((eigvals > max(total, 1e-300) * 1e-12).sum())
    if k > rank:
        raise ValidationError(f"requested {k} components but the data has rank {rank}")

    components = eigvecs[:, :k].copy()
    for col in range(k):
        peak = np.argmax(np.abs(components[:, col]))
        if components[peak, col] < 0:
            components[:, col] = -components[:, col]
    variance = eigvals[:k]
    ratio = variance / total if total > 0 else np.zeros(k)
    return PcaModel(mean=mean, components=components,
                    explained_variance=variance, explained_variance_ratio=ratio)


def pca_transform(x: np.ndarray, model: PcaModel) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != model.mean.shape[0]:
        raise ValidationError(
            f"dimension mismatch: data has {x.shape[-1] if x.ndim else 0} columns, "
            f"model expects {model.mean.shape[0]}"
        )
    return (x - model.mean) @ model.components


def pca_inverse_transform(z: np.ndarray, model: PcaModel) -> np.ndarray:
    if z.ndim != 2 or z.shape[1] != model.components.shape[1]:
        raise ValidationError("reduced data does not match the component count")
    return z @ model.components.T + model.mean


@dataclass(frozen=True)
class FeatureSet:
    """Reduced node features plus the raw target field they forecast."""

    domain: GridDomain
    stride_hours: int
    timestamps: np.ndarray
    features: np.ndarray      # (T, N, k), standardized over the training range
    target_t2m_k: np.ndarray  # (T, N), raw Kelvin


@dataclass(frozen=True)
class EmbeddingResult:
    feature_set: FeatureSet
    pca: PcaModel
    fit_rows: int
    total_rows: int


def build_embedding_dataset(dataset: Dataset, encoder, k: int,
                            splits: Splits) -> EmbeddingResult:
    """Textualize + encode every (timestep, node) record, fit PCA on train rows
    only, transform everything, and standardize the reduced features on train.

    The raw t2m field rides along unchanged as the forecast target.
    """
    if dataset.missing_mask.any():
        raise ValidationError("fill_missing must run before building embeddings")
    t, n = dataset.n_steps, dataset.node_count
    names = [v.abbreviation for v in dataset.variables]
    matrix = np.empty((t * n, EMBEDDING_DIM))
    for ti in range(t):
        step = dataset.values[ti]
        for node in range(n):
            record = dict(zip(names, step[node]))
            text = textualize(record)
            matrix[ti * n + node] = encode(text, encoder, ti, node)

    # Node-major layout keeps the training rows one contiguous block.
    fit_block = matrix[splits.train.start * n : splits.train.stop * n]
    log.info("PCA fit on %d of %d rows (train timesteps only)", len(fit_block), t * n)
    pca = pca_fit(fit_block, k)
    reduced = pca_transform(matrix, pca).reshape(t, n, k)
    scaler = fit_standardizer_array(reduced, splits.train)
    features = scaler.apply(reduced)

    feature_set = FeatureSet(
        domain=dataset.domain,
        stride_hours=dataset.stride_hours,
        timestamps=dataset.timestamps,
        features=features,
        target_t2m_k=np.array(dataset.values[:, :, dataset.t2m_index]),
    )
    return EmbeddingResult(feature_set=feature_set, pca=pca,
                           fit_rows=len(fit_block), total_rows=t * n)


_FEAT_HEAD = struct.Struct("<4d2IIqII")  # bbox, n_lat, n_lon, stride, t0, T, k


def save_feature_set(path, fs: FeatureSet) -> None:
    d = fs.domain
    t0 = int(fs.timestamps[0].astype("datetime64[s]").astype(np.int64))
    t, n, k = fs.features.shape
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(_FEAT_HEAD.pack(d.lat_min, d.lat_max, d.lon_min, d.lon_max,
                                 d.n_lat, d.n_lon, fs.stride_hours, t0, t, k))
        fh.write(np.ascontiguousarray(fs.features, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fs.target_t2m_k, dtype="<f8").tobytes())


def load_feature_set(path) -> FeatureSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(FEATURES_MAGIC)] != FEATURES_MAGIC:
        raise DataFormatError(f"{path}: not a {FEATURES_MAGIC.decode()} feature file")
    off = len(FEATURES_MAGIC)
    try:
        (lat_min, lat_max, lon_min, lon_max, n_lat, n_lon,
         stride_hours, t0, t, k) = _FEAT_HEAD.unpack_from(blob, off)
    except struct.error as exc:
        raise DataFormatError(f"{path}: malformed feature header") from exc
    off += _FEAT_HEAD.size
    domain = GridDomain(lat_min, lat_max, lon_min, lon_max, n_lat, n_lon)
    n = domain.node_count
    feat_count = t * n * k
    expected = (feat_count + t * n) * 8
    if len(blob) - off != expected:
        raise DataFormatError(f"{path}: payload holds {len(blob) - off} bytes, expected {expected}")
    features = np.frombuffer(blob, dtype="<f8", count=feat_count, offset=off)
    off += feat_count * 8
    target = np.frombuffer(blob, dtype="<f8", count=t * n, offset=off)
    timestamps = (
        np.datetime64(int(t0), "s")
        + np.arange(t, dtype=np.int64) * np.timedelta64(stride_hours * SECONDS_PER_HOUR, "s")
    )
    return FeatureSet(
        domain=domain, stride_hours=int(stride_hours), timestamps=timestamps,
        features=features.reshape(t, n, k).astype(np.float64),
        target_t2m_k=target.reshape(t, n).astype(np.float64),
    )

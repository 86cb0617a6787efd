"""Spatial graph over grid points.

Edges connect node pairs whose great-circle distance is at or below a kilometer
threshold (inclusive). The normalized adjacency D^{-1/2} (A + I) D^{-1/2} feeds the
graph-convolution layers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DataFormatError, ValidationError
from .grid import GridDomain

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
# Above this node count the pairwise search switches to latitude-banded blocks.
BRUTE_FORCE_MAX_NODES = 20_000


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km on a sphere of radius 6371 km.

    Accepts scalars or broadcastable arrays. Symmetric by construction (absolute
    coordinate differences), zero iff the points coincide.
    """
    lat1, lon1, lat2, lon2 = (np.asarray(a, dtype=np.float64) for a in (lat1, lon1, lat2, lon2))
    for lat in (lat1, lat2):
        if (np.abs(lat) > 90.0).any():
            raise ValidationError("latitudes must lie in [-90, 90] degrees")
    for lon in (lon1, lon2):
        if (np.abs(lon) > 180.0).any():
            raise ValidationError("longitudes must lie in [-180, 180] degrees")
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = np.radians(np.abs(lat2 - lat1))
    dlam = np.radians(np.abs(lon2 - lon1))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    out = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(a, 1.0)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Graph:
    """Node coordinates plus an undirected edge list (each pair stored once, i < j)."""

    coords: np.ndarray  # (N, 2) of (lat, lon) degrees
    edges: np.ndarray  # (E, 2) int64, i < j, sorted lexicographically
    dist_km: float

    def __post_init__(self) -> None:
        self.coords.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def node_count(self) -> int:
        return len(self.coords)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        if self.edge_count:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def isolated_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.degrees() == 0)

    def adjacency_csr(self) -> sparse.csr_matrix:
        """Binary symmetric adjacency without self-loops."""
        n = self.node_count
        if self.edge_count == 0:
            return sparse.csr_matrix((n, n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.ones(len(rows), dtype=np.float64)
        return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    def edge_distances(self) -> np.ndarray:
        if self.edge_count == 0:
            return np.zeros(0)
        a = self.coords[self.edges[:, 0]]
        b = self.coords[self.edges[:, 1]]
        return haversine_km(a[:, 0], a[:, 1], b[:, 0], b[:, 1])


def _pairs_block(coords: np.ndarray, i_lo: int, i_hi: int, j_lo: int, j_hi: int,
                 dist_km: float) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (i, j) with i in [i_lo, i_hi), j in [j_lo, j_hi), j > i, within threshold."""
    lat_i = coords[i_lo:i_hi, 0][:, None]
    lon_i = coords[i_lo:i_hi, 1][:, None]
    lat_j = coords[j_lo:j_hi, 0][None, :]
    lon_j = coords[j_lo:j_hi, 1][None, :]
    d = haversine_km(lat_i, lon_i, lat_j, lon_j)
    ii, jj = np.nonzero(d <= dist_km)
    ii = ii + i_lo
    jj = jj + j_lo
    keep = jj > ii
    return ii[keep], jj[keep]


def build_graph(domain: GridDomain, dist_km: float) -> Graph:
    """Connect all and only node pairs within ``dist_km`` (inclusive), no self-edges."""
    if dist_km <= 0:
        raise ValidationError("distance threshold must be positive")
    coords = domain.node_coords()
    n = len(coords)
    rows_i: list[np.ndarray] = []
    rows_j: list[np.ndarray] = []
    if n <= BRUTE_FORCE_MAX_NODES:
        block = max(1, min(n, 2_000_000 // max(n, 1)))
        for i_lo in range(0, n, block):
            ii, jj = _pairs_block(coords, i_lo, min(i_lo + block, n), 0, n, dist_km)
            rows_i.append(ii)
            rows_j.append(jj)
    else:
        # Latitude-banded prefilter: grid rows are contiguous index ranges, and a
        # pair further apart than dist_km in latitude alone can never connect.
        max_dlat = np.degrees(dist_km / EARTH_RADIUS_KM)
        row_lats = domain.latitudes()
        dlat = (domain.lat_max - domain.lat_min) / (domain.n_lat - 1)
        band = int(np.ceil(max_dlat / dlat)) + 1
        n_lon = domain.n_lon
        for r1 in range(domain.n_lat):
            for r2 in range(r1, min(r1 + band + 1, domain.n_lat)):
                if abs(row_lats[r2] - row_lats[r1]) > max_dlat + 1e-12:
                    continue
                ii, jj = _pairs_block(coords, r1 * n_lon, (r1 + 1) * n_lon,
                                      r2 * n_lon, (r2 + 1) * n_lon, dist_km)
                rows_i.append(ii)
                rows_j.append(jj)
    if rows_i:
        i = np.concatenate(rows_i)
        j = np.concatenate(rows_j)
        order = np.lexsort((j, i))
        edges = np.column_stack([i[order], j[order]]).astype(np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    graph = Graph(coords=coords, edges=edges, dist_km=float(dist_km))
    isolated = graph.isolated_nodes()
    if len(isolated):
        log.warning(
            "%d of %d nodes have no neighbors under the %.3f km threshold",
            len(isolated), n, dist_km,
        )
    return graph


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Sparse symmetric propagation matrix D^{-1/2} (A + I) D^{-1/2} (CSR)."""

    matrix: sparse.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    """Self-loops are added before normalization; isolated nodes get a unit diagonal."""
    n = graph.node_count
    if n < 1:
        raise ValidationError("graph must have at least one node")
    deg = graph.degrees() + 1  # degree of A + I
    inv_sqrt = 1.0 / np.sqrt(deg.astype(np.float64))
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    data = [inv_sqrt * inv_sqrt]
    if graph.edge_count:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        w = inv_sqrt[i] * inv_sqrt[j]
        rows += [i, j]
        cols += [j, i]
        data += [w, w]
    mat = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return NormalizedAdjacency(matrix=mat)


def save_graph(graph: Graph, path) -> None:
    """Edge-list text export: header lines, then one `i j distance_km` row per edge."""
    dists = graph.edge_distances()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes {graph.node_count}\n")
        fh.write(f"#dist_km {graph.dist_km!r}\n")
        for (i, j), d in zip(graph.edges, dists):
            fh.write(f"{i} {j} {d!r}\n")


def load_graph(path, domain: GridDomain) -> Graph:
    """Rebuild a Graph from an edge-list file; coordinates come from ``domain``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("#nodes ") or not lines[1].startswith("#dist_km "):
        raise DataFormatError(f"{path}: malformed graph header")
    try:
        n = int(lines[0].split()[1])
        dist_km = float(lines[1].split()[1])
    except (IndexError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed graph header") from exc
    if n != domain.node_count:
        raise DataFormatError(
            f"{path}: graph has {n} nodes but the domain has {domain.node_count}"
        )
    pairs = []
    for line in lines[2:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataFormatError(f"{path}: malformed edge line {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < j < n):
            raise DataFormatError(f"{path}: edge ({i}, {j}) out of range")
        pairs.append((i, j))
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return Graph(coords=domain.node_coords(), edges=edges, dist_km=dist_km)

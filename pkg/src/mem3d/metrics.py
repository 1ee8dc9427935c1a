"""Point-cloud and embedding-space distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError
from .geometry import PointCloud

BRUTE_FORCE_BELOW = 64
_CHUNK = 1024


def _points(cloud) -> np.ndarray:
    p = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise DataError(f"point cloud must have shape (N, 3), got {p.shape}")
    if len(p) == 0:
        raise DataError("chamfer distance of an empty point cloud")
    return p


def _sq(diff):
    return (diff * diff).sum(axis=-1)


def _directed_brute(a, b):
    out = np.empty(len(a))
    for s in range(0, len(a), _CHUNK):
        out[s : s + _CHUNK] = _sq(a[s : s + _CHUNK, None, :] - b[None, :, :]).min(axis=1)
    return out


def _directed_tree(a, b, tree):
    _, idx = tree.query(a, k=1)
    return _sq(a - b[idx])


def chamfer_distance_brute(s1, s2) -> float:
    """O(N*M) reference implementation."""
    a, b = _points(s1), _points(s2)
    return float(_directed_brute(a, b).mean() + _directed_brute(b, a).mean())


def chamfer_distance(s1, s2) -> float:
    """Mean squared nearest-neighbor distance, summed over both directions."""
    a, b = _points(s1), _points(s2)
    if min(len(a), len(b)) < BRUTE_FORCE_BELOW:
        return chamfer_distance_brute(a, b)
    ab = _directed_tree(a, b, cKDTree(b)).mean()
    ba = _directed_tree(b, a, cKDTree(a)).mean()
    return float(ab + ba)


def normalize_rows(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("cannot L2-normalize a zero vector")
    return v / norms


def embedding_distance(f1, f2) -> float:
    """1 - <f1, f2> on unit-normalized embeddings; lies in [0, 2]."""
    a = np.asarray(f1, dtype=np.float64).ravel()
    b = np.asarray(f2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"embedding dimension mismatch: {a.size} vs {b.size}")
    a, b = normalize_rows(a), normalize_rows(b)
    return float(min(max(1.0 - a @ b, 0.0), 2.0))


def aggregate_view_embeddings(views) -> np.ndarray:
    """Mean-pool per-view embeddings, then L2-normalize."""
    v = np.asarray(views, dtype=np.float64)
    if v.ndim != 2 or len(v) == 0:
        raise DataError("need at least one view embedding of uniform dimension")
    mean = v.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise DataError("mean view embedding is zero; cannot normalize")
    return mean / norm


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Raw embedding rows keyed by shape id.

    ``values`` keeps the producer's numbers (FD is fit on them); ``unit()``
    gives the re-normalized rows used by the embedding distance.
    """

    ids: tuple[str, ...]
    values: np.ndarray  # (count, dim)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values)
        if v.ndim != 2:
            raise DataError("embedding values must be a 2-D array")
        ids = tuple(self.ids)
        if len(ids) != len(v):
            raise DataError(f"{len(ids)} ids for {len(v)} embedding rows")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate shape ids in embedding set")
        if not np.all(np.isfinite(v)):
            raise DataError("embedding set contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return len(self.ids)

    def unit(self) -> np.ndarray:
        return normalize_rows(self.values)

    def sorted_values(self) -> np.ndarray:
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        return np.asarray(self.values[order], dtype=np.float64)

    def subset(self, ids) -> "EmbeddingSet":
        pos = {k: i for i, k in enumerate(self.ids)}
        missing = [k for k in ids if k not in pos]
        if missing:
            raise DataError(f"no embedding for shape ids: {missing[:5]}")
        return EmbeddingSet(tuple(ids), self.values[[pos[k] for k in ids]])

"""Batch retrieval: descriptor caches, exact nearest-neighbor scans, percentile
reports and the retrieval-accuracy harness.

Every search is exhaustive. Early abandoning stops summing a row once its
partial L1 sum exceeds the current k-th best distance; partial sums only grow,
so the result is identical to the full scan. Ties are broken by ascending id
(shape id, then yaw pose) regardless of the order rows were cached in.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .descriptors import DESCRIPTOR_SIZE, LightFieldDescriptor, light_field_descriptor, yaw_descriptors
from .errors import DataError
from .formats import pose_tag, read_lfd, split_pose_tag, write_lfd
from .geometry import PointCloud, load_mesh, normalize_to_unit_cube
from .metrics import EmbeddingSet, chamfer_distance
from .stats import DistanceSet

log = logging.getLogger(__name__)

METRICS = ("lfd", "lfd-yaw4", "chamfer", "embed")
POSE_MODES = ("single", "four-yaw")
EXCLUDED = "excluded"


@dataclass(frozen=True, eq=False)
class DescriptorCache:
    """Descriptors as a dense (rows, 450) float32 matrix.

    ``poses`` is None for single-pose caches; in four-yaw caches each row
    carries its yaw angle and is persisted under the id ``<shape_id>::yawNNN``.
    """

    shape_ids: tuple[str, ...]
    matrix: np.ndarray
    poses: tuple[int, ...] | None = None
    failures: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if m.ndim != 2 or m.shape[1] != DESCRIPTOR_SIZE:
            raise DataError(f"cache matrix must have {DESCRIPTOR_SIZE} columns")
        ids = tuple(self.shape_ids)
        if len(ids) != len(m):
            raise DataError("cache ids and rows disagree in length")
        keys = self.keys_for(ids, self.poses)
        if len(set(keys)) != len(keys):
            raise DataError("duplicate ids in descriptor cache")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shape_ids", ids)
        if self.poses is not None:
            object.__setattr__(self, "poses", tuple(int(p) for p in self.poses))
        order = np.array(sorted(range(len(ids)), key=lambda i: (ids[i], self.poses[i] if self.poses else 0)), dtype=np.int64)
        object.__setattr__(self, "_order", order)

    @staticmethod
    def keys_for(ids, poses):
        if poses is None:
            return list(ids)
        return [pose_tag(i, p) for i, p in zip(ids, poses)]

    @property
    def keys(self) -> list[str]:
        return self.keys_for(self.shape_ids, self.poses)

    @property
    def pose_mode(self) -> str:
        return "single" if self.poses is None else "four-yaw"

    def __len__(self):
        return len(self.shape_ids)

    def descriptor(self, row: int) -> LightFieldDescriptor:
        pose = self.poses[row] if self.poses else 0
        return LightFieldDescriptor(self.matrix[row].reshape(10, 45), self.shape_ids[row], pose)

    @property
    def entries(self) -> dict[str, LightFieldDescriptor]:
        return {k: self.descriptor(i) for i, k in enumerate(self.keys)}

    def sorted_matrix(self) -> np.ndarray:
        return np.ascontiguousarray(self.matrix[self._order])

    def sorted_keys(self) -> list[str]:
        keys = self.keys
        return [keys[i] for i in self._order]

    @classmethod
    def from_descriptors(cls, descriptors, four_yaw: bool = False, failures=()) -> "DescriptorCache":
        descriptors = list(descriptors)
        matrix = np.stack([d.flat() for d in descriptors]) if descriptors else np.empty((0, DESCRIPTOR_SIZE), np.float32)
        poses = tuple(d.pose for d in descriptors) if four_yaw else None
        return cls(tuple(d.shape_id for d in descriptors), matrix, poses, tuple(failures))

    def save(self, path) -> None:
        write_lfd(path, list(zip(self.keys, self.matrix)))

    @classmethod
    def load(cls, path) -> "DescriptorCache":
        entries = read_lfd(path)
        parsed = [split_pose_tag(k) for k, _ in entries]
        tagged = [p is not None for _, p in parsed]
        if entries and all(tagged):
            ids = tuple(i for i, _ in parsed)
            poses = tuple(p for _, p in parsed)
        else:
            ids, poses = tuple(k for k, _ in entries), None
        matrix = np.stack([v.reshape(-1) for _, v in entries]) if entries else np.empty((0, DESCRIPTOR_SIZE), np.float32)
        return cls(ids, matrix, poses)

    def group_by_shape(self) -> dict[str, list[int]]:
        groups: dict[str, list[int]] = {}
        for row in self._order:
            groups.setdefault(self.shape_ids[row], []).append(int(row))
        return groups


def _describe_one(record, four_yaw):
    sid, path = record
    mesh = normalize_to_unit_cube(load_mesh(path))
    if four_yaw:
        return yaw_descriptors(mesh, sid)
    return [light_field_descriptor(mesh, sid)]


def build_cache(records, pose_mode: str = "single", workers: int = 1) -> DescriptorCache:
    """Describe every (shape_id, mesh_path) record; failures are logged and skipped.

    Rows follow record order; results do not depend on ``workers``.
    """
    if pose_mode not in POSE_MODES:
        raise ValueError(f"pose_mode must be one of {POSE_MODES}")
    records = [(r.shape_id, r.mesh_path) if hasattr(r, "shape_id") else tuple(r) for r in records]
    if not records:
        raise DataError("no shapes to describe")
    four_yaw = pose_mode == "four-yaw"

    def work(rec):
        try:
            return _describe_one(rec, four_yaw), None
        except DataError as exc:
            return None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]
    descriptors, failures = [], []
    for (sid, _), (descs, err) in zip(records, results):
        if err is not None:
            log.warning("skipping %s: %s", sid, err)
            failures.append((sid, err))
        else:
            descriptors.extend(descs)
    if not descriptors:
        raise DataError(f"all {len(records)} shapes failed to load or describe")
    return DescriptorCache.from_descriptors(descriptors, four_yaw, failures)


@numba.njit(cache=True, nogil=True)
def _scan_topk(matrix, q, k, prune, out_d, out_i):
    # Rows are visited in ascending id order; a row displaces the current k-th
    # entry only when strictly closer, so equal distances keep the smaller id.
    filled = 0
    for r in range(matrix.shape[0]):
        bound = out_d[k - 1] if filled == k else np.inf
        acc = 0.0
        abandoned = False
        for c in range(matrix.shape[1]):
            acc += abs(np.float64(matrix[r, c]) - np.float64(q[c]))
            if prune and acc > bound:
                abandoned = True
                break
        if abandoned or acc >= bound:
            continue
        pos = filled if filled < k else k - 1
        while pos > 0 and out_d[pos - 1] > acc:
            if pos < k:
                out_d[pos] = out_d[pos - 1]
                out_i[pos] = out_i[pos - 1]
            pos -= 1
        out_d[pos] = acc
        out_i[pos] = r
        if filled < k:
            filled += 1
    return filled


@numba.njit(cache=True, nogil=True)
def _scan_nn_many(matrix, queries, prune, out_d, out_i):
    tmp_d = np.empty(1)
    tmp_i = np.empty(1, dtype=np.int64)
    for j in range(queries.shape[0]):
        tmp_d[0] = np.inf
        tmp_i[0] = -1
        _scan_topk(matrix, queries[j], 1, prune, tmp_d, tmp_i)
        out_d[j] = tmp_d[0]
        out_i[j] = tmp_i[0]


@dataclass(frozen=True)
class NNResult:
    query_id: str
    neighbor_id: str
    distance: float
    ranked: tuple[tuple[str, float], ...]


def _flat_query(query) -> np.ndarray:
    if isinstance(query, LightFieldDescriptor):
        return query.flat()
    q = np.ascontiguousarray(query, dtype=np.float32).reshape(-1)
    if q.shape != (DESCRIPTOR_SIZE,):
        raise ValueError("query descriptor must hold 450 values")
    return q


def top_k_neighbors(query, cache: DescriptorCache, k: int = 1, prune: bool = True, query_id: str | None = None) -> NNResult:
    if len(cache) == 0:
        raise DataError("descriptor cache is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, len(cache))
    out_d = np.full(k, np.inf)
    out_i = np.full(k, -1, dtype=np.int64)
    _scan_topk(cache.sorted_matrix(), _flat_query(query), k, prune, out_d, out_i)
    keys = cache.sorted_keys()
    ranked = tuple((keys[i], float(d)) for i, d in zip(out_i, out_d))
    if query_id is None:
        query_id = query.shape_id if isinstance(query, LightFieldDescriptor) else ""
    return NNResult(query_id, ranked[0][0], ranked[0][1], ranked)


def _nn_rows(train_matrix, queries, prune=True, workers=1):
    n = len(queries)
    out_d = np.empty(n)
    out_i = np.empty(n, dtype=np.int64)
    if n == 0:
        return out_d, out_i
    if workers > 1 and n > 1:
        bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)

        def run(a, b):
            _scan_nn_many(train_matrix, queries[a:b], prune, out_d[a:b], out_i[a:b])

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, bounds[:-1], bounds[1:]))
    else:
        _scan_nn_many(train_matrix, queries, prune, out_d, out_i)
    return out_d, out_i


def _lfd_nn(queries: DescriptorCache, train: DescriptorCache, yaw: bool, workers: int):
    if train.poses is not None:
        raise DataError("training cache must hold single-pose descriptors")
    if yaw and queries.poses is None:
        raise DataError("lfd-yaw4 needs a four-yaw query cache")
    if not yaw and queries.poses is not None:
        raise DataError("metric lfd needs a single-pose query cache; use lfd-yaw4 for four-yaw caches")
    tm = train.sorted_matrix()
    tids = [train.shape_ids[i] for i in train._order]
    d, idx = _nn_rows(tm, np.ascontiguousarray(queries.matrix), workers=workers)
    if not yaw:
        return list(queries.shape_ids), list(d), [tids[i] for i in idx]
    qids, dist, nbrs = [], [], []
    for sid, rows in queries.group_by_shape().items():
        # rows are sorted by pose, so the first minimum is the smallest pose
        best = min(rows, key=lambda r: (d[r], tids[idx[r]]))
        qids.append(sid)
        dist.append(d[best])
        nbrs.append(tids[idx[best]])
    # keep the first-appearance order of query shapes
    first = {}
    for row, sid in enumerate(queries.shape_ids):
        first.setdefault(sid, row)
    order = sorted(range(len(qids)), key=lambda j: first[qids[j]])
    return [qids[j] for j in order], [dist[j] for j in order], [nbrs[j] for j in order]


def _items(x):
    if isinstance(x, dict):
        return list(x.items())
    return list(x)


def _chamfer_nn(queries, train):
    train = sorted(_items(train), key=lambda kv: kv[0])
    qids, dist, nbrs = [], [], []
    for qid, cloud in _items(queries):
        best, best_id = math.inf, None
        for tid, tcloud in train:
            d = chamfer_distance(cloud, tcloud)
            if d < best:
                best, best_id = d, tid
        qids.append(qid)
        dist.append(best)
        nbrs.append(best_id)
    return qids, dist, nbrs


def _embed_nn(queries: EmbeddingSet, train: EmbeddingSet):
    if queries.dim != train.dim:
        raise DataError(f"embedding dimension mismatch: {queries.dim} vs {train.dim}")
    order = sorted(range(len(train)), key=train.ids.__getitem__)
    t = train.unit()[order]
    tids = [train.ids[i] for i in order]
    q = queries.unit()
    sims = np.einsum("qd,td->qt", q, t)
    dist = np.clip(1.0 - sims, 0.0, 2.0)
    idx = dist.argmin(axis=1)
    return list(queries.ids), [float(dist[j, i]) for j, i in enumerate(idx)], [tids[i] for i in idx]


def nearest_distance_set(queries, train, metric: str = "lfd", source: str = "test", workers: int = 1) -> DistanceSet:
    """d_T for each query: exact minimum distance to the training set, with the argmin id.

    Inputs by metric: ``lfd`` and ``lfd-yaw4`` take DescriptorCache objects
    (four-yaw query cache for the latter); ``chamfer`` takes mappings or
    pair lists of id -> PointCloud; ``embed`` takes EmbeddingSet objects.
    """
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if metric in ("lfd", "lfd-yaw4"):
        if not isinstance(queries, DescriptorCache) or not isinstance(train, DescriptorCache):
            raise DataError(f"metric {metric} needs descriptor caches")
        if len(train) == 0:
            raise DataError("training set is empty")
        qids, dist, nbrs = _lfd_nn(queries, train, metric == "lfd-yaw4", workers)
    elif metric == "chamfer":
        if isinstance(queries, (DescriptorCache, EmbeddingSet)) or isinstance(train, (DescriptorCache, EmbeddingSet)):
            raise DataError("metric chamfer needs point clouds")
        if not _items(train):
            raise DataError("training set is empty")
        for _, c in _items(queries) + _items(train):
            if not isinstance(c, PointCloud):
                raise DataError("metric chamfer needs PointCloud values")
        qids, dist, nbrs = _chamfer_nn(queries, train)
    else:
        if not isinstance(queries, EmbeddingSet) or not isinstance(train, EmbeddingSet):
            raise DataError("metric embed needs embedding sets")
        if len(train) == 0:
            raise DataError("training set is empty")
        qids, dist, nbrs = _embed_nn(queries, train)
    return DistanceSet(tuple(dist), source, tuple(qids), tuple(nbrs))


@dataclass(frozen=True)
class PercentileRow:
    percentile: float
    query_id: str
    neighbor_id: str
    distance: float


def percentile_index(p: float, n: int) -> int:
    """Nearest rank on the (n-1)-scaled index, halves rounded up."""
    return int(math.floor(p / 100.0 * (n - 1) + 0.5))


def percentile_ranking(distances: DistanceSet, percentiles) -> list[PercentileRow]:
    """Rows at each requested percentile of the ascending d_T ordering (most memorized first)."""
    n = len(distances)
    qids = distances.query_ids or tuple(str(i) for i in range(n))
    nbrs = distances.neighbor_ids or ("",) * n
    order = sorted(range(n), key=lambda i: (distances.values[i], qids[i]))
    rows = []
    for p in sorted(float(p) for p in percentiles):
        if not 0.0 <= p <= 100.0:
            raise DataError(f"percentile {p} is outside [0, 100]")
        i = order[percentile_index(p, n)]
        rows.append(PercentileRow(p, qids[i], nbrs[i], distances.values[i]))
    return rows


def retrieval_accuracy(predictions: dict, labels: dict) -> tuple[float, list[dict]]:
    """Top-1 accuracy over labeled queries; queries labeled ``excluded`` are dropped first."""
    table = []
    correct = 0
    for qid in sorted(labels):
        label = labels[qid]
        if label == EXCLUDED:
            continue
        if qid not in predictions:
            raise DataError(f"no prediction for labeled query {qid!r}")
        ok = predictions[qid] == label
        correct += ok
        table.append({"query_id": qid, "retrieved": predictions[qid], "label": label, "correct": bool(ok)})
    if not table:
        raise DataError("no evaluable queries after exclusion")
    return correct / len(table), table

"""Manifest-driven pipelines behind the CLI commands.

Each function is a pure function of its input files and arguments; the worker
count only changes scheduling, never results.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError
from .formats import read_emb, read_manifest, write_emb
from .geometry import load_mesh, normalize_to_unit_cube, sample_surface_points
from .metrics import EmbeddingSet
from .retrieval import (
    METRICS,
    DescriptorCache,
    build_cache,
    nearest_distance_set,
    percentile_ranking,
    retrieval_accuracy,
    top_k_neighbors,
)
from .stats import fit_gaussian, frechet_distance, mann_whitney_u

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_PERCENTILES = (10, 20, 30, 40, 50, 60, 70, 80, 90)
PRESETS = {"paper-s4": 100, "paper-s5": 2500}
N_POINTS = 4096


def records_for_split(records, split):
    out = [r for r in records if r.split == split]
    if not out:
        raise DataError(f"manifest has no {split!r} shapes")
    return out


def cmd_descriptors(manifest, out_path, pose_mode="single", split=None, workers=1) -> DescriptorCache:
    records = read_manifest(manifest)
    if split is not None:
        records = records_for_split(records, split)
    cache = build_cache(records, pose_mode, workers)
    cache.save(out_path)
    return cache


def _pose_mode_for(metric, split):
    return "four-yaw" if metric == "lfd-yaw4" and split != "train" else "single"


def _cloud_seed(seed, shape_id):
    return np.random.SeedSequence([seed, zlib.crc32(shape_id.encode("utf-8"))])


def _point_clouds(records, seed):
    clouds = []
    for r in records:
        mesh = normalize_to_unit_cube(load_mesh(r.mesh_path))
        clouds.append((r.shape_id, sample_surface_points(mesh, N_POINTS, _cloud_seed(seed, r.shape_id))))
    return clouds


class SplitInputs:
    """Resolves train/test/gen inputs for a metric from caches, embeddings or a manifest."""

    def __init__(self, metric, manifest=None, caches=None, embeddings=None, seed=0, workers=1, artifacts=None):
        if metric not in METRICS:
            raise DataError(f"unknown metric {metric!r}; expected one of {METRICS}")
        self.metric = metric
        self.records = read_manifest(manifest) if manifest else None
        self.caches = {k: v for k, v in (caches or {}).items() if v}
        self.embeddings = {k: v for k, v in (embeddings or {}).items() if v}
        self.seed = seed
        self.workers = workers
        self.artifacts = Path(artifacts) if artifacts else None
        self._emb_cache = {}

    def _records(self, split):
        if self.records is None:
            raise DataError(f"no {split} input: give a cache/embedding file or a manifest")
        return records_for_split(self.records, split)

    def descriptor_cache(self, split) -> DescriptorCache:
        pose_mode = _pose_mode_for(self.metric, split)
        if split in self.caches:
            cache = DescriptorCache.load(self.caches[split])
            if cache.pose_mode != pose_mode:
                raise DataError(f"{split} cache is {cache.pose_mode}, metric {self.metric} needs {pose_mode}")
            return cache
        cache = build_cache(self._records(split), pose_mode, self.workers)
        if self.artifacts is not None:
            self.artifacts.mkdir(parents=True, exist_ok=True)
            cache.save(self.artifacts / f"{split}.lfd")
        return cache

    def embedding_set(self, split) -> EmbeddingSet:
        if split in self._emb_cache:
            return self._emb_cache[split]
        if split in self.embeddings:
            emb = read_emb(self.embeddings[split])
        elif "all" in self.embeddings:
            emb = read_emb(self.embeddings["all"]).subset([r.shape_id for r in self._records(split)])
        else:
            raise DataError(f"no {split} embeddings given")
        if self.artifacts is not None:
            self.artifacts.mkdir(parents=True, exist_ok=True)
            write_emb(self.artifacts / f"{split}.emb", emb)
        self._emb_cache[split] = emb
        return emb

    def has_embeddings(self, split) -> bool:
        return split in self.embeddings or ("all" in self.embeddings and self.records is not None)

    def get(self, split):
        if self.metric in ("lfd", "lfd-yaw4"):
            return self.descriptor_cache(split)
        if self.metric == "embed":
            return self.embedding_set(split)
        return _point_clouds(self._records(split), self.seed)

    def distance_sets(self):
        train = self.get("train")
        self.train_size = len(train) if not isinstance(train, DescriptorCache) else len(set(train.shape_ids))
        d_test = nearest_distance_set(self.get("test"), train, self.metric, "test", self.workers)
        d_gen = nearest_distance_set(self.get("gen"), train, self.metric, "gen", self.workers)
        return d_test, d_gen


def size_warnings(n, m, preset=None) -> list[str]:
    out = []
    if n != m:
        out.append(f"|P_test|={n} differs from |Q|={m}; Z_U is only comparable across runs with fixed sizes")
    if preset is not None:
        want = PRESETS[preset]
        if n != want or m != want:
            out.append(f"preset {preset} expects |P_test|=|Q|={want}, got {n} and {m}")
    return out


def cmd_zu(inputs: SplitInputs, preset=None):
    d_test, d_gen = inputs.distance_sets()
    result = mann_whitney_u(d_test, d_gen)
    return result, d_test, d_gen, size_warnings(len(d_test), len(d_gen), preset)


def cmd_fd(ref_path, query_path):
    ref, query = read_emb(ref_path), read_emb(query_path)
    if ref.dim != query.dim:
        raise DataError(f"embedding dimension mismatch: reference has {ref.dim}, query has {query.dim}")
    return frechet_distance(fit_gaussian(ref), fit_gaussian(query))


def cmd_nn(query_cache, train_cache, k=1):
    train = DescriptorCache.load(train_cache)
    queries = DescriptorCache.load(query_cache)
    return [
        top_k_neighbors(queries.descriptor(i), train, k, query_id=key)
        for i, key in enumerate(queries.keys)
    ]


def cmd_bench_retrieval(query_cache, train_cache, labels):
    """Top-1 retrieval accuracy of cached queries against human labels ({query_id: train_id | 'excluded'})."""
    preds = {r.query_id: r.neighbor_id for r in cmd_nn(query_cache, train_cache, 1)}
    return retrieval_accuracy(preds, labels)


def _fd_dict(fd):
    return None if fd is None else asdict(fd)


def cmd_report(inputs: SplitInputs, percentiles=DEFAULT_PERCENTILES, preset=None, gen_test_embeddings=None) -> dict:
    """The combined Z_U + FD report as a JSON-ready dict.

    Training FD compares the generated set to training embeddings, test FD to
    test embeddings (against ``gen_test_embeddings`` when generations from
    test prompts are supplied separately). FD fields are None without
    embeddings.
    """
    mwu, d_test, d_gen, warns = cmd_zu(inputs, preset)
    fd_train = fd_test = None
    if inputs.has_embeddings("gen"):
        gen = inputs.embedding_set("gen")
        if inputs.has_embeddings("train"):
            fd_train = frechet_distance(fit_gaussian(inputs.embedding_set("train")), fit_gaussian(gen))
        if inputs.has_embeddings("test"):
            gen_test = read_emb(gen_test_embeddings) if gen_test_embeddings else gen
            fd_test = frechet_distance(fit_gaussian(inputs.embedding_set("test")), fit_gaussian(gen_test))
    rows = percentile_ranking(d_gen, percentiles)
    sizes = {"train": inputs.train_size, "test": len(d_test), "gen": len(d_gen)}
    return {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "metric": inputs.metric,
        "n": len(d_test),
        "m": len(d_gen),
        "z_u": {
            "u": mwu.u,
            "mu": mwu.mu,
            "sigma": mwu.sigma,
            "z": mwu.z,
            "n": mwu.n,
            "m": mwu.m,
            "delta_hat": mwu.delta_hat,
            "verdict": mwu.verdict(),
        },
        "fd_train": _fd_dict(fd_train),
        "fd_test": _fd_dict(fd_test),
        "percentiles": [asdict(r) for r in rows],
        "comparability_warning": len(d_test) != len(d_gen),
        "warnings": warns,
        "config": {
            "seed": inputs.seed,
            "metric": inputs.metric,
            "pose_mode": "four-yaw" if inputs.metric == "lfd-yaw4" else "single",
            "preset": preset,
            "percentiles": [float(p) for p in percentiles],
            "sizes": sizes,
        },
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_schema() -> dict:
    return json.loads((Path(__file__).parent / "schemas" / "report.schema.json").read_text(encoding="utf-8"))

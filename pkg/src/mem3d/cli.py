"""Command line entry point: ``mem3d descriptors|nn|zu|fd|report|toy|bench-retrieval``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import Mem3dError
from .pipeline import (
    DEFAULT_PERCENTILES,
    PRESETS,
    SplitInputs,
    cmd_bench_retrieval,
    cmd_descriptors,
    cmd_fd,
    cmd_nn,
    cmd_report,
    cmd_zu,
    dump_report,
)
from .retrieval import METRICS, POSE_MODES

EXIT_USAGE = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _percentiles(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad percentile list {text!r}") from None


def _add_inputs(p):
    p.add_argument("--manifest", help="CSV manifest (shape_id,mesh_path,split,prompt,label)")
    p.add_argument("--cache", dest="train_cache", help="LFD1 cache of training shapes")
    p.add_argument("--test-cache", help="LFD1 cache of held-out test shapes")
    p.add_argument("--gen-cache", help="LFD1 cache of generated shapes")
    p.add_argument("--metric", choices=METRICS, default="lfd")
    p.add_argument("--emb", help="EMB1 file covering all manifest shapes")
    p.add_argument("--emb-train")
    p.add_argument("--emb-test")
    p.add_argument("--emb-gen")
    p.add_argument("--seed", type=int, default=0, help="point-sampling seed (chamfer metric)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mem3d", description="Memorization metrics for 3D shape generative models.")
    parser.add_argument("--version", action="version", version=f"mem3d {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("descriptors", help="build an LFD1 descriptor cache from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test", "gen"))
    p.add_argument("--pose-mode", choices=POSE_MODES, default="single")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-silhouettes", metavar="DIR", help="also write per-view PGM silhouettes")
    p.add_argument("--out", required=True)

    p = sub.add_parser("nn", help="top-k LFD neighbors of cached queries")
    p.add_argument("--cache", required=True, help="training LFD1 cache")
    p.add_argument("--query-cache", required=True)
    p.add_argument("-k", "--k", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("zu", help="Mann-Whitney memorization score Z_U")
    _add_inputs(p)

    p = sub.add_parser("fd", help="Frechet distance between two EMB1 embedding files")
    p.add_argument("--ref", required=True, help="reference embeddings (training or test set)")
    p.add_argument("--query", required=True, help="generated-shape embeddings")
    p.add_argument("--role", choices=("train", "test"), default="train", help="label for the reference set")
    p.add_argument("--out")

    p = sub.add_parser("report", help="full JSON evaluation report")
    _add_inputs(p)
    p.add_argument("--emb-gen-test", help="embeddings of shapes generated from test prompts (test FD)")
    p.add_argument("--percentiles", type=_percentiles, default=list(DEFAULT_PERCENTILES))
    p.add_argument("--artifacts", metavar="DIR", help="write the LFD1/EMB1 inputs used by the report here")

    p = sub.add_parser("toy", help="2-D Gaussian toy model: Z_U vs training FD")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--mode", choices=("memorize", "generalize", "both"), default="both")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("bench-retrieval", help="top-1 retrieval accuracy against labels")
    p.add_argument("--cache", required=True, help="training LFD1 cache")
    p.add_argument("--query-cache", required=True)
    p.add_argument("--labels", required=True, help="CSV query_id,label (label 'excluded' drops a query)")
    p.add_argument("--out")
    return parser


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _inputs(args):
    return SplitInputs(
        args.metric,
        manifest=args.manifest,
        caches={"train": args.train_cache, "test": args.test_cache, "gen": args.gen_cache},
        embeddings={"all": args.emb, "train": args.emb_train, "test": args.emb_test, "gen": args.emb_gen},
        seed=args.seed,
        workers=args.workers,
        artifacts=getattr(args, "artifacts", None),
    )


def _dump_silhouettes(manifest, split, out_dir):
    from .formats import read_manifest
    from .geometry import load_mesh, normalize_to_unit_cube
    from .rasterizer import canonical_viewpoints, render_mask, write_pgm

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in read_manifest(manifest):
        if split and r.split != split:
            continue
        try:
            mesh = normalize_to_unit_cube(load_mesh(r.mesh_path))
        except Mem3dError:
            continue
        for i, cam in enumerate(canonical_viewpoints()):
            write_pgm(render_mask(mesh, cam), out_dir / f"{r.shape_id}_view{i}.pgm")


def _run(args) -> int:
    if args.command == "descriptors":
        cache = cmd_descriptors(args.manifest, args.out, args.pose_mode, args.split, args.workers)
        if args.dump_silhouettes:
            _dump_silhouettes(args.manifest, args.split, args.dump_silhouettes)
        print(f"described {len(set(cache.shape_ids))} shapes ({len(cache)} rows, {cache.pose_mode}); "
              f"{len(cache.failures)} failures")
        for sid, err in cache.failures:
            print(f"  failed {sid}: {err}")
    elif args.command == "nn":
        results = cmd_nn(args.query_cache, args.cache, args.k)
        _emit(_json([
            {"query_id": r.query_id, "neighbor_id": r.neighbor_id, "distance": r.distance,
             "ranked": [{"id": i, "distance": d} for i, d in r.ranked]}
            for r in results
        ]), args.out)
    elif args.command == "zu":
        mwu, d_test, d_gen, warns = cmd_zu(_inputs(args), args.preset)
        for w in warns:
            print(f"warning: {w}", file=sys.stderr)
        print(f"U = {mwu.u}  mu = {mwu.mu}  sigma = {mwu.sigma:.6f}  Z_U = {mwu.z:.6f}")
        print(mwu.verdict())
        if args.out:
            _emit(_json({"metric": args.metric, "u": mwu.u, "mu": mwu.mu, "sigma": mwu.sigma, "z": mwu.z,
                         "n": mwu.n, "m": mwu.m, "warnings": warns}), args.out)
    elif args.command == "fd":
        fd = cmd_fd(args.ref, args.query)
        text = _json({"role": f"{args.role} FD", "value": fd.value, "mean_term": fd.mean_term,
                      "trace_term": fd.trace_term, "clamped": fd.clamped})
        _emit(text, args.out)
    elif args.command == "report":
        report = cmd_report(_inputs(args), args.percentiles, args.preset, args.emb_gen_test)
        _emit(dump_report(report), args.out)
    elif args.command == "toy":
        from .toy import toy_experiment

        modes = ("memorize", "generalize") if args.mode == "both" else (args.mode,)
        rows = []
        for mode in modes:
            r = toy_experiment(args.n, mode, args.seed, args.noise)
            rows.append({"mode": mode, "n": args.n, "seed": args.seed, "noise": args.noise,
                         "z_u": r["z_u"], "fd_train": r["fd_train"]})
        _emit(_json(rows), args.out)
    elif args.command == "bench-retrieval":
        with open(args.labels, encoding="utf-8", newline="") as f:
            labels = {row["query_id"]: row["label"] for row in csv.DictReader(f)}
        acc, table = cmd_bench_retrieval(args.query_cache, args.cache, labels)
        _emit(_json({"accuracy": acc, "evaluated": len(table), "queries": table}), args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except Mem3dError as exc:
        print(f"mem3d: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"mem3d: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line multiplexer: ingest, serve, eval, bench, synth, search.

Exit codes: 0 success, 1 usage error, 2 data error (bad stores, manifests,
checksums), 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .engine import Query, SearchEngine, mock_encoder
from .errors import DataError
from .evalbench import (
    SplitSpec,
    generate_synthetic_corpus,
    latency_bench,
    recall_at_k,
    report_table,
    split_dataset,
    stored_query_embedding,
    write_json_report,
)
from .scoring import FusionConfig
from .service import build_engine, create_app, load_service_config
from .store import build_manifest, load_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="crossmodal",
                     description="Cross-modal search over precomputed embedding stores")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic paired corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--locals", type=int, default=8, dest="local_count")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest", help="build a manifest from raw store files")
    p.add_argument("--image-global", required=True)
    p.add_argument("--image-local", required=True)
    p.add_argument("--image-local-offsets", required=True)
    p.add_argument("--desc-global", required=True)
    p.add_argument("--desc-local", required=True)
    p.add_argument("--desc-local-offsets", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--name", default="corpus")
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="Recall@K evaluation over a split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="train,val,test sizes, e.g. 5783,500,500")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", default="1,5,10")
    p.add_argument("--direction", default="both",
                   choices=["both", "text-to-image", "image-to-text"])
    p.add_argument("--gallery", default="test", choices=["test", "full"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--json", dest="json_out", default=None)

    p = sub.add_parser("bench", help="per-query latency benchmark")
    p.add_argument("--manifest", required=True)
    p.add_argument("--queries", type=int, default=100,
                   help="number of precomputed queries sampled from the corpus")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", default="text-to-image",
                   choices=["text-to-image", "image-to-text"])
    p.add_argument("--mode", default="fused", choices=["fused", "global"])
    p.add_argument("--json", dest="json_out", default=None)

    p = sub.add_parser("search", help="one-shot query against a store")
    p.add_argument("--manifest", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text")
    group.add_argument("--image", help="path to image bytes")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="mock encoder seed")
    p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("serve", help="run the HTTP search service")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--static-dir", default=None,
                   help="directory of web UI assets to mount at /ui")

    return parser


def _make_engine(manifest: str, alpha: float | None, seed: int = 0) -> SearchEngine:
    store = load_corpus(manifest)
    fusion = None
    if alpha is not None:
        fusion = FusionConfig(alpha=alpha)
    counts = store.image_local.region_counts()
    local_count = int(counts.mean()) if counts.size else 1
    adapter = mock_encoder(seed, store.manifest.global_dim, max(1, local_count))
    return SearchEngine(store, fusion, adapter)


def _cmd_synth(args) -> int:
    corpus = generate_synthetic_corpus(
        n=args.n, dim=args.dim, local_count=args.local_count,
        noise=args.noise, seed=args.seed, out_dir=args.out)
    print(f"wrote {corpus.manifest_path}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    out = build_manifest(
        args.out, args.name,
        image_global=args.image_global,
        image_local=args.image_local,
        image_local_offsets=args.image_local_offsets,
        description_global=args.desc_global,
        description_local=args.desc_local,
        description_local_offsets=args.desc_local_offsets,
        catalog=args.catalog,
        normalized_at_ingest=args.normalized,
        default_fusion_weight=args.alpha,
    )
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    engine = _make_engine(args.manifest, args.alpha, args.seed)
    n = engine.store.item_count
    if args.split:
        try:
            train, val, test = (int(x) for x in args.split.split(","))
        except ValueError:
            raise _UsageError("--split must be three comma-separated integers")
        spec = SplitSpec(total=n, train=train, val=val, test=test, seed=args.seed)
    else:
        spec = SplitSpec(total=n, train=0, val=0, test=n, seed=args.seed)
    _, _, test_ids = split_dataset(spec)
    if args.gallery == "test":
        gallery = engine.store.subset(test_ids)
        eval_engine = SearchEngine(gallery, engine.fusion, engine.adapter)
        pairs = [(i, i) for i in range(len(test_ids))]
    else:
        eval_engine = engine
        pairs = [(i, i) for i in test_ids]
    k_values = [int(x) for x in args.k.split(",")]
    directions = (["text-to-image", "image-to-text"] if args.direction == "both"
                  else [args.direction])
    reports = []
    for direction in directions:
        report = recall_at_k(eval_engine, pairs, k_values, direction)
        reports.append(report)
        print(report_table(report))
    if args.json_out:
        write_json_report(reports, args.json_out)
    return EXIT_OK


def _cmd_bench(args) -> int:
    engine = _make_engine(args.manifest, None, args.seed)
    n = engine.store.item_count
    if n == 0:
        raise DataError("cannot benchmark an empty corpus")
    rng = np.random.default_rng(args.seed)
    qids = rng.choice(n, size=min(args.queries, n), replace=False)
    queries = [stored_query_embedding(engine, int(q), args.direction) for q in qids]
    report = latency_bench(engine, queries, args.reps, args.direction,
                           global_only=args.mode == "global")
    print(report_table(report))
    if args.json_out:
        write_json_report([report], args.json_out)
    return EXIT_OK


def _cmd_search(args) -> int:
    engine = _make_engine(args.manifest, args.alpha, args.seed)
    if args.text is not None:
        query = Query(modality="text", text=args.text, k=args.k)
    else:
        query = Query(modality="image", image_bytes=Path(args.image).read_bytes(), k=args.k)
    results = engine.search(query)
    print(f"{'rank':>4}  {'fused':>8}  {'global':>8}  {'local':>8}  description")
    for r in results:
        b = r.breakdown
        print(f"{r.rank:>4}  {b.fused_score:8.4f}  {b.global_score:8.4f}  "
              f"{b.local_score:8.4f}  {r.entry.description}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    config = load_service_config(args.config)
    if args.manifest:
        config.manifest_path = args.manifest
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if args.static_dir:
        config.static_dir = args.static_dir
    engine = build_engine(config)
    app = create_app(config, engine)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "search": _cmd_search,
    "serve": _cmd_serve,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

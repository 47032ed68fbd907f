"""Evaluation harness: dataset splits, Recall@K, latency, synthetic corpora.

The synthetic generator builds a fully on-disk corpus (all six array
files, manifest, catalog) whose items are derived from the same keyed hash
the mock encoder uses, so ``encode_text("item-i")`` reproduces item i's
pre-noise embedding and self-retrieval is exact at noise 0.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import npyio
from .engine import Query, SearchEngine, embedding_from_hash, stable_hash
from .errors import DataError
from .scoring import QueryEmbedding
from .store import CatalogEntry, build_manifest, write_catalog

DIRECTIONS = ("text-to-image", "image-to-text")


@dataclass(frozen=True)
class SplitSpec:
    total: int
    train: int
    val: int
    test: int
    seed: int

    def __post_init__(self):
        if min(self.total, self.train, self.val, self.test) < 0:
            raise ValueError("split sizes must be non-negative")
        if self.train + self.val + self.test != self.total:
            raise ValueError(
                f"split sizes {self.train}+{self.val}+{self.test} != total {self.total}")


@dataclass(frozen=True)
class RecallReport:
    direction: str
    k_values: list[int]
    recalls: dict[int, float]   # k -> percentage in [0, 100]
    query_count: int

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "k_values": list(self.k_values),
            "recalls": {str(k): v for k, v in self.recalls.items()},
            "query_count": self.query_count,
        }


@dataclass(frozen=True)
class LatencyReport:
    direction: str
    query_count: int
    repetitions: int
    mean_ms: float
    p50_ms: float
    p95_ms: float

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "query_count": self.query_count,
            "repetitions": self.repetitions,
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
        }


def split_dataset(spec: SplitSpec) -> tuple[list[int], list[int], list[int]]:
    """Seeded shuffle of 0..total-1 sliced into train/val/test, in that order."""
    perm = np.random.default_rng(spec.seed).permutation(spec.total)
    train = perm[: spec.train]
    val = perm[spec.train: spec.train + spec.val]
    test = perm[spec.train + spec.val:]
    return train.tolist(), val.tolist(), test.tolist()


def _query_modality(direction: str) -> str:
    # text-to-image queries come from the description side, and vice versa
    return "text" if direction == "text-to-image" else "image"


def stored_query_embedding(engine: SearchEngine, item_id: int,
                           direction: str) -> QueryEmbedding:
    """An item's stored opposite-side representations, used as the query."""
    side = "description" if direction == "text-to-image" else "image"
    g, loc = engine.store.side(side)
    try:
        return QueryEmbedding(
            global_vec=np.array(g.row(item_id)),
            local_vecs=np.array(loc.block(item_id)),
            modality=_query_modality(direction),
        )
    except IndexError as exc:
        raise DataError(f"query item {item_id} missing from stores") from exc


def recall_at_k(engine: SearchEngine, pairs: list[tuple[int, int]],
                k_values: list[int], direction: str,
                workers: int = 1) -> RecallReport:
    """Recall@K over (query item, relevant item) pairs.

    A query succeeds at k iff its relevant item appears in the fused
    top-k; recall is the percentage of successes averaged over all
    queries. ``workers`` > 1 parallelizes across queries without changing
    any number.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if not pairs:
        raise ValueError("pairs must be non-empty")
    k_values = sorted(set(int(k) for k in k_values))
    k_max = k_values[-1]
    modality = _query_modality(direction)

    def top_ids(pair: tuple[int, int]) -> tuple[list[int], int]:
        qid, relevant = pair
        emb = stored_query_embedding(engine, qid, direction)
        results = engine.search(Query(modality=modality, precomputed=emb, k=k_max))
        return [r.breakdown.item_id for r in results], relevant

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranked = list(pool.map(top_ids, pairs))
    else:
        ranked = [top_ids(p) for p in pairs]

    successes = {k: 0 for k in k_values}
    for ids, relevant in ranked:
        for k in k_values:
            if relevant in ids[:k]:
                successes[k] += 1
    recalls = {k: 100.0 * successes[k] / len(pairs) for k in k_values}
    return RecallReport(direction=direction, k_values=k_values,
                        recalls=recalls, query_count=len(pairs))


def latency_bench(engine: SearchEngine, queries: list[QueryEmbedding],
                  repetitions: int, direction: str,
                  global_only: bool = False) -> LatencyReport:
    """Per-query wall-clock for scoring + ranking + assembly.

    Queries are precomputed, so encoder time is excluded by construction.
    One warm-up pass over all queries runs first and is not timed.
    """
    if not queries:
        raise ValueError("query list must be non-empty")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    modality = _query_modality(direction)
    bench_engine = engine
    if global_only:
        from .scoring import FusionConfig
        fusion = FusionConfig(alpha=1.0,
                              temperature_lambda=engine.fusion.temperature_lambda,
                              local_aggregation=engine.fusion.local_aggregation)
        bench_engine = SearchEngine(engine.store, fusion, engine.adapter)

    wrapped = [Query(modality=modality, precomputed=q) for q in queries]
    for q in wrapped:  # warm-up, untimed
        bench_engine.search(q)
    timings_ms: list[float] = []
    for _ in range(repetitions):
        for q in wrapped:
            t0 = time.perf_counter()
            bench_engine.search(q)
            timings_ms.append((time.perf_counter() - t0) * 1000.0)
    arr = np.asarray(timings_ms)
    return LatencyReport(
        direction=direction,
        query_count=len(queries),
        repetitions=repetitions,
        mean_ms=float(arr.mean()),
        p50_ms=float(np.percentile(arr, 50)),
        p95_ms=float(np.percentile(arr, 95)),
    )


@dataclass(frozen=True)
class SyntheticCorpus:
    manifest_path: Path
    pairs: list[tuple[int, int]]   # (query item, relevant item); identity pairs


def generate_synthetic_corpus(n: int, dim: int, local_count: int, noise: float,
                              seed: int, out_dir: str | Path) -> SyntheticCorpus:
    """Generate a paired corpus and write it as a loadable store directory.

    Per item i, a latent embedding comes from the mock-encoder hash of
    "item-i"; the image side and description side each get the latent plus
    independent Gaussian noise, renormalized. Byte-identical across runs
    for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    img_global = np.empty((n, dim), dtype=np.float32)
    de_global = np.empty((n, dim), dtype=np.float32)
    img_local = np.empty((n * local_count, dim), dtype=np.float32)
    de_local = np.empty((n * local_count, dim), dtype=np.float32)
    noise_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    entries: list[CatalogEntry] = []

    for i in range(n):
        name = f"item-{i}"
        h = stable_hash(name.encode("utf-8"), seed)
        latent = embedding_from_hash(h, dim, local_count)
        for side_global, side_local in ((img_global, img_local), (de_global, de_local)):
            g = latent.global_vec.astype(np.float64)
            loc = latent.local_vecs.astype(np.float64)
            if noise > 0.0:
                g = g + noise * noise_rng.standard_normal(dim)
                loc = loc + noise * noise_rng.standard_normal((local_count, dim))
            g /= np.linalg.norm(g)
            loc /= np.linalg.norm(loc, axis=1, keepdims=True)
            side_global[i] = g.astype(np.float32)
            side_local[i * local_count:(i + 1) * local_count] = loc.astype(np.float32)
        entries.append(CatalogEntry(
            item_id=i,
            external_id=name,
            description=name,
            image_uri=f"synthetic://{name}",
            source_url=f"https://example.org/items/{name}",
        ))

    offsets = np.arange(0, (n + 1) * local_count, local_count, dtype=np.int64)
    npyio.write_array(out / "image_global.npy", img_global)
    npyio.write_array(out / "image_local.npy", img_local)
    npyio.write_array(out / "image_local_offsets.npy", offsets)
    npyio.write_array(out / "description_global.npy", de_global)
    npyio.write_array(out / "description_local.npy", de_local)
    npyio.write_array(out / "description_local_offsets.npy", offsets)
    write_catalog(entries, out / "catalog.jsonl")

    manifest_path = build_manifest(
        out / "manifest.json",
        corpus_name=f"synthetic-n{n}-d{dim}-r{local_count}-noise{noise}-seed{seed}",
        image_global=out / "image_global.npy",
        image_local=out / "image_local.npy",
        image_local_offsets=out / "image_local_offsets.npy",
        description_global=out / "description_global.npy",
        description_local=out / "description_local.npy",
        description_local_offsets=out / "description_local_offsets.npy",
        catalog=out / "catalog.jsonl",
        normalized_at_ingest=True,
    )
    return SyntheticCorpus(manifest_path=manifest_path,
                           pairs=[(i, i) for i in range(n)])


def report_table(report: RecallReport | LatencyReport) -> str:
    """Small human-readable rendering of a report."""
    if isinstance(report, RecallReport):
        lines = [f"direction: {report.direction}  queries: {report.query_count}"]
        lines += [f"  R@{k:<4d} {report.recalls[k]:6.1f} %" for k in report.k_values]
        return "\n".join(lines)
    return (
        f"direction: {report.direction}  queries: {report.query_count}  "
        f"reps: {report.repetitions}\n"
        f"  mean {report.mean_ms:8.2f} ms   p50 {report.p50_ms:8.2f} ms   "
        f"p95 {report.p95_ms:8.2f} ms"
    )


def write_json_report(reports: list[RecallReport | LatencyReport],
                      path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([r.to_dict() for r in reports], indent=2) + "\n", "utf-8")

"""Acceptance suite: one test per criterion, printing a pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The full-scale corpus fixtures are shared with the rest of the
suite, so this file adds generation cost only once per session.
"""
import json
import time
from contextlib import contextmanager
from importlib import resources

import jsonschema
import numpy as np
import pytest
from fastapi.testclient import TestClient

from crossmodal import (
    FusionConfig,
    NpyFormatError,
    QueryEmbedding,
    SearchEngine,
    SplitSpec,
    generate_synthetic_corpus,
    latency_bench,
    load_corpus,
    mock_encoder,
    rank_top_k,
    recall_at_k,
    score_query_against_corpus,
    split_dataset,
)
from crossmodal.evalbench import stored_query_embedding
from crossmodal.npyio import read_array, write_array
from crossmodal.service import ServiceConfig, create_app
from crossmodal.store import EmbeddingMatrix, LocalEmbeddingSet

from reference import ref_full_ranking, ref_recall
from test_evalbench import engineered_rank_store


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def single_thread_limits():
    try:
        from threadpoolctl import threadpool_limits
        return threadpool_limits(1)
    except ImportError:  # fall back to whatever BLAS threading is configured
        from contextlib import nullcontext
        return nullcontext()


def test_self_retrieval_exactness(tmp_path):
    with criterion("self-retrieval exactness (n=500, D=64, R=4, noise 0)"):
        t0 = time.perf_counter()
        corpus = generate_synthetic_corpus(n=500, dim=64, local_count=4,
                                           noise=0.0, seed=123, out_dir=tmp_path)
        engine = SearchEngine(load_corpus(corpus.manifest_path))
        for direction in ("text-to-image", "image-to-text"):
            report = recall_at_k(engine, corpus.pairs, [1, 5, 10], direction)
            assert report.recalls == {1: 100.0, 5: 100.0, 10: 100.0}, direction
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"took {elapsed:.1f} s"


def test_oracle_equivalence_20_random_corpora():
    with criterion("oracle equivalence on 20 random corpora (n<=200, D<=32)"):
        rng = np.random.default_rng(2024)
        for trial in range(20):
            n = int(rng.integers(5, 201))
            d = int(rng.integers(2, 33))
            r_max = int(rng.integers(1, 9))
            counts = rng.integers(1, r_max + 1, size=n)
            offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
            g = EmbeddingMatrix(rng.standard_normal((n, d)).astype(np.float32))
            local = LocalEmbeddingSet(
                rng.standard_normal((int(offsets[-1]), d)).astype(np.float32), offsets)
            cfg = FusionConfig(alpha=float(rng.uniform(0.1, 0.9)),
                               temperature_lambda=float(rng.uniform(1.0, 12.0)))
            blocks = [local.block(i).tolist() for i in range(n)]
            ranks_of_relevant = []
            for q_idx in range(3):
                query = QueryEmbedding(
                    rng.standard_normal(d).astype(np.float32),
                    rng.standard_normal((int(rng.integers(1, 5)), d)).astype(np.float32),
                    "text")
                out = score_query_against_corpus(query, g, local, cfg, k=n)
                expected_order, expected_scores = ref_full_ranking(
                    query.global_vec.tolist(), query.local_vecs.tolist(),
                    g.values.tolist(), blocks, cfg.alpha, cfg.temperature_lambda)
                assert [b.item_id for b in out] == expected_order, f"trial {trial}"
                for b in out:
                    assert b.fused_score == pytest.approx(
                        expected_scores[b.item_id], abs=1e-5)
                relevant = int(rng.integers(0, n))
                ranks_of_relevant.append(expected_order.index(relevant) + 1)
            # recall numbers must match the oracle to the last digit
            k_values = [1, 5, 10]
            oracle = ref_recall(ranks_of_relevant, k_values)
            got = {k: 100.0 * sum(1 for r in ranks_of_relevant if r <= k)
                   / len(ranks_of_relevant) for k in k_values}
            assert got == oracle


def test_recall_protocol_shape():
    with criterion("recall protocol shape (ranks 1,2,7,20 -> 25/50/75)"):
        store, pairs = engineered_rank_store()
        engine = SearchEngine(store, FusionConfig(alpha=1.0))
        report = recall_at_k(engine, pairs, [1, 5, 10], "text-to-image")
        assert report.recalls == {1: 25.0, 5: 50.0, 10: 75.0}
        assert report.recalls[1] <= report.recalls[5] <= report.recalls[10]


def test_latency_envelope(full_scale_store):
    with criterion("latency envelope (6783 items, D=512, R=8, single thread)"):
        engine = SearchEngine(full_scale_store, FusionConfig(alpha=0.5))
        rng = np.random.default_rng(0)
        qids = rng.choice(full_scale_store.item_count, size=100, replace=False)
        queries = [stored_query_embedding(engine, int(i), "text-to-image")
                   for i in qids]
        with single_thread_limits():
            fused = latency_bench(engine, queries, repetitions=1,
                                  direction="text-to-image")
            global_only = latency_bench(engine, queries, repetitions=1,
                                        direction="text-to-image", global_only=True)
        print(f"  fused mean {fused.mean_ms:.1f} ms, global mean "
              f"{global_only.mean_ms:.2f} ms")
        assert fused.mean_ms <= 400.0, f"fused mean {fused.mean_ms:.1f} ms"
        assert global_only.mean_ms <= 20.0, f"global mean {global_only.mean_ms:.2f} ms"


def test_format_fidelity(tmp_path):
    with criterion("format fidelity (round-trip, magic mutations, 60 s fuzz)"):
        rng = np.random.default_rng(31337)
        path = tmp_path / "rt.npy"
        for _ in range(1000):
            shape = (int(rng.integers(0, 12)), int(rng.integers(1, 24)))
            arr = rng.standard_normal(shape).astype(np.float32)
            write_array(path, arr)
            back = read_array(path)
            assert back.shape == arr.shape and back.tobytes() == arr.tobytes()

        good = path.read_bytes()
        bad = tmp_path / "bad.npy"
        for pos in range(8):  # every single-byte mutation of the 8 lead bytes
            for value in range(256):
                if value == good[pos]:
                    continue
                mutated = bytearray(good)
                mutated[pos] = value
                bad.write_bytes(bytes(mutated))
                with pytest.raises(NpyFormatError):
                    read_array(bad)
        for cut in range(0, len(good), max(1, len(good) // 64)):
            bad.write_bytes(good[:cut])
            with pytest.raises(NpyFormatError):
                read_array(bad)

        deadline = time.monotonic() + 60.0
        fuzz = tmp_path / "fuzz.npy"
        iterations = 0
        import warnings
        while time.monotonic() < deadline:
            mode = rng.integers(0, 4)
            if mode == 0:
                data = rng.integers(0, 256, size=int(rng.integers(0, 300)),
                                    dtype=np.uint8).tobytes()
            elif mode == 1:
                data = bytearray(good)
                for _ in range(int(rng.integers(1, 12))):
                    data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
                data = bytes(data)
            elif mode == 2:
                data = good[: int(rng.integers(0, len(good)))]
            else:
                header = rng.integers(32, 127, size=int(rng.integers(0, 120)),
                                      dtype=np.uint8).tobytes() + b"\n"
                data = (b"\x93NUMPY\x01\x00"
                        + len(header).to_bytes(2, "little") + header)
            fuzz.write_bytes(data)
            with warnings.catch_warnings():
                # random header text hits ast deprecation paths; irrelevant here
                warnings.simplefilter("ignore")
                try:
                    read_array(fuzz)
                except NpyFormatError:
                    pass
            iterations += 1
        print(f"  fuzzed {iterations} headers in 60 s without a crash")


def test_scoring_properties():
    with criterion("scoring properties (bounds, attention sums, scaling, degeneracy)"):
        rng = np.random.default_rng(555)
        from crossmodal.scoring import _softmax, global_scores, local_scores

        for _ in range(100):  # boundedness
            n, d = int(rng.integers(1, 30)), int(rng.integers(2, 16))
            g = EmbeddingMatrix((rng.standard_normal((n, d)) * 5).astype(np.float32))
            counts = rng.integers(1, 4, size=n)
            offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
            local = LocalEmbeddingSet(
                rng.standard_normal((int(offsets[-1]), d)).astype(np.float32), offsets)
            query = QueryEmbedding(rng.standard_normal(d).astype(np.float32),
                                   rng.standard_normal((2, d)).astype(np.float32), "text")
            for b in score_query_against_corpus(query, g, local, FusionConfig(), n):
                for s in (b.global_score, b.local_score, b.fused_score):
                    assert -1 - 1e-6 <= s <= 1 + 1e-6

        for _ in range(100):  # attention weight normalization
            rq, rt = int(rng.integers(1, 6)), int(rng.integers(1, 8))
            sim = rng.uniform(-1, 1, size=(rq, rt))
            weights = _softmax(9.0 * sim, axis=1)
            np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-6)

        for _ in range(100):  # ranking invariance under positive scaling
            n, d = int(rng.integers(2, 40)), int(rng.integers(2, 16))
            g = EmbeddingMatrix(rng.standard_normal((n, d)).astype(np.float32))
            counts = rng.integers(1, 4, size=n)
            offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
            local = LocalEmbeddingSet(
                rng.standard_normal((int(offsets[-1]), d)).astype(np.float32), offsets)
            query = QueryEmbedding(rng.standard_normal(d).astype(np.float32),
                                   rng.standard_normal((2, d)).astype(np.float32), "text")
            c = np.float32(rng.uniform(0.01, 100.0))
            scaled = QueryEmbedding(query.global_vec * c, query.local_vecs * c, "text")
            cfg = FusionConfig()
            a = score_query_against_corpus(query, g, local, cfg, n)
            b = score_query_against_corpus(scaled, g, local, cfg, n)
            assert [x.item_id for x in a] == [x.item_id for x in b]

        for _ in range(100):  # alpha = 1 / alpha = 0 degeneracy
            n, d = int(rng.integers(2, 30)), int(rng.integers(2, 12))
            g = EmbeddingMatrix(rng.standard_normal((n, d)).astype(np.float32))
            counts = rng.integers(1, 4, size=n)
            offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
            local = LocalEmbeddingSet(
                rng.standard_normal((int(offsets[-1]), d)).astype(np.float32), offsets)
            query = QueryEmbedding(rng.standard_normal(d).astype(np.float32),
                                   rng.standard_normal((2, d)).astype(np.float32), "text")
            out_g = score_query_against_corpus(query, g, local, FusionConfig(alpha=1.0), n)
            assert [b.item_id for b in out_g] == \
                   [i for i, _ in rank_top_k(global_scores(query.global_vec, g), n)]
            out_l = score_query_against_corpus(query, g, local, FusionConfig(alpha=0.0), n)
            assert [b.item_id for b in out_l] == \
                   [i for i, _ in rank_top_k(
                       local_scores(query.local_vecs, local, FusionConfig(alpha=0.0)), n)]


def test_split_determinism():
    with criterion("split determinism (6783 -> 5783/500/500, 10 seeds)"):
        for seed in range(10):
            spec = SplitSpec(total=6783, train=5783, val=500, test=500, seed=seed)
            first = split_dataset(spec)
            second = split_dataset(spec)
            assert first == second
            train, val, test = first
            assert (len(train), len(val), len(test)) == (5783, 500, 500)
            union = set(train) | set(val) | set(test)
            assert len(union) == 6783


def test_service_contract(full_scale_store):
    with criterion("service contract (search/text 200 + ranked, health 6783)"):
        schema = json.loads(
            resources.files("crossmodal.schemas")
            .joinpath("search_response.schema.json").read_text())
        adapter = mock_encoder(7, full_scale_store.manifest.global_dim, 8)
        engine = SearchEngine(full_scale_store, adapter=adapter)
        client = TestClient(create_app(ServiceConfig(), engine))

        resp = client.post("/search/text",
                           json={"query": "a red cow in the room", "k": 10})
        assert resp.status_code == 200
        body = resp.json()
        jsonschema.validate(body, schema)
        assert len(body) == 10
        assert [r["rank"] for r in body] == list(range(1, 11))
        fused = [r["score"]["fused"] for r in body]
        assert fused == sorted(fused, reverse=True)

        health = client.get("/health")
        assert health.status_code == 200
        assert health.json()["corpus_size"] == 6783

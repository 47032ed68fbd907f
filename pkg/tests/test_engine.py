import http.server
import json
import threading

import numpy as np
import pytest

from crossmodal import (
    EncoderHTTPError,
    EncoderResponseError,
    EncoderTimeoutError,
    DimMismatchError,
    FusionConfig,
    Query,
    QueryEmbedding,
    SearchEngine,
    generate_synthetic_corpus,
    load_corpus,
    mock_encoder,
    remote_encoder,
)


class TestQueryValidation:
    def test_exactly_one_source(self):
        with pytest.raises(ValueError):
            Query(modality="text")
        with pytest.raises(ValueError):
            Query(modality="text", text="a", image_bytes=b"x")

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            Query(modality="text", text="")

    def test_k_positive(self):
        with pytest.raises(ValueError):
            Query(modality="text", text="a", k=0)


class TestMockEncoder:
    def test_deterministic(self):
        enc = mock_encoder(1, 16, 3)
        a = enc.encode_text("a cow in the room")
        b = enc.encode_text("a cow in the room")
        assert a.global_vec.tobytes() == b.global_vec.tobytes()
        assert a.local_vecs.tobytes() == b.local_vecs.tobytes()

    def test_seed_changes_output(self):
        a = mock_encoder(1, 16, 3).encode_text("same text")
        b = mock_encoder(2, 16, 3).encode_text("same text")
        assert a.global_vec.tobytes() != b.global_vec.tobytes()

    def test_whitespace_canonicalized(self):
        enc = mock_encoder(1, 16, 3)
        a = enc.encode_text("two   words")
        b = enc.encode_text(" two words ")
        assert a.global_vec.tobytes() == b.global_vec.tobytes()

    def test_unit_norm_outputs(self):
        emb = mock_encoder(0, 32, 4).encode_text("anything")
        assert np.linalg.norm(emb.global_vec) == pytest.approx(1.0, abs=1e-5)
        np.testing.assert_allclose(np.linalg.norm(emb.local_vecs, axis=1), 1.0, atol=1e-5)

    def test_generator_pairs_collide_at_noise_zero(self, small_store):
        # generator and encoder share the hash: encoding "item-i" returns
        # exactly the pre-noise latent of item i
        enc = mock_encoder(11, small_store.manifest.global_dim, 3)
        emb = enc.encode_text("item-4")
        # small_store has noise 0.2, so cosine is high but not 1; a noise-0
        # corpus gives exact collision
        assert float(emb.global_vec @ small_store.description_global.row(4)) < 1.0

    def test_image_and_text_hash_agree_on_same_bytes(self):
        enc = mock_encoder(5, 16, 3)
        a = enc.encode_text("item-9")
        b = enc.encode_image(b"item-9")
        assert a.global_vec.tobytes() == b.global_vec.tobytes()


@pytest.fixture(scope="module")
def clean_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("clean")
    corpus = generate_synthetic_corpus(n=25, dim=16, local_count=3, noise=0.0,
                                       seed=3, out_dir=out)
    store = load_corpus(corpus.manifest_path)
    return SearchEngine(store, adapter=mock_encoder(3, 16, 3))


class TestTextToImage:
    def test_self_retrieval_via_precomputed(self, clean_corpus):
        store = clean_corpus.store
        emb = QueryEmbedding(np.array(store.image_global.row(7)),
                             np.array(store.image_local.block(7)), "text")
        results = clean_corpus.text_to_image(Query(modality="text", precomputed=emb, k=1))
        assert results[0].breakdown.item_id == 7
        assert results[0].breakdown.fused_score == pytest.approx(1.0, abs=1e-4)

    def test_self_retrieval_via_adapter(self, clean_corpus):
        results = clean_corpus.text_to_image(Query(modality="text", text="item-12", k=3))
        assert results[0].breakdown.item_id == 12
        assert results[0].rank == 1

    def test_k_larger_than_corpus(self, clean_corpus):
        results = clean_corpus.text_to_image(Query(modality="text", text="item-0", k=100))
        assert len(results) == 25

    def test_results_enriched_with_catalog(self, clean_corpus):
        for r in clean_corpus.text_to_image(Query(modality="text", text="item-1", k=5)):
            assert r.entry.source_url
            assert r.entry.item_id == r.breakdown.item_id

    def test_ranks_consecutive_scores_non_increasing(self, clean_corpus):
        results = clean_corpus.text_to_image(Query(modality="text", text="item-2", k=10))
        assert [r.rank for r in results] == list(range(1, 11))
        fused = [r.breakdown.fused_score for r in results]
        assert fused == sorted(fused, reverse=True)

    def test_wrong_modality_rejected(self, clean_corpus):
        with pytest.raises(ValueError):
            clean_corpus.text_to_image(Query(modality="image", image_bytes=b"x"))


class TestImageToText:
    def test_self_retrieval_from_bytes(self, clean_corpus):
        results = clean_corpus.image_to_text(
            Query(modality="image", image_bytes=b"item-0", k=1))
        assert results[0].breakdown.item_id == 0

    def test_description_carries_paired_image(self, clean_corpus):
        results = clean_corpus.image_to_text(
            Query(modality="image", image_bytes=b"item-5", k=3))
        for r in results:
            assert r.entry.description
            assert r.entry.image_uri

    def test_dim_mismatch_from_encoder(self, clean_corpus):
        bad_adapter = mock_encoder(3, 8, 3)  # wrong dim vs store's 16
        engine = SearchEngine(clean_corpus.store, adapter=bad_adapter)
        with pytest.raises(DimMismatchError):
            engine.image_to_text(Query(modality="image", image_bytes=b"x"))


class TestAdapterSubstitution:
    def test_identical_embeddings_identical_rankings(self, clean_corpus):
        emb = clean_corpus.adapter.encode_text("item-8")
        via_adapter = clean_corpus.text_to_image(Query(modality="text", text="item-8", k=5))
        via_precomputed = clean_corpus.text_to_image(
            Query(modality="text", precomputed=emb, k=5))
        assert [r.breakdown.item_id for r in via_adapter] == \
               [r.breakdown.item_id for r in via_precomputed]

    def test_concurrent_identical_queries_identical(self, clean_corpus):
        import concurrent.futures

        def run(_):
            res = clean_corpus.text_to_image(Query(modality="text", text="item-3", k=10))
            return [(r.breakdown.item_id, r.breakdown.fused_score) for r in res]

        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            outputs = list(pool.map(run, range(16)))
        assert all(o == outputs[0] for o in outputs)


class _StubEncoderHandler(http.server.BaseHTTPRequestHandler):
    response_body: dict = {}
    status = 200

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        body = json.dumps(type(self).response_body).encode()
        self.send_response(type(self).status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = http.server.HTTPServer(("127.0.0.1", 0), _StubEncoderHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/encode"
    server.shutdown()


class TestRemoteEncoder:
    def test_happy_path(self, stub_server):
        _StubEncoderHandler.status = 200
        _StubEncoderHandler.response_body = {
            "global": [1.0, 0.0, 0.0, 0.0],
            "locals": [[0.0, 1.0, 0.0, 0.0]],
        }
        enc = remote_encoder(stub_server, timeout_ms=2000)
        emb = enc.encode_text("hello")
        assert emb.global_vec.shape == (4,)
        assert emb.local_vecs.shape == (1, 4)
        emb2 = enc.encode_image(b"bytes")
        assert emb2.modality == "image"

    def test_malformed_response(self, stub_server):
        _StubEncoderHandler.status = 200
        _StubEncoderHandler.response_body = {"global": "nope"}
        with pytest.raises(EncoderResponseError):
            remote_encoder(stub_server).encode_text("x")

    def test_non_finite_rejected(self, stub_server):
        _StubEncoderHandler.status = 200
        _StubEncoderHandler.response_body = {"global": [1e400], "locals": [[1.0]]}
        with pytest.raises(EncoderResponseError):
            remote_encoder(stub_server).encode_text("x")

    def test_http_error(self, stub_server):
        _StubEncoderHandler.status = 500
        _StubEncoderHandler.response_body = {}
        with pytest.raises(EncoderHTTPError):
            remote_encoder(stub_server).encode_text("x")

    def test_unreachable_times_out(self):
        enc = remote_encoder("http://127.0.0.1:1/encode", timeout_ms=300)
        with pytest.raises(EncoderTimeoutError):
            enc.encode_text("x")

    def test_bad_url_rejected(self):
        with pytest.raises(ValueError):
            remote_encoder("not a url")

    def test_dim_mismatch_against_manifest(self, stub_server, clean_corpus):
        _StubEncoderHandler.status = 200
        _StubEncoderHandler.response_body = {
            "global": [0.5] * 15,   # store dim is 16
            "locals": [[0.5] * 16],
        }
        engine = SearchEngine(clean_corpus.store, adapter=remote_encoder(stub_server))
        with pytest.raises(DimMismatchError):
            engine.text_to_image(Query(modality="text", text="x"))


class TestEndToEndSelfRetrieval:
    def test_recall_at_one_is_total_on_clean_corpus(self, clean_corpus):
        n = clean_corpus.store.item_count
        for i in range(n):
            t2i = clean_corpus.text_to_image(Query(modality="text", text=f"item-{i}", k=1))
            assert t2i[0].breakdown.item_id == i
            i2t = clean_corpus.image_to_text(
                Query(modality="image", image_bytes=f"item-{i}".encode(), k=1))
            assert i2t[0].breakdown.item_id == i

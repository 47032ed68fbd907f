"""End-to-end query pipeline.

The engine accepts a text or image query, obtains its embedding through an
encoder adapter (or takes a precomputed one), scores it exhaustively
against the opposite-side stores, and returns catalog-enriched ranked
results. The engine itself never touches neural code; real encoders live
behind the adapter boundary, and a deterministic mock adapter covers tests
and synthetic corpora.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import requests

from .errors import (
    DimMismatchError,
    EncoderError,
    EncoderHTTPError,
    EncoderResponseError,
    EncoderTimeoutError,
)
from .scoring import FusionConfig, QueryEmbedding, ScoreBreakdown, score_query_against_corpus
from .store import CatalogEntry, CorpusStore

DEFAULT_K = 10
DEFAULT_TIMEOUT_MS = 5000


@dataclass(frozen=True)
class Query:
    modality: str                       # "text" or "image"
    text: str | None = None
    image_bytes: bytes | None = None
    precomputed: QueryEmbedding | None = None
    k: int = DEFAULT_K

    def __post_init__(self):
        sources = [s is not None for s in (self.text, self.image_bytes, self.precomputed)]
        if sum(sources) != 1:
            raise ValueError("exactly one of text, image_bytes, precomputed must be set")
        if self.text is not None and not self.text:
            raise ValueError("text query must be non-empty")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.modality not in ("text", "image"):
            raise ValueError(f"unknown modality {self.modality!r}")


@dataclass(frozen=True)
class RankedResult:
    rank: int                # 1-based
    breakdown: ScoreBreakdown
    entry: CatalogEntry


class EncoderAdapter(Protocol):
    """Boundary behind which a real (or mock) encoder turns raw queries
    into embeddings."""

    def encode_text(self, text: str) -> QueryEmbedding: ...

    def encode_image(self, data: bytes) -> QueryEmbedding: ...


def stable_hash(data: bytes, seed: int) -> int:
    """64-bit keyed hash shared by the mock encoder and the synthetic
    corpus generator, so generated items collide with their own queries."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(data, digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def embedding_from_hash(h: int, dim: int, local_count: int,
                        noise: float = 0.0) -> QueryEmbedding:
    """Deterministic unit global vector + local block seeded by a hash."""
    rng = np.random.default_rng(h)
    g = rng.standard_normal(dim)
    locals_ = rng.standard_normal((local_count, dim))
    if noise > 0.0:
        g = g + noise * rng.standard_normal(dim)
        locals_ = locals_ + noise * rng.standard_normal((local_count, dim))
    g = g / np.linalg.norm(g)
    locals_ = locals_ / np.linalg.norm(locals_, axis=1, keepdims=True)
    return QueryEmbedding(
        global_vec=g.astype(np.float32),
        local_vecs=locals_.astype(np.float32),
        modality="text",
    )


@dataclass(frozen=True)
class MockEncoder:
    """Deterministic test double: hashes the input to seed a fixed PRNG.

    Text is whitespace-tokenized and rejoined before hashing, so
    incidental spacing does not change the embedding. Image bytes are
    hashed as-is; a synthetic item's "image" is the UTF-8 bytes of its
    external id, which makes image queries land on their paired item.
    """

    seed: int
    dim: int
    local_count: int
    noise: float = 0.0

    def encode_text(self, text: str) -> QueryEmbedding:
        canon = " ".join(text.split()).encode("utf-8")
        emb = embedding_from_hash(stable_hash(canon, self.seed),
                                  self.dim, self.local_count, self.noise)
        return QueryEmbedding(emb.global_vec, emb.local_vecs, "text")

    def encode_image(self, data: bytes) -> QueryEmbedding:
        emb = embedding_from_hash(stable_hash(data, self.seed),
                                  self.dim, self.local_count, self.noise)
        return QueryEmbedding(emb.global_vec, emb.local_vecs, "image")


def mock_encoder(seed: int, dim: int, local_count: int, noise: float = 0.0) -> MockEncoder:
    if dim < 1 or local_count < 1:
        raise ValueError("dim and local_count must be at least 1")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    return MockEncoder(seed=seed, dim=dim, local_count=local_count, noise=noise)


@dataclass
class RemoteEncoder:
    """HTTP client for an external encoder service.

    Wire contract: POST ``endpoint_url`` with JSON
    ``{"modality": "text", "text": ...}`` or multipart form data with the
    image bytes under field "image"; the response must be JSON
    ``{"global": [f32...], "locals": [[f32...], ...]}``.
    """

    endpoint_url: str
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    session: requests.Session = field(default_factory=requests.Session)

    def _post(self, **kwargs) -> QueryEmbedding:
        try:
            resp = self.session.post(
                self.endpoint_url, timeout=self.timeout_ms / 1000.0, **kwargs)
        except requests.Timeout as exc:
            raise EncoderTimeoutError(
                f"encoder at {self.endpoint_url} timed out after {self.timeout_ms} ms"
            ) from exc
        except requests.RequestException as exc:
            raise EncoderTimeoutError(
                f"encoder at {self.endpoint_url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise EncoderHTTPError(
                f"encoder returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            g = np.asarray(body["global"], dtype=np.float32)
            locals_ = np.asarray(body["locals"], dtype=np.float32)
        except (ValueError, KeyError, TypeError) as exc:
            raise EncoderResponseError(f"malformed encoder response: {exc}") from exc
        if g.ndim != 1 or locals_.ndim != 2 or locals_.shape[0] < 1:
            raise EncoderResponseError(
                f"encoder response shapes invalid: global {g.shape}, locals {locals_.shape}")
        if not (np.isfinite(g).all() and np.isfinite(locals_).all()):
            raise EncoderResponseError("encoder response contains non-finite values")
        return QueryEmbedding(global_vec=g, local_vecs=locals_, modality="text")

    def encode_text(self, text: str) -> QueryEmbedding:
        emb = self._post(json={"modality": "text", "text": text})
        return QueryEmbedding(emb.global_vec, emb.local_vecs, "text")

    def encode_image(self, data: bytes) -> QueryEmbedding:
        emb = self._post(files={"image": ("query", data, "application/octet-stream")},
                         data={"modality": "image"})
        return QueryEmbedding(emb.global_vec, emb.local_vecs, "image")


def remote_encoder(endpoint_url: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> RemoteEncoder:
    if not endpoint_url.startswith(("http://", "https://")):
        raise ValueError(f"malformed encoder endpoint URL: {endpoint_url!r}")
    return RemoteEncoder(endpoint_url=endpoint_url, timeout_ms=timeout_ms)


class SearchEngine:
    """Immutable stores + fusion config + encoder adapter; safe for
    concurrent queries."""

    def __init__(self, store: CorpusStore, fusion: FusionConfig | None = None,
                 adapter: EncoderAdapter | None = None):
        self.store = store
        self.fusion = fusion or FusionConfig(alpha=store.manifest.default_fusion_weight)
        self.adapter = adapter

    def _embed(self, query: Query) -> QueryEmbedding:
        if query.precomputed is not None:
            return query.precomputed
        if self.adapter is None:
            raise EncoderError("no encoder adapter configured and query is not precomputed")
        if query.modality == "text":
            return self.adapter.encode_text(query.text)
        return self.adapter.encode_image(query.image_bytes)

    def _search(self, query: Query, side: str) -> list[RankedResult]:
        embedding = self._embed(query)
        corpus_global, corpus_local = self.store.side(side)
        if corpus_global.item_count:
            manifest = self.store.manifest
            if embedding.global_vec.shape[0] != manifest.global_dim:
                raise DimMismatchError(
                    f"encoder returned global dim {embedding.global_vec.shape[0]}, "
                    f"manifest says {manifest.global_dim}")
            if embedding.local_vecs.shape[1] != manifest.local_dim:
                raise DimMismatchError(
                    f"encoder returned local dim {embedding.local_vecs.shape[1]}, "
                    f"manifest says {manifest.local_dim}")
        breakdowns = score_query_against_corpus(
            embedding, corpus_global, corpus_local, self.fusion, query.k)
        return [
            RankedResult(rank=r + 1, breakdown=b, entry=self.store.entry(b.item_id))
            for r, b in enumerate(breakdowns)
        ]

    def text_to_image(self, query: Query) -> list[RankedResult]:
        """Rank corpus images for a text query."""
        if query.modality != "text":
            raise ValueError("text_to_image requires a text-modality query")
        return self._search(query, "image")

    def image_to_text(self, query: Query) -> list[RankedResult]:
        """Rank corpus descriptions for an image query.

        Each result's catalog entry carries both the description and its
        paired image (items are 1:1 pairs sharing an index).
        """
        if query.modality != "image":
            raise ValueError("image_to_text requires an image-modality query")
        return self._search(query, "description")

    def search(self, query: Query) -> list[RankedResult]:
        if query.modality == "text":
            return self.text_to_image(query)
        return self.image_to_text(query)

"""HTTP search service over an immutable engine.

Endpoints: POST /search/text, POST /search/image (multipart field
"image"), GET /items/{id}, GET /health. Responses follow the JSON schemas
published under crossmodal/schemas/. The service never mutates store
files; unknown request fields are ignored.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .engine import DEFAULT_K, DEFAULT_TIMEOUT_MS, Query, RankedResult, SearchEngine, mock_encoder, remote_encoder
from .errors import DataError, EncoderError, EncoderResponseError
from .scoring import FusionConfig
from .store import load_corpus

log = logging.getLogger("crossmodal.service")

MAX_TEXT_QUERY_BYTES = 8192
MIN_UPLOAD_LIMIT = 1 << 20  # 1 MiB

ENV_PREFIX = "ENGINE_"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    manifest_path: str = "manifest.json"
    fusion: FusionConfig = field(default_factory=FusionConfig)
    encoder_mode: str = "mock"          # "mock" or "remote"
    mock_seed: int = 0
    remote_endpoint: str = ""
    remote_timeout_ms: int = DEFAULT_TIMEOUT_MS
    default_k: int = DEFAULT_K
    max_upload_bytes: int = 8 << 20
    static_dir: str | None = None
    cors_origins: list[str] = field(default_factory=lambda: ["*"])

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")
        if self.max_upload_bytes < MIN_UPLOAD_LIMIT:
            raise ValueError("max_upload_bytes must be at least 1 MiB")
        if self.encoder_mode not in ("mock", "remote"):
            raise ValueError(f"unknown encoder_mode {self.encoder_mode!r}")
        if self.default_k < 1:
            raise ValueError("default_k must be at least 1")


def load_service_config(path: str | os.PathLike | None = None,
                        env: dict | None = None) -> ServiceConfig:
    """Config file JSON with ENGINE_-prefixed environment overrides."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot parse config {path}: {exc}") from exc

    def pick(key: str, cast, default):
        env_val = env.get(ENV_PREFIX + key.upper())
        if env_val is not None:
            return cast(env_val)
        if key in raw:
            return cast(raw[key])
        return default

    fusion = FusionConfig.from_dict(raw.get("fusion", {}))
    return ServiceConfig(
        host=pick("host", str, "127.0.0.1"),
        port=pick("port", int, 8080),
        manifest_path=pick("manifest_path", str, "manifest.json"),
        fusion=fusion,
        encoder_mode=pick("encoder_mode", str, "mock"),
        mock_seed=pick("mock_seed", int, 0),
        remote_endpoint=pick("remote_endpoint", str, ""),
        remote_timeout_ms=pick("remote_timeout_ms", int, DEFAULT_TIMEOUT_MS),
        default_k=pick("default_k", int, DEFAULT_K),
        max_upload_bytes=pick("max_upload_bytes", int, 8 << 20),
        static_dir=pick("static_dir", str, None) or None,
        cors_origins=(env.get(ENV_PREFIX + "CORS_ORIGINS", "").split(",")
                      if env.get(ENV_PREFIX + "CORS_ORIGINS")
                      else list(raw.get("cors_origins", ["*"]))),
    )


def build_engine(config: ServiceConfig) -> SearchEngine:
    store = load_corpus(config.manifest_path)
    if config.encoder_mode == "remote":
        adapter = remote_encoder(config.remote_endpoint, config.remote_timeout_ms)
    else:
        adapter = mock_encoder(config.mock_seed, store.manifest.global_dim,
                               local_count=max(1, int(store.image_local.region_counts().mean()))
                               if store.item_count else 1)
    return SearchEngine(store, config.fusion, adapter)


def _result_payload(results: list[RankedResult]) -> list[dict]:
    return [
        {
            "rank": r.rank,
            "item_id": r.breakdown.item_id,
            "external_id": r.entry.external_id,
            "score": {
                "global": r.breakdown.global_score,
                "local": r.breakdown.local_score,
                "fused": r.breakdown.fused_score,
            },
            "description": r.entry.description,
            "image_uri": r.entry.image_uri,
            "source_url": r.entry.source_url,
        }
        for r in results
    ]


def create_app(config: ServiceConfig, engine: SearchEngine | None = None) -> FastAPI:
    """Build the service app. Pass ``engine=None`` with ``defer_load`` via
    the serve command; until an engine is attached, data endpoints 503."""
    app = FastAPI(title="crossmodal search service", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.config = config
    app.state.started = time.monotonic()

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    def ready() -> SearchEngine | None:
        return app.state.engine

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        log.info("%s %s -> %d (%.2f ms)", request.method, request.url.path,
                 response.status_code, (time.perf_counter() - t0) * 1000.0)
        return response

    @app.post("/search/text")
    async def search_text(request: Request):
        engine = ready()
        if engine is None:
            return error(503, "stores not loaded")
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return error(400, "request body must be a JSON object")
        query_text = body.get("query")
        if not isinstance(query_text, str) or not query_text:
            return error(400, "field 'query' must be a non-empty string")
        if len(query_text.encode("utf-8")) > MAX_TEXT_QUERY_BYTES:
            return error(400, f"query exceeds {MAX_TEXT_QUERY_BYTES} bytes")
        k = body.get("k", config.default_k)
        if not isinstance(k, int) or k < 1:
            return error(400, "field 'k' must be a positive integer")
        if engine.store.item_count == 0:
            return JSONResponse(content=[])
        try:
            results = engine.text_to_image(Query(modality="text", text=query_text, k=k))
        except EncoderError as exc:
            return error(502, f"encoder failure: {exc}")
        return JSONResponse(content=_result_payload(results))

    @app.post("/search/image")
    async def search_image(image: UploadFile | None = None, k: int | None = None):
        engine = ready()
        if engine is None:
            return error(503, "stores not loaded")
        if image is None:
            return error(400, "multipart field 'image' is required")
        data = await image.read()
        if not data:
            return error(400, "uploaded image is empty")
        if len(data) > config.max_upload_bytes:
            return error(400, f"upload exceeds limit of {config.max_upload_bytes} bytes")
        if engine.store.item_count == 0:
            return JSONResponse(content=[])
        try:
            results = engine.image_to_text(
                Query(modality="image", image_bytes=data, k=k or config.default_k))
        except EncoderResponseError as exc:
            return error(415, f"image not decodable by encoder: {exc}")
        except EncoderError as exc:
            return error(502, f"encoder failure: {exc}")
        return JSONResponse(content=_result_payload(results))

    @app.get("/items/{item_id}")
    async def get_item(item_id: str):
        engine = ready()
        if engine is None:
            return error(503, "stores not loaded")
        if not item_id.lstrip("-").isdigit():
            return error(400, f"item id must be an integer, got {item_id!r}")
        idx = int(item_id)
        try:
            entry = engine.store.entry(idx)
        except IndexError:
            return error(404, f"no item with id {idx}")
        g, loc = engine.store.side("image")
        return JSONResponse(content={
            "item_id": entry.item_id,
            "external_id": entry.external_id,
            "description": entry.description,
            "image_uri": entry.image_uri,
            "source_url": entry.source_url,
            "stats": {
                "global_dim": engine.store.manifest.global_dim,
                "local_dim": engine.store.manifest.local_dim,
                "region_count": int(loc.region_counts()[idx]),
            },
        })

    @app.get("/health")
    async def health():
        engine = ready()
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        m = engine.store.manifest
        return JSONResponse(content={
            "status": "ok",
            "corpus_size": engine.store.item_count,
            "dims": {"global": m.global_dim, "local": m.local_dim},
            "encoder_mode": config.encoder_mode,
            "uptime_s": time.monotonic() - app.state.started,
        })

    if config.static_dir:
        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app

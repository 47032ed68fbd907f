"""Embedding stores, item catalog, and the manifest that ties them together.

A corpus lives on disk as six NPY v1.0 array files (global matrix plus
local values+offsets, for each of the image and description sides), a
JSON-lines catalog, and a JSON manifest carrying dimensions and per-file
content checksums. Everything is immutable after load and safe to share
across threads.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import npyio
from .errors import ChecksumMismatchError, DataError, DimMismatchError

NORM_TOLERANCE = 1e-4
CHECKSUM_CHUNK = 1 << 20


def file_checksum(path: str | os.PathLike) -> str:
    """64-bit content checksum of a file, as 16 hex digits.

    BLAKE2b truncated to 8 bytes; used for corruption detection only.
    """
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as f:
        while chunk := f.read(CHECKSUM_CHUNK):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N x D row-major float32 global representations, one row per item."""

    values: np.ndarray  # (item_count, dim) float32, C order
    normalized: bool = False

    @property
    def item_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def row(self, item_id: int) -> np.ndarray:
        """Zero-copy view of one item's global vector."""
        if not 0 <= item_id < self.item_count:
            raise IndexError(f"item id {item_id} out of range [0, {self.item_count})")
        return self.values[item_id]

    def row_norms(self) -> np.ndarray:
        """Per-row L2 norms in float64, computed once and cached."""
        cached = getattr(self, "_row_norms", None)
        if cached is None:
            cached = np.sqrt(np.einsum("ij,ij->i", self.values, self.values, dtype=np.float64))
            object.__setattr__(self, "_row_norms", cached)
        return cached

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.dtype != np.float32:
            raise DataError("global matrix must be a 2-D float32 array")
        if self.item_count and not np.isfinite(self.values).all():
            raise DataError("global matrix contains non-finite values")
        if self.normalized and self.item_count:
            norms = self.row_norms()
            if np.abs(norms - 1.0).max() > NORM_TOLERANCE:
                raise DataError(
                    "matrix flagged normalized but a row norm deviates from 1.0 "
                    f"by {np.abs(norms - 1.0).max():.2e}"
                )


@dataclass(frozen=True)
class LocalEmbeddingSet:
    """Ragged per-item local (region/token) vectors in one flat array.

    Item i owns rows offsets[i]:offsets[i+1] of ``values``. Every item has
    at least one local vector, so offsets are strictly increasing.
    """

    values: np.ndarray   # (total_regions, dim) float32
    offsets: np.ndarray  # (item_count + 1,) int64 prefix sums

    @property
    def item_count(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def block(self, item_id: int) -> np.ndarray:
        """Zero-copy view of one item's local vectors."""
        if not 0 <= item_id < self.item_count:
            raise IndexError(f"item id {item_id} out of range [0, {self.item_count})")
        return self.values[self.offsets[item_id]: self.offsets[item_id + 1]]

    def region_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def row_norms(self) -> np.ndarray:
        cached = getattr(self, "_row_norms", None)
        if cached is None:
            cached = np.sqrt(np.einsum("ij,ij->i", self.values, self.values, dtype=np.float64))
            object.__setattr__(self, "_row_norms", cached)
        return cached

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.dtype != np.float32:
            raise DataError("local values must be a 2-D float32 array")
        if self.offsets.ndim != 1 or self.offsets.dtype != np.int64:
            raise DataError("local offsets must be a 1-D int64 array")
        if self.offsets.shape[0] < 1 or self.offsets[0] != 0:
            raise DataError("local offsets must start at 0")
        diffs = np.diff(self.offsets)
        if (diffs < 0).any():
            raise DataError("local offsets are not non-decreasing")
        if (diffs == 0).any():
            raise DataError("every item needs at least one local vector")
        if self.offsets[-1] != self.values.shape[0]:
            raise DataError(
                f"offsets end at {int(self.offsets[-1])} but values has "
                f"{self.values.shape[0]} rows"
            )
        if self.values.size and not np.isfinite(self.values).all():
            raise DataError("local values contain non-finite entries")


@dataclass(frozen=True)
class CatalogEntry:
    item_id: int
    external_id: str
    description: str
    image_uri: str
    source_url: str


@dataclass(frozen=True)
class StoreManifest:
    corpus_name: str
    image_count: int
    description_count: int
    global_dim: int
    local_dim: int
    image_global_path: Path
    image_local_path: Path
    image_local_offsets_path: Path
    description_global_path: Path
    description_local_path: Path
    description_local_offsets_path: Path
    catalog_path: Path
    checksums: dict[str, str] = field(default_factory=dict)
    normalized_at_ingest: bool = True
    default_fusion_weight: float = 0.5

    def store_paths(self) -> list[Path]:
        return [
            self.image_global_path,
            self.image_local_path,
            self.image_local_offsets_path,
            self.description_global_path,
            self.description_local_path,
            self.description_local_offsets_path,
        ]


_MANIFEST_PATH_KEYS = (
    "image_global_path",
    "image_local_path",
    "image_local_offsets_path",
    "description_global_path",
    "description_local_path",
    "description_local_offsets_path",
    "catalog_path",
)


def load_manifest(path: str | os.PathLike) -> StoreManifest:
    """Parse and fully verify a manifest: files exist, checksums and dims match."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse manifest {path}: {exc}") from exc

    required = {
        "corpus_name", "image_count", "description_count",
        "global_dim", "local_dim", "checksums",
        "normalized_at_ingest", "default_fusion_weight", *_MANIFEST_PATH_KEYS,
    }
    missing = required - set(raw)
    if missing:
        raise DataError(f"{path}: manifest missing fields {sorted(missing)}")
    base = path.parent
    fields = {k: base / raw[k] for k in _MANIFEST_PATH_KEYS}
    manifest = StoreManifest(
        corpus_name=str(raw["corpus_name"]),
        image_count=int(raw["image_count"]),
        description_count=int(raw["description_count"]),
        global_dim=int(raw["global_dim"]),
        local_dim=int(raw["local_dim"]),
        checksums=dict(raw["checksums"]),
        normalized_at_ingest=bool(raw["normalized_at_ingest"]),
        default_fusion_weight=float(raw["default_fusion_weight"]),
        **fields,
    )
    if manifest.image_count < 0 or manifest.description_count < 0:
        raise DataError(f"{path}: negative item counts")
    if manifest.global_dim < 1 or manifest.local_dim < 1:
        raise DataError(f"{path}: dims must be positive")
    if not 0.0 <= manifest.default_fusion_weight <= 1.0:
        raise DataError(f"{path}: default_fusion_weight must lie in [0, 1]")

    for p in [*manifest.store_paths(), manifest.catalog_path]:
        if not p.is_file():
            raise DataError(f"missing store file: {p}")
        key = p.name
        expected = manifest.checksums.get(key)
        if expected is None:
            raise DataError(f"{path}: no checksum recorded for {key}")
        actual = file_checksum(p)
        if actual != expected:
            raise ChecksumMismatchError(
                f"checksum mismatch for {p}: manifest says {expected}, file is {actual}"
            )

    _check_header(manifest.image_global_path, "<f4", (manifest.image_count, manifest.global_dim))
    _check_header(manifest.description_global_path, "<f4",
                  (manifest.description_count, manifest.global_dim))
    for values_path, offsets_path, count in (
        (manifest.image_local_path, manifest.image_local_offsets_path, manifest.image_count),
        (manifest.description_local_path, manifest.description_local_offsets_path,
         manifest.description_count),
    ):
        shape, _ = npyio.read_shape(values_path)
        if len(shape) != 2 or shape[1] != manifest.local_dim:
            raise DimMismatchError(
                f"{values_path}: header shape {shape} disagrees with local_dim "
                f"{manifest.local_dim}"
            )
        oshape, odescr = npyio.read_shape(offsets_path)
        if odescr != "<i8" or len(oshape) != 1 or oshape[0] != count + 1:
            raise DimMismatchError(
                f"{offsets_path}: expected {count + 1} int64 offsets, header says "
                f"{oshape} {odescr}"
            )
    return manifest


def _check_header(path: Path, descr: str, shape: tuple[int, int]) -> None:
    actual_shape, actual_descr = npyio.read_shape(path)
    if actual_descr != descr or actual_shape != shape:
        raise DimMismatchError(
            f"{path}: header says {actual_shape} {actual_descr}, manifest implies "
            f"{shape} {descr}"
        )


def load_global_matrix(
    path: str | os.PathLike,
    expected_dim: int | None = None,
    normalized: bool = False,
) -> EmbeddingMatrix:
    values = npyio.read_array(path, expected_descr="<f4", expected_rank=2)
    if expected_dim is not None and values.shape[1] != expected_dim:
        raise DimMismatchError(
            f"{path}: dim {values.shape[1]}, expected {expected_dim}"
        )
    matrix = EmbeddingMatrix(values=values, normalized=normalized)
    matrix.validate()
    return matrix


def load_local_tensor(
    path: str | os.PathLike,
    offsets_path: str | os.PathLike,
    expected_dim: int | None = None,
) -> LocalEmbeddingSet:
    values = npyio.read_array(path, expected_descr="<f4", expected_rank=2)
    offsets = npyio.read_array(offsets_path, expected_descr="<i8", expected_rank=1)
    if expected_dim is not None and values.shape[1] != expected_dim:
        raise DimMismatchError(f"{path}: dim {values.shape[1]}, expected {expected_dim}")
    local = LocalEmbeddingSet(values=values, offsets=offsets)
    local.validate()
    return local


def write_array_file(shape, values, path: str | os.PathLike) -> None:
    """Write float32 values with the given shape as a canonical NPY v1.0 file."""
    arr = np.asarray(values, dtype=np.float32).reshape(-1)
    count = 1
    for s in shape:
        count *= int(s)
    if arr.size != count:
        raise DataError(f"shape {tuple(shape)} needs {count} values, got {arr.size}")
    npyio.write_array(path, arr.reshape(tuple(int(s) for s in shape)))


def normalize_rows(matrix: EmbeddingMatrix) -> tuple[EmbeddingMatrix, int]:
    """Scale every nonzero row to unit L2 norm.

    Zero rows are left untouched and counted; the normalized flag is only
    set when there were none.
    """
    norms = matrix.row_norms()
    zero_rows = int((norms == 0.0).sum())
    safe = np.where(norms == 0.0, 1.0, norms)
    values = (matrix.values / safe[:, None]).astype(np.float32)
    return EmbeddingMatrix(values=values, normalized=zero_rows == 0), zero_rows


def load_catalog(path: str | os.PathLike) -> list[CatalogEntry]:
    entries: list[CatalogEntry] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno + 1}: invalid JSON: {exc}") from exc
            try:
                entry = CatalogEntry(
                    item_id=len(entries),
                    external_id=str(obj["external_id"]),
                    description=str(obj["description"]),
                    image_uri=str(obj["image_uri"]),
                    source_url=str(obj["source_url"]),
                )
            except KeyError as exc:
                raise DataError(f"{path}:{lineno + 1}: missing field {exc}") from exc
            if not entry.description:
                raise DataError(f"{path}:{lineno + 1}: empty description")
            entries.append(entry)
    return entries


def write_catalog(entries: list[CatalogEntry], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(json.dumps({
                "external_id": e.external_id,
                "description": e.description,
                "image_uri": e.image_uri,
                "source_url": e.source_url,
            }, sort_keys=True))
            f.write("\n")


@dataclass(frozen=True)
class CorpusStore:
    """All four representation stores plus the catalog, loaded and verified."""

    manifest: StoreManifest
    image_global: EmbeddingMatrix
    image_local: LocalEmbeddingSet
    description_global: EmbeddingMatrix
    description_local: LocalEmbeddingSet
    catalog: list[CatalogEntry]

    @property
    def item_count(self) -> int:
        return self.image_global.item_count

    def side(self, side: str) -> tuple[EmbeddingMatrix, LocalEmbeddingSet]:
        if side == "image":
            return self.image_global, self.image_local
        if side == "description":
            return self.description_global, self.description_local
        raise ValueError(f"unknown side {side!r}")

    def entry(self, item_id: int) -> CatalogEntry:
        if not 0 <= item_id < len(self.catalog):
            raise IndexError(f"item id {item_id} out of range")
        return self.catalog[item_id]

    def subset(self, item_ids: list[int]) -> "CorpusStore":
        """A new store over the given items, re-indexed densely in list order."""
        ids = np.asarray(item_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.item_count):
            raise IndexError("subset ids out of range")

        def sub_local(local: LocalEmbeddingSet) -> LocalEmbeddingSet:
            blocks = [local.block(int(i)) for i in ids]
            counts = np.array([b.shape[0] for b in blocks], dtype=np.int64)
            offsets = np.concatenate(([0], np.cumsum(counts)))
            values = (np.concatenate(blocks) if blocks
                      else np.empty((0, local.dim), dtype=np.float32))
            return LocalEmbeddingSet(values=np.ascontiguousarray(values), offsets=offsets)

        manifest = dataclasses.replace(
            self.manifest,
            corpus_name=self.manifest.corpus_name + "#subset",
            image_count=len(item_ids),
            description_count=len(item_ids),
        )
        catalog = [
            dataclasses.replace(self.catalog[int(old)], item_id=new)
            for new, old in enumerate(ids)
        ]
        return CorpusStore(
            manifest=manifest,
            image_global=EmbeddingMatrix(
                np.ascontiguousarray(self.image_global.values[ids]),
                normalized=self.image_global.normalized),
            image_local=sub_local(self.image_local),
            description_global=EmbeddingMatrix(
                np.ascontiguousarray(self.description_global.values[ids]),
                normalized=self.description_global.normalized),
            description_local=sub_local(self.description_local),
            catalog=catalog,
        )


def load_corpus(manifest_path: str | os.PathLike) -> CorpusStore:
    """Load and validate everything the manifest points at."""
    manifest = load_manifest(manifest_path)
    normalized = manifest.normalized_at_ingest
    image_global = load_global_matrix(
        manifest.image_global_path, manifest.global_dim, normalized=normalized)
    description_global = load_global_matrix(
        manifest.description_global_path, manifest.global_dim, normalized=normalized)
    image_local = load_local_tensor(
        manifest.image_local_path, manifest.image_local_offsets_path, manifest.local_dim)
    description_local = load_local_tensor(
        manifest.description_local_path, manifest.description_local_offsets_path,
        manifest.local_dim)
    catalog = load_catalog(manifest.catalog_path)

    if image_global.item_count != manifest.image_count:
        raise DataError(
            f"{manifest.image_global_path}: {image_global.item_count} rows, manifest "
            f"says {manifest.image_count}")
    if description_global.item_count != manifest.description_count:
        raise DataError(
            f"{manifest.description_global_path}: {description_global.item_count} rows, "
            f"manifest says {manifest.description_count}")
    if len(catalog) != manifest.image_count:
        raise DataError(
            f"{manifest.catalog_path}: {len(catalog)} entries, manifest says "
            f"{manifest.image_count}")
    return CorpusStore(
        manifest=manifest,
        image_global=image_global,
        image_local=image_local,
        description_global=description_global,
        description_local=description_local,
        catalog=catalog,
    )


def build_manifest(
    out_path: str | os.PathLike,
    corpus_name: str,
    image_global: str | os.PathLike,
    image_local: str | os.PathLike,
    image_local_offsets: str | os.PathLike,
    description_global: str | os.PathLike,
    description_local: str | os.PathLike,
    description_local_offsets: str | os.PathLike,
    catalog: str | os.PathLike,
    normalized_at_ingest: bool = True,
    default_fusion_weight: float = 0.5,
) -> Path:
    """Ingest raw store files: derive counts/dims from headers, compute
    checksums, and write the manifest next to them.

    All store files must live in (or below) the manifest's directory so the
    manifest can reference them relatively.
    """
    out_path = Path(out_path)
    base = out_path.parent
    paths = {
        "image_global_path": Path(image_global),
        "image_local_path": Path(image_local),
        "image_local_offsets_path": Path(image_local_offsets),
        "description_global_path": Path(description_global),
        "description_local_path": Path(description_local),
        "description_local_offsets_path": Path(description_local_offsets),
        "catalog_path": Path(catalog),
    }
    for p in paths.values():
        if not p.is_file():
            raise DataError(f"missing input file: {p}")

    ig_shape, ig_descr = npyio.read_shape(paths["image_global_path"])
    dg_shape, dg_descr = npyio.read_shape(paths["description_global_path"])
    il_shape, _ = npyio.read_shape(paths["image_local_path"])
    dl_shape, _ = npyio.read_shape(paths["description_local_path"])
    if ig_descr != "<f4" or dg_descr != "<f4" or len(ig_shape) != 2 or len(dg_shape) != 2:
        raise DataError("global stores must be 2-D float32 arrays")
    if ig_shape[1] != dg_shape[1]:
        raise DimMismatchError(
            f"global dims disagree: {ig_shape[1]} (image) vs {dg_shape[1]} (description)")
    if len(il_shape) != 2 or len(dl_shape) != 2 or il_shape[1] != dl_shape[1]:
        raise DimMismatchError("local stores must be 2-D with a common dim")

    checksums = {p.name: file_checksum(p) for p in paths.values()}
    doc = {
        "corpus_name": corpus_name,
        "image_count": ig_shape[0],
        "description_count": dg_shape[0],
        "global_dim": ig_shape[1],
        "local_dim": il_shape[1],
        "checksums": checksums,
        "normalized_at_ingest": normalized_at_ingest,
        "default_fusion_weight": default_fusion_weight,
    }
    for key, p in paths.items():
        doc[key] = os.path.relpath(p, base)
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    return out_path

"""
End-to-end evaluation
=====================

Generates a small synthetic corpus on disk, loads it back through the
manifest, runs a text and an image search, then measures recall and
latency the same way the CLI `eval` and `bench` commands do.
Run with `python3 demos/end_to_end_eval.py`.
"""
import tempfile
from pathlib import Path

import numpy as np

from crossmodal import (
    FusionConfig,
    Query,
    SearchEngine,
    SplitSpec,
    generate_synthetic_corpus,
    latency_bench,
    load_corpus,
    mock_encoder,
    recall_at_k,
    split_dataset,
)
from crossmodal.evalbench import stored_query_embedding

workdir = Path(tempfile.mkdtemp(prefix="retrieval-demo-"))
print(f"writing corpus under {workdir}")

# 200 image/description pairs, 32-d embeddings, 3 local vectors each.
# noise=0.2 perturbs the paired sides so retrieval is hard but solvable.
corpus = generate_synthetic_corpus(n=200, dim=32, local_count=3,
                                   noise=0.2, seed=42, out_dir=workdir)
store = load_corpus(corpus.manifest_path)
print(f"loaded {store.item_count} items, "
      f"global dim {store.manifest.global_dim}")

# The adapter seed matches the corpus seed so query hashes line up with
# the stored latents.
adapter = mock_encoder(42, dim=32, local_count=3)
engine = SearchEngine(store, FusionConfig(alpha=0.5), adapter=adapter)

# Text search: the mock encoder maps "item-17" to item 17's latent, so a
# noisy corpus should still put it at or near the top.
print("\ntext search for 'item-17':")
for r in engine.text_to_image(Query(modality="text", text="item-17", k=3)):
    print(f"  {r.entry.external_id:<12} fused {r.breakdown.fused_score:+.4f}")

# Image search goes through the other encoder path.
print("\nimage search with bytes b'item-5':")
for r in engine.image_to_text(Query(modality="image", image_bytes=b"item-5", k=3)):
    print(f"  {r.entry.external_id:<12} fused {r.breakdown.fused_score:+.4f}")

# Deterministic split, then recall over the test portion.
train, val, test = split_dataset(SplitSpec(total=200, train=160, val=20,
                                           test=20, seed=7))
pairs = [(i, i) for i in test]
for direction in ("text-to-image", "image-to-text"):
    report = recall_at_k(engine, pairs, [1, 5, 10], direction)
    print(f"\n{direction}: " + "  ".join(
        f"R@{k}={v:.1f}" for k, v in sorted(report.recalls.items())))

# Latency over 20 stored queries, warm-up excluded.
queries = [stored_query_embedding(engine, i, "text-to-image") for i in test]
report = latency_bench(engine, queries, repetitions=2, direction="text-to-image")
print(f"\nfused latency: mean {report.mean_ms:.2f} ms  "
      f"p50 {report.p50_ms:.2f}  p95 {report.p95_ms:.2f}")

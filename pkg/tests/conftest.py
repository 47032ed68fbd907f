import sys
from pathlib import Path

import pytest

from crossmodal import SearchEngine, generate_synthetic_corpus, load_corpus, mock_encoder

sys.path.insert(0, str(Path(__file__).parent))  # makes `reference` importable

FULL_SCALE_N = 6783
FULL_SCALE_DIM = 512
FULL_SCALE_LOCALS = 8
FULL_SCALE_SEED = 7


@pytest.fixture(scope="session")
def full_scale_corpus(tmp_path_factory):
    """Corpus at the size and dims of the production store; built once."""
    out = tmp_path_factory.mktemp("full_scale")
    return generate_synthetic_corpus(
        n=FULL_SCALE_N, dim=FULL_SCALE_DIM, local_count=FULL_SCALE_LOCALS,
        noise=0.3, seed=FULL_SCALE_SEED, out_dir=out)


@pytest.fixture(scope="session")
def full_scale_store(full_scale_corpus):
    return load_corpus(full_scale_corpus.manifest_path)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """30 items, dim 16, 3 locals, mild noise, seed 11."""
    out = tmp_path_factory.mktemp("small")
    return generate_synthetic_corpus(n=30, dim=16, local_count=3, noise=0.2,
                                     seed=11, out_dir=out)


@pytest.fixture(scope="session")
def small_store(small_corpus):
    return load_corpus(small_corpus.manifest_path)


@pytest.fixture(scope="session")
def small_engine(small_store):
    adapter = mock_encoder(11, small_store.manifest.global_dim, 3)
    return SearchEngine(small_store, adapter=adapter)

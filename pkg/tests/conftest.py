"""Shared fixtures: corpus paths and the expensive shared training runs."""

import os

import pytest

from abcgen.corpus import build_vocabulary, load_corpus
from abcgen.training import RunConfig, train

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS_PATH = os.path.join(REPO_ROOT, "data", "folk_corpus.abc")


@pytest.fixture(scope="session")
def corpus_path() -> str:
    return CORPUS_PATH


@pytest.fixture(scope="session")
def corpus():
    return load_corpus([CORPUS_PATH])


@pytest.fixture(scope="session")
def vocab(corpus):
    return build_vocabulary(corpus)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """The 15-epoch desk-scale training run; shared by several tests.

    H=128, B=16, L=64 over the bundled corpus with all other settings at
    their defaults.  Returns (history, out_dir, elapsed_seconds).
    """
    import time

    out_dir = str(tmp_path_factory.mktemp("desk_run"))
    cfg = RunConfig(corpus=(CORPUS_PATH,), out_dir=out_dir, seed=0, epochs=15,
                    hidden_size=128, batch_size=16, seq_len=64)
    started = time.perf_counter()
    history = train(cfg)
    elapsed = time.perf_counter() - started
    return history, out_dir, elapsed

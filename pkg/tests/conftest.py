import numpy as np
import pytest

from wsdfm.core import Dataset, GridSpec
from wsdfm.coupling import PairedDataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_pairs(vocab=4, n_pairs=4, seed=0):
    """Random coupling on a tiny grid with N=2."""
    gen = np.random.default_rng(seed)
    spec = GridSpec(2, vocab)
    src = gen.integers(0, vocab, (n_pairs, 2))
    dst = gen.integers(0, vocab, (n_pairs, 2))
    return PairedDataset(spec, src, dst)


def dataset(tokens, vocab=128):
    tokens = np.asarray(tokens)
    return Dataset(GridSpec(tokens.shape[1], vocab), tokens)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

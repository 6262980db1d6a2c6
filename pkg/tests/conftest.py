import numpy as np
import pytest

from cqexp.linalg import random_density_matrix
from cqexp.states import CQChannel, as_distribution


def random_channel(rng, d, dim=2, rank=None):
    outs = tuple(random_density_matrix(dim, rank, rng) for _ in range(d))
    return CQChannel(d, outs)


def random_distribution(rng, d):
    p = rng.dirichlet(np.ones(d))
    return as_distribution(p / p.sum(), d)


def diag_channel(rows):
    """Classical channel: rows[z] is W(.|z)."""
    outs = tuple(np.diag(np.asarray(r, dtype=float)).astype(complex) for r in rows)
    return CQChannel(len(rows), outs)


def h2(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * np.log2(x) - (1 - x) * np.log2(1 - x)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

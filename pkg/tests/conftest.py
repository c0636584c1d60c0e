import numpy as np
import pytest

from iclhier.data import DataKind, Dataset, Partition, canonical_labels

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_dataset(model, rng, n=None, d=None, max_count=3, density=0.5):
    """Small random dataset suitable for ``model``."""
    n = n or int(rng.integers(2, 7))
    d = d or int(rng.integers(1, 5))
    if model == "mom":
        x = rng.integers(0, max_count + 1, (n, d)) * (rng.random((n, d)) < density)
        return Dataset.from_dense(x, DataKind.COUNT_MATRIX)
    if model == "sbm":
        x = (rng.random((n, n)) < density).astype(int)
        np.fill_diagonal(x, 0)
        return Dataset.from_dense(x, DataKind.DIRECTED_GRAPH)
    if model == "dcsbm":
        x = rng.integers(0, max_count + 1, (n, n)) * (rng.random((n, n)) < density)
        return Dataset.from_dense(x, DataKind.DIRECTED_GRAPH, self_loops_allowed=True)
    if model == "lbm-bern":
        x = (rng.random((n, d)) < density).astype(int)
        return Dataset.from_dense(x, DataKind.BIPARTITE_MATRIX)
    x = rng.integers(0, max_count + 1, (n, d)) * (rng.random((n, d)) < density)
    return Dataset.from_dense(x, DataKind.BIPARTITE_MATRIX)


def random_partition_for(ds, rng, max_k=3):
    if ds.is_bipartite:
        r = rng.integers(0, min(max_k, ds.n), ds.n)
        c = rng.integers(0, min(max_k, ds.d), ds.d) + max_k
        return Partition(canonical_labels(np.concatenate([r, c])), n_rows=ds.n)
    return Partition(canonical_labels(rng.integers(0, min(max_k, ds.n), ds.n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

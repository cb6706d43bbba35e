import pytest

from twosdr.bench import bench_table2

ACCEPT_N = 1000
ACCEPT_REPS = 50


@pytest.fixture(scope="session")
def table2_gaussian():
    """Shared replication batch: rank-selection accuracy, Gaussian noise."""
    return bench_table2(n=ACCEPT_N, reps=ACCEPT_REPS, seed=0,
                        sigma2=1.1, noise="gaussian")


@pytest.fixture(scope="session")
def table2_t5():
    """Shared replication batch: rank-selection accuracy, heavy-tailed noise."""
    return bench_table2(n=ACCEPT_N, reps=ACCEPT_REPS, seed=0,
                        sigma2=1.1, noise="t5")

import numpy as np
import pytest

from spikeslab.regression import RawDataset, StandardizedDesign, standardize

# acceptance results collected for the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def orthogonal_design(n, K, rng, y=None):
    """Standardized design with ``X'X = n I`` exactly (columns orthogonal to the intercept)."""
    z = rng.standard_normal((n, K))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)
    x = np.sqrt(n) * q
    if y is None:
        y = rng.standard_normal(n)
    y = np.asarray(y, dtype=float)
    return StandardizedDesign(x=x, y=y - y.mean(), centers=np.zeros(K), scales=np.ones(K),
                              y_mean=float(y.mean()), column_names=[f"x{k + 1}" for k in range(K)])


def correlated_design(n, K, rng, rho=0.6, beta=None, noise=1.0):
    idx = np.arange(K)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    x = rng.multivariate_normal(np.zeros(K), cov, size=n)
    beta = np.zeros(K) if beta is None else np.asarray(beta, dtype=float)
    y = x @ beta + noise * rng.standard_normal(n)
    return standardize(RawDataset(x=x, y=y))

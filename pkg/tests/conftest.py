import numpy as np
import pytest

from gdm.data import make_dataset


def dense_dataset(F, y):
    """Dataset from a dense feature-major array ``F`` of shape (m, n)."""
    return make_dataset(np.asarray(F, dtype=float), np.asarray(y, dtype=float))


def standardize(F):
    """Dense oracle for the standardized view: zero mean, unit norm per row."""
    F = np.asarray(F, dtype=float)
    C = F - F.mean(axis=1, keepdims=True)
    return C / np.linalg.norm(C, axis=1, keepdims=True)


def centered_orthonormal(n, k, rng):
    """``k`` orthonormal length-``n`` vectors, each orthogonal to the ones vector."""
    A = rng.standard_normal((n, k + 1))
    A[:, 0] = 1.0
    Q, _ = np.linalg.qr(A)
    return Q[:, 1:].T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_random(rng):
    """A 12-feature, 30-sample sparse-ish dataset with both classes."""
    F = rng.standard_normal((12, 30))
    F[rng.random(F.shape) < 0.5] = 0.0
    y = np.tile([1.0, -1.0], 15)
    return dense_dataset(F, y)

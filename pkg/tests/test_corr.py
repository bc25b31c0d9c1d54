import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from gdm.corr import pairwise_correlations, pearson, pearson_with, redundancy_rate
from gdm.errors import DataError

from conftest import centered_orthonormal, dense_dataset


def test_self_and_negated_correlation(small_random):
    ds = small_random
    for j in range(ds.n_features):
        assert pearson(ds, j, j) == pytest.approx(1.0, abs=1e-12)
    F = ds.features.toarray()
    neg = dense_dataset(np.vstack([F[0], 5.0 - F[0]]), ds.labels)
    assert pearson(neg, 0, 1) == pytest.approx(-1.0, abs=1e-12)


def test_worked_example():
    ds = dense_dataset([[1, -1, 0], [0, 1, -1]], [1, -1, 1])
    # cov = -1/3, sigma = sqrt(2/3) each
    assert pearson(ds, 0, 1) == pytest.approx(-0.5, abs=1e-15)
    np.testing.assert_allclose(np.corrcoef([[1, -1, 0], [0, 1, -1]])[0, 1], -0.5)


def test_degenerate_correlation_is_zero():
    ds = dense_dataset([[1, 1, 1], [1, 2, 3]], [1, -1, 1])
    assert pearson(ds, 0, 1) == 0.0
    assert pearson(ds, 0, 0) == 0.0


@settings(max_examples=80, deadline=None)
@given(F=hnp.arrays(np.float64, (6, 9),
                    elements=st.one_of(st.just(0.0), st.floats(-50, 50, allow_nan=False))))
def test_pearson_matches_dense_definition(F):
    ds = dense_dataset(F, [1, -1] * 4 + [1])
    R = np.corrcoef(F) if np.all(F.std(axis=1) > 0) else None
    for j, k in itertools.combinations(range(6), 2):
        r = pearson(ds, j, k)
        assert r == pearson(ds, k, j)
        assert abs(r) <= 1.0 + 1e-10
        sj, sk = F[j].std(), F[k].std()
        if min(sj, sk) > 1e-6 * (1 + np.abs(F).max()) and R is not None:
            assert r == pytest.approx(R[j, k], rel=1e-10, abs=1e-10)
    live = np.flatnonzero(~ds.stats.is_degenerate)
    if len(live) >= 2:
        many = pearson_with(ds, int(live[0]), live[1:])
        single = [pearson(ds, int(live[0]), int(k)) for k in live[1:]]
        np.testing.assert_allclose(many, single, atol=1e-9)


def test_redundancy_duplicate_pair():
    f = [1.0, 3.0, -2.0, 0.0]
    ds = dense_dataset([f, f], [1, -1, 1, -1])
    assert redundancy_rate(ds, [0, 1]) == pytest.approx(0.5, abs=1e-12)
    assert redundancy_rate(ds, [0, 1], mean_pairs=True) == pytest.approx(1.0, abs=1e-12)


def test_redundancy_orthogonal(rng):
    Q = centered_orthonormal(10, 4, rng)
    ds = dense_dataset(Q, [1, -1] * 5)
    assert redundancy_rate(ds, range(4)) == pytest.approx(0.0, abs=1e-12)


def test_redundancy_three_features(rng):
    e1, e2, e3 = centered_orthonormal(8, 3, rng)
    f1 = e1
    f2 = 0.6 * e1 + 0.8 * e2                         # rho(1,2) = 0.6
    f3 = 0.4 * e1 - 0.3 * e2 + math.sqrt(0.75) * e3  # rho(1,3) = 0.4, rho(2,3) = 0
    ds = dense_dataset([f1, f2, f3], [1, -1] * 4)
    rhos = sorted(abs(r) for _, _, r in pairwise_correlations(ds, [0, 1, 2]))
    np.testing.assert_allclose(rhos, [0.0, 0.4, 0.6], atol=1e-12)
    assert redundancy_rate(ds, [0, 1, 2]) == pytest.approx(1 / 6, abs=1e-12)


def test_redundancy_needs_two_features(small_random):
    with pytest.raises(DataError):
        redundancy_rate(small_random, [3])
    with pytest.raises(DataError):
        redundancy_rate(small_random, [3, 3])


def test_redundancy_permutation_invariant_and_bounded(small_random, rng):
    feats = list(range(small_random.n_features))
    base = redundancy_rate(small_random, feats)
    for _ in range(5):
        perm = list(rng.permutation(feats))
        assert redundancy_rate(small_random, perm) == pytest.approx(base, abs=1e-9)
    assert 0.0 <= base <= 0.5

"""Pearson correlation between sparse feature rows, and the redundancy rate."""

import numpy as np

from .data import standardized_matvec, standardized_rows
from .errors import DataError


def pearson(dataset, j, k):
    """Pearson correlation of features ``j`` and ``k``.

    Merges the two sparse rows, so the cost is O(nnz_j + nnz_k).  Returns 0
    when either feature is constant.
    """
    st = dataset.stats
    if st.is_degenerate[j] or st.is_degenerate[k]:
        return 0.0
    if k < j:
        j, k = k, j  # fixed evaluation order makes the result exactly symmetric
    n = dataset.n_samples
    idx_j, val_j = dataset.row(j)
    idx_k, val_k = dataset.row(k)
    mu_j, mu_k = st.mean[j], st.mean[k]

    union = np.union1d(idx_j, idx_k)
    a = np.zeros(len(union))
    b = np.zeros(len(union))
    a[np.searchsorted(union, idx_j)] = val_j
    b[np.searchsorted(union, idx_k)] = val_k
    # samples where both rows are zero contribute (0 - mu_j)(0 - mu_k) each
    cov = np.sum((a - mu_j) * (b - mu_k)) + (n - len(union)) * mu_j * mu_k
    rho = cov / (st.centered_norm[j] * st.centered_norm[k])
    return float(min(1.0, max(-1.0, rho)))


def pearson_with(dataset, j, others):
    """Correlations of feature ``j`` with each feature in ``others``.

    Densifies only feature ``j``; the others stay sparse.
    """
    others = np.asarray(others, dtype=np.int64)
    if dataset.stats.is_degenerate[j] or len(others) == 0:
        return np.zeros(len(others))
    z = standardized_rows(dataset, [j])[0]
    return np.clip(standardized_matvec(dataset, z, rows=others), -1.0, 1.0)


def correlation_matrix(dataset, features):
    """Dense correlation matrix among a (small) list of features."""
    Z = standardized_rows(dataset, features)
    R = np.clip(Z @ Z.T, -1.0, 1.0)
    live = ~dataset.stats.is_degenerate[np.asarray(features, dtype=np.int64)]
    np.fill_diagonal(R, np.where(live, 1.0, 0.0))
    return R


def pairwise_correlations(dataset, features):
    """Yield ``(f_i, f_j, rho)`` for every unordered pair, ``i > j`` by position."""
    features = [int(f) for f in features]
    R = correlation_matrix(dataset, features)
    for a in range(len(features)):
        for b in range(a):
            yield features[a], features[b], float(R[a, b])


def redundancy_rate(dataset, features, mean_pairs=False):
    """Redundancy rate RED(F) of a selected feature set.

    By default the sum of |rho| over unordered pairs is divided by
    ``k*(k-1)`` (k = |F|), so the value lies in [0, 0.5].  With
    ``mean_pairs=True`` the divisor is the number of unordered pairs and the
    value is the plain mean |rho| in [0, 1].
    """
    features = list(dict.fromkeys(int(f) for f in features))
    k = len(features)
    if k < 2:
        raise DataError(f"redundancy rate needs at least 2 features, got {k}")
    R = correlation_matrix(dataset, features)
    total = np.abs(R[np.tril_indices(k, -1)]).sum()
    denom = k * (k - 1) / 2 if mean_pairs else k * (k - 1)
    return float(total / denom)

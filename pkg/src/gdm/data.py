"""Sparse labelled datasets stored feature-major.

Every correlation and scoring routine in the package works on the
*standardized* view of a feature: zero mean and unit Euclidean norm over
the samples.  That view is never materialised for the whole matrix; we keep
the raw sparse rows plus per-feature mean and centered norm, and correct
dot products on the fly so sparsity survives.
"""

import gzip
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DataError

# threshold on the squared centered norm below which a feature is constant
EPS_VAR = 1e-12
DENSE_MIN_FILL = 0.3
DENSE_MAX_ENTRIES = 50_000_000


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    centered_norm: np.ndarray
    is_degenerate: np.ndarray

    def __len__(self):
        return len(self.mean)


@dataclass(frozen=True)
class SparseDataset:
    """Binary-labelled data with one sparse row per feature.

    ``features`` is an ``(n_features, n_samples)`` CSR matrix with sorted
    indices and no stored zeros.  ``labels`` holds +1/-1 as float64.
    """

    features: sp.csr_matrix
    labels: np.ndarray
    stats: FeatureStats = field(repr=False)

    @property
    def n_features(self):
        return self.features.shape[0]

    @property
    def n_samples(self):
        return self.features.shape[1]

    @cached_property
    def operand(self):
        """Matrix used for full products: a dense copy when the data is mostly nonzero.

        Dense BLAS products beat sparse kernels well before full density; the
        copy is only made when it stays under ``DENSE_MAX_ENTRIES``.
        """
        m, n = self.features.shape
        if m * n <= DENSE_MAX_ENTRIES and self.features.nnz >= DENSE_MIN_FILL * m * n:
            return self.features.toarray()
        return self.features

    def row(self, j):
        """Raw nonzeros of feature ``j`` as ``(sample_indices, values)``."""
        lo, hi = self.features.indptr[j], self.features.indptr[j + 1]
        return self.features.indices[lo:hi], self.features.data[lo:hi]


def compute_stats(features, eps_var=EPS_VAR):
    """Per-feature mean and centered Euclidean norm, computed from nonzeros.

    The centered sum of squares is accumulated as
    ``sum((v - mean)^2 over nonzeros) + (n - nnz) * mean^2`` rather than
    ``sum(v^2) - n*mean^2``; both are O(nnz) but the former does not cancel
    catastrophically for large-offset features.
    """
    features = sp.csr_matrix(features)
    m, n = features.shape
    if n == 0:
        raise DataError("dataset has no samples")
    nnz = np.diff(features.indptr)
    row_ids = np.repeat(np.arange(m), nnz)
    sums = np.bincount(row_ids, weights=features.data, minlength=m)
    mean = sums / n
    dev = features.data - mean[row_ids]
    css = np.bincount(row_ids, weights=dev * dev, minlength=m) + (n - nnz) * mean**2
    degenerate = css <= eps_var
    return FeatureStats(mean=mean, centered_norm=np.sqrt(css), is_degenerate=degenerate)


def make_dataset(features, labels, eps_var=EPS_VAR):
    """Build a dataset from a feature-major matrix (sparse or dense) and labels.

    Labels are mapped to +1 for positive values and -1 otherwise.
    """
    X = sp.csr_matrix(features, dtype=np.float64)
    X.eliminate_zeros()
    X.sort_indices()
    y = np.where(np.asarray(labels, dtype=np.float64) > 0, 1.0, -1.0)
    if y.ndim != 1 or len(y) != X.shape[1]:
        raise DataError(f"expected {X.shape[1]} labels, got {np.shape(labels)}")
    return SparseDataset(features=X, labels=y, stats=compute_stats(X, eps_var))


def from_samples(rows, labels, n_features=None):
    """Build a dataset from sample-major input (e.g. an ``(n, m)`` array)."""
    X = sp.csr_matrix(rows, dtype=np.float64)
    if n_features is not None and n_features != X.shape[1]:
        X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], n_features))
    return make_dataset(X.T.tocsr(), labels)


def parse_libsvm(stream, n_features=None):
    """Parse LIBSVM/SVMlight text into a :class:`SparseDataset`.

    Indices in the file are 1-based and must be strictly increasing on each
    line.  Blank lines and ``#`` comments are skipped; ``qid:`` tokens are
    ignored.  ``n_features`` overrides the dimension inferred from the
    largest index seen (it may not be smaller than that index).
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)

    labels = []
    sample_idx, feature_idx, values = [], [], []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataError(f"cannot parse label {tokens[0]!r}", line=lineno) from None
        if not math.isfinite(label):
            raise DataError(f"non-finite label {tokens[0]!r}", line=lineno)
        i = len(labels)
        labels.append(1.0 if label > 0 else -1.0)
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise DataError(f"malformed token {tok!r}", line=lineno)
            if key == "qid":
                continue
            try:
                idx = int(key)
                v = float(val)
            except ValueError:
                raise DataError(f"malformed token {tok!r}", line=lineno) from None
            if idx < 1:
                raise DataError(f"feature index {idx} is not 1-based", line=lineno)
            if idx <= prev:
                raise DataError(
                    f"feature indices must be strictly increasing ({idx} after {prev})",
                    line=lineno,
                )
            if not math.isfinite(v):
                raise DataError(f"non-finite value in {tok!r}", line=lineno)
            prev = idx
            if v != 0.0:
                sample_idx.append(i)
                feature_idx.append(idx - 1)
                values.append(v)
        max_index = max(max_index, prev)

    if not labels:
        raise DataError("empty input: no samples found")
    m = max_index
    if n_features is not None:
        if n_features < max_index:
            raise DataError(
                f"feature index {max_index} exceeds the declared dimension {n_features}"
            )
        m = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), (np.asarray(feature_idx, dtype=np.int64),
                                                np.asarray(sample_idx, dtype=np.int64))),
        shape=(m, len(labels)),
    )
    return make_dataset(X, labels)


def open_text(path):
    """Open ``path`` for reading text, transparently un-gzipping."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt")
    return open(path, "r")


def load_libsvm(path, n_features=None):
    with open_text(path) as fh:
        return parse_libsvm(fh, n_features=n_features)


def write_libsvm(dataset, stream):
    """Write ``dataset`` in LIBSVM format (1-based indices, repr precision)."""
    by_sample = dataset.features.T.tocsr()
    by_sample.sort_indices()
    for i in range(dataset.n_samples):
        lo, hi = by_sample.indptr[i], by_sample.indptr[i + 1]
        parts = ["+1" if dataset.labels[i] > 0 else "-1"]
        parts.extend(
            f"{j + 1}:{v!r}"
            for j, v in zip(by_sample.indices[lo:hi].tolist(), by_sample.data[lo:hi].tolist())
        )
        stream.write(" ".join(parts) + "\n")


def standardized_dot(dataset, j, v, v_sum=None):
    """Dot product of the standardized view of feature ``j`` with ``v``.

    Costs O(nnz(f_j)) when ``v_sum = sum(v)`` is supplied.  Constant
    features return exactly 0.
    """
    st = dataset.stats
    if st.is_degenerate[j]:
        return 0.0
    if v_sum is None:
        v_sum = float(np.sum(v))
    idx, vals = dataset.row(j)
    return float((vals @ np.asarray(v)[idx] - st.mean[j] * v_sum) / st.centered_norm[j])


def standardized_matvec(dataset, v, rows=None):
    """``standardized_dot`` for many features at once (all of them by default)."""
    v = np.asarray(v, dtype=np.float64)
    st = dataset.stats
    if rows is None:
        raw = dataset.operand @ v
        mean, norm, degen = st.mean, st.centered_norm, st.is_degenerate
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if len(rows) * 4 > dataset.n_features:
            # a full product beats copying a large share of the rows
            raw = (dataset.operand @ v)[rows]
        else:
            raw = dataset.features[rows] @ v
        mean, norm, degen = st.mean[rows], st.centered_norm[rows], st.is_degenerate[rows]
    raw = raw - mean * v.sum()
    safe = np.where(degen, 1.0, norm)
    return np.where(degen, 0.0, raw / safe)


def standardized_matmat(dataset, V):
    """``standardized_matvec`` for every column of ``V`` (n x k) in one pass over the data."""
    V = np.asarray(V, dtype=np.float64)
    st = dataset.stats
    raw = np.asarray(dataset.operand @ V) - st.mean[:, None] * V.sum(axis=0)[None, :]
    safe = np.where(st.is_degenerate, 1.0, st.centered_norm)
    out = raw / safe[:, None]
    out[st.is_degenerate] = 0.0
    return out


def standardized_rows(dataset, rows):
    """Dense ``(len(rows), n)`` array of standardized feature views.

    Constant features come back as all-zero rows.
    """
    rows = np.asarray(rows, dtype=np.int64)
    st = dataset.stats
    out = dataset.features[rows].toarray()
    if len(rows) == 0:
        return out
    degen = st.is_degenerate[rows]
    out -= st.mean[rows][:, None]
    out /= np.where(degen, 1.0, st.centered_norm[rows])[:, None]
    out[degen] = 0.0
    return out

"""Convex kernels over the probability simplex of sample weights.

Each pooled constraint contributes one convex quadratic *piece*

    g(alpha) = 1/2 * || sum_i alpha_i y_i (x_i restricted to the mask) ||^2
               + 1/(2C) * alpha' alpha

and the reduced problem is ``min_{alpha in simplex} max_t g_t(alpha)``.

``solve_minmax`` works on the concave dual over piece weights ``mu``:
``phi(mu) = min_alpha sum_t mu_t g_t(alpha)``.  The gradient of ``phi`` is
the vector of piece values at the inner minimiser, so ``mu`` is updated by
spectral projected-gradient ascent while the inner (strongly convex)
problem is solved by accelerated projected gradient, warm-started.  The
pair (max_t g_t(alpha), phi lower bound) brackets the optimum, and the
width of that bracket is the stopping test.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import standardized_rows
from .errors import NonConvergenceError


def project_simplex(v):
    """Euclidean projection of ``v`` onto ``{u : u >= 0, sum(u) = 1}``.

    Sort-based, O(n log n).
    """
    v = np.asarray(v, dtype=np.float64)
    n = len(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    r = ks[cond][-1]
    shift = css[r - 1] / r
    return np.maximum(v - shift, 0.0)


@dataclass
class QuadraticPiece:
    """Cached data for one mask: its feature indices and signed dense rows.

    ``signed_rows[k, i] = y_i * standardized x_{i, features[k]}``.
    """

    features: np.ndarray
    rows: np.ndarray
    labels: np.ndarray
    signed_rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.signed_rows = self.rows * self.labels[None, :]

    @property
    def n_samples(self):
        return len(self.labels)


def make_piece(dataset, features, bias=None):
    """Build a piece from a dataset and a feature subset.

    ``bias``, when given, appends an unstandardized constant row with that
    value (evaluation pathway only).
    """
    features = np.asarray(list(features), dtype=np.int64)
    rows = standardized_rows(dataset, features)
    if bias is not None:
        rows = np.vstack([rows, np.full((1, dataset.n_samples), float(bias))])
    return QuadraticPiece(features=features, rows=rows, labels=dataset.labels.copy())


def eval_piece(piece, alpha, C=1.0):
    """Value and gradient of the piece at ``alpha``."""
    v = piece.signed_rows @ alpha
    value = 0.5 * float(v @ v) + float(alpha @ alpha) / (2.0 * C)
    grad = piece.signed_rows.T @ v + alpha / C
    return value, grad


def piece_values(pieces, alpha, C=1.0):
    return np.array([eval_piece(p, alpha, C)[0] for p in pieces])


@dataclass
class MinMaxSolution:
    alpha: np.ndarray
    theta: float
    mu: np.ndarray
    kkt_residual: float
    iterations: int
    lower_bound: float
    piece_values: np.ndarray
    trace: list = field(default_factory=list, repr=False)


def _spectral_norm_sq(M, iters=50):
    if M.size == 0:
        return 0.0
    rng = np.random.default_rng(0)
    x = rng.standard_normal(M.shape[1])
    lam = 0.0
    for _ in range(iters):
        y = M.T @ (M @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        lam_new = float(x @ y) / float(x @ x)
        x = y / nrm
        if abs(lam_new - lam) <= 1e-6 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


def _solve_weighted(M, C, alpha0, tol, max_iter):
    """Minimise ``1/2 ||M a||^2 + ||a||^2/(2C)`` over the simplex.

    Accelerated projected gradient with the strongly-convex momentum and a
    gradient-based restart (no function values, so progress continues down
    to rounding level in ``a``).  Returns ``(alpha, fw_gap, iterations)``,
    where ``fw_gap = <grad, a> - min(grad)`` bounds the suboptimality.
    """
    n = len(alpha0)
    L = 1.05 * _spectral_norm_sq(M) + 1.0 / C + 1e-12
    q = (1.0 / C) / L
    beta = (1.0 - np.sqrt(q)) / (1.0 + np.sqrt(q))

    def grad(a):
        return M.T @ (M @ a) + a / C

    x = project_simplex(alpha0) if n > 1 else np.ones(1)
    gx = grad(x)
    z = x
    gap = float(gx @ x - gx.min())
    it = 0
    stalled = 0
    while gap > tol and it < max_iter:
        it += 1
        x_new = project_simplex(z - grad(z) / L)
        step = x_new - x
        if float((z - x_new) @ step) > 0:
            z = x_new  # momentum points uphill: restart
        else:
            z = x_new + beta * step
        x = x_new
        gx = grad(x)
        gap = float(gx @ x - gx.min())
        stalled = 0 if np.any(step) else stalled + 1
        if stalled >= 3:
            break  # iterates frozen at rounding level
    return x, gap, it


def _stack(pieces, mu):
    blocks = [np.sqrt(w) * p.signed_rows for p, w in zip(pieces, mu) if w > 0]
    if not blocks:
        return np.zeros((0, pieces[0].n_samples))
    return np.vstack(blocks)


def solve_minmax(pieces, warm_start=None, C=1.0, eps_sub=1e-6, max_iter=10_000,
                 mu_start=None):
    """Solve ``min_{alpha in simplex} max_t g_t(alpha)`` to absolute tolerance ``eps_sub``.

    On return ``theta - OPT <= kkt_residual <= eps_sub`` where ``theta`` is the
    achieved max, and every piece with ``mu_t > 1e-6`` has
    ``g_t(alpha) >= theta - eps_sub``.  ``max_iter`` caps the total number of
    inner gradient steps.

    Raises :class:`NonConvergenceError` (carrying the best iterate) when the
    cap is hit first.
    """
    if not pieces:
        raise ValueError("solve_minmax needs at least one piece")
    if eps_sub <= 0:
        raise ValueError("eps_sub must be positive")
    n = pieces[0].n_samples
    T = len(pieces)
    if n == 1:
        alpha = np.ones(1)
        vals = piece_values(pieces, alpha, C)
        mu = np.zeros(T)
        mu[int(np.argmax(vals))] = 1.0
        theta = float(vals.max())
        return MinMaxSolution(alpha, theta, mu, 0.0, 0, theta, vals)

    alpha = np.full(n, 1.0 / n) if warm_start is None else project_simplex(warm_start)
    mu = np.full(T, 1.0 / T) if mu_start is None else project_simplex(mu_start)
    inner_tol = eps_sub / 10.0
    budget = max_iter
    trace = []

    def evaluate(mu_, alpha0):
        nonlocal budget
        a, fw, used = _solve_weighted(_stack(pieces, mu_), C, alpha0, inner_tol, budget)
        budget -= max(used, 1)
        G = piece_values(pieces, a, C)
        lower = float(mu_ @ G) - fw
        return a, G, lower, fw

    alpha, G, lower, fw = evaluate(mu, alpha)
    best = (float(G.max()), alpha, mu, G)
    best_lower = lower
    step = 1.0
    outer = 0
    while True:
        upper = float(G.max())
        if upper < best[0]:
            best = (upper, alpha, mu, G)
        best_lower = max(best_lower, lower)
        gap = upper - lower
        active = mu > 1e-6
        slack = float(np.max(upper - G[active])) if active.any() else 0.0
        trace.append({"upper": upper, "lower": lower, "best_upper": best[0],
                      "best_lower": best_lower, "gap": gap})
        if gap <= eps_sub and slack <= eps_sub:
            return MinMaxSolution(alpha=alpha, theta=upper, mu=mu, kkt_residual=max(gap, 0.0),
                                  iterations=max_iter - budget, lower_bound=lower,
                                  piece_values=G, trace=trace)
        if budget <= 0:
            raise NonConvergenceError(
                f"solve_minmax did not reach eps_sub={eps_sub:g} within {max_iter} "
                f"inner iterations (gap {best[0] - best_lower:.3g})",
                alpha=best[1], residual=best[0] - best_lower,
            )
        outer += 1

        # spectral projected-gradient ascent on phi(mu), gradient = G
        phi = float(mu @ G)
        d = project_simplex(mu + step * G / max(np.abs(G).max(), 1e-300)) - mu
        if not np.any(d):
            d = np.zeros(T)
            d[int(np.argmax(G))] = 1.0
            d -= mu
        slope = float(G @ d)
        lam = 1.0
        while True:
            mu_new = mu + lam * d
            mu_new[mu_new < 1e-15] = 0.0
            mu_new /= mu_new.sum()
            a_new, G_new, lower_new, gap_new = evaluate(mu_new, alpha)
            phi_new = float(mu_new @ G_new)
            if phi_new >= phi + 1e-4 * lam * slope - 2 * inner_tol or lam < 1e-10 or budget <= 0:
                break
            lam *= 0.5
        s = mu_new - mu
        r = G_new - G
        sr = float(s @ r)
        scale = max(np.abs(G_new).max(), 1e-300)
        step = float(np.clip(-(s @ s) / sr * scale, 1e-6, 1e6)) if sr < 0 else 1e3 * step
        step = min(step, 1e6)
        mu, alpha, G, lower, fw = mu_new, a_new, G_new, lower_new, gap_new


@dataclass
class SvmModel:
    """Linear decision function ``w' x_hat`` over a fixed feature subset.

    ``means``/``norms`` are the training standardization statistics of
    ``features`` so the model can score new data on its own.
    """

    features: np.ndarray
    weights: np.ndarray
    gamma: float
    means: np.ndarray
    norms: np.ndarray
    n_features: int
    C: float = 1.0
    bias_value: float = None
    bias_weight: float = 0.0

    def to_dict(self):
        return {
            "features": [int(j) for j in self.features],
            "weights": [float(w) for w in self.weights],
            "gamma": float(self.gamma),
            "means": [float(v) for v in self.means],
            "norms": [float(v) for v in self.norms],
            "n_features": int(self.n_features),
            "C": float(self.C),
            "bias_value": None if self.bias_value is None else float(self.bias_value),
            "bias_weight": float(self.bias_weight),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            features=np.asarray(d["features"], dtype=np.int64),
            weights=np.asarray(d["weights"], dtype=np.float64),
            gamma=float(d["gamma"]),
            means=np.asarray(d["means"], dtype=np.float64),
            norms=np.asarray(d["norms"], dtype=np.float64),
            n_features=int(d["n_features"]),
            C=float(d.get("C", 1.0)),
            bias_value=d.get("bias_value"),
            bias_weight=float(d.get("bias_weight", 0.0)),
        )


def recover_svm(piece, alpha, C=1.0, dataset=None):
    """Primal point ``(w, gamma, xi)`` from a dual solution of one piece.

    ``w = sum_i alpha_i y_i x_hat_i`` on the piece's features,
    ``xi = alpha / C`` and ``gamma = min_i (y_i w' x_hat_i + xi_i)``, which
    makes every margin constraint hold.  Returns ``(SvmModel, xi)``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    w_all = piece.signed_rows @ alpha
    xi = alpha / C
    margins = piece.signed_rows.T @ w_all
    gamma = float(np.min(margins + xi))
    k = len(piece.features)
    if dataset is not None:
        means = dataset.stats.mean[piece.features]
        norms = np.where(dataset.stats.is_degenerate[piece.features], 0.0,
                         dataset.stats.centered_norm[piece.features])
        n_features = dataset.n_features
    else:
        means = np.zeros(k)
        norms = np.ones(k)
        n_features = int(piece.features.max()) + 1 if k else 0
    has_bias = piece.rows.shape[0] > k
    svm = SvmModel(
        features=piece.features.copy(),
        weights=w_all[:k].copy(),
        gamma=gamma,
        means=means,
        norms=norms,
        n_features=n_features,
        C=C,
        bias_value=float(piece.rows[k, 0]) if has_bias else None,
        bias_weight=float(w_all[k]) if has_bias else 0.0,
    )
    return svm, xi


def primal_objective(piece, svm, xi, C=1.0):
    w = np.append(svm.weights, svm.bias_weight) if svm.bias_value is not None else svm.weights
    return 0.5 * float(w @ w) - svm.gamma + 0.5 * C * float(xi @ xi)


def primal_margins(piece, svm):
    w = np.append(svm.weights, svm.bias_weight) if svm.bias_value is not None else svm.weights
    return piece.signed_rows.T @ w

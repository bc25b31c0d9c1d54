"""Correlation redundancy matching: the most-violated-constraint oracle.

Given the current signed dual vector, every feature gets a score
``c_j = <standardized f_j, alpha_signed>``.  The constraint maximising
``sum_j c_j^2 delta_j`` over budget-B masks whose active features are
pairwise less than ``1 - tau`` correlated is then found by a greedy scan
of the score ranking.  A support feature can only be correlated at level
``1 - tau`` with features whose score is within
``sqrt(2 tau) * ||alpha_signed||`` of its own, so correlations are only
evaluated inside that window.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .corr import pearson_with
from .data import standardized_matmat, standardized_matvec, standardized_rows
from .errors import GdmError


@dataclass(frozen=True)
class ScoreVector:
    c: np.ndarray
    ranking: np.ndarray

    @property
    def abs_c(self):
        return np.abs(self.c)

    @classmethod
    def from_values(cls, c):
        """Wrap precomputed scores, ranking by |c| descending then index."""
        c = np.asarray(c, dtype=np.float64)
        return cls(c=c, ranking=np.lexsort((np.arange(len(c)), -np.abs(c))))


@dataclass
class ConstraintMask:
    """One feasible mask: its support features and their affiliated groups.

    ``groups[i]`` belongs to ``support[i]`` and starts with it; the rest are
    in rank order.
    """

    support: list
    groups: list
    trace: dict = field(default=None, repr=False, compare=False)

    def key(self):
        return tuple(sorted(self.support))

    def to_dict(self):
        return {"support": list(self.support), "groups": [list(g) for g in self.groups]}

    @classmethod
    def from_dict(cls, d):
        return cls(support=[int(z) for z in d["support"]],
                   groups=[[int(h) for h in g] for g in d["groups"]])


def score_features(dataset, alpha_signed):
    """Score every feature against ``alpha_signed`` and rank by |score|.

    Ties in |c| are broken by ascending feature index.
    """
    alpha_signed = np.asarray(alpha_signed, dtype=np.float64)
    if alpha_signed.shape != (dataset.n_samples,):
        raise GdmError(
            f"alpha_signed has shape {alpha_signed.shape}, expected ({dataset.n_samples},)"
        )
    if not np.any(alpha_signed):
        raise GdmError("degenerate dual: alpha_signed is identically zero")
    return ScoreVector.from_values(standardized_matvec(dataset, alpha_signed))


def match(dataset, scores, budget, tau, alpha_norm, excluded=(), trace=False):
    """Greedy scan for the best mask; see the module docstring.

    Features in ``excluded`` are never chosen as supports but may still be
    claimed as affiliated.  A feature correlated with several supports is
    given to the highest-scoring one.  Returns a mask with an empty support
    when nothing is eligible.
    """
    if budget < 1:
        raise GdmError(f"budget must be >= 1, got {budget}")
    if not 0.0 < tau < 1.0:
        raise GdmError(f"tau must lie in (0, 1), got {tau}")
    if not alpha_norm > 0:
        raise GdmError(f"alpha_norm must be positive, got {alpha_norm}")

    m = dataset.n_features
    order = scores.ranking
    sorted_abs = scores.abs_c[order]
    neg_sorted = -sorted_abs  # ascending, for searchsorted
    degen = dataset.stats.is_degenerate[order]

    can_support = ~degen
    if len(excluded):
        ex = np.zeros(m, dtype=bool)
        ex[np.fromiter((int(e) for e in excluded), dtype=np.int64)] = True
        can_support &= ~ex[order]
    claimable = ~degen

    width = math.sqrt(2.0 * tau) * alpha_norm
    level = 1.0 - tau
    owner = np.full(m, -1, dtype=np.int64)  # by rank position
    support_pos = []
    log = [] if trace else None

    block = {}  # rank position -> correlations with every feature
    start = 0
    while len(support_pos) < budget:
        free = np.flatnonzero(can_support[start:] & (owner[start:] < 0))
        if len(free) == 0:
            break
        pz = start + int(free[0])
        k = len(support_pos)
        support_pos.append(pz)
        owner[pz] = k

        threshold = sorted_abs[pz] - width
        end = int(np.searchsorted(neg_sorted, -threshold, side="right"))
        # unowned positions above pz can only be excluded features
        begin = int(np.searchsorted(neg_sorted, -(sorted_abs[pz] + width), side="left"))
        window = np.concatenate([np.arange(begin, pz), np.arange(pz + 1, end)])
        cand = window[claimable[window] & (owner[window] < 0)]
        if pz in block:
            rho = block[pz][order[cand]]
        elif 4 * len(cand) > m:
            # wide window: correlate this and the next likely supports in one pass
            rest = pz + 1 + np.flatnonzero(can_support[pz + 1:] & (owner[pz + 1:] < 0))
            ahead = np.concatenate([[pz], rest[: budget - k - 1]])
            R = standardized_matmat(dataset, standardized_rows(dataset, order[ahead]).T)
            np.clip(R, -1.0, 1.0, out=R)
            block = {int(p): R[:, i] for i, p in enumerate(ahead)}
            rho = block[pz][order[cand]]
        else:
            rho = pearson_with(dataset, int(order[pz]), order[cand])
        hits = cand[np.abs(rho) >= level]
        owner[hits] = k
        if trace:
            log.append({
                "support": int(order[pz]),
                "rank": pz,
                "score": float(scores.c[order[pz]]),
                "window_threshold": float(threshold),
                "window_begin": begin,
                "window_end": end,
                "n_correlations": int(len(cand)),
                "affiliated": [int(h) for h in order[hits]],
            })
        start = pz + 1

    support = [int(order[p]) for p in support_pos]
    groups = [[z] for z in support]
    for p in np.flatnonzero(owner >= 0):  # ascending rank position
        if int(order[p]) != groups[owner[p]][0]:
            groups[owner[p]].append(int(order[p]))

    info = None
    if trace:
        info = {
            "budget": int(budget),
            "tau": float(tau),
            "alpha_norm": float(alpha_norm),
            "window_width": float(width),
            "ranking_prefix": [int(j) for j in order[: min(m, 2 * budget + 10)]],
            "steps": log,
        }
    return ConstraintMask(support=support, groups=groups, trace=info)


def violation_value(scores, mask):
    """``1/2 * sum of c_j^2`` over the mask's support (the delta-dependent part of g)."""
    c = scores.c[np.asarray(mask.support, dtype=np.int64)]
    return 0.5 * float(c @ c)

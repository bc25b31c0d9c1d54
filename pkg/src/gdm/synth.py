"""Synthetic benchmarks with known groups of informative, correlated features.

Each informative group g has a latent per-sample signal ``z_g ~ N(0, 1)``.
Every member of the group is ``z_g + sigma * noise`` with ``sigma`` chosen
so the population correlation between two members sits halfway between
``within_group_corr`` and 1.  Labels are
``sign(sum_g w_g z_g + noise_level * sd * eps)`` with standard-normal group
weights, optionally conditioned on ``|w_g| >= min_abs_weight``.  All other
features are independent standard normals.  Train and test share the
groups and weights but use fresh draws for everything else.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import make_dataset
from .errors import GdmError

TRUTH_VERSION = "gdm-truth/1"


@dataclass
class SynthConfig:
    n_samples: int = 512
    n_features: int = 2000
    n_groups: int = 40
    n_correlated_groups: int = 8
    group_size_range: tuple = (4, 8)
    within_group_corr: float = 0.9
    noise_level: float = 0.1
    min_abs_weight: float = 0.5
    n_test: int = None
    seed: int = 0

    def __post_init__(self):
        self.group_size_range = tuple(int(s) for s in self.group_size_range)
        lo, hi = self.group_size_range
        if self.n_samples < 2 or self.n_features < 1:
            raise GdmError("need at least 2 samples and 1 feature")
        if self.n_groups < 1:
            raise GdmError("n_groups must be >= 1")
        if not 0 <= self.n_correlated_groups <= self.n_groups:
            raise GdmError("n_correlated_groups must lie in [0, n_groups]")
        if not 2 <= lo <= hi:
            raise GdmError(f"group_size_range must satisfy 2 <= lo <= hi, got {self.group_size_range}")
        if not 0.0 < self.within_group_corr < 1.0:
            raise GdmError("within_group_corr must lie in (0, 1)")
        if self.noise_level < 0 or self.min_abs_weight < 0:
            raise GdmError("noise_level and min_abs_weight must be non-negative")
        worst = self.n_groups + self.n_correlated_groups * (hi - 1)
        if worst > self.n_features:
            raise GdmError(
                f"infeasible config: up to {worst} informative features but only "
                f"{self.n_features} features"
            )

    def to_dict(self):
        d = asdict(self)
        d["group_size_range"] = list(self.group_size_range)
        return d


@dataclass
class GroundTruth:
    groups: list
    group_weights: list
    noise_indices: list

    def to_dict(self, config=None):
        return {
            "version": TRUTH_VERSION,
            "groups": [[int(j) for j in g] for g in self.groups],
            "group_weights": [float(w) for w in self.group_weights],
            "noise_indices": [int(j) for j in self.noise_indices],
            "config": None if config is None else config.to_dict(),
        }

    def to_json(self, config=None):
        return json.dumps(self.to_dict(config), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != TRUTH_VERSION:
            raise GdmError(f"unsupported ground-truth version {d.get('version')!r}")
        return cls(groups=[[int(j) for j in g] for g in d["groups"]],
                   group_weights=[float(w) for w in d["group_weights"]],
                   noise_indices=[int(j) for j in d["noise_indices"]])

    @property
    def correlated_groups(self):
        return [g for g in self.groups if len(g) > 1]


def _member_sigma(target):
    # corr(z + s e1, z + s e2) = 1 / (1 + s^2); aim midway between target and 1
    rho = 0.5 * (1.0 + target)
    return np.sqrt(1.0 / rho - 1.0)


def _draw(config, truth, n, rng):
    m = config.n_features
    X = rng.standard_normal((m, n))
    sigma = _member_sigma(config.within_group_corr)
    latent = rng.standard_normal((len(truth.groups), n))
    for g, members in enumerate(truth.groups):
        X[members] = latent[g] + sigma * X[members]
    score = np.asarray(truth.group_weights) @ latent
    score = score + config.noise_level * score.std() * rng.standard_normal(n)
    y = np.where(score >= 0, 1.0, -1.0)
    if np.all(y == y[0]):
        y[int(np.argmin(np.abs(score)))] *= -1
    return make_dataset(X, y)


def generate(config):
    """Return ``(train, test, truth)`` for ``config``; bit-reproducible per seed."""
    rng = np.random.default_rng(config.seed)
    lo, hi = config.group_size_range
    sizes = [int(rng.integers(lo, hi + 1)) for _ in range(config.n_correlated_groups)]
    sizes += [1] * (config.n_groups - config.n_correlated_groups)
    perm = rng.permutation(config.n_features)
    groups, pos = [], 0
    for s in sizes:
        groups.append(sorted(int(j) for j in perm[pos:pos + s]))
        pos += s
    noise = sorted(int(j) for j in perm[pos:])

    weights = []
    while len(weights) < config.n_groups:
        w = float(rng.standard_normal())
        if abs(w) >= config.min_abs_weight:
            weights.append(w)

    truth = GroundTruth(groups=groups, group_weights=weights, noise_indices=noise)
    train = _draw(config, truth, config.n_samples, rng)
    test = _draw(config, truth, config.n_test or config.n_samples, rng)
    return train, test, truth


@dataclass
class RecoveryReport:
    group_hit_rate: float
    support_purity: float
    affiliation_coverage: float
    exclusivity: int
    n_support: int
    n_groups_hit: int
    coverage_per_group: list

    def to_dict(self):
        return asdict(self)


def recovery_score(model, truth):
    """Compare a fitted model's supports and groups with the ground truth.

    ``affiliation_coverage`` averages, over hit groups with more than one
    member, the fraction of members found in the group of the first support
    that landed in it; it is NaN when no such group was hit.
    """
    where = {}
    for g, members in enumerate(truth.groups):
        for j in members:
            where[j] = g
    hits = {}
    in_groups = 0
    for z in model.support:
        g = where.get(z)
        if g is None:
            continue
        in_groups += 1
        hits.setdefault(g, []).append(z)

    coverage = []
    for g, zs in sorted(hits.items()):
        members = truth.groups[g]
        if len(members) < 2:
            continue
        found = set(model.groups.get(zs[0], [])) & set(members)
        coverage.append(len(found) / len(members))

    n_sup = len(model.support)
    return RecoveryReport(
        group_hit_rate=len(hits) / len(truth.groups),
        support_purity=in_groups / n_sup if n_sup else 0.0,
        affiliation_coverage=float(np.mean(coverage)) if coverage else float("nan"),
        exclusivity=sum(1 for zs in hits.values() if len(zs) >= 2),
        n_support=n_sup,
        n_groups_hit=len(hits),
        coverage_per_group=coverage,
    )

"""Cutting-plane driver: alternate the CRM oracle with reduced min-max solves."""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .crm import ConstraintMask, match, score_features
from .errors import DataError, GdmError
from .solver import SvmModel, eval_piece, make_piece, recover_svm, solve_minmax

MODEL_VERSION = "gdm-model/1"


@dataclass
class GdmConfig:
    budget: int = 10
    iterations: int = 10
    tau: float = 0.25
    C: float = 1.0
    tol_cut: float = 1e-3
    tol_sub: float = 1e-6
    max_inner: int = 10_000
    target_features: int = None
    with_affiliated: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.target_features is not None:
            if self.target_features < 1:
                raise GdmError("target_features must be >= 1")
            self.budget = int(self.target_features)
        if self.budget < 1:
            raise GdmError(f"budget must be >= 1, got {self.budget}")
        if self.iterations < 1:
            raise GdmError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.tau < 1.0:
            raise GdmError(f"tau must lie in (0, 1), got {self.tau}")
        if self.C <= 0:
            raise GdmError(f"C must be positive, got {self.C}")
        if self.tol_cut <= 0 or self.tol_sub <= 0:
            raise GdmError("tolerances must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class FitState:
    alpha: np.ndarray
    alpha_signed: np.ndarray
    theta: float
    constraints: list
    trace: list
    stop_reason: str = "max_iterations"
    crm_traces: list = field(default_factory=list, repr=False)

    @property
    def converged(self):
        return self.stop_reason in ("no_violation", "duplicate", "exhausted")


@dataclass
class SelectionModel:
    support: list
    groups: dict
    per_constraint: list
    scores_final: list
    config: GdmConfig
    n_features: int
    trace: list = field(default_factory=list)
    stop_reason: str = ""
    classifier: SvmModel = None

    def selected(self):
        """Support features followed by every affiliated feature, deduplicated."""
        out = dict.fromkeys(self.support)
        for z in self.support:
            out.update(dict.fromkeys(self.groups.get(z, [])))
        return list(out)

    def to_dict(self, wall_time=True):
        trace = self.trace if wall_time else [
            {k: v for k, v in row.items() if k != "wall_time"} for row in self.trace
        ]
        return {
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "n_features": int(self.n_features),
            "support": [int(z) for z in self.support],
            "groups": {str(z): [int(h) for h in self.groups[z]] for z in self.support},
            "per_constraint": [mask.to_dict() for mask in self.per_constraint],
            "trace": trace,
            "scores_final": [float(s) for s in self.scores_final],
            "stop_reason": self.stop_reason,
            "classifier": None if self.classifier is None else self.classifier.to_dict(),
        }

    def to_json(self, wall_time=True):
        return json.dumps(self.to_dict(wall_time=wall_time), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')!r}")
        support = [int(z) for z in d["support"]]
        clf = d.get("classifier")
        return cls(
            support=support,
            groups={int(k): [int(h) for h in v] for k, v in d["groups"].items()},
            per_constraint=[ConstraintMask.from_dict(m) for m in d["per_constraint"]],
            scores_final=[float(s) for s in d["scores_final"]],
            config=GdmConfig(**d["config"]),
            n_features=int(d["n_features"]),
            trace=list(d.get("trace", [])),
            stop_reason=d.get("stop_reason", ""),
            classifier=None if clf is None else SvmModel.from_dict(clf),
        )


def _check_dataset(dataset):
    if dataset.n_samples < 2:
        raise DataError("need at least 2 samples")
    classes = np.unique(dataset.labels)
    if len(classes) < 2:
        raise DataError(f"labels contain a single class ({classes[0]:+g}); need both +1 and -1")


def fit(dataset, config=None, trace_crm=False):
    """Run the cutting-plane loop and return ``(SelectionModel, FitState)``.

    Each outer step asks CRM for the most violated mask at the current dual,
    stops if that mask is already pooled or violates the current bound by
    no more than a relative ``tol_cut``, and otherwise pools it and
    re-solves the reduced problem.  Features already claimed by a group are
    not offered as new supports.
    """
    config = config or GdmConfig()
    _check_dataset(dataset)
    n = dataset.n_samples
    y = dataset.labels
    C = config.C

    alpha = np.full(n, 1.0 / n)
    theta = -np.inf
    pool, pieces, pool_keys = [], [], set()
    support, groups = [], {}
    claimed = set()
    trace, crm_traces = [], []
    stop_reason = "max_iterations"
    mu = None
    scores = None
    t_start = time.perf_counter()

    # one extra oracle call after the last solve decides convergence
    for t in range(config.iterations + 1):
        alpha_signed = alpha * y
        scores = score_features(dataset, alpha_signed)
        budget = config.budget
        if config.target_features is not None:
            budget = min(budget, config.target_features - len(support))
            if budget <= 0:
                stop_reason = "target"
                break
        mask = match(dataset, scores, budget, config.tau, float(np.linalg.norm(alpha_signed)),
                     excluded=claimed, trace=trace_crm)
        if trace_crm:
            crm_traces.append(mask.trace)
        if not mask.support:
            if t == 0:
                raise DataError("no usable features: every feature is constant")
            stop_reason = "exhausted"
            break
        piece = make_piece(dataset, mask.support)
        violation, _ = eval_piece(piece, alpha, C)
        if mask.key() in pool_keys:
            stop_reason = "duplicate"
            break
        if t > 0 and violation <= theta * (1.0 + config.tol_cut):
            stop_reason = "no_violation"
            break
        if t == config.iterations:
            break

        pool.append(mask)
        pieces.append(piece)
        pool_keys.add(mask.key())
        for z, group in zip(mask.support, mask.groups):
            if z not in groups:
                support.append(z)
                groups[z] = []
            groups[z] = sorted(set(groups[z]).union(group))
            claimed.update(group)

        mu_start = None if mu is None else np.append(mu * (1 - 1.0 / len(pieces)), 1.0 / len(pieces))
        sol = solve_minmax(pieces, warm_start=alpha, C=C, eps_sub=config.tol_sub,
                           max_iter=config.max_inner, mu_start=mu_start)
        alpha, theta, mu = sol.alpha, sol.theta, sol.mu
        trace.append({
            "iteration": t + 1,
            "theta": float(theta),
            "violation": float(violation),
            "n_support": len(support),
            "n_constraints": len(pool),
            "solver_gap": float(sol.kkt_residual),
            "wall_time": time.perf_counter() - t_start,
        })

    abs_c = np.abs(scores.c)
    model = SelectionModel(
        support=support,
        groups=groups,
        per_constraint=pool,
        scores_final=[float(abs_c[z]) for z in support],
        config=config,
        n_features=dataset.n_features,
        trace=trace,
        stop_reason=stop_reason,
    )
    state = FitState(alpha=alpha, alpha_signed=alpha * y, theta=float(theta),
                     constraints=pool, trace=trace, stop_reason=stop_reason,
                     crm_traces=crm_traces)
    return model, state


def final_classifier(dataset, model, config=None, with_affiliated=None, bias=None):
    """Retrain the squared-hinge SVM on the selected features.

    Uses the support set by default, or support plus all affiliated
    features when ``with_affiliated`` is set.  ``bias`` appends a constant
    feature with that value (off by default; selection never uses it).
    """
    config = config or model.config
    if with_affiliated is None:
        with_affiliated = config.with_affiliated
    features = model.selected() if with_affiliated else list(model.support)
    if not features:
        raise GdmError("model has no selected features")
    piece = make_piece(dataset, features, bias=bias)
    sol = solve_minmax([piece], C=config.C, eps_sub=config.tol_sub, max_iter=config.max_inner)
    svm, _ = recover_svm(piece, sol.alpha, C=config.C, dataset=dataset)
    return svm


def decision_function(svm, dataset):
    """``w' x_hat`` per sample, standardizing with the training statistics."""
    if dataset.n_features != svm.n_features:
        raise DataError(
            f"feature dimension mismatch: model expects {svm.n_features}, "
            f"data has {dataset.n_features}"
        )
    live = svm.norms > 0
    coef = np.zeros(len(svm.features))
    coef[live] = svm.weights[live] / svm.norms[live]
    X = dataset.features[svm.features]
    out = X.T @ coef - float(coef @ svm.means)
    if svm.bias_value is not None:
        out = out + svm.bias_weight * svm.bias_value
    return np.asarray(out).ravel()


def predict(dataset, svm):
    """Labels in {+1, -1}; a zero decision value maps to +1."""
    return np.where(decision_function(svm, dataset) >= 0, 1, -1)

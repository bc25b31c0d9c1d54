import json
import math

import numpy as np
import pytest

from gdm.corr import pearson
from gdm.errors import DataError, GdmError
from gdm.machine import (GdmConfig, SelectionModel, decision_function, final_classifier, fit,
                         predict)
from gdm.solver import SvmModel, eval_piece, make_piece
from gdm.synth import SynthConfig, generate

from conftest import centered_orthonormal, dense_dataset


@pytest.fixture(scope="module")
def synth_small():
    return generate(SynthConfig(n_samples=200, n_features=300, n_groups=10,
                                n_correlated_groups=3, seed=4))


def test_config_validation():
    for bad in ({"budget": 0}, {"iterations": 0}, {"tau": 1.0}, {"C": 0.0}, {"tol_cut": 0.0},
                {"target_features": 0}):
        with pytest.raises(GdmError):
            GdmConfig(**bad)
    assert GdmConfig(budget=10, target_features=3).budget == 3


def test_perfect_predictor_is_found(rng):
    n = 40
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    noise = rng.standard_normal((30, n))
    F = np.vstack([noise[:17], y[None, :] * 2.0 + 5.0, noise[17:]])
    ds = dense_dataset(F, y)
    model, state = fit(ds, GdmConfig(budget=1, iterations=5))
    assert model.support[0] == 17
    svm = final_classifier(ds, model)
    assert np.all(predict(ds, svm) == y)


def test_single_iteration_matches_first_oracle(synth_small):
    train, _, _ = synth_small
    model, state = fit(train, GdmConfig(budget=5, iterations=1))
    assert len(model.per_constraint) == 1
    assert len(model.support) == 5
    # the first constraint is chosen at uniform weights
    y = train.labels
    from gdm.crm import match, score_features
    a = np.full(train.n_samples, 1.0 / train.n_samples) * y
    mask = match(train, score_features(train, a), 5, 0.25, float(np.linalg.norm(a)))
    assert model.per_constraint[0].support == mask.support


def test_correlated_clique_contributes_one_support(rng):
    n = 60
    basis = centered_orthonormal(n, 12, rng)
    y = np.where(basis[0] >= 0, 1.0, -1.0)
    clique = [0.99 * basis[0] + math.sqrt(1 - 0.99**2) * basis[i + 1] for i in range(4)]
    F = np.vstack(clique + [basis[5 + i] for i in range(7)])
    ds = dense_dataset(F, y)
    model, _ = fit(ds, GdmConfig(budget=3, iterations=5, tau=0.1))
    in_clique = [z for z in model.support if z < 4]
    assert len(in_clique) == 1
    assert sorted(model.groups[in_clique[0]]) == [0, 1, 2, 3]


def test_fit_invariants(synth_small):
    train, _, _ = synth_small
    cfg = GdmConfig(budget=4, iterations=6)
    model, state = fit(train, cfg)
    thetas = [r["theta"] for r in state.trace]
    assert all(b >= a - cfg.tol_sub for a, b in zip(thetas, thetas[1:]))
    assert all(r["theta"] <= r["violation"] + cfg.tol_sub for r in state.trace)
    for z in model.support:
        assert all(z not in model.groups[zz] for zz in model.support if zz != z)
    assert len(model.support) <= cfg.budget * cfg.iterations
    assert len(set(model.support)) == len(model.support)
    # supports of one constraint are pairwise below the correlation level
    for mask in model.per_constraint:
        for i, z in enumerate(mask.support):
            for zz in mask.support[:i]:
                assert abs(pearson(train, z, zz)) < 1 - cfg.tau
    # theta is the max over pooled pieces at the final alpha
    vals = [eval_piece(make_piece(train, m.support), state.alpha, cfg.C)[0]
            for m in model.per_constraint]
    assert state.theta == pytest.approx(max(vals), abs=1e-12)
    assert state.stop_reason in {"no_violation", "duplicate", "exhausted", "max_iterations"}
    assert len(model.scores_final) == len(model.support)
    assert all(s >= 0 for s in model.scores_final)


def test_target_features(synth_small):
    train, _, _ = synth_small
    model, state = fit(train, GdmConfig(target_features=7, iterations=20))
    assert len(model.support) <= 7
    if state.stop_reason == "target":
        assert len(model.support) == 7


def test_single_class_and_constant_errors(rng):
    with pytest.raises(DataError, match="single class"):
        fit(dense_dataset(rng.standard_normal((3, 5)), [1] * 5))
    with pytest.raises(DataError, match="no usable features"):
        fit(dense_dataset(np.ones((3, 6)), [1, -1] * 3))


def test_fit_is_deterministic_and_round_trips(synth_small):
    train, _, _ = synth_small
    cfg = GdmConfig(budget=3, iterations=4)
    m1, _ = fit(train, cfg)
    m2, _ = fit(train, cfg)
    assert m1.to_json(wall_time=False) == m2.to_json(wall_time=False)
    m1.classifier = final_classifier(train, m1)
    back = SelectionModel.from_dict(json.loads(m1.to_json()))
    assert back.to_json() == m1.to_json()
    with pytest.raises(DataError):
        SelectionModel.from_dict({**json.loads(m1.to_json()), "version": "nope"})


def test_model_schema(synth_small):
    train, _, _ = synth_small
    model, _ = fit(train, GdmConfig(budget=3, iterations=3))
    d = json.loads(model.to_json())
    assert list(d) == ["version", "config", "n_features", "support", "groups",
                       "per_constraint", "trace", "scores_final", "stop_reason", "classifier"]
    assert set(d["groups"]) == {str(z) for z in d["support"]}
    for z in d["support"]:
        assert z in d["groups"][str(z)]
    row = d["trace"][0]
    assert list(row) == ["iteration", "theta", "violation", "n_support", "n_constraints",
                         "solver_gap", "wall_time"]


def test_final_classifier_and_prediction(synth_small):
    train, test, _ = synth_small
    model, _ = fit(train, GdmConfig(budget=5, iterations=5))
    svm = final_classifier(train, model)
    assert final_classifier(train, model).weights.tolist() == svm.weights.tolist()
    acc = float(np.mean(predict(test, svm) == test.labels))
    assert acc > 0.7
    svm_aff = final_classifier(train, model, with_affiliated=True)
    assert len(svm_aff.features) == len(model.selected())


def test_predict_zero_weight_and_label_flip(rng):
    ds = dense_dataset(rng.standard_normal((2, 6)), [1, -1] * 3)
    svm = SvmModel(features=np.array([0]), weights=np.array([0.0]), gamma=0.0,
                   means=np.array([0.0]), norms=np.array([1.0]), n_features=2, C=1.0)
    assert predict(ds, svm).tolist() == [1] * 6

    F = rng.standard_normal((4, 30))
    y = np.where(F[0] + 0.3 * rng.standard_normal(30) >= 0, 1.0, -1.0)
    a, b = dense_dataset(F, y), dense_dataset(F, -y)
    ma, _ = fit(a, GdmConfig(budget=2, iterations=3))
    mb, _ = fit(b, GdmConfig(budget=2, iterations=3))
    assert ma.support == mb.support
    np.testing.assert_allclose(decision_function(final_classifier(a, ma), a),
                               -decision_function(final_classifier(b, mb), b), atol=1e-6)


def test_dimension_mismatch(synth_small):
    train, _, _ = synth_small
    model, _ = fit(train, GdmConfig(budget=2, iterations=2))
    svm = final_classifier(train, model)
    other = dense_dataset(np.ones((3, 4)) + np.eye(3, 4), [1, -1, 1, -1])
    with pytest.raises(DataError, match="dimension"):
        predict(other, svm)

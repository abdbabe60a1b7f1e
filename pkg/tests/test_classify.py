import json
import math

import numpy as np
import pytest

from dadil.barycenter import BarycenterConfig
from dadil.barycenter import barycenter_objective
from dadil.barycenter import unlabeled_barycenter
from dadil.classify import ClassifierConfig
from dadil.classify import EnsembleClassifier
from dadil.classify import SoftmaxClassifier
from dadil.classify import accuracy
from dadil.classify import atom_classifiers
from dadil.classify import bound_terms
from dadil.classify import cross_entropy
from dadil.classify import dadil_e
from dadil.classify import dadil_r
from dadil.classify import train_classifier
from dadil.datasets import make_blobs
from dadil.dictionary import Atom
from dadil.dictionary import Dictionary
from dadil.exceptions import DimensionMismatchError
from dadil.exceptions import InvalidInputError
from dadil.ot_core import LabeledPointCloud
from dadil.ot_core import PointCloud
from dadil.ot_core import project_simplex


@pytest.fixture
def blobs():
    X, classes = make_blobs(90, 3, 0.2, 0)
    return LabeledPointCloud.from_class_indices(X, classes, 3)


def _dictionary_from(clouds, alpha_target, beta=1.0):
    """Dictionary whose atoms are the given clouds, with nearly one-hot logits."""
    atoms = [Atom(c.support.copy(), 30.0 * c.labels) for c in clouds]
    weights = np.vstack([np.full(len(clouds), 1.0 / len(clouds)), alpha_target])
    return Dictionary(atoms, weights, beta)


def test_zero_classifier_is_uniform():
    clf = SoftmaxClassifier.zeros(2, 4)
    assert clf.d == 2
    assert clf.n_classes == 4
    assert clf.predict_proba(np.ones((3, 2))) == pytest.approx(np.full((3, 4), 0.25))
    assert list(clf.predict(np.ones((3, 2)))) == [0, 0, 0]


def test_affine_map_uses_last_row_as_bias():
    clf = SoftmaxClassifier(np.array([[1.0, -1.0], [0.0, 0.0], [0.0, math.log(3.0)]]))
    proba = clf.predict_proba(np.array([[0.0, 5.0]]))
    assert proba == pytest.approx(np.array([[0.25, 0.75]]))
    with pytest.raises(DimensionMismatchError):
        clf.predict_proba(np.zeros((1, 3)))


def test_separable_blobs_are_learned(blobs):
    clf = train_classifier(blobs, ClassifierConfig())
    assert accuracy(clf.predict(blobs), blobs.classes) >= 99.0


@pytest.mark.parametrize("solver", ["lbfgs", "sgd"])
def test_training_is_repeatable(blobs, solver):
    cfg = ClassifierConfig(solver=solver, epochs=20)
    first = train_classifier(blobs, cfg)
    second = train_classifier(blobs, cfg)
    assert np.array_equal(first.weights, second.weights)


def test_sgd_solver_also_separates(blobs):
    clf = train_classifier(blobs, ClassifierConfig(solver="sgd", epochs=100, batch_size=16))
    assert accuracy(clf.predict(blobs), blobs.classes) >= 95.0


def test_uniform_labels_cannot_beat_chance(rng):
    data = LabeledPointCloud.from_arrays(rng.standard_normal((40, 2)), np.full((40, 4), 0.25))
    clf = train_classifier(data)
    assert cross_entropy(clf, data) >= math.log(4) - 0.01


def test_training_lowers_cross_entropy(blobs):
    clf = train_classifier(blobs, ClassifierConfig(epochs=5))
    initial = cross_entropy(SoftmaxClassifier.zeros(2, 3), blobs)
    assert initial == pytest.approx(math.log(3))
    assert cross_entropy(clf, blobs) < initial


def test_training_needs_labels_and_enough_points(rng):
    with pytest.raises(InvalidInputError):
        train_classifier(PointCloud(rng.standard_normal((10, 2))))
    with pytest.raises(InvalidInputError):
        train_classifier(LabeledPointCloud.from_class_indices([[0.0], [1.0]], [0, 1], 3))


@pytest.mark.parametrize(
    "pred,truth,expected",
    [([0, 1, 2, 1], [0, 1, 2, 1], 100.0), ([0, 0], [1, 1], 0.0), ([0, 1, 1, 1], [0, 1, 0, 1], 75.0)],
)
def test_accuracy(pred, truth, expected):
    assert accuracy(pred, truth) == expected


def test_accuracy_rejects_mismatch():
    with pytest.raises(DimensionMismatchError):
        accuracy([0, 1], [0])
    with pytest.raises(InvalidInputError):
        accuracy([], [])


@pytest.fixture
def members(rng):
    return [SoftmaxClassifier(rng.standard_normal((3, 3))) for _ in range(3)]


def test_one_hot_ensemble_is_its_member(members, rng):
    X = rng.standard_normal((20, 2))
    for k in range(3):
        ensemble = EnsembleClassifier(members, np.eye(3)[k])
        assert np.array_equal(ensemble.predict_proba(X), members[k].predict_proba(X))


def test_ensemble_is_a_convex_combination(members, rng):
    X = rng.standard_normal((20, 2))
    alpha = project_simplex(rng.standard_normal(3))
    ensemble = EnsembleClassifier(members, alpha)
    expected = sum(a * m.predict_proba(X) for a, m in zip(alpha, members))
    assert np.max(np.abs(ensemble.predict_proba(X) - expected)) <= 1e-12
    assert ensemble.predict_proba(X).sum(axis=1) == pytest.approx(np.ones(20))
    same = EnsembleClassifier([members[0]] * 3, alpha)
    assert same.predict_proba(X) == pytest.approx(members[0].predict_proba(X), abs=1e-12)


def test_ensemble_validation(members):
    with pytest.raises(InvalidInputError):
        EnsembleClassifier(members, [0.5, 0.6, 0.0])
    with pytest.raises(DimensionMismatchError):
        EnsembleClassifier(members, [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        EnsembleClassifier([], [])


def test_classifiers_survive_json(members):
    ensemble = EnsembleClassifier(members, [0.2, 0.3, 0.5])
    restored = EnsembleClassifier.from_dict(json.loads(json.dumps(ensemble.to_dict())))
    assert np.array_equal(restored.alpha, ensemble.alpha)
    for a, b in zip(restored.members, members):
        assert np.array_equal(a.weights, b.weights)
    with pytest.raises(InvalidInputError):
        SoftmaxClassifier.from_dict(ensemble.to_dict())


def test_reconstruction_of_a_single_atom_matches_training_on_it(blobs):
    dictionary = _dictionary_from([blobs], [1.0])
    clf = dadil_r(dictionary, BarycenterConfig())
    direct = train_classifier(blobs)
    truth = blobs.classes
    assert accuracy(clf.predict(blobs), truth) >= accuracy(direct.predict(blobs), truth) - 2.0


def test_target_on_a_vertex_ensembles_to_that_atom(rng):
    clouds = []
    for seed, shift in enumerate((0.0, 3.0)):
        X, classes = make_blobs(30, 2, 0.2, seed)
        clouds.append(LabeledPointCloud.from_class_indices(X + shift, classes, 2))
    dictionary = _dictionary_from(clouds, [0.0, 1.0])
    ensemble = dadil_e(dictionary)
    members = atom_classifiers(dictionary)
    X = rng.standard_normal((10, 2))
    assert np.array_equal(ensemble.predict_proba(X), members[1].predict_proba(X))
    assert np.array_equal(ensemble.alpha, dictionary.alpha_target)


def test_atom_classifiers_in_threads_match(rng):
    clouds = [LabeledPointCloud.from_class_indices(rng.standard_normal((12, 2)), np.arange(12) % 2, 2)] * 2
    dictionary = _dictionary_from(clouds, [0.5, 0.5])
    one = atom_classifiers(dictionary)
    many = atom_classifiers(dictionary, workers=2)
    for a, b in zip(one, many):
        assert np.array_equal(a.weights, b.weights)


def test_bound_terms_vanish_for_a_single_matching_atom(blobs):
    dictionary = _dictionary_from([blobs], [1.0])
    recon_w2, gamma = bound_terms(dictionary, blobs.cloud, BarycenterConfig())
    assert recon_w2 == pytest.approx(0.0, abs=1e-6)
    assert gamma == pytest.approx(0.0, abs=1e-6)


def test_bound_terms_are_non_negative(rng):
    clouds = [LabeledPointCloud.from_class_indices(rng.standard_normal((10, 2)), np.arange(10) % 2, 2) for _ in "ab"]
    dictionary = _dictionary_from(clouds, [0.4, 0.6])
    recon_w2, gamma = bound_terms(dictionary, PointCloud(rng.standard_normal((10, 2))), BarycenterConfig())
    assert recon_w2 > 0
    assert gamma >= 0


def test_barycenter_minimizes_the_weighted_distance():
    wins = 0
    for trial in range(10):
        rng = np.random.default_rng(trial)
        atoms = [PointCloud(rng.standard_normal((8, 2)) + rng.uniform(-2, 2, size=2)) for _ in range(3)]
        alpha = rng.dirichlet(np.ones(3))
        cfg = BarycenterConfig(max_iter=50)
        value = barycenter_objective(atoms, alpha, unlabeled_barycenter(atoms, alpha, cfg).barycenter)
        others = [
            barycenter_objective(atoms, alpha, unlabeled_barycenter(atoms, rng.dirichlet(np.ones(3)), cfg).barycenter)
            for _ in range(10)
        ]
        if value <= min(others) + 1e-6:
            wins += 1
    assert wins >= 8

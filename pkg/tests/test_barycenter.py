import logging

import numpy as np
import pytest

from dadil.barycenter import BarycenterConfig
from dadil.barycenter import barycenter_objective
from dadil.barycenter import init_barycenter
from dadil.barycenter import labeled_barycenter
from dadil.barycenter import unlabeled_barycenter
from dadil.exceptions import DimensionMismatchError
from dadil.exceptions import InvalidInputError
from dadil.ot_core import LabeledPointCloud
from dadil.ot_core import PointCloud


def _sorted_rows(X):
    return X[np.lexsort(X.T[::-1])]


def test_two_diracs_meet_at_weighted_midpoint():
    atoms = [PointCloud([[0.0, 0.0]]), PointCloud([[2.0, 0.0]])]
    res = unlabeled_barycenter(atoms, [0.25, 0.75], BarycenterConfig(n_support=1))
    assert res.barycenter.support == pytest.approx(np.array([[1.5, 0.0]]), abs=1e-6)


def test_two_labeled_diracs_mix_their_labels():
    atoms = [
        LabeledPointCloud.from_arrays([[0.0, 0.0]], [[1.0, 0.0]]),
        LabeledPointCloud.from_arrays([[2.0, 0.0]], [[0.0, 1.0]]),
    ]
    res = labeled_barycenter(atoms, [0.25, 0.75], BarycenterConfig(n_support=1))
    assert res.barycenter.support == pytest.approx(np.array([[1.5, 0.0]]), abs=1e-6)
    assert res.barycenter.labels == pytest.approx(np.array([[0.25, 0.75]]), abs=1e-6)


@pytest.mark.parametrize("seed", range(50))
def test_objective_never_increases(seed):
    rng = np.random.default_rng(seed)
    atoms = [
        LabeledPointCloud.from_class_indices(rng.standard_normal((12, 2)), np.arange(12) % 3, 3) for _ in range(3)
    ]
    res = labeled_barycenter(atoms, rng.dirichlet(np.ones(3)), BarycenterConfig(max_iter=30, seed=seed))
    trace = res.objective_trace
    assert len(trace) == res.iterations
    assert all(b <= a + 1e-8 for a, b in zip(trace, trace[1:]))


def test_single_atom_is_its_own_barycenter(make_labeled):
    atom = make_labeled(10)
    res = labeled_barycenter([atom], [1.0], BarycenterConfig())
    assert res.objective == pytest.approx(0.0, abs=1e-6)
    assert _sorted_rows(res.barycenter.support) == pytest.approx(_sorted_rows(atom.support), abs=1e-6)
    assert barycenter_objective([atom], [1.0], res.barycenter, beta=1.0) == pytest.approx(0.0, abs=1e-6)


def test_barycenter_is_linear_in_the_final_plans(make_labeled):
    atoms = [make_labeled(8), make_labeled(8)]
    alpha = np.array([0.4, 0.6])
    res = labeled_barycenter(atoms, alpha, BarycenterConfig(max_iter=20))
    n_b = res.barycenter.n
    X_B = sum(a * n_b * (plan.T @ atom.support) for a, atom, plan in zip(alpha, atoms, res.plans))
    assert np.allclose(res.barycenter.support, X_B, atol=1e-12)
    for plan, atom in zip(res.plans, atoms):
        assert plan.shape == (atom.n, n_b)


def test_barycenter_labels_stay_on_the_simplex(make_labeled):
    atoms = [make_labeled(9, n_classes=3) for _ in range(2)]
    res = labeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(n_support=6))
    assert res.barycenter.n == 6
    assert np.all(res.barycenter.labels >= 0)
    assert res.barycenter.labels.sum(axis=1) == pytest.approx(np.ones(6))


def test_threaded_solves_match_sequential(make_labeled):
    atoms = [make_labeled(10) for _ in range(3)]
    alpha = [0.3, 0.3, 0.4]
    one = labeled_barycenter(atoms, alpha, BarycenterConfig(seed=4))
    many = labeled_barycenter(atoms, alpha, BarycenterConfig(seed=4, workers=3))
    assert np.array_equal(one.barycenter.support, many.barycenter.support)
    assert one.objective_trace == many.objective_trace


def test_seed_makes_runs_repeatable(make_labeled):
    atoms = [make_labeled(10) for _ in range(2)]
    first = labeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(), seed=11)
    second = labeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(), seed=11)
    assert np.array_equal(first.barycenter.support, second.barycenter.support)


def test_relaxed_iterations_still_converge():
    atoms = [PointCloud([[0.0, 0.0]]), PointCloud([[2.0, 0.0]])]
    res = unlabeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(n_support=1, relaxation=0.5, max_iter=200))
    assert res.barycenter.support == pytest.approx(np.array([[1.0, 0.0]]), abs=1e-3)


def test_bad_weights_are_rejected(make_labeled):
    atoms = [make_labeled(4), make_labeled(4)]
    with pytest.raises(InvalidInputError):
        labeled_barycenter(atoms, [0.7, 0.7], BarycenterConfig())
    with pytest.raises(DimensionMismatchError):
        labeled_barycenter(atoms, [1.0], BarycenterConfig())
    with pytest.raises(InvalidInputError):
        labeled_barycenter([], [], BarycenterConfig())


def test_atoms_must_agree(make_labeled):
    with pytest.raises(DimensionMismatchError):
        labeled_barycenter([make_labeled(4, d=2), make_labeled(4, d=3)], [0.5, 0.5], BarycenterConfig())
    with pytest.raises(DimensionMismatchError):
        labeled_barycenter(
            [make_labeled(4, n_classes=2), make_labeled(4, n_classes=3)], [0.5, 0.5], BarycenterConfig()
        )


@pytest.mark.parametrize(
    "kwargs", [{"n_support": 0}, {"tol": 0.0}, {"max_iter": 0}, {"beta": -1.0}, {"relaxation": 1.0}, {"workers": 0}]
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidInputError):
        BarycenterConfig(**kwargs)


def test_init_barycenter_is_one_hot():
    init = init_barycenter(5, 3, 4, seed=0)
    assert init.support.shape == (5, 3)
    assert np.all(init.labels.sum(axis=1) == 1.0)
    assert set(np.unique(init.labels)) <= {0.0, 1.0}


@pytest.mark.parametrize("seed", range(5))
def test_order_of_atoms_and_points_does_not_matter(make_labeled, rng, seed):
    atoms = [make_labeled(10, n_classes=3) for _ in range(3)]
    alpha = np.array([0.2, 0.3, 0.5])
    cfg = BarycenterConfig(max_iter=15, seed=seed)
    base = labeled_barycenter(atoms, alpha, cfg)
    order = rng.permutation(3)
    shuffled = []
    for k in order:
        perm = rng.permutation(atoms[k].n)
        shuffled.append(LabeledPointCloud(PointCloud(atoms[k].support[perm]), atoms[k].labels[perm]))
    res = labeled_barycenter(shuffled, alpha[order], cfg)
    assert res.barycenter.support == pytest.approx(base.barycenter.support, abs=1e-9)
    assert res.barycenter.labels == pytest.approx(base.barycenter.labels, abs=1e-9)
    assert res.objective == pytest.approx(base.objective, abs=1e-9)


def test_stopping_at_max_iter_is_a_warning(make_labeled, caplog):
    atoms = [make_labeled(10) for _ in range(2)]
    with caplog.at_level(logging.WARNING, logger="dadil.barycenter"):
        res = labeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(max_iter=1))
        assert not res.converged
        assert "max_iter=1" in caplog.text
        caplog.clear()
        labeled_barycenter(atoms, [0.5, 0.5], BarycenterConfig(max_iter=1), warn=False)
        assert not caplog.records
    converged = unlabeled_barycenter(
        [PointCloud([[0.0, 0.0]]), PointCloud([[2.0, 0.0]])], [0.5, 0.5], BarycenterConfig(n_support=1)
    )
    assert converged.converged

import dataclasses
import logging

import numpy as np
import pytest

from dadil import learning
from dadil.barycenter import BarycenterConfig
from dadil.datasets import DatasetSpec
from dadil.datasets import generate_domains
from dadil.dictionary import DadilConfig
from dadil.dictionary import DatasetsMeta
from dadil.dictionary import init_dictionary
from dadil.exceptions import DimensionMismatchError
from dadil.exceptions import InvalidInputError
from dadil.exceptions import NonFiniteError
from dadil.learning import batch_loss
from dadil.learning import envelope_gradients
from dadil.learning import fit
from dadil.learning import frozen_plan_loss
from dadil.learning import resolve_beta
from dadil.learning import sample_batches
from dadil.learning import sample_source_batch
from dadil.learning import sample_unlabeled_batch
from dadil.learning import wbr_fit
from dadil.ot_core import LabeledPointCloud
from dadil.ot_core import PointCloud
from dadil.ot_core import is_on_simplex


def _problem(seed, n_b=8, atom_size=10):
    """One labeled source and an unlabeled target, reconstructed from two atoms."""
    rng = np.random.default_rng(seed)
    source = LabeledPointCloud.from_class_indices(rng.standard_normal((20, 2)), np.arange(20) % 2, 2)
    target = PointCloud(rng.standard_normal((20, 2)) + 0.5)
    cfg = DadilConfig(
        batch_size=n_b,
        atoms_k=2,
        atom_size=atom_size,
        beta=0.5,
        seed=seed,
        barycenter=BarycenterConfig(max_iter=50, tol=1e-12),
    )
    dictionary = init_dictionary(cfg, DatasetsMeta.from_domains([source], target))
    batches = sample_batches(dictionary, [source, target], n_b, rng)
    return dictionary, batches, cfg


def _central_difference(loss, dictionary, field, k, i, j, h):
    plus = dictionary.copy()
    minus = dictionary.copy()
    if field == "weights":
        plus.weights[k, i] += h
        minus.weights[k, i] -= h
    else:
        getattr(plus.atoms[k], field)[i, j] += h
        getattr(minus.atoms[k], field)[i, j] -= h
    return (loss(plus) - loss(minus)) / (2 * h)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_the_frozen_plan_surrogate(seed):
    dictionary, batches, cfg = _problem(seed)
    loss, recs = batch_loss(dictionary, batches, cfg)
    assert frozen_plan_loss(dictionary, batches, recs) == pytest.approx(loss, abs=1e-9)
    grads = envelope_gradients(dictionary, batches, recs)

    def surrogate(d):
        return frozen_plan_loss(d, batches, recs)

    h = 1e-5
    for k in range(dictionary.n_atoms):
        for i in range(dictionary.atom_size):
            for j in range(dictionary.d):
                fd = _central_difference(surrogate, dictionary, "features", k, i, j, h)
                assert fd == pytest.approx(grads.features[k, i, j], rel=1e-6, abs=1e-8)
            for j in range(dictionary.n_classes):
                fd = _central_difference(surrogate, dictionary, "logits", k, i, j, h)
                assert fd == pytest.approx(grads.logits[k, i, j], rel=1e-5, abs=1e-7)
    for ell in range(dictionary.n_domains):
        for k in range(dictionary.n_atoms):
            fd = _central_difference(surrogate, dictionary, "weights", ell, k, None, h)
            assert fd == pytest.approx(grads.weights[ell, k], rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_the_full_loss(seed):
    dictionary, batches, cfg = _problem(seed)
    _, recs = batch_loss(dictionary, batches, cfg)
    grads = envelope_gradients(dictionary, batches, recs)

    def full(d):
        return batch_loss(d, batches, cfg)[0]

    h = 1e-6
    k = seed % dictionary.n_atoms
    i = int(batches[0].atom_indices[k][0])
    for j in range(dictionary.d):
        fd = _central_difference(full, dictionary, "features", k, i, j, h)
        assert fd == pytest.approx(grads.features[k, i, j], rel=1e-3, abs=1e-6)

    # Tangent to the simplex: move weight from atom 0 to atom 1 on the target row
    plus = dictionary.copy()
    minus = dictionary.copy()
    plus.weights[-1] += h * np.array([-1.0, 1.0])
    minus.weights[-1] -= h * np.array([-1.0, 1.0])
    if plus.weights[-1].min() >= 0 and minus.weights[-1].min() >= 0:
        fd = (full(plus) - full(minus)) / (2 * h)
        directional = grads.weights[-1, 1] - grads.weights[-1, 0]
        assert fd == pytest.approx(directional, rel=1e-3, abs=1e-6)


def test_unlabeled_batches_do_not_touch_logits():
    dictionary, batches, cfg = _problem(0)
    batches[0] = dataclasses.replace(batches[0], data=batches[0].data.cloud)
    _, recs = batch_loss(dictionary, batches, cfg)
    grads = envelope_gradients(dictionary, batches, recs)
    assert np.all(grads.logits == 0.0)
    assert np.any(grads.features != 0.0)


def test_gradients_need_every_reconstruction():
    dictionary, batches, cfg = _problem(1)
    _, recs = batch_loss(dictionary, batches, cfg)
    with pytest.raises(DimensionMismatchError):
        envelope_gradients(dictionary, batches, recs[:1])
    with pytest.raises(DimensionMismatchError):
        batch_loss(dictionary, batches[:1], cfg)


def test_source_batches_are_class_balanced(make_labeled, rng):
    data = make_labeled(30, n_classes=3)
    batch = sample_source_batch(data, 12, rng)
    assert batch.n == 12
    assert np.bincount(batch.classes, minlength=3).tolist() == [4, 4, 4]


def test_small_classes_are_sampled_with_replacement(rng):
    classes = np.array([0] * 10 + [1] * 2)
    data = LabeledPointCloud.from_class_indices(rng.standard_normal((12, 2)), classes, 2)
    batch = sample_source_batch(data, 8, rng)
    assert np.bincount(batch.classes).tolist() == [4, 4]
    with pytest.raises(InvalidInputError):
        sample_source_batch(data, 8, rng, replace=False)


def test_source_batches_need_every_class(rng):
    data = LabeledPointCloud.from_class_indices(rng.standard_normal((6, 2)), [0, 1, 0, 1, 0, 1], 3)
    with pytest.raises(InvalidInputError):
        sample_source_batch(data, 6, rng)
    with pytest.raises(InvalidInputError):
        sample_source_batch(data, 7, rng)


def test_unlabeled_batches(rng):
    data = PointCloud(rng.standard_normal((10, 2)))
    batch = sample_unlabeled_batch(data, 6, rng)
    assert batch.n == 6
    assert len({tuple(x) for x in batch.support}) == 6
    assert sample_unlabeled_batch(data, 15, rng).n == 15


def test_resolve_beta():
    batch = PointCloud([[0.0, 0.0], [2.0, 0.0]])
    assert resolve_beta(DadilConfig(beta=0.3), batch) == 0.3
    # Mean of the cost matrix [[0, 4], [4, 0]]
    assert resolve_beta(DadilConfig(), batch) == pytest.approx(2.0)
    assert resolve_beta(DadilConfig(beta_scale=0.5), batch) == pytest.approx(1.0)
    assert resolve_beta(DadilConfig(beta_scale=0.5), PointCloud([[1.0, 1.0], [1.0, 1.0]])) == 0.5


def test_fit_produces_a_valid_dictionary(blob_domains, small_dadil):
    sources, target = blob_domains[:-1], blob_domains[-1]
    dictionary, trace = fit(sources, target.cloud, small_dadil)
    assert dictionary.n_atoms == 2
    assert dictionary.n_domains == 3
    assert dictionary.atom_size == 16
    assert dictionary.beta > 0
    assert all(is_on_simplex(row, atol=1e-8) for row in dictionary.weights)
    assert len(trace.loss) == small_dadil.n_iter
    assert all(len(epoch) == small_dadil.n_batches for epoch in trace.loss)
    assert all(np.isfinite(trace.epoch_loss))
    assert len(trace.weights) == small_dadil.n_iter
    assert all(x >= 0 for x in trace.delta_x + trace.delta_y + trace.delta_a)


def test_fit_is_repeatable(blob_domains, small_dadil):
    sources, target = blob_domains[:-1], blob_domains[-1]
    first, _ = fit(sources, target.cloud, small_dadil)
    second, _ = fit(sources, target.cloud, small_dadil)
    assert np.array_equal(first.weights, second.weights)
    assert np.array_equal(first.atoms[0].features, second.atoms[0].features)


def test_fit_never_reads_target_labels(blob_domains, small_dadil):
    sources, target = blob_domains[:-1], blob_domains[-1]
    shuffled = LabeledPointCloud(target.cloud, target.labels[::-1])
    first, _ = fit(sources, target, small_dadil)
    second, _ = fit(sources, shuffled, small_dadil)
    assert np.array_equal(first.weights, second.weights)


def test_fit_decreases_the_loss(blob_domains):
    sources, target = blob_domains[:-1], blob_domains[-1]
    cfg = DadilConfig(
        n_iter=15,
        batch_size=8,
        atoms_k=2,
        atom_size=16,
        lr=1.0,
        lr_weights=0.1,
        seed=2,
        barycenter=BarycenterConfig(max_iter=5),
    )
    _, trace = fit(sources, target.cloud, cfg)
    assert np.mean(trace.epoch_loss[-3:]) < trace.epoch_loss[0]


def test_fit_rejects_unbalanced_batch_size(blob_domains, small_dadil):
    cfg = dataclasses.replace(small_dadil, batch_size=7)
    with pytest.raises(InvalidInputError):
        fit(blob_domains[:-1], blob_domains[-1].cloud, cfg)


def test_fit_rejects_unlabeled_sources(blob_domains, small_dadil):
    with pytest.raises(InvalidInputError):
        fit([d.cloud for d in blob_domains[:-1]], blob_domains[-1].cloud, small_dadil)


def test_fit_reports_non_finite_steps(monkeypatch, blob_domains, small_dadil):
    def broken(dictionary, batches, reconstructions):
        grads = envelope_gradients(dictionary, batches, reconstructions)
        grads.features[:] = np.nan
        return grads

    monkeypatch.setattr(learning, "envelope_gradients", broken)
    with pytest.raises(NonFiniteError) as excinfo:
        fit(blob_domains[:-1], blob_domains[-1].cloud, small_dadil)
    assert excinfo.value.batch_indices


def test_wbr_leaves_sources_alone(blob_domains, small_dadil):
    sources, target = blob_domains[:-1], blob_domains[-1]
    before = [s.support.copy() for s in sources]
    alpha = wbr_fit(sources, target.cloud, small_dadil)
    assert alpha.shape == (2,)
    assert is_on_simplex(alpha)
    for s, X in zip(sources, before):
        assert np.array_equal(s.support, X)


def _moons(angles, translations=None):
    return generate_domains(DatasetSpec(angles=angles, translations=translations, n_samples=200))


def test_wbr_starts_uniform(blob_domains, small_dadil):
    cfg = dataclasses.replace(small_dadil, wbr_n_iter=1, n_batches=1, lr_weights=1e-12)
    alpha = wbr_fit(blob_domains[:-1], blob_domains[-1].cloud, cfg)
    assert alpha == pytest.approx(np.full(2, 0.5), abs=1e-9)


def test_wbr_finds_the_source_equal_to_the_target():
    sources = _moons((0.0, 0.0, 0.0), ((0.0, 0.0), (1.5, 0.0), (0.0, 1.5)))
    cfg = DadilConfig(batch_size=100, lr_weights=0.1, wbr_n_iter=30, seed=1)
    alpha = wbr_fit(sources, sources[0].cloud, cfg)
    assert alpha[0] >= 0.9


def test_wbr_splits_evenly_between_symmetric_sources():
    domains = _moons((0.0, 0.0, 0.0), ((-1.0, 0.0), (1.0, 0.0), (0.0, 0.0)))
    cfg = DadilConfig(batch_size=100, lr_weights=0.1, wbr_n_iter=15, seed=2)
    alpha = wbr_fit(domains[:-1], domains[-1].cloud, cfg)
    assert alpha == pytest.approx(np.array([0.5, 0.5]), abs=0.1)


def test_fit_halves_the_loss_on_shifted_moons():
    domains = _moons((0.0, 10.0, 20.0, 30.0))
    cfg = DadilConfig(n_iter=20, batch_size=40, atom_size=80, lr=10.0, seed=0)
    _, trace = fit(domains[:-1], domains[-1].cloud, cfg)
    assert trace.epoch_loss[-1] < 0.5 * trace.epoch_loss[0]


def test_fit_reports_non_finite_weight_gradients(monkeypatch, blob_domains, small_dadil):
    def broken(dictionary, batches, reconstructions):
        grads = envelope_gradients(dictionary, batches, reconstructions)
        grads.weights[-1, 0] = np.nan
        return grads

    monkeypatch.setattr(learning, "envelope_gradients", broken)
    with pytest.raises(NonFiniteError) as excinfo:
        fit(blob_domains[:-1], blob_domains[-1].cloud, small_dadil)
    assert len(excinfo.value.batch_indices) == 3
    assert all(len(idx) == small_dadil.batch_size for idx in excinfo.value.batch_indices)


def test_stalled_batch_barycenters_are_summarized_once(blob_domains, small_dadil, caplog):
    with caplog.at_level(logging.WARNING, logger="dadil"):
        fit(blob_domains[:-1], blob_domains[-1].cloud, small_dadil)
    stalled = [r for r in caplog.records if "barycenters stopped at max_iter" in r.getMessage()]
    assert len(stalled) <= 1
    assert not [r for r in caplog.records if r.name == "dadil.barycenter"]

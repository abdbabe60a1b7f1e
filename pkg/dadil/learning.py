# -*- coding: utf-8 -*-

"""Mini-batch dictionary learning and barycentric coordinate regression with envelope-theorem gradients."""

from __future__ import annotations

import dataclasses
import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .barycenter import BarycenterResult
from .barycenter import labeled_barycenter
from .dictionary import DatasetsMeta
from .dictionary import TrainTrace
from .dictionary import init_dictionary
from .dictionary import update_magnitudes
from .exceptions import DimensionMismatchError
from .exceptions import InvalidInputError
from .exceptions import NonFiniteError
from .ot_core import LabeledPointCloud
from .ot_core import PointCloud
from .ot_core import feature_cost
from .ot_core import labeled_cost
from .ot_core import project_rows
from .ot_core import project_simplex
from .ot_core import support_of
from .ot_core import solve_ot
from .ot_core import transport_cost

logger = logging.getLogger(__name__)


@dataclass
class DomainBatch:
    """One domain's mini-batch, the atom rows it is reconstructed from, and the barycenter seed."""

    data: typing.Union[LabeledPointCloud, PointCloud]
    indices: np.ndarray
    atom_indices: typing.List[np.ndarray] = field(default_factory=list)
    seed: int = 0

    @property
    def labeled(self):
        return isinstance(self.data, LabeledPointCloud)


@dataclass
class Reconstruction(BarycenterResult):
    """A barycenter reconstruction together with its data-side plan and loss."""

    outer_plan: typing.Optional[np.ndarray] = None
    loss: float = 0.0
    beta: float = 0.0


@dataclass
class Gradients:
    features: np.ndarray
    logits: np.ndarray
    weights: np.ndarray

    def is_finite(self):
        return bool(all(np.all(np.isfinite(g)) for g in (self.features, self.logits, self.weights)))


def _class_balanced_indices(classes, n_classes, n_b, rng, replace=None):
    if n_b % n_classes:
        raise InvalidInputError(f"batch size {n_b} is not divisible by the number of classes {n_classes}")
    per_class = n_b // n_classes
    chosen = []
    for c in range(n_classes):
        pool = np.flatnonzero(classes == c)
        if pool.size == 0:
            raise InvalidInputError(f"class {c} has no samples to draw from")
        with_replacement = pool.size < per_class
        if with_replacement and replace is False:
            raise InvalidInputError(f"class {c} has {pool.size} samples but {per_class} were requested")
        if with_replacement:
            logger.warning(f"class {c}: sampling {per_class} of {pool.size} points with replacement")
        chosen.append(rng.choice(pool, size=per_class, replace=with_replacement or bool(replace)))
    return np.concatenate(chosen)


def sample_source_batch(dataset, n_b, rng, replace=None):
    """
    Draws a class-balanced mini-batch from a labeled dataset.

    Classes with fewer than `n_b / n_c` points are sampled with replacement unless `replace` is False.

    Args:
        dataset (LabeledPointCloud): labeled domain
        n_b (int): batch size, a multiple of the number of classes
        rng (np.random.Generator): random state

    Returns:
        (LabeledPointCloud): exactly `n_b / n_c` points of each class
    """
    idx = _class_balanced_indices(dataset.classes, dataset.n_classes, n_b, rng, replace)
    return LabeledPointCloud(PointCloud(dataset.support[idx]), dataset.labels[idx])


def sample_unlabeled_batch(dataset, n_b, rng):
    """Draws `n_b` points uniformly, without replacement whenever the dataset is large enough."""
    idx = rng.choice(dataset.n, size=n_b, replace=n_b > dataset.n)
    return PointCloud(support_of(dataset)[idx])


def sample_batches(dictionary, domains, n_b, rng):
    """Samples one `DomainBatch` per domain; labeled domains get class-balanced batches."""
    batches = []
    for dataset in domains:
        if isinstance(dataset, LabeledPointCloud):
            idx = _class_balanced_indices(dataset.classes, dataset.n_classes, n_b, rng)
            data = LabeledPointCloud(PointCloud(dataset.support[idx]), dataset.labels[idx])
        else:
            idx = rng.choice(dataset.n, size=n_b, replace=n_b > dataset.n)
            data = PointCloud(dataset.support[idx])
        atom_indices = [rng.choice(atom.n, size=n_b, replace=n_b > atom.n) for atom in dictionary.atoms]
        seed = int(rng.integers(2**31))
        batches.append(DomainBatch(data, idx, atom_indices, seed))
    return batches


def resolve_beta(cfg, batch):
    """Label-cost weight: `cfg.beta`, or `beta_scale` times the mean squared feature distance of `batch`."""
    if cfg.beta is not None:
        return float(cfg.beta)
    scale = float(np.mean(feature_cost(batch, batch)))
    if not scale > 0:
        return float(cfg.beta_scale)
    return float(cfg.beta_scale * scale)


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, items))
    return [fn(x) for x in items]


def _reconstruct(atoms, alpha, batch, bary_cfg, beta):
    res = labeled_barycenter(atoms, alpha, bary_cfg, seed=batch.seed, beta=beta, warn=False)
    if batch.labeled:
        C = labeled_cost(batch.data, res.barycenter, beta)
    else:
        C = feature_cost(batch.data, res.barycenter)
    plan = solve_ot(C)
    return Reconstruction(**vars(res), outer_plan=plan, loss=transport_cost(C, plan), beta=beta)


def _batch_bary_cfg(cfg, n_b):
    return dataclasses.replace(cfg.barycenter, n_support=n_b)


def batch_loss(dictionary, batches, cfg):
    """
    Mean reconstruction loss of a set of domain mini-batches.

    Each domain is reconstructed as the labeled barycenter of the atom rows named in its batch,
    then compared with the labeled ground cost (labeled domains) or the feature cost (target).

    Args:
        dictionary (Dictionary): current atoms and weights
        batches (list): one `DomainBatch` per dictionary row
        cfg (DadilConfig): hyper-parameters

    Returns:
        (float, list): mean loss and per-domain `Reconstruction`s
    """
    if len(batches) != dictionary.n_domains:
        raise DimensionMismatchError(f"{len(batches)} batches for {dictionary.n_domains} domains")
    beta = dictionary.beta if dictionary.beta is not None else cfg.barycenter.beta

    def reconstruct(ell):
        batch = batches[ell]
        atoms = [atom.to_cloud(idx) for atom, idx in zip(dictionary.atoms, batch.atom_indices)]
        return _reconstruct(atoms, dictionary.weights[ell], batch, _batch_bary_cfg(cfg, batch.data.n), beta)

    reconstructions = _map(reconstruct, list(range(len(batches))), cfg.workers)
    loss = float(np.mean([rec.loss for rec in reconstructions]))
    return loss, reconstructions


def _outer_gradients(batch, rec, beta):
    """Gradient of <C, plan> with the plan frozen, w.r.t. the barycenter features and labels."""
    plan = rec.outer_plan
    mass = plan.sum(axis=0)[:, None]
    G_X = 2.0 * (mass * rec.barycenter.support - plan.T @ batch.data.support)
    if batch.labeled and beta > 0:
        G_Y = 2.0 * beta * (mass * rec.barycenter.labels - plan.T @ batch.data.labels)
    else:
        G_Y = None
    return G_X, G_Y


def _atom_gradients(atoms, alpha, rec, G_X, G_Y):
    """
    Chains barycenter gradients onto the atoms through X_B = sum_k alpha_k n_B plan_k^T X_k.

    Returns per-atom feature gradients, per-atom label gradients (or None) and the weight gradient.
    """
    n_b = rec.barycenter.n
    g_features = []
    g_labels = []
    g_alpha = np.zeros(len(atoms))
    for k, (a_k, atom, plan) in enumerate(zip(alpha, atoms, rec.plans)):
        g_features.append(a_k * n_b * (plan @ G_X))
        g_alpha[k] = n_b * np.sum(G_X * (plan.T @ atom.support))
        if G_Y is not None:
            g_labels.append(a_k * n_b * (plan @ G_Y))
            g_alpha[k] += n_b * np.sum(G_Y * (plan.T @ atom.labels))
        else:
            g_labels.append(None)
    return g_features, g_labels, g_alpha


def _softmax_backward(labels, g_labels):
    return labels * (g_labels - np.sum(g_labels * labels, axis=1, keepdims=True))


def envelope_gradients(dictionary, batches, reconstructions):
    """
    Gradients of the mean batch loss, holding every transport plan at its termination value.

    Args:
        dictionary (Dictionary): atoms and weights the reconstructions were computed from
        batches (list): the `DomainBatch`es passed to `batch_loss`
        reconstructions (list): the `Reconstruction`s returned by `batch_loss`

    Returns:
        (Gradients): gradients for atom features (K, n, d), atom logits (K, n, n_c) and weights (N, K)
    """
    N = dictionary.n_domains
    if len(reconstructions) != N or len(batches) != N:
        raise DimensionMismatchError("one batch and one reconstruction per domain are required")
    g_features = np.zeros((dictionary.n_atoms, dictionary.atom_size, dictionary.d))
    g_logits = np.zeros((dictionary.n_atoms, dictionary.atom_size, dictionary.n_classes))
    g_weights = np.zeros_like(dictionary.weights)
    for ell, (batch, rec) in enumerate(zip(batches, reconstructions)):
        if rec.outer_plan is None or len(rec.plans) != dictionary.n_atoms:
            raise InvalidInputError(f"reconstruction {ell} is missing its transport plans")
        atoms = [atom.to_cloud(idx) for atom, idx in zip(dictionary.atoms, batch.atom_indices)]
        G_X, G_Y = _outer_gradients(batch, rec, rec.beta)
        gf, gl, ga = _atom_gradients(atoms, dictionary.weights[ell], rec, G_X, G_Y)
        g_weights[ell] = ga / N
        for k, idx in enumerate(batch.atom_indices):
            np.add.at(g_features[k], idx, gf[k] / N)
            if gl[k] is not None:
                np.add.at(g_logits[k], idx, _softmax_backward(atoms[k].labels, gl[k]) / N)
    return Gradients(g_features, g_logits, g_weights)


def frozen_plan_loss(dictionary, batches, reconstructions):
    """
    Mean batch loss with every plan frozen at the given reconstructions.

    The barycenters are rebuilt as the linear map of the atoms through the frozen plans, so this
    is the surrogate whose exact gradient `envelope_gradients` returns.
    """
    total = 0.0
    for ell, (batch, rec) in enumerate(zip(batches, reconstructions)):
        n_b = rec.barycenter.n
        atoms = [atom.to_cloud(idx) for atom, idx in zip(dictionary.atoms, batch.atom_indices)]
        terms = list(zip(dictionary.weights[ell], atoms, rec.plans))
        X_B = sum(a * n_b * (plan.T @ atom.support) for a, atom, plan in terms)
        C = feature_cost(batch.data, PointCloud(X_B))
        if batch.labeled and rec.beta > 0:
            Y_B = sum(a * n_b * (plan.T @ atom.labels) for a, atom, plan in terms)
            C = C + rec.beta * ((batch.data.labels[:, None, :] - Y_B[None, :, :]) ** 2).sum(axis=2)
        total += float(np.sum(C * rec.outer_plan))
    return total / len(batches)


def _check_domains(sources, target):
    if len(sources) == 0:
        raise InvalidInputError("at least one labeled source domain is required")
    if not all(isinstance(s, LabeledPointCloud) for s in sources):
        raise InvalidInputError("source domains must be labeled")
    n_c = sources[0].n_classes
    for s in sources:
        if s.n_classes != n_c:
            raise DimensionMismatchError(f"sources have differing numbers of classes: {s.n_classes} != {n_c}")
        if s.d != target.d:
            raise DimensionMismatchError(f"source dimension {s.d} != target dimension {target.d}")
    return n_c


def _default_batches(cfg, domains):
    if cfg.n_batches is not None:
        return cfg.n_batches
    return max(1, min(d.n for d in domains) // cfg.batch_size)


def _warn_stalled(stalled, total, bary_cfg):
    if stalled:
        logger.warning(
            f"{stalled} of {total} batch barycenters stopped at max_iter={bary_cfg.max_iter} before reaching "
            f"tol={bary_cfg.tol:g}"
        )


def fit(sources, target, cfg, names=None):
    """
    Learns a dictionary reconstructing every source and the target as Wasserstein barycenters.

    Args:
        sources (list): labeled source domains (`LabeledPointCloud`)
        target (PointCloud): unlabeled target domain
        cfg (DadilConfig): hyper-parameters
        names (tuple): optional domain names, sources first

    Returns:
        (Dictionary, TrainTrace): the learned dictionary and its training trace
    """
    if isinstance(target, LabeledPointCloud):
        target = target.cloud
    n_c = _check_domains(sources, target)
    cfg.check_classes(n_c)
    domains = list(sources) + [target]
    rng = np.random.default_rng(cfg.seed)
    dictionary = init_dictionary(cfg, DatasetsMeta.from_domains(sources, target, names))
    n_batches = _default_batches(cfg, domains)
    trace = TrainTrace()
    stalled = 0
    logger.info(f"Fitting {dictionary!r} with {n_batches} batches of {cfg.batch_size} for {cfg.n_iter} iterations")

    for it in range(cfg.n_iter):
        prev = dictionary.copy()
        losses = []
        for _ in range(n_batches):
            batches = sample_batches(dictionary, domains, cfg.batch_size, rng)
            if dictionary.beta is None:
                dictionary.beta = resolve_beta(cfg, batches[0].data)
                logger.info(f"Label cost weight beta={dictionary.beta:.4g}")
            loss, recs = batch_loss(dictionary, batches, cfg)
            stalled += sum(not rec.converged for rec in recs)
            grads = envelope_gradients(dictionary, batches, recs)
            if not np.isfinite(loss) or not grads.is_finite():
                offending = [b.indices.tolist() for b in batches]
                logger.error(f"Non-finite loss or gradient at iteration {it + 1}; batch indices: {offending}")
                raise NonFiniteError(f"non-finite loss ({loss}) at iteration {it + 1}", offending)
            for k, atom in enumerate(dictionary.atoms):
                atom.features -= cfg.lr * grads.features[k]
                atom.logits -= cfg.lr * grads.logits[k]
            dictionary.weights = project_rows(dictionary.weights - cfg.weights_lr * grads.weights)
            losses.append(loss)
            logger.debug(f"iteration {it + 1}: batch loss {loss:.6g}")
        dx, dy, da = update_magnitudes(prev, dictionary)
        trace.loss.append(losses)
        trace.delta_x.append(dx)
        trace.delta_y.append(dy)
        trace.delta_a.append(da)
        trace.weights.append(dictionary.weights.copy())
        logger.info(
            f"Iteration {it + 1}/{cfg.n_iter}: loss={np.mean(losses):.5g} dX={dx:.3g} dY={dy:.3g} dA={da:.3g}"
        )
    _warn_stalled(stalled, cfg.n_iter * n_batches * len(domains), cfg.barycenter)
    return dictionary, trace


def wbr_fit(sources, target, cfg):
    """
    Regresses barycentric coordinates of the target over the fixed source domains.

    Every source is used whole as an atom and only the target is mini-batched.

    Args:
        sources (list): labeled source domains, never modified
        target (PointCloud): unlabeled target domain
        cfg (DadilConfig): batch size, `wbr_n_iter`, batches, weight learning rate and seed

    Returns:
        (np.ndarray): barycentric coordinates on the simplex, one per source
    """
    if isinstance(target, LabeledPointCloud):
        target = target.cloud
    n_c = _check_domains(sources, target)
    cfg.check_classes(n_c)
    rng = np.random.default_rng(cfg.seed)
    n_b = cfg.batch_size
    n_batches = _default_batches(cfg, [target])
    bary_cfg = _batch_bary_cfg(cfg, n_b)
    atoms = list(sources)
    beta = resolve_beta(cfg, atoms[0])
    alpha = np.full(len(atoms), 1.0 / len(atoms))
    stalled = 0
    logger.info(f"Regressing the target on {len(atoms)} sources with {n_batches} batches of {n_b}")
    for it in range(cfg.wbr_n_iter):
        losses = []
        for _ in range(n_batches):
            data = sample_unlabeled_batch(target, n_b, rng)
            batch = DomainBatch(data, np.arange(n_b), seed=int(rng.integers(2**31)))
            rec = _reconstruct(atoms, alpha, batch, bary_cfg, beta)
            stalled += not rec.converged
            G_X, G_Y = _outer_gradients(batch, rec, beta)
            _, _, g_alpha = _atom_gradients(atoms, alpha, rec, G_X, G_Y)
            if not np.isfinite(rec.loss) or not np.all(np.isfinite(g_alpha)):
                raise NonFiniteError(f"non-finite regression loss at iteration {it + 1}")
            alpha = project_simplex(alpha - cfg.weights_lr * g_alpha)
            losses.append(rec.loss)
        logger.info(
            f"WBR iteration {it + 1}/{cfg.wbr_n_iter}: loss={np.mean(losses):.5g} alpha={np.round(alpha, 3)}"
        )
    _warn_stalled(stalled, cfg.wbr_n_iter * n_batches, bary_cfg)
    return alpha

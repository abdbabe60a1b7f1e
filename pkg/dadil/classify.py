# -*- coding: utf-8 -*-

"""Softmax classifiers, the two adaptation strategies built on a dictionary, and its bound diagnostics."""

from __future__ import annotations

import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax

from .barycenter import BarycenterConfig
from .exceptions import DimensionMismatchError
from .exceptions import InvalidInputError
from .ot_core import LabeledPointCloud
from .ot_core import is_on_simplex
from .ot_core import softmax
from .ot_core import support_of
from .ot_core import wasserstein

logger = logging.getLogger(__name__)

SOLVERS = ("lbfgs", "sgd")
FORMAT_VERSION = 1


@dataclass
class ClassifierConfig:
    """Training parameters; `epochs` doubles as the L-BFGS-B iteration cap."""

    epochs: int = 200
    lr: float = 0.1
    batch_size: int = 64
    seed: int = 0
    solver: str = "lbfgs"
    l2: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidInputError("epochs and batch_size must be positive")
        if not self.lr > 0:
            raise InvalidInputError(f"lr must be positive, got {self.lr}")
        if self.solver not in SOLVERS:
            raise InvalidInputError(f"unknown solver {self.solver!r}; expected one of {', '.join(SOLVERS)}")
        if not self.l2 >= 0:
            raise InvalidInputError(f"l2 must be non-negative, got {self.l2}")


def _augment(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass
class SoftmaxClassifier:
    """Affine map followed by a softmax; the last row of `weights` is the bias."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise InvalidInputError(f"weights must be a (d + 1) x n_c matrix, got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInputError("classifier weights must be finite")

    @classmethod
    def zeros(cls, d, n_classes):
        return cls(np.zeros((d + 1, n_classes)))

    @property
    def d(self):
        return self.weights.shape[0] - 1

    @property
    def n_classes(self):
        return self.weights.shape[1]

    def predict_proba(self, X):
        X = support_of(X)
        if X.shape[1] != self.d:
            raise DimensionMismatchError(f"classifier expects {self.d} features, got {X.shape[1]}")
        return softmax(_augment(X) @ self.weights)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, "kind": "softmax", "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data):
        if data.get("format_version") != FORMAT_VERSION or data.get("kind") != "softmax":
            raise InvalidInputError("not a serialized softmax classifier")
        return cls(np.array(data["weights"], dtype=np.float64))


@dataclass
class EnsembleClassifier:
    """Convex combination of member probability outputs."""

    members: typing.List[SoftmaxClassifier]
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        if len(self.members) == 0:
            raise InvalidInputError("an ensemble needs at least one member")
        if self.alpha.size != len(self.members):
            raise DimensionMismatchError(f"{self.alpha.size} weights for {len(self.members)} members")
        if not is_on_simplex(self.alpha, atol=1e-8):
            raise InvalidInputError(f"ensemble weights must lie on the simplex, got {self.alpha}")

    def reweight(self, alpha):
        return EnsembleClassifier(self.members, alpha)

    def predict_proba(self, X):
        X = support_of(X)
        out = np.zeros((X.shape[0], self.members[0].n_classes))
        for a_k, member in zip(self.alpha, self.members):
            out += a_k * member.predict_proba(X)
        return out

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "ensemble",
            "alpha": self.alpha.tolist(),
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format_version") != FORMAT_VERSION or data.get("kind") != "ensemble":
            raise InvalidInputError("not a serialized ensemble classifier")
        return cls([SoftmaxClassifier.from_dict(m) for m in data["members"]], np.array(data["alpha"]))


def cross_entropy(clf, data):
    """Mean cross-entropy of `clf` against the (possibly soft) labels of `data`."""
    logp = log_softmax(_augment(data.support) @ clf.weights, axis=1)
    return float(-np.sum(data.labels * logp) / data.n)


def _objective(w, Xa, Y, l2):
    n, n_c = Y.shape
    W = w.reshape(Xa.shape[1], n_c)
    logp = log_softmax(Xa @ W, axis=1)
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W[:-1] ** 2)
    grad = Xa.T @ (np.exp(logp) - Y) / n
    grad[:-1] += l2 * W[:-1]
    return loss, grad.ravel()


def _train_lbfgs(Xa, Y, cfg):
    w0 = np.zeros(Xa.shape[1] * Y.shape[1])
    result = minimize(
        _objective, w0, args=(Xa, Y, cfg.l2), jac=True, method="L-BFGS-B", options={"maxiter": cfg.epochs}
    )
    if not result["success"]:
        logger.warning(f"Classifier optimization stopped early: {result['message']}")
    return result["x"].reshape(Xa.shape[1], Y.shape[1])


def _train_sgd(Xa, Y, cfg):
    rng = np.random.default_rng(cfg.seed)
    n = Xa.shape[0]
    w = np.zeros(Xa.shape[1] * Y.shape[1])
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grad = _objective(w, Xa[idx], Y[idx], cfg.l2)
            w -= cfg.lr * grad
    return w.reshape(Xa.shape[1], Y.shape[1])


def train_classifier(data, cfg=None):
    """
    Fits a softmax classifier by minimizing cross-entropy against soft labels.

    Args:
        data (LabeledPointCloud): training set; label rows may be soft
        cfg (ClassifierConfig): training parameters

    Returns:
        (SoftmaxClassifier): the fitted classifier
    """
    if cfg is None:
        cfg = ClassifierConfig()
    if not isinstance(data, LabeledPointCloud):
        raise InvalidInputError("classifiers are trained on labeled point clouds")
    if data.n < data.n_classes:
        raise InvalidInputError(f"need at least {data.n_classes} points to train, got {data.n}")
    Xa = _augment(data.support)
    if cfg.solver == "lbfgs":
        W = _train_lbfgs(Xa, data.labels, cfg)
    else:
        W = _train_sgd(Xa, data.labels, cfg)
    clf = SoftmaxClassifier(W)
    logger.debug(f"Trained classifier on {data.n} points: cross-entropy {cross_entropy(clf, data):.4g}")
    return clf


def accuracy(pred, truth):
    """Percentage of matching class indices."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"{pred.size} predictions for {truth.size} labels")
    if pred.size == 0:
        raise InvalidInputError("cannot score an empty prediction set")
    return 100.0 * float(np.mean(pred == truth))


def dadil_r(dictionary, bary_cfg=None, clf_cfg=None, alpha=None):
    """
    Trains a classifier on the labeled barycentric reconstruction of the target.

    Args:
        dictionary (Dictionary): learned dictionary
        bary_cfg (BarycenterConfig): reconstruction parameters; the support defaults to the atom size
        clf_cfg (ClassifierConfig): classifier parameters
        alpha (np.ndarray): coordinates to reconstruct at, the target row by default

    Returns:
        (SoftmaxClassifier): classifier fitted on the reconstruction
    """
    reconstruction = dictionary.reconstruct(-1, bary_cfg, alpha)
    return train_classifier(reconstruction.barycenter, clf_cfg)


def atom_classifiers(dictionary, clf_cfg=None, workers=1):
    """One classifier per atom, trained on its features and softmax labels."""
    clouds = dictionary.atom_clouds()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(lambda c: train_classifier(c, clf_cfg), clouds))
    return [train_classifier(c, clf_cfg) for c in clouds]


def dadil_e(dictionary, clf_cfg=None, workers=1):
    """Ensembles the atom classifiers with the target's barycentric coordinates."""
    return EnsembleClassifier(atom_classifiers(dictionary, clf_cfg, workers), dictionary.alpha_target)


def bound_terms(dictionary, target, bary_cfg=None, alpha=None):
    """
    Computable terms of the target risk bound at the target coordinates.

    Args:
        dictionary (Dictionary): learned dictionary
        target (PointCloud): target features
        bary_cfg (BarycenterConfig): reconstruction parameters
        alpha (np.ndarray): coordinates overriding the target row

    Returns:
        (float, float): feature-space W2 between reconstruction and target, and
        sum_k alpha_k W2(atom_k, reconstruction)
    """
    if bary_cfg is None:
        bary_cfg = BarycenterConfig()
    if alpha is None:
        alpha = dictionary.alpha_target
    reconstruction = dictionary.reconstruct(-1, bary_cfg, alpha).barycenter.cloud
    recon_w2, _ = wasserstein(reconstruction, support_of(target))
    gamma = 0.0
    for a_k, atom in zip(alpha, dictionary.atom_clouds()):
        gamma += a_k * wasserstein(atom.cloud, reconstruction)[0]
    return recon_w2, max(gamma, 0.0)

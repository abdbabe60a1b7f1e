# -*- coding: utf-8 -*-

"""Dictionary of labeled atoms and barycentric coordinates, plus its diagnostics and archive format."""

from __future__ import annotations

import copy
import logging
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .barycenter import BarycenterConfig
from .barycenter import labeled_barycenter
from .exceptions import DimensionMismatchError
from .exceptions import InvalidInputError
from .ot_core import LabeledPointCloud
from .ot_core import PointCloud
from .ot_core import project_rows
from .ot_core import softmax
from .ot_core import support_of

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPARSITY_EPS = 1e-4
DENSITY_NEIGHBORS = 5


@dataclass
class DadilConfig:
    """Hyper-parameters of the dictionary learning loop."""

    n_iter: int = 40
    wbr_n_iter: int = 10
    n_batches: typing.Optional[int] = None
    batch_size: int = 80
    atoms_k: int = 3
    atom_size: int = 200
    lr: float = 20.0
    lr_weights: typing.Optional[float] = 1.0
    beta: typing.Optional[float] = None
    beta_scale: float = 1.0
    barycenter: BarycenterConfig = field(default_factory=lambda: BarycenterConfig(max_iter=10))
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("n_iter", "wbr_n_iter", "batch_size", "atoms_k", "atom_size", "workers"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.n_batches is not None and self.n_batches < 1:
            raise InvalidInputError(f"n_batches must be at least 1, got {self.n_batches}")
        if not self.lr > 0:
            raise InvalidInputError(f"lr must be positive, got {self.lr}")
        if self.lr_weights is not None and not self.lr_weights > 0:
            raise InvalidInputError(f"lr_weights must be positive, got {self.lr_weights}")
        if self.beta is not None and (not np.isfinite(self.beta) or self.beta < 0):
            raise InvalidInputError(f"beta must be non-negative, got {self.beta}")
        if not self.beta_scale > 0:
            raise InvalidInputError(f"beta_scale must be positive, got {self.beta_scale}")

    @property
    def weights_lr(self):
        return self.lr if self.lr_weights is None else self.lr_weights

    def check_classes(self, n_classes):
        if self.batch_size < n_classes or self.batch_size % n_classes:
            raise InvalidInputError(
                f"batch_size ({self.batch_size}) must be a positive multiple of the number of classes ({n_classes})"
            )


class DatasetsMeta(typing.NamedTuple):
    """Shapes of the domains a dictionary is learned on (sources first, target last)."""

    n_domains: int
    d: int
    n_classes: int
    names: typing.Tuple[str, ...] = ()

    @classmethod
    def from_domains(cls, sources, target, names=None):
        if names is None:
            names = tuple(f"source_{i}" for i in range(len(sources))) + ("target",)
        return cls(len(sources) + 1, target.d, sources[0].n_classes, tuple(names))


@dataclass
class Atom:
    """A learnable labeled point cloud: features and per-point label logits."""

    features: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.features.shape[0] != self.logits.shape[0]:
            raise DimensionMismatchError(f"{self.features.shape[0]} points but {self.logits.shape[0]} logit rows")

    @property
    def labels(self):
        return softmax(self.logits)

    @property
    def n(self):
        return self.features.shape[0]

    def to_cloud(self, indices=None):
        if indices is None:
            return LabeledPointCloud(PointCloud(self.features), self.labels)
        return LabeledPointCloud(PointCloud(self.features[indices]), softmax(self.logits[indices]))


@dataclass
class Dictionary:
    """K atoms and an N x K matrix of barycentric coordinates (target row last)."""

    atoms: typing.List[Atom]
    weights: np.ndarray
    beta: typing.Optional[float] = None
    names: typing.Tuple[str, ...] = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] != len(self.atoms):
            raise DimensionMismatchError(f"weights of shape {self.weights.shape} for {len(self.atoms)} atoms")
        shapes = {(a.features.shape, a.logits.shape) for a in self.atoms}
        if len(shapes) > 1:
            raise DimensionMismatchError("all atoms must share the same number of points, features and classes")

    def __repr__(self):
        return (
            f"Dictionary(K={self.n_atoms}, N={self.n_domains}, n={self.atom_size}, "
            f"d={self.d}, n_classes={self.n_classes}, beta={self.beta})"
        )

    @property
    def n_atoms(self):
        return len(self.atoms)

    @property
    def n_domains(self):
        return self.weights.shape[0]

    @property
    def atom_size(self):
        return self.atoms[0].n

    @property
    def d(self):
        return self.atoms[0].features.shape[1]

    @property
    def n_classes(self):
        return self.atoms[0].logits.shape[1]

    @property
    def alpha_target(self):
        return self.weights[-1]

    def atom_clouds(self):
        return [atom.to_cloud() for atom in self.atoms]

    def copy(self):
        return copy.deepcopy(self)

    def reconstruct(self, ell=-1, bary_cfg=None, alpha=None, warn=True):
        """
        Full-size labeled barycenter of the atoms at the coordinates of domain `ell`.

        Args:
            ell (int): dictionary row, the target by default
            bary_cfg (BarycenterConfig): barycenter parameters; `n_support` defaults to the atom size
            alpha (np.ndarray): coordinates overriding row `ell`
            warn (bool): log a warning when the barycenter stops at `max_iter`

        Returns:
            (BarycenterResult): the reconstruction
        """
        if bary_cfg is None:
            bary_cfg = BarycenterConfig()
        if alpha is None:
            alpha = self.weights[ell]
        beta = bary_cfg.beta if self.beta is None else self.beta
        return labeled_barycenter(self.atom_clouds(), alpha, bary_cfg, beta=beta, warn=warn)

    def save(self, path):
        """Writes the dictionary to a self-describing `.npz` archive."""
        np.savez(
            path,
            format_version=np.array(FORMAT_VERSION),
            features=np.stack([a.features for a in self.atoms]),
            logits=np.stack([a.logits for a in self.atoms]),
            weights=self.weights,
            beta=np.array(np.nan if self.beta is None else self.beta),
            names=np.array(self.names, dtype=str),
        )

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as archive:
            version = int(archive["format_version"])
            if version != FORMAT_VERSION:
                raise InvalidInputError(f"unsupported dictionary format version {version}")
            features = archive["features"]
            logits = archive["logits"]
            beta = float(archive["beta"])
            return cls(
                [Atom(f, p) for f, p in zip(features, logits)],
                archive["weights"],
                None if np.isnan(beta) else beta,
                tuple(str(x) for x in archive["names"]),
            )


@dataclass
class TrainTrace:
    """Per-batch losses and per-epoch update magnitudes recorded by `fit`."""

    loss: typing.List[typing.List[float]] = field(default_factory=list)
    delta_x: typing.List[float] = field(default_factory=list)
    delta_y: typing.List[float] = field(default_factory=list)
    delta_a: typing.List[float] = field(default_factory=list)
    weights: typing.List[np.ndarray] = field(default_factory=list)

    @property
    def epoch_loss(self):
        return [float(np.mean(x)) for x in self.loss]

    def rows(self):
        """Yields (epoch, mean loss, delta_x, delta_y, delta_a) per epoch."""
        for it, (loss, dx, dy, da) in enumerate(zip(self.epoch_loss, self.delta_x, self.delta_y, self.delta_a)):
            yield it + 1, loss, dx, dy, da


def init_dictionary(cfg, datasets_meta):
    """
    Draws a fresh dictionary: standard normal atom features and logits, projected Gaussian weights.

    Args:
        cfg (DadilConfig): learning hyper-parameters
        datasets_meta (DatasetsMeta): number of domains, feature dimension and number of classes

    Returns:
        (Dictionary): the initial dictionary
    """
    rng = np.random.default_rng(cfg.seed)
    K, n = cfg.atoms_k, cfg.atom_size
    features = rng.standard_normal((K, n, datasets_meta.d))
    logits = rng.standard_normal((K, n, datasets_meta.n_classes))
    weights = project_rows(rng.standard_normal((datasets_meta.n_domains, K)))
    atoms = [Atom(f, p) for f, p in zip(features, logits)]
    return Dictionary(atoms, weights, cfg.beta, tuple(datasets_meta.names))


def update_magnitudes(prev, current):
    """
    Squared Frobenius size of the change between two dictionaries.

    Returns:
        (float, float, float): mean feature change over atoms, mean label change (after softmax)
        over atoms, and weight matrix change
    """
    if prev.n_atoms != current.n_atoms or prev.weights.shape != current.weights.shape:
        raise DimensionMismatchError("dictionaries have different shapes")
    K = prev.n_atoms
    delta_x = 0.0
    delta_y = 0.0
    for a, b in zip(prev.atoms, current.atoms):
        if a.features.shape != b.features.shape or a.logits.shape != b.logits.shape:
            raise DimensionMismatchError("atoms have different shapes")
        delta_x += np.sum((a.features - b.features) ** 2)
        delta_y += np.sum((a.labels - b.labels) ** 2)
    delta_a = np.sum((prev.weights - current.weights) ** 2)
    return float(delta_x / K), float(delta_y / K), float(delta_a)


def sparsity_score(alpha, eps=SPARSITY_EPS):
    """Percentage of entries of `alpha` that are numerically zero (|a| <= eps)."""
    if eps < 0:
        raise InvalidInputError(f"eps must be non-negative, got {eps}")
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    nonzero = np.count_nonzero(np.abs(alpha) > eps)
    return 100.0 * (1.0 - nonzero / alpha.size)


def density_score(atoms, k=DENSITY_NEIGHBORS):
    """
    Mean squared distance from each atom point to its `k` nearest neighbors within the same atom.

    Args:
        atoms (list): point clouds, `Atom`s or support arrays, each with more than `k` points

    Returns:
        (float): the density score
    """
    total = 0.0
    count = 0
    for atom in atoms:
        X = atom.features if isinstance(atom, Atom) else support_of(atom)
        if X.shape[0] <= k:
            raise InvalidInputError(f"density score needs more than {k} points per atom, got {X.shape[0]}")
        # The query point itself comes back at distance zero
        dist, _ = cKDTree(X).query(X, k=k + 1)
        total += np.sum(dist**2)
        count += k * X.shape[0]
    return float(total / count)

# -*- coding: utf-8 -*-

"""Free-support Wasserstein barycenters of labeled and unlabeled point clouds."""

from __future__ import annotations

import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError
from .exceptions import InvalidInputError
from .ot_core import LabeledPointCloud
from .ot_core import PointCloud
from .ot_core import feature_cost
from .ot_core import is_on_simplex
from .ot_core import labeled_cost
from .ot_core import solve_ot
from .ot_core import transport_cost

logger = logging.getLogger(__name__)


@dataclass
class BarycenterConfig:
    """Parameters of the fixed-point barycenter iterations."""

    n_support: typing.Optional[int] = None
    tol: float = 1e-6
    max_iter: int = 100
    beta: float = 1.0
    seed: int = 0
    relaxation: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.n_support is not None and self.n_support < 1:
            raise InvalidInputError(f"n_support must be at least 1, got {self.n_support}")
        if not self.tol > 0:
            raise InvalidInputError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be at least 1, got {self.max_iter}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidInputError(f"beta must be non-negative, got {self.beta}")
        if not 0 <= self.relaxation < 1:
            raise InvalidInputError(f"relaxation must lie in [0, 1), got {self.relaxation}")
        if self.workers < 1:
            raise InvalidInputError(f"workers must be at least 1, got {self.workers}")


@dataclass
class BarycenterResult:
    """
    Output of a barycenter computation.

    `plans[k]` couples atom `k` (rows) to the barycenter support (columns) at the last iteration,
    and `barycenter` is the support obtained by projecting through those plans.
    """

    barycenter: typing.Union[LabeledPointCloud, PointCloud]
    plans: typing.List[np.ndarray]
    objective_trace: typing.List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True

    @property
    def objective(self):
        return self.objective_trace[-1]


def init_barycenter(n_support, d, n_c, seed):
    """
    Draws an initial labeled barycenter support.

    Args:
        n_support (int): number of support points
        d (int): feature dimension
        n_c (int): number of classes
        seed (int): random seed

    Returns:
        (LabeledPointCloud): standard normal features with uniformly random one-hot labels
    """
    if n_support < 1:
        raise InvalidInputError(f"n_support must be at least 1, got {n_support}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_support, d))
    classes = rng.integers(n_c, size=n_support)
    return LabeledPointCloud(PointCloud(X), np.eye(n_c)[classes])


def _check_atoms(atoms, alpha):
    if len(atoms) == 0:
        raise InvalidInputError("at least one atom is required")
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.size != len(atoms):
        raise DimensionMismatchError(f"{alpha.size} weights for {len(atoms)} atoms")
    if not is_on_simplex(alpha, atol=1e-8):
        raise InvalidInputError(f"barycentric weights must lie on the simplex, got {alpha}")
    d = atoms[0].d
    for atom in atoms:
        if atom.d != d:
            raise DimensionMismatchError(f"atoms have differing feature dimensions: {atom.d} != {d}")
    return alpha


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, items))
    return [fn(x) for x in items]


def _iterate(atoms, alpha, cfg, XB, YB, beta):
    """Runs the fixed-point sweep from (XB, YB); YB is None for unlabeled atoms."""
    n_b = XB.shape[0]
    theta = cfg.relaxation
    trace = []
    plans = []
    it = 0
    converged = False
    while it < cfg.max_iter:
        if YB is None:
            current = PointCloud(XB)

            def solve(atom):
                C = feature_cost(atom, current)
                plan = solve_ot(C)
                return plan, transport_cost(C, plan)

        else:
            current = LabeledPointCloud(PointCloud(XB), YB)

            def solve(atom):
                C = labeled_cost(atom, current, beta)
                plan = solve_ot(C)
                return plan, transport_cost(C, plan)

        solved = _map(solve, atoms, cfg.workers)
        plans = [plan for plan, _ in solved]
        # Fixed order reduction, so sequential and threaded runs agree bitwise
        J = 0.0
        new_X = np.zeros_like(XB)
        new_Y = None if YB is None else np.zeros_like(YB)
        for a_k, atom, (plan, cost) in zip(alpha, atoms, solved):
            J += a_k * cost
            new_X += a_k * n_b * (plan.T @ atom.support)
            if new_Y is not None:
                new_Y += a_k * n_b * (plan.T @ atom.labels)
        trace.append(float(J))
        it += 1
        logger.debug(f"barycenter iteration {it}: J={J:.6g}")

        if theta > 0:
            XB = theta * XB + (1 - theta) * new_X
            if YB is not None:
                YB = theta * YB + (1 - theta) * new_Y
        else:
            XB = new_X
            YB = new_Y
        if YB is not None:
            # Mixtures of probability rows; renormalize away rounding drift only
            YB = np.clip(YB, 0.0, None)
            YB = YB / YB.sum(axis=1, keepdims=True)

        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.tol:
            converged = True
            break
    return XB, YB, plans, trace, it, converged


def _last_change(trace):
    if len(trace) < 2:
        return float("nan")
    return abs(trace[-1] - trace[-2])


def _report(result, cfg, warn):
    if warn and not result.converged:
        logger.warning(
            f"barycenter stopped at max_iter={cfg.max_iter} before reaching tol={cfg.tol:g} "
            f"(last change {_last_change(result.objective_trace):.3g})"
        )
    return result


def labeled_barycenter(atoms, alpha, cfg, seed=None, beta=None, warn=True):
    """
    Free-support barycenter of labeled atoms under the label-augmented ground cost.

    Args:
        atoms (list): `LabeledPointCloud` atoms sharing `d` and `n_c`
        alpha (np.ndarray): barycentric weights on the simplex, one per atom
        cfg (BarycenterConfig): iteration parameters
        seed (int): overrides `cfg.seed` for the support initialization
        beta (float): overrides `cfg.beta`
        warn (bool): log a warning when `max_iter` is reached before `tol`

    Returns:
        (BarycenterResult): labeled barycenter, termination plans and objective trace
    """
    alpha = _check_atoms(atoms, alpha)
    n_c = atoms[0].n_classes
    for atom in atoms:
        if atom.n_classes != n_c:
            raise DimensionMismatchError(f"atoms have differing numbers of classes: {atom.n_classes} != {n_c}")
    n_support = cfg.n_support or max(atom.n for atom in atoms)
    init = init_barycenter(n_support, atoms[0].d, n_c, cfg.seed if seed is None else seed)
    beta = cfg.beta if beta is None else beta
    XB, YB, plans, trace, it, converged = _iterate(atoms, alpha, cfg, init.support, init.labels, beta)
    return _report(BarycenterResult(LabeledPointCloud(PointCloud(XB), YB), plans, trace, it, converged), cfg, warn)


def unlabeled_barycenter(atoms, alpha, cfg, seed=None, warn=True):
    """
    Free-support barycenter of unlabeled atoms under the squared Euclidean cost.

    Args:
        atoms (list): `PointCloud` atoms sharing `d`
        alpha (np.ndarray): barycentric weights on the simplex, one per atom
        cfg (BarycenterConfig): iteration parameters
        seed (int): overrides `cfg.seed` for the support initialization

    Returns:
        (BarycenterResult): barycenter cloud, termination plans and objective trace
    """
    atoms = [atom.cloud if isinstance(atom, LabeledPointCloud) else atom for atom in atoms]
    alpha = _check_atoms(atoms, alpha)
    n_support = cfg.n_support or max(atom.n for atom in atoms)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    XB0 = rng.standard_normal((n_support, atoms[0].d))
    XB, _, plans, trace, it, converged = _iterate(atoms, alpha, cfg, XB0, None, 0.0)
    return _report(BarycenterResult(PointCloud(XB), plans, trace, it, converged), cfg, warn)


def barycenter_objective(atoms, alpha, barycenter, beta=None):
    """Recomputes sum_k alpha_k W(atom_k, barycenter) for a given barycenter support."""
    total = 0.0
    for a_k, atom in zip(alpha, atoms):
        if beta is None:
            C = feature_cost(atom, barycenter)
        else:
            C = labeled_cost(atom, barycenter, beta)
        total += a_k * transport_cost(C, solve_ot(C))
    return total

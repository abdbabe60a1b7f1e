# -*- coding: utf-8 -*-

"""Exact discrete optimal transport between uniform point clouds, and simplex geometry."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import ot
from scipy.spatial.distance import cdist
from scipy.special import softmax as _softmax

from .exceptions import DimensionMismatchError
from .exceptions import InfeasiblePlanError
from .exceptions import InvalidInputError

logger = logging.getLogger(__name__)

# Marginal residual allowed on a solved plan
FEASIBILITY_TOL = 1e-9
EMD_MAX_ITER = 1_000_000


def _as_finite_matrix(value, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise InvalidInputError(f"{name} must have at least one row")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An empirical distribution: `n` support points in `d` dimensions, each with mass 1/n."""

    support: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", _as_finite_matrix(self.support, "support"))

    def __len__(self):
        return self.support.shape[0]

    def __repr__(self):
        return f"PointCloud(n={self.n}, d={self.d})"

    @property
    def n(self):
        return self.support.shape[0]

    @property
    def d(self):
        return self.support.shape[1]


@dataclass(frozen=True, eq=False)
class LabeledPointCloud:
    """A point cloud with one row of class probabilities per support point."""

    cloud: PointCloud
    labels: np.ndarray

    def __post_init__(self):
        if not isinstance(self.cloud, PointCloud):
            object.__setattr__(self, "cloud", PointCloud(self.cloud))
        labels = _as_finite_matrix(self.labels, "labels")
        if labels.shape[0] != self.cloud.n:
            raise DimensionMismatchError(f"{labels.shape[0]} label rows for {self.cloud.n} support points")
        if labels.shape[1] < 2:
            raise InvalidInputError("labels must have at least two classes")
        if np.any(labels < 0) or not np.allclose(labels.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise InvalidInputError("every label row must be a probability vector")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.cloud.n

    def __repr__(self):
        return f"LabeledPointCloud(n={self.n}, d={self.d}, n_classes={self.n_classes})"

    @classmethod
    def from_arrays(cls, support, labels):
        return cls(PointCloud(support), labels)

    @classmethod
    def from_class_indices(cls, support, classes, n_classes=None):
        """Builds a labeled cloud with one-hot label rows from integer class indices."""
        classes = np.asarray(classes, dtype=np.int64).ravel()
        if n_classes is None:
            n_classes = max(int(classes.max()) + 1, 2)
        if np.any(classes < 0) or np.any(classes >= n_classes):
            raise InvalidInputError(f"class indices must lie in [0, {n_classes})")
        return cls(PointCloud(support), np.eye(n_classes)[classes])

    @property
    def support(self):
        return self.cloud.support

    @property
    def n(self):
        return self.cloud.n

    @property
    def d(self):
        return self.cloud.d

    @property
    def n_classes(self):
        return self.labels.shape[1]

    @property
    def classes(self):
        """Hard class assignments, lowest index winning ties."""
        return np.argmax(self.labels, axis=1)


def support_of(cloud):
    """Returns the support matrix of a `PointCloud`, `LabeledPointCloud` or raw array."""
    if isinstance(cloud, (PointCloud, LabeledPointCloud)):
        return cloud.support
    return _as_finite_matrix(cloud, "support")


def softmax(logits):
    """Row-wise softmax of a logits matrix."""
    return _softmax(np.asarray(logits, dtype=np.float64), axis=1)


def feature_cost(P, Q):
    """
    Squared Euclidean ground cost between the supports of two point clouds.

    Args:
        P (PointCloud): source cloud with `n_P` points
        Q (PointCloud): target cloud with `n_Q` points

    Returns:
        (np.ndarray): `n_P` x `n_Q` cost matrix
    """
    XP = support_of(P)
    XQ = support_of(Q)
    if XP.shape[1] != XQ.shape[1]:
        raise DimensionMismatchError(f"feature dimensions differ: {XP.shape[1]} != {XQ.shape[1]}")
    return cdist(XP, XQ, metric="sqeuclidean")


def labeled_cost(P, Q, beta):
    """
    Ground cost between labeled clouds: squared feature distance plus `beta` times squared label distance.

    Args:
        P (LabeledPointCloud): source cloud
        Q (LabeledPointCloud): target cloud
        beta (float): non-negative weight of the label discrepancy

    Returns:
        (np.ndarray): `n_P` x `n_Q` cost matrix
    """
    if not np.isfinite(beta) or beta < 0:
        raise InvalidInputError(f"beta must be a finite non-negative number, got {beta}")
    if P.n_classes != Q.n_classes:
        raise DimensionMismatchError(f"label dimensions differ: {P.n_classes} != {Q.n_classes}")
    C = feature_cost(P, Q)
    if beta > 0:
        C = C + beta * cdist(P.labels, Q.labels, metric="sqeuclidean")
    return C


def check_plan(plan, atol=FEASIBILITY_TOL):
    """Raises `InfeasiblePlanError` unless `plan` has uniform marginals within `atol`."""
    n_p, n_q = plan.shape
    row_res = np.max(np.abs(plan.sum(axis=1) - 1.0 / n_p))
    col_res = np.max(np.abs(plan.sum(axis=0) - 1.0 / n_q))
    if row_res > atol or col_res > atol or np.any(plan < -atol):
        raise InfeasiblePlanError(
            f"transport plan violates its marginals (row residual {row_res:.3g}, column residual {col_res:.3g})"
        )


def solve_ot(C):
    """
    Solves the exact Kantorovich problem with uniform marginals using a network simplex.

    Args:
        C (np.ndarray): `n_P` x `n_Q` finite cost matrix

    Returns:
        (np.ndarray): an optimal transport plan with row sums 1/n_P and column sums 1/n_Q
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.size == 0:
        raise InvalidInputError(f"cost matrix must be a non-empty 2-D array, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("cost matrix contains non-finite entries")
    n_p, n_q = C.shape
    a = np.full(n_p, 1.0 / n_p)
    b = np.full(n_q, 1.0 / n_q)
    plan, log = ot.emd(a, b, np.ascontiguousarray(C), numItermax=EMD_MAX_ITER, log=True)
    if log.get("warning"):
        logger.warning(f"network simplex: {log['warning']}")
    check_plan(plan)
    return plan


def transport_cost(C, plan):
    """Frobenius inner product between a cost matrix and a transport plan."""
    C = np.asarray(C, dtype=np.float64)
    plan = np.asarray(plan, dtype=np.float64)
    if C.shape != plan.shape:
        raise DimensionMismatchError(f"cost shape {C.shape} != plan shape {plan.shape}")
    return max(float(np.sum(C * plan)), 0.0)


def barycentric_projection(plan, Q):
    """
    Maps each source point onto the plan-weighted average of the points of `Q`.

    Args:
        plan (np.ndarray): `n_P` x `n_Q` transport plan
        Q (PointCloud): target cloud

    Returns:
        (PointCloud): `n_P` projected points
    """
    XQ = support_of(Q)
    if plan.shape[1] != XQ.shape[0]:
        raise DimensionMismatchError(f"plan has {plan.shape[1]} columns but Q has {XQ.shape[0]} points")
    return PointCloud(plan.shape[0] * (plan @ XQ))


def label_propagation(plan, Y_Q):
    """
    Propagates label rows of `Y_Q` back along `plan`, giving one soft label per source point.

    Args:
        plan (np.ndarray): `n_P` x `n_Q` transport plan
        Y_Q (np.ndarray): `n_Q` x `n_c` label matrix with rows on the simplex

    Returns:
        (np.ndarray): `n_P` x `n_c` soft labels
    """
    Y_Q = np.asarray(Y_Q, dtype=np.float64)
    if plan.shape[1] != Y_Q.shape[0]:
        raise DimensionMismatchError(f"plan has {plan.shape[1]} columns but {Y_Q.shape[0]} label rows")
    return plan.shape[0] * (plan @ Y_Q)


def project_simplex(v):
    """
    Euclidean projection of a vector onto the probability simplex, using the sorting algorithm.

    Args:
        v (np.ndarray): finite vector of length K >= 1

    Returns:
        (np.ndarray): the closest point of the K-simplex
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("cannot project an empty vector onto the simplex")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("cannot project a non-finite vector onto the simplex")
    return ot.utils.proj_simplex(v)


def project_rows(A):
    """Projects every row of a matrix onto the simplex."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise InvalidInputError(f"expected a non-empty matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("cannot project non-finite rows onto the simplex")
    return ot.utils.proj_simplex(A.T).T


def is_on_simplex(v, atol=1e-9):
    v = np.asarray(v, dtype=np.float64)
    return bool(np.all(v >= -atol) and np.allclose(v.sum(axis=-1), 1.0, rtol=0, atol=atol))


def wasserstein(P, Q, beta=None):
    """
    Optimal transport cost between two clouds, with the labeled ground cost when `beta` is given.

    Returns:
        (float, np.ndarray): transport cost and optimal plan
    """
    if beta is None:
        C = feature_cost(P, Q)
    else:
        C = labeled_cost(P, Q, beta)
    plan = solve_ot(C)
    return transport_cost(C, plan), plan

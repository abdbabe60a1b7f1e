# -*- coding: utf-8 -*-

"""Synthetic shifted domains, feature-file reading and writing, and target splits."""

from __future__ import annotations

import csv
import logging
import typing
from dataclasses import dataclass

import numpy as np
import sklearn.datasets
from sklearn.model_selection import train_test_split

from .exceptions import FeatureFileError
from .exceptions import InvalidInputError
from .ot_core import LabeledPointCloud
from .ot_core import PointCloud

logger = logging.getLogger(__name__)

GENERATORS = ("moons", "gaussian_blobs", "file")
BLOB_RADIUS = 2.0
# Moves the two-moons bounding box onto the origin
MOONS_CENTER = np.array([0.5, 0.25])


@dataclass
class DatasetSpec:
    """
    Describes the domains of a multi-source adaptation problem.

    The last domain is the target. For synthetic generators every domain is the same base sample
    rotated by `angles[i]` degrees about the origin and then moved by `translations[i]`.
    """

    generator: str = "moons"
    angles: typing.Tuple[float, ...] = (0.0, 10.0, 20.0, 30.0)
    translations: typing.Optional[typing.Tuple[typing.Tuple[float, ...], ...]] = None
    noise: float = 0.1
    n_samples: int = 600
    n_classes: int = 2
    seed: int = 0
    paths: typing.Tuple[str, ...] = ()
    names: typing.Optional[typing.Tuple[str, ...]] = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidInputError(f"unknown generator {self.generator!r}; expected one of {', '.join(GENERATORS)}")
        self.angles = tuple(float(a) for a in self.angles)
        self.paths = tuple(str(p) for p in self.paths)
        if not all(np.isfinite(self.angles)):
            raise InvalidInputError("rotation angles must be finite")
        if self.n_domains < 3:
            raise InvalidInputError(f"need at least two sources and a target, got {self.n_domains} domains")
        if self.translations is not None:
            self.translations = tuple(tuple(float(x) for x in t) for t in self.translations)
            if len(self.translations) != len(self.angles):
                raise InvalidInputError(f"{len(self.translations)} translations for {len(self.angles)} angles")
        if self.generator != "file":
            if self.n_samples < self.n_classes:
                raise InvalidInputError(f"n_samples ({self.n_samples}) is smaller than n_classes ({self.n_classes})")
            if not self.noise >= 0:
                raise InvalidInputError(f"noise must be non-negative, got {self.noise}")
        if self.generator == "moons" and self.n_classes != 2:
            raise InvalidInputError("the moons generator has exactly two classes")
        if self.n_classes < 2:
            raise InvalidInputError(f"n_classes must be at least 2, got {self.n_classes}")
        if self.names is not None:
            self.names = tuple(self.names)
            if len(self.names) != self.n_domains:
                raise InvalidInputError(f"{len(self.names)} names for {self.n_domains} domains")

    @property
    def n_domains(self):
        return len(self.paths) if self.generator == "file" else len(self.angles)

    def domain_names(self):
        if self.names is not None:
            return self.names
        return tuple(f"source_{i}" for i in range(self.n_domains - 1)) + ("target",)


def make_moons(n_samples, noise, seed):
    """Two interleaving half circles from scikit-learn, moved onto the origin."""
    X, classes = sklearn.datasets.make_moons(n_samples=n_samples, noise=noise, random_state=seed)
    return X - MOONS_CENTER, classes


def make_blobs(n_samples, n_classes, noise, seed):
    """Isotropic Gaussian blobs with centres spread evenly on a circle about the origin."""
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    centers = BLOB_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    return sklearn.datasets.make_blobs(n_samples=n_samples, centers=centers, cluster_std=noise, random_state=seed)


def shift_domain(X, angle, translation=None):
    """Rotates `X` by `angle` degrees about the origin, then adds `translation`."""
    theta = np.deg2rad(angle)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    out = X @ R.T
    if translation is not None:
        out = out + np.asarray(translation, dtype=np.float64)
    return out


def generate_domains(spec):
    """
    Builds every domain described by `spec`, sources first and the target last.

    Args:
        spec (DatasetSpec): dataset description

    Returns:
        (list): one `LabeledPointCloud` per domain
    """
    if spec.generator == "file":
        domains = [load_feature_csv(path, spec.n_classes) for path in spec.paths]
        for path, dom in zip(spec.paths, domains):
            if not isinstance(dom, LabeledPointCloud):
                raise FeatureFileError(f"{path}: labels are required to evaluate a domain")
        return domains

    if spec.generator == "moons":
        X, classes = make_moons(spec.n_samples, spec.noise, spec.seed)
    else:
        X, classes = make_blobs(spec.n_samples, spec.n_classes, spec.noise, spec.seed)
    translations = spec.translations or (None,) * len(spec.angles)
    domains = []
    for angle, translation in zip(spec.angles, translations):
        shifted = shift_domain(X, angle, translation)
        domains.append(LabeledPointCloud.from_class_indices(shifted, classes, spec.n_classes))
    logger.info(f"Generated {len(domains)} {spec.generator} domains of {spec.n_samples} points")
    return domains


def load_feature_csv(path, n_classes=None):
    """
    Reads a feature file with header `f0,...,f{d-1}` and an optional trailing `label` column.

    Args:
        path (str): file to read
        n_classes (int): width of the one-hot label rows; inferred from the labels when omitted

    Returns:
        (LabeledPointCloud or PointCloud): labeled when the file has a label column
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as rfile:
            rows = list(csv.reader(rfile))
    except OSError as e:
        raise FeatureFileError(f"{path}: {e.strerror}") from e

    if not rows or not rows[0]:
        raise FeatureFileError(f"{path}:1: missing header")
    header = [h.strip() for h in rows[0]]
    labeled = header[-1] == "label"
    features = header[:-1] if labeled else header
    if not features or features != [f"f{i}" for i in range(len(features))]:
        raise FeatureFileError(f"{path}:1: header must be f0,...,f{{d-1}} with an optional label column")

    values = []
    classes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FeatureFileError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            values.append([float(x) for x in row[: len(features)]])
            if labeled:
                classes.append(int(row[-1]))
        except ValueError as e:
            raise FeatureFileError(f"{path}:{lineno}: {e}") from e
        if not np.all(np.isfinite(values[-1])):
            raise FeatureFileError(f"{path}:{lineno}: non-finite feature value")
        if labeled and classes[-1] < 0:
            raise FeatureFileError(f"{path}:{lineno}: negative class label")
    if not values:
        raise FeatureFileError(f"{path}: no data rows")

    X = np.array(values, dtype=np.float64)
    if not labeled:
        return PointCloud(X)
    if n_classes is not None and max(classes) >= n_classes:
        raise FeatureFileError(f"{path}: class label {max(classes)} is out of range for {n_classes} classes")
    return LabeledPointCloud.from_class_indices(X, classes, n_classes)


def write_feature_csv(path, data):
    """Writes a cloud in the feature-file format; soft labels are written as their argmax class."""
    X = data.support
    labeled = isinstance(data, LabeledPointCloud)
    with open(path, "w", encoding="utf-8", newline="") as wfile:
        writer = csv.writer(wfile, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(X.shape[1])] + (["label"] if labeled else []))
        classes = data.classes if labeled else None
        for i, row in enumerate(X):
            cells = [f"{x:.17g}" for x in row]
            if labeled:
                cells.append(str(int(classes[i])))
            writer.writerow(cells)


def stratified_split(data, test_fraction=0.2, seed=0):
    """
    Seeded per-class split of a labeled domain into train and test parts.

    Returns:
        (LabeledPointCloud, LabeledPointCloud): train and test sets, each keeping the input row order
    """
    if not 0 < test_fraction < 1:
        raise InvalidInputError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    try:
        train_idx, test_idx = train_test_split(
            np.arange(data.n), test_size=test_fraction, stratify=data.classes, random_state=seed
        )
    except ValueError as e:
        raise InvalidInputError(f"cannot split {data.n} points with test fraction {test_fraction}: {e}") from e
    train_idx = np.sort(train_idx)
    test_idx = np.sort(test_idx)
    return (
        LabeledPointCloud(PointCloud(data.support[train_idx]), data.labels[train_idx]),
        LabeledPointCloud(PointCloud(data.support[test_idx]), data.labels[test_idx]),
    )

import os

import numpy as np
import pytest

from dadil.barycenter import BarycenterConfig
from dadil.classify import ClassifierConfig
from dadil.config import ExperimentConfig
from dadil.datasets import DatasetSpec
from dadil.datasets import generate_domains
from dadil.dictionary import DadilConfig
from dadil.ot_core import LabeledPointCloud


@pytest.fixture
def datadir():
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_labeled(rng):
    def make(n, d=2, n_classes=2):
        classes = np.arange(n) % n_classes
        return LabeledPointCloud.from_class_indices(rng.standard_normal((n, d)), classes, n_classes)

    return make


@pytest.fixture
def blobs_spec():
    return DatasetSpec(generator="gaussian_blobs", angles=(0.0, 30.0, 60.0), n_samples=40, noise=0.2, seed=3)


@pytest.fixture
def blob_domains(blobs_spec):
    return generate_domains(blobs_spec)


@pytest.fixture
def small_dadil():
    return DadilConfig(
        n_iter=3,
        wbr_n_iter=3,
        n_batches=2,
        batch_size=8,
        atoms_k=2,
        atom_size=16,
        lr=1.0,
        lr_weights=0.1,
        barycenter=BarycenterConfig(max_iter=5),
        seed=7,
    )


@pytest.fixture
def small_experiment(blobs_spec, small_dadil):
    return ExperimentConfig(
        dataset=blobs_spec,
        dadil=small_dadil,
        classifier=ClassifierConfig(epochs=50),
        seeds=(0, 1),
        record_time=False,
        grid_resolution=2,
    )

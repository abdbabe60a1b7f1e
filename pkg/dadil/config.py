# -*- coding: utf-8 -*-

"""Experiment configuration and its flat TOML file format."""

from __future__ import annotations

import dataclasses
import logging
import os
import typing
from dataclasses import dataclass, field

import toml

from .barycenter import BarycenterConfig
from .classify import ClassifierConfig
from .datasets import DatasetSpec
from .dictionary import DadilConfig
from .exceptions import ConfigError
from .exceptions import InvalidInputError

logger = logging.getLogger(__name__)

METHODS = ("baseline", "wb", "wbr_r", "wbr_e", "dadil_r", "dadil_e")
OUTPUT_ENVVAR = "DADIL_OUTPUT_DIR"

# Flat file key -> (section, field)
KEYS = {
    "generator": ("dataset", "generator"),
    "angles": ("dataset", "angles"),
    "translations": ("dataset", "translations"),
    "noise": ("dataset", "noise"),
    "n_samples": ("dataset", "n_samples"),
    "n_classes": ("dataset", "n_classes"),
    "dataset_seed": ("dataset", "seed"),
    "paths": ("dataset", "paths"),
    "names": ("dataset", "names"),
    "n_iter": ("dadil", "n_iter"),
    "wbr_n_iter": ("dadil", "wbr_n_iter"),
    "n_batches": ("dadil", "n_batches"),
    "batch_size": ("dadil", "batch_size"),
    "atoms_k": ("dadil", "atoms_k"),
    "atom_size": ("dadil", "atom_size"),
    "lr": ("dadil", "lr"),
    "lr_weights": ("dadil", "lr_weights"),
    "beta": ("dadil", "beta"),
    "beta_scale": ("dadil", "beta_scale"),
    "threads": ("dadil", "workers"),
    "bary_tol": ("barycenter", "tol"),
    "bary_max_iter": ("barycenter", "max_iter"),
    "relaxation": ("barycenter", "relaxation"),
    "clf_epochs": ("classifier", "epochs"),
    "clf_lr": ("classifier", "lr"),
    "clf_batch_size": ("classifier", "batch_size"),
    "clf_solver": ("classifier", "solver"),
    "clf_l2": ("classifier", "l2"),
    "methods": ("experiment", "methods"),
    "seeds": ("experiment", "seeds"),
    "output_dir": ("experiment", "output_dir"),
    "interpolation": ("experiment", "interpolation"),
    "grid_resolution": ("experiment", "grid_resolution"),
    "test_fraction": ("experiment", "test_fraction"),
    "cores": ("experiment", "cores"),
    "record_time": ("experiment", "record_time"),
    "sparsity_k": ("experiment", "sparsity_k"),
    "spread_draws": ("experiment", "spread_draws"),
}


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment: data, learning, classifier and bookkeeping settings."""

    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    dadil: DadilConfig = field(default_factory=DadilConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    methods: typing.Tuple[str, ...] = METHODS
    seeds: typing.Tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str = "dadil-output"
    interpolation: bool = False
    grid_resolution: int = 10
    test_fraction: float = 0.2
    cores: int = 1
    record_time: bool = True
    sparsity_k: typing.Tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    spread_draws: int = 20

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.sparsity_k = tuple(int(k) for k in self.sparsity_k)
        if not self.methods:
            raise InvalidInputError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            expected = ", ".join(METHODS)
            raise InvalidInputError(f"unknown methods: {', '.join(unknown)}; expected a subset of {expected}")
        if len(set(self.methods)) != len(self.methods):
            raise InvalidInputError("methods must not repeat")
        if not self.seeds:
            raise InvalidInputError("at least one seed is required")
        if self.interpolation and self.grid_resolution < 2:
            raise InvalidInputError(f"grid_resolution must be at least 2, got {self.grid_resolution}")
        if not 0 < self.test_fraction < 1:
            raise InvalidInputError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.cores < 1:
            raise InvalidInputError(f"cores must be at least 1, got {self.cores}")
        if any(k < 1 for k in self.sparsity_k):
            raise InvalidInputError("sparsity_k entries must be positive")
        if self.spread_draws < 1:
            raise InvalidInputError(f"spread_draws must be at least 1, got {self.spread_draws}")

    @property
    def bary_cfg(self):
        """Barycenter parameters for full-size reconstructions."""
        return dataclasses.replace(self.dadil.barycenter, n_support=None)


def _tuples(value):
    if isinstance(value, list):
        return tuple(_tuples(x) for x in value)
    return value


def build_config(values):
    """
    Builds an `ExperimentConfig` from flat key/value pairs.

    Args:
        values (dict): flat keys as written in a config file; `None` values are ignored

    Returns:
        (ExperimentConfig): the validated configuration
    """
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    sections = {"dataset": {}, "dadil": {}, "barycenter": {}, "classifier": {}, "experiment": {}}
    for key, value in values.items():
        if value is None:
            continue
        section, name = KEYS[key]
        sections[section][name] = _tuples(value)
    try:
        barycenter = BarycenterConfig(**{"max_iter": 10, **sections["barycenter"]})
        return ExperimentConfig(
            dataset=DatasetSpec(**sections["dataset"]),
            dadil=DadilConfig(barycenter=barycenter, **sections["dadil"]),
            classifier=ClassifierConfig(**sections["classifier"]),
            **sections["experiment"],
        )
    except (InvalidInputError, TypeError) as e:
        raise ConfigError(str(e)) from e


def read_config_file(path):
    """Reads a flat TOML configuration file into a dict."""
    try:
        values = toml.load(path)
    except (OSError, toml.TomlDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: configuration files are flat; found tables {', '.join(nested)}")
    logger.info(f"Read {len(values)} settings from {path}")
    return values


def load_config(path=None, overrides=None):
    """
    Merges a config file, the output directory environment variable and explicit overrides.

    Later sources win: file values, then `DADIL_OUTPUT_DIR`, then non-`None` overrides.
    """
    values = read_config_file(path) if path else {}
    if os.environ.get(OUTPUT_ENVVAR):
        values["output_dir"] = os.environ[OUTPUT_ENVVAR]
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_config(values)


def dump_config(cfg):
    """Flattens an `ExperimentConfig` back into file keys."""
    sections = {
        "dataset": cfg.dataset,
        "dadil": cfg.dadil,
        "barycenter": cfg.dadil.barycenter,
        "classifier": cfg.classifier,
        "experiment": cfg,
    }
    out = {}
    for key, (section, name) in KEYS.items():
        value = getattr(sections[section], name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = [list(x) if isinstance(x, tuple) else x for x in value]
        out[key] = value
    return out


def write_config_file(cfg, path):
    with open(path, "w", encoding="utf-8") as wfile:
        toml.dump(dump_config(cfg), wfile)

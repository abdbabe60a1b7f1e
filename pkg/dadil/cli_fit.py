# -*- coding: utf-8 -*-

"""Learns a dictionary for one seed and saves it with its training trace."""

import dataclasses
import logging
import os
import sys

import click

from .datasets import generate_domains
from .datasets import stratified_split
from .dictionary import DENSITY_NEIGHBORS
from .dictionary import density_score
from .exceptions import DadilError
from .experiment import seeded_spec
from .experiment import write_trace_csv
from .learning import fit
from .validation import ConfigCommand
from .validation import configure_logging
from .validation import dataset_options
from .validation import learning_options

logger = logging.getLogger(__name__)


@click.command(cls=ConfigCommand)
@dataset_options
@learning_options
@click.option("--seed", help="seed to fit; defaults to the first configured seed", type=int)
def main(cfg, verbose, seed):
    """
    Fit a dataset dictionary on the sources and the unlabeled target training split.
    """
    configure_logging(cfg.output_dir, verbose)
    if seed is None:
        seed = cfg.seeds[0]
    domains = generate_domains(seeded_spec(cfg.dataset, seed))
    train, _ = stratified_split(domains[-1], cfg.test_fraction, seed)
    try:
        dictionary, trace = fit(
            domains[:-1], train.cloud, dataclasses.replace(cfg.dadil, seed=seed), cfg.dataset.domain_names()
        )
    except DadilError as e:
        logger.error(f"Fitting failed: {e}")
        sys.exit(1)

    path = os.path.join(cfg.output_dir, "dictionary.npz")
    dictionary.save(path)
    write_trace_csv({seed: trace}, os.path.join(cfg.output_dir, "trace.csv"))
    click.echo(f"{dictionary!r}")
    click.echo(f"target coordinates: {', '.join(f'{a:.3f}' for a in dictionary.alpha_target)}")
    if cfg.dadil.atom_size > DENSITY_NEIGHBORS:
        click.echo(f"atom density score: {density_score(dictionary.atoms):.4g}")
    click.echo(f"final loss {trace.epoch_loss[-1]:.5g}; wrote {path}")


if __name__ == "__main__":
    main()

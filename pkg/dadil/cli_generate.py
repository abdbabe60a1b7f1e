# -*- coding: utf-8 -*-

"""Writes the synthetic domains of an experiment as feature files."""

import logging
import os

import click

from .config import write_config_file
from .datasets import generate_domains
from .datasets import write_feature_csv
from .validation import ConfigCommand
from .validation import configure_logging
from .validation import dataset_options

logger = logging.getLogger(__name__)


@click.command(cls=ConfigCommand)
@dataset_options
def main(cfg, verbose):
    """
    Generate shifted source and target domains and write one feature file per domain.
    """
    configure_logging(cfg.output_dir, verbose)
    domains = generate_domains(cfg.dataset)
    for name, domain in zip(cfg.dataset.domain_names(), domains):
        path = os.path.join(cfg.output_dir, f"{name}.csv")
        write_feature_csv(path, domain)
        logger.info(f"Wrote {domain!r} to {path}")
    write_config_file(cfg, os.path.join(cfg.output_dir, "config.toml"))
    click.echo(f"Wrote {len(domains)} domains to {cfg.output_dir}")


if __name__ == "__main__":
    main()

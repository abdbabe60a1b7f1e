# -*- coding: utf-8 -*-

"""Scores reconstructions over a grid of barycentric coordinates."""

import dataclasses
import logging
import sys

import click

from .experiment import InterpolationTable
from .experiment import StudyTables
from .experiment import collect_rows
from .experiment import emit_report
from .experiment import run_experiment_outcomes
from .validation import ConfigCommand
from .validation import configure_logging
from .validation import dataset_options
from .validation import learning_options

logger = logging.getLogger(__name__)


@click.command(cls=ConfigCommand)
@dataset_options
@learning_options
@click.option("--grid-resolution", help="grid steps along each simplex edge", type=click.IntRange(2))
def main(cfg, verbose):
    """
    Reconstruct the target across the simplex of atom weights and correlate loss with accuracy.
    """
    configure_logging(cfg.output_dir, verbose)
    cfg = dataclasses.replace(cfg, interpolation=True, methods=("dadil_r", "dadil_e"))
    outcomes = run_experiment_outcomes(cfg, progress=True)
    tables = [o.interpolation for o in outcomes if o.interpolation is not None]
    traces = {o.seed: o.trace for o in outcomes if o.trace is not None}
    emit_report(collect_rows(outcomes), StudyTables(interpolation=tables, traces=traces), cfg.output_dir)

    if tables:
        pooled = InterpolationTable.pooled(tables)
        click.echo(f"corr(w2, acc_r) = {pooled.corr_r:.3f}")
        click.echo(f"corr(w2, acc_e) = {pooled.corr_e:.3f}")
    failures = [f for o in outcomes for f in o.failures]
    if failures:
        for failure in failures:
            logger.error(f"Failed: {failure}")
        sys.exit(1)


if __name__ == "__main__":
    main()

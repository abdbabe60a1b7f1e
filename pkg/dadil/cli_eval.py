# -*- coding: utf-8 -*-

"""Evaluates adaptation methods on the target domain across seeds."""

import logging
import sys

import click

from .experiment import StudyTables
from .experiment import collect_rows
from .experiment import emit_report
from .experiment import run_experiment_outcomes
from .experiment import summarize
from .experiment import write_artifacts
from .validation import ConfigCommand
from .validation import configure_logging
from .validation import dataset_options
from .validation import learning_options

logger = logging.getLogger(__name__)


def echo_summary(rows):
    for method, stats in summarize(rows).items():
        line = f"{method:>9}: {stats['mean']:6.2f} +- {stats['std']:5.2f} ({stats['n']} seeds)"
        if stats["failures"]:
            line += f", {stats['failures']} failed"
        click.echo(line)


@click.command(cls=ConfigCommand)
@dataset_options
@learning_options
@click.option("--no-timing", help="write zero wall times so reruns give identical files", is_flag=True)
def main(cfg, verbose, no_timing):
    """
    Run the requested methods for every seed and write results.csv and trace.csv.
    """
    configure_logging(cfg.output_dir, verbose)
    if no_timing:
        cfg.record_time = False
    outcomes = run_experiment_outcomes(cfg, progress=True)
    rows = collect_rows(outcomes)
    traces = {o.seed: o.trace for o in outcomes if o.trace is not None}
    emit_report(rows, StudyTables(traces=traces), cfg.output_dir)
    write_artifacts(outcomes, cfg.output_dir)
    held_out = round(100 * cfg.test_fraction)
    click.echo(f"Target accuracy on seeded stratified {100 - held_out}/{held_out} train/test splits:")
    echo_summary(rows)

    failures = [f for o in outcomes for f in o.failures]
    if failures:
        for failure in failures:
            logger.error(f"Failed: {failure}")
        sys.exit(1)


if __name__ == "__main__":
    main()

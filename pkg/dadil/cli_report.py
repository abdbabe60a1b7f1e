# -*- coding: utf-8 -*-

"""Aggregates results across seeds and runs the dictionary-size and stability studies."""

import logging
import os

import click

from .experiment import read_results_csv
from .experiment import read_trace_csv
from .experiment import size_sweep
from .experiment import sparsity_summary
from .experiment import spread_summary
from .experiment import stability_study
from .experiment import summarize
from .experiment import write_sparsity_csv
from .experiment import write_spread_csv
from .experiment import write_summary_csv
from .validation import ConfigCommand
from .validation import configure_logging
from .validation import dataset_options
from .validation import learning_options
from .validation import validate_ints

logger = logging.getLogger(__name__)


@click.command(cls=ConfigCommand)
@dataset_options
@learning_options
@click.option("--input", "input_dir", help="directory holding results.csv; defaults to the output directory")
@click.option("--sparsity", help="fit dictionaries of several sizes and report target sparsity", is_flag=True)
@click.option("--sparsity-k", help="comma separated dictionary sizes", type=click.UNPROCESSED, callback=validate_ints)
@click.option(
    "--spread", help="score each dictionary size at coordinates drawn uniformly from the simplex", is_flag=True
)
@click.option("--spread-draws", help="random coordinates per dictionary", type=click.IntRange(1))
def main(cfg, verbose, input_dir, sparsity, spread):
    """
    Summarize results.csv as mean and standard deviation per method and write summary.csv.
    """
    configure_logging(cfg.output_dir, verbose)
    input_dir = input_dir or cfg.output_dir
    results = os.path.join(input_dir, "results.csv")
    if not os.path.exists(results):
        raise click.UsageError(f"no results file at {results}; run the eval command first")

    summary = summarize(read_results_csv(results))
    write_summary_csv(summary, os.path.join(cfg.output_dir, "summary.csv"))
    for method, stats in summary.items():
        click.echo(f"{method:>9}: {stats['mean']:6.2f} +- {stats['std']:5.2f} ({stats['n']} seeds)")

    trace = os.path.join(input_dir, "trace.csv")
    if os.path.exists(trace):
        traces = read_trace_csv(trace)
        if traces:
            for key, value in stability_study(traces).items():
                click.echo(f"{key}: {value:.4g}")

    if sparsity or spread:
        rows = size_sweep(cfg, cfg.spread_draws if spread else 0, progress=True)
    if sparsity:
        sweep = sparsity_summary(rows)
        write_sparsity_csv(sweep, os.path.join(cfg.output_dir, "sparsity.csv"))
        for k, mean, std, n in sweep:
            click.echo(f"K={k}: sparsity {mean:.1f} +- {std:.1f} ({n} seeds)")
    if spread:
        table = spread_summary(rows)
        write_spread_csv(table, os.path.join(cfg.output_dir, "spread.csv"))
        for r in table:
            click.echo(
                f"K={r.k}: DaDiL-R {r.acc_r_target:.1f} vs {r.acc_r_mean:.1f} +- {r.acc_r_std:.1f}, "
                f"DaDiL-E {r.acc_e_target:.1f} vs {r.acc_e_mean:.1f} +- {r.acc_e_std:.1f} at random coordinates"
            )


if __name__ == "__main__":
    main()

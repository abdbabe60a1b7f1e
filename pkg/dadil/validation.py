# -*- coding: utf-8 -*-

"""Validation functions and shared options for `click` commands."""

import logging
import os

import click

from .config import KEYS
from .config import OUTPUT_ENVVAR
from .config import load_config
from .exceptions import ConfigError
from .exceptions import FeatureFileError

LOG_FILENAME = "dadil.log.txt"


def _split(value):
    try:
        value = value.split(",")
    except AttributeError:
        # Tuples and lists shouldn't have the .split method
        pass
    return [x.strip() for x in value if x.strip()]


def validate_names(ctx, param, value):
    """Validates a comma separated list of names, such as `--methods baseline,dadil_r`."""
    if value is None:
        return
    return _split(value)


def validate_ints(ctx, param, value):
    """Validates a comma separated list of integers, such as `--seeds 0,1,2`."""
    if value is None:
        return
    try:
        return [int(x) for x in _split(value)]
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}")


def validate_floats(ctx, param, value):
    """Validates a comma separated list of numbers, such as `--angles 0,10,20,30`."""
    if value is None:
        return
    try:
        return [float(x) for x in _split(value)]
    except ValueError:
        raise click.BadParameter(f"expected comma separated numbers, got {value!r}")


def configure_logging(output_dir=None, verbose=0):
    """
    Sends package log records to stderr and, when `output_dir` is given, to a log file inside it.

    Args:
        output_dir (str): directory for `dadil.log.txt`, created when missing
        verbose (int): 0 for warnings, 1 for progress information, 2 or more for debugging output
    """
    logger = logging.getLogger("dadil")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    if verbose >= 2:
        logger.setLevel(logging.DEBUG)
    elif verbose == 1:
        logger.setLevel(logging.INFO)
    else:
        logger.setLevel(logging.WARNING)
    logger.addHandler(logging.StreamHandler())
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        logger.addHandler(logging.FileHandler(os.path.join(output_dir, LOG_FILENAME)))
    return logger


class ConfigCommand(click.Command):
    """
    Helper class for commands configured by an experiment config file plus overriding flags.

    Parameters named like configuration keys are removed from the context and merged over the
    values of the optional `config` file; the result is passed to the command as `cfg`, an
    `ExperimentConfig`. Invalid settings are reported as bad parameters. Unreadable feature
    files are reported as usage errors.
    """

    def build_config(self, ctx, params):
        overrides = {k: params.pop(k) for k in list(params) if k in KEYS}
        path = params.pop("config", None)
        try:
            params["cfg"] = load_config(path, overrides)
        except ConfigError as e:
            raise click.BadParameter(str(e), ctx=ctx, param_hint="configuration")
        return params

    def make_context(self, *args, **kwargs):
        ctx = super(ConfigCommand, self).make_context(*args, **kwargs)
        ctx.params = self.build_config(ctx, ctx.params)
        return ctx

    def invoke(self, ctx):
        try:
            return super(ConfigCommand, self).invoke(ctx)
        except FeatureFileError as e:
            raise click.UsageError(str(e), ctx=ctx)


def dataset_options(f):
    """Options describing the domains; flags win over the config file."""
    options = [
        click.option("--config", help="flat TOML configuration file", type=click.Path(exists=True, dir_okay=False)),
        click.option("--generator", help="domain generator", type=click.Choice(["moons", "gaussian_blobs", "file"])),
        click.option(
            "--angles",
            help="comma separated rotation angles in degrees, sources first and target last",
            type=click.UNPROCESSED,
            callback=validate_floats,
        ),
        click.option("--paths", help="comma separated feature files for the file generator", callback=validate_names),
        click.option("--n-samples", help="points per synthetic domain", type=click.IntRange(1)),
        click.option("--noise", help="standard deviation of the synthetic noise", type=click.FloatRange(0)),
        click.option("--n-classes", help="number of classes", type=click.IntRange(2)),
        click.option("--dataset-seed", help="seed of the base synthetic sample", type=int),
        click.option("--output", "output_dir", help="output directory", envvar=OUTPUT_ENVVAR),
        click.option("-v", "--verbose", help="emit extra information (can be repeated)", count=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def learning_options(f):
    """Options of the dictionary learning loop and the experiment around it."""
    options = [
        click.option("--seeds", help="comma separated seeds", type=click.UNPROCESSED, callback=validate_ints),
        click.option(
            "--methods",
            help="comma separated methods: baseline, wb, wbr_r, wbr_e, dadil_r, dadil_e",
            type=click.UNPROCESSED,
            callback=validate_names,
        ),
        click.option("--n-iter", help="dictionary learning iterations", type=click.IntRange(1)),
        click.option("--wbr-n-iter", help="barycentric regression iterations", type=click.IntRange(1)),
        click.option("--n-batches", help="mini-batches per iteration", type=click.IntRange(1)),
        click.option("--batch-size", help="points per domain mini-batch", type=click.IntRange(1)),
        click.option("--atoms-k", help="number of atoms", type=click.IntRange(1)),
        click.option("--atom-size", help="points per atom", type=click.IntRange(1)),
        click.option("--lr", help="atom learning rate", type=click.FloatRange(0)),
        click.option("--lr-weights", help="barycentric coordinate learning rate", type=click.FloatRange(0)),
        click.option("--beta", help="label cost weight; scaled from the data when omitted", type=click.FloatRange(0)),
        click.option(
            "--cores",
            help="how many parallel processes to use across seeds",
            type=click.IntRange(1, os.cpu_count() or 1, clamp=True),
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f

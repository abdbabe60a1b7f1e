# -*- coding: utf-8 -*-

"""The `dadil` command, grouping the generate, fit, eval, interpolate and report commands."""

import click

from . import cli_eval
from . import cli_fit
from . import cli_generate
from . import cli_interpolate
from . import cli_report


@click.group()
@click.version_option(package_name="dadil")
def main():
    """
    Dataset dictionary learning for multi-source domain adaptation.
    """


main.add_command(cli_generate.main, "generate")
main.add_command(cli_fit.main, "fit")
main.add_command(cli_eval.main, "eval")
main.add_command(cli_interpolate.main, "interpolate")
main.add_command(cli_report.main, "report")

if __name__ == "__main__":
    main()

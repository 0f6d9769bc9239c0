"""
Command line options shared by the management commands

Each option maps to one run config source: `--profile` selects the
defaults, `--config` a `key: value` file and every `--set key=value` one
config key.
"""

import argparse
import os
import time

from django.conf import settings
from django.core.management.base import CommandError

from utils.exceptions import ConfigError
from utils.runconfig.runconfig import load_run_config
from utils.runconfig.schema import SCHEMA
from utils.runconfig.schema import format_value


CONFIG_ERROR = 2
RUNTIME_ERROR = 3


def config_key_listing(profile="desk"):
    """Text listing every config key with its default, for `--help`"""
    defaults = settings.RUN_PROFILES[profile]
    lines = ["config keys (--set key=value), {} defaults:".format(profile)]
    for key in sorted(SCHEMA):
        lines.append("  {} = {}".format(key, format_value(defaults[key])))
    return "\n".join(lines)


def add_config_arguments(parser):
    parser.formatter_class = argparse.RawDescriptionHelpFormatter
    parser.epilog = config_key_listing()
    parser.add_argument(
        "--profile", default="desk", choices=sorted(settings.RUN_PROFILES),
        help="Defaults to start from")
    parser.add_argument(
        "--config", default=None,
        help="Run config file with one 'key: value' line per key")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE",
        help="Override one config key, may be repeated")


def config_from_options(options):
    """
    Resolve the run config of a command

    Raises
    ------
    CommandError
        With exit code 2 naming the offending key
    """
    try:
        return load_run_config(
            profile=options["profile"], path=options["config"],
            overrides=options["overrides"])
    except ConfigError as err_msg:
        raise CommandError("Invalid run config: {}".format(err_msg),
                           returncode=CONFIG_ERROR)


def default_run_dir(config):
    """`<RUN_ROOT>/<profile>-<representation>-seed<seed>-<timestamp>`"""
    name = "{}-{}-seed{}-{}".format(
        config.profile, config["representation.kind"], config.seed,
        time.strftime("%Y%m%d-%H%M%S"))
    return os.path.join(settings.RUN_ROOT, name)

"""
Run configuration assembled from profile defaults, files and overrides

A `RunConfig` is a flat mapping from dotted keys (`env.image_size`) to typed
values. It starts from one of the profiles in `settings.RUN_PROFILES` and
is updated in this order:

1. profile defaults (`desk` or `paper`)
2. config file lines (`key: value`)
3. command line overrides (`key=value`)
4. the seed environment variable (`settings.SEED_ENV_VAR`)

Every step validates the touched keys, the consistency checks run once all
sources are applied.
"""

import copy
import hashlib
import logging
import os

from django.conf import settings

from utils.exceptions import ConfigError
from utils.logger_copy import copy_logger_settings
from utils.runconfig.keyvaluefile import read_key_value_lines
from utils.runconfig.schema import SCHEMA
from utils.runconfig.schema import check_consistency
from utils.runconfig.schema import check_value
from utils.runconfig.schema import format_value
from utils.runconfig.schema import parse_value


class RunConfig():
    """
    Validated flat run configuration

    Values are read with item access (`config["env.views"]`) or per section
    (`config.section("env")["views"]`).
    """

    logger = logging.getLogger(__name__).getChild("RunConfig")

    def __init__(self, values, profile="desk"):
        self.profile = profile
        self._values = {}
        for key, value in values.items():
            check_value(key, value)
            self._values[key] = copy.deepcopy(value)
        missing = sorted(set(SCHEMA) - set(self._values))
        if missing:
            raise ConfigError(missing[0], "missing config key")

    # -------------------------------------------------------------------------
    @classmethod
    def from_profile(cls, profile="desk"):
        """Start a config from the named profile of the settings"""
        try:
            defaults = settings.RUN_PROFILES[profile]
        except KeyError:
            raise ConfigError("profile", "unknown profile '{}'".format(profile))
        return cls(defaults, profile=profile)

    @classmethod
    def load(cls, path):
        """
        Read a config written by `save`

        The profile is taken from the leading `# profile:` comment, the
        values from the key-value lines.
        """
        profile = "desk"
        with open(path, "r", encoding="utf8") as f:
            lines = f.readlines()
        if lines and lines[0].startswith("# profile:"):
            profile = lines[0].split(":", maxsplit=1)[1].strip()
        config = cls.from_profile(profile)
        config.update_from_lines(lines, separator=":")
        return config.validate()

    # -------------------------------------------------------------------------
    def __getitem__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(key, "unknown config key")

    def __contains__(self, key):
        return key in self._values

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self._values == other._values

    def keys(self):
        return sorted(self._values)

    def as_dict(self):
        return copy.deepcopy(self._values)

    def section(self, name):
        """
        Get the keys of one section without the section prefix

        Parameters
        ----------
        name : str
            Section name, e.g. `mvmae`

        Returns
        -------
        dict
            Short key to value, e.g. `{"mask_ratio": 0.95, ...}`
        """
        prefix = name + "."
        return {key[len(prefix):]: copy.deepcopy(value)
                for key, value in self._values.items()
                if key.startswith(prefix)}

    # -------------------------------------------------------------------------
    def set(self, key, value):
        """Set one typed value after checking it"""
        check_value(key, value)
        self.logger.debug("Setting {} = {!r}".format(key, value))
        self._values[key] = copy.deepcopy(value)

    def replace(self, updates):
        """
        Get a validated copy with some values replaced

        Parameters
        ----------
        updates : dict
            Dotted key to typed value

        Returns
        -------
        RunConfig
        """
        new = RunConfig(self._values, profile=self.profile)
        for key, value in updates.items():
            new.set(key, value)
        new.validate()
        return new

    def update_from_lines(self, lines, separator=":"):
        """
        Apply key-value lines of a config file or of overrides

        Raises
        ------
        ConfigError
            For lines without key, unknown keys and invalid values
        """
        for number, key, value_string in read_key_value_lines(
                lines, separator=separator):
            if not key:
                raise ConfigError(
                    "line {}".format(number),
                    "expected 'key{} value'".format(separator))
            self.set(key, parse_value(key, value_string))

    def update_from_file(self, path):
        """Apply a `key: value` config file"""
        self.logger.info("Reading run config file: {}".format(path))
        try:
            with open(path, "r", encoding="utf8") as f:
                lines = f.readlines()
        except FileNotFoundError:
            raise ConfigError("config", "file not found: {}".format(path))
        self.update_from_lines(lines, separator=":")

    def apply_overrides(self, overrides):
        """Apply `key=value` overrides from the command line"""
        self.update_from_lines(overrides, separator="=")

    def apply_environment(self, environ=None):
        """
        Apply the seed environment variable if it is set

        Both the trainer seed and the environment seed follow it.
        """
        environ = os.environ if environ is None else environ
        seed_string = environ.get(settings.SEED_ENV_VAR)
        if seed_string is None or not seed_string.strip():
            return
        seed = parse_value("trainer.seed", seed_string)
        self.logger.info("Seed {} taken from {}".format(
            seed, settings.SEED_ENV_VAR))
        self.set("trainer.seed", seed)
        self.set("env.seed", seed)

    def validate(self):
        """Run the checks spanning several keys"""
        check_consistency(self._values)
        return self

    # -------------------------------------------------------------------------
    @property
    def control_views(self):
        """Views fed to the world model and the policy"""
        return list(self["env.control_views"]) or list(self["env.views"])

    @property
    def seed(self):
        return self["trainer.seed"]

    # -------------------------------------------------------------------------
    def dump(self):
        """
        Text form of the complete config

        One `key: value` line per key, sorted by key, preceded by a comment
        with the profile. Parsing the dump gives back an equal config.
        """
        lines = ["# profile: {}".format(self.profile)]
        for key in sorted(self._values):
            lines.append("{}: {}".format(key, format_value(self._values[key])))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf8") as f:
            f.write(self.dump())

    def fingerprint(self):
        """SHA-1 of the dump, used to match checkpoints with configs"""
        return hashlib.sha1(self.dump().encode("utf8")).hexdigest()


# -----------------------------------------------------------------------------
def load_run_config(profile="desk", path=None, overrides=(), environ=None):
    """
    Build and validate a run config from all sources

    Parameters
    ----------
    profile : str
        Name of the profile in `settings.RUN_PROFILES`
    path : str or None
        Optional `key: value` config file
    overrides : iterable of str
        `key=value` strings applied after the file
    environ : mapping or None
        Environment to read the seed variable from. Defaults to `os.environ`.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        Naming the offending key for any invalid input
    """

    logger = logging.getLogger(__name__).getChild("load_run_config")
    copy_logger_settings(__name__, "utils.runconfig.keyvaluefile")

    config = RunConfig.from_profile(profile)
    if path:
        config.update_from_file(path)
    config.apply_overrides(overrides)
    config.apply_environment(environ)
    config.validate()
    logger.info("Run config resolved ({}), fingerprint {}".format(
        profile, config.fingerprint()[:12]))
    return config

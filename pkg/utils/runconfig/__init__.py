"""
Run configuration: profile defaults, key-value config files and overrides
"""

from .runconfig import RunConfig, load_run_config  # noqa: F401

"""
Provides a function to easily transfer the settings from one logger to others

Helper modules (rendering, buffers, config parsing) log through their own
module loggers. When they are used from a pipeline (training, collection,
tests), they should write to the same handlers as the calling pipeline.
"""

import logging


def copy_logger_settings(source_logger_name, *target_logger_names):
    """
    Make settings of all target loggers the same as the source logger

    Parameters
    ----------
    source_logger_name : str
        Name of the logger whose level, handlers and propagation are copied
    target_logger_names : str
        Names of the loggers that receive the settings
    """

    source_logger = logging.getLogger(source_logger_name)
    for target_logger_name in target_logger_names:
        target_logger = logging.getLogger(target_logger_name)
        target_logger.setLevel(source_logger.level)
        target_logger.propagate = source_logger.propagate
        target_logger.handlers = source_logger.handlers

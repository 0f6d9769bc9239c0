"""
Exceptions shared by the environment, the learners and the training loop
"""

from django.core.exceptions import ImproperlyConfigured


class ConfigError(ImproperlyConfigured):
    """
    Invalid run configuration

    The offending dotted key is kept in `key` so that the command line can
    point the user at it.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__("{}: {}".format(key, message))


class EpisodeFinishedError(RuntimeError):
    """Step called on an episode that already ended"""


class DemonstrationFormatError(ValueError):
    """An exported demonstration episode can not be read back"""


class NonFiniteLossError(FloatingPointError):
    """
    A loss became NaN or infinite

    `diagnostics` holds the metric values of the failing update.
    """

    def __init__(self, name, diagnostics):
        self.name = name
        self.diagnostics = dict(diagnostics)
        details = ", ".join(
            "{}={}".format(key, value)
            for key, value in sorted(self.diagnostics.items()))
        super().__init__("Non-finite {} loss ({})".format(name, details))


class TrainingAborted(RuntimeError):
    """
    Training stopped before completion

    `checkpoint` is the directory of the last good checkpoint or None if none
    was written yet.
    """

    def __init__(self, message, checkpoint=None):
        self.checkpoint = checkpoint
        super().__init__(message)

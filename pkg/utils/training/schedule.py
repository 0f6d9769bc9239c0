"""
Interleaving of environment steps and update rounds
"""

from fractions import Fraction


class Schedule():
    """
    Counts update rounds against environment steps

    Update rounds are due at the training ratio: after `s` environment steps
    exactly `floor(s * train_ratio)` rounds have run. Before the first
    environment step, `ae_init_steps` rounds train the autoencoder alone on
    the prefilled buffer.

    Parameters
    ----------
    train_ratio : float
        Update rounds per environment step, 1/16 is one round every 16 steps
    ae_init_steps : int
    """

    def __init__(self, train_ratio, ae_init_steps=0):
        if train_ratio <= 0:
            raise ValueError("Training ratio must be positive")
        # Exact rational, 0.0625 must give 100 rounds after 1600 steps
        self.train_ratio = Fraction(str(train_ratio))
        self.ae_init_steps = ae_init_steps

    @classmethod
    def from_config(cls, config):
        return cls(config["trainer.train_ratio"],
                   config["trainer.ae_init_steps"])

    def updates_due(self, env_steps):
        return int(env_steps * self.train_ratio)

    def pending(self, env_steps, updates):
        """Update rounds to run now"""
        return max(0, self.updates_due(env_steps) - updates)


def crossed(before, after, every):
    """Whether a multiple of `every` lies in (before, after]"""
    if every <= 0:
        return False
    return before // every != after // every

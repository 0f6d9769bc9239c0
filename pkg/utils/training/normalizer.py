"""
Running reward scale
"""

import logging
import math

import numpy as np


class RewardNormalizer():
    """
    Divide rewards by a running standard deviation

    Mean and mean square of the raw rewards are tracked as exponential
    moving averages with bias correction. The scale is the standard
    deviation but never below `floor`. Rewards are only scaled, never
    centered.

    Parameters
    ----------
    decay : float
        Weight of the old average per reward, in (0, 1)
    floor : float
        Lower bound of the scale, > 0
    enabled : bool
        With False the scale is always 1
    """

    logger = logging.getLogger(__name__).getChild("RewardNormalizer")

    def __init__(self, decay=0.999, floor=0.01, enabled=True):
        if not 0.0 < decay < 1.0:
            raise ValueError("Decay must be in (0, 1), got {}".format(decay))
        if floor <= 0.0:
            raise ValueError("Floor must be positive, got {}".format(floor))
        self.decay = decay
        self.floor = floor
        self.enabled = enabled
        self.mean = 0.0
        self.mean_square = 0.0
        self.count = 0

    @classmethod
    def from_config(cls, config):
        return cls(decay=config["trainer.reward_norm_decay"],
                   floor=config["trainer.reward_norm_floor"],
                   enabled=config["trainer.reward_normalization"])

    def update(self, rewards):
        """
        Feed raw rewards in the order they were received

        Equivalent to one moving average step per reward.
        """
        rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
        n = len(rewards)
        if n == 0:
            return
        weights = (1.0 - self.decay) * self.decay ** np.arange(n - 1, -1, -1)
        carry = self.decay ** n
        self.mean = carry * self.mean + float(weights @ rewards)
        self.mean_square = carry * self.mean_square + \
            float(weights @ rewards ** 2)
        self.count += n

    @property
    def std(self):
        if self.count == 0:
            return 0.0
        correction = 1.0 - self.decay ** self.count
        mean = self.mean / correction
        variance = self.mean_square / correction - mean ** 2
        return math.sqrt(max(variance, 0.0))

    @property
    def scale(self):
        if not self.enabled:
            return 1.0
        return max(self.std, self.floor)

    def normalize(self, rewards):
        """Scaled copy of the rewards, the statistics are not updated"""
        return np.asarray(rewards, dtype=np.float32) / np.float32(self.scale)

    def state_dict(self):
        return {
            "decay": self.decay,
            "floor": self.floor,
            "enabled": self.enabled,
            "mean": self.mean,
            "mean_square": self.mean_square,
            "count": self.count,
        }

    def load_state_dict(self, state):
        for key in ("decay", "floor", "enabled", "mean", "mean_square",
                    "count"):
            setattr(self, key, state[key])

"""
Episode container shared by demonstrations and the replay buffers

Step `t` of an episode holds the observation `o_t`, the action that led to
it (zeros at the first step), the reward received with it and the flags.
Images are stored as uint8.
"""

from dataclasses import dataclass
from dataclasses import field

import numpy as np


FLAGS = ("is_first", "is_last", "is_terminal", "success")


def to_uint8(images):
    """Convert [0, 1] float images to uint8"""
    return np.round(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_float(images):
    """Convert uint8 images back to float32 in [0, 1]"""
    return images.astype(np.float32) / 255.0


@dataclass
class Episode:
    views: tuple
    images: np.ndarray       # (L, V, side, side, 3) uint8
    actions: np.ndarray      # (L, 4) float32
    rewards: np.ndarray      # (L,) float32
    is_first: np.ndarray     # (L,) bool
    is_last: np.ndarray      # (L,) bool
    is_terminal: np.ndarray  # (L,) bool
    success: np.ndarray      # (L,) bool
    poses: dict = field(default_factory=dict)

    def __post_init__(self):
        length = len(self.images)
        for name in ("actions", "rewards") + FLAGS:
            if len(getattr(self, name)) != length:
                raise ValueError(
                    "Episode field '{}' has {} steps, expected {}".format(
                        name, len(getattr(self, name)), length))

    def __len__(self):
        return len(self.images)

    @property
    def image_size(self):
        return self.images.shape[2]

    @property
    def succeeded(self):
        return bool(self.success.any())

    @property
    def total_reward(self):
        return float(self.rewards.sum())

    @classmethod
    def from_transitions(cls, transitions):
        """
        Assemble an episode from a reset transition and the following steps

        Parameters
        ----------
        transitions : list of Transition
            The first one from `Transition.first`
        """
        if not transitions:
            raise ValueError("An episode needs at least one transition")
        observation = transitions[0].observation
        return cls(
            views=tuple(observation.views),
            images=np.stack([to_uint8(t.observation.images)
                             for t in transitions]),
            actions=np.stack([np.asarray(t.action, dtype=np.float32)
                              for t in transitions]),
            rewards=np.array([t.reward for t in transitions],
                             dtype=np.float32),
            is_first=np.array([t.is_first for t in transitions]),
            is_last=np.array([t.is_last for t in transitions]),
            is_terminal=np.array([t.is_terminal for t in transitions]),
            success=np.array([t.success for t in transitions]),
            poses=dict(observation.poses))

    def select_views(self, views):
        """Copy restricted to some of the views, in the given order"""
        indices = [self.views.index(view) for view in views]
        return Episode(
            views=tuple(views), images=self.images[:, indices],
            actions=self.actions, rewards=self.rewards,
            is_first=self.is_first, is_last=self.is_last,
            is_terminal=self.is_terminal, success=self.success,
            poses={view: pose for view, pose in self.poses.items()
                   if view in views})

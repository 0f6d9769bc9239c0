"""
Episode buffers of the training loop

Both buffers keep whole episodes. Images of all views are stored once per
step as uint8, in the view order of the environment.

Two sampling modes are offered:

* video clips of `T` consecutive frames of every view for the autoencoder.
  A clip never spans two episodes.
* sequences of `L` steps for the world model. Sequences run through the
  episodes in insertion order and may cross episode boundaries, the
  `is_first` flags mark every crossing.
"""

from collections import deque
from collections import namedtuple
import logging
import threading

import numpy as np


ClipBatch = namedtuple("ClipBatch", ["images", "rewards"])
ClipBatch.__doc__ = """
Video clips for the autoencoder

images : ndarray of shape (B, V, T, side, side, 3), uint8
rewards : ndarray of shape (B, T)
"""

SequenceBatch = namedtuple(
    "SequenceBatch",
    ["images", "actions", "rewards", "is_first", "is_terminal"])
SequenceBatch.__doc__ = """
Step sequences for the world model

images : ndarray of shape (B, L, V', side, side, 3), uint8
actions : ndarray of shape (B, L, A), action that led to each step
rewards : ndarray of shape (B, L)
is_first, is_terminal : ndarray of shape (B, L), bool
"""


# -----------------------------------------------------------------------------
class EpisodeBuffer():
    """
    Ordered collection of episodes with the two sampling modes

    Appends are serialized with a lock, collector threads can add episodes
    while the trainer thread is idle.
    """

    logger = logging.getLogger(__name__).getChild("EpisodeBuffer")

    def __init__(self):
        self.episodes = deque()
        self.num_steps = 0
        self.total_episodes = 0
        self.total_steps = 0
        self.lock = threading.Lock()

    def __len__(self):
        return len(self.episodes)

    def add(self, episode):
        with self.lock:
            self.episodes.append(episode)
            self.num_steps += len(episode)
            self.total_episodes += 1
            self.total_steps += len(episode)

    def extend(self, episodes):
        for episode in episodes:
            self.add(episode)

    # -------------------------------------------------------------------------
    def sample_episodes(self, count, rng):
        """
        Draw `count` episodes uniformly with replacement

        Returns
        -------
        list of Episode
            Empty when the buffer is empty
        """
        if not self.episodes:
            return []
        indices = rng.integers(len(self.episodes), size=count)
        return [self.episodes[i] for i in indices]

    def sample_clips(self, batch_size, num_frames, rng):
        """
        Draw video clips uniformly over all valid start steps

        A start step is valid when the clip of `num_frames` frames ends in
        the same episode.

        Returns
        -------
        ClipBatch or None
            None when no episode is long enough
        """
        episodes = list(self.episodes)
        starts = np.array([max(0, len(e) - num_frames + 1) for e in episodes],
                          dtype=np.int64)
        total = starts.sum()
        if total == 0:
            return None

        picks = rng.integers(total, size=batch_size)
        offsets = np.cumsum(starts)
        images, rewards = [], []
        for pick in picks:
            index = int(np.searchsorted(offsets, pick, side="right"))
            start = int(pick - (offsets[index] - starts[index]))
            episode = episodes[index]
            clip = slice(start, start + num_frames)
            # (T, V, ...) -> (V, T, ...)
            images.append(np.swapaxes(episode.images[clip], 0, 1))
            rewards.append(episode.rewards[clip])
        return ClipBatch(images=np.stack(images),
                         rewards=np.stack(rewards).astype(np.float32))

    def sample_sequences(self, batch_size, length, rng, view_indices=None):
        """
        Draw step sequences uniformly over all start steps

        The episodes are read as one stream in insertion order. The first
        step of every sequence is flagged as first, so the world model
        starts each sequence from its initial state.

        Parameters
        ----------
        batch_size, length : int
        rng : numpy.random.Generator
        view_indices : sequence of int or None
            Views to return, all by default

        Returns
        -------
        SequenceBatch or None
            None when the buffer holds fewer than `length` steps
        """
        episodes = list(self.episodes)
        lengths = np.array([len(e) for e in episodes], dtype=np.int64)
        total = int(lengths.sum())
        if total < length or length < 1:
            return None

        offsets = np.concatenate([[0], np.cumsum(lengths)])
        fields = {name: [] for name in SequenceBatch._fields}
        for start in rng.integers(total - length + 1, size=batch_size):
            parts = {name: [] for name in SequenceBatch._fields}
            position = int(start)
            remaining = length
            while remaining > 0:
                index = int(np.searchsorted(
                    offsets, position, side="right")) - 1
                episode = episodes[index]
                local = position - offsets[index]
                take = min(remaining, len(episode) - local)
                window = slice(local, local + take)
                images = episode.images[window]
                if view_indices is not None:
                    images = images[:, list(view_indices)]
                parts["images"].append(images)
                parts["actions"].append(episode.actions[window])
                parts["rewards"].append(episode.rewards[window])
                parts["is_first"].append(episode.is_first[window])
                parts["is_terminal"].append(episode.is_terminal[window])
                position += take
                remaining -= take
            for name in SequenceBatch._fields:
                fields[name].append(np.concatenate(parts[name]))

        batch = {name: np.stack(values) for name, values in fields.items()}
        batch["is_first"] = batch["is_first"].astype(bool)
        batch["is_first"][:, 0] = True
        batch["is_terminal"] = batch["is_terminal"].astype(bool)
        batch["rewards"] = batch["rewards"].astype(np.float32)
        batch["actions"] = batch["actions"].astype(np.float32)
        return SequenceBatch(**batch)

    # -------------------------------------------------------------------------
    def counters(self):
        """Episode and step counters, the content is not stored"""
        return {
            "episodes": len(self.episodes),
            "steps": self.num_steps,
            "total_episodes": self.total_episodes,
            "total_steps": self.total_steps,
        }

    def load_counters(self, counters):
        self.total_episodes = counters["total_episodes"]
        self.total_steps = counters["total_steps"]


class ReplayBuffer(EpisodeBuffer):
    """
    Episode ring with a capacity in steps

    The oldest episodes are dropped once the capacity is exceeded. The
    newest episode is always kept, even when it alone exceeds the capacity.
    """

    logger = logging.getLogger(__name__).getChild("ReplayBuffer")

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("Replay capacity must be positive")
        super().__init__()
        self.capacity = capacity

    def add(self, episode):
        super().add(episode)
        with self.lock:
            while self.num_steps > self.capacity and len(self.episodes) > 1:
                dropped = self.episodes.popleft()
                self.num_steps -= len(dropped)
                self.logger.debug("Dropped episode of {} steps".format(
                    len(dropped)))

    def counters(self):
        counters = super().counters()
        counters["capacity"] = self.capacity
        return counters


class ExpertBuffer(EpisodeBuffer):
    """
    Fixed set of demonstration episodes

    The episodes are added once at construction, later additions fail.
    """

    logger = logging.getLogger(__name__).getChild("ExpertBuffer")

    def __init__(self, episodes=()):
        super().__init__()
        for episode in episodes:
            super().add(episode)
        self.frozen = True

    def add(self, episode):
        if getattr(self, "frozen", False):
            raise RuntimeError("The expert buffer can not be changed")
        super().add(episode)


# -----------------------------------------------------------------------------
class RewardScaledView():
    """
    Sampling view of a buffer that divides the rewards by a scale

    The stored rewards stay raw. `scale` is read at every sample, so the
    view follows the running normalizer.

    Parameters
    ----------
    buffer : EpisodeBuffer
    scale : callable
        Returns the current positive scale
    """

    def __init__(self, buffer, scale):
        self.buffer = buffer
        self.scale = scale

    def __len__(self):
        return len(self.buffer)

    def sample_episodes(self, count, rng):
        return self.buffer.sample_episodes(count, rng)

    def sample_clips(self, batch_size, num_frames, rng):
        batch = self.buffer.sample_clips(batch_size, num_frames, rng)
        if batch is None:
            return None
        return batch._replace(rewards=batch.rewards / self.scale())

    def sample_sequences(self, batch_size, length, rng, view_indices=None):
        batch = self.buffer.sample_sequences(batch_size, length, rng,
                                             view_indices)
        if batch is None:
            return None
        return batch._replace(rewards=batch.rewards / self.scale())

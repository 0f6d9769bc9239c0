"""
Brightness and contrast augmentation of video clips
"""

import numpy as np


MAX_OFFSET = 0.25
MAX_GAIN_CHANGE = 0.5


def sample_augmentation(rng, strength):
    """
    Sample a contrast gain and a brightness offset

    Returns
    -------
    gain, offset : float
    """
    gain = 1.0 + rng.uniform(-MAX_GAIN_CHANGE, MAX_GAIN_CHANGE) * strength
    offset = rng.uniform(-MAX_OFFSET, MAX_OFFSET) * strength
    return float(gain), float(offset)


def apply_augmentation(video, gain, offset):
    """`clip(gain * (video - 0.5) + 0.5 + offset)`"""
    return np.clip(gain * (video - 0.5) + 0.5 + offset, 0.0, 1.0).astype(
        video.dtype)


def augment_video(video, rng, strength):
    """
    Augment one clip with a single gain and offset

    Parameters
    ----------
    video : ndarray of shape (..., 3)
        All frames and views of one clip, values in [0, 1]
    rng : numpy.random.Generator
    strength : float
        0 returns the clip unchanged, 1 uses the full ranges

    Returns
    -------
    ndarray like `video`
    """

    video = np.asarray(video)
    if strength == 0:
        return video.copy()
    gain, offset = sample_augmentation(rng, strength)
    return apply_augmentation(video, gain, offset)


def augment_batch(videos, rng, strength):
    """Augment every clip of a batch independently"""
    if strength == 0:
        return np.asarray(videos).copy()
    return np.stack([augment_video(video, rng, strength) for video in videos])

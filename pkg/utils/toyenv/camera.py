"""
Camera poses and viewpoint randomization

A camera is placed on an orbit around the scene origin. Its pose has five
parameters:

* theta : orbit angle in degrees, clockwise seen from above
* phi : downward tilt in degrees
* psi : roll about the optical axis in degrees, clockwise in the image
* d : horizontal distance from the origin in scene units
* h : height of the camera above the table in scene units

At the canonical tilt the camera looks exactly at the scene origin. Other
tilts pitch the optical axis up or down by the difference.

The randomization levels sample every parameter per episode from fixed
interval sets. `strong` intervals lie outside the `medium` intervals to test
generalization to unseen viewpoints.
"""

from collections import namedtuple
from dataclasses import dataclass
import logging
import math

import numpy as np


POSE_PARAMETERS = ("theta", "phi", "psi", "d", "h")

RANDOMIZATION_RANGES = {
    "weak": {
        "theta": ((-5.0, 5.0),),
        "phi": ((26.0, 28.0),),
        "psi": ((-5.0, 5.0),),
        "d": ((1.25, 1.45),),
        "h": ((1.5, 1.7),),
    },
    "medium": {
        "theta": ((-7.5, 7.5),),
        "phi": ((25.5, 28.5),),
        "psi": ((-7.5, 7.5),),
        "d": ((1.2, 1.5),),
        "h": ((1.45, 1.75),),
    },
    "strong": {
        "theta": ((-10.0, -7.5), (7.5, 10.0)),
        "phi": ((25.0, 25.5), (28.5, 29.0)),
        "psi": ((-10.0, -7.5), (7.5, 10.0)),
        "d": ((1.15, 1.2), (1.5, 1.55)),
        "h": ((1.4, 1.45), (1.75, 1.8)),
    },
}

# Orbit position of each named view relative to the front camera
VIEW_AZIMUTHS = {
    "front": 0.0,
    "front2": 0.0,
    "left": -60.0,
    "right": 60.0,
}

WRIST_VIEW = "wrist"

FIELD_OF_VIEW = 50.0


@dataclass(frozen=True)
class CameraPose:
    theta: float
    phi: float
    psi: float
    d: float
    h: float

    def as_dict(self):
        return {name: getattr(self, name) for name in POSE_PARAMETERS}


CANONICAL_POSE = CameraPose(theta=0.0, phi=27.0, psi=0.0, d=1.35, h=1.6)


@dataclass(frozen=True)
class RandomizationSpec:
    """
    Interval sets of the five pose parameters

    Each parameter maps to a tuple of closed `(low, high)` intervals. The
    `none` level has one degenerate interval per parameter at the canonical
    pose.
    """

    level: str
    intervals: dict

    def __post_init__(self):
        for name in POSE_PARAMETERS:
            interval_set = self.intervals.get(name)
            if not interval_set:
                raise ValueError(
                    "Randomization '{}' has no interval for '{}'".format(
                        self.level, name))
            for low, high in interval_set:
                if not (math.isfinite(low) and math.isfinite(high)):
                    raise ValueError(
                        "Non-finite interval for '{}': ({}, {})".format(
                            name, low, high))
                if low > high:
                    raise ValueError(
                        "Inverted interval for '{}': ({}, {})".format(
                            name, low, high))

    @classmethod
    def from_level(cls, level):
        if level == "none":
            return cls(level="none", intervals={
                name: ((value, value),)
                for name, value in CANONICAL_POSE.as_dict().items()})
        try:
            return cls(level=level, intervals=RANDOMIZATION_RANGES[level])
        except KeyError:
            raise ValueError("Unknown randomization level '{}'".format(level))

    def contains(self, pose):
        """True if every pose parameter lies in one of its intervals"""
        for name, value in pose.as_dict().items():
            if not any(low <= value <= high
                       for low, high in self.intervals[name]):
                return False
        return True


# -----------------------------------------------------------------------------
def _sample_from_intervals(interval_set, rng):
    """
    Draw uniformly from a union of intervals

    An interval is first picked with probability proportional to its length.
    """

    lengths = np.array([high - low for low, high in interval_set])
    if len(interval_set) == 1:
        index = 0
    elif lengths.sum() > 0:
        index = rng.choice(len(interval_set), p=lengths / lengths.sum())
    else:
        index = rng.integers(len(interval_set))
    low, high = interval_set[index]
    if low == high:
        return float(low)
    return float(rng.uniform(low, high))


def sample_camera_pose(spec, rng):
    """
    Sample one camera pose from a randomization spec

    Parameters
    ----------
    spec : RandomizationSpec
        Interval sets to sample from
    rng : numpy.random.Generator
        Seeded generator. The same seed gives the same pose.

    Returns
    -------
    CameraPose
    """

    values = {name: _sample_from_intervals(spec.intervals[name], rng)
              for name in POSE_PARAMETERS}
    return CameraPose(**values)


# -----------------------------------------------------------------------------
CameraFrame = namedtuple("CameraFrame", ["position", "right", "up", "forward"])


def _normalize(vector):
    return vector / np.linalg.norm(vector)


def look_at_frame(position, target, roll=0.0):
    """
    Camera frame at `position` looking at `target`

    Parameters
    ----------
    position, target : array-like of 3 floats
    roll : float
        Clockwise image roll in degrees

    Returns
    -------
    CameraFrame
    """

    position = np.asarray(position, dtype=np.float64)
    forward = _normalize(np.asarray(target, dtype=np.float64) - position)
    right = _normalize(np.cross(forward, np.array([0.0, 0.0, 1.0])))
    up = np.cross(right, forward)
    return _apply_roll(CameraFrame(position, right, up, forward), roll)


def _apply_roll(frame, roll):
    angle = math.radians(roll)
    right = math.cos(angle) * frame.right + math.sin(angle) * frame.up
    up = -math.sin(angle) * frame.right + math.cos(angle) * frame.up
    return CameraFrame(frame.position, right, up, frame.forward)


def orbit_camera_frame(pose, base_azimuth=0.0):
    """
    Camera frame of an orbit camera

    Parameters
    ----------
    pose : CameraPose
    base_azimuth : float
        Azimuth of the named view in degrees (see `VIEW_AZIMUTHS`)

    Returns
    -------
    CameraFrame
    """

    azimuth = math.radians(base_azimuth + pose.theta)
    position = np.array([
        -pose.d * math.sin(azimuth),
        -pose.d * math.cos(azimuth),
        pose.h,
    ])
    frame = look_at_frame(position, np.zeros(3))

    # Pitch relative to the canonical tilt, which looks at the origin
    pitch = math.radians(pose.phi - CANONICAL_POSE.phi)
    forward = math.cos(pitch) * frame.forward - math.sin(pitch) * frame.up
    up = math.sin(pitch) * frame.forward + math.cos(pitch) * frame.up
    frame = CameraFrame(position, frame.right, up, forward)
    return _apply_roll(frame, pose.psi)


WRIST_OFFSET = np.array([0.0, -0.15, 0.3])
WRIST_LOOK = np.array([0.0, 0.1, -0.3])


def wrist_camera_frame(gripper):
    """Camera frame rigidly attached above and behind the gripper"""
    gripper = np.asarray(gripper, dtype=np.float64)
    return look_at_frame(gripper + WRIST_OFFSET, gripper + WRIST_LOOK)


def focal_length(side):
    """Focal length in pixels for the fixed field of view"""
    return (side / 2.0) / math.tan(math.radians(FIELD_OF_VIEW / 2.0))


def project_points(points, frame, side):
    """
    Pinhole projection of world points

    Parameters
    ----------
    points : ndarray of shape (N, 3)
    frame : CameraFrame
    side : int
        Image side in pixels

    Returns
    -------
    rows, cols, depths : ndarray of shape (N,)
        Continuous pixel coordinates (pixel centers at integer values) and
        depth along the optical axis
    """

    logger = logging.getLogger(__name__).getChild("project_points")

    offsets = np.atleast_2d(points) - frame.position
    depths = offsets @ frame.forward
    if np.any(depths <= 0):
        logger.debug("Points behind the camera: {}".format(
            int(np.sum(depths <= 0))))
    safe = np.where(depths > 1e-9, depths, 1e-9)
    f = focal_length(side)
    x = (offsets @ frame.right) / safe * f
    y = (offsets @ frame.up) / safe * f
    cols = x + side / 2.0 - 0.5
    rows = -y + side / 2.0 - 0.5
    return rows, cols, depths

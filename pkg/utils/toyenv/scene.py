"""
Scene layout, task waypoints and the scripted expert

The workspace is the box `|x|, |y| <= half_extent`, `0 <= z <= height` above
a table at `z = 0`. A task is an ordered list of waypoints. Each waypoint
asks the gripper to be within the tolerance of a position while holding
(or not holding) an object.
"""

from dataclasses import dataclass
from dataclasses import field
import copy

import numpy as np


OBJECT_RADIUS = 0.08
OBJECT_REST_HEIGHT = 0.06
TARGET_PAD_RADIUS = 0.1
GRASP_RADIUS = 0.08
PLACE_LIFT = 0.15
MIN_PLACE_DISTANCE = 0.25
LAYOUT_EXTENT = 0.35

GRIPPER_START = np.array([0.0, -0.2, 0.3])
GRIPPER_START_NOISE = 0.05

OBJECT_COLORS = (
    (0.85, 0.2, 0.2),
    (0.2, 0.35, 0.85),
)
TARGET_PAD_COLOR = (0.2, 0.7, 0.3)
GRIPPER_OPEN_COLOR = (0.95, 0.85, 0.2)
GRIPPER_CLOSED_COLOR = (0.95, 0.5, 0.1)


@dataclass
class Waypoint:
    position: np.ndarray
    grasp: bool


@dataclass
class Workspace:
    half_extent: float = 0.5
    height: float = 0.5

    @property
    def low(self):
        return np.array([-self.half_extent, -self.half_extent, 0.0])

    @property
    def high(self):
        return np.array([self.half_extent, self.half_extent, self.height])

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.high - self.low))

    def contains(self, position):
        position = np.asarray(position)
        return bool(np.all(position >= self.low - 1e-9)
                    and np.all(position <= self.high + 1e-9))


@dataclass
class SceneState:
    """
    Mutable state of one episode

    `held` is the index of the grasped object, or None.
    """

    gripper: np.ndarray
    grasped: bool
    objects: list
    waypoints: list
    cursor: int = 0
    step_count: int = 0
    held: object = None
    target_pad: object = None
    object_colors: list = field(default_factory=list)

    @property
    def finished_waypoints(self):
        return self.cursor >= len(self.waypoints)

    @property
    def next_waypoint(self):
        if self.finished_waypoints:
            return self.waypoints[-1]
        return self.waypoints[self.cursor]

    def copy(self):
        return copy.deepcopy(self)


# -----------------------------------------------------------------------------
def _sample_xy(rng, extent=LAYOUT_EXTENT):
    return rng.uniform(-extent, extent, size=2)


def sample_scene(task, rng):
    """
    Sample a new object and waypoint layout

    Parameters
    ----------
    task : str
        `reach_place` or `reach`
    rng : numpy.random.Generator

    Returns
    -------
    SceneState
    """

    gripper = GRIPPER_START + rng.uniform(
        -GRIPPER_START_NOISE, GRIPPER_START_NOISE, size=3)
    cup = np.append(_sample_xy(rng), OBJECT_REST_HEIGHT)

    if task == "reach":
        waypoints = [Waypoint(cup + np.array([0.0, 0.0, 0.1]), grasp=False)]
        return SceneState(
            gripper=gripper, grasped=False, objects=[cup],
            waypoints=waypoints, object_colors=[OBJECT_COLORS[0]])

    if task != "reach_place":
        raise ValueError("Unknown task '{}'".format(task))

    pad = np.append(_sample_xy(rng), 0.0)
    while np.linalg.norm(pad[:2] - cup[:2]) < MIN_PLACE_DISTANCE:
        pad = np.append(_sample_xy(rng), 0.0)

    # The distractor only shares the table, it has no waypoint
    distractor = np.append(_sample_xy(rng), OBJECT_REST_HEIGHT)

    waypoints = [
        Waypoint(cup.copy(), grasp=True),
        Waypoint(pad + np.array([0.0, 0.0, PLACE_LIFT]), grasp=True),
    ]
    return SceneState(
        gripper=gripper, grasped=False, objects=[cup, distractor],
        waypoints=waypoints, target_pad=pad,
        object_colors=list(OBJECT_COLORS))


# -----------------------------------------------------------------------------
def update_grasp(scene, close):
    """
    Apply the grasp command to the scene in place

    Closing picks up the nearest object within the grasp radius. Opening
    drops the held object onto the table below the gripper.
    """

    if close and not scene.grasped:
        distances = [np.linalg.norm(scene.gripper - position)
                     for position in scene.objects]
        if distances and min(distances) <= GRASP_RADIUS:
            scene.held = int(np.argmin(distances))
            scene.grasped = True
    elif not close and scene.grasped:
        dropped = scene.objects[scene.held].copy()
        dropped[2] = OBJECT_REST_HEIGHT
        scene.objects[scene.held] = dropped
        scene.held = None
        scene.grasped = False

    if scene.grasped:
        scene.objects[scene.held] = scene.gripper.copy()


def scripted_expert_action(scene, max_delta=0.05):
    """
    Proportional controller toward the next waypoint

    The translation saturates at one full step per axis. The grasp bit is
    closed while holding, and when the waypoint asks for a grasp and this
    step lands on it.

    Parameters
    ----------
    scene : SceneState
    max_delta : float
        Gripper displacement of a unit action component

    Returns
    -------
    ndarray of shape (4,)
    """

    waypoint = scene.next_waypoint
    delta = waypoint.position - scene.gripper
    move = np.clip(delta / max_delta, -1.0, 1.0)
    lands = bool(np.all(np.abs(delta) <= max_delta))
    close = waypoint.grasp and (scene.grasped or lands)
    return np.append(move, 1.0 if close else -1.0).astype(np.float32)

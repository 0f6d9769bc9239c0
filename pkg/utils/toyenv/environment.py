"""
Multi-view toy manipulation environment

One instance owns one scene and one random generator. Instances share no
state, a collector thread may step its own instance without locking.
"""

from dataclasses import dataclass
import logging

import gymnasium
import numpy as np

from utils.exceptions import EpisodeFinishedError
from utils.toyenv.camera import RandomizationSpec
from utils.toyenv.camera import WRIST_VIEW
from utils.toyenv.camera import sample_camera_pose
from utils.toyenv.render import IMAGE_SIDES
from utils.toyenv.render import render_view
from utils.toyenv.scene import Workspace
from utils.toyenv.scene import sample_scene
from utils.toyenv.scene import scripted_expert_action
from utils.toyenv.scene import update_grasp


ACTION_SIZE = 4


@dataclass
class MultiViewObservation:
    """
    Images of all active views rendered from the same scene

    `images` has shape (V, side, side, 3) with values in [0, 1], in the order
    of `views`. `poses` maps orbit views to their episode `CameraPose`.
    """

    images: np.ndarray
    views: tuple
    poses: dict

    def view(self, name):
        return self.images[self.views.index(name)]


@dataclass
class Transition:
    observation: MultiViewObservation
    action: np.ndarray
    reward: float
    is_first: bool = False
    is_last: bool = False
    is_terminal: bool = False
    success: bool = False

    @classmethod
    def first(cls, observation):
        """Reset step with zero action and zero reward"""
        return cls(observation=observation,
                   action=np.zeros(ACTION_SIZE, dtype=np.float32),
                   reward=0.0, is_first=True)


class ToyManipulationEnv():
    """
    Procedurally rendered reach and place environment

    Parameters
    ----------
    task : str
        `reach_place` or `reach`
    views : sequence of str
        Active view names, images are returned in this order
    image_size : int
        Image side, 64 or 96
    randomization : str
        Level of the camera randomization of the orbit views
    max_episode_length : int
    seed : int
        Seed of the generator used by `reset` without an explicit rng
    waypoint_tolerance, max_delta : float
    workspace_half_extent, workspace_height : float
    """

    logger = logging.getLogger(__name__).getChild("ToyManipulationEnv")

    def __init__(self, task="reach_place", views=("front", "wrist"),
                 image_size=64, randomization="none", max_episode_length=150,
                 seed=0, waypoint_tolerance=0.05, max_delta=0.05,
                 workspace_half_extent=0.5, workspace_height=0.5):

        if image_size not in IMAGE_SIDES:
            raise ValueError("Image side must be one of {}, got {}".format(
                IMAGE_SIDES, image_size))
        if not views:
            raise ValueError("At least one view is required")

        self.task = task
        self.views = tuple(views)
        self.image_size = image_size
        self.randomization = RandomizationSpec.from_level(randomization)
        self.max_episode_length = max_episode_length
        self.waypoint_tolerance = waypoint_tolerance
        self.max_delta = max_delta
        self.workspace = Workspace(workspace_half_extent, workspace_height)

        self.rng = np.random.default_rng(seed)
        self.action_space = gymnasium.spaces.Box(
            low=-1.0, high=1.0, shape=(ACTION_SIZE,), dtype=np.float32,
            seed=seed)
        self.observation_space = gymnasium.spaces.Box(
            low=0.0, high=1.0,
            shape=(len(self.views), image_size, image_size, 3),
            dtype=np.float32)

        self.scene = None
        self.poses = {}
        self.done = True

    @classmethod
    def from_config(cls, config, **overrides):
        """
        Build an environment from the `env` section of a RunConfig

        Keyword overrides replace single constructor arguments, e.g. the
        seed of one of several collector environments.
        """
        section = config.section("env")
        kwargs = {key: section[key] for key in (
            "task", "views", "image_size", "randomization",
            "max_episode_length", "seed", "waypoint_tolerance", "max_delta",
            "workspace_half_extent", "workspace_height")}
        kwargs.update(overrides)
        return cls(**kwargs)

    # -------------------------------------------------------------------------
    def reset(self, rng=None):
        """
        Start a new episode

        A new layout is sampled and one camera pose per orbit view is drawn
        and kept for the whole episode.

        Parameters
        ----------
        rng : numpy.random.Generator or None
            Generator for this episode, defaults to the one of the instance

        Returns
        -------
        MultiViewObservation
        """

        rng = self.rng if rng is None else rng
        self.scene = sample_scene(self.task, rng)
        self.poses = {view: sample_camera_pose(self.randomization, rng)
                      for view in self.views if view != WRIST_VIEW}
        self.done = False
        return self.observe()

    def observe(self):
        """Render all active views of the current scene"""
        images = np.stack([
            render_view(self.scene, self.poses.get(view), self.image_size,
                        view=view)
            for view in self.views])
        return MultiViewObservation(
            images=images, views=self.views, poses=dict(self.poses))

    def reward(self):
        """Negative normalized distance beyond the tolerance to the next waypoint"""
        distance = np.linalg.norm(
            self.scene.gripper - self.scene.next_waypoint.position)
        excess = max(0.0, distance - self.waypoint_tolerance)
        return -excess / self.workspace.diagonal

    def step(self, action):
        """
        Apply one action

        Parameters
        ----------
        action : array-like of shape (4,)
            Relative gripper move in units of `max_delta` and a grasp logit,
            components in [-1, 1]

        Returns
        -------
        Transition

        Raises
        ------
        EpisodeFinishedError
            When the episode has ended or was never started
        """

        if self.done:
            raise EpisodeFinishedError(
                "step() called on a finished episode, call reset() first")

        action = np.asarray(action, dtype=np.float32).reshape(-1)
        if action.shape != (ACTION_SIZE,):
            raise ValueError("Expected an action of size {}, got {}".format(
                ACTION_SIZE, action.shape))
        if not np.all(np.isfinite(action)):
            raise ValueError("Action must be finite: {}".format(action))
        action = np.clip(action, -1.0, 1.0)

        scene = self.scene
        commanded = scene.gripper + action[:3].astype(np.float64) * \
            self.max_delta
        out_of_bounds = not self.workspace.contains(commanded)
        scene.gripper = np.clip(
            commanded, self.workspace.low, self.workspace.high)
        update_grasp(scene, close=bool(action[3] > 0))
        scene.step_count += 1

        reward = self.reward()
        waypoint = scene.next_waypoint
        distance = np.linalg.norm(scene.gripper - waypoint.position)
        if distance <= self.waypoint_tolerance and \
                scene.grasped == waypoint.grasp:
            scene.cursor += 1

        success = scene.finished_waypoints
        is_terminal = success or out_of_bounds
        is_last = is_terminal or scene.step_count >= self.max_episode_length
        self.done = is_last
        if out_of_bounds:
            self.logger.debug("Gripper commanded outside the workspace")

        return Transition(
            observation=self.observe(), action=action, reward=float(reward),
            is_first=False, is_last=is_last, is_terminal=is_terminal,
            success=success)

    # -------------------------------------------------------------------------
    def expert_action(self):
        return scripted_expert_action(self.scene, self.max_delta)

    def sample_action(self):
        return self.action_space.sample()

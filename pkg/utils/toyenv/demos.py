"""
Scripted demonstrations and their on-disk format

Every exported episode is one directory:

* `<view>_<step>.png` : one RGB frame per view and step
* `steps.csv` : step, action[4], reward and the four flags per step
* `poses.json` : the camera pose of every orbit view
"""

import csv
import json
import logging
import os
import re

import numpy as np
from PIL import Image

from utils.exceptions import DemonstrationFormatError
from utils.toyenv.camera import CameraPose
from utils.toyenv.environment import Transition
from utils.toyenv.episode import Episode
from utils.toyenv.episode import FLAGS


STEPS_FILENAME = "steps.csv"
POSES_FILENAME = "poses.json"
STEP_COLUMNS = ("step", "a0", "a1", "a2", "a3", "reward") + FLAGS
EPISODE_DIR_PATTERN = re.compile(r"^episode_\d+$")


# -----------------------------------------------------------------------------
def run_episode(env, policy, rng=None):
    """
    Roll out one episode

    Parameters
    ----------
    env : ToyManipulationEnv
    policy : callable
        Called with the environment, returns a 4-vector action
    rng : numpy.random.Generator or None
        Passed to `env.reset`

    Returns
    -------
    Episode
    """

    transitions = [Transition.first(env.reset(rng))]
    while not transitions[-1].is_last:
        transitions.append(env.step(policy(env)))
    return Episode.from_transitions(transitions)


def expert_policy(env):
    return env.expert_action()


def collect_expert_episodes(env, count, successful_only=True,
                            max_attempts=None, killer=None):
    """
    Record scripted expert episodes

    Parameters
    ----------
    env : ToyManipulationEnv
    count : int
        Number of episodes to return
    successful_only : bool
        Drop episodes where the expert did not finish the task
    max_attempts : int or None
        Upper bound of rollouts, defaults to twice `count`
    killer : GracefulKiller or None
        Stops the collection early when a signal was received

    Returns
    -------
    list of Episode
    """

    logger = logging.getLogger(__name__).getChild("collect_expert_episodes")
    max_attempts = 2 * count if max_attempts is None else max_attempts

    episodes = []
    attempts = 0
    while len(episodes) < count and attempts < max_attempts:
        if killer is not None and killer.kill_now:
            logger.warning("Demonstration collection interrupted")
            break
        attempts += 1
        episode = run_episode(env, expert_policy)
        if successful_only and not episode.succeeded:
            logger.warning("Expert failed in attempt {}".format(attempts))
            continue
        episodes.append(episode)
        logger.debug("Expert episode {} with {} steps".format(
            len(episodes), len(episode)))

    logger.info("Collected {} expert episodes in {} attempts".format(
        len(episodes), attempts))
    return episodes


# -----------------------------------------------------------------------------
def _frame_filename(view, step):
    return "{}_{:04d}.png".format(view, step)


def export_episode(episode, directory):
    """
    Write one episode to `directory`

    The output only depends on the episode, exporting the same episode
    twice gives byte identical files.
    """

    logger = logging.getLogger(__name__).getChild("export_episode")
    os.makedirs(directory, exist_ok=True)

    for step in range(len(episode)):
        for view_index, view in enumerate(episode.views):
            Image.fromarray(episode.images[step, view_index]).save(
                os.path.join(directory, _frame_filename(view, step)))

    with open(os.path.join(directory, STEPS_FILENAME), "w",
              encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(STEP_COLUMNS)
        for step in range(len(episode)):
            writer.writerow(
                [step]
                + [repr(float(a)) for a in episode.actions[step]]
                + [repr(float(episode.rewards[step]))]
                + [int(getattr(episode, flag)[step]) for flag in FLAGS])

    poses = {"views": list(episode.views),
             "poses": {view: pose.as_dict()
                       for view, pose in sorted(episode.poses.items())}}
    with open(os.path.join(directory, POSES_FILENAME), "w",
              encoding="utf8") as f:
        json.dump(poses, f, indent=2, sort_keys=True)

    logger.debug("Exported {} steps to {}".format(len(episode), directory))


def export_episodes(episodes, root):
    """Write episodes to `root/episode_<index>` directories"""
    directories = []
    for index, episode in enumerate(episodes):
        directory = os.path.join(root, "episode_{:04d}".format(index))
        export_episode(episode, directory)
        directories.append(directory)
    return directories


# -----------------------------------------------------------------------------
def _read_steps(path):
    try:
        with open(path, "r", encoding="utf8", newline="") as f:
            rows = list(csv.reader(f))
    except FileNotFoundError:
        raise DemonstrationFormatError("Missing {}".format(path))
    if not rows or tuple(rows[0]) != STEP_COLUMNS:
        raise DemonstrationFormatError(
            "Unexpected header in {}: {}".format(path, rows[:1]))
    rows = rows[1:]
    if not rows:
        raise DemonstrationFormatError("No steps in {}".format(path))
    try:
        for expected, row in enumerate(rows):
            if len(row) != len(STEP_COLUMNS) or int(row[0]) != expected:
                raise ValueError("bad row {}".format(expected))
        actions = np.array([[float(v) for v in row[1:5]] for row in rows],
                           dtype=np.float32)
        rewards = np.array([float(row[5]) for row in rows], dtype=np.float32)
        flags = {flag: np.array([bool(int(row[6 + i])) for row in rows])
                 for i, flag in enumerate(FLAGS)}
    except ValueError as err_msg:
        raise DemonstrationFormatError("{}: {}".format(path, err_msg))
    return actions, rewards, flags


def load_episode(directory):
    """
    Read an episode written by `export_episode`

    Raises
    ------
    DemonstrationFormatError
        If a file is missing or malformed
    """

    logger = logging.getLogger(__name__).getChild("load_episode")
    actions, rewards, flags = _read_steps(
        os.path.join(directory, STEPS_FILENAME))

    try:
        with open(os.path.join(directory, POSES_FILENAME), "r",
                  encoding="utf8") as f:
            pose_data = json.load(f)
        views = tuple(pose_data["views"])
        poses = {view: CameraPose(**values)
                 for view, values in pose_data["poses"].items()}
    except (OSError, ValueError, KeyError, TypeError) as err_msg:
        raise DemonstrationFormatError(
            "Can not read poses in {}: {}".format(directory, err_msg))

    frames = []
    for step in range(len(rewards)):
        views_at_step = []
        for view in views:
            path = os.path.join(directory, _frame_filename(view, step))
            try:
                with Image.open(path) as image:
                    views_at_step.append(np.asarray(image.convert("RGB")))
            except OSError as err_msg:
                raise DemonstrationFormatError(
                    "Can not read frame {}: {}".format(path, err_msg))
        frames.append(np.stack(views_at_step))

    logger.debug("Loaded {} steps from {}".format(len(rewards), directory))
    return Episode(views=views, images=np.stack(frames), actions=actions,
                   rewards=rewards, poses=poses, **flags)


def load_episodes(root):
    """Read every `episode_<index>` directory below `root` in index order"""
    names = sorted(name for name in os.listdir(root)
                   if EPISODE_DIR_PATTERN.match(name))
    return [load_episode(os.path.join(root, name)) for name in names]

"""
Environment stepping for the training loop

A `Collector` owns a group of environments, their unfinished episodes and
the policy carry. `CollectorPool` steps several collectors in threads.
Finished episodes are appended to the replay buffer, which serializes the
appends with its lock.
"""

from concurrent.futures import ThreadPoolExecutor
import logging

import torch

from utils.toyenv.environment import ToyManipulationEnv
from utils.toyenv.environment import Transition
from utils.toyenv.episode import Episode


class Collector():
    """
    Parameters
    ----------
    envs : list of ToyManipulationEnv
    seed : int
        Seed of the generator used by sampling policies
    """

    logger = logging.getLogger(__name__).getChild("Collector")

    def __init__(self, envs, seed=0):
        if not envs:
            raise ValueError("A collector needs at least one environment")
        self.envs = list(envs)
        self.generator = torch.Generator()
        self.generator.manual_seed(seed)
        self.transitions = [[] for _ in self.envs]
        self.carry = None

    def reset(self):
        self.transitions = [[Transition.first(env.reset())]
                            for env in self.envs]
        self.carry = None

    def last_transitions(self):
        return [steps[-1] for steps in self.transitions]


def collect_step(collector, policy, replay=None):
    """
    Step every environment of a collector once

    The policy sees the last transition of every environment. Episodes that
    end are appended to the replay buffer and the environment is reset, its
    reset transition is the next `is_first` input of the policy.

    Parameters
    ----------
    collector : Collector
    policy : object with `act`
    replay : EpisodeBuffer or None

    Returns
    -------
    rewards : list of float
        Reward of every step taken
    episodes : list of Episode
        Episodes that ended with this step
    """

    logger = logging.getLogger(__name__).getChild("collect_step")

    if not collector.transitions[0]:
        collector.reset()

    actions, collector.carry = policy.act(
        collector.envs, collector.last_transitions(), collector.carry,
        collector.generator)

    rewards, finished = [], []
    for index, (env, action) in enumerate(zip(collector.envs, actions)):
        try:
            transition = env.step(action)
        except Exception:
            logger.exception("Environment {} failed at step {} of its "
                             "episode".format(
                                 index, len(collector.transitions[index])))
            raise
        rewards.append(transition.reward)
        collector.transitions[index].append(transition)
        if transition.is_last:
            episode = Episode.from_transitions(collector.transitions[index])
            finished.append(episode)
            if replay is not None:
                replay.add(episode)
            collector.transitions[index] = [Transition.first(env.reset())]
    return rewards, finished


class CollectorPool():
    """
    Several collectors stepped concurrently

    With one collector no thread is used and the collection is
    deterministic.
    """

    logger = logging.getLogger(__name__).getChild("CollectorPool")

    def __init__(self, collectors):
        self.collectors = list(collectors)
        self.executor = None
        if len(self.collectors) > 1:
            self.executor = ThreadPoolExecutor(
                max_workers=len(self.collectors),
                thread_name_prefix="collector")

    @classmethod
    def from_config(cls, config):
        """
        Split `trainer.num_envs` environments over `trainer.collectors`

        Environment `i` is seeded with `env.seed + i`.
        """
        num_envs = config["trainer.num_envs"]
        num_collectors = min(config["trainer.collectors"], num_envs)
        envs = [ToyManipulationEnv.from_config(
            config, seed=config["env.seed"] + i) for i in range(num_envs)]
        collectors = [
            Collector(envs[i::num_collectors], seed=config.seed + 100 + i)
            for i in range(num_collectors)]
        return cls(collectors)

    @property
    def num_envs(self):
        return sum(len(c.envs) for c in self.collectors)

    def step(self, policy, replay=None):
        """
        One step of every environment

        Returns
        -------
        rewards : list of float
        episodes : list of Episode
        """
        if self.executor is None:
            results = [collect_step(c, policy, replay)
                       for c in self.collectors]
        else:
            futures = [self.executor.submit(collect_step, c, policy, replay)
                       for c in self.collectors]
            results = [future.result() for future in futures]
        rewards = [r for result in results for r in result[0]]
        episodes = [e for result in results for e in result[1]]
        return rewards, episodes

    def close(self):
        if self.executor is not None:
            self.executor.shutdown(wait=True)

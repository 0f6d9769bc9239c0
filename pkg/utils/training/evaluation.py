"""
Policy evaluation on fresh episodes
"""

from dataclasses import dataclass
import logging

import numpy as np
import torch

from utils.toyenv.environment import ToyManipulationEnv
from utils.toyenv.environment import Transition


# Evaluation environments never share seeds with the collectors
EVAL_SEED_OFFSET = 10000


@dataclass
class EvaluationReport:
    returns: np.ndarray
    successes: np.ndarray
    lengths: np.ndarray
    randomization: str = "none"

    @property
    def episodes(self):
        return len(self.returns)

    @property
    def success_rate(self):
        return float(np.mean(self.successes)) if self.episodes else 0.0

    @property
    def mean_return(self):
        return float(np.mean(self.returns)) if self.episodes else 0.0

    @property
    def std_return(self):
        return float(np.std(self.returns)) if self.episodes else 0.0

    def summary(self):
        return ("{} episodes ({} randomization): success rate {:.3f}, "
                "return {:.3f} +- {:.3f}".format(
                    self.episodes, self.randomization, self.success_rate,
                    self.mean_return, self.std_return))


def evaluate(env, policy, episodes, seed=0, killer=None):
    """
    Run a policy for a number of episodes

    Parameters
    ----------
    env : ToyManipulationEnv
    policy : object with `act`
        Agent policies should be built with mode `mean`
    episodes : int
    seed : int
        Seed of the policy sampling generator
    killer : GracefulKiller or None

    Returns
    -------
    EvaluationReport
    """

    logger = logging.getLogger(__name__).getChild("evaluate")

    generator = torch.Generator()
    generator.manual_seed(seed)
    returns, successes, lengths = [], [], []
    for number in range(episodes):
        if killer is not None and killer.kill_now:
            logger.warning("Evaluation interrupted after {} episodes".format(
                number))
            break
        last = Transition.first(env.reset())
        carry = None
        total, steps = 0.0, 0
        while not last.is_last:
            actions, carry = policy.act([env], [last], carry, generator)
            last = env.step(actions[0])
            total += last.reward
            steps += 1
        returns.append(total)
        successes.append(last.success)
        lengths.append(steps)
        logger.debug("Episode {}: return {:.3f}, success {}".format(
            number, total, last.success))

    report = EvaluationReport(
        returns=np.array(returns), successes=np.array(successes, dtype=bool),
        lengths=np.array(lengths),
        randomization=env.randomization.level)
    logger.info(report.summary())
    return report


def make_eval_env(config, randomization=None, views=None):
    """
    Evaluation environment of a run config

    Parameters
    ----------
    randomization : str or None
        Overrides `env.randomization`, e.g. `strong` for unseen viewpoints
    views : sequence of str or None
        Overrides `env.views`
    """
    overrides = {"seed": config["env.seed"] + EVAL_SEED_OFFSET}
    if randomization is not None:
        overrides["randomization"] = randomization
    if views is not None:
        overrides["views"] = tuple(views)
    return ToyManipulationEnv.from_config(config, **overrides)

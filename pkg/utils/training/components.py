"""
Construction of the learners of one agent
"""

import logging

import torch

from agent.baselines.tcn import TcnLearner
from agent.behavior import BehaviorLearner
from agent.mvmae.learner import MvmaeLearner
from agent.worldmodel import WorldModelLearner
from utils.exceptions import ConfigError
from utils.toyenv.environment import ACTION_SIZE


REPRESENTATION_LEARNERS = {
    MvmaeLearner.kind: MvmaeLearner,
    TcnLearner.kind: TcnLearner,
}


def resolve_device(name):
    """Fall back to the CPU when CUDA is requested but not available"""
    logger = logging.getLogger(__name__).getChild("resolve_device")
    if name.startswith("cuda") and not torch.cuda.is_available():
        logger.warning("CUDA is not available, training on the CPU")
        return "cpu"
    return name


def make_representation_learner(config, device="cpu"):
    """Representation learner selected by `representation.kind`"""
    kind = config["representation.kind"]
    try:
        learner_class = REPRESENTATION_LEARNERS[kind]
    except KeyError:
        raise ConfigError("representation.kind",
                          "unknown learner '{}'".format(kind))
    return learner_class(config, device=device)


class AgentComponents():
    """
    Representation learner, world model and actor-critic of one agent

    The world model sees the tokens of the control views, its token count is
    fixed by the number of control views.

    Parameters
    ----------
    config : RunConfig
    device : str or None
        Defaults to `trainer.device`
    """

    def __init__(self, config, device=None):
        self.device = resolve_device(device or config["trainer.device"])
        self.control_views = config.control_views
        self.representation = make_representation_learner(
            config, self.device)
        num_tokens = len(self.control_views) * \
            self.representation.tokens_per_view
        self.world_model = WorldModelLearner(
            config, self.representation.token_width, num_tokens,
            device=self.device)
        self.behavior = BehaviorLearner(
            config, self.world_model.network.feature_size, ACTION_SIZE,
            device=self.device)

    def state_dict(self):
        return {
            "representation": self.representation.state_dict(),
            "world_model": self.world_model.state_dict(),
            "behavior": self.behavior.state_dict(),
        }

    def load_state_dict(self, state):
        self.representation.load_state_dict(state["representation"])
        self.world_model.load_state_dict(state["world_model"])
        self.behavior.load_state_dict(state["behavior"])

"""
Helper Functions for Testing
"""

import logging

import numpy as np
import torch

from utils.runconfig.runconfig import RunConfig
from utils.toyenv.episode import Episode


# Miniature sizes, everything else keeps the desk defaults
TINY_VALUES = {
    "env.task": "reach",
    "env.max_episode_length": 30,
    "mvmae.conv_channels": [4, 4, 8, 8],
    "mvmae.width": 8,
    "mvmae.encoder_depth": 1,
    "mvmae.encoder_heads": 2,
    "mvmae.decoder_depth": 1,
    "mvmae.decoder_heads": 2,
    "mvmae.video_length": 2,
    "mvmae.batch_size": 2,
    "mvmae.warmup_steps": 0,
    "worldmodel.width": 8,
    "worldmodel.encoder_depth": 1,
    "worldmodel.encoder_heads": 2,
    "worldmodel.decoder_depth": 1,
    "worldmodel.decoder_heads": 2,
    "worldmodel.deter": 8,
    "worldmodel.hidden": 8,
    "worldmodel.stoch_vars": 2,
    "worldmodel.stoch_classes": 3,
    "behavior.hidden": 8,
    "behavior.layers": 1,
    "behavior.horizon": 3,
    "trainer.total_env_steps": 16,
    "trainer.num_envs": 1,
    "trainer.collectors": 1,
    "trainer.train_ratio": 0.25,
    "trainer.ae_init_steps": 2,
    "trainer.wm_batch_size": 2,
    "trainer.expert_batch_size": 1,
    "trainer.sequence_length": 4,
    "trainer.expert_demos": 1,
    "trainer.replay_capacity": 1000,
    "trainer.log_every": 8,
    "trainer.eval_every": 16,
    "trainer.eval_episodes": 1,
    "trainer.checkpoint_every": 16,
    "tcn.min_gap": 3,
    "tcn.batch_size": 2,
}


def tiny_config(**updates):
    """
    Desk config shrunk to networks of width 8 and episodes of at most 30 steps

    Keyword arguments use `__` for the dot, e.g. `mvmae__mask_ratio=0.5`.
    """
    values = dict(TINY_VALUES)
    values.update({key.replace("__", "."): value
                   for key, value in updates.items()})
    return RunConfig.from_profile("desk").replace(values)


def make_episode(length, views=("front", "wrist"), side=64, seed=0,
                 first_reward=0.0):
    """
    Synthetic episode with random images and step numbered rewards

    The reward of step `t` is `-t / 100`, the first action is zero.
    """
    logger = logging.getLogger("testing_control")
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(length, len(views), side, side, 3),
                          dtype=np.uint8)
    actions = rng.uniform(-1, 1, size=(length, 4)).astype(np.float32)
    actions[0] = 0.0
    rewards = -np.arange(length, dtype=np.float32) / 100.0
    rewards[0] = first_reward
    is_first = np.zeros(length, dtype=bool)
    is_first[0] = True
    is_last = np.zeros(length, dtype=bool)
    is_last[-1] = True
    logger.debug("Synthetic episode of {} steps".format(length))
    return Episode(
        views=tuple(views), images=images, actions=actions, rewards=rewards,
        is_first=is_first, is_last=is_last,
        is_terminal=np.zeros(length, dtype=bool),
        success=np.zeros(length, dtype=bool))


class _LossModule(torch.nn.Module):

    def __init__(self, network, loss):
        super().__init__()
        self.network = network
        self.loss = loss

    def forward(self):
        return self.loss(self.network)


def parameter_gradcheck(network, names, loss):
    """
    Finite difference check of a loss with respect to network parameters

    Parameters
    ----------
    network : torch.nn.Module
        Already converted to float64
    names : sequence of str
        Parameter names as in `network.named_parameters()`
    loss : callable
        `loss(network)` returns a scalar tensor

    Returns
    -------
    bool
    """
    module = _LossModule(network, loss)
    parameters = dict(network.named_parameters())
    values = tuple(parameters[name].detach().clone().requires_grad_()
                   for name in names)
    keys = ["network." + name for name in names]

    def evaluated(*replaced):
        return torch.func.functional_call(module, dict(zip(keys, replaced)),
                                          args=())

    return torch.autograd.gradcheck(evaluated, values)


def assert_same_state(testcase, first, second, path="state"):
    """
    Assert two nested state dicts are equal, tensors and arrays bitwise
    """
    if isinstance(first, dict):
        testcase.assertEqual(sorted(first), sorted(second), path)
        for key in first:
            assert_same_state(testcase, first[key], second[key],
                              "{}.{}".format(path, key))
    elif isinstance(first, (list, tuple)):
        testcase.assertEqual(len(first), len(second), path)
        for number, (a, b) in enumerate(zip(first, second)):
            assert_same_state(testcase, a, b, "{}[{}]".format(path, number))
    elif isinstance(first, torch.Tensor):
        testcase.assertTrue(torch.equal(first, second), path)
    elif isinstance(first, np.ndarray):
        np.testing.assert_array_equal(first, second, err_msg=path)
    else:
        testcase.assertEqual(first, second, path)

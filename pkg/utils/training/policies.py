"""
Policies that drive a group of environments

Every policy offers `act(envs, transitions, carry=None, generator=None)`:

* `envs` are the environment instances of a collector
* `transitions` the last transition of each of them
* `carry` the state the policy returned at the previous call, or None

It returns the actions as an array of shape (N, 4) and the new carry.
"""

import numpy as np
import torch

from agent.behavior import policy_act
from agent.worldmodel import posterior_update


class ExpertPolicy():
    """Scripted expert of the environment"""

    name = "expert"

    def act(self, envs, transitions, carry=None, generator=None):
        return np.stack([env.expert_action() for env in envs]), None


class RandomPolicy():
    """Uniform samples of the action space"""

    name = "random"

    def act(self, envs, transitions, carry=None, generator=None):
        return np.stack([env.sample_action() for env in envs]), None


class AgentPolicy():
    """
    Encoder, world model posterior and actor

    The carry is the posterior state of every environment. It is reset where
    a transition starts an episode.

    Parameters
    ----------
    components : AgentComponents
    views : sequence of str or None
        Views fed to the world model, the control views by default. Any
        non-empty subset works, e.g. one random view at evaluation.
    mode : str
        `sample` for collection, `mean` for evaluation. The mean policy
        also takes the most likely posterior state and acts
        deterministically.
    """

    name = "agent"

    def __init__(self, components, views=None, mode="sample"):
        self.components = components
        self.views = list(views or components.control_views)
        self.mode = mode

    def act(self, envs, transitions, carry=None, generator=None):
        world_model = self.components.world_model.network
        actor = self.components.behavior.actor
        device = self.components.world_model.device

        observation_views = transitions[0].observation.views
        slots = [observation_views.index(view) for view in self.views]
        images = np.stack([t.observation.images[slots] for t in transitions])
        actions = torch.as_tensor(
            np.stack([t.action for t in transitions]), dtype=torch.float32,
            device=device)
        is_first = torch.as_tensor([t.is_first for t in transitions],
                                   device=device)

        if generator is not None and generator.device.type != device.type:
            # Collector generators live on the CPU
            seed = int(torch.randint(2**62, (1,), generator=generator))
            generator = torch.Generator(device=device)
            generator.manual_seed(seed)

        tokens = self.components.representation.represent(images, self.views)
        if carry is None:
            carry = world_model.initial_state(len(transitions), device)
        latent_mode = "mode" if self.mode == "mean" else "sample"
        world_model.eval()
        with torch.no_grad():
            state = posterior_update(world_model, carry, actions, tokens,
                                     is_first, mode=latent_mode,
                                     generator=generator)
            action = policy_act(actor, state.features(), self.mode, generator)
        return action.cpu().numpy(), state

"""
Actor-critic learned in imagination

The actor is trained by backpropagating lambda-returns of imagined rollouts
through the world model dynamics, plus an entropy bonus and the negative
log-likelihood of expert actions. The critic regresses the lambda-returns.
"""

from contextlib import contextmanager
from dataclasses import dataclass
import copy
import logging

import torch
import torch.nn as nn
from torch.distributions import Normal
from torch.distributions import TanhTransform
from torch.distributions import TransformedDistribution

from agent.worldmodel import predict_reward
from agent.worldmodel import prior_predict
from utils.exceptions import NonFiniteLossError


ACTION_LIMIT = 1.0 - 1e-6
EXPERT_ACTION_LIMIT = 0.999


# -----------------------------------------------------------------------------
def _mlp(in_size, hidden, layers, out_size):
    modules = []
    size = in_size
    for _ in range(layers):
        modules += [nn.Linear(size, hidden), nn.LayerNorm(hidden), nn.ELU()]
        size = hidden
    modules.append(nn.Linear(size, out_size))
    return nn.Sequential(*modules)


class ActorNetwork(nn.Module):
    """Tanh-squashed Gaussian policy over latent features"""

    def __init__(self, feature_size, action_size=4, hidden=256, layers=2,
                 min_std=0.1):
        super().__init__()
        self.action_size = action_size
        self.min_std = min_std
        self.net = _mlp(feature_size, hidden, layers, 2 * action_size)

    def forward(self, features):
        """Pre-squash mean and standard deviation"""
        mean, raw_std = self.net(features).chunk(2, dim=-1)
        std = 2.0 * torch.sigmoid(raw_std / 2.0) + self.min_std
        return mean, std

    def distribution(self, features):
        mean, std = self(features)
        return TransformedDistribution(
            Normal(mean, std), [TanhTransform(cache_size=1)])


class CriticNetwork(nn.Module):
    def __init__(self, feature_size, hidden=256, layers=2):
        super().__init__()
        self.net = _mlp(feature_size, hidden, layers, 1)

    def forward(self, features):
        return self.net(features).squeeze(-1)


# -----------------------------------------------------------------------------
def policy_act(actor, features, mode="sample", generator=None):
    """
    Action of the actor for a batch of latent features

    Parameters
    ----------
    actor : ActorNetwork
    features : torch.Tensor of shape (B, F)
    mode : str
        `sample` for collection, `mean` for evaluation
    generator : torch.Generator or None

    Returns
    -------
    torch.Tensor of shape (B, A), in (-1, 1)
    """
    mean, std = actor(features)
    if mode == "mean":
        return torch.tanh(mean)
    if mode != "sample":
        raise ValueError("Unknown policy mode '{}'".format(mode))
    noise = torch.randn(mean.shape, generator=generator, device=mean.device,
                        dtype=mean.dtype)
    return torch.tanh(mean + std * noise).clamp(-ACTION_LIMIT, ACTION_LIMIT)


def action_log_prob(actor, features, actions):
    """Log-likelihood of given actions, summed over action dimensions"""
    actions = actions.clamp(-EXPERT_ACTION_LIMIT, EXPERT_ACTION_LIMIT)
    return actor.distribution(features).log_prob(actions).sum(dim=-1)


@contextmanager
def frozen(*modules):
    """Temporarily exclude the parameters of modules from autograd"""
    parameters = [p for module in modules for p in module.parameters()]
    states = [p.requires_grad for p in parameters]
    for parameter in parameters:
        parameter.requires_grad_(False)
    try:
        yield
    finally:
        for parameter, state in zip(parameters, states):
            parameter.requires_grad_(state)


# -----------------------------------------------------------------------------
@dataclass
class ImaginedRollout:
    """
    features : (H + 1, B, F) latent features of states 0..H
    actions : (H, B, A) actions 1..H
    rewards : (H, B) predicted rewards of states 1..H
    values : (H, B) target critic values of states 1..H
    entropies : (H, B) sample entropy estimate of each action
    returns : (H, B) lambda-returns, filled by `lambda_returns`
    """

    features: torch.Tensor
    actions: torch.Tensor
    rewards: torch.Tensor
    values: torch.Tensor
    entropies: torch.Tensor
    returns: torch.Tensor = None

    @property
    def horizon(self):
        return len(self.actions)


def imagine_rollout(world_model, actor, critic, start, horizon,
                    generator=None):
    """
    Roll the prior dynamics forward with the actor

    Parameters
    ----------
    world_model : WorldModelNetwork
    actor : ActorNetwork
    critic : CriticNetwork
        Evaluates the imagined states, normally the target critic
    start : LatentState of shape (B, ...)
        Posterior states of real steps
    horizon : int
        H >= 1
    generator : torch.Generator or None

    Returns
    -------
    ImaginedRollout
    """
    if horizon < 1:
        raise ValueError("Imagination horizon must be at least 1, got {}"
                         .format(horizon))

    state = start.detach()
    features = [state.features()]
    actions, rewards, entropies = [], [], []
    for _ in range(horizon):
        mean, std = actor(features[-1])
        noise = torch.randn(mean.shape, generator=generator,
                            device=mean.device, dtype=mean.dtype)
        pre_tanh = mean + std * noise
        action = torch.tanh(pre_tanh).clamp(-ACTION_LIMIT, ACTION_LIMIT)
        log_prob = Normal(mean, std).log_prob(pre_tanh) - \
            torch.log1p(-action.pow(2))
        entropies.append(-log_prob.sum(dim=-1))

        state = prior_predict(world_model, state, action, mode="sample",
                              generator=generator)
        features.append(state.features())
        actions.append(action)
        rewards.append(predict_reward(world_model, state))

    features = torch.stack(features)
    return ImaginedRollout(
        features=features,
        actions=torch.stack(actions),
        rewards=torch.stack(rewards),
        values=critic(features[1:]),
        entropies=torch.stack(entropies))


def lambda_returns(rewards, values, gamma, lam):
    """
    Lambda-returns by backward recursion

    `V_H = v_H` and `V_t = r_t + gamma * ((1 - lam) * v_{t+1} + lam * V_{t+1})`
    for `t < H`, indices 1..H along the first dimension.

    Parameters
    ----------
    rewards, values : torch.Tensor of shape (H, ...)
    gamma, lam : float in [0, 1]

    Returns
    -------
    torch.Tensor of shape (H, ...)
    """
    if rewards.shape != values.shape:
        raise ValueError("Rewards {} and values {} differ in shape".format(
            tuple(rewards.shape), tuple(values.shape)))
    if len(rewards) < 1:
        raise ValueError("Lambda-returns need at least one step")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lambda must lie in [0, 1]")

    returns = [values[-1]]
    for t in reversed(range(len(rewards) - 1)):
        returns.append(rewards[t] + gamma * (
            (1.0 - lam) * values[t + 1] + lam * returns[-1]))
    return torch.stack(returns[::-1])


def _trained_steps(sequence):
    """Steps 1..H-1 of a horizon H sequence, all steps when H = 1"""
    return sequence[:-1] if len(sequence) > 1 else sequence


def critic_loss(values, returns):
    """
    Half squared error of the values against the stop-gradient returns

    Parameters
    ----------
    values, returns : torch.Tensor of shape (H, ...)
    """
    error = _trained_steps(values) - _trained_steps(returns).detach()
    return 0.5 * error.pow(2).mean()


def actor_loss(returns, entropies, entropy_scale, bc_nll=None, bc_weight=0.0):
    """
    `-V - eta * entropy + bc_weight * expert NLL`

    Parameters
    ----------
    returns : torch.Tensor of shape (H, B)
        Lambda-returns with gradient through the dynamics
    entropies : torch.Tensor of shape (H, B)
    entropy_scale : float
    bc_nll : torch.Tensor or None
        Mean negative log-likelihood of expert actions
    bc_weight : float
    """
    loss = -_trained_steps(returns).mean() - \
        entropy_scale * _trained_steps(entropies).mean()
    if bc_weight > 0:
        if bc_nll is None:
            raise ValueError("Behavior cloning needs an expert batch")
        loss = loss + bc_weight * bc_nll
    return loss


def update_target_critic(critic, target, blend):
    """`target <- (1 - blend) * target + blend * critic`"""
    if not 0.0 < blend <= 1.0:
        raise ValueError("Target blend must lie in (0, 1], got {}".format(
            blend))
    with torch.no_grad():
        for online, slow in zip(critic.parameters(), target.parameters()):
            if blend == 1.0:
                slow.copy_(online)
            else:
                slow.lerp_(online, blend)


# -----------------------------------------------------------------------------
class BehaviorLearner():
    """
    Actor, critic and slow target critic with their optimizers

    Parameters
    ----------
    config : RunConfig
    feature_size : int
        Size of the world model latent features
    device : str
    """

    logger = logging.getLogger(__name__).getChild("BehaviorLearner")

    def __init__(self, config, feature_size, action_size=4, device="cpu"):
        section = config.section("behavior")
        self.device = torch.device(device)
        self.actor = ActorNetwork(
            feature_size, action_size, section["hidden"], section["layers"],
            section["min_std"]).to(self.device)
        self.critic = CriticNetwork(
            feature_size, section["hidden"], section["layers"]).to(self.device)
        self.target_critic = copy.deepcopy(self.critic)
        self.target_critic.requires_grad_(False)

        self.horizon = section["horizon"]
        self.gamma = section["gamma"]
        self.return_lambda = section["return_lambda"]
        self.entropy_scale = section["entropy_scale"]
        self.bc_weight = section["bc_weight"]
        self.target_blend = section["target_blend"]
        self.target_hard_every = section["target_hard_every"]
        self.grad_clip = config["trainer.grad_clip"]

        self.actor_optimizer = torch.optim.Adam(
            self.actor.parameters(), lr=section["actor_lr"], eps=1e-5)
        self.critic_optimizer = torch.optim.Adam(
            self.critic.parameters(), lr=section["critic_lr"], eps=1e-5)
        self.generator = torch.Generator(device=self.device)
        self.generator.manual_seed(config.seed + 1)
        self.updates = 0

    def act(self, features, mode="sample"):
        with torch.no_grad():
            return policy_act(self.actor, features, mode, self.generator)

    def _step(self, loss, module, optimizer):
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        norm = None
        if self.grad_clip > 0:
            norm = float(torch.nn.utils.clip_grad_norm_(
                module.parameters(), self.grad_clip))
        optimizer.step()
        return norm

    def update(self, world_model, start, expert_states=None,
               expert_actions=None):
        """
        One actor and one critic step

        Parameters
        ----------
        world_model : WorldModelNetwork
            Its parameters receive no update here
        start : LatentState of shape (B, ...)
            Posterior states of replay steps
        expert_states : LatentState of shape (E, ...) or None
            Posterior states of expert steps
        expert_actions : torch.Tensor of shape (E, A) or None
            Expert action taken in each of these states

        Returns
        -------
        dict
        """

        with frozen(world_model, self.target_critic):
            rollout = imagine_rollout(
                world_model, self.actor, self.target_critic, start,
                self.horizon, self.generator)
            rollout.returns = lambda_returns(
                rollout.rewards, rollout.values, self.gamma,
                self.return_lambda)

            bc_nll = None
            if self.bc_weight > 0 and expert_states is not None and \
                    len(expert_actions):
                bc_nll = -action_log_prob(
                    self.actor, expert_states.detach().features(),
                    expert_actions).mean()
            loss_actor = actor_loss(
                rollout.returns, rollout.entropies, self.entropy_scale,
                bc_nll, self.bc_weight if bc_nll is not None else 0.0)

        values = self.critic(rollout.features[1:].detach())
        loss_critic = critic_loss(values, rollout.returns)

        metrics = {
            "actor/loss": float(loss_actor.detach()),
            "actor/entropy": float(rollout.entropies.detach().mean()),
            "critic/loss": float(loss_critic.detach()),
            "rollout/mean_return": float(rollout.returns.detach().mean()),
            "rollout/mean_value": float(values.detach().mean()),
            "rollout/mean_reward": float(rollout.rewards.detach().mean()),
        }
        if bc_nll is not None:
            metrics["actor/bc_nll"] = float(bc_nll.detach())
        for name in ("actor/loss", "critic/loss"):
            if not torch.isfinite(torch.tensor(metrics[name])):
                self.logger.error("Non-finite {}: {}".format(name, metrics))
                raise NonFiniteLossError(name, metrics)

        self._step(loss_actor, self.actor, self.actor_optimizer)
        self._step(loss_critic, self.critic, self.critic_optimizer)
        self.updates += 1

        if self.target_hard_every > 0:
            if self.updates % self.target_hard_every == 0:
                update_target_critic(self.critic, self.target_critic, 1.0)
        else:
            update_target_critic(self.critic, self.target_critic,
                                 self.target_blend)
        return metrics

    def state_dict(self):
        return {
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "target_critic": self.target_critic.state_dict(),
            "actor_optimizer": self.actor_optimizer.state_dict(),
            "critic_optimizer": self.critic_optimizer.state_dict(),
            "generator": self.generator.get_state(),
            "updates": self.updates,
        }

    def load_state_dict(self, state):
        self.actor.load_state_dict(state["actor"])
        self.critic.load_state_dict(state["critic"])
        self.target_critic.load_state_dict(state["target_critic"])
        self.actor_optimizer.load_state_dict(state["actor_optimizer"])
        self.critic_optimizer.load_state_dict(state["critic_optimizer"])
        self.generator.set_state(state["generator"])
        self.updates = state["updates"]

"""
Recurrent state-space world model over frozen autoencoder tokens

The latent state has a deterministic recurrent part and a set of
categorical variables. The posterior sees the pooled tokens of the current
observation, the prior only the previous state and action. A token decoder
reconstructs the observation tokens and a reward head predicts the reward
from the latent state.
"""

from dataclasses import dataclass
import logging

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.autograd import Function

from agent.mvmae.network import transformer_blocks
from utils.exceptions import NonFiniteLossError


LATENT_MODES = ("sample", "mode", "probs")


# -----------------------------------------------------------------------------
class OneHotCategoricalSTE(Function):
    """
    Draw one-hot samples and pass the gradient to the probabilities

    The forward value is exactly one-hot, the backward pass treats the
    sample as if it were the probabilities themselves.
    """

    @staticmethod
    def forward(ctx, probs, generator=None):
        classes = probs.shape[-1]
        flat = probs.detach().reshape(-1, classes)
        index = torch.multinomial(flat, 1, generator=generator).squeeze(-1)
        return F.one_hot(index, classes).reshape(probs.shape).to(probs.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output, None


class OneHotArgmaxSTE(Function):
    """Most likely class as one-hot, gradient passed to the probabilities"""

    @staticmethod
    def forward(ctx, probs):
        classes = probs.shape[-1]
        return F.one_hot(probs.argmax(dim=-1), classes).to(probs.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output


def sample_stoch(logits, mode="sample", generator=None):
    """
    Stochastic part of a latent state from categorical logits

    Parameters
    ----------
    logits : torch.Tensor of shape (..., K, C)
    mode : str
        `sample` draws, `mode` takes the most likely class, `probs` returns
        the probabilities themselves (smooth, for gradient checks)
    generator : torch.Generator or None
    """
    probs = torch.softmax(logits, dim=-1)
    if mode == "sample":
        return OneHotCategoricalSTE.apply(probs, generator)
    if mode == "mode":
        return OneHotArgmaxSTE.apply(probs)
    if mode == "probs":
        return probs
    raise ValueError("Unknown latent mode '{}'".format(mode))


def categorical_kl(logits_q, logits_p):
    """
    Closed form KL(q || p) summed over the K categorical variables

    Parameters
    ----------
    logits_q, logits_p : torch.Tensor of shape (..., K, C)

    Returns
    -------
    torch.Tensor of shape (...)
    """
    log_q = torch.log_softmax(logits_q, dim=-1)
    log_p = torch.log_softmax(logits_p, dim=-1)
    kl = (log_q.exp() * (log_q - log_p)).sum(dim=-1)
    return kl.clamp(min=0.0).sum(dim=-1)


def categorical_entropy(logits):
    log_probs = torch.log_softmax(logits, dim=-1)
    return -(log_probs.exp() * log_probs).sum(dim=-1).sum(dim=-1)


def balanced_kl(post_logits, prior_logits, balance=0.8, free_nats=1.0):
    """
    KL balancing with a per-step free nats floor

    `balance` weights the term that trains the prior (posterior held
    fixed), `1 - balance` the term that regularizes the posterior.

    Returns
    -------
    loss : torch.Tensor of shape (...)
        Per-step KL loss
    kl : torch.Tensor of shape (...)
        Per-step KL value without balancing or floor
    """
    kl_prior = categorical_kl(post_logits.detach(), prior_logits)
    kl_post = categorical_kl(post_logits, prior_logits.detach())
    loss = balance * kl_prior.clamp(min=free_nats) + \
        (1.0 - balance) * kl_post.clamp(min=free_nats)
    return loss, kl_post.detach()


# -----------------------------------------------------------------------------
@dataclass
class LatentState:
    """
    Latent state of a batch, optionally with leading time dimension

    deter : (..., deter)
    stoch : (..., K, C) one-hot samples (probabilities in `probs` mode)
    logits : (..., K, C)
    """

    deter: torch.Tensor
    stoch: torch.Tensor
    logits: torch.Tensor

    def features(self):
        return torch.cat([self.deter, self.stoch.flatten(-2)], dim=-1)

    def detach(self):
        return LatentState(self.deter.detach(), self.stoch.detach(),
                           self.logits.detach())

    def flatten(self):
        """Merge the leading (T, B) dimensions into one batch dimension"""
        return LatentState(
            self.deter.reshape(-1, self.deter.shape[-1]),
            self.stoch.reshape(-1, *self.stoch.shape[-2:]),
            self.logits.reshape(-1, *self.logits.shape[-2:]))

    def __getitem__(self, index):
        return LatentState(self.deter[index], self.stoch[index],
                           self.logits[index])

    @classmethod
    def stack(cls, states, dim=0):
        return cls(torch.stack([s.deter for s in states], dim=dim),
                   torch.stack([s.stoch for s in states], dim=dim),
                   torch.stack([s.logits for s in states], dim=dim))


def _mlp(in_size, hidden, out_size):
    return nn.Sequential(
        nn.Linear(in_size, hidden), nn.LayerNorm(hidden), nn.ELU(),
        nn.Linear(hidden, out_size))


class WorldModelNetwork(nn.Module):
    """
    Parameters
    ----------
    token_width : int
        Width of the frozen autoencoder tokens
    num_tokens : int
        Tokens per observation, reconstructed by the decoder
    action_size : int
    width, encoder_depth, encoder_heads, decoder_depth, decoder_heads : int
        Token pre-encoder and decoder transformers
    deter, hidden : int
        Recurrent state size and hidden size of the heads
    stoch_vars, stoch_classes : int
        K categorical variables with C classes each
    """

    def __init__(self, token_width, num_tokens, action_size=4, width=128,
                 encoder_depth=2, encoder_heads=4, decoder_depth=2,
                 decoder_heads=4, deter=256, hidden=256, stoch_vars=16,
                 stoch_classes=16):
        super().__init__()
        self.token_width = token_width
        self.num_tokens = num_tokens
        self.action_size = action_size
        self.width = width
        self.deter_size = deter
        self.stoch_vars = stoch_vars
        self.stoch_classes = stoch_classes
        stoch_size = stoch_vars * stoch_classes
        self.feature_size = deter + stoch_size

        # Token pre-encoder
        self.token_in = nn.Linear(token_width, width)
        self.encoder_blocks = transformer_blocks(
            width, encoder_depth, encoder_heads)
        self.encoder_norm = nn.LayerNorm(width)

        # Recurrent path and latent heads
        self.recurrent_in = nn.Sequential(
            nn.Linear(stoch_size + action_size, hidden),
            nn.LayerNorm(hidden), nn.ELU())
        self.cell = nn.GRUCell(hidden, deter)
        self.prior_head = _mlp(deter, hidden, stoch_size)
        self.posterior_head = _mlp(deter + width, hidden, stoch_size)

        # Decoders
        self.decoder_in = nn.Linear(self.feature_size, width)
        self.decoder_queries = nn.Parameter(
            torch.zeros(num_tokens, width).normal_(std=0.02))
        self.decoder_blocks = transformer_blocks(
            width, decoder_depth, decoder_heads)
        self.decoder_norm = nn.LayerNorm(width)
        self.token_out = nn.Linear(width, token_width)
        self.reward_head = _mlp(self.feature_size, hidden, 1)

    @classmethod
    def from_config(cls, config, token_width, num_tokens):
        section = config.section("worldmodel")
        return cls(
            token_width=token_width, num_tokens=num_tokens,
            width=section["width"],
            encoder_depth=section["encoder_depth"],
            encoder_heads=section["encoder_heads"],
            decoder_depth=section["decoder_depth"],
            decoder_heads=section["decoder_heads"],
            deter=section["deter"], hidden=section["hidden"],
            stoch_vars=section["stoch_vars"],
            stoch_classes=section["stoch_classes"])

    def initial_state(self, batch_size, device=None, dtype=None):
        device = device or self.decoder_queries.device
        dtype = dtype or self.decoder_queries.dtype
        shape = (batch_size, self.stoch_vars, self.stoch_classes)
        return LatentState(
            deter=torch.zeros(batch_size, self.deter_size, device=device,
                              dtype=dtype),
            stoch=torch.zeros(shape, device=device, dtype=dtype),
            logits=torch.zeros(shape, device=device, dtype=dtype))

    def embed_tokens(self, tokens):
        """
        Pool a variable number of tokens into one vector

        Parameters
        ----------
        tokens : torch.Tensor of shape (B, n, token_width)

        Returns
        -------
        torch.Tensor of shape (B, width)
        """
        if tokens.shape[1] == 0:
            raise ValueError("Can not embed an empty token set")
        x = self.token_in(tokens)
        for block in self.encoder_blocks:
            x = block(x)
        return self.encoder_norm(x).mean(dim=1)

    def _logits(self, head, inputs):
        logits = head(inputs).view(-1, self.stoch_vars, self.stoch_classes)
        if not torch.isfinite(logits).all():
            raise NonFiniteLossError("wm/logits", {
                "max_abs_input": float(inputs.detach().abs().max()),
            })
        return logits


# -----------------------------------------------------------------------------
def reset_state(network, state, is_first):
    """
    Replace the state of batch entries that start a new episode

    Parameters
    ----------
    is_first : torch.Tensor of shape (B,), bool or None
    """
    if is_first is None:
        return state
    keep = (~is_first.bool()).to(state.deter.dtype)
    initial = network.initial_state(len(keep), state.deter.device,
                                    state.deter.dtype)
    return LatentState(
        deter=state.deter * keep[:, None] + initial.deter * (1 - keep[:, None]),
        stoch=state.stoch * keep[:, None, None] +
        initial.stoch * (1 - keep[:, None, None]),
        logits=state.logits * keep[:, None, None] +
        initial.logits * (1 - keep[:, None, None]))


def recurrent_step(network, prev, action):
    """Deterministic part of the next state, shared by prior and posterior"""
    x = network.recurrent_in(torch.cat([prev.stoch.flatten(-2), action], -1))
    return network.cell(x, prev.deter)


def prior_predict(network, prev, action, mode="sample", generator=None):
    """
    Predict the next latent state without an observation

    Parameters
    ----------
    network : WorldModelNetwork
    prev : LatentState of shape (B, ...)
    action : torch.Tensor of shape (B, A)
    mode : str
        See `sample_stoch`
    generator : torch.Generator or None

    Returns
    -------
    LatentState
    """
    deter = recurrent_step(network, prev, action)
    logits = network._logits(network.prior_head, deter)
    return LatentState(deter, sample_stoch(logits, mode, generator), logits)


def observe_step(network, prev, action, tokens, is_first=None, mode="sample",
                 generator=None):
    """
    Posterior and prior of one step from the same recurrent update

    Returns
    -------
    posterior, prior : LatentState
    """
    prev = reset_state(network, prev, is_first)
    if is_first is not None:
        action = action * (~is_first.bool()).to(action.dtype)[:, None]
    deter = recurrent_step(network, prev, action)
    prior_logits = network._logits(network.prior_head, deter)
    embedding = network.embed_tokens(tokens)
    post_logits = network._logits(
        network.posterior_head, torch.cat([deter, embedding], dim=-1))
    prior = LatentState(deter, sample_stoch(prior_logits, "mode"),
                        prior_logits)
    posterior = LatentState(deter, sample_stoch(post_logits, mode, generator),
                            post_logits)
    return posterior, prior


def posterior_update(network, prev, action, tokens, is_first=None,
                     mode="sample", generator=None):
    """
    Infer the latent state of an observation

    Parameters
    ----------
    network : WorldModelNetwork
    prev : LatentState
        State of the previous step
    action : torch.Tensor of shape (B, A)
        Action that led to the observation
    tokens : torch.Tensor of shape (B, n, token_width)
        Frozen tokens of the observation, any n > 0
    is_first : torch.Tensor of shape (B,) or None
        Resets `prev` and zeroes `action` where set

    Returns
    -------
    LatentState
    """
    posterior, _ = observe_step(network, prev, action, tokens, is_first,
                                mode, generator)
    return posterior


def decode_latent(network, state):
    """
    Reconstruct observation tokens and predict the reward

    Parameters
    ----------
    state : LatentState of shape (B, ...)

    Returns
    -------
    tokens : torch.Tensor of shape (B, num_tokens, token_width)
    reward : torch.Tensor of shape (B,)
    """
    features = state.features()
    x = network.decoder_in(features).unsqueeze(1) + network.decoder_queries
    for block in network.decoder_blocks:
        x = block(x)
    tokens = network.token_out(network.decoder_norm(x))
    reward = network.reward_head(features).squeeze(-1)
    return tokens, reward


def predict_reward(network, state):
    return network.reward_head(state.features()).squeeze(-1)


def observe_sequence(network, tokens, actions, is_first, start=None,
                     mode="sample", generator=None):
    """
    Posterior and prior states along sequences

    Parameters
    ----------
    tokens : torch.Tensor of shape (B, L, n, token_width)
    actions : torch.Tensor of shape (B, L, A)
        Action stored with each step, the one that led to it
    is_first : torch.Tensor of shape (B, L), bool
    start : LatentState or None
        State before the first step, zeros by default

    Returns
    -------
    posteriors, priors : LatentState of shape (B, L, ...)
    """
    batch, length = tokens.shape[:2]
    state = start if start is not None else network.initial_state(
        batch, tokens.device, tokens.dtype)
    posteriors, priors = [], []
    for t in range(length):
        state, prior = observe_step(
            network, state, actions[:, t], tokens[:, t], is_first[:, t],
            mode, generator)
        posteriors.append(state)
        priors.append(prior)
    return LatentState.stack(posteriors, dim=1), \
        LatentState.stack(priors, dim=1)


# -----------------------------------------------------------------------------
def wm_loss(network, tokens, actions, rewards, is_first, beta=1.0,
            kl_balance=0.8, free_nats=1.0, mode="sample", generator=None):
    """
    Negative variational bound of a batch of sequences

    Per step: squared token reconstruction error (summed over features,
    averaged over tokens) + squared reward error + beta times the balanced
    KL. The loss is the mean over batch and time.

    Parameters
    ----------
    network : WorldModelNetwork
    tokens : torch.Tensor of shape (B, L, n, token_width)
        Frozen autoencoder tokens
    actions : torch.Tensor of shape (B, L, A)
    rewards : torch.Tensor of shape (B, L)
    is_first : torch.Tensor of shape (B, L), bool

    Returns
    -------
    loss : torch.Tensor
    metrics : dict
    posteriors : LatentState of shape (B, L, ...)

    Raises
    ------
    NonFiniteLossError
    """

    logger = logging.getLogger(__name__).getChild("wm_loss")

    tokens = tokens.detach()
    posteriors, priors = observe_sequence(
        network, tokens, actions, is_first, mode=mode, generator=generator)

    batch, length = tokens.shape[:2]
    predicted_tokens, predicted_rewards = decode_latent(
        network, posteriors.flatten())
    predicted_tokens = predicted_tokens.view(batch, length,
                                             *predicted_tokens.shape[1:])
    predicted_rewards = predicted_rewards.view(batch, length)

    recon = (predicted_tokens - tokens).pow(2).sum(dim=-1).mean(dim=-1)
    reward_error = (predicted_rewards - rewards).pow(2)
    kl_loss, kl = balanced_kl(posteriors.logits, priors.logits, kl_balance,
                              free_nats)
    loss = (recon + reward_error + beta * kl_loss).mean()

    metrics = {
        "wm/loss": float(loss.detach()),
        "wm/kl": float(kl.mean()),
        "wm/recon": float(recon.detach().mean()),
        "wm/reward_mse": float(reward_error.detach().mean()),
        "wm/prior_entropy": float(
            categorical_entropy(priors.logits.detach()).mean()),
        "wm/posterior_entropy": float(
            categorical_entropy(posteriors.logits.detach()).mean()),
    }
    if not torch.isfinite(loss):
        logger.error("Non-finite world model loss: {}".format(metrics))
        raise NonFiniteLossError("wm/loss", metrics)
    return loss, metrics, posteriors


class WorldModelLearner():
    """
    Optimizer around a `WorldModelNetwork`

    Parameters
    ----------
    config : RunConfig
    token_width, num_tokens : int
        Shape of the representation of the control views
    device : str
    """

    logger = logging.getLogger(__name__).getChild("WorldModelLearner")

    def __init__(self, config, token_width, num_tokens, device="cpu"):
        section = config.section("worldmodel")
        self.device = torch.device(device)
        self.network = WorldModelNetwork.from_config(
            config, token_width, num_tokens).to(self.device)
        self.beta = section["beta"]
        self.kl_balance = section["kl_balance"]
        self.free_nats = section["free_nats"]
        self.grad_clip = config["trainer.grad_clip"]
        self.optimizer = torch.optim.AdamW(
            self.network.parameters(), lr=section["lr"],
            weight_decay=section["weight_decay"])
        self.generator = torch.Generator(device=self.device)
        self.generator.manual_seed(config.seed)
        self.updates = 0

    def update(self, tokens, actions, rewards, is_first):
        """
        One gradient step

        Returns
        -------
        metrics : dict
        posteriors : LatentState of shape (B, L, ...), detached
        """
        self.network.train()
        loss, metrics, posteriors = wm_loss(
            self.network, tokens, actions, rewards, is_first,
            beta=self.beta, kl_balance=self.kl_balance,
            free_nats=self.free_nats, generator=self.generator)
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if self.grad_clip > 0:
            norm = torch.nn.utils.clip_grad_norm_(
                self.network.parameters(), self.grad_clip)
            metrics["wm/grad_norm"] = float(norm)
        self.optimizer.step()
        self.updates += 1
        return metrics, posteriors.detach()

    def state_dict(self):
        return {
            "network": self.network.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "generator": self.generator.get_state(),
            "updates": self.updates,
        }

    def load_state_dict(self, state):
        self.network.load_state_dict(state["network"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.generator.set_state(state["generator"])
        self.updates = state["updates"]

"""
Time-contrastive network baseline

A ViT image encoder is trained with a triplet loss: the same timestep seen
from another view is pulled towards the anchor, a temporally distant frame
of the anchor's view is pushed away. The agent receives the average pooled
token embeddings of each view.
"""

from collections import namedtuple
import logging

import numpy as np
import torch
import torch.nn as nn

from agent.mvmae.embeddings import sincos_embedding
from agent.mvmae.network import ConvStem
from agent.mvmae.network import PATCH_SIZE
from agent.mvmae.network import normalize_images
from agent.mvmae.network import transformer_blocks
from utils.toyenv.episode import to_float


Triplet = namedtuple(
    "Triplet", ["anchor_view", "positive_view", "anchor_step", "negative_step"])


# -----------------------------------------------------------------------------
def sample_triplet(episode_length, num_views, rng, min_gap=30):
    """
    Draw anchor, positive and negative frame indices of one episode

    The positive shares the anchor's timestep in another view, the
    negative shares the anchor's view at least `min_gap` steps away.

    Parameters
    ----------
    episode_length : int
    num_views : int
        At least 2
    rng : numpy.random.Generator
    min_gap : int

    Returns
    -------
    Triplet or None
        None when the episode is shorter than `min_gap + 1`
    """

    if num_views < 2:
        raise ValueError("Triplets need at least two views")
    if episode_length < min_gap + 1:
        return None

    steps = np.arange(episode_length)
    anchors = steps[(steps + min_gap <= episode_length - 1) |
                    (steps - min_gap >= 0)]
    anchor_step = int(rng.choice(anchors))
    negatives = steps[np.abs(steps - anchor_step) >= min_gap]
    negative_step = int(rng.choice(negatives))

    anchor_view = int(rng.integers(num_views))
    others = [view for view in range(num_views) if view != anchor_view]
    positive_view = int(others[rng.integers(len(others))])
    return Triplet(anchor_view, positive_view, anchor_step, negative_step)


def tcn_loss(anchor, positive, negative, margin=0.2):
    """
    Mean triplet hinge `max(|a - p|^2 - |a - n|^2 + margin, 0)`

    Parameters
    ----------
    anchor, positive, negative : torch.Tensor of shape (..., D)
    margin : float

    Returns
    -------
    loss : torch.Tensor
        Scalar mean over the leading dimensions
    active : torch.Tensor
        Fraction of triplets violating the margin
    """
    if margin <= 0:
        raise ValueError("Triplet margin must be positive")
    d_pos = (anchor - positive).pow(2).sum(dim=-1)
    d_neg = (anchor - negative).pow(2).sum(dim=-1)
    hinge = torch.relu(d_pos - d_neg + margin)
    return hinge.mean(), (hinge > 0).float().mean()


# -----------------------------------------------------------------------------
class TcnNetwork(nn.Module):
    """ViT image encoder with a class token over conv stem features"""

    def __init__(self, image_size=64, conv_channels=(32, 64, 128, 256),
                 width=256, depth=8, heads=4):
        super().__init__()
        self.grid_size = image_size // PATCH_SIZE
        self.width = width
        self.stem = ConvStem(conv_channels)
        self.feature_proj = nn.Linear(self.stem.out_channels, width)
        self.register_buffer("pos_embed", torch.from_numpy(
            sincos_embedding(self.grid_size, width)), persistent=False)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, width).normal_(
            std=0.02))
        self.blocks = transformer_blocks(width, depth, heads)
        self.norm = nn.LayerNorm(width)

    @classmethod
    def from_config(cls, config):
        section = config.section("mvmae")
        return cls(
            image_size=config["env.image_size"],
            conv_channels=tuple(section["conv_channels"]),
            width=section["width"], depth=section["encoder_depth"],
            heads=section["encoder_heads"])

    def forward(self, images):
        """
        Parameters
        ----------
        images : torch.Tensor of shape (B, side, side, 3)
            Normalized images

        Returns
        -------
        torch.Tensor of shape (B, 1 + g * g, width)
            Class token followed by the grid tokens
        """
        x = self.feature_proj(self.stem(images)).flatten(1, 2)
        x = x + self.pos_embed
        x = torch.cat([self.cls_token.expand(len(x), -1, -1), x], dim=1)
        for block in self.blocks:
            x = block(x)
        return self.norm(x)


def tcn_encode(network, images):
    """
    Class embedding and average pooled token embedding of images

    Parameters
    ----------
    network : TcnNetwork
    images : torch.Tensor of shape (B, side, side, 3)
        Images in [0, 1]

    Returns
    -------
    cls : torch.Tensor of shape (B, width)
    pooled : torch.Tensor of shape (B, width)
    """
    x = network(normalize_images(images))
    return x[:, 0], x[:, 1:].mean(dim=1)


class TcnLearner():
    """
    Representation learner with the interface of `MvmaeLearner`

    Each view is represented by one pooled token.
    """

    kind = "tcn"
    logger = logging.getLogger(__name__).getChild("TcnLearner")

    def __init__(self, config, device="cpu", seed=None):
        section = config.section("tcn")
        self.device = torch.device(device)
        self.views = list(config["env.views"])
        self.network = TcnNetwork.from_config(config).to(self.device)
        self.margin = section["margin"]
        self.min_gap = section["min_gap"]
        self.batch_size = section["batch_size"]
        self.grad_clip = config["trainer.grad_clip"]
        self.optimizer = torch.optim.AdamW(
            self.network.parameters(), lr=section["lr"],
            weight_decay=config["mvmae.weight_decay"])
        self.rng = np.random.default_rng(
            config.seed if seed is None else seed)
        self.updates = 0
        self.skipped = 0

    @property
    def token_width(self):
        return self.network.width

    @property
    def tokens_per_view(self):
        return 1

    def view_indices(self, views):
        return [self.views.index(view) for view in views]

    def sample_frames(self, episodes):
        """
        Stack anchor, positive and negative frames of one triplet per episode

        Returns
        -------
        frames : ndarray of shape (3, n, side, side, 3) or None
        skipped : int
            Episodes too short for a triplet
        """
        anchors, positives, negatives = [], [], []
        skipped = 0
        for episode in episodes:
            triplet = sample_triplet(len(episode), len(episode.views),
                                     self.rng, self.min_gap)
            if triplet is None:
                skipped += 1
                continue
            anchors.append(episode.images[triplet.anchor_step,
                                          triplet.anchor_view])
            positives.append(episode.images[triplet.anchor_step,
                                            triplet.positive_view])
            negatives.append(episode.images[triplet.negative_step,
                                            triplet.anchor_view])
        if not anchors:
            return None, skipped
        return np.stack([anchors, positives, negatives]), skipped

    def update(self, replay):
        """
        One gradient step on triplets from replay episodes

        Returns
        -------
        dict
            `tcn/loss`, `tcn/active_fraction`, `tcn/skipped`, or only the
            skip count when no episode is long enough
        """
        episodes = replay.sample_episodes(self.batch_size, self.rng)
        frames, skipped = self.sample_frames(episodes)
        self.skipped += skipped
        if frames is None:
            return {"tcn/skipped": float(self.skipped)}

        images = torch.as_tensor(to_float(frames), device=self.device)
        count = images.shape[1]
        self.network.train()
        cls, _ = tcn_encode(self.network, images.flatten(0, 1))
        cls = cls.view(3, count, -1)
        loss, active = tcn_loss(cls[0], cls[1], cls[2], self.margin)

        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if self.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(self.network.parameters(),
                                           self.grad_clip)
        self.optimizer.step()
        self.updates += 1
        return {
            "tcn/loss": float(loss.detach()),
            "tcn/active_fraction": float(active),
            "tcn/skipped": float(self.skipped),
        }

    def represent(self, images, views):
        """
        Pooled token of every view

        Parameters
        ----------
        images : ndarray or torch.Tensor of shape (B, V', side, side, 3)
        views : sequence of str

        Returns
        -------
        torch.Tensor of shape (B, V', width)
        """
        if isinstance(images, np.ndarray):
            if images.dtype == np.uint8:
                images = to_float(images)
            images = torch.as_tensor(images)
        images = images.to(self.device, torch.float32)
        batch, num_views = images.shape[:2]
        self.network.eval()
        with torch.no_grad():
            _, pooled = tcn_encode(self.network, images.flatten(0, 1))
        return pooled.view(batch, num_views, -1)

    def state_dict(self):
        return {
            "network": self.network.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "updates": self.updates,
            "skipped": self.skipped,
            "rng": self.rng.bit_generator.state,
        }

    def load_state_dict(self, state):
        self.network.load_state_dict(state["network"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.updates = state["updates"]
        self.skipped = state["skipped"]
        self.rng.bit_generator.state = state["rng"]

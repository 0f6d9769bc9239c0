"""
Training wrapper of the multi-view masked autoencoder

The trainer talks to representation learners through a small interface:

* `update(replay)` runs one gradient step on a batch it samples itself
* `represent(images, views)` returns frozen tokens for the world model
* `token_width` and `tokens_per_view` size the world model input
* `state_dict()` / `load_state_dict()` for checkpoints
"""

import logging

import numpy as np
import torch
from torch.optim.lr_scheduler import LambdaLR

from agent.mvmae.masking import sample_mask_plans
from agent.mvmae.network import MvmaeNetwork
from agent.mvmae.network import denormalize_images
from agent.mvmae.network import extract_representation
from agent.mvmae.network import mvmae_loss
from agent.mvmae.network import normalize_images
from agent.mvmae.network import unpatchify
from utils.toyenv.augment import augment_batch
from utils.toyenv.episode import to_float


# -----------------------------------------------------------------------------
def linear_warmup(warmup_steps):
    """Learning rate factor rising linearly to 1 over `warmup_steps` steps"""
    if warmup_steps <= 0:
        return lambda step: 1.0
    return lambda step: min(1.0, (step + 1) / warmup_steps)


class MvmaeLearner():
    """
    Optimizer, schedule and mask sampling around an `MvmaeNetwork`

    Parameters
    ----------
    config : RunConfig
    device : str
    seed : int or None
        Seed of the generator for mask plans and augmentation, defaults to
        the trainer seed
    """

    kind = "mvmae"
    logger = logging.getLogger(__name__).getChild("MvmaeLearner")

    def __init__(self, config, device="cpu", seed=None):
        section = config.section("mvmae")
        self.device = torch.device(device)
        self.views = list(config["env.views"])
        self.network = MvmaeNetwork.from_config(config).to(self.device)
        self.num_frames = self.network.num_frames
        self.batch_size = section["batch_size"]
        self.mask_ratio = section["mask_ratio"]
        self.mask_ratio_scope = section["mask_ratio_scope"]
        self.view_masking = section["view_masking"]
        self.augment_strength = config["env.augment_strength"]
        self.grad_clip = config["trainer.grad_clip"]

        self.optimizer = torch.optim.AdamW(
            self.network.parameters(), lr=section["lr"],
            weight_decay=section["weight_decay"])
        self.scheduler = LambdaLR(
            self.optimizer, linear_warmup(section["warmup_steps"]))
        self.rng = np.random.default_rng(
            config.seed if seed is None else seed)
        self.updates = 0

    @property
    def token_width(self):
        return self.network.width

    @property
    def tokens_per_view(self):
        return self.network.num_cells

    def view_indices(self, views):
        return [self.views.index(view) for view in views]

    # -------------------------------------------------------------------------
    def sample_plan(self, batch_size):
        return sample_mask_plans(
            batch_size, len(self.views), self.num_frames,
            self.network.grid_size, self.mask_ratio, self.rng,
            scope=self.mask_ratio_scope, view_masking=self.view_masking)

    def update(self, replay):
        """
        One gradient step on clips sampled from the replay buffer

        Returns
        -------
        dict
            Loss metrics, or an empty dict when the buffer has no clip yet
        """
        batch = replay.sample_clips(self.batch_size, self.num_frames, self.rng)
        if batch is None:
            return {}
        return self.train_on(batch.images, batch.rewards)

    def train_on(self, images, rewards):
        """
        One gradient step on a given batch

        Parameters
        ----------
        images : ndarray of shape (B, V, T, side, side, 3), uint8 or float
        rewards : ndarray of shape (B, T)

        Returns
        -------
        dict
        """
        if images.dtype == np.uint8:
            images = to_float(images)
        images = augment_batch(images, self.rng, self.augment_strength)

        plan = self.sample_plan(len(images))
        self.network.train()
        loss, metrics = mvmae_loss(
            self.network,
            torch.as_tensor(images, dtype=torch.float32, device=self.device),
            torch.as_tensor(rewards, dtype=torch.float32, device=self.device),
            plan)

        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if self.grad_clip > 0:
            norm = torch.nn.utils.clip_grad_norm_(
                self.network.parameters(), self.grad_clip)
            metrics["mvmae/grad_norm"] = float(norm)
        self.optimizer.step()
        self.scheduler.step()
        self.updates += 1
        metrics["mvmae/lr"] = self.scheduler.get_last_lr()[0]
        return metrics

    # -------------------------------------------------------------------------
    def represent(self, images, views):
        """
        Frozen tokens of the given views

        Parameters
        ----------
        images : ndarray or torch.Tensor of shape (B, V', side, side, 3)
            uint8 or float images in [0, 1], views in the order of `views`
        views : sequence of str

        Returns
        -------
        torch.Tensor of shape (B, V' * N, width)
        """
        if isinstance(images, np.ndarray):
            if images.dtype == np.uint8:
                images = to_float(images)
            images = torch.as_tensor(images, device=self.device)
        self.network.eval()
        return extract_representation(
            self.network, images.to(self.device, torch.float32),
            view_indices=self.view_indices(views))

    def reconstruct(self, images, rewards):
        """
        Masked inputs and reconstructions of a batch for inspection

        Returns
        -------
        dict
            `images` (B, V, T, side, side, 3) in [0, 1], `reconstructions`
            like `images`, `keep` (B, V, T, N) and `rewards` /
            `predicted_rewards` (B, T)
        """
        if images.dtype == np.uint8:
            images = to_float(images)
        plan = self.sample_plan(len(images))
        self.network.eval()
        with torch.no_grad():
            targets = normalize_images(torch.as_tensor(
                images, dtype=torch.float32, device=self.device))
            patches, predicted = self.network(
                targets, torch.as_tensor(plan.keep, device=self.device))
            frames = denormalize_images(
                unpatchify(patches, self.network.grid_size)).clamp(0.0, 1.0)
        return {
            "images": np.asarray(images),
            "reconstructions": frames.cpu().numpy(),
            "keep": plan.keep,
            "rewards": np.asarray(rewards),
            "predicted_rewards": predicted.cpu().numpy(),
        }

    # -------------------------------------------------------------------------
    def state_dict(self):
        return {
            "network": self.network.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "scheduler": self.scheduler.state_dict(),
            "updates": self.updates,
            "rng": self.rng.bit_generator.state,
        }

    def load_state_dict(self, state):
        self.network.load_state_dict(state["network"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.scheduler.load_state_dict(state["scheduler"])
        self.updates = state["updates"]
        self.rng.bit_generator.state = state["rng"]

"""
Ablation studies of a run config

Both studies measure how well hidden views are reconstructed on a fixed set
of held-out clips with fixed view masking plans:

* the reconstruction study trains the autoencoder alone and compares its
  masked-view error with two predictors that need no training. All variants
  keep the same number of tokens per frame.
* the control study trains complete agents and adds their success rate and
  return.

Every finished variant appends one row to `ablation.csv`.
"""

from dataclasses import dataclass
import logging
import os

import numpy as np
import torch

from agent.mvmae.learner import MvmaeLearner
from agent.mvmae.masking import MaskPlan
from agent.mvmae.masking import sample_mask_plans
from agent.mvmae.network import PATCH_SIZE
from agent.mvmae.network import mvmae_loss
from agent.mvmae.network import normalize_images
from utils.exceptions import ConfigError
from utils.toyenv.demos import expert_policy
from utils.toyenv.demos import run_episode
from utils.toyenv.environment import ToyManipulationEnv
from utils.toyenv.episode import to_float
from utils.training.buffers import ReplayBuffer
from utils.training.components import resolve_device
from utils.training.metrics import MetricsWriter
from utils.training.trainer import Trainer
from utils.training.trainer import seed_everything


VARIANTS = {
    "baseline": {},
    "uniform_masking": {"mvmae.view_masking": False},
    "no_video": {"mvmae.video_autoencoding": False},
    "mask_ratio_50": {"mvmae.mask_ratio": 0.5},
    "no_bc": {"behavior.bc_weight": 0.0},
}
RECONSTRUCTION_VARIANTS = ("baseline", "uniform_masking")
CONTROL_VARIANTS = ("baseline", "uniform_masking", "no_bc")

ABLATION_FILENAME = "ablation.csv"
ABLATION_COLUMNS = (
    "study", "variant", "seed", "updates", "env_steps", "masked_view_mse",
    "dataset_mean_mse", "copy_view_mse", "updates_to_target",
    "success_rate", "episode_return",
)

# Required improvement of the masked-view error over the untrained predictors
DATASET_MEAN_MARGIN = 0.3
COPY_VIEW_MARGIN = 0.1

# Held-out and training recordings never share seeds with a run
HELD_OUT_SEED_OFFSET = 30000
TRAINING_SEED_OFFSET = 40000


@dataclass
class HeldOutClips:
    """
    Clips with one fixed view masking plan each

    images : ndarray of shape (N, V, T, side, side, 3), uint8
    rewards : ndarray of shape (N, T)
    plan : MaskPlan, batched
    """

    images: np.ndarray
    rewards: np.ndarray
    plan: MaskPlan

    def __len__(self):
        return len(self.images)

    def subset(self, part):
        return HeldOutClips(
            images=self.images[part], rewards=self.rewards[part],
            plan=MaskPlan(masked_view=self.plan.masked_view[part],
                          keep=self.plan.keep[part], ratio=self.plan.ratio))

    def single_frames(self):
        """Every frame as a clip of its own, for networks with T = 1"""
        count, views, frames = self.images.shape[:3]
        images = np.swapaxes(self.images, 1, 2).reshape(
            count * frames, views, 1, *self.images.shape[3:])
        keep = np.swapaxes(self.plan.keep, 1, 2).reshape(
            count * frames, views, 1, -1)
        return HeldOutClips(
            images=images,
            rewards=self.rewards.reshape(count * frames, 1),
            plan=MaskPlan(
                masked_view=self.plan.masked_view.reshape(count * frames, 1),
                keep=keep, ratio=self.plan.ratio))


def _check_views(config):
    if len(config["env.views"]) < 2:
        raise ConfigError("env.views",
                          "the masked-view error needs at least two views")


def check_variants(names):
    unknown = [name for name in names if name not in VARIANTS]
    if unknown:
        raise ConfigError("variant", "unknown variants {}, known: {}".format(
            ", ".join(unknown), ", ".join(sorted(VARIANTS))))


def variant_config(config, name, seed):
    """
    Config of one variant and seed

    Raises
    ------
    ConfigError
        For unknown variant names
    """
    try:
        updates = dict(VARIANTS[name])
    except KeyError:
        raise ConfigError("variant", "unknown variant '{}', known: {}".format(
            name, ", ".join(sorted(VARIANTS))))
    updates.update({"trainer.seed": seed, "env.seed": seed})
    return config.replace(updates)


# -----------------------------------------------------------------------------
def record_episodes(config, count, seed):
    """
    Episodes of the scripted expert and of random actions, alternating

    Returns
    -------
    ReplayBuffer
    """
    env = ToyManipulationEnv.from_config(config, seed=seed)
    rng = np.random.default_rng(seed)
    buffer = ReplayBuffer(capacity=10**9)
    for number in range(count):
        policy = expert_policy if number % 2 == 0 else \
            (lambda env: env.sample_action())
        buffer.add(run_episode(env, policy, rng))
    return buffer


def record_clips(config, count):
    """
    Held-out clips of `mvmae.video_length` frames

    The plans hide one view per frame and keep the share of tokens given by
    `mvmae.mask_ratio` over all views.

    Returns
    -------
    HeldOutClips
    """
    _check_views(config)
    seed = config["env.seed"] + HELD_OUT_SEED_OFFSET
    frames = config["mvmae.video_length"]
    rng = np.random.default_rng(seed)
    episodes = record_episodes(config, max(2, count // 8), seed)
    batch = episodes.sample_clips(count, frames, rng)
    if batch is None:
        raise ConfigError("mvmae.video_length",
                          "episodes are shorter than {} frames".format(frames))
    plan = sample_mask_plans(
        count, len(config["env.views"]), frames,
        config["env.image_size"] // PATCH_SIZE, config["mvmae.mask_ratio"],
        rng, scope="overall", view_masking=True)
    return HeldOutClips(images=batch.images, rewards=batch.rewards,
                        plan=plan)


def _normalized(images):
    return normalize_images(torch.as_tensor(to_float(images)))


def baseline_errors(clips, batch_size=64):
    """
    Masked-view error of two predictors that need no training

    `dataset_mean` predicts each pixel of a hidden view by its mean over all
    clips and frames of that view. `copy_view` copies the next view of the
    same frame. Errors are mean squared errors of normalized pixels, like
    the `mvmae/masked_view_mse` metric.

    Returns
    -------
    dict
        `dataset_mean_mse` and `copy_view_mse`
    """
    views = clips.images.shape[1]
    total, frames = 0.0, 0
    for start in range(0, len(clips), batch_size):
        x = _normalized(clips.images[start:start + batch_size])
        total = total + x.double().sum(dim=(0, 2))
        frames += x.shape[0] * x.shape[2]
    mean_images = (total / frames).float()

    mean_error, copy_error, pixels = 0.0, 0.0, 0
    for start in range(0, len(clips), batch_size):
        x = _normalized(clips.images[start:start + batch_size])
        hidden_view = torch.as_tensor(
            clips.plan.masked_view[start:start + batch_size])
        index = hidden_view[:, None, :, None, None, None].expand(
            -1, 1, -1, *x.shape[3:])
        hidden = torch.take_along_dim(x, index, dim=1)[:, 0]
        copied = torch.take_along_dim(x, (index + 1) % views, dim=1)[:, 0]
        mean_error += float((hidden - mean_images[hidden_view]).pow(2).sum())
        copy_error += float((hidden - copied).pow(2).sum())
        pixels += hidden.numel()
    return {
        "dataset_mean_mse": mean_error / pixels,
        "copy_view_mse": copy_error / pixels,
    }


def masked_view_error(network, clips, batch_size=32):
    """
    Mean `mvmae/masked_view_mse` of a network over the held-out clips

    Networks trained on single frames see every frame as a clip of its own.
    """
    if network.num_frames == 1 and clips.images.shape[2] > 1:
        clips = clips.single_frames()
    elif network.num_frames != clips.images.shape[2]:
        raise ValueError("Clips of {} frames do not fit a network of {}"
                         .format(clips.images.shape[2], network.num_frames))

    device = next(network.parameters()).device
    network.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(clips), batch_size):
            part = clips.subset(slice(start, start + batch_size))
            _, metrics = mvmae_loss(
                network,
                torch.as_tensor(to_float(part.images), device=device),
                torch.as_tensor(part.rewards, dtype=torch.float32,
                                device=device),
                part.plan)
            total += metrics["mvmae/masked_view_mse"] * len(part)
    return total / len(clips)


def reaches_target(error, baselines):
    return error <= (1.0 - DATASET_MEAN_MARGIN) * \
        baselines["dataset_mean_mse"] and \
        error <= (1.0 - COPY_VIEW_MARGIN) * baselines["copy_view_mse"]


# -----------------------------------------------------------------------------
class AblationStudy():
    """
    Variants of one run config trained side by side

    Parameters
    ----------
    config : RunConfig
    out_dir : str
        Receives `ablation.csv` and the run directories of the control study
    seeds : sequence of int or None
        Defaults to the seed of the config
    clip_count : int
        Number of held-out clips
    device : str or None
    killer : GracefulKiller or None
    """

    logger = logging.getLogger(__name__).getChild("AblationStudy")

    def __init__(self, config, out_dir, seeds=None, clip_count=500,
                 device=None, killer=None):
        _check_views(config)
        self.config = config
        self.out_dir = out_dir
        self.seeds = list(seeds) if seeds else [config.seed]
        self.clip_count = clip_count
        self.device = resolve_device(device or config["trainer.device"])
        self.killer = killer
        os.makedirs(out_dir, exist_ok=True)
        self.writer = MetricsWriter(os.path.join(out_dir, ABLATION_FILENAME),
                                    columns=ABLATION_COLUMNS)
        self._clips = None
        self._baselines = None

    @property
    def killed(self):
        return self.killer is not None and self.killer.kill_now

    @property
    def clips(self):
        if self._clips is None:
            self.logger.info("Recording {} held-out clips".format(
                self.clip_count))
            self._clips = record_clips(self.config, self.clip_count)
        return self._clips

    @property
    def baselines(self):
        if self._baselines is None:
            self._baselines = baseline_errors(self.clips)
            self.logger.info("Untrained predictors: {}".format(
                self._baselines))
        return self._baselines

    def _finish(self, row):
        row.update(self.baselines)
        self.writer.write(row)
        self.logger.info("Variant {} seed {}: {}".format(
            row["variant"], row["seed"], row))
        return row

    # -------------------------------------------------------------------------
    def reconstruction(self, variants=RECONSTRUCTION_VARIANTS, updates=3000,
                       eval_every=250, train_episodes=100):
        """
        Train the autoencoder of every variant on recorded episodes

        Variants keep the share `1 - mvmae.mask_ratio` of all tokens of a
        frame, with or without a hidden view.

        Returns
        -------
        list of dict
            One row per variant and seed, `updates_to_target` is the first
            evaluated update count whose error beats both predictors by
            their margins, or None
        """
        check_variants(variants)
        base = self.config.replace({"mvmae.mask_ratio_scope": "overall"})
        episodes = record_episodes(
            base, train_episodes, base["env.seed"] + TRAINING_SEED_OFFSET)
        clips, baselines = self.clips, self.baselines

        rows = []
        for name in variants:
            for seed in self.seeds:
                if self.killed:
                    return rows
                config = variant_config(base, name, seed)
                seed_everything(seed)
                learner = MvmaeLearner(config, device=self.device, seed=seed)
                reached = None
                while learner.updates < updates and not self.killed:
                    if not learner.update(episodes):
                        raise ConfigError(
                            "mvmae.video_length",
                            "recorded episodes are too short for clips")
                    if learner.updates % eval_every == 0 and reached is None:
                        error = masked_view_error(learner.network, clips)
                        self.logger.debug("{} update {}: {:.4f}".format(
                            name, learner.updates, error))
                        if reaches_target(error, baselines):
                            reached = learner.updates
                error = masked_view_error(learner.network, clips)
                if reached is None and reaches_target(error, baselines):
                    reached = learner.updates
                rows.append(self._finish({
                    "study": "reconstruction",
                    "variant": name,
                    "seed": seed,
                    "updates": learner.updates,
                    "masked_view_mse": error,
                    "updates_to_target": reached,
                }))
        return rows

    def control(self, variants=CONTROL_VARIANTS):
        """
        Train and evaluate a complete agent per variant and seed

        Runs are written to `<out_dir>/<variant>-seed<seed>`.

        Returns
        -------
        list of dict
        """
        check_variants(variants)
        clips = self.clips
        rows = []
        for name in variants:
            for seed in self.seeds:
                if self.killed:
                    return rows
                config = variant_config(self.config, name, seed)
                run_dir = os.path.join(self.out_dir,
                                       "{}-seed{}".format(name, seed))
                trainer = Trainer(config, run_dir, device=self.device,
                                  killer=self.killer)
                trainer.prefill_from_config()
                result = trainer.train()
                report = trainer.evaluate()
                representation = trainer.components.representation
                error = masked_view_error(representation.network, clips) \
                    if representation.kind == "mvmae" else None
                rows.append(self._finish({
                    "study": "control",
                    "variant": name,
                    "seed": seed,
                    "updates": result["updates"],
                    "env_steps": result["env_steps"],
                    "masked_view_mse": error,
                    "success_rate": report.success_rate,
                    "episode_return": report.mean_return,
                }))
        return rows


def summarize(rows):
    """
    One line per variant with means over seeds

    Returns
    -------
    list of str
    """
    lines = []
    names = list(dict.fromkeys(row["variant"] for row in rows))
    for name in names:
        selected = [row for row in rows if row["variant"] == name]
        parts = ["{} ({} seeds)".format(name, len(selected))]
        for key in ("masked_view_mse", "success_rate", "episode_return"):
            values = [row[key] for row in selected
                      if row.get(key) is not None]
            if values:
                parts.append("{} {:.4f} +- {:.4f}".format(
                    key, np.mean(values), np.std(values)))
        lines.append(", ".join(parts))
    return lines

"""
Training loop of the agent

The loop follows this order:

1. prefill the replay and expert buffers with demonstrations
2. train the representation alone for `trainer.ae_init_steps` rounds
3. alternate between collection and update rounds at the training ratio.
   A round is one representation update, one world model update on replay
   and expert sequences and one actor-critic update in imagination.

Metrics are appended to `metrics.csv` and `eval.csv` in the run directory,
checkpoints are written below `ckpt/`.
"""

import logging
import os
import time

import numpy as np
import torch

from agent.worldmodel import LatentState
from utils.exceptions import DemonstrationFormatError
from utils.exceptions import NonFiniteLossError
from utils.exceptions import TrainingAborted
from utils.logger_copy import copy_logger_settings
from utils.runconfig.runconfig import RunConfig
from utils.toyenv.demos import collect_expert_episodes
from utils.toyenv.demos import load_episodes
from utils.toyenv.environment import ToyManipulationEnv
from utils.training.buffers import ExpertBuffer
from utils.training.buffers import ReplayBuffer
from utils.training.buffers import RewardScaledView
from utils.training.checkpoint import find_checkpoint
from utils.training.checkpoint import load_checkpoint
from utils.training.checkpoint import save_checkpoint
from utils.training.collector import CollectorPool
from utils.training.components import AgentComponents
from utils.training.evaluation import evaluate
from utils.training.evaluation import make_eval_env
from utils.training.metrics import EVAL_FILENAME
from utils.training.metrics import METRICS_FILENAME
from utils.training.metrics import MetricsAccumulator
from utils.training.metrics import MetricsWriter
from utils.training.normalizer import RewardNormalizer
from utils.training.policies import AgentPolicy
from utils.training.schedule import Schedule
from utils.training.schedule import crossed


CONFIG_FILENAME = "config.txt"
RECONSTRUCTION_DIRNAME = "reconstructions"
# Scripted demonstrations never share seeds with the collectors
DEMO_SEED_OFFSET = 20000


def seed_everything(seed):
    torch.manual_seed(seed)
    np.random.seed(seed)


def match_views(episodes, views):
    """
    Restrict demonstration episodes to the views of a run

    Raises
    ------
    DemonstrationFormatError
        If an episode lacks one of the views
    """
    matched = []
    for episode in episodes:
        missing = [view for view in views if view not in episode.views]
        if missing:
            raise DemonstrationFormatError(
                "Demonstration lacks the views {}".format(missing))
        if tuple(episode.views) != tuple(views):
            episode = episode.select_views(views)
        matched.append(episode)
    return matched


# -----------------------------------------------------------------------------
class Trainer():
    """
    Owner of the learners, the buffers and the run directory

    Parameters
    ----------
    config : RunConfig
    run_dir : str
    device : str or None
        Overrides `trainer.device`
    killer : GracefulKiller or None
        Polled between update rounds
    """

    logger = logging.getLogger(__name__).getChild("Trainer")

    def __init__(self, config, run_dir, device=None, killer=None):
        self.config = config
        self.run_dir = run_dir
        self.killer = killer
        os.makedirs(run_dir, exist_ok=True)

        seed_everything(config.seed)
        self.components = AgentComponents(config, device)
        self.views = list(config["env.views"])
        self.control_views = config.control_views
        self.control_slots = [self.views.index(view)
                              for view in self.control_views]

        self.replay = ReplayBuffer(config["trainer.replay_capacity"])
        self.expert = ExpertBuffer()
        self.normalizer = RewardNormalizer.from_config(config)
        self.replay_view = RewardScaledView(
            self.replay, lambda: self.normalizer.scale)
        self.expert_view = RewardScaledView(
            self.expert, lambda: self.normalizer.scale)
        self.schedule = Schedule.from_config(config)
        self.rng = np.random.default_rng(config.seed)

        self.env_steps = 0
        self.updates = 0
        self.ae_updates = 0
        self.last_checkpoint = None
        self.metrics_file = MetricsWriter(
            os.path.join(run_dir, METRICS_FILENAME))
        self.eval_file = MetricsWriter(os.path.join(run_dir, EVAL_FILENAME))
        self.accumulator = MetricsAccumulator()
        self.episode_returns = []
        self.episode_successes = []

    @property
    def killed(self):
        return self.killer is not None and self.killer.kill_now

    # -------------------------------------------------------------------------
    def prefill(self, episodes):
        """
        Put demonstrations into the replay buffer and the expert buffer

        The expert buffer is built once here and not changed afterwards.
        """
        episodes = match_views(episodes, self.views)
        self.expert = ExpertBuffer(episodes)
        self.expert_view.buffer = self.expert
        self.replay.extend(episodes)
        # A restored normalizer has seen the demonstrations already
        if self.last_checkpoint is None:
            for episode in episodes:
                self.normalizer.update(episode.rewards[1:])
        self.logger.info("Prefilled {} expert episodes ({} steps)".format(
            len(episodes), self.expert.num_steps))

    def prefill_from_config(self, demo_dir=None):
        """
        Load `trainer.expert_demos` demonstrations or record them

        Parameters
        ----------
        demo_dir : str or None
            Directory of exported episodes. Without it the scripted expert
            records fresh episodes.

        Raises
        ------
        DemonstrationFormatError
            If the directory holds too few or malformed episodes
        TrainingAborted
            If the scripted expert fails too often
        """
        count = self.config["trainer.expert_demos"]
        if count == 0:
            self.logger.info("No expert demonstrations requested")
            return

        # Demonstration loading and recording go to the training log
        copy_logger_settings("utils.training", "utils.toyenv.demos")
        if demo_dir:
            self.logger.info("Loading demonstrations from {}".format(
                demo_dir))
            episodes = load_episodes(demo_dir)
            if len(episodes) < count:
                raise DemonstrationFormatError(
                    "{} holds {} episodes, {} required".format(
                        demo_dir, len(episodes), count))
            episodes = episodes[:count]
        else:
            env = ToyManipulationEnv.from_config(
                self.config, seed=self.config["env.seed"] + DEMO_SEED_OFFSET)
            episodes = collect_expert_episodes(env, count,
                                               killer=self.killer)
            if len(episodes) < count and not self.killed:
                raise TrainingAborted(
                    "Scripted expert produced only {} of {} "
                    "demonstrations".format(len(episodes), count))
        self.prefill(episodes)

    # -------------------------------------------------------------------------
    def representation_update(self):
        return self.components.representation.update(self.replay_view)

    def represent_sequences(self, images):
        """
        Tokens of image sequences with the current frozen encoder

        Parameters
        ----------
        images : ndarray of shape (B, L, V', side, side, 3)

        Returns
        -------
        torch.Tensor of shape (B, L, n, width)
        """
        batch, length = images.shape[:2]
        tokens = self.components.representation.represent(
            images.reshape(batch * length, *images.shape[2:]),
            self.control_views)
        return tokens.view(batch, length, *tokens.shape[1:])

    def world_model_update(self):
        """
        World model update followed by the actor-critic update

        Replay and expert sequences share one world model batch. The
        actor-critic imagines from all posterior states, the behavior
        cloning term pairs the expert posteriors with the expert action
        taken next.
        """
        config = self.config
        length = config["trainer.sequence_length"]
        device = self.components.world_model.device
        replay_batch = self.replay_view.sample_sequences(
            config["trainer.wm_batch_size"], length, self.rng,
            self.control_slots)
        if replay_batch is None:
            return {}
        parts = [replay_batch]
        expert_size = config["trainer.expert_batch_size"]
        if expert_size > 0 and len(self.expert):
            expert_batch = self.expert_view.sample_sequences(
                expert_size, length, self.rng, self.control_slots)
            if expert_batch is not None:
                parts.append(expert_batch)

        def stacked(name, dtype):
            return torch.as_tensor(
                np.concatenate([getattr(p, name) for p in parts]),
                dtype=dtype, device=device)

        tokens = self.represent_sequences(
            np.concatenate([p.images for p in parts]))
        actions = stacked("actions", torch.float32)
        rewards = stacked("rewards", torch.float32)
        is_first = stacked("is_first", torch.bool)

        metrics, posteriors = self.components.world_model.update(
            tokens, actions, rewards, is_first)

        expert_states, expert_actions = None, None
        if len(parts) > 1:
            first = len(replay_batch.actions)
            valid = ~is_first[first:, 1:].reshape(-1)
            states = posteriors[first:, :-1].flatten()
            expert_states = LatentState(states.deter[valid],
                                        states.stoch[valid],
                                        states.logits[valid])
            expert_actions = actions[first:, 1:].reshape(
                -1, actions.shape[-1])[valid]

        metrics.update(self.components.behavior.update(
            self.components.world_model.network, posteriors.flatten(),
            expert_states, expert_actions))
        return metrics

    def update_round(self):
        metrics = dict(self.representation_update())
        metrics.update(self.world_model_update())
        return metrics

    def autoencoder_init(self):
        """Representation updates on the prefilled buffer alone"""
        steps = self.schedule.ae_init_steps
        if steps == 0:
            return
        self.logger.info("Representation initialization: {} updates".format(
            steps))
        accumulator = MetricsAccumulator()
        log_every = max(1, steps // 10)
        while self.ae_updates < steps and not self.killed:
            accumulator.add(self.representation_update())
            self.ae_updates += 1
            if self.ae_updates % log_every == 0:
                self.logger.info("Init update {}/{}: {}".format(
                    self.ae_updates, steps,
                    _summary(accumulator.means())))
                accumulator.reset()

    # -------------------------------------------------------------------------
    def record_episodes(self, episodes):
        for episode in episodes:
            self.episode_returns.append(episode.total_reward)
            self.episode_successes.append(episode.succeeded)
            self.logger.debug("Episode finished: {} steps, return {:.3f}, "
                              "success {}".format(len(episode),
                                                  episode.total_reward,
                                                  episode.succeeded))

    def log_interval(self, elapsed_steps, elapsed_seconds):
        row = self.accumulator.means()
        row.update({
            "env_step": self.env_steps,
            "update": self.updates,
            "episode_return": float(np.mean(self.episode_returns))
            if self.episode_returns else None,
            "success_rate": float(np.mean(self.episode_successes))
            if self.episode_successes else None,
            "fps": elapsed_steps / max(elapsed_seconds, 1e-9),
        })
        self.metrics_file.write(row)
        self.logger.info("Step {} update {}: {}".format(
            self.env_steps, self.updates, _summary(row)))
        self.accumulator.reset()
        self.episode_returns = []
        self.episode_successes = []

    def evaluate(self, randomization=None, episodes=None, views=None):
        """
        Mean-action evaluation of the current agent

        Parameters
        ----------
        randomization : str or None
            Defaults to the training randomization
        episodes : int or None
            Defaults to `trainer.eval_episodes`
        views : sequence of str or None
            Views given to the agent, the control views by default

        Returns
        -------
        EvaluationReport
        """
        env = make_eval_env(self.config, randomization)
        policy = AgentPolicy(self.components, views=views, mode="mean")
        episodes = episodes or self.config["trainer.eval_episodes"]
        report = evaluate(env, policy, episodes, seed=self.config.seed,
                          killer=self.killer)
        self.eval_file.write({
            "env_step": self.env_steps,
            "update": self.updates,
            "episode_return": report.mean_return,
            "success_rate": report.success_rate,
        })
        return report

    def save_checkpoint(self):
        parameters = {
            "components": self.components.state_dict(),
            "rng": self.rng.bit_generator.state,
            "ae_updates": self.ae_updates,
        }
        buffers = {
            "replay": self.replay.counters(),
            "expert": self.expert.counters(),
        }
        self.last_checkpoint = save_checkpoint(
            self.run_dir, self.env_steps, self.updates, parameters,
            self.normalizer.state_dict(), buffers, self.config)
        if self.config["trainer.dump_reconstructions"]:
            self.dump_reconstructions()
        return self.last_checkpoint

    def restore(self, directory):
        """Continue from a checkpoint, the buffers are refilled separately"""
        checkpoint = load_checkpoint(directory,
                                     self.components.world_model.device)
        parameters = checkpoint["parameters"]
        self.components.load_state_dict(parameters["components"])
        self.rng.bit_generator.state = parameters["rng"]
        self.ae_updates = parameters["ae_updates"]
        self.normalizer.load_state_dict(checkpoint["normalizer"])
        self.replay.load_counters(checkpoint["buffers"]["replay"])
        self.env_steps = checkpoint["step"]["env_steps"]
        self.updates = checkpoint["step"]["updates"]
        self.last_checkpoint = directory
        self.logger.info("Restored step {} update {} from {}".format(
            self.env_steps, self.updates, directory))

    def dump_reconstructions(self, count=2):
        """Save masked inputs and reconstructions of a few replay clips"""
        learner = self.components.representation
        if not hasattr(learner, "reconstruct"):
            return None
        rng = np.random.default_rng(self.env_steps)
        batch = self.replay.sample_clips(count, learner.num_frames, rng)
        if batch is None:
            return None
        directory = os.path.join(self.run_dir, RECONSTRUCTION_DIRNAME)
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "{}.npz".format(self.env_steps))
        np.savez_compressed(path, views=np.array(self.views),
                            **learner.reconstruct(batch.images,
                                                  batch.rewards))
        self.logger.debug("Reconstructions written: {}".format(path))
        return path

    # -------------------------------------------------------------------------
    def train(self):
        """
        Run the loop until `trainer.total_env_steps` or a stop signal

        Returns
        -------
        dict
            Final counters and the last checkpoint

        Raises
        ------
        TrainingAborted
            When a loss becomes non-finite. The last good checkpoint stays
            on disk and is named in the exception.
        """

        logger = self.logger
        config = self.config
        total = config["trainer.total_env_steps"]

        logger.info("="*80)
        logger.info("Training started in {}".format(self.run_dir))
        logger.info("Config fingerprint {}".format(config.fingerprint()))
        logger.info("="*80)
        config.save(os.path.join(self.run_dir, CONFIG_FILENAME))

        pool = CollectorPool.from_config(config)
        policy = AgentPolicy(self.components, mode="sample")
        last_log_time = time.time()
        last_log_steps = self.env_steps
        try:
            self.autoencoder_init()
            while self.env_steps < total and not self.killed:
                before = self.env_steps
                rewards, episodes = pool.step(policy, self.replay)
                self.env_steps += len(rewards)
                self.normalizer.update(rewards)
                self.record_episodes(episodes)

                for _ in range(self.schedule.pending(self.env_steps,
                                                     self.updates)):
                    self.accumulator.add(self.update_round())
                    self.updates += 1

                if crossed(before, self.env_steps,
                           config["trainer.log_every"]):
                    now = time.time()
                    self.log_interval(self.env_steps - last_log_steps,
                                      now - last_log_time)
                    last_log_time, last_log_steps = now, self.env_steps
                if crossed(before, self.env_steps,
                           config["trainer.eval_every"]):
                    self.evaluate()
                if crossed(before, self.env_steps,
                           config["trainer.checkpoint_every"]):
                    self.save_checkpoint()
        except NonFiniteLossError as err_msg:
            logger.exception("Training aborted at step {} update {}".format(
                self.env_steps, self.updates))
            raise TrainingAborted(
                "{} (last checkpoint: {})".format(
                    err_msg, self.last_checkpoint),
                checkpoint=self.last_checkpoint)
        finally:
            pool.close()

        if self.killed:
            logger.warning("Stop signal received at step {}".format(
                self.env_steps))
        self.save_checkpoint()

        logger.info("="*80)
        logger.info("Training finished: {} env steps, {} update rounds".format(
            self.env_steps, self.updates))
        logger.info("="*80)
        return {
            "env_steps": self.env_steps,
            "updates": self.updates,
            "checkpoint": self.last_checkpoint,
        }


def _summary(metrics):
    return ", ".join("{}={:.4g}".format(key, value)
                     for key, value in sorted(metrics.items())
                     if value is not None)


# -----------------------------------------------------------------------------
def load_agent(path, device=None):
    """
    Rebuild the learners of a finished or running training

    Parameters
    ----------
    path : str
        Run directory or checkpoint directory
    device : str or None

    Returns
    -------
    config : RunConfig
        The config saved with the checkpoint
    components : AgentComponents
    step : dict
        Counters of the checkpoint

    Raises
    ------
    FileNotFoundError
        If no checkpoint exists
    """
    directory = find_checkpoint(path)
    checkpoint = load_checkpoint(directory)
    config = RunConfig.load(checkpoint["config_path"])
    components = AgentComponents(config, device)
    components.load_state_dict(checkpoint["parameters"]["components"])
    return config, components, checkpoint["step"]

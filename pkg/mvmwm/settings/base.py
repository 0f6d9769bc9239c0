"""
Django settings for the mvmwm project.

The project does not serve any web pages. Django provides the settings
layer, the logging configuration, the management commands (`train`, `eval`,
`collect_demos`, `plot`) and the test runner.

The run profiles at the bottom of this file are the defaults every
`RunConfig` starts from. Config files and `--set` overrides are applied on
top of them (see `utils.runconfig`).
"""

import os

TOP_LEVEL_DIR = os.path.dirname(os.path.dirname(os.path.dirname(
    os.path.abspath(__file__))))


# -----------------------------------------------------------------------------
# Django Settings
# -----------------------------------------------------------------------------

# Only needed for Django internals. Nothing here is signed or served.
SECRET_KEY = os.environ.get("MVMWM_SECRET_KEY", "mvmwm-not-a-web-application")

DEBUG = True

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'agent.apps.AgentConfig',
]

# No models are stored. The dummy backend keeps `manage.py test` from
# creating a test database.
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'


# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

LOG_DIR = os.path.join(TOP_LEVEL_DIR, "logs")
if not os.path.isdir(LOG_DIR):
    os.makedirs(LOG_DIR)

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "default": {
            "format": "[{asctime} - {name} - {levelname}]:  {message}",
            "style": "{",
        },
        "test_control": {
            "format": "[     TEST CONTROL - {name} - {asctime} - {levelname}     ]:  {message}",
            "style": "{",
        },
        "test_subject": {
            "format": "[TEST SUBJECT - {name} - {levelname}]:  {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "default",
            "level": "INFO",
        },
        "testing_control_console": {
            "class": "logging.StreamHandler",
            "formatter": "test_control",
        },
        "testing_subject_console": {
            "class": "logging.StreamHandler",
            "formatter": "test_subject",
            "level": "WARNING",
        },
        "trainRotateHandler": {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "default",
            "filename": os.path.join(LOG_DIR, "train.log"),
            "maxBytes": 1000000,
            "backupCount": 5,
            "encoding": "utf8",
        },
        "trainWarnRotateHandler": {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "default",
            "filename": os.path.join(LOG_DIR, "train.warn"),
            "maxBytes": 1000000,
            "backupCount": 5,
            "encoding": "utf8",
            "level": "WARNING"
        },
        "collectRotateHandler": {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "default",
            "filename": os.path.join(LOG_DIR, "collect.log"),
            "maxBytes": 1000000,
            "backupCount": 5,
            "encoding": "utf8",
        },
        "agentRotateHandler": {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "default",
            "filename": os.path.join(LOG_DIR, "agent.log"),
            "maxBytes": 1000000,
            "backupCount": 5,
            "encoding": "utf8",
        },
    },
    "loggers": {
        "root": {
            "handlers": ["console"],
            "level": "INFO",
        },
        "__main__": {
            "handlers": ["console"],
            "level": "DEBUG",
        },
        "testing_control": {
            "handlers": ["testing_control_console"],
            "level": "INFO",
            "propagate": False
        },
        "testing_subject": {
            "handlers": ["testing_subject_console"],
            "level": "WARNING",
            "propagate": False
        },
        "agent": {
            "handlers": ["agentRotateHandler", "console"],
            "level": "INFO",
            "propagate": False
        },
        "utils.training": {
            "handlers": ["trainRotateHandler", "trainWarnRotateHandler",
                         "console"],
            "level": "DEBUG",
            "propagate": False
        },
        "utils.toyenv": {
            "handlers": ["collectRotateHandler"],
            "level": "INFO",
            "propagate": False
        },
    },
}


# -----------------------------------------------------------------------------
# MVMWM Application settings
# -----------------------------------------------------------------------------

# Parent directory of run directories created by `train` without `--run-dir`
RUN_ROOT = os.path.join(TOP_LEVEL_DIR, "runs")

# Default output directory of `collect_demos`
DEMO_ROOT = os.path.join(TOP_LEVEL_DIR, "data", "demos")

# Environment variable that overrides `trainer.seed` (and `env.seed`)
SEED_ENV_VAR = "MVMWM_SEED"

# The `desk` profile fits a laptop. The `paper` profile carries the full-scale
# hyperparameters. Keys not listed under `paper` are shared with `desk`.
DESK_PROFILE = {
    # Environment
    "env.task": "reach_place",
    "env.views": ["front", "wrist"],
    "env.control_views": [],
    "env.image_size": 64,
    "env.randomization": "none",
    "env.max_episode_length": 150,
    "env.seed": 0,
    "env.waypoint_tolerance": 0.05,
    "env.max_delta": 0.05,
    "env.workspace_half_extent": 0.5,
    "env.workspace_height": 0.5,
    "env.augment_strength": 0.0,
    # Multi-view masked autoencoder
    "mvmae.conv_channels": [32, 64, 128, 256],
    "mvmae.width": 256,
    "mvmae.encoder_depth": 8,
    "mvmae.encoder_heads": 4,
    "mvmae.decoder_depth": 6,
    "mvmae.decoder_heads": 4,
    "mvmae.mask_ratio": 0.95,
    "mvmae.mask_ratio_scope": "remaining",
    "mvmae.view_masking": True,
    "mvmae.video_autoencoding": True,
    "mvmae.video_length": 4,
    "mvmae.batch_size": 64,
    "mvmae.lr": 3e-4,
    "mvmae.weight_decay": 1e-6,
    "mvmae.warmup_steps": 250,
    # World model
    "worldmodel.width": 128,
    "worldmodel.encoder_depth": 2,
    "worldmodel.encoder_heads": 4,
    "worldmodel.decoder_depth": 2,
    "worldmodel.decoder_heads": 4,
    "worldmodel.deter": 256,
    "worldmodel.hidden": 256,
    "worldmodel.stoch_vars": 16,
    "worldmodel.stoch_classes": 16,
    "worldmodel.beta": 1.0,
    "worldmodel.kl_balance": 0.8,
    "worldmodel.free_nats": 1.0,
    "worldmodel.lr": 3e-4,
    "worldmodel.weight_decay": 1e-6,
    # Actor-critic
    "behavior.hidden": 256,
    "behavior.layers": 2,
    "behavior.horizon": 15,
    "behavior.gamma": 0.99,
    "behavior.return_lambda": 0.95,
    "behavior.entropy_scale": 1e-4,
    "behavior.bc_weight": 1.0,
    "behavior.min_std": 0.1,
    "behavior.target_blend": 0.02,
    "behavior.target_hard_every": 0,
    "behavior.actor_lr": 8e-5,
    "behavior.critic_lr": 8e-5,
    # Training loop
    "trainer.seed": 0,
    "trainer.total_env_steps": 30000,
    "trainer.num_envs": 2,
    "trainer.collectors": 1,
    "trainer.train_ratio": 0.0625,
    "trainer.ae_init_steps": 1000,
    "trainer.wm_batch_size": 16,
    "trainer.expert_batch_size": 4,
    "trainer.sequence_length": 25,
    "trainer.expert_demos": 50,
    "trainer.replay_capacity": 50000,
    "trainer.grad_clip": 100.0,
    "trainer.reward_normalization": True,
    "trainer.reward_norm_decay": 0.999,
    "trainer.reward_norm_floor": 0.01,
    "trainer.log_every": 1000,
    "trainer.eval_every": 5000,
    "trainer.eval_episodes": 10,
    "trainer.checkpoint_every": 10000,
    "trainer.dump_reconstructions": True,
    "trainer.device": "cpu",
    # Representation learner selection and the contrastive baseline
    "representation.kind": "mvmae",
    "tcn.margin": 0.2,
    "tcn.min_gap": 30,
    "tcn.batch_size": 64,
    "tcn.lr": 3e-4,
}

PAPER_PROFILE = dict(DESK_PROFILE)
PAPER_PROFILE.update({
    "env.image_size": 96,
    "mvmae.batch_size": 1024,
    "mvmae.warmup_steps": 2500,
    "worldmodel.deter": 1024,
    "worldmodel.hidden": 1024,
    "worldmodel.stoch_vars": 32,
    "worldmodel.stoch_classes": 32,
    "behavior.hidden": 400,
    "behavior.layers": 4,
    "trainer.total_env_steps": 300000,
    "trainer.num_envs": 8,
    "trainer.ae_init_steps": 10000,
    "trainer.wm_batch_size": 36,
    "trainer.expert_batch_size": 12,
    "trainer.sequence_length": 50,
    "trainer.replay_capacity": 1000000,
    "trainer.device": "cuda",
})

RUN_PROFILES = {
    "desk": DESK_PROFILE,
    "paper": PAPER_PROFILE,
}

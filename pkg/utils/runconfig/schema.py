"""
Type and range definitions of every run config key

Each key of the run profiles in the settings has exactly one `Field` here.
Keys that are not listed are rejected.
"""

from collections import namedtuple
import math

from utils.exceptions import ConfigError


VIEW_NAMES = ("front", "front2", "left", "right", "wrist")
RANDOMIZATION_LEVELS = ("none", "weak", "medium", "strong")
TASKS = ("reach_place", "reach")


Field = namedtuple("Field", ["kind", "low", "high", "choices"])


def _field(kind, low=None, high=None, choices=None):
    return Field(kind=kind, low=low, high=high, choices=choices)


INF = math.inf

SCHEMA = {
    "env.task": _field("choice", choices=TASKS),
    "env.views": _field("str_list", choices=VIEW_NAMES),
    "env.control_views": _field("str_list", choices=VIEW_NAMES),
    "env.image_size": _field("int", choices=(64, 96)),
    "env.randomization": _field("choice", choices=RANDOMIZATION_LEVELS),
    "env.max_episode_length": _field("int", 1, 10000),
    "env.seed": _field("int", 0, 2**32 - 1),
    "env.waypoint_tolerance": _field("float", 1e-4, 1.0),
    "env.max_delta": _field("float", 1e-4, 1.0),
    "env.workspace_half_extent": _field("float", 0.1, 1.0),
    "env.workspace_height": _field("float", 0.1, 1.0),
    "env.augment_strength": _field("float", 0.0, 1.0),
    "mvmae.conv_channels": _field("int_list", 1, 4096),
    "mvmae.width": _field("int", 4, 4096),
    "mvmae.encoder_depth": _field("int", 1, 64),
    "mvmae.encoder_heads": _field("int", 1, 64),
    "mvmae.decoder_depth": _field("int", 1, 64),
    "mvmae.decoder_heads": _field("int", 1, 64),
    "mvmae.mask_ratio": _field("float", 0.0, 0.999999),
    "mvmae.mask_ratio_scope": _field(
        "choice", choices=("remaining", "overall")),
    "mvmae.view_masking": _field("bool"),
    "mvmae.video_autoencoding": _field("bool"),
    "mvmae.video_length": _field("int", 1, 64),
    "mvmae.batch_size": _field("int", 1, 65536),
    "mvmae.lr": _field("float", 0.0, 1.0),
    "mvmae.weight_decay": _field("float", 0.0, 1.0),
    "mvmae.warmup_steps": _field("int", 0, 10**7),
    "worldmodel.width": _field("int", 4, 4096),
    "worldmodel.encoder_depth": _field("int", 1, 64),
    "worldmodel.encoder_heads": _field("int", 1, 64),
    "worldmodel.decoder_depth": _field("int", 1, 64),
    "worldmodel.decoder_heads": _field("int", 1, 64),
    "worldmodel.deter": _field("int", 1, 16384),
    "worldmodel.hidden": _field("int", 1, 16384),
    "worldmodel.stoch_vars": _field("int", 1, 1024),
    "worldmodel.stoch_classes": _field("int", 2, 1024),
    "worldmodel.beta": _field("float", 0.0, INF),
    "worldmodel.kl_balance": _field("float", 0.0, 1.0),
    "worldmodel.free_nats": _field("float", 0.0, INF),
    "worldmodel.lr": _field("float", 0.0, 1.0),
    "worldmodel.weight_decay": _field("float", 0.0, 1.0),
    "behavior.hidden": _field("int", 1, 16384),
    "behavior.layers": _field("int", 1, 32),
    "behavior.horizon": _field("int", 1, 1000),
    "behavior.gamma": _field("float", 0.0, 1.0),
    "behavior.return_lambda": _field("float", 0.0, 1.0),
    "behavior.entropy_scale": _field("float", 0.0, INF),
    "behavior.bc_weight": _field("float", 0.0, INF),
    "behavior.min_std": _field("float", 1e-6, 10.0),
    "behavior.target_blend": _field("float", 1e-9, 1.0),
    "behavior.target_hard_every": _field("int", 0, 10**7),
    "behavior.actor_lr": _field("float", 0.0, 1.0),
    "behavior.critic_lr": _field("float", 0.0, 1.0),
    "trainer.seed": _field("int", 0, 2**32 - 1),
    "trainer.total_env_steps": _field("int", 0, 10**9),
    "trainer.num_envs": _field("int", 1, 256),
    "trainer.collectors": _field("int", 1, 256),
    "trainer.train_ratio": _field("float", 1e-6, 1000.0),
    "trainer.ae_init_steps": _field("int", 0, 10**8),
    "trainer.wm_batch_size": _field("int", 1, 65536),
    "trainer.expert_batch_size": _field("int", 0, 65536),
    "trainer.sequence_length": _field("int", 2, 10000),
    "trainer.expert_demos": _field("int", 0, 100000),
    "trainer.replay_capacity": _field("int", 1, 10**9),
    "trainer.grad_clip": _field("float", 0.0, INF),
    "trainer.reward_normalization": _field("bool"),
    "trainer.reward_norm_decay": _field("float", 1e-6, 0.999999),
    "trainer.reward_norm_floor": _field("float", 1e-12, INF),
    "trainer.log_every": _field("int", 1, 10**9),
    "trainer.eval_every": _field("int", 0, 10**9),
    "trainer.eval_episodes": _field("int", 0, 100000),
    "trainer.checkpoint_every": _field("int", 0, 10**9),
    "trainer.dump_reconstructions": _field("bool"),
    "trainer.device": _field("str"),
    "representation.kind": _field("choice", choices=("mvmae", "tcn")),
    "tcn.margin": _field("float", 1e-9, INF),
    "tcn.min_gap": _field("int", 1, 10000),
    "tcn.batch_size": _field("int", 1, 65536),
    "tcn.lr": _field("float", 0.0, 1.0),
}


# -----------------------------------------------------------------------------
def parse_value(key, value_string):
    """
    Convert the raw value string of a config line to the type of the key

    Parameters
    ----------
    key : str
        Dotted config key
    value_string : str
        Raw value as read from the file or override

    Returns
    -------
    bool, int, float, str or list
        Typed value

    Raises
    ------
    ConfigError
        If the key is unknown or the value can not be converted
    """

    if key not in SCHEMA:
        raise ConfigError(key, "unknown config key")
    kind = SCHEMA[key].kind
    try:
        if kind == "bool":
            lowered = value_string.strip().lower()
            if lowered not in ("true", "false"):
                raise ValueError("expected true or false")
            return lowered == "true"
        if kind == "int":
            return int(value_string)
        if kind == "float":
            return float(value_string)
        if kind in ("str", "choice"):
            return value_string.strip()
        items = [item.strip() for item in value_string.split(",")
                 if item.strip()]
        if kind == "int_list":
            return [int(item) for item in items]
        return items
    except ValueError as err_msg:
        raise ConfigError(key, "can not parse '{}' ({})".format(
            value_string, err_msg))


# -----------------------------------------------------------------------------
def format_value(value):
    """
    Canonical text form of a config value

    `parse_value(key, format_value(v)) == v` holds for every valid value.
    """

    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(str(item) for item in value)
    return str(value)


# -----------------------------------------------------------------------------
def check_value(key, value):
    """
    Check type and range of a single config value

    Raises
    ------
    ConfigError
        If the key is unknown or the value is outside its range or choices
    """

    if key not in SCHEMA:
        raise ConfigError(key, "unknown config key")
    field = SCHEMA[key]
    kind = field.kind

    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, "expected a boolean, got {!r}".format(value))
        return
    if kind in ("str_list", "int_list"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, "expected a list, got {!r}".format(value))
        items = value
    else:
        items = [value]

    for item in items:
        if kind in ("int", "int_list"):
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(
                    key, "expected an integer, got {!r}".format(item))
        if kind == "float":
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(
                    key, "expected a number, got {!r}".format(item))
            if not math.isfinite(item):
                raise ConfigError(key, "must be finite")
        if kind in ("str", "choice", "str_list") and \
                not isinstance(item, str):
            raise ConfigError(key, "expected text, got {!r}".format(item))
        if field.choices is not None and item not in field.choices:
            raise ConfigError(key, "{!r} not in {}".format(
                item, ", ".join(str(c) for c in field.choices)))
        if field.low is not None and item < field.low:
            raise ConfigError(key, "{!r} below minimum {}".format(
                item, field.low))
        if field.high is not None and item > field.high:
            raise ConfigError(key, "{!r} above maximum {}".format(
                item, field.high))


# -----------------------------------------------------------------------------
def check_consistency(values):
    """
    Checks spanning more than one key

    Parameters
    ----------
    values : dict
        Complete dotted-key config dictionary with individually valid values
    """

    views = values["env.views"]
    if not views:
        raise ConfigError("env.views", "at least one view is required")
    if len(set(views)) != len(views):
        raise ConfigError("env.views", "views must be unique")
    for view in values["env.control_views"]:
        if view not in views:
            raise ConfigError(
                "env.control_views",
                "'{}' is not one of env.views".format(view))

    if len(values["mvmae.conv_channels"]) != 4:
        raise ConfigError(
            "mvmae.conv_channels", "exactly four stride-2 stages required")
    for prefix in ("mvmae.encoder", "mvmae.decoder"):
        if values["mvmae.width"] % values[prefix + "_heads"]:
            raise ConfigError(
                prefix + "_heads", "must divide mvmae.width")
    if values["mvmae.width"] % 4:
        raise ConfigError("mvmae.width", "must be divisible by 4")
    for prefix in ("worldmodel.encoder", "worldmodel.decoder"):
        if values["worldmodel.width"] % values[prefix + "_heads"]:
            raise ConfigError(
                prefix + "_heads", "must divide worldmodel.width")

    if values["behavior.bc_weight"] > 0 and values["trainer.expert_demos"] == 0:
        raise ConfigError(
            "behavior.bc_weight",
            "behavior cloning needs trainer.expert_demos > 0")
    if values["representation.kind"] == "tcn" and len(views) < 2:
        raise ConfigError(
            "representation.kind", "the contrastive baseline needs two views")

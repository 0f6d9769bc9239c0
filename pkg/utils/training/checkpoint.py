"""
Checkpoint directories of a run

```
<run_dir>/ckpt/
    latest              name of the newest checkpoint directory
    <step>/
        parameters.pt   state dicts of all networks and optimizers
        normalizer.json reward normalizer statistics
        buffer.json     episode and step counters of the buffers
        config.txt      resolved run config
        step.json       env steps, update rounds, config fingerprint
```
"""

import json
import logging
import os

import torch


CHECKPOINT_DIRNAME = "ckpt"
LATEST_FILENAME = "latest"
PARAMETERS_FILENAME = "parameters.pt"
NORMALIZER_FILENAME = "normalizer.json"
BUFFER_FILENAME = "buffer.json"
CONFIG_FILENAME = "config.txt"
STEP_FILENAME = "step.json"


def _write_json(path, content):
    with open(path, "w", encoding="utf8") as f:
        json.dump(content, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_json(path):
    with open(path, "r", encoding="utf8") as f:
        return json.load(f)


# -----------------------------------------------------------------------------
def save_checkpoint(run_dir, env_steps, updates, parameters, normalizer,
                    buffers, config):
    """
    Write one checkpoint and point `latest` at it

    Parameters
    ----------
    run_dir : str
    env_steps, updates : int
    parameters : dict
        State dicts, saved with `torch.save`
    normalizer : dict
        JSON serializable normalizer state
    buffers : dict
        JSON serializable buffer counters
    config : RunConfig

    Returns
    -------
    str
        Checkpoint directory
    """

    logger = logging.getLogger(__name__).getChild("save_checkpoint")

    root = os.path.join(run_dir, CHECKPOINT_DIRNAME)
    directory = os.path.join(root, str(env_steps))
    os.makedirs(directory, exist_ok=True)

    torch.save(parameters, os.path.join(directory, PARAMETERS_FILENAME))
    _write_json(os.path.join(directory, NORMALIZER_FILENAME), normalizer)
    _write_json(os.path.join(directory, BUFFER_FILENAME), buffers)
    config.save(os.path.join(directory, CONFIG_FILENAME))
    _write_json(os.path.join(directory, STEP_FILENAME), {
        "env_steps": env_steps,
        "updates": updates,
        "config_fingerprint": config.fingerprint(),
    })

    # The pointer is replaced last, a partial checkpoint is never `latest`
    pointer = os.path.join(root, LATEST_FILENAME)
    with open(pointer + ".tmp", "w", encoding="utf8") as f:
        f.write(str(env_steps) + "\n")
    os.replace(pointer + ".tmp", pointer)

    logger.info("Checkpoint written: {}".format(directory))
    return directory


def latest_checkpoint(run_dir):
    """
    Directory of the newest checkpoint of a run

    Returns
    -------
    str or None
    """
    pointer = os.path.join(run_dir, CHECKPOINT_DIRNAME, LATEST_FILENAME)
    if not os.path.isfile(pointer):
        return None
    with open(pointer, "r", encoding="utf8") as f:
        name = f.read().strip()
    directory = os.path.join(run_dir, CHECKPOINT_DIRNAME, name)
    return directory if os.path.isdir(directory) else None


def find_checkpoint(path):
    """
    Accept a run directory or a checkpoint directory

    Raises
    ------
    FileNotFoundError
    """
    if os.path.isfile(os.path.join(path, PARAMETERS_FILENAME)):
        return path
    directory = latest_checkpoint(path)
    if directory is None:
        raise FileNotFoundError("No checkpoint found in {}".format(path))
    return directory


def load_checkpoint(directory, map_location="cpu"):
    """
    Read every part of a checkpoint

    Returns
    -------
    dict
        `parameters`, `normalizer`, `buffers`, `step` and `config_path`
    """
    logger = logging.getLogger(__name__).getChild("load_checkpoint")
    logger.info("Loading checkpoint: {}".format(directory))
    parameters = torch.load(
        os.path.join(directory, PARAMETERS_FILENAME),
        map_location=map_location, weights_only=False)
    return {
        "parameters": parameters,
        "normalizer": _read_json(os.path.join(directory, NORMALIZER_FILENAME)),
        "buffers": _read_json(os.path.join(directory, BUFFER_FILENAME)),
        "step": _read_json(os.path.join(directory, STEP_FILENAME)),
        "config_path": os.path.join(directory, CONFIG_FILENAME),
    }

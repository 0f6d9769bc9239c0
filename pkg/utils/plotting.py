"""
Learning curves and reconstruction grids of training runs
"""

import logging
import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from utils.training.metrics import read_metrics  # noqa: E402


MASK_GREY = 0.5


# -----------------------------------------------------------------------------
def aggregate_runs(tables, metric, x_key="env_step"):
    """
    Mean and standard deviation of one metric over several runs

    The runs are compared on the steps logged by all of them, rows where the
    metric is empty are dropped first.

    Parameters
    ----------
    tables : list of dict
        Columns as returned by `read_metrics`
    metric : str

    Returns
    -------
    steps, mean, std : ndarray

    Raises
    ------
    ValueError
        If the metric is missing or no step is shared by all runs
    """
    series = []
    for table in tables:
        if metric not in table:
            raise ValueError("Metric '{}' not in metrics file".format(metric))
        x = np.asarray(table[x_key], dtype=float)
        y = np.asarray(table[metric], dtype=float)
        valid = np.isfinite(y)
        series.append(dict(zip(x[valid], y[valid])))

    steps = sorted(set.intersection(*(set(s) for s in series)))
    if not steps:
        raise ValueError("No logged step with '{}' shared by all runs".format(
            metric))
    values = np.array([[s[step] for step in steps] for s in series])
    return np.array(steps), values.mean(axis=0), values.std(axis=0)


def plot_learning_curves(groups, metric, path, title=None):
    """
    One curve per group of runs, shaded band of one standard deviation

    Parameters
    ----------
    groups : dict
        Label to list of metrics CSV paths. A group with one run is drawn
        without band.
    metric : str
    path : str
        Output image file

    Returns
    -------
    str
        The written path
    """

    logger = logging.getLogger(__name__).getChild("plot_learning_curves")

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, csv_paths in groups.items():
        tables = [read_metrics(p) for p in csv_paths]
        steps, mean, std = aggregate_runs(tables, metric)
        line, = ax.plot(steps, mean, label="{} ({})".format(
            label, len(tables)))
        if len(tables) > 1:
            ax.fill_between(steps, mean - std, mean + std,
                            color=line.get_color(), alpha=0.25)
        logger.debug("{}: {} runs, {} points".format(
            label, len(tables), len(steps)))

    ax.set_xlabel("environment steps")
    ax.set_ylabel(metric)
    ax.set_title(title or metric)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("Learning curve written: {}".format(path))
    return path


# -----------------------------------------------------------------------------
def grey_out_masked(frame, keep):
    """
    Replace the masked patches of a frame with grey

    Parameters
    ----------
    frame : ndarray of shape (side, side, 3), float in [0, 1]
    keep : ndarray of shape (g * g,), bool
    """
    grid = int(math.isqrt(len(keep)))
    patch = frame.shape[0] // grid
    masked = frame.copy()
    for index in np.flatnonzero(~np.asarray(keep, dtype=bool)):
        row, col = divmod(int(index), grid)
        masked[row * patch:(row + 1) * patch,
               col * patch:(col + 1) * patch] = MASK_GREY
    return masked


def reconstruction_grid(images, reconstructions, keep, sample=0):
    """
    Masked inputs above their reconstructions

    One column per frame, two rows per view.

    Parameters
    ----------
    images, reconstructions : ndarray of shape (B, V, T, side, side, 3)
    keep : ndarray of shape (B, V, T, N), bool
    sample : int
        Batch entry to show

    Returns
    -------
    ndarray of shape (2 * V * side, T * side, 3), uint8
    """
    _, num_views, num_frames, side = images.shape[:4]
    grid = np.zeros((2 * num_views * side, num_frames * side, 3))
    for view in range(num_views):
        for frame in range(num_frames):
            top = 2 * view * side
            left = frame * side
            grid[top:top + side, left:left + side] = grey_out_masked(
                images[sample, view, frame], keep[sample, view, frame])
            grid[top + side:top + 2 * side, left:left + side] = \
                reconstructions[sample, view, frame]
    return np.round(np.clip(grid, 0.0, 1.0) * 255).astype(np.uint8)


def save_reconstruction_grid(dump_path, path, sample=0, scale=2):
    """
    Render a reconstruction dump of the training loop as PNG

    Parameters
    ----------
    dump_path : str
        `.npz` written by `Trainer.dump_reconstructions`
    path : str
        Output PNG file
    scale : int
        Nearest neighbour upscaling factor
    """
    logger = logging.getLogger(__name__).getChild("save_reconstruction_grid")
    with np.load(dump_path) as dump:
        pixels = reconstruction_grid(dump["images"], dump["reconstructions"],
                                     dump["keep"], sample)
    image = Image.fromarray(pixels)
    if scale > 1:
        image = image.resize((image.width * scale, image.height * scale),
                             Image.NEAREST)
    image.save(path)
    logger.info("Reconstruction grid written: {}".format(path))
    return path


def latest_reconstruction_dump(run_dir):
    """Newest `.npz` of the reconstruction directory of a run, or None"""
    directory = os.path.join(run_dir, "reconstructions")
    if not os.path.isdir(directory):
        return None
    dumps = [name for name in os.listdir(directory) if name.endswith(".npz")]
    if not dumps:
        return None
    newest = max(dumps, key=lambda name: int(os.path.splitext(name)[0]))
    return os.path.join(directory, newest)

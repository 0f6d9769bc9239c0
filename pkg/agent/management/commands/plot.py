import logging
import os

from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from agent.management.options import CONFIG_ERROR
from agent.management.options import RUNTIME_ERROR
from utils.plotting import latest_reconstruction_dump
from utils.plotting import plot_learning_curves
from utils.plotting import save_reconstruction_grid
from utils.training.metrics import EVAL_FILENAME
from utils.training.metrics import METRICS_FILENAME


def parse_run(text, use_eval=False):
    """
    Split `label=path` into label and CSV path

    The path may be a run directory or a CSV file. Without label the
    directory name is used.
    """
    label, _, path = text.rpartition("=")
    if os.path.isdir(path):
        csv_path = os.path.join(
            path, EVAL_FILENAME if use_eval else METRICS_FILENAME)
    else:
        csv_path = path
    if not label:
        label = os.path.basename(os.path.normpath(
            path if os.path.isdir(path) else os.path.dirname(path)))
    if not os.path.isfile(csv_path):
        raise CommandError("No metrics file: {}".format(csv_path),
                           returncode=CONFIG_ERROR)
    return label, csv_path


class Command(BaseCommand):
    help = ("Plot learning curves of runs, mean and standard deviation over "
            "runs sharing a label (label=run_dir), and reconstruction grids.")

    def add_arguments(self, parser):
        parser.add_argument(
            "runs", nargs="+",
            help="Run directories or CSV files, optionally as label=path")
        parser.add_argument(
            "--metric", dest="metrics", action="append", default=None,
            help="Column to plot, may be repeated (default: episode_return "
                 "and success_rate)")
        parser.add_argument(
            "--eval", action="store_true",
            help="Read eval.csv instead of metrics.csv from run directories")
        parser.add_argument("--out", default="plots", help="Output directory")

    def handle(self, *args, **options):
        logger = logging.getLogger(__name__).getChild("handle")

        groups = {}
        for text in options["runs"]:
            label, csv_path = parse_run(text, options["eval"])
            groups.setdefault(label, []).append(csv_path)
        metrics = options["metrics"] or ["episode_return", "success_rate"]
        out = options["out"]
        os.makedirs(out, exist_ok=True)

        written = []
        try:
            for metric in metrics:
                name = metric.replace("/", "_") + ".png"
                written.append(plot_learning_curves(
                    groups, metric, os.path.join(out, name)))
        except ValueError as err_msg:
            raise CommandError(str(err_msg), returncode=RUNTIME_ERROR)

        for text in options["runs"]:
            path = text.rpartition("=")[2]
            if not os.path.isdir(path):
                continue
            dump = latest_reconstruction_dump(path)
            if dump is None:
                continue
            name = "reconstruction_{}.png".format(
                os.path.basename(os.path.normpath(path)))
            written.append(save_reconstruction_grid(
                dump, os.path.join(out, name)))

        logger.info("Wrote {} images".format(len(written)))
        for path in written:
            self.stdout.write(path)

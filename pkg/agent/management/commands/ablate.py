import logging
import os

from django.conf import settings
from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from agent.management.options import CONFIG_ERROR
from agent.management.options import RUNTIME_ERROR
from agent.management.options import add_config_arguments
from agent.management.options import config_from_options
from utils.exceptions import ConfigError
from utils.exceptions import TrainingAborted
from utils.graceful_killer import GracefulKiller
from utils.training.ablation import ABLATION_FILENAME
from utils.training.ablation import CONTROL_VARIANTS
from utils.training.ablation import RECONSTRUCTION_VARIANTS
from utils.training.ablation import AblationStudy
from utils.training.ablation import summarize


class Command(BaseCommand):
    help = ("Compare variants of a run config. The reconstruction study "
            "trains autoencoders only, the control study complete agents. "
            "Rows are appended to ablation.csv in the output directory.")

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            "--study", default="reconstruction",
            choices=("reconstruction", "control"))
        parser.add_argument(
            "--variants", default=None,
            help="Comma separated variant names, e.g. baseline,no_bc")
        parser.add_argument(
            "--seeds", default=None,
            help="Comma separated seeds, the config seed by default")
        parser.add_argument(
            "--updates", type=int, default=3000,
            help="Autoencoder updates per variant of the reconstruction "
                 "study")
        parser.add_argument(
            "--episodes", type=int, default=100,
            help="Recorded training episodes of the reconstruction study")
        parser.add_argument(
            "--clips", type=int, default=500,
            help="Number of held-out clips")
        parser.add_argument(
            "--out", default=None,
            help="Output directory, RUN_ROOT/ablation-<study> by default")
        parser.add_argument(
            "--device", default=None,
            help="Torch device, overrides trainer.device")

    def handle(self, *args, **options):
        logger = logging.getLogger(__name__).getChild("handle")

        config = config_from_options(options)
        study = options["study"]
        if options["variants"]:
            variants = [name.strip() for name in
                        options["variants"].split(",") if name.strip()]
        elif study == "reconstruction":
            variants = RECONSTRUCTION_VARIANTS
        else:
            variants = CONTROL_VARIANTS
        try:
            seeds = [int(seed) for seed in options["seeds"].split(",")] \
                if options["seeds"] else None
        except ValueError:
            raise CommandError("--seeds needs comma separated integers",
                               returncode=CONFIG_ERROR)
        out = options["out"] or os.path.join(
            settings.RUN_ROOT, "ablation-{}".format(study))

        killer = GracefulKiller(name="Ablation")
        try:
            ablation = AblationStudy(
                config, out, seeds=seeds, clip_count=options["clips"],
                device=options["device"], killer=killer)
            if study == "reconstruction":
                rows = ablation.reconstruction(
                    variants, updates=options["updates"],
                    train_episodes=options["episodes"])
            else:
                rows = ablation.control(variants)
        except ConfigError as err_msg:
            raise CommandError("Invalid ablation: {}".format(err_msg),
                               returncode=CONFIG_ERROR)
        except OSError as err_msg:
            raise CommandError("Can not write the ablation: {}".format(
                err_msg), returncode=RUNTIME_ERROR)
        except TrainingAborted as err_msg:
            logger.error("Ablation aborted: {}".format(err_msg))
            raise CommandError("Ablation aborted: {}".format(err_msg),
                               returncode=RUNTIME_ERROR)

        for line in summarize(rows):
            self.stdout.write(line)
        self.stdout.write("Results: {}".format(
            os.path.join(out, ABLATION_FILENAME)))

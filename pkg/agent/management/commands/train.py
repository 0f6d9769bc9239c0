import logging

from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from agent.management.options import CONFIG_ERROR
from agent.management.options import RUNTIME_ERROR
from agent.management.options import add_config_arguments
from agent.management.options import config_from_options
from agent.management.options import default_run_dir
from utils.exceptions import ConfigError
from utils.exceptions import DemonstrationFormatError
from utils.exceptions import TrainingAborted
from utils.graceful_killer import GracefulKiller
from utils.training.checkpoint import find_checkpoint
from utils.training.trainer import Trainer


class Command(BaseCommand):
    help = ("Train an agent. Writes the resolved config, metrics.csv, "
            "eval.csv and checkpoints into the run directory.")

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            "--run-dir", default=None,
            help="Output directory, a new one below RUN_ROOT by default")
        parser.add_argument(
            "--demos", default=None,
            help="Directory of exported demonstrations. Without it the "
                 "scripted expert records them.")
        parser.add_argument(
            "--device", default=None,
            help="Torch device, overrides trainer.device")
        parser.add_argument(
            "--resume", action="store_true",
            help="Continue from the latest checkpoint of --run-dir")

    def handle(self, *args, **options):
        logger = logging.getLogger(__name__).getChild("handle")

        config = config_from_options(options)
        run_dir = options["run_dir"] or default_run_dir(config)
        if options["resume"] and not options["run_dir"]:
            raise CommandError("--resume needs --run-dir",
                               returncode=CONFIG_ERROR)

        killer = GracefulKiller(name="Training")
        try:
            trainer = Trainer(config, run_dir, device=options["device"],
                              killer=killer)
            if options["resume"]:
                trainer.restore(find_checkpoint(run_dir))
            trainer.prefill_from_config(options["demos"])
            result = trainer.train()
        except ConfigError as err_msg:
            raise CommandError("Invalid run config: {}".format(err_msg),
                               returncode=CONFIG_ERROR)
        except FileNotFoundError as err_msg:
            raise CommandError(str(err_msg), returncode=CONFIG_ERROR)
        except OSError as err_msg:
            raise CommandError("Can not write the run: {}".format(err_msg),
                               returncode=RUNTIME_ERROR)
        except (TrainingAborted, DemonstrationFormatError) as err_msg:
            logger.error("Training aborted: {}".format(err_msg))
            raise CommandError("Training aborted: {}".format(err_msg),
                               returncode=RUNTIME_ERROR)

        self.stdout.write("Run directory: {}".format(run_dir))
        self.stdout.write("Env steps: {}, update rounds: {}".format(
            result["env_steps"], result["updates"]))
        self.stdout.write("Last checkpoint: {}".format(result["checkpoint"]))

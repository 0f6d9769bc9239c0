import logging
import os

from django.conf import settings
from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from agent.management.options import RUNTIME_ERROR
from agent.management.options import add_config_arguments
from agent.management.options import config_from_options
from utils.graceful_killer import GracefulKiller
from utils.toyenv.demos import collect_expert_episodes
from utils.toyenv.demos import export_episodes
from utils.toyenv.environment import ToyManipulationEnv
from utils.training.trainer import DEMO_SEED_OFFSET


class Command(BaseCommand):
    help = ("Record scripted expert episodes and export them as "
            "episode_<index> directories.")

    def add_arguments(self, parser):
        parser.add_argument(
            "--count", type=int, default=None,
            help="Number of episodes, trainer.expert_demos by default")
        parser.add_argument(
            "--out", default=settings.DEMO_ROOT, help="Output directory")
        add_config_arguments(parser)

    def handle(self, *args, **options):
        logger = logging.getLogger(__name__).getChild("handle")

        config = config_from_options(options)
        count = options["count"]
        if count is None:
            count = config["trainer.expert_demos"]
        out = options["out"]

        try:
            os.makedirs(out, exist_ok=True)
            if not os.access(out, os.W_OK):
                raise PermissionError("Not writable: {}".format(out))
        except OSError as err_msg:
            raise CommandError("Can not write demonstrations: {}".format(
                err_msg), returncode=RUNTIME_ERROR)

        # Same seed as the demonstrations the trainer records itself
        env = ToyManipulationEnv.from_config(
            config, seed=config["env.seed"] + DEMO_SEED_OFFSET)
        killer = GracefulKiller(name="Collection")
        episodes = collect_expert_episodes(env, count, killer=killer)
        if len(episodes) < count:
            raise CommandError(
                "Only {} of {} demonstrations recorded".format(
                    len(episodes), count), returncode=RUNTIME_ERROR)

        try:
            directories = export_episodes(episodes, out)
        except OSError as err_msg:
            raise CommandError("Can not write demonstrations: {}".format(
                err_msg), returncode=RUNTIME_ERROR)
        logger.info("Exported {} episodes to {}".format(
            len(directories), out))
        self.stdout.write("{} episodes written to {}".format(
            len(directories), out))

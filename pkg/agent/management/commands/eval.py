import logging
import os

from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from agent.management.options import CONFIG_ERROR
from agent.management.options import add_config_arguments
from agent.management.options import config_from_options
from utils.exceptions import ConfigError
from utils.graceful_killer import GracefulKiller
from utils.runconfig.schema import RANDOMIZATION_LEVELS
from utils.runconfig.schema import VIEW_NAMES
from utils.training.evaluation import evaluate
from utils.training.evaluation import make_eval_env
from utils.training.metrics import MetricsWriter
from utils.training.policies import AgentPolicy
from utils.training.policies import ExpertPolicy
from utils.training.policies import RandomPolicy
from utils.training.trainer import load_agent


def parse_views(text):
    views = [view.strip() for view in text.split(",") if view.strip()]
    for view in views:
        if view not in VIEW_NAMES:
            raise CommandError("Unknown view '{}'".format(view),
                               returncode=CONFIG_ERROR)
    return views


class Command(BaseCommand):
    help = ("Evaluate the latest checkpoint of a run, or the scripted "
            "expert and the random policy, and write a CSV report.")

    def add_arguments(self, parser):
        parser.add_argument(
            "run_dir", nargs="?", default=None,
            help="Run or checkpoint directory (needed for the agent policy)")
        parser.add_argument(
            "--policy", default="agent", choices=("agent", "expert", "random"))
        parser.add_argument(
            "--episodes", type=int, default=None,
            help="Number of episodes, trainer.eval_episodes by default")
        parser.add_argument(
            "--randomization", default=None, choices=RANDOMIZATION_LEVELS,
            help="Camera randomization, the training level by default. "
                 "`strong` evaluates unseen viewpoints.")
        parser.add_argument(
            "--views", default=None,
            help="Comma separated views given to the agent, e.g. one view "
                 "for single-view control")
        parser.add_argument(
            "--output", default=None,
            help="Report CSV, eval_<policy>_<randomization>.csv in the run "
                 "directory by default")
        parser.add_argument("--device", default=None)
        add_config_arguments(parser)

    def handle(self, *args, **options):
        logger = logging.getLogger(__name__).getChild("handle")

        step = {"env_steps": None, "updates": None}
        run_dir = options["run_dir"]
        if run_dir:
            try:
                config, components, step = load_agent(
                    run_dir, device=options["device"])
            except FileNotFoundError as err_msg:
                raise CommandError(str(err_msg), returncode=CONFIG_ERROR)
            except ConfigError as err_msg:
                raise CommandError(
                    "Invalid run config in checkpoint: {}".format(err_msg),
                    returncode=CONFIG_ERROR)
        elif options["policy"] == "agent":
            raise CommandError("The agent policy needs a run directory",
                               returncode=CONFIG_ERROR)
        else:
            config = config_from_options(options)

        views = parse_views(options["views"]) if options["views"] else None
        if options["policy"] == "agent":
            if views:
                missing = [v for v in views if v not in config["env.views"]]
                if missing:
                    raise CommandError(
                        "Views {} were not trained".format(missing),
                        returncode=CONFIG_ERROR)
            policy = AgentPolicy(components, views=views, mode="mean")
        elif options["policy"] == "expert":
            policy = ExpertPolicy()
        else:
            policy = RandomPolicy()

        env = make_eval_env(config, options["randomization"])
        episodes = options["episodes"] or config["trainer.eval_episodes"]
        killer = GracefulKiller(name="Evaluation")
        report = evaluate(env, policy, episodes, seed=config.seed,
                          killer=killer)

        output = options["output"]
        if output is None:
            output = os.path.join(
                run_dir or os.getcwd(), "eval_{}_{}.csv".format(
                    options["policy"], report.randomization))
        MetricsWriter(output).write({
            "env_step": step["env_steps"],
            "update": step["updates"],
            "episode_return": report.mean_return,
            "success_rate": report.success_rate,
        })
        logger.info("Report appended to {}".format(output))

        self.stdout.write("Policy: {}".format(options["policy"]))
        self.stdout.write(report.summary())
        self.stdout.write("Report: {}".format(output))

"""
Module to unittest the management commands and their exit codes
"""

from io import StringIO
import logging
import os
import shutil
import tempfile

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from agent.management.options import CONFIG_ERROR
from agent.management.options import RUNTIME_ERROR
from agent.management.options import config_key_listing
from test_utils.helper import tiny_config
from utils.logger_copy import copy_logger_settings
from utils.toyenv.demos import load_episodes
from utils.training.ablation import ABLATION_FILENAME
from utils.training.metrics import read_metrics

# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

logger = logging.getLogger("testing_control").getChild(__name__)
copy_logger_settings("testing_subject", "agent.management.commands")


def run(name, *args):
    out = StringIO()
    call_command(name, *args, stdout=out)
    return out.getvalue()


# -----------------------------------------------------------------------------
class TestTrainAndEvaluate(SimpleTestCase):
    """
    A miniature run trained through the command line
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tempdir = tempfile.mkdtemp()
        cls.config_path = os.path.join(cls.tempdir, "tiny.txt")
        tiny_config().save(cls.config_path)
        cls.run_dir = os.path.join(cls.tempdir, "run")
        cls.output = run("train", "--config", cls.config_path,
                         "--run-dir", cls.run_dir, "--device", "cpu")

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tempdir)
        super().tearDownClass()

    # -------------------------------------------------------------------------
    def test_train_output(self):
        self.assertIn("Run directory: {}".format(self.run_dir), self.output)
        self.assertIn("Env steps: 16, update rounds: 4", self.output)

    def test_eval_agent_single_view(self):
        output = run("eval", self.run_dir, "--views", "front",
                     "--episodes", "1")
        self.assertIn("1 episodes", output)
        report = read_metrics(os.path.join(self.run_dir,
                                           "eval_agent_none.csv"))
        self.assertEqual(report["env_step"][-1], 16.0)

    def test_eval_unknown_view(self):
        with self.assertRaises(CommandError) as context:
            run("eval", self.run_dir, "--views", "top")
        self.assertEqual(context.exception.returncode, CONFIG_ERROR)

    def test_eval_untrained_view(self):
        with self.assertRaises(CommandError) as context:
            run("eval", self.run_dir, "--views", "left")
        self.assertEqual(context.exception.returncode, CONFIG_ERROR)

    def test_plot(self):
        out = os.path.join(self.tempdir, "plots")
        output = run("plot", "tiny={}".format(self.run_dir), "--eval",
                     "--out", out)
        for name in ("episode_return.png", "success_rate.png",
                     "reconstruction_run.png"):
            self.assertTrue(os.path.isfile(os.path.join(out, name)))
            self.assertIn(name, output)

    def test_resume_finished_run(self):
        output = run("train", "--config", self.config_path,
                     "--run-dir", self.run_dir, "--resume")
        self.assertIn("Env steps: 16, update rounds: 4", output)


class TestExitCodes(SimpleTestCase):

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.config_path = os.path.join(self.tempdir.name, "tiny.txt")
        tiny_config().save(self.config_path)

    def tearDown(self):
        self.tempdir.cleanup()

    def assertExitCode(self, code, name, *args):
        with self.assertRaises(CommandError) as context:
            run(name, *args)
        self.assertEqual(context.exception.returncode, code)

    def test_unknown_config_key(self):
        self.assertExitCode(CONFIG_ERROR, "train", "--set", "trainer.speed=1")

    def test_invalid_value(self):
        self.assertExitCode(CONFIG_ERROR, "train",
                            "--set", "mvmae.mask_ratio=1.5")

    def test_missing_config_file(self):
        self.assertExitCode(CONFIG_ERROR, "train", "--config",
                            os.path.join(self.tempdir.name, "missing.txt"))

    def test_resume_needs_run_dir(self):
        self.assertExitCode(CONFIG_ERROR, "train", "--config",
                            self.config_path, "--resume")

    def test_resume_without_checkpoint(self):
        self.assertExitCode(CONFIG_ERROR, "train", "--config",
                            self.config_path, "--run-dir",
                            self.tempdir.name, "--resume", "--device", "cpu")

    def test_missing_demo_directory(self):
        self.assertExitCode(CONFIG_ERROR, "train", "--config",
                            self.config_path, "--run-dir",
                            os.path.join(self.tempdir.name, "run"),
                            "--demos", os.path.join(self.tempdir.name, "no"),
                            "--device", "cpu")

    def test_eval_agent_needs_run_dir(self):
        self.assertExitCode(CONFIG_ERROR, "eval")

    def test_eval_without_checkpoint(self):
        self.assertExitCode(CONFIG_ERROR, "eval", self.tempdir.name)

    def test_plot_missing_metrics(self):
        self.assertExitCode(CONFIG_ERROR, "plot", self.tempdir.name)

    def test_plot_unknown_metric(self):
        path = os.path.join(self.tempdir.name, "metrics.csv")
        with open(path, "w") as f:
            f.write("env_step,success_rate\n8,0.5\n")
        self.assertExitCode(RUNTIME_ERROR, "plot", path, "--metric", "wm/kl",
                            "--out", os.path.join(self.tempdir.name, "plots"))

    def test_ablate_unknown_variant(self):
        self.assertExitCode(CONFIG_ERROR, "ablate", "--config",
                            self.config_path, "--variants", "no_encoder",
                            "--clips", "2", "--out", self.tempdir.name)

    def test_ablate_single_view(self):
        self.assertExitCode(CONFIG_ERROR, "ablate", "--config",
                            self.config_path, "--set", "env.views=front",
                            "--out", self.tempdir.name)

    def test_ablate_seeds(self):
        self.assertExitCode(CONFIG_ERROR, "ablate", "--config",
                            self.config_path, "--seeds", "one",
                            "--out", self.tempdir.name)


class TestScriptedPolicies(SimpleTestCase):

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.config_path = os.path.join(self.tempdir.name, "tiny.txt")
        tiny_config().save(self.config_path)

    def tearDown(self):
        self.tempdir.cleanup()

    def test_eval_expert(self):
        output_path = os.path.join(self.tempdir.name, "expert.csv")
        output = run("eval", "--policy", "expert", "--config",
                     self.config_path, "--episodes", "2",
                     "--output", output_path)
        self.assertIn("Policy: expert", output)
        report = read_metrics(output_path)
        self.assertEqual(report["success_rate"], [1.0])

    def test_collect_demos(self):
        out = os.path.join(self.tempdir.name, "demos")
        output = run("collect_demos", "--config", self.config_path,
                     "--count", "2", "--out", out)
        self.assertIn("2 episodes written", output)
        episodes = load_episodes(out)
        self.assertEqual(len(episodes), 2)
        self.assertTrue(all(episode.succeeded for episode in episodes))

    def test_key_listing(self):
        listing = config_key_listing()
        self.assertIn("mvmae.mask_ratio = ", listing)
        self.assertIn("trainer.train_ratio = ", listing)

    def test_ablate_reconstruction(self):
        out = os.path.join(self.tempdir.name, "ablation")
        output = run("ablate", "--config", self.config_path,
                     "--variants", "baseline,no_video", "--updates", "1",
                     "--episodes", "2", "--clips", "2", "--out", out,
                     "--device", "cpu")
        self.assertIn("baseline (1 seeds), masked_view_mse", output)
        self.assertIn("no_video (1 seeds)", output)
        self.assertIn("Results: {}".format(
            os.path.join(out, ABLATION_FILENAME)), output)

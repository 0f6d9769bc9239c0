"""
Command line entry point of the agent

    mvmwm.py train [--profile desk|paper] [--config FILE] [--set KEY=VALUE]
    mvmwm.py eval RUN_DIR [--randomization strong] [--episodes 500]
    mvmwm.py collect-demos [--count 100] [--out DIR]
    mvmwm.py plot RUN_DIR [RUN_DIR ...] [--out DIR]
    mvmwm.py ablate [--study reconstruction|control] [--variants A,B]

Every subcommand is the management command of the same name (with
underscores), `mvmwm.py train --help` lists all options and config keys.
Exit codes: 0 success, 2 config error, 3 runtime abort.
"""

import os
import sys

from django.core.management import execute_from_command_line

# Adding the project directory to the path to make imports of other modules
# of the project possible.
TOP_LEVEL_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, TOP_LEVEL_DIR)

SUBCOMMANDS = {
    "train": "train",
    "eval": "eval",
    "collect-demos": "collect_demos",
    "plot": "plot",
    "ablate": "ablate",
}


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "mvmwm.settings.local")

    if len(argv) < 2 or argv[1] not in SUBCOMMANDS:
        print(__doc__)
        return 0 if len(argv) > 1 and argv[1] in ("-h", "--help") else 2

    argv[1] = SUBCOMMANDS[argv[1]]
    execute_from_command_line(argv)
    return 0


if __name__ == "__main__":
    sys.exit(main())

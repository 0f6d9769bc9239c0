import tempfile

from .base import *

print("Loading CI settings.")

DEBUG = True

# Test runs must not write into the checkout
RUN_ROOT = tempfile.mkdtemp(prefix="mvmwm-runs-")
DEMO_ROOT = tempfile.mkdtemp(prefix="mvmwm-demos-")

# Keep the suite quiet. Failures are reported by the test runner.
LOGGING["handlers"]["console"]["level"] = "WARNING"
LOGGING["loggers"]["utils.training"]["handlers"] = ["console"]
LOGGING["loggers"]["utils.toyenv"]["handlers"] = ["console"]
LOGGING["loggers"]["agent"]["handlers"] = ["console"]

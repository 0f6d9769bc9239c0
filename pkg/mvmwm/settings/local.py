from .base import *

print("Loading local settings.")

DEBUG = True

# Runs and demonstrations of local experiments stay inside the checkout
RUN_ROOT = os.path.join(TOP_LEVEL_DIR, "runs")
DEMO_ROOT = os.path.join(TOP_LEVEL_DIR, "data", "demos")

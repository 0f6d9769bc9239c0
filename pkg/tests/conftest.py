"""
Make the suite runnable with pytest as well as with `manage.py test`
"""

import os
import sys

import django

TOP_LEVEL_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, TOP_LEVEL_DIR)
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "mvmwm.settings.ci")
django.setup()

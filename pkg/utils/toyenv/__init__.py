"""
Multi-view toy manipulation environment

Rendering, camera randomization, tasks, scripted experts, augmentation and
the demonstration format.
"""

from utils.toyenv.camera import CameraPose
from utils.toyenv.camera import RandomizationSpec
from utils.toyenv.camera import sample_camera_pose
from utils.toyenv.environment import MultiViewObservation
from utils.toyenv.environment import ToyManipulationEnv
from utils.toyenv.environment import Transition
from utils.toyenv.episode import Episode

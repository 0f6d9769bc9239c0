"""
Module to unittest the clip augmentation
"""

import numpy as np
from django.test import SimpleTestCase

from utils.toyenv.augment import apply_augmentation
from utils.toyenv.augment import augment_batch
from utils.toyenv.augment import augment_video


# -----------------------------------------------------------------------------
class TestAugmentation(SimpleTestCase):

    def test_zero_strength_is_identity(self):
        video = np.random.default_rng(0).random((2, 3, 8, 8, 3))
        out = augment_video(video, np.random.default_rng(1), 0.0)
        np.testing.assert_array_equal(out, video)
        self.assertIsNot(out, video)

    def test_neutral_parameters(self):
        video = np.linspace(0, 1, 24, dtype=np.float32).reshape(2, 4, 3)
        np.testing.assert_allclose(apply_augmentation(video, 1.0, 0.0), video,
                                   atol=1e-7)

    def test_clipped_to_unit_range(self):
        video = np.array([0.0, 0.25, 0.75, 1.0], dtype=np.float32)
        out = apply_augmentation(video, 2.0, 0.0)
        np.testing.assert_allclose(out, [0.0, 0.0, 1.0, 1.0])
        self.assertEqual(out.dtype, np.float32)

    def test_one_transform_per_clip(self):
        video = np.full((3, 2, 4, 4, 3), 0.5, dtype=np.float32)
        out = augment_video(video, np.random.default_rng(2), 1.0)
        self.assertEqual(len(np.unique(out)), 1)

    def test_clips_of_a_batch_differ(self):
        videos = np.full((4, 2, 4, 4, 3), 0.5, dtype=np.float32)
        out = augment_batch(videos, np.random.default_rng(3), 1.0)
        self.assertEqual(out.shape, videos.shape)
        self.assertGreater(len(np.unique(out[:, 0, 0, 0, 0])), 1)

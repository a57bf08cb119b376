#    This file is part of bevtrack 0.1.
#    Copyright (C) 2024-2026  The bevtrack authors
#
#    bevtrack is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.


"""
:synopsis: Scene simulator test cases.
"""


# standard library imports
import math
import unittest

# third party imports
import numpy as np

# library specific imports
import src.config
import src.geometry
import src.scenesim

from src.scenesim import LidarSpec, NoiseProfile, ObjectScript, Scenario


def _script(track_id, x, y, size=(1.8, 4.5, 1.6), yaw=0.0, speed=0.0, turn=0.0):
    return ObjectScript(
        track_id, 2, 0, 3, x, y, yaw, speed, turn, *size,
        src.scenesim.texture_code(track_id),
    )


def _scenario(objects, seed=0, ground_points=0, cameras=None, noise=None):
    return Scenario(
        seed,
        3,
        0.5,
        tuple(objects),
        cameras or src.geometry.default_rig(96, 64),
        LidarSpec(400.0, ground_points, 1.8, 40.0),
        noise or NoiseProfile.zero(),
        18.0,
        8,
    )


class TestScenario(unittest.TestCase):
    """Scenario generation test cases."""

    def setUp(self):
        """Set up test cases."""
        self.config = src.config.default_config()

    def test_determinism(self):
        """Test generating scenario.

        Trying: same seed twice
        Expecting: identical objects and sensor data
        """
        a = src.scenesim.generate_scenario(5, self.config)
        b = src.scenesim.generate_scenario(5, self.config)
        self.assertEqual(a.objects, b.objects)
        self.assertTrue(
            np.array_equal(
                src.scenesim.render_lidar(a, 3), src.scenesim.render_lidar(b, 3)
            )
        )
        self.assertEqual(src.scenesim.detect(a, 3), src.scenesim.detect(b, 3))

    def test_invariants(self):
        """Test generating scenario.

        Trying: several seeds
        Expecting: unique ids, death after birth, valid boxes
        """
        for seed in range(5):
            scenario = src.scenesim.generate_scenario(seed, self.config)
            ids = [script.track_id for script in scenario.objects]
            self.assertEqual(len(ids), len(set(ids)))
            for script in scenario.objects:
                self.assertGreater(script.death, script.birth)
            for frame in range(scenario.frames):
                for gt in src.scenesim.ground_truth(scenario, frame):
                    self.assertTrue(gt.box.is_valid)

    def test_no_objects(self):
        """Test generating scenario.

        Trying: zero objects requested
        Expecting: valid empty scenario
        """
        self.config["scenario"]["min_objects"] = 0
        self.config["scenario"]["max_objects"] = 0
        scenario = src.scenesim.generate_scenario(1, self.config)
        self.assertEqual(scenario.objects, ())
        self.assertEqual(src.scenesim.ground_truth(scenario, 0), ())

    def test_crossing(self):
        """Test generating crossing scenario.

        Trying: crossing family
        Expecting: pairs of same-class, same-size objects with distinct
        texture codes
        """
        self.config["scenario"]["crossing"] = True
        self.config["scenario"]["min_objects"] = 2
        self.config["scenario"]["max_objects"] = 2
        first, second = src.scenesim.generate_scenario(2, self.config).objects
        self.assertEqual(first.class_id, second.class_id)
        self.assertEqual((first.w, first.l, first.h), (second.w, second.l, second.h))
        self.assertNotEqual(first.texture, second.texture)

    def test_static(self):
        """Test object script.

        Trying: static object over all frames
        Expecting: identical boxes
        """
        script = _script(0, 5.0, 2.0)
        boxes = {script.box(frame, 0.5) for frame in range(3)}
        self.assertEqual(len(boxes), 1)

    def test_constant_velocity(self):
        """Test object script.

        Trying: constant velocity
        Expecting: displacement v*dt per frame
        """
        script = _script(0, 5.0, 2.0, yaw=0.3, speed=4.0)
        previous = script.box(0, 0.5)
        for frame in range(1, 3):
            box = script.box(frame, 0.5)
            self.assertAlmostEqual(
                math.hypot(box.cx - previous.cx, box.cy - previous.cy), 2.0, places=12
            )
            previous = box

    def test_seeds(self):
        """Test scenario seeds.

        Trying: train and val seeds
        Expecting: configured counts, disjoint sets
        """
        train = src.scenesim.scenario_seeds(self.config, "train")
        val = src.scenesim.scenario_seeds(self.config, "val")
        self.assertEqual(len(train), 50)
        self.assertEqual(len(val), 10)
        self.assertFalse(set(train) & set(val))


class TestLidar(unittest.TestCase):
    """LiDAR test cases."""

    def test_surface(self):
        """Test rendering LiDAR.

        Trying: single box five meters ahead
        Expecting: every object point on the box surface
        """
        script = _script(0, 7.25, 0.0)
        scenario = _scenario([script], ground_points=100)
        points, labels = src.scenesim.render_lidar(scenario, 0, labels=True)
        objects = points[labels == 0]
        self.assertGreater(len(objects), 0)
        box = script.box(0, 0.5)
        local = np.abs(src.geometry.points_to_box_frame(objects[:, :3], box))
        excess = local - np.array((box.l / 2, box.w / 2, box.h / 2))
        self.assertTrue((excess <= 1e-9).all())
        self.assertTrue((np.abs(excess).min(axis=1) <= 1e-9).all())
        self.assertTrue((points[labels == -1][:, 2] == 0).all())

    def test_inverse_square(self):
        """Test rendering LiDAR.

        Trying: box at 10 m then at 20 m over 100 seeds
        Expecting: point count ratio of about 4
        """
        near = far = 0
        for seed in range(100):
            near_scenario = _scenario([_script(0, 10.0, 0.0)], seed)
            far_scenario = _scenario([_script(0, 20.0, 0.0)], seed)
            near += len(src.scenesim.render_lidar(near_scenario, 0))
            far += len(src.scenesim.render_lidar(far_scenario, 0))
        self.assertAlmostEqual(near / far, 4.0, delta=0.6)

    def test_occlusion(self):
        """Test rendering LiDAR.

        Trying: small box hidden behind a tall one
        Expecting: no points from the hidden box, occlusion flag set
        """
        wall = _script(0, 6.0, 0.0, size=(3.0, 2.0, 3.0))
        hidden = _script(1, 12.0, 0.0, size=(0.5, 0.5, 0.5))
        scenario = _scenario([wall, hidden])
        _, labels = src.scenesim.render_lidar(scenario, 0, labels=True)
        self.assertEqual(int((labels == 1).sum()), 0)
        self.assertGreater(int((labels == 0).sum()), 0)
        self.assertEqual(src.scenesim.occlusion_flags(scenario, 0), frozenset({1}))

    def test_frame_range(self):
        """Test rendering LiDAR.

        Trying: frame out of range
        Expecting: IndexError
        """
        with self.assertRaises(IndexError):
            src.scenesim.render_lidar(_scenario([]), 3)


class TestCameras(unittest.TestCase):
    """Camera rendering test cases."""

    def test_out_of_view(self):
        """Test rendering cameras.

        Trying: object behind the only camera
        Expecting: empty grid
        """
        front = src.geometry.default_rig(96, 64)[:1]
        scenario = _scenario([_script(0, -10.0, 0.0)], cameras=front)
        images = src.scenesim.render_cameras(scenario, 0)
        self.assertEqual(images.shape, (1, 64, 96, 8))
        self.assertFalse(images.any())

    def test_optical_axis(self):
        """Test rendering cameras.

        Trying: object on the front camera axis
        Expecting: silhouette centered on the principal point column
        """
        scenario = _scenario([_script(0, 10.0, 0.0)])
        mask = src.scenesim.render_cameras(scenario, 0)[0, :, :, 0]
        rows, cols = np.nonzero(mask)
        self.assertGreater(len(cols), 0)
        self.assertAlmostEqual(float((cols + 0.5).mean()), 48.0, delta=0.5)

    def test_painter(self):
        """Test rendering cameras.

        Trying: two objects on the same ray
        Expecting: nearer object's code wherever it is visible
        """
        near = _script(0, 8.0, 0.0, size=(0.7, 0.7, 1.8))
        far = _script(1, 16.0, 0.0)
        alone = src.scenesim.render_cameras(_scenario([near]), 0)[0]
        both = src.scenesim.render_cameras(_scenario([near, far]), 0)[0]
        overlap = alone[:, :, 0] > 0
        self.assertTrue(overlap.any())
        np.testing.assert_array_equal(both[overlap], alone[overlap])
        self.assertTrue((both[~overlap][:, 0] > 0).any())


class TestDetector(unittest.TestCase):
    """Detector emulation test cases."""

    def setUp(self):
        """Set up test cases."""
        self.truth = [
            _script(0, 5.0, 1.0).box(0, 0.5),
            _script(1, -6.0, 3.0, yaw=1.0).box(0, 0.5),
        ]

    def test_zero_noise(self):
        """Test emulating detector.

        Trying: zero-noise profile
        Expecting: ground truth with score 1
        """
        detections = src.scenesim.simulate_detector(self.truth, NoiseProfile.zero(), 3)
        self.assertEqual(detections, [box._replace(score=1.0) for box in self.truth])

    def test_false_negatives(self):
        """Test emulating detector.

        Trying: false negative rate 1
        Expecting: no detections
        """
        profile = NoiseProfile.zero()._replace(fn_rate=1.0)
        self.assertEqual(src.scenesim.simulate_detector(self.truth, profile, 3), [])

    def test_center_rmse(self):
        """Test emulating detector.

        Trying: center sigma 0.3 over 1000 trials
        Expecting: center RMSE 0.3*sqrt(3) within 5%
        """
        profile = NoiseProfile.zero()._replace(center_sigma=0.3)
        squared = []
        for seed in range(1000):
            box = src.scenesim.simulate_detector(self.truth[:1], profile, seed)[0]
            squared.append(
                sum((a - b) ** 2 for a, b in zip(box.center, self.truth[0].center))
            )
        rmse = math.sqrt(sum(squared) / len(squared))
        expected = 0.3 * math.sqrt(3)
        self.assertAlmostEqual(rmse, expected, delta=0.05 * expected)

    def test_valid_boxes(self):
        """Test emulating detector.

        Trying: huge size noise, false positives
        Expecting: valid boxes only
        """
        profile = NoiseProfile(0.5, 5.0, 2.0, 1.0, 0.1, 0.0, 0.9, 0.0)
        for seed in range(20):
            for box in src.scenesim.simulate_detector(self.truth, profile, seed):
                self.assertTrue(box.is_valid)
                self.assertGreaterEqual(min(box.w, box.l, box.h), 0.1)

    def test_profile(self):
        """Test noise profile.

        Trying: negative sigma, rate above 1, false positive rate 1
        Expecting: ValueError
        """
        with self.assertRaises(ValueError):
            NoiseProfile(-0.1, 0, 0, 1.0, 0, 0, 0, 0)
        with self.assertRaises(ValueError):
            NoiseProfile(0, 0, 0, 1.0, 0, 1.5, 0, 0)
        with self.assertRaises(ValueError):
            NoiseProfile(0, 0, 0, 1.0, 0, 0, 1.0, 0)
        self.assertEqual(NoiseProfile(0, 0, 0, 1.0, 0, 1.0, 0, 0).fn_rate, 1.0)

    def test_certain_false_positives(self):
        """Test simulating detections.

        Trying: profile copied with false positive rate 1
        Expecting: ValueError instead of endless false positives
        """
        profile = NoiseProfile.zero()._replace(fp_rate=1.0)
        with self.assertRaises(ValueError):
            src.scenesim.simulate_detector(self.truth, profile, 0)


class TestFrame(unittest.TestCase):
    """Frame bundle test cases."""

    def test_render_frame(self):
        """Test rendering frame.

        Trying: default scenario frame
        Expecting: consistent bundle
        """
        config = src.config.default_config()
        scenario = src.scenesim.generate_scenario(9, config)
        bundle = src.scenesim.render_frame(scenario, 4)
        self.assertEqual(bundle.frame, 4)
        self.assertEqual(bundle.images.shape, (6, 64, 96, 8))
        self.assertTrue(np.isfinite(bundle.points).all())
        self.assertEqual(bundle.points.shape[1], 4)
        ids = {gt.track_id for gt in bundle.ground_truth}
        self.assertTrue(bundle.occluded <= ids)

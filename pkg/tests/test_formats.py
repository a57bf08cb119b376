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
:synopsis: Result file and archive test cases.
"""


# standard library imports
import json
import math
import tempfile
import unittest

from pathlib import Path

# third party imports
import numpy as np
import torch

# library specific imports
import src.formats
import src.nncore
import src.scenesim

from src import CLASSES, Box3D, TrackedObject
from src.formats import KittiTrackRow


KITTI_LINE = (
    "0 3 Car 0.0 0 -1.5707963267948966 10.0 20.0 40.0 50.0 "
    "1.6 1.8 4.5 0.0 1.5 10.0 -1.5707963267948966 0.9"
)


def _car(track_id, x, y, yaw=0.0, confidence=0.8):
    box = Box3D(x, y, 0.8, 1.8, 4.5, 1.6, yaw, confidence, 2)
    return TrackedObject(box, 2, confidence, track_id)


def _random_float(rng):
    return float(rng.normal(0.0, 10.0 ** int(rng.integers(-3, 4))))


def _random_kitti_row(rng):
    return KittiTrackRow(
        int(rng.integers(0, 10000)),
        int(rng.integers(-1, 1000)),
        str(rng.choice(list(src.formats.KITTI_TYPES.values()))),
        float(rng.uniform()),
        int(rng.integers(0, 4)),
        *(_random_float(rng) for _ in range(12)),
        float(rng.uniform()) if rng.uniform() < 0.5 else None,
    )


def _random_nusc_record(rng, token):
    return src.formats.NuscTrackRecord(
        token,
        tuple(_random_float(rng) for _ in range(3)),
        tuple(float(value) for value in rng.uniform(0.1, 12.0, size=3)),
        src.formats.yaw_to_quaternion(float(rng.uniform(-math.pi, math.pi))),
        tuple(_random_float(rng) for _ in range(2)),
        str(int(rng.integers(0, 10**6))),
        str(rng.choice(CLASSES)),
        float(rng.uniform()),
    )


class TestKitti(unittest.TestCase):
    """KITTI tracking file test cases."""

    def setUp(self):
        """Set up test cases."""
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "0000.txt"

    def tearDown(self):
        """Tear down test cases."""
        self.directory.cleanup()

    def test_empty(self):
        """Test reading KITTI file.

        Trying: empty file, blank lines only
        Expecting: no rows
        """
        self.path.write_text("")
        self.assertEqual(src.formats.read_kitti(self.path), [])
        self.path.write_text("\n\n")
        self.assertEqual(src.formats.read_kitti(self.path), [])

    def test_parse(self):
        """Test parsing KITTI row.

        Trying: row with score, row without score
        Expecting: typed fields
        """
        row = src.formats.parse_kitti_line(KITTI_LINE)
        self.assertEqual((row.frame, row.track_id, row.type), (0, 3, "Car"))
        self.assertEqual(row.bbox2d, (10.0, 20.0, 40.0, 50.0))
        self.assertEqual(row.dimensions, (1.6, 1.8, 4.5))
        self.assertEqual(row.location, (0.0, 1.5, 10.0))
        self.assertEqual(row.score, 0.9)
        row = src.formats.parse_kitti_line(KITTI_LINE.rsplit(" ", 1)[0])
        self.assertIsNone(row.score)

    def test_malformed(self):
        """Test reading KITTI file.

        Trying: valid line followed by a line with a non-numeric field
        Expecting: KittiFormatError naming line 2
        """
        self.path.write_text(KITTI_LINE + "\n" + KITTI_LINE.replace("10.0", "ten", 1))
        with self.assertRaises(src.formats.KittiFormatError) as context:
            src.formats.read_kitti(self.path)
        self.assertEqual(context.exception.line, 2)
        self.assertIn(":2:", str(context.exception))

    def test_field_count(self):
        """Test parsing KITTI row.

        Trying: 16 fields, 19 fields, fractional frame
        Expecting: KittiFormatError
        """
        fields = KITTI_LINE.split()
        for text in (
            " ".join(fields[:16]),
            KITTI_LINE + " 1.0",
            "0.5 " + " ".join(fields[1:]),
        ):
            with self.assertRaises(src.formats.KittiFormatError):
                src.formats.parse_kitti_line(text)

    def test_write_read(self):
        """Test writing and reading KITTI file.

        Trying: two rows written and read back
        Expecting: identical rows
        """
        rows = [
            src.formats.parse_kitti_line(KITTI_LINE),
            KittiTrackRow(1, 4, "Pedestrian", 0.0, 1, 0.1, 1, 2, 3, 4, 1.8, 0.7, 0.7,
                          -1.0 / 3, 1.5, 7.0, 0.2),
        ]
        src.formats.write_kitti(self.path, rows)
        read = src.formats.read_kitti(self.path)
        self.assertEqual(read, rows)

    def test_random_round_trip(self):
        """Test writing and reading KITTI file.

        Trying: 1000 random rows in files of 5
        Expecting: identical rows
        """
        rng = np.random.default_rng(11)
        for _ in range(200):
            rows = [_random_kitti_row(rng) for _ in range(5)]
            src.formats.write_kitti(self.path, rows)
            self.assertEqual(src.formats.read_kitti(self.path), rows)

    def test_camera_frame(self):
        """Test converting object into KITTI row.

        Trying: car 10 m ahead heading forward
        Expecting: bottom center (0, 1.5, 10) in the front camera, heading
        along the optical axis
        """
        cam = src.formats.kitti_camera()
        row = src.formats.object_to_kitti(_car(7, 10.0, 0.0), 3, cam)
        self.assertEqual((row.frame, row.track_id, row.type), (3, 7, "Car"))
        np.testing.assert_allclose(row.location, (0.0, 1.5, 10.0), atol=1e-9)
        self.assertAlmostEqual(row.rotation_y, -math.pi / 2)
        self.assertAlmostEqual(row.alpha, -math.pi / 2)
        left, top, right, bottom = row.bbox2d
        self.assertLess(left, cam.cx)
        self.assertGreater(right, cam.cx)
        self.assertLessEqual(bottom, cam.height)

    def test_ego_round_trip(self):
        """Test converting between ego frame and KITTI rows.

        Trying: rotated car to the front left and back
        Expecting: same box
        """
        cam = src.formats.kitti_camera()
        obj = _car(1, 12.0, 3.0, yaw=0.7)
        row = src.formats.object_to_kitti(obj, 0, cam)
        back = src.formats.kitti_to_object(row, cam)
        self.assertEqual((back.track_id, back.class_id), (1, 2))
        np.testing.assert_allclose(back.box[:7], obj.box[:7], atol=1e-9)

    def test_unknown_type(self):
        """Test converting KITTI row.

        Trying: unknown object type
        Expecting: KittiFormatError
        """
        row = src.formats.parse_kitti_line(KITTI_LINE.replace("Car", "Tram"))
        with self.assertRaises(src.formats.KittiFormatError):
            src.formats.kitti_to_object(row, src.formats.kitti_camera())


class TestNusc(unittest.TestCase):
    """nuScenes tracking result test cases."""

    def setUp(self):
        """Set up test cases."""
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "results.json"

    def tearDown(self):
        """Tear down test cases."""
        self.directory.cleanup()

    def test_quaternion(self):
        """Test converting yaw.

        Trying: yaw π/2
        Expecting: (cos π/4, 0, 0, sin π/4) and back
        """
        quaternion = src.formats.yaw_to_quaternion(math.pi / 2)
        np.testing.assert_allclose(
            quaternion, (math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4))
        )
        self.assertAlmostEqual(src.formats.quaternion_to_yaw(quaternion), math.pi / 2)
        self.assertAlmostEqual(
            src.formats.quaternion_to_yaw(src.formats.yaw_to_quaternion(math.pi)),
            math.pi,
        )

    def test_empty(self):
        """Test writing nuScenes results.

        Trying: no samples
        Expecting: empty results with meta
        """
        src.formats.write_nusc_results(self.path, {})
        results, meta = src.formats.read_nusc_results(self.path)
        self.assertEqual(results, {})
        self.assertTrue(meta["use_lidar"])
        self.assertFalse(meta["use_radar"])

    def test_write_read(self):
        """Test writing and reading nuScenes results.

        Trying: two-frame sequence of a moving car
        Expecting: records equal after reading, velocity 2 m/s
        """
        frames = [[_car(4, 10.0, 0.0)], [_car(4, 11.0, 0.0)]]
        results = src.formats.sequence_to_nusc(frames, seed=12, dt=0.5)
        self.assertEqual(list(results), ["0000000012-0000", "0000000012-0001"])
        src.formats.write_nusc_results(self.path, results)
        read, _ = src.formats.read_nusc_results(self.path)
        self.assertEqual(read, results)
        record = read["0000000012-0001"][0]
        self.assertEqual(record.velocity, (2.0, 0.0))
        self.assertEqual(record.tracking_name, "car")
        self.assertEqual(record.tracking_id, "4")
        back = src.formats.nusc_to_object(record)
        self.assertEqual(back.track_id, 4)
        self.assertAlmostEqual(back.box.cx, 11.0)

    def test_random_round_trip(self):
        """Test writing and reading nuScenes results.

        Trying: 1000 random records in files of 10 over up to 3 samples
        Expecting: identical records
        """
        rng = np.random.default_rng(13)
        for case in range(100):
            results = {}
            for _ in range(10):
                token = f"{case:010d}-{int(rng.integers(0, 3)):04d}"
                results.setdefault(token, []).append(_random_nusc_record(rng, token))
            src.formats.write_nusc_results(self.path, results)
            read, _ = src.formats.read_nusc_results(self.path)
            self.assertEqual(read, results)

    def test_invalid_types(self):
        """Test reading nuScenes results.

        Trying: string score, string translation, boolean size, NaN
        velocity, integer id, sample token differing from its key
        Expecting: NuscFormatError
        """
        item = src.formats.object_to_nusc(_car(1, 1.0, 1.0), "token")._asdict()
        for update in (
            {"tracking_score": "0.5"},
            {"translation": "abc"},
            {"size": [True, 1.0, 1.0]},
            {"velocity": [float("nan"), 0.0]},
            {"tracking_id": 1},
            {"sample_token": "other"},
        ):
            document = {"results": {"token": [dict(item, **update)]}}
            self.path.write_text(json.dumps(document))
            with self.assertRaises(src.formats.NuscFormatError):
                src.formats.read_nusc_results(self.path)
        for results in ({"token": {}}, {"token": ["record"]}):
            self.path.write_text(json.dumps({"results": results}))
            with self.assertRaises(src.formats.NuscFormatError):
                src.formats.read_nusc_results(self.path)

    def test_write_misplaced(self):
        """Test writing nuScenes results.

        Trying: record filed under another sample token
        Expecting: NuscFormatError
        """
        record = src.formats.object_to_nusc(_car(1, 1.0, 1.0), "token")
        with self.assertRaises(src.formats.NuscFormatError):
            src.formats.write_nusc_results(self.path, {"other": [record]})

    def test_default_meta(self):
        """Test modality flags.

        Trying: LiDAR only
        Expecting: camera off, LiDAR on, other sources off
        """
        meta = src.formats.default_meta(use_camera=False)
        self.assertFalse(meta["use_camera"])
        self.assertTrue(meta["use_lidar"])
        self.assertFalse(meta["use_radar"] or meta["use_map"] or meta["use_external"])

    def test_velocities(self):
        """Test finite-difference velocities.

        Trying: track seen in frames 0 and 1, singleton in frame 2
        Expecting: forward difference, backward difference, zero
        """
        frames = [[_car(1, 0.0, 0.0)], [_car(1, 0.0, 1.0)], [_car(2, 5.0, 5.0)]]
        velocities = src.formats.finite_difference_velocities(frames, 0.5)
        self.assertEqual(velocities[0][1], (0.0, 2.0))
        self.assertEqual(velocities[1][1], (0.0, 2.0))
        self.assertEqual(velocities[2][2], (0.0, 0.0))

    def test_invalid(self):
        """Test reading nuScenes results.

        Trying: non-unit quaternion, unknown class, malformed JSON,
        missing field
        Expecting: NuscFormatError
        """
        record = src.formats.object_to_nusc(_car(1, 1.0, 1.0), "token")
        document = {"meta": {}, "results": {"token": [record._asdict()]}}
        for update in (
            {"rotation": [1.0, 0.0, 0.0, 0.5]},
            {"tracking_name": "tram"},
            {"tracking_score": 1.5},
        ):
            item = dict(record._asdict(), **update)
            self.path.write_text(json.dumps({"results": {"token": [item]}}))
            with self.assertRaises(src.formats.NuscFormatError):
                src.formats.read_nusc_results(self.path)
        del document["results"]["token"][0]["size"]
        self.path.write_text(json.dumps(document))
        with self.assertRaises(src.formats.NuscFormatError):
            src.formats.read_nusc_results(self.path)
        self.path.write_text("{")
        with self.assertRaises(src.formats.NuscFormatError):
            src.formats.read_nusc_results(self.path)

    def test_write_invalid(self):
        """Test writing nuScenes results.

        Trying: record with a non-unit quaternion
        Expecting: NuscFormatError, no file
        """
        record = src.formats.object_to_nusc(_car(1, 1.0, 1.0), "token")
        record = record._replace(rotation=(2.0, 0.0, 0.0, 0.0))
        with self.assertRaises(src.formats.NuscFormatError):
            src.formats.write_nusc_results(self.path, {"token": [record]})
        self.assertFalse(self.path.exists())


class TestArchive(unittest.TestCase):
    """Archive test cases."""

    def setUp(self):
        """Set up test cases."""
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "archive"

    def tearDown(self):
        """Tear down test cases."""
        self.directory.cleanup()

    def test_write_read(self):
        """Test writing and reading archive.

        Trying: float and integer arrays
        Expecting: same arrays and meta, deterministic manifest
        """
        arrays = {
            "a": np.arange(6, dtype=float).reshape(2, 3),
            "b": np.array([1, -2, 3], dtype=np.int64),
        }
        src.formats.write_archive(self.path, arrays, {"name": "x"})
        manifest = (self.path / "manifest.json").read_bytes()
        meta, read = src.formats.read_archive(self.path)
        self.assertEqual(meta, {"name": "x"})
        for name, array in arrays.items():
            np.testing.assert_array_equal(read[name], array)
            self.assertEqual(read[name].dtype, array.dtype)
        src.formats.write_archive(self.path, arrays, {"name": "x"})
        self.assertEqual((self.path / "manifest.json").read_bytes(), manifest)

    def test_missing_blob(self):
        """Test reading archive.

        Trying: blob deleted, blob truncated, no manifest
        Expecting: ArchiveError
        """
        src.formats.write_archive(self.path, {"a": np.zeros(4)}, {})
        (self.path / "a.bin").write_bytes(b"\0" * 8)
        with self.assertRaises(src.formats.ArchiveError):
            src.formats.read_archive(self.path)
        (self.path / "a.bin").unlink()
        with self.assertRaises(src.formats.ArchiveError):
            src.formats.read_archive(self.path)
        with self.assertRaises(src.formats.ArchiveError):
            src.formats.read_archive(Path(self.directory.name) / "nothing")

    def test_params(self):
        """Test saving and loading parameters.

        Trying: linear layer after two steps
        Expecting: same names, values and step
        """
        store = src.nncore.ParamStore()
        src.nncore.init_linear(store, "fc", 3, 2, src.nncore.make_rng(0, "test"))
        store.step = 2
        src.formats.save_params(store, self.path, {"kind": "smoother"})
        loaded, meta = src.formats.load_params(self.path)
        self.assertEqual(list(loaded.params), list(store.params))
        self.assertEqual(loaded.step, 2)
        self.assertEqual(meta["kind"], "smoother")
        for name in store.params:
            self.assertTrue(torch.equal(loaded[name].detach(), store[name].detach()))

    def test_scenario(self):
        """Test saving and loading scenario.

        Trying: two cars, three frames, images not stored
        Expecting: same scenario, ground truth, points and re-rendered images
        """
        objects = tuple(
            src.scenesim.ObjectScript(
                track_id, 2, 0, 3, x, y, 0.0, 1.0, 0.0, 1.8, 4.5, 1.6,
                src.scenesim.texture_code(track_id),
            )
            for track_id, x, y in ((0, 8.0, 2.0), (1, -6.0, -5.0))
        )
        scenario = src.scenesim.Scenario(
            3,
            3,
            0.5,
            objects,
            src.geometry.default_rig(48, 32),
            src.scenesim.LidarSpec(400.0, 50, 1.8, 40.0),
            src.scenesim.NoiseProfile(0.1, 0.05, 0.05, 1.0, 0.1, 0.1, 0.2, 0.0),
            18.0,
            4,
        )
        src.formats.save_scenario(scenario, self.path)
        loaded, frames = src.formats.load_scenario(self.path)
        self.assertEqual(loaded, scenario._replace(cameras=loaded.cameras))
        self.assertEqual(len(frames), 3)
        for t, bundle in enumerate(frames):
            expected = src.scenesim.render_frame(scenario, t)
            self.assertEqual(bundle.ground_truth, expected.ground_truth)
            self.assertEqual(bundle.detections, expected.detections)
            self.assertEqual(bundle.occluded, expected.occluded)
            np.testing.assert_array_equal(bundle.points, expected.points)
            np.testing.assert_array_equal(bundle.images, expected.images)

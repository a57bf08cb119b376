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
:synopsis: Smoother test cases.
"""


# standard library imports
import math
import unittest

# third party imports
import numpy as np
import torch

# library specific imports
import src.config
import src.nncore
import src.smoother

from src import Box3D
from src.nncore import AttentionConfig, ParamStore


CFG = AttentionConfig(16, 2, 0.0)


def _store(blocks=1, perturb=False):
    store = ParamStore()
    src.smoother.init_smoother(store, CFG, blocks, src.nncore.make_rng(0, "smoother"))
    if perturb:
        rng = src.nncore.make_rng(1, "head")
        with torch.no_grad():
            head = store["smoother.head.w"]
            head.copy_(torch.as_tensor(rng.normal(0, 0.1, tuple(head.shape))))
    return store


def _sequence(frames=5):
    return [
        [
            Box3D(2.0 + t, 1.0, 0.9, 1.8, 4.2, 1.6, 0.3, 0.8, 2),
            Box3D(-3.0, 4.0 - 0.5 * t, 0.8, 0.7, 0.8, 1.7, -1.2, 0.6, 4),
        ]
        for t in range(frames)
    ]


class TestWindow(unittest.TestCase):
    """Detection window test cases."""

    def test_online(self):
        """Test online window.

        Trying: target 5, length 3
        Expecting: frames 3 to 5
        """
        window = src.smoother.make_window(_sequence(10), 5, 3, "online")
        self.assertEqual([t for t, _ in window.frames], [3, 4, 5])
        self.assertEqual(len(window.target_detections), 2)

    def test_online_clamped(self):
        """Test online window.

        Trying: target 1, length 8
        Expecting: frames 0 and 1
        """
        window = src.smoother.make_window(_sequence(10), 1, 8, "online")
        self.assertEqual([t for t, _ in window.frames], [0, 1])

    def test_offline(self):
        """Test offline window.

        Trying: even and odd lengths
        Expecting: centered frames, one more in the past for even lengths
        """
        self.assertEqual(src.smoother.window_bounds(5, 4, "offline", 10), (3, 6))
        self.assertEqual(src.smoother.window_bounds(5, 3, "offline", 10), (4, 6))
        self.assertEqual(src.smoother.window_bounds(8, 5, "offline", 10), (6, 9))

    def test_single(self):
        """Test window.

        Trying: length 1
        Expecting: only the target frame
        """
        for mode in ("online", "offline"):
            self.assertEqual(src.smoother.window_bounds(4, 1, mode, 10), (4, 4))

    def test_invalid(self):
        """Test window.

        Trying: length 0, unknown mode, target out of range
        Expecting: ValueError, ValueError, IndexError
        """
        with self.assertRaises(ValueError):
            src.smoother.window_bounds(0, 0, "online", 3)
        with self.assertRaises(ValueError):
            src.smoother.window_bounds(0, 2, "causal", 3)
        with self.assertRaises(IndexError):
            src.smoother.make_window(_sequence(3), 3, 2)


class TestEmbedding(unittest.TestCase):
    """Box embedding test cases."""

    def test_identical(self):
        """Test box embedding.

        Trying: the same box twice
        Expecting: identical embeddings
        """
        store = _store()
        box = _sequence(1)[0][0]
        a = src.smoother.embed_box(box, -2, store)
        b = src.smoother.embed_box(box, -2, store)
        self.assertTrue(torch.equal(a, b))

    def test_periodic_yaw(self):
        """Test box embedding.

        Trying: yaw and yaw + 2π
        Expecting: identical embeddings
        """
        store = _store()
        box = _sequence(1)[0][0]
        a = src.smoother.embed_box(box, 0, store)
        b = src.smoother.embed_box(box._replace(yaw=box.yaw + 2 * math.pi), 0, store)
        self.assertTrue(torch.allclose(a, b, atol=1e-12))

    def test_oracle(self):
        """Test box embedding.

        Trying: straight-line replay of the embedding formula
        Expecting: same vector
        """
        store = _store()
        box = Box3D(1.0, 2.0, 0.5, 2.0, 4.0, 1.5, 0.25, 0.7, 2)
        offset = -3
        rates = [1.0 / 100.0 ** (i / 4) for i in range(4)]
        features = [
            1.0,
            2.0,
            0.5,
            math.log(2.0),
            math.log(4.0),
            math.log(1.5),
            math.sin(0.25),
            math.cos(0.25),
            0.7,
        ]
        features += [math.sin(offset * rate) for rate in rates]
        features += [math.cos(offset * rate) for rate in rates]
        w = store["smoother.embed.w"].detach().numpy()
        b = store["smoother.embed.b"].detach().numpy()
        expected = np.asarray(features) @ w + b
        actual = src.smoother.embed_box(box, offset, store).detach().numpy()
        np.testing.assert_allclose(actual, expected, atol=1e-12)


class TestSmooth(unittest.TestCase):
    """Smoothing test cases."""

    def test_identity_at_init(self):
        """Test smoothing.

        Trying: window length 1, residual head at zero init
        Expecting: input boxes
        """
        store = _store()
        sequence = _sequence(3)
        window = src.smoother.make_window(sequence, 1, 1)
        smoothed = src.smoother.smooth(window, store, CFG, 1)
        self.assertEqual(smoothed.frame, 1)
        self.assertEqual(len(smoothed.boxes), 2)
        for box, source in zip(smoothed.boxes, sequence[1]):
            for field in Box3D._fields[:-1]:
                self.assertAlmostEqual(getattr(box, field), getattr(source, field))
            self.assertEqual(box.class_id, source.class_id)

    def test_empty_target(self):
        """Test smoothing.

        Trying: no detections in the target frame
        Expecting: empty output
        """
        sequence = _sequence(3)
        sequence[2] = []
        window = src.smoother.make_window(sequence, 2, 3)
        smoothed = src.smoother.smooth(window, _store(perturb=True), CFG, 1)
        self.assertEqual(smoothed.boxes, ())
        self.assertEqual(smoothed.lineage, ())

    def test_empty_sequence(self):
        """Test sequence smoothing.

        Trying: no frames
        Expecting: no smoothed frames
        """
        config = src.config.load_config(None)
        self.assertEqual(src.smoother.smooth_sequence([], _store(), config), [])

    def test_cardinality(self):
        """Test smoothing.

        Trying: perturbed head, offline window
        Expecting: one valid box per target detection, bijective lineage
        """
        sequence = _sequence(6)
        window = src.smoother.make_window(sequence, 3, 4, "offline")
        smoothed = src.smoother.smooth(window, _store(perturb=True), CFG, 1)
        self.assertEqual(len(smoothed.boxes), len(sequence[3]))
        self.assertEqual(sorted(smoothed.lineage), list(range(len(sequence[3]))))
        self.assertTrue(all(box.is_valid for box in smoothed.boxes))

    def test_causal(self):
        """Test online smoothing.

        Trying: perturb detections after the target frame
        Expecting: unchanged output
        """
        store = _store(perturb=True)
        sequence = _sequence(6)
        before = src.smoother.smooth(
            src.smoother.make_window(sequence, 3, 4), store, CFG, 1
        )
        sequence[4] = [sequence[4][0]._replace(cx=30.0)]
        sequence[5] = []
        after = src.smoother.smooth(
            src.smoother.make_window(sequence, 3, 4), store, CFG, 1
        )
        self.assertEqual(before, after)

    def test_context(self):
        """Test smoothing.

        Trying: perturbed head, past frame moved
        Expecting: target output changes
        """
        store = _store(perturb=True)
        sequence = _sequence(4)
        before = src.smoother.smooth(
            src.smoother.make_window(sequence, 3, 4), store, CFG, 1
        )
        sequence[1] = [sequence[1][0]._replace(cx=-8.0)]
        after = src.smoother.smooth(
            src.smoother.make_window(sequence, 3, 4), store, CFG, 1
        )
        self.assertNotEqual(before.boxes[0].cx, after.boxes[0].cx)

    def test_passthrough(self):
        """Test sequence smoothing.

        Trying: no smoother parameters
        Expecting: raw detections
        """
        sequence = _sequence(2)
        config = src.config.load_config(None)
        frames = src.smoother.smooth_sequence(sequence, None, config)
        self.assertEqual([list(frame.boxes) for frame in frames], sequence)

    def test_grad_check(self):
        """Test smoother gradients.

        Trying: finite differences on a mean loss
        Expecting: agreement
        """
        store = _store(blocks=1, perturb=True).eval()
        window = src.smoother.make_window(_sequence(3), 2, 3)

        def loss():
            params, logits = src.smoother.smooth_forward(window, store, CFG, 1)
            return params.mean() + torch.sigmoid(logits).mean()

        names = src.nncore.checkable_names(store)
        report = src.nncore.grad_check(loss, store, names=names, entries=6)
        self.assertTrue(report.passed, report)


if __name__ == "__main__":
    unittest.main()

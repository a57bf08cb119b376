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
:synopsis: Temporal box refinement over a window of detections.
"""


# standard library imports
import math
import logging
import collections

# third party imports
import numpy as np
import torch

# library specific imports
import src.geometry
import src.nncore

from src.nncore import AttentionConfig


# sinusoidal frame offset encoding width
OFFSET_DIMS = 8
# 8 box parameters, score, offset encoding
EMBED_INPUT = 8 + 1 + OFFSET_DIMS
# 8 box parameter residuals, score logit residual
HEAD_OUTPUT = 9
SCORE_EPS = 1e-6


_DetectionWindow = collections.namedtuple(
    "DetectionWindow", ("target", "frames", "length", "mode")
)


class DetectionWindow(_DetectionWindow):
    """Detections around a target frame.

    :ivar int target: target frame
    :ivar tuple frames: (frame, detections) pairs in frame order
    :ivar int length: window length W
    :ivar str mode: online or offline
    """

    __slots__ = ()

    @property
    def target_detections(self):
        for frame, detections in self.frames:
            if frame == self.target:
                return detections
        return ()


SmoothedFrame = collections.namedtuple("SmoothedFrame", ("frame", "boxes", "lineage"))


def window_bounds(target, length, mode, frames):
    """First and last frame of a window, clamped to the sequence.

    :param int target: target frame
    :param int length: window length
    :param str mode: online or offline
    :param int frames: sequence length

    :raises ValueError: on non-positive length or unknown mode

    :returns: first and last frame (inclusive)
    :rtype: tuple
    """
    if length < 1:
        raise ValueError(f"window length {length} is not positive")
    if mode == "online":
        first, last = target - length + 1, target
    elif mode == "offline":
        first = target - math.ceil((length - 1) / 2)
        last = target + (length - 1) // 2
    else:
        raise ValueError(f"unknown smoother mode '{mode}'")
    return max(0, first), min(frames - 1, last)


def make_window(detections, target, length, mode="online"):
    """Cut a detection window out of a sequence.

    :param list detections: per-frame detection lists
    :param int target: target frame
    :param int length: window length
    :param str mode: online or offline

    :raises IndexError: when the target frame is out of range

    :returns: window
    :rtype: DetectionWindow
    """
    if not 0 <= target < len(detections):
        raise IndexError(f"frame {target} not in [0,{len(detections)})")
    first, last = window_bounds(target, length, mode, len(detections))
    frames = tuple((t, tuple(detections[t])) for t in range(first, last + 1))
    return DetectionWindow(target, frames, length, mode)


def offset_encoding(offsets):
    """Sinusoidal encoding of frame offsets.

    :param offsets: frame offsets [N]

    :returns: encodings [N, OFFSET_DIMS]
    :rtype: ndarray
    """
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 1)
    rates = 1.0 / 100.0 ** (np.arange(OFFSET_DIMS // 2) / (OFFSET_DIMS // 2))
    angles = offsets * rates
    return np.concatenate((np.sin(angles), np.cos(angles)), axis=-1)


def box_features(boxes, offsets):
    """Embedding inputs: box parameters, score and offset encoding.

    :param list boxes: boxes
    :param offsets: frame offsets [N]

    :returns: features [N, EMBED_INPUT]
    :rtype: ndarray
    """
    if not boxes:
        return np.zeros((0, EMBED_INPUT))
    params = np.stack([src.geometry.box_params(box) for box in boxes])
    scores = np.array([[box.score] for box in boxes], dtype=float)
    return np.concatenate((params, scores, offset_encoding(offsets)), axis=-1)


def embed_boxes(boxes, offsets, store, name="smoother.embed"):
    """Learned embeddings of several boxes.

    :param list boxes: boxes
    :param offsets: frame offsets [N]
    :param ParamStore store: parameter store
    :param str name: layer name

    :returns: embeddings [N, D]
    :rtype: Tensor
    """
    x = torch.as_tensor(box_features(boxes, offsets), dtype=store.dtype)
    return src.nncore.apply_linear(x, store, name)


def embed_box(box, offset, store, name="smoother.embed"):
    """Learned embedding of one box at a frame offset.

    :param Box3D box: box
    :param int offset: frame offset to the target frame
    :param ParamStore store: parameter store
    :param str name: layer name

    :returns: embedding [D]
    :rtype: Tensor
    """
    return embed_boxes([box], [offset], store, name=name)[0]


def init_smoother(store, cfg, blocks, rng, name="smoother"):
    """Add smoother parameters; the residual head starts at zero.

    :param ParamStore store: parameter store
    :param AttentionConfig cfg: attention configuration
    :param int blocks: encoder blocks
    :param Generator rng: pseudo-random generator
    :param str name: model name
    """
    src.nncore.init_linear(store, f"{name}.embed", EMBED_INPUT, cfg.model_dim, rng)
    for index in range(blocks):
        src.nncore.init_encoder_block(store, f"{name}.block{index}", cfg, rng)
    src.nncore.init_linear(
        store, f"{name}.head", cfg.model_dim, HEAD_OUTPUT, rng, zero=True
    )


def smoother_settings(config):
    """Attention configuration and block count of a run configuration."""
    attention = config["attention"]
    cfg = AttentionConfig(
        attention["model_dim"], attention["heads"], attention["dropout"]
    )
    return cfg, config["smoother"]["blocks"]


def _logit(score):
    score = min(max(score, SCORE_EPS), 1.0 - SCORE_EPS)
    return math.log(score / (1.0 - score))


def smooth_forward(window, store, cfg, blocks, name="smoother"):
    """Refined target-frame parameters with gradients.

    :param DetectionWindow window: window
    :param ParamStore store: parameter store
    :param AttentionConfig cfg: attention configuration
    :param int blocks: encoder blocks
    :param str name: model name

    :returns: refined parameters [N, 8], score logits [N]
    :rtype: tuple
    """
    boxes, offsets, target = [], [], []
    for frame, detections in window.frames:
        for box in detections:
            target.append(frame == window.target)
            boxes.append(box)
            offsets.append(frame - window.target)
    target = torch.as_tensor(target, dtype=torch.bool)
    if not bool(target.any()):
        empty = torch.zeros((0, 8), dtype=store.dtype)
        return empty, torch.zeros(0, dtype=store.dtype)
    x = embed_boxes(boxes, offsets, store, name=f"{name}.embed")
    for index in range(blocks):
        x = src.nncore.encoder_block(x[None], store, f"{name}.block{index}", cfg)[0]
    residual = src.nncore.apply_linear(x[target], store, f"{name}.head")
    sources = [box for box, flag in zip(boxes, target.tolist()) if flag]
    params = torch.as_tensor(
        np.stack([src.geometry.box_params(box) for box in sources]), dtype=store.dtype
    )
    raw = torch.as_tensor([_logit(box.score) for box in sources], dtype=store.dtype)
    return params + residual[:, :8], raw + residual[:, 8]


def smooth(window, store, cfg, blocks, name="smoother"):
    """Refine the target-frame detections of a window.

    :param DetectionWindow window: window
    :param ParamStore store: parameter store
    :param AttentionConfig cfg: attention configuration
    :param int blocks: encoder blocks
    :param str name: model name

    :returns: one refined box per target-frame detection
    :rtype: SmoothedFrame
    """
    sources = window.target_detections
    with torch.no_grad():
        params, logits = smooth_forward(window, store, cfg, blocks, name=name)
    scores = torch.sigmoid(logits).tolist()
    boxes = tuple(
        src.geometry.params_to_box(row, score, box.class_id)
        for row, score, box in zip(params.numpy(), scores, sources)
    )
    return SmoothedFrame(window.target, boxes, tuple(range(len(boxes))))


def passthrough(detections, frame):
    """Unrefined detections as a smoothed frame."""
    return SmoothedFrame(frame, tuple(detections), tuple(range(len(detections))))


def smooth_sequence(detections, store, config, length=None, mode=None):
    """Refine every frame of a sequence.

    :param list detections: per-frame detection lists
    :param ParamStore store: smoother parameters (raw detections if None)
    :param dict config: run configuration
    :param int length: window length (configured if None)
    :param str mode: online or offline (configured if None)

    :returns: smoothed frames
    :rtype: list
    """
    logger = logging.getLogger().getChild(smooth_sequence.__name__)
    if store is None:
        return [passthrough(boxes, t) for t, boxes in enumerate(detections)]
    length = length or config["smoother"]["window"]
    mode = mode or config["smoother"]["mode"]
    cfg, blocks = smoother_settings(config)
    frames = [
        smooth(make_window(detections, t, length, mode), store, cfg, blocks)
        for t in range(len(detections))
    ]
    logger.debug(f"smoothed {len(frames)} frames, window {length} {mode}")
    return frames

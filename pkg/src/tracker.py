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
:synopsis: Query-based tracker over fused BEV features.
"""


# standard library imports
import math
import logging
import collections

# third party imports
import numpy as np
import torch

# library specific imports
import src.encfuse
import src.geometry
import src.nncore
import src.smoother

from src import NO_OBJECT, TrackedObject
from src.nncore import AttentionConfig


class SequenceError(RuntimeError):
    """Raised when frames are not fed in consecutive order."""

    pass


_TrackerSettings = collections.namedtuple(
    "TrackerSettings", ("cfg", "blocks", "delta", "dup_radius", "patience")
)


class TrackerSettings(_TrackerSettings):
    """Tracker hyperparameters.

    :ivar AttentionConfig cfg: attention configuration
    :ivar int blocks: decoder blocks
    :ivar float delta: confidence threshold
    :ivar float dup_radius: duplicate suppression radius (in meters)
    :ivar int patience: frames a low-confidence track survives unseen
    """

    __slots__ = ()

    @classmethod
    def from_config(cls, config):
        attention = config["attention"]
        tracker = config["tracker"]
        return cls(
            AttentionConfig(
                attention["model_dim"], attention["heads"], attention["dropout"]
            ),
            tracker["blocks"],
            tracker["delta"],
            tracker["dup_radius"],
            tracker["patience"],
        )


# detection queries: embeddings = keys + values
QuerySet = collections.namedtuple(
    "QuerySet", ("embeddings", "keys", "values", "boxes", "outside")
)

TrackQuery = collections.namedtuple(
    "TrackQuery", ("embedding", "track_id", "age", "confidence", "box", "misses")
)


class TrackerState(
    collections.namedtuple("TrackerState", ("queries", "next_id", "frame"))
):
    """Live track queries of one sequence.

    :ivar tuple queries: live track queries
    :ivar int next_id: next identity handed out
    :ivar int frame: last processed frame
    """

    __slots__ = ()

    @classmethod
    def start(cls, frame=0):
        """State before the given first frame."""
        return cls((), 1, frame - 1)


class HybridOutput(
    collections.namedtuple("HybridOutput", ("embeddings", "params", "logits"))
):
    """Decoded hybrid query set: propagated tracks first, detections after.

    :ivar Tensor embeddings: decoder outputs [N, D]
    :ivar Tensor params: box parameters [N, 8]
    :ivar Tensor logits: class logits with no-object last [N, K+1]
    """

    __slots__ = ()

    @property
    def confidences(self):
        probabilities = torch.softmax(self.logits, dim=-1)
        return (1.0 - probabilities[:, NO_OBJECT]).clamp(0.0, 1.0)

    @property
    def classes(self):
        return self.logits[:, :NO_OBJECT].argmax(dim=-1)


def init_tracker(store, cfg, channels, blocks, rng, name="tracker"):
    """Add tracker parameters; the box residual head starts at zero.

    :param ParamStore store: parameter store
    :param AttentionConfig cfg: attention configuration
    :param int channels: fused BEV channels
    :param int blocks: decoder blocks
    :param Generator rng: pseudo-random generator
    :param str name: model name
    """
    dim = cfg.model_dim
    src.nncore.init_linear(store, f"{name}.embed", src.smoother.EMBED_INPUT, dim, rng)
    src.nncore.init_linear(store, f"{name}.pool", channels, dim, rng, bias=False)
    store.add(f"{name}.origin", rng.normal(0.0, 0.02, size=(2, dim)))
    for index in range(blocks):
        src.nncore.init_decoder_block(store, f"{name}.block{index}", cfg, rng)
    src.nncore.init_linear(store, f"{name}.box", dim, 8, rng, zero=True)
    src.nncore.init_linear(store, f"{name}.cls", dim, NO_OBJECT + 1, rng)


def init_tracker_model(store, config, rng):
    """Add encoder, fusion and tracker parameters of a run configuration.

    :param ParamStore store: parameter store
    :param dict config: run configuration
    :param Generator rng: pseudo-random generator
    """
    settings = TrackerSettings.from_config(config)
    src.encfuse.init_encoders(store, config, rng)
    init_tracker(
        store, settings.cfg, config["bev"]["channels"], settings.blocks, rng
    )


def make_detection_queries(smoothed, fused, store, name="tracker"):
    """Detection queries of a frame.

    Queries are box embeddings plus projected ROI-pooled fused features.
    Keys are the box embeddings, values the projected pooled features.

    :param SmoothedFrame smoothed: smoothed detections
    :param BEVGrid fused: fused grid
    :param ParamStore store: parameter store
    :param str name: model name

    :returns: queries in detection order
    :rtype: QuerySet
    """
    boxes = tuple(smoothed.boxes)
    keys = src.smoother.embed_boxes(
        boxes, [0] * len(boxes), store, name=f"{name}.embed"
    )
    pooled, outside = src.encfuse.roi_pool_many(fused, boxes)
    values = src.nncore.apply_linear(
        pooled.to(store.dtype), store, f"{name}.pool"
    )
    return QuerySet(keys + values, keys, values, boxes, tuple(outside))


def box_param_tensor(boxes, dtype=src.nncore.DTYPE):
    """Box parameters [N, 8] of several boxes."""
    if not boxes:
        return torch.zeros((0, 8), dtype=dtype)
    rows = np.stack([src.geometry.box_params(box) for box in boxes])
    return torch.as_tensor(rows, dtype=dtype)


def decode_hybrid(
    track_embeddings, track_references, queries, store, settings, name="tracker"
):
    """Run the decoder over propagated track and detection queries.

    :param Tensor track_embeddings: propagated embeddings [Nt, D]
    :param Tensor track_references: reference box parameters [Nt, 8]
    :param QuerySet queries: detection queries
    :param ParamStore store: parameter store
    :param TrackerSettings settings: tracker hyperparameters
    :param str name: model name

    :returns: decoded queries
    :rtype: HybridOutput
    """
    origin = store[f"{name}.origin"]
    x = torch.cat(
        (track_embeddings + origin[0], queries.embeddings + origin[1]), dim=0
    )
    references = torch.cat(
        (track_references, box_param_tensor(queries.boxes, store.dtype)), dim=0
    )
    if x.shape[0] == 0:
        return HybridOutput(
            x, references, torch.zeros((0, NO_OBJECT + 1), dtype=store.dtype)
        )
    for index in range(settings.blocks):
        x = src.nncore.decoder_block(
            x,
            queries.keys,
            queries.values,
            store,
            f"{name}.block{index}",
            settings.cfg,
        )
    params = references + src.nncore.apply_linear(x, store, f"{name}.box")
    logits = src.nncore.apply_linear(x, store, f"{name}.cls")
    return HybridOutput(x, params, logits)


def track_embeddings(queries, dim, dtype=src.nncore.DTYPE):
    if not queries:
        return torch.zeros((0, dim), dtype=dtype)
    return torch.stack([query.embedding for query in queries])


def step(state, smoothed, fused, store, settings, name="tracker"):
    """Advance the tracker by one frame.

    :param TrackerState state: state after the previous frame
    :param SmoothedFrame smoothed: smoothed detections
    :param BEVGrid fused: fused grid
    :param ParamStore store: parameter store
    :param TrackerSettings settings: tracker hyperparameters
    :param str name: model name

    :raises SequenceError: when the frame does not follow the state's frame

    :returns: new state and confirmed tracks of the frame
    :rtype: tuple
    """
    logger = logging.getLogger().getChild(step.__name__)
    if smoothed.frame != state.frame + 1:
        raise SequenceError(
            f"frame {smoothed.frame} does not follow frame {state.frame}"
        )
    queries = make_detection_queries(smoothed, fused, store, name=name)
    output = decode_hybrid(
        track_embeddings(state.queries, settings.cfg.model_dim, store.dtype),
        box_param_tensor([query.box for query in state.queries], store.dtype),
        queries,
        store,
        settings,
        name=name,
    )
    embeddings = output.embeddings.detach()
    params = output.params.detach().numpy()
    confidences = output.confidences.tolist()
    classes = output.classes.tolist()
    kept, objects, centers = [], [], []
    for i, query in enumerate(state.queries):
        confidence, class_id = confidences[i], classes[i]
        if confidence >= settings.delta:
            box = src.geometry.params_to_box(params[i], confidence, class_id)
            kept.append(
                TrackQuery(
                    embeddings[i], query.track_id, query.age + 1, confidence, box, 0
                )
            )
            objects.append(TrackedObject(box, class_id, confidence, query.track_id))
            centers.append((box.cx, box.cy))
        elif query.misses < settings.patience:
            kept.append(
                query._replace(
                    embedding=embeddings[i], age=query.age + 1, misses=query.misses + 1
                )
            )
    next_id = state.next_id
    for i in range(len(state.queries), len(confidences)):
        confidence, class_id = confidences[i], classes[i]
        if confidence < settings.delta:
            continue
        box = src.geometry.params_to_box(params[i], confidence, class_id)
        if any(
            math.hypot(box.cx - x, box.cy - y) <= settings.dup_radius
            for x, y in centers
        ):
            continue
        kept.append(TrackQuery(embeddings[i], next_id, 0, confidence, box, 0))
        objects.append(TrackedObject(box, class_id, confidence, next_id))
        next_id += 1
    logger.debug(
        f"frame {smoothed.frame}: {len(objects)} tracks, "
        f"{next_id - state.next_id} new"
    )
    return TrackerState(tuple(kept), next_id, smoothed.frame), objects


def init_tracks(smoothed, fused, store, settings, name="tracker"):
    """Start tracks from the first frame of a sequence.

    Every detection query decoded with confidence at least delta becomes a
    track; identities follow detection order.

    :param SmoothedFrame smoothed: smoothed detections
    :param BEVGrid fused: fused grid
    :param ParamStore store: parameter store
    :param TrackerSettings settings: tracker hyperparameters
    :param str name: model name

    :returns: state and confirmed tracks of the frame
    :rtype: tuple
    """
    state = TrackerState.start(smoothed.frame)
    return step(state, smoothed, fused, store, settings, name=name)


def run_sequence(inputs, store, settings, name="tracker"):
    """Track a sequence.

    :param list inputs: (SmoothedFrame, BEVGrid) pairs in frame order
    :param ParamStore store: parameter store
    :param TrackerSettings settings: tracker hyperparameters
    :param str name: model name

    :returns: confirmed tracks per frame
    :rtype: list
    """
    tracks, state = [], None
    with torch.no_grad():
        for smoothed, fused in inputs:
            if state is None:
                state, objects = init_tracks(smoothed, fused, store, settings, name)
            else:
                state, objects = step(state, smoothed, fused, store, settings, name)
            tracks.append(objects)
    return tracks


def track_frames(
    bundles, cameras, store, config, smoother=None, mask=None, window=None
):
    """Smooth, encode and track rendered frames of one sequence.

    :param list bundles: rendered frames in order
    :param tuple cameras: camera models
    :param ParamStore store: encoder and tracker parameters
    :param dict config: run configuration
    :param ParamStore smoother: smoother parameters (raw detections if None)
    :param ModalityMask mask: enabled sensors
    :param int window: smoother window length (configured if None)

    :returns: confirmed tracks per frame
    :rtype: list
    """
    detections = [bundle.detections for bundle in bundles]
    smoothed = src.smoother.smooth_sequence(detections, smoother, config, length=window)
    smoothed = [
        frame._replace(frame=bundle.frame) for frame, bundle in zip(smoothed, bundles)
    ]
    with torch.no_grad():
        fused = [
            src.encfuse.encode_frame(bundle, cameras, store, config, mask=mask)
            for bundle in bundles
        ]
    return run_sequence(
        list(zip(smoothed, fused)), store, TrackerSettings.from_config(config)
    )

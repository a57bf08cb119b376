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
:synopsis: Bipartite matching, set losses and training loops.
"""


# standard library imports
import json
import math
import logging
import collections

# third party imports
import numpy as np
import scipy.optimize
import torch
import torch.nn.functional as F

# library specific imports
import src.encfuse
import src.geometry
import src.metrics
import src.nncore
import src.scenesim
import src.smoother
import src.tracker

from src import NO_OBJECT, TrackedObject
from src.nncore import NumericError, ParamStore, make_rng
from src.tracker import TrackerSettings


class TrainingError(RuntimeError):
    """Raised when a training run cannot start or continue."""

    pass


Assignment = collections.namedtuple(
    "Assignment", ("pairs", "unmatched_predictions", "unmatched_truths", "cost")
)
Sequence = collections.namedtuple("Sequence", ("scenario", "bundles"))
TrainingFrame = collections.namedtuple(
    "TrainingFrame", ("smoothed", "fused", "ground_truth")
)
SequenceLoss = collections.namedtuple(
    "SequenceLoss", ("total", "reg", "cls", "giou", "matched", "truths")
)


class LossWeights(
    collections.namedtuple("LossWeights", ("reg", "cls"), defaults=(0.25, 1.0))
):
    """Weights of the regression and classification terms.

    The GIoU term is unweighted.
    """

    __slots__ = ()

    def __new__(klass, *args, **kwargs):
        self = super().__new__(klass, *args, **kwargs)
        if self.reg < 0 or self.cls < 0:
            raise ValueError("loss weights must be non-negative")
        if self.reg == 0 and self.cls == 0:
            raise ValueError("loss weights must not both be zero")
        return self

    @classmethod
    def from_config(cls, config):
        return cls(config["loss"]["reg"], config["loss"]["cls"])


def _optimal_cost(cost, rows, cols):
    if not rows or not cols:
        return 0.0
    sub = cost[np.ix_(rows, cols)]
    r, c = scipy.optimize.linear_sum_assignment(sub)
    return float(sub[r, c].sum())


def hungarian(cost):
    """Minimum-cost bipartite matching.

    Infinite entries forbid a pair. Among matchings with the fewest
    forbidden pairs and the least cost, the one whose row-sorted pair
    sequence is lexicographically smallest wins; forbidden pairs are then
    dropped.

    :param cost: cost matrix [N, M]

    :raises ValueError: when the matrix is not 2D or holds NaN

    :returns: assignment
    :rtype: Assignment
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix has {cost.ndim} dimensions")
    if np.isnan(cost).any():
        raise ValueError("cost matrix holds NaN")
    n, m = cost.shape
    allowed = np.isfinite(cost)
    if not allowed.any():
        return Assignment((), tuple(range(n)), tuple(range(m)), 0.0)
    # one forbidden pair outweighs every finite matching
    big = 2.0 * float(np.abs(cost[allowed]).sum()) + 1.0
    filled = np.where(allowed, cost, big)
    best = _optimal_cost(filled, list(range(n)), list(range(m)))
    tolerance = 1e-9 * max(1.0, abs(best))
    size = min(n, m)
    pairs, used, spent = [], set(), 0.0
    for i in range(n):
        if len(pairs) == size:
            break
        rest = list(range(i + 1, n))
        for j in range(m):
            if j in used:
                continue
            cols = [k for k in range(m) if k not in used and k != j]
            if len(pairs) + 1 + min(len(rest), len(cols)) < size:
                continue
            total = spent + filled[i, j] + _optimal_cost(filled, rest, cols)
            if total <= best + tolerance:
                pairs.append((i, j))
                used.add(j)
                spent += filled[i, j]
                break
    pairs = [(i, j) for i, j in pairs if allowed[i, j]]
    rows = {i for i, _ in pairs}
    cols = {j for _, j in pairs}
    return Assignment(
        tuple(pairs),
        tuple(i for i in range(n) if i not in rows),
        tuple(j for j in range(m) if j not in cols),
        float(sum(cost[i, j] for i, j in pairs)),
    )


def _truth_params(truths, dtype):
    return src.tracker.box_param_tensor([truth.box for truth in truths], dtype)


def _pairwise_giou(params, target):
    n, m = params.shape[0], target.shape[0]
    pred = src.geometry.params_to_geometry(params).repeat_interleave(m, dim=0)
    true = src.geometry.params_to_geometry(target).repeat(n, 1)
    return src.geometry.aligned_giou(pred, true).reshape(n, m)


def cost_matrix(params, logits, truths, weights):
    """Matching costs of predictions against ground truth.

    :param Tensor params: predicted box parameters [N, 8]
    :param Tensor logits: class logits with no-object last [N, K+1]
    :param list truths: true objects
    :param LossWeights weights: term weights

    :returns: costs [N, M]
    :rtype: ndarray
    """
    n, m = params.shape[0], len(truths)
    if n == 0 or m == 0:
        return np.zeros((n, m))
    with torch.no_grad():
        target = _truth_params(truths, params.dtype)
        l1 = (params[:, None, :] - target[None, :, :]).abs().mean(dim=-1)
        classes = torch.as_tensor([truth.class_id for truth in truths])
        nll = -F.log_softmax(logits, dim=-1)[:, classes]
        giou = _pairwise_giou(params, target)
        cost = weights.reg * l1 + weights.cls * nll + (1.0 - giou)
    return cost.numpy()


def match_cost(params, logits, truth, weights):
    """Matching cost of one prediction.

    :param Tensor params: predicted box parameters [8]
    :param Tensor logits: class logits [K+1]
    :param TrackedObject truth: true object
    :param LossWeights weights: term weights

    :returns: λ_reg·L1 + λ_cls·(−log p) + (1 − GIoU)
    :rtype: float
    """
    return float(cost_matrix(params[None], logits[None], [truth], weights)[0, 0])


def _box_terms(params, truths):
    target = _truth_params(truths, params.dtype)
    reg = (params - target).abs().mean(dim=-1).sum()
    giou = src.geometry.aligned_giou(
        src.geometry.params_to_geometry(params),
        src.geometry.params_to_geometry(target),
    )
    return reg, (1.0 - giou).sum()


def sequence_loss(
    store,
    frames,
    settings,
    weights,
    focal=(0.25, 2.0),
    truncation=2,
    inherit_identity=True,
    name="tracker",
):
    """Set loss of an unrolled sequence propagating the matched queries.

    Propagated queries keep the ground truth they were matched to when
    identity inheritance is on; the remaining ground truth is matched to
    detection queries by the Hungarian method. Matched predictions pay
    regression, classification and GIoU terms, unmatched predictions a
    focal loss towards no-object. Matched predictions propagate, and their
    embeddings are detached after every truncation frames.

    :param ParamStore store: parameter store
    :param list frames: training frames in order
    :param TrackerSettings settings: tracker hyperparameters
    :param LossWeights weights: term weights
    :param tuple focal: focal alpha and gamma
    :param int truncation: frames of gradient flow through propagation
    :param bool inherit_identity: toggle identity inheritance on/off
    :param str name: model name

    :raises TrainingError: on fewer than 2 frames or no ground truth

    :returns: loss terms normalized by the ground-truth count
    :rtype: SequenceLoss
    """
    if len(frames) < 2:
        raise TrainingError(f"{len(frames)} frames, at least 2 needed")
    truths_total = sum(len(frame.ground_truth) for frame in frames)
    if truths_total == 0:
        raise TrainingError("no ground truth in the unrolled frames")
    alpha, gamma = focal
    dim = settings.cfg.model_dim
    zero = torch.zeros((), dtype=store.dtype)
    reg, cls, giou, matched = zero, zero, zero, 0
    embeddings = torch.zeros((0, dim), dtype=store.dtype)
    references = torch.zeros((0, 8), dtype=store.dtype)
    identities = []
    for t, frame in enumerate(frames):
        queries = src.tracker.make_detection_queries(
            frame.smoothed, frame.fused, store, name=name
        )
        output = src.tracker.decode_hybrid(
            embeddings, references, queries, store, settings, name=name
        )
        truths = list(frame.ground_truth)
        index = {truth.track_id: k for k, truth in enumerate(truths)}
        count = output.params.shape[0]
        targets = {}
        if inherit_identity:
            for i, track_id in enumerate(identities):
                if track_id in index:
                    targets[i] = index[track_id]
        first = len(identities) if inherit_identity else 0
        rows = [i for i in range(first, count) if i not in targets]
        cols = [k for k in range(len(truths)) if k not in targets.values()]
        if rows and cols:
            cost = cost_matrix(
                output.params[rows],
                output.logits[rows],
                [truths[k] for k in cols],
                weights,
            )
            for r, c in hungarian(cost).pairs:
                targets[rows[r]] = cols[c]
        classes = [NO_OBJECT] * count
        for i, k in targets.items():
            classes[i] = truths[k].class_id
        if count:
            focal = src.nncore.focal_loss(output.logits, classes, alpha, gamma)
            cls = cls + focal * count
        keep = sorted(targets)
        if keep:
            box_reg, box_giou = _box_terms(
                output.params[keep], [truths[targets[i]] for i in keep]
            )
            reg, giou = reg + box_reg, giou + box_giou
            matched += len(keep)
        embeddings = output.embeddings[keep]
        references = src.geometry.normalize_params(output.params[keep])
        if (t + 1) % truncation == 0:
            embeddings, references = embeddings.detach(), references.detach()
        identities = [truths[targets[i]].track_id for i in keep]
    total = (weights.reg * reg + weights.cls * cls + giou) / truths_total
    return SequenceLoss(
        total,
        float(reg) / truths_total,
        float(cls) / truths_total,
        float(giou) / truths_total,
        matched,
        truths_total,
    )


class TrainingLog:
    """Line-delimited JSON training records.

    :ivar str path: path to log file (records kept in memory only if empty)
    :ivar list records: records so far
    """

    def __init__(self, path=""):
        """Initialize training log.

        :param str path: path to log file
        """
        self.path = path
        self.records = []

    def record(self, **fields):
        self.records.append(fields)
        if self.path:
            with open(self.path, "a") as fp:
                fp.write(json.dumps(fields) + "\n")


def make_dataset(config, split, images=True):
    """Generate and render the scenarios of a split.

    :param dict config: run configuration
    :param str split: train or val
    :param bool images: toggle camera rendering on/off

    :returns: sequences
    :rtype: list
    """
    logger = logging.getLogger().getChild(make_dataset.__name__)
    sequences = []
    for seed in src.scenesim.scenario_seeds(config, split):
        scenario = src.scenesim.generate_scenario(seed, config)
        bundles = [
            src.scenesim.render_frame(scenario, t, images=images)
            for t in range(scenario.frames)
        ]
        sequences.append(Sequence(scenario, bundles))
    logger.info(f"{split}: {len(sequences)} scenarios")
    return sequences


def _optimizer_settings(config):
    section = config["optimizer"]
    return {
        "betas": tuple(section["betas"]),
        "weight_decay": section["weight_decay"],
        "eps": section["eps"],
    }


def _focal(config):
    return config["loss"]["focal_alpha"], config["loss"]["focal_gamma"]


def _step(store, loss, lr, config, checkpoint):
    if not bool(torch.isfinite(loss)):
        raise NumericError(f"loss is {float(loss)}", checkpoint=checkpoint)
    loss.backward()
    try:
        src.nncore.adamw_step(store, lr, **_optimizer_settings(config))
    except NumericError as exception:
        raise NumericError(
            str(exception), parameter=exception.parameter, checkpoint=checkpoint
        ) from exception


def smoother_window_loss(window, truths, store, config, weights):
    """Set loss of one smoother window.

    Refined target-frame boxes are matched to ground truth of the same
    class; a refined box scores positive when its match lies within the
    positive radius.

    :param DetectionWindow window: window
    :param list truths: true objects of the target frame
    :param ParamStore store: smoother parameters
    :param dict config: run configuration
    :param LossWeights weights: term weights

    :returns: summed loss, ground-truth count
    :rtype: tuple
    """
    cfg, blocks = src.smoother.smoother_settings(config)
    params, logits = src.smoother.smooth_forward(window, store, cfg, blocks)
    sources = window.target_detections
    zero = torch.zeros((), dtype=store.dtype)
    if not sources:
        return zero, len(truths)
    pairs = ()
    if truths:
        with torch.no_grad():
            target = _truth_params(truths, store.dtype)
            l1 = (params[:, None, :] - target[None, :, :]).abs().mean(dim=-1)
            cost = (weights.reg * l1 + 1.0 - _pairwise_giou(params, target)).numpy()
        for i, box in enumerate(sources):
            for k, truth in enumerate(truths):
                if box.class_id != truth.class_id:
                    cost[i, k] = math.inf
        pairs = hungarian(cost).pairs
    radius = config["smoother"]["positive_radius"]
    positive = [0] * len(sources)
    for i, k in pairs:
        row = params[i].detach()
        offset = (float(row[0]) - truths[k].box.cx, float(row[1]) - truths[k].box.cy)
        if math.hypot(*offset) <= radius:
            positive[i] = 1
    two = torch.stack((-logits / 2, logits / 2), dim=-1)
    alpha, gamma = _focal(config)
    focal = src.nncore.focal_loss(two, positive, alpha, gamma)
    loss = weights.cls * focal * len(sources)
    if pairs:
        rows = [i for i, _ in pairs]
        reg, giou = _box_terms(params[rows], [truths[k] for _, k in pairs])
        loss = loss + weights.reg * reg + giou
    return loss, len(truths)


def _smoother_windows(sequences, config):
    section = config["smoother"]
    windows = []
    for sequence in sequences:
        detections = [bundle.detections for bundle in sequence.bundles]
        for t, bundle in enumerate(sequence.bundles):
            window = src.smoother.make_window(
                detections, t, section["window"], section["mode"]
            )
            windows.append((window, list(bundle.ground_truth)))
    return windows


def _smoother_validation(windows, store, config, weights):
    total, truths = 0.0, 0
    with torch.no_grad():
        for window, gt in windows:
            loss, count = smoother_window_loss(window, gt, store, config, weights)
            total += float(loss)
            truths += count
    return total / max(1, truths)


def validate_smoother(sequences, store, config):
    """Evaluate smoothed detections of validation sequences.

    Every smoothed box gets its own identity, so only the detection
    metrics of the report are meaningful.

    :param list sequences: sequences
    :param ParamStore store: smoother parameters (raw detections if None)
    :param dict config: run configuration

    :returns: report
    :rtype: MetricReport
    """
    predictions, truths = [], []
    for sequence in sequences:
        detections = [bundle.detections for bundle in sequence.bundles]
        frames, next_id = [], 1
        for smoothed in src.smoother.smooth_sequence(detections, store, config):
            objects = []
            for box in smoothed.boxes:
                objects.append(TrackedObject(box, box.class_id, box.score, next_id))
                next_id += 1
            frames.append(objects)
        predictions.append(frames)
        truths.append([bundle.ground_truth for bundle in sequence.bundles])
    report = src.metrics.evaluate(
        predictions, truths, src.metrics.EvalConfig.from_config(config)
    )
    note = "smoothed boxes carry one identity each, association does not apply"
    return report._replace(notes=report.notes + (note,))


def train_smoother(train, val, config, store=None, log=None):
    """Train the smoother.

    :param list train: training sequences
    :param list val: validation sequences (training ones if empty)
    :param dict config: run configuration
    :param ParamStore store: initial parameters (fresh if None)
    :param TrainingLog log: training log

    :raises TrainingError: when the training set is empty
    :raises NumericError: when the loss diverges

    :returns: parameters with the best validation loss
    :rtype: ParamStore
    """
    logger = logging.getLogger().getChild(train_smoother.__name__)
    if not train:
        raise TrainingError("empty smoother training set")
    section = config["smoother"]
    log = log or TrainingLog()
    weights = LossWeights.from_config(config)
    if store is None:
        cfg, blocks = src.smoother.smoother_settings(config)
        store = ParamStore()
        src.smoother.init_smoother(
            store, cfg, blocks, make_rng(config["seed"], "smoother")
        )
    windows = _smoother_windows(train, config)
    checks = _smoother_windows(val, config) if val else windows
    rng = make_rng(config["seed"], "smoother", "order")
    best_loss = _smoother_validation(checks, store, config, weights)
    best = store.snapshot()
    for epoch in range(section["epochs"]):
        store.train()
        order = rng.permutation(len(windows))
        losses = []
        for start in range(0, len(order), section["batch_size"]):
            store.zero_grad()
            loss, truths = torch.zeros((), dtype=store.dtype), 0
            for index in order[start : start + section["batch_size"]]:
                window, gt = windows[index]
                window_loss, count = smoother_window_loss(
                    window, gt, store, config, weights
                )
                loss, truths = loss + window_loss, truths + count
            if not loss.requires_grad:
                continue
            loss = loss / max(1, truths)
            _step(store, loss, section["lr"], config, best)
            losses.append(float(loss))
        store.eval()
        val_loss = _smoother_validation(checks, store, config, weights)
        train_loss = float(np.mean(losses)) if losses else None
        log.record(stage="smoother", epoch=epoch, loss=train_loss, val_loss=val_loss)
        logger.info(f"epoch {epoch}: loss {train_loss}, validation {val_loss:.4f}")
        if val_loss < best_loss:
            best_loss, best = val_loss, store.snapshot()
    store.restore(best)
    return store.eval()


def _prepare(sequences, config, smoother):
    prepared = []
    for sequence in sequences:
        detections = [bundle.detections for bundle in sequence.bundles]
        smoothed = src.smoother.smooth_sequence(detections, smoother, config)
        smoothed = [
            frame._replace(frame=bundle.frame)
            for frame, bundle in zip(smoothed, sequence.bundles)
        ]
        prepared.append((sequence, smoothed))
    return prepared


def _unroll_windows(prepared, unroll):
    windows = []
    for index, (sequence, _) in enumerate(prepared):
        frames = len(sequence.bundles)
        for start in range(0, frames - 1, unroll - 1):
            stop = min(start + unroll, frames)
            if stop - start < 2:
                continue
            if any(sequence.bundles[t].ground_truth for t in range(start, stop)):
                windows.append((index, start, stop))
    return windows


def validate_tracker(sequences, store, config, smoother=None, mask=None):
    """Track validation sequences and evaluate them.

    :param list sequences: sequences
    :param ParamStore store: encoder and tracker parameters
    :param dict config: run configuration
    :param ParamStore smoother: smoother parameters
    :param ModalityMask mask: enabled sensors

    :returns: report
    :rtype: MetricReport
    """
    predictions, truths = [], []
    for sequence in sequences:
        predictions.append(
            src.tracker.track_frames(
                sequence.bundles,
                sequence.scenario.cameras,
                store,
                config,
                smoother=smoother,
                mask=mask,
            )
        )
        truths.append([bundle.ground_truth for bundle in sequence.bundles])
    return src.metrics.evaluate(
        predictions, truths, src.metrics.EvalConfig.from_config(config)
    )


def train_tracker(train, val, config, store=None, smoother=None, log=None):
    """Train encoders, fusion and tracker end to end.

    :param list train: training sequences
    :param list val: validation sequences (training ones if empty)
    :param dict config: run configuration
    :param ParamStore store: initial parameters (fresh if None)
    :param ParamStore smoother: smoother parameters (raw detections if None)
    :param TrainingLog log: training log

    :raises TrainingError: when no training window holds ground truth
    :raises NumericError: when the loss diverges (with the last good
        parameters attached)

    :returns: parameters with the best validation aMOTA
    :rtype: ParamStore
    """
    logger = logging.getLogger().getChild(train_tracker.__name__)
    section = config["tracker"]
    log = log or TrainingLog()
    settings = TrackerSettings.from_config(config)
    weights = LossWeights.from_config(config)
    mask = src.encfuse.ModalityMask.from_config(config)
    if store is None:
        store = ParamStore()
        src.tracker.init_tracker_model(
            store, config, make_rng(config["seed"], "tracker")
        )
    prepared = _prepare(train, config, smoother)
    windows = _unroll_windows(prepared, section["unroll"])
    if not windows:
        raise TrainingError("no training window holds ground truth")
    checks = val or train
    rng = make_rng(config["seed"], "tracker", "order")
    best_score, best = -math.inf, store.snapshot()
    for epoch in range(section["epochs"]):
        lr = section["lr"] * section["lr_gamma"] ** (epoch // section["lr_step"])
        losses = []
        for window in rng.permutation(len(windows)):
            index, start, stop = windows[window]
            sequence, smoothed = prepared[index]
            store.train()
            store.zero_grad()
            frames = [
                TrainingFrame(
                    smoothed[t],
                    src.encfuse.encode_frame(
                        sequence.bundles[t],
                        sequence.scenario.cameras,
                        store,
                        config,
                        mask=mask,
                    ),
                    sequence.bundles[t].ground_truth,
                )
                for t in range(start, stop)
            ]
            result = sequence_loss(
                store,
                frames,
                settings,
                weights,
                focal=_focal(config),
                truncation=section["truncation"],
                inherit_identity=config["loss"]["inherit_identity"],
            )
            if not result.total.requires_grad:
                logger.debug(f"window {windows[window]} has no queries, skipped")
                continue
            _step(store, result.total, lr, config, best)
            losses.append(float(result.total))
        store.eval()
        report = validate_tracker(checks, store, config, smoother=smoother, mask=mask)
        score = report.overall["amota"] or 0.0
        loss = float(np.mean(losses)) if losses else None
        log.record(
            stage="tracker",
            epoch=epoch,
            lr=lr,
            loss=loss,
            amota=score,
            ids=report.overall["ids"],
        )
        logger.info(f"epoch {epoch}: loss {loss}, aMOTA {score:.4f}")
        if score > best_score:
            best_score, best = score, store.snapshot()
    store.restore(best)
    return store.eval()

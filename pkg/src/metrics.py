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
:synopsis: Tracking and detection metrics.
"""


# standard library imports
import json
import math
import logging
import collections

# third party imports
import numpy as np
import scipy.optimize

# library specific imports
import src.geometry

from src import CLASSES, TrackedObject


# center distance thresholds of the detection AP (in meters)
AP_DISTANCES = (0.5, 1.0, 2.0, 4.0)
# center distance threshold of the detection TP errors (in meters)
TP_DISTANCE = 2.0
HOTA_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))
EPS = 1e-10
# rates averaged over classes, the remaining fields are summed
RATES = (
    "amota",
    "amotp",
    "recall",
    "mota",
    "motp",
    "hota",
    "deta",
    "assa",
    "loca",
    "map",
    "mate",
    "mase",
    "maoe",
)
COUNTS = ("gt", "tp", "fp", "fn", "ids", "frag", "mostly_tracked", "mostly_lost")


_EvalConfig = collections.namedtuple(
    "EvalConfig",
    ("mode", "distance", "recall_thresholds", "iou", "classes", "symmetric"),
    defaults=((), ()),
)


class EvalConfig(_EvalConfig):
    """Evaluation settings.

    :ivar str mode: nusc (center distance) or kitti (BEV IoU)
    :ivar float distance: center distance threshold (in meters)
    :ivar tuple recall_thresholds: sorted recall thresholds in (0,1]
    :ivar dict iou: BEV IoU threshold per class name
    :ivar tuple classes: evaluated class ids (every class with ground
        truth if empty)
    :ivar tuple symmetric: class ids whose orientation error has period π
    """

    __slots__ = ()

    def __new__(cls, *args, **kwargs):
        cfg = super().__new__(cls, *args, **kwargs)
        if cfg.mode not in ("nusc", "kitti"):
            raise ValueError(f"unknown matching mode '{cfg.mode}'")
        if cfg.distance <= 0:
            raise ValueError("matching distance must be positive")
        thresholds = tuple(cfg.recall_thresholds)
        if not thresholds or not all(0 < r <= 1 for r in thresholds):
            raise ValueError("recall thresholds must lie in (0,1]")
        if any(a >= b for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("recall thresholds must be sorted and distinct")
        return cfg

    @classmethod
    def from_config(cls, config, mode=None):
        """Evaluation settings of a run configuration.

        :param dict config: run configuration
        :param str mode: matching mode (configured if None)

        :returns: evaluation settings
        :rtype: EvalConfig
        """
        section = config["eval"]
        count = section["recall_thresholds"]
        return cls(
            mode or section["mode"],
            section["distance"],
            tuple((k + 1) / count for k in range(count)),
            dict(section["iou"]),
            tuple(CLASSES.index(name) for name in config["scenario"]["classes"]),
        )

    def iou_threshold(self, class_id):
        return self.iou.get(CLASSES[class_id], 0.5)


FrameMatch = collections.namedtuple(
    "FrameMatch", ("pairs", "unmatched_predictions", "unmatched_truths")
)
# matched: ground-truth id -> (prediction id, score, distance)
FrameRecord = collections.namedtuple(
    "FrameRecord", ("truth_ids", "matched", "false_scores")
)
ClearResult = collections.namedtuple(
    "ClearResult",
    (
        "gt",
        "tp",
        "fp",
        "fn",
        "ids",
        "frag",
        "mota",
        "motp",
        "recall",
        "precision",
        "mostly_tracked",
        "mostly_lost",
    ),
)
ThresholdCounts = collections.namedtuple(
    "ThresholdCounts",
    ("recall", "cutoff", "tp", "fp", "fn", "ids", "motar", "motp"),
)
AmotaResult = collections.namedtuple(
    "AmotaResult", ("amota", "amotp", "best_recall", "best_cutoff", "thresholds")
)
DetectionResult = collections.namedtuple(
    "DetectionResult", ("map", "ap", "mate", "mase", "maoe")
)
HotaResult = collections.namedtuple(
    "HotaResult", ("hota", "deta", "assa", "loca", "alphas")
)


def _unpack(obj):
    if isinstance(obj, TrackedObject):
        return obj.box, obj.confidence, obj.class_id, obj.track_id
    return obj, obj.score, obj.class_id, None


def _select(sequences, class_id):
    if class_id is None:
        return [[list(frame) for frame in sequence] for sequence in sequences]
    return [
        [[obj for obj in frame if _unpack(obj)[2] == class_id] for frame in sequence]
        for sequence in sequences
    ]


def _check_lengths(predictions, truths):
    if len(predictions) != len(truths):
        raise ValueError(
            f"{len(predictions)} predicted but {len(truths)} true sequences"
        )
    for index, (pred, gt) in enumerate(zip(predictions, truths)):
        if len(pred) != len(gt):
            raise ValueError(
                f"sequence {index}: {len(pred)} predicted but {len(gt)} true frames"
            )


def pair_distance(pred, truth, cfg):
    """Matching distance of two boxes.

    :param Box3D pred: predicted box
    :param Box3D truth: true box
    :param EvalConfig cfg: evaluation settings

    :returns: BEV center distance (nusc) or 1 − BEV IoU (kitti)
    :rtype: float
    """
    if cfg.mode == "nusc":
        return math.hypot(pred.cx - truth.cx, pred.cy - truth.cy)
    return 1.0 - src.geometry.iou_bev(pred, truth)


def _accepts(distance, class_id, cfg):
    if cfg.mode == "nusc":
        return distance <= cfg.distance
    return 1.0 - distance >= cfg.iou_threshold(class_id) - EPS


def match_frame(predictions, truths, cfg):
    """Greedy score-ordered matching of one frame.

    Predictions are visited by descending score (ties by index); each takes
    the closest free ground truth of its class within the threshold (ties
    by index).

    :param list predictions: predicted boxes or tracked objects
    :param list truths: true boxes or tracked objects
    :param EvalConfig cfg: evaluation settings

    :returns: matching
    :rtype: FrameMatch
    """
    unpacked = [_unpack(obj) for obj in predictions]
    truth_boxes = [_unpack(obj) for obj in truths]
    order = sorted(range(len(unpacked)), key=lambda i: (-unpacked[i][1], i))
    free = list(range(len(truth_boxes)))
    pairs = []
    for i in order:
        box, _, class_id, _ = unpacked[i]
        best = None
        for k in free:
            gt_box, _, gt_class, _ = truth_boxes[k]
            if gt_class != class_id:
                continue
            distance = pair_distance(box, gt_box, cfg)
            if _accepts(distance, class_id, cfg) and (
                best is None or distance < best[0]
            ):
                best = (distance, k)
        if best is not None:
            free.remove(best[1])
            pairs.append((i, best[1], best[0]))
    matched = {i for i, _, _ in pairs}
    return FrameMatch(
        tuple(pairs),
        tuple(i for i in range(len(unpacked)) if i not in matched),
        tuple(free),
    )


def match_sequences(predictions, truths, cfg, class_id=None):
    """Frame records of matched sequences.

    :param list predictions: per-sequence per-frame tracked objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings
    :param int class_id: evaluated class (every class if None)

    :returns: per-sequence frame records
    :rtype: list
    """
    _check_lengths(predictions, truths)
    records = []
    selected = zip(_select(predictions, class_id), _select(truths, class_id))
    for pred_seq, gt_seq in selected:
        sequence = []
        for preds, gts in zip(pred_seq, gt_seq):
            match = match_frame(preds, gts, cfg)
            matched = {}
            for i, k, distance in match.pairs:
                _, score, _, track_id = _unpack(preds[i])
                matched[_unpack(gts[k])[3]] = (track_id, score, distance)
            sequence.append(
                FrameRecord(
                    tuple(_unpack(gt)[3] for gt in gts),
                    matched,
                    tuple(_unpack(preds[i])[1] for i in match.unmatched_predictions),
                )
            )
        records.append(sequence)
    return records


def count_clear(records, cutoff=-math.inf):
    """CLEAR counts of frame records at a score cutoff.

    Greedy matching visits predictions by score, so the matches of the
    predictions above a cutoff do not depend on those below it.

    :param list records: per-sequence frame records
    :param float cutoff: smallest kept score

    :returns: counts and rates
    :rtype: ClearResult
    """
    gt = tp = fp = ids = frag = mostly_tracked = mostly_lost = 0
    distance = 0.0
    for sequence in records:
        last, gaps, seen = {}, set(), set()
        present, tracked = collections.Counter(), collections.Counter()
        for frame in sequence:
            fp += sum(score >= cutoff for score in frame.false_scores)
            for gt_id in frame.truth_ids:
                present[gt_id] += 1
                match = frame.matched.get(gt_id)
                if match is None or match[1] < cutoff:
                    if gt_id in seen:
                        gaps.add(gt_id)
                    continue
                tp += 1
                tracked[gt_id] += 1
                distance += match[2]
                if gt_id in last and last[gt_id] != match[0]:
                    ids += 1
                last[gt_id] = match[0]
                if gt_id in gaps:
                    frag += 1
                    gaps.discard(gt_id)
                seen.add(gt_id)
        gt += sum(present.values())
        mostly_tracked += sum(tracked[k] >= 0.8 * n for k, n in present.items())
        mostly_lost += sum(tracked[k] <= 0.2 * n for k, n in present.items())
    fn = gt - tp
    mota = None if gt == 0 else min(1.0, max(0.0, 1.0 - (fp + fn + ids) / gt))
    return ClearResult(
        gt,
        tp,
        fp,
        fn,
        ids,
        frag,
        mota,
        distance / tp if tp else None,
        tp / gt if gt else None,
        tp / (tp + fp) if tp + fp else None,
        mostly_tracked,
        mostly_lost,
    )


def clear_metrics(predictions, truths, cfg, class_id=None, cutoff=-math.inf):
    """CLEAR MOT metrics.

    MOTA is clamped to [0,1] and absent (None) without ground truth. An
    identity switch is a match whose prediction id differs from the
    previous match of the same ground truth; a fragmentation is a match
    that resumes a ground truth after frames without a match.

    :param list predictions: per-sequence per-frame tracked objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings
    :param int class_id: evaluated class (every class if None)
    :param float cutoff: smallest kept score

    :returns: counts and rates
    :rtype: ClearResult
    """
    return count_clear(match_sequences(predictions, truths, cfg, class_id), cutoff)


def sweep_recall(records, cfg):
    """MOTAR at every recall threshold.

    The cutoff of threshold r is the highest score that keeps at least
    ceil(r·P) true positives; thresholds beyond the best recall score 0.

    :param list records: per-sequence frame records
    :param EvalConfig cfg: evaluation settings

    :returns: aMOTA, aMOTP and counts per threshold (None without ground
        truth)
    :rtype: AmotaResult
    """
    total = sum(len(frame.truth_ids) for sequence in records for frame in sequence)
    if total == 0:
        return None
    scores = sorted(
        (
            match[1]
            for sequence in records
            for frame in sequence
            for match in frame.matched.values()
        ),
        reverse=True,
    )
    rows = []
    for r in cfg.recall_thresholds:
        needed = max(1, math.ceil(r * total - EPS))
        if needed > len(scores):
            rows.append(ThresholdCounts(r, None, 0, 0, total, 0, 0.0, None))
            continue
        cutoff = scores[needed - 1]
        counts = count_clear(records, cutoff)
        motar = 1.0 - (counts.ids + counts.fp + counts.fn - (1.0 - r) * total) / (
            r * total
        )
        rows.append(
            ThresholdCounts(
                r,
                cutoff,
                counts.tp,
                counts.fp,
                counts.fn,
                counts.ids,
                min(1.0, max(0.0, motar)),
                counts.motp,
            )
        )
    achieved = [row for row in rows if row.cutoff is not None]
    amotp = None
    if achieved:
        amotp = sum(row.motp for row in achieved) / len(achieved)
    best = max(achieved, key=lambda row: row.motar, default=None)
    return AmotaResult(
        sum(row.motar for row in rows) / len(rows),
        amotp,
        len(scores) / total,
        best.cutoff if best is not None else -math.inf,
        tuple(rows),
    )


def amota_amotp(predictions, truths, cfg, class_id=None):
    """Recall-averaged tracking accuracy and precision.

    :param list predictions: per-sequence per-frame tracked objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings
    :param int class_id: evaluated class (every class if None)

    :returns: aMOTA, aMOTP, best recall and per-threshold counts (None
        without ground truth)
    :rtype: AmotaResult
    """
    return sweep_recall(match_sequences(predictions, truths, cfg, class_id), cfg)


def average_precision(entries, positives):
    """Area under the interpolated precision-recall curve.

    :param list entries: (score, is true positive) per prediction
    :param int positives: ground-truth count

    :returns: AP in [0,1] (None without ground truth)
    :rtype: float
    """
    if positives == 0:
        return None
    if not entries:
        return 0.0
    order = sorted(range(len(entries)), key=lambda i: (-entries[i][0], i))
    hits = np.array([entries[i][1] for i in order], dtype=float)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = tp / positives
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(steps * envelope))


def size_error(pred, truth):
    """1 − IoU of two boxes after aligning centers and yaw."""
    overlap = min(pred.w, truth.w) * min(pred.l, truth.l) * min(pred.h, truth.h)
    return 1.0 - overlap / (pred.volume + truth.volume - overlap)


def orientation_error(pred, truth, period=2 * math.pi):
    """Smallest absolute yaw difference modulo a period."""
    difference = abs(pred.yaw - truth.yaw) % period
    return min(difference, period - difference)


def detection_metrics(predictions, truths, cfg, class_id=None):
    """Detection AP over center distances and true-positive errors.

    :param list predictions: per-sequence per-frame scored boxes or tracked
        objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings
    :param int class_id: evaluated class (every class if None)

    :returns: mAP, AP per distance, mATE, mASE, mAOE (errors None without
        true positives)
    :rtype: DetectionResult
    """
    _check_lengths(predictions, truths)
    predictions = _select(predictions, class_id)
    truths = _select(truths, class_id)
    positives = sum(len(frame) for sequence in truths for frame in sequence)
    ap, errors = {}, []
    for distance in AP_DISTANCES:
        rule = cfg._replace(mode="nusc", distance=distance)
        entries = []
        for pred_seq, gt_seq in zip(predictions, truths):
            for preds, gts in zip(pred_seq, gt_seq):
                match = match_frame(preds, gts, rule)
                for i, k, _ in match.pairs:
                    entries.append((_unpack(preds[i])[1], True))
                    if distance == TP_DISTANCE:
                        errors.append((_unpack(preds[i]), _unpack(gts[k])))
                for i in match.unmatched_predictions:
                    entries.append((_unpack(preds[i])[1], False))
        ap[distance] = average_precision(entries, positives)
    if positives == 0:
        return DetectionResult(None, ap, None, None, None)
    mean_ap = sum(ap.values()) / len(ap)
    if not errors:
        return DetectionResult(mean_ap, ap, None, None, None)
    ate = [math.hypot(p[0].cx - g[0].cx, p[0].cy - g[0].cy) for p, g in errors]
    ase = [size_error(p[0], g[0]) for p, g in errors]
    aoe = [
        orientation_error(
            p[0], g[0], math.pi if g[2] in cfg.symmetric else 2 * math.pi
        )
        for p, g in errors
    ]
    return DetectionResult(
        mean_ap, ap, float(np.mean(ate)), float(np.mean(ase)), float(np.mean(aoe))
    )


def similarity(pred, truth, cfg):
    """Localization similarity in [0,1] of two boxes.

    :param Box3D pred: predicted box
    :param Box3D truth: true box
    :param EvalConfig cfg: evaluation settings

    :returns: BEV IoU (kitti) or 1 − distance/threshold clipped at 0 (nusc)
    :rtype: float
    """
    if cfg.mode == "kitti":
        return src.geometry.iou_bev(pred, truth)
    return max(0.0, 1.0 - pair_distance(pred, truth, cfg) / cfg.distance)


def _similarities(preds, gts, cfg):
    matrix = np.zeros((len(gts), len(preds)))
    for k, gt in enumerate(gts):
        for i, pred in enumerate(preds):
            if gt[2] == pred[2]:
                matrix[k, i] = similarity(pred[0], gt[0], cfg)
    return matrix


def _hota_sequence(pred_seq, gt_seq, cfg):
    pred_seq = [[_unpack(obj) for obj in frame] for frame in pred_seq]
    gt_seq = [[_unpack(obj) for obj in frame] for frame in gt_seq]
    gt_ids = sorted({obj[3] for frame in gt_seq for obj in frame})
    pred_ids = sorted({obj[3] for frame in pred_seq for obj in frame})
    gt_index = {track_id: k for k, track_id in enumerate(gt_ids)}
    pred_index = {track_id: k for k, track_id in enumerate(pred_ids)}
    potential = np.zeros((len(gt_ids), len(pred_ids)))
    gt_count = np.zeros(len(gt_ids))
    pred_count = np.zeros(len(pred_ids))
    frames = []
    for preds, gts in zip(pred_seq, gt_seq):
        g = np.array([gt_index[obj[3]] for obj in gts], dtype=int)
        p = np.array([pred_index[obj[3]] for obj in preds], dtype=int)
        matrix = _similarities(preds, gts, cfg)
        frames.append((g, p, matrix))
        gt_count[g] += 1
        pred_count[p] += 1
        if len(g) and len(p):
            union = matrix.sum(0)[None, :] + matrix.sum(1)[:, None] - matrix
            ratio = np.zeros_like(matrix)
            np.divide(matrix, union, out=ratio, where=union > EPS)
            potential[g[:, None], p[None, :]] += ratio
    alignment = potential / np.maximum(
        EPS, gt_count[:, None] + pred_count[None, :] - potential
    )
    counts = {alpha: [0, 0, 0, 0.0] for alpha in HOTA_ALPHAS}
    matches = {alpha: np.zeros_like(potential) for alpha in HOTA_ALPHAS}
    for g, p, matrix in frames:
        if len(g) == 0 or len(p) == 0:
            for alpha in HOTA_ALPHAS:
                counts[alpha][1] += len(g)
                counts[alpha][2] += len(p)
            continue
        score = alignment[g[:, None], p[None, :]] * matrix
        for alpha in HOTA_ALPHAS:
            admissible = matrix >= alpha - EPS
            rows, cols = scipy.optimize.linear_sum_assignment(
                -np.where(admissible, score, 0.0)
            )
            ok = admissible[rows, cols]
            rows, cols = rows[ok], cols[ok]
            hits = len(rows)
            counts[alpha][0] += hits
            counts[alpha][1] += len(g) - hits
            counts[alpha][2] += len(p) - hits
            counts[alpha][3] += float(matrix[rows, cols].sum())
            matches[alpha][g[rows], p[cols]] += 1
    result = {}
    for alpha in HOTA_ALPHAS:
        tp, fn, fp, loc = counts[alpha]
        match = matches[alpha]
        association = match / np.maximum(
            1.0, gt_count[:, None] + pred_count[None, :] - match
        )
        assa = float((match * association).sum()) / max(1, tp)
        result[alpha] = (tp, fn, fp, loc, assa)
    return result


def hota(predictions, truths, cfg, class_id=None):
    """Higher order tracking accuracy.

    Identities are aligned globally per sequence. At each localization
    level alpha every frame is matched by the Hungarian method on
    alignment times similarity, restricted to pairs whose similarity
    reaches alpha. Sequences combine by summing counts and weighting
    association by true positives.

    :param list predictions: per-sequence per-frame tracked objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings
    :param int class_id: evaluated class (every class if None)

    :returns: HOTA, DetA, AssA, LocA and (HOTA, DetA, AssA) per alpha
        (None when there is nothing to evaluate)
    :rtype: HotaResult
    """
    _check_lengths(predictions, truths)
    totals = {alpha: [0, 0, 0, 0.0, 0.0] for alpha in HOTA_ALPHAS}
    selected = zip(_select(predictions, class_id), _select(truths, class_id))
    for pred_seq, gt_seq in selected:
        for alpha, (tp, fn, fp, loc, assa) in _hota_sequence(
            pred_seq, gt_seq, cfg
        ).items():
            total = totals[alpha]
            total[0] += tp
            total[1] += fn
            total[2] += fp
            total[3] += loc
            total[4] += assa * tp
    if all(sum(total[:3]) == 0 for total in totals.values()):
        return None
    alphas, loc_sum, tp_sum = {}, 0.0, 0
    for alpha, (tp, fn, fp, loc, weighted) in totals.items():
        deta = tp / max(1, tp + fn + fp)
        assa = weighted / max(1, tp)
        alphas[alpha] = (math.sqrt(deta * assa), deta, assa)
        loc_sum += loc
        tp_sum += tp
    count = len(HOTA_ALPHAS)
    return HotaResult(
        sum(value[0] for value in alphas.values()) / count,
        sum(value[1] for value in alphas.values()) / count,
        sum(value[2] for value in alphas.values()) / count,
        loc_sum / tp_sum if tp_sum else None,
        alphas,
    )


class MetricReport(
    collections.namedtuple("MetricReport", ("mode", "overall", "classes", "notes"))
):
    """Evaluation results.

    :ivar str mode: matching mode
    :ivar dict overall: metrics averaged (rates) or summed (counts) over
        classes
    :ivar dict classes: metrics by class name
    :ivar tuple notes: remarks such as excluded classes
    """

    __slots__ = ()

    def to_dict(self):
        return {
            "mode": self.mode,
            "overall": self.overall,
            "classes": self.classes,
            "notes": list(self.notes),
        }

    def write_json(self, path):
        """Write report as JSON.

        :param str path: path to JSON file
        """
        with open(path, "w") as fp:
            json.dump(self.to_dict(), fp, indent=4)


def _class_metrics(predictions, truths, cfg, class_id):
    records = match_sequences(predictions, truths, cfg, class_id)
    sweep = sweep_recall(records, cfg)
    clear = count_clear(records, sweep.best_cutoff)
    detection = detection_metrics(predictions, truths, cfg, class_id)
    association = hota(predictions, truths, cfg, class_id)
    metrics = {
        "amota": sweep.amota,
        "amotp": sweep.amotp,
        "recall": sweep.best_recall,
        "mota": clear.mota,
        "motp": clear.motp,
        "map": detection.map,
        "mate": detection.mate,
        "mase": detection.mase,
        "maoe": detection.maoe,
        "hota": association.hota if association else None,
        "deta": association.deta if association else None,
        "assa": association.assa if association else None,
        "loca": association.loca if association else None,
    }
    metrics.update((name, getattr(clear, name)) for name in COUNTS)
    metrics["thresholds"] = [row._asdict() for row in sweep.thresholds]
    return metrics


def evaluate(predictions, truths, cfg):
    """Evaluate tracking output against ground truth.

    CLEAR counts are reported at the score cutoff of the best MOTAR.

    :param list predictions: per-sequence per-frame tracked objects
    :param list truths: per-sequence per-frame true objects
    :param EvalConfig cfg: evaluation settings

    :returns: report
    :rtype: MetricReport
    """
    logger = logging.getLogger().getChild(evaluate.__name__)
    _check_lengths(predictions, truths)
    present = collections.Counter(
        _unpack(obj)[2] for sequence in truths for frame in sequence for obj in frame
    )
    class_ids = cfg.classes or tuple(sorted(present))
    classes, notes = {}, []
    for class_id in class_ids:
        if not present[class_id]:
            notes.append(f"no ground truth for class '{CLASSES[class_id]}', excluded")
            continue
        classes[CLASSES[class_id]] = _class_metrics(predictions, truths, cfg, class_id)
    overall = {}
    for name in RATES:
        values = [metrics[name] for metrics in classes.values()]
        values = [value for value in values if value is not None]
        overall[name] = sum(values) / len(values) if values else None
    for name in COUNTS:
        overall[name] = sum(metrics[name] for metrics in classes.values())
    logger.info(
        f"aMOTA {overall['amota']}, IDS {overall['ids']} over {len(classes)} classes"
    )
    return MetricReport(cfg.mode, overall, classes, tuple(notes))

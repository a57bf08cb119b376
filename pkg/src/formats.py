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
:synopsis: KITTI and nuScenes result files, scenario and parameter archives.
"""


# standard library imports
import re
import math
import json
import logging
import collections

from pathlib import Path

# third party imports
import numpy as np

# library specific imports
import src.geometry
import src.scenesim

from src import CLASSES, Box3D, TrackedObject
from src.nncore import ParamStore


ARCHIVE_FORMAT = "bevtrack-archive"
ARCHIVE_VERSION = 1
KITTI_TYPES = {
    "bicycle": "Cyclist",
    "bus": "Bus",
    "car": "Car",
    "motorcycle": "Motorcycle",
    "pedestrian": "Pedestrian",
    "trailer": "Trailer",
    "truck": "Truck",
}
CLASS_OF_KITTI_TYPE = {kitti: name for name, kitti in KITTI_TYPES.items()}

_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class FormatError(ValueError):
    """Raised when a file violates its format.

    :ivar str path: path to file
    :ivar int line: line number (0 if not applicable)
    """

    def __init__(self, message, path="", line=0):
        """Initialize FormatError.

        :param str message: message
        :param str path: path to file
        :param int line: line number
        """
        location = f"{path}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(f"{location}{message}")
        self.path = str(path)
        self.line = line


class KittiFormatError(FormatError):
    """Raised when a KITTI tracking file is malformed."""

    pass


class NuscFormatError(FormatError):
    """Raised when a nuScenes tracking result file is malformed."""

    pass


class ArchiveError(FormatError):
    """Raised when an archive is malformed or incomplete."""

    pass


_KittiTrackRow = collections.namedtuple(
    "KittiTrackRow",
    (
        "frame",
        "track_id",
        "type",
        "truncated",
        "occluded",
        "alpha",
        "left",
        "top",
        "right",
        "bottom",
        "h",
        "w",
        "l",
        "x",
        "y",
        "z",
        "rotation_y",
        "score",
    ),
    defaults=(None,),
)


class KittiTrackRow(_KittiTrackRow):
    """KITTI tracking row: 17 fields, 18 with score."""

    __slots__ = ()

    @property
    def bbox2d(self):
        return (self.left, self.top, self.right, self.bottom)

    @property
    def dimensions(self):
        return (self.h, self.w, self.l)

    @property
    def location(self):
        return (self.x, self.y, self.z)


NuscTrackRecord = collections.namedtuple(
    "NuscTrackRecord",
    (
        "sample_token",
        "translation",
        "size",
        "rotation",
        "velocity",
        "tracking_id",
        "tracking_name",
        "tracking_score",
    ),
)


def _parse_int(text, path, line):
    if not _INT.match(text):
        raise KittiFormatError(f"'{text}' is no integer", path=path, line=line)
    return int(text)


def _parse_float(text, path, line):
    if not _FLOAT.match(text):
        raise KittiFormatError(f"'{text}' is no number", path=path, line=line)
    return float(text)


def parse_kitti_line(text, path="", line=0):
    """Parse KITTI tracking row.

    :param str text: row
    :param str path: path to file
    :param int line: line number

    :raises KittiFormatError: on wrong field count or non-numeric field

    :returns: row
    :rtype: KittiTrackRow
    """
    fields = text.split()
    if len(fields) not in (17, 18):
        raise KittiFormatError(
            f"expected 17 or 18 fields, got {len(fields)}", path=path, line=line
        )
    frame = _parse_int(fields[0], path, line)
    track_id = _parse_int(fields[1], path, line)
    occluded = _parse_int(fields[4], path, line)
    numbers = [_parse_float(field, path, line) for field in fields[5:]]
    truncated = _parse_float(fields[3], path, line)
    score = numbers[12] if len(numbers) == 13 else None
    return KittiTrackRow(
        frame, track_id, fields[2], truncated, occluded, *numbers[:12], score
    )


def format_kitti_row(row):
    """Format KITTI tracking row with shortest round-trip floats."""
    fields = [str(row.frame), str(row.track_id), row.type, repr(float(row.truncated))]
    fields.append(str(row.occluded))
    fields.extend(repr(float(value)) for value in row[5:17])
    if row.score is not None:
        fields.append(repr(float(row.score)))
    return " ".join(fields)


def read_kitti(path):
    """Read KITTI tracking file.

    :param str path: path to file

    :returns: rows
    :rtype: list
    """
    rows = []
    with open(path) as fp:
        for line, text in enumerate(fp, start=1):
            if text.strip():
                rows.append(parse_kitti_line(text, path=path, line=line))
    return rows


def write_kitti(path, rows):
    """Write KITTI tracking file.

    :param str path: path to file
    :param list rows: rows
    """
    with open(path, "w") as fp:
        for row in rows:
            fp.write(format_kitti_row(row) + "\n")


def kitti_camera(width=96, height=64):
    """Reference camera of the KITTI conversion (the front camera)."""
    return src.geometry.default_rig(width, height)[0]


def _bbox2d(box, cam):
    corners = src.geometry.box_corners_3d(box)
    pixels, depth, _ = src.geometry.project_points(corners, cam)
    front = depth > 1e-6
    if not front.any():
        return (-1.0, -1.0, -1.0, -1.0)
    pixels = pixels[front]
    low = np.clip(pixels.min(axis=0), 0, (cam.width, cam.height))
    high = np.clip(pixels.max(axis=0), 0, (cam.width, cam.height))
    return (float(low[0]), float(low[1]), float(high[0]), float(high[1]))


def object_to_kitti(obj, frame, cam, occluded=0):
    """Convert tracked object into a KITTI row in the camera frame.

    :param TrackedObject obj: object in the ego frame
    :param int frame: frame
    :param CameraModel cam: camera
    :param int occluded: occlusion state

    :returns: row
    :rtype: KittiTrackRow
    """
    box = obj.box
    bottom = np.array((box.cx, box.cy, box.cz - box.h / 2))
    x, y, z = (cam.rotation @ bottom + cam.translation).tolist()
    heading = cam.rotation @ np.array((math.cos(box.yaw), math.sin(box.yaw), 0.0))
    rotation_y = src.geometry.normalize_yaw(math.atan2(-heading[2], heading[0]))
    alpha = src.geometry.normalize_yaw(rotation_y - math.atan2(x, z))
    return KittiTrackRow(
        frame,
        obj.track_id,
        KITTI_TYPES[CLASSES[obj.class_id]],
        0.0,
        occluded,
        alpha,
        *_bbox2d(box, cam),
        box.h,
        box.w,
        box.l,
        x,
        y,
        z,
        rotation_y,
        obj.confidence,
    )


def kitti_to_object(row, cam):
    """Convert KITTI row into a tracked object in the ego frame.

    :param KittiTrackRow row: row
    :param CameraModel cam: camera

    :raises KittiFormatError: on unknown object type

    :returns: object
    :rtype: TrackedObject
    """
    if row.type not in CLASS_OF_KITTI_TYPE:
        raise KittiFormatError(f"unknown object type '{row.type}'")
    class_id = CLASSES.index(CLASS_OF_KITTI_TYPE[row.type])
    bottom = cam.rotation.T @ (np.array(row.location) - cam.translation)
    heading = cam.rotation.T @ np.array(
        (math.cos(row.rotation_y), 0.0, -math.sin(row.rotation_y))
    )
    yaw = src.geometry.normalize_yaw(math.atan2(heading[1], heading[0]))
    score = 1.0 if row.score is None else row.score
    box = Box3D(
        float(bottom[0]),
        float(bottom[1]),
        float(bottom[2]) + row.h / 2,
        row.w,
        row.l,
        row.h,
        yaw,
        score,
        class_id,
    )
    return TrackedObject(box, class_id, score, row.track_id)


def yaw_to_quaternion(yaw):
    """Rotation about +z as unit quaternion (w, x, y, z)."""
    return (math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2))


def quaternion_to_yaw(quaternion):
    """Yaw of a unit quaternion (w, x, y, z)."""
    w, x, y, z = quaternion
    return src.geometry.normalize_yaw(
        math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    )


def sample_token(seed, frame):
    """Synthetic nuScenes sample token."""
    return f"{seed:010d}-{frame:04d}"


def object_to_nusc(obj, token, velocity=(0.0, 0.0)):
    """Convert tracked object into a nuScenes tracking record.

    :param TrackedObject obj: object
    :param str token: sample token
    :param tuple velocity: velocity (in meters per second)

    :returns: record
    :rtype: NuscTrackRecord
    """
    box = obj.box
    return NuscTrackRecord(
        token,
        tuple(float(value) for value in (box.cx, box.cy, box.cz)),
        tuple(float(value) for value in (box.w, box.l, box.h)),
        yaw_to_quaternion(float(box.yaw)),
        tuple(float(value) for value in velocity),
        str(obj.track_id),
        CLASSES[obj.class_id],
        float(obj.confidence),
    )


def nusc_to_object(record):
    """Convert nuScenes tracking record into a tracked object."""
    class_id = CLASSES.index(record.tracking_name)
    box = Box3D(
        *record.translation,
        *record.size,
        quaternion_to_yaw(record.rotation),
        record.tracking_score,
        class_id,
    )
    return TrackedObject(box, class_id, record.tracking_score, int(record.tracking_id))


def finite_difference_velocities(frames, dt):
    """Velocities of tracks by finite differences of their centers.

    Backward differences where the previous frame has the track, forward
    differences at track starts, zero for single-frame tracks.

    :param list frames: per-frame lists of TrackedObject
    :param float dt: timestep (in seconds)

    :returns: per-frame dictionaries track_id -> (vx, vy)
    :rtype: list
    """
    centers = [
        {obj.track_id: (obj.box.cx, obj.box.cy) for obj in objs} for objs in frames
    ]
    velocities = []
    for t, current in enumerate(centers):
        frame = {}
        for track_id, (x, y) in current.items():
            if t > 0 and track_id in centers[t - 1]:
                px, py = centers[t - 1][track_id]
                frame[track_id] = ((x - px) / dt, (y - py) / dt)
            elif t + 1 < len(centers) and track_id in centers[t + 1]:
                nx, ny = centers[t + 1][track_id]
                frame[track_id] = ((nx - x) / dt, (ny - y) / dt)
            else:
                frame[track_id] = (0.0, 0.0)
        velocities.append(frame)
    return velocities


def sequence_to_nusc(frames, seed, dt):
    """Convert a tracked sequence into nuScenes results.

    :param list frames: per-frame lists of TrackedObject
    :param int seed: scenario seed
    :param float dt: timestep (in seconds)

    :returns: sample token -> records
    :rtype: dict
    """
    velocities = finite_difference_velocities(frames, dt)
    return {
        sample_token(seed, t): [
            object_to_nusc(obj, sample_token(seed, t), velocities[t][obj.track_id])
            for obj in objs
        ]
        for t, objs in enumerate(frames)
    }


def _record_to_dict(record):
    return {
        "sample_token": record.sample_token,
        "translation": list(record.translation),
        "size": list(record.size),
        "rotation": list(record.rotation),
        "velocity": list(record.velocity),
        "tracking_id": record.tracking_id,
        "tracking_name": record.tracking_name,
        "tracking_score": record.tracking_score,
    }


def _is_number(value):
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def _validate_record(record, path, token=None):
    token = record.sample_token if token is None else token
    if record.sample_token != token:
        raise NuscFormatError(
            f"record of sample '{record.sample_token}' listed under '{token}'",
            path=path,
        )
    for field, length in (("translation", 3), ("size", 3), ("rotation", 4)):
        values = getattr(record, field)
        if len(values) != length or not all(_is_number(value) for value in values):
            raise NuscFormatError(f"malformed {field} in sample '{token}'", path=path)
    if len(record.velocity) != 2 or not all(map(_is_number, record.velocity)):
        raise NuscFormatError(f"malformed velocity in sample '{token}'", path=path)
    if min(record.size) <= 0:
        raise NuscFormatError(f"non-positive size in sample '{token}'", path=path)
    norm = math.sqrt(sum(value * value for value in record.rotation))
    if abs(norm - 1.0) > 1e-6:
        raise NuscFormatError(f"non-unit quaternion in sample '{token}'", path=path)
    if not isinstance(record.tracking_name, str) or (
        record.tracking_name not in CLASSES
    ):
        raise NuscFormatError(
            f"unknown tracking_name '{record.tracking_name}' in sample '{token}'",
            path=path,
        )
    if not isinstance(record.tracking_id, str) or not re.fullmatch(
        r"-?\d+", record.tracking_id
    ):
        raise NuscFormatError(
            f"tracking_id '{record.tracking_id}' is no integer string "
            f"in sample '{token}'",
            path=path,
        )
    if not _is_number(record.tracking_score) or not (
        0.0 <= record.tracking_score <= 1.0
    ):
        raise NuscFormatError(
            f"tracking_score not in [0,1] in sample '{token}'", path=path
        )


def default_meta(use_lidar=True, use_camera=True):
    """Get modality flags of a result file.

    :param bool use_lidar: whether LiDAR was used
    :param bool use_camera: whether cameras were used

    :returns: meta
    :rtype: dict
    """
    return {
        "use_camera": use_camera,
        "use_lidar": use_lidar,
        "use_radar": False,
        "use_map": False,
        "use_external": False,
    }


def write_nusc_results(path, results, meta=None):
    """Write nuScenes tracking result file.

    :param str path: path to file
    :param dict results: sample token -> records
    :param dict meta: modality flags
    """
    for token, records in results.items():
        for record in records:
            _validate_record(record, path, token)
    document = {
        "meta": meta if meta is not None else default_meta(),
        "results": {
            token: [_record_to_dict(record) for record in records]
            for token, records in results.items()
        },
    }
    with open(path, "w") as fp:
        json.dump(document, fp, indent=1)
        fp.write("\n")


def read_nusc_results(path):
    """Read nuScenes tracking result file.

    :param str path: path to file

    :raises NuscFormatError: when the file is malformed

    :returns: sample token -> records, meta
    :rtype: tuple
    """
    try:
        with open(path) as fp:
            document = json.load(fp)
    except json.JSONDecodeError as exception:
        raise NuscFormatError(f"no valid JSON: {exception}", path=path) from exception
    if not isinstance(document, dict) or not isinstance(document.get("results"), dict):
        raise NuscFormatError("top-level 'results' object is missing", path=path)
    results = {}
    for token, records in document["results"].items():
        if not isinstance(records, list):
            raise NuscFormatError(f"sample '{token}' holds no list", path=path)
        results[token] = []
        for item in records:
            if not isinstance(item, dict):
                raise NuscFormatError(
                    f"malformed record in sample '{token}'", path=path
                )
            try:
                record = NuscTrackRecord(
                    item["sample_token"],
                    tuple(item["translation"]),
                    tuple(item["size"]),
                    tuple(item["rotation"]),
                    tuple(item["velocity"]),
                    item["tracking_id"],
                    item["tracking_name"],
                    item["tracking_score"],
                )
            except (KeyError, TypeError) as exception:
                raise NuscFormatError(
                    f"malformed record in sample '{token}': {exception}", path=path
                ) from exception
            _validate_record(record, path, token)
            results[token].append(record)
    return results, document.get("meta", {})


def write_archive(path, arrays, meta):
    """Write archive: manifest.json plus one little-endian blob per array.

    :param str path: archive directory
    :param dict arrays: name -> array
    :param dict meta: JSON-serializable description
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, array in arrays.items():
        array = np.ascontiguousarray(array)
        dtype = array.dtype.newbyteorder("<")
        (directory / f"{name}.bin").write_bytes(array.astype(dtype).tobytes())
        entries[name] = {
            "file": f"{name}.bin",
            "dtype": dtype.str,
            "shape": list(array.shape),
        }
    manifest = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_VERSION,
        "meta": meta,
        "arrays": entries,
    }
    with open(directory / "manifest.json", "w") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)
        fp.write("\n")


def read_archive(path):
    """Read archive.

    :param str path: archive directory

    :raises ArchiveError: when the archive is malformed or incomplete

    :returns: meta, name -> array
    :rtype: tuple
    """
    directory = Path(path)
    manifest_path = directory / "manifest.json"
    try:
        with open(manifest_path) as fp:
            manifest = json.load(fp)
    except FileNotFoundError as exception:
        raise ArchiveError("manifest.json is missing", path=directory) from exception
    except json.JSONDecodeError as exception:
        raise ArchiveError(
            f"no valid JSON: {exception}", path=manifest_path
        ) from exception
    if manifest.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError("not a bevtrack archive", path=manifest_path)
    if manifest.get("version") != ARCHIVE_VERSION:
        raise ArchiveError(
            f"unsupported archive version {manifest.get('version')}", path=manifest_path
        )
    arrays = {}
    for name, entry in manifest["arrays"].items():
        blob = directory / entry["file"]
        try:
            data = blob.read_bytes()
        except FileNotFoundError as exception:
            raise ArchiveError(
                f"{entry['file']} is missing", path=directory
            ) from exception
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        if len(data) != count * dtype.itemsize:
            raise ArchiveError(
                f"{entry['file']} holds {len(data)} bytes, expected "
                f"{count * dtype.itemsize}",
                path=directory,
            )
        arrays[name] = np.frombuffer(data, dtype=dtype).reshape(entry["shape"]).copy()
    return manifest["meta"], arrays


def save_params(store, path, meta=None):
    """Save parameter store as an archive.

    :param ParamStore store: parameters
    :param str path: archive directory
    :param dict meta: description (configuration, step, ...)
    """
    meta = dict(meta or {})
    meta["order"] = list(store.params)
    meta["step"] = store.step
    write_archive(path, store.to_arrays(), meta)


def load_params(path):
    """Load parameter store from an archive.

    :param str path: archive directory

    :returns: parameters, description
    :rtype: tuple
    """
    meta, arrays = read_archive(path)
    missing = set(meta.get("order", ())) ^ set(arrays)
    if missing:
        raise ArchiveError(f"parameters {sorted(missing)} are inconsistent", path=path)
    store = ParamStore.from_arrays({name: arrays[name] for name in meta["order"]})
    store.step = meta.get("step", 0)
    return store, meta


def _scenario_meta(scenario):
    cam = scenario.cameras[0]
    return {
        "seed": scenario.seed,
        "frames": scenario.frames,
        "dt": scenario.dt,
        "roi": scenario.roi,
        "channels": scenario.channels,
        "camera": {"width": cam.width, "height": cam.height},
        "lidar": scenario.lidar._asdict(),
        "noise": scenario.noise._asdict(),
        "objects": [script._asdict() for script in scenario.objects],
    }


def _scenario_from_meta(meta):
    return src.scenesim.Scenario(
        meta["seed"],
        meta["frames"],
        meta["dt"],
        tuple(src.scenesim.ObjectScript(**item) for item in meta["objects"]),
        src.geometry.default_rig(meta["camera"]["width"], meta["camera"]["height"]),
        src.scenesim.LidarSpec(**meta["lidar"]),
        src.scenesim.NoiseProfile(**meta["noise"]),
        meta["roi"],
        meta["channels"],
    )


def _boxes_array(frames, attribute):
    rows = []
    for bundle in frames:
        for item in getattr(bundle, attribute):
            box = item.box if isinstance(item, TrackedObject) else item
            track_id = item.track_id if isinstance(item, TrackedObject) else -1
            rows.append((bundle.frame, track_id, *box))
    return np.array(rows, dtype=float).reshape(-1, 11)


def save_scenario(scenario, path, store_images=False):
    """Render and save a scenario archive.

    :param Scenario scenario: scenario
    :param str path: archive directory
    :param bool store_images: toggle storing camera grids on/off
    """
    logger = logging.getLogger().getChild(save_scenario.__name__)
    frames = [
        src.scenesim.render_frame(scenario, t, images=store_images)
        for t in range(scenario.frames)
    ]
    counts = np.array([len(bundle.points) for bundle in frames], dtype=np.int64)
    arrays = {
        "points": np.vstack([bundle.points for bundle in frames]),
        "point_counts": counts,
        "ground_truth": _boxes_array(frames, "ground_truth"),
        "detections": _boxes_array(frames, "detections"),
    }
    if store_images:
        arrays["images"] = np.stack([bundle.images for bundle in frames])
    meta = _scenario_meta(scenario)
    meta["occluded"] = [sorted(bundle.occluded) for bundle in frames]
    meta["store_images"] = store_images
    write_archive(path, arrays, meta)
    logger.debug(f"saved scenario {scenario.seed} to {path}")


def _row_to_box(rows):
    return Box3D(*rows[2:9], float(rows[9]), int(rows[10]))


def load_scenario(path):
    """Load a scenario archive.

    :param str path: archive directory

    :raises ArchiveError: when the archive is malformed

    :returns: scenario, frame bundles
    :rtype: tuple
    """
    meta, arrays = read_archive(path)
    try:
        scenario = _scenario_from_meta(meta)
    except (KeyError, TypeError, ValueError) as exception:
        raise ArchiveError(
            f"malformed scenario description: {exception}", path=path
        ) from exception
    offsets = np.concatenate(([0], np.cumsum(arrays["point_counts"])))
    frames = []
    for t in range(scenario.frames):
        truth = tuple(
            TrackedObject(_row_to_box(row), int(row[10]), 1.0, int(row[1]))
            for row in arrays["ground_truth"]
            if int(row[0]) == t
        )
        detections = [
            _row_to_box(row) for row in arrays["detections"] if int(row[0]) == t
        ]
        if "images" in arrays:
            images = arrays["images"][t]
        else:
            images = src.scenesim.render_cameras(scenario, t)
        frames.append(
            src.scenesim.FrameBundle(
                t,
                truth,
                arrays["points"][offsets[t] : offsets[t + 1]],
                images,
                detections,
                frozenset(meta["occluded"][t]),
            )
        )
    return scenario, frames

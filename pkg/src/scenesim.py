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
:synopsis: Deterministic synthetic driving scenes, sensors and detector.
"""


# standard library imports
import math
import logging
import collections

# third party imports
import numpy as np
from scipy.spatial import ConvexHull, QhullError

# library specific imports
import src.geometry

from src import CLASSES, Box3D, TrackedObject
from src.nncore import make_rng


# size (w, l, h) in meters and top speed in m/s per class
CLASS_TEMPLATES = {
    "bicycle": ((0.6, 1.8, 1.4), 5.0),
    "bus": ((2.9, 11.0, 3.5), 8.0),
    "car": ((1.8, 4.5, 1.6), 8.0),
    "motorcycle": ((0.8, 2.1, 1.5), 10.0),
    "pedestrian": ((0.7, 0.7, 1.8), 1.5),
    "trailer": ((2.5, 10.0, 3.8), 6.0),
    "truck": ((2.5, 7.0, 3.0), 7.0),
}
GOLDEN_RATIO = (math.sqrt(5) - 1) / 2
# objects are never spawned closer than this to the ego vehicle
MIN_RANGE = 4.0
# lidar hits below which an object counts as occluded
OCCLUSION_POINTS = 5


class NoiseProfile(
    collections.namedtuple(
        "NoiseProfile",
        (
            "center_sigma",
            "size_sigma",
            "yaw_sigma",
            "score_scale",
            "score_jitter",
            "fn_rate",
            "fp_rate",
            "point_dropout",
        ),
    )
):
    """Detector and sensor noise.

    Detection scores are exp(-center error/score_scale) damped by a
    uniform jitter.
    """

    __slots__ = ()

    def __new__(cls, *args, **kwargs):
        profile = super().__new__(cls, *args, **kwargs)
        if min(profile.center_sigma, profile.size_sigma, profile.yaw_sigma) < 0:
            raise ValueError("noise sigmas must be non-negative")
        for rate in ("score_jitter", "fn_rate"):
            if not 0.0 <= getattr(profile, rate) <= 1.0:
                raise ValueError(f"{rate} is not in [0,1]")
        for rate in ("fp_rate", "point_dropout"):
            if not 0.0 <= getattr(profile, rate) < 1.0:
                raise ValueError(f"{rate} is not in [0,1)")
        if profile.score_scale <= 0:
            raise ValueError("score_scale must be positive")
        return profile

    @classmethod
    def zero(cls):
        """Noise-free profile."""
        return cls(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)


LidarSpec = collections.namedtuple(
    "LidarSpec", ("points_per_sqm", "ground_points", "mount_height", "max_range")
)


class ObjectScript(
    collections.namedtuple(
        "ObjectScript",
        (
            "track_id",
            "class_id",
            "birth",
            "death",
            "x",
            "y",
            "yaw",
            "speed",
            "turn_rate",
            "w",
            "l",
            "h",
            "texture",
        ),
    )
):
    """Constant-velocity / constant-turn-rate object alive in [birth, death)."""

    __slots__ = ()

    def alive(self, frame):
        return self.birth <= frame < self.death

    def box(self, frame, dt):
        """Ground-truth box at a frame.

        :param int frame: frame
        :param float dt: timestep (in seconds)

        :returns: box
        :rtype: Box3D
        """
        tau = (frame - self.birth) * dt
        if abs(self.turn_rate) < 1e-12:
            yaw = self.yaw
            x = self.x + self.speed * math.cos(self.yaw) * tau
            y = self.y + self.speed * math.sin(self.yaw) * tau
        else:
            yaw = self.yaw + self.turn_rate * tau
            radius = self.speed / self.turn_rate
            x = self.x + radius * (math.sin(yaw) - math.sin(self.yaw))
            y = self.y - radius * (math.cos(yaw) - math.cos(self.yaw))
        return Box3D(
            x,
            y,
            self.h / 2,
            self.w,
            self.l,
            self.h,
            src.geometry.normalize_yaw(yaw),
            1.0,
            self.class_id,
        )


Scenario = collections.namedtuple(
    "Scenario",
    ("seed", "frames", "dt", "objects", "cameras", "lidar", "noise", "roi", "channels"),
)
FrameBundle = collections.namedtuple(
    "FrameBundle",
    ("frame", "ground_truth", "points", "images", "detections", "occluded"),
)


def texture_code(track_id):
    """Identity texture code in [0,1)."""
    return (0.5 + track_id * GOLDEN_RATIO) % 1.0


def _random_object(rng, track_id, class_name, frames, roi):
    (w, l, h), top_speed = CLASS_TEMPLATES[class_name]
    scale = np.clip(1.0 + 0.1 * rng.standard_normal(3), 0.7, 1.3)
    radius = rng.uniform(MIN_RANGE, roi)
    bearing = rng.uniform(-math.pi, math.pi)
    birth = int(rng.integers(0, max(1, frames // 2))) if rng.uniform() < 0.3 else 0
    death = frames if rng.uniform() < 0.7 else int(rng.integers(birth + 2, frames + 1))
    turn_rate = 0.0 if rng.uniform() < 0.5 else float(rng.uniform(-0.2, 0.2))
    return ObjectScript(
        track_id,
        CLASSES.index(class_name),
        birth,
        death,
        radius * math.cos(bearing),
        radius * math.sin(bearing),
        float(rng.uniform(-math.pi, math.pi)),
        float(rng.uniform(0.0, top_speed)),
        turn_rate,
        w * scale[0],
        l * scale[1],
        h * scale[2],
        texture_code(track_id),
    )


def _crossing_pair(rng, track_id, class_name, frames, dt, roi):
    (w, l, h), top_speed = CLASS_TEMPLATES[class_name]
    tau = (frames // 2) * dt
    # both objects start inside the ROI
    speed = float(min(rng.uniform(0.5, 1.0) * top_speed, 0.6 * roi / max(tau, dt)))
    meet = rng.uniform(-roi / 3, roi / 3, size=2)
    heading = float(rng.uniform(-math.pi, math.pi))
    spread = float(rng.uniform(math.pi / 6, math.pi / 3))
    pair = []
    for offset, yaw in enumerate((heading, heading + spread)):
        pair.append(
            ObjectScript(
                track_id + offset,
                CLASSES.index(class_name),
                0,
                frames,
                meet[0] - speed * math.cos(yaw) * tau,
                meet[1] - speed * math.sin(yaw) * tau,
                src.geometry.normalize_yaw(yaw),
                speed,
                0.0,
                w,
                l,
                h,
                texture_code(track_id + offset),
            )
        )
    return pair


def _clip_lifetime(script, frames, dt, roi):
    for frame in range(script.birth, script.death):
        box = script.box(frame, dt)
        if max(abs(box.cx), abs(box.cy)) > roi or math.hypot(box.cx, box.cy) < 2.0:
            return script._replace(death=frame)
    return script


def generate_scenario(seed, config):
    """Generate scenario.

    :param int seed: seed
    :param dict config: run configuration

    :returns: scenario
    :rtype: Scenario
    """
    logger = logging.getLogger().getChild(generate_scenario.__name__)
    section = config["scenario"]
    rng = make_rng(seed, "scenario")
    frames, dt, roi = section["frames"], section["dt"], section["roi"]
    count = int(rng.integers(section["min_objects"], section["max_objects"] + 1))
    objects = []
    while len(objects) < count:
        class_name = section["classes"][int(rng.integers(len(section["classes"])))]
        if section["crossing"]:
            candidates = _crossing_pair(rng, len(objects), class_name, frames, dt, roi)
            candidates = candidates[: count - len(objects)]
        else:
            candidates = [_random_object(rng, len(objects), class_name, frames, roi)]
        for script in candidates:
            script = _clip_lifetime(script, frames, dt, roi)
            # short-lived objects get respawned as static ones
            if script.death - script.birth < 2:
                script = script._replace(speed=0.0, birth=0, death=frames)
            objects.append(script)
    camera = config["camera"]
    scenario = Scenario(
        seed,
        frames,
        dt,
        tuple(objects),
        src.geometry.default_rig(camera["width"], camera["height"]),
        LidarSpec(**config["lidar"]),
        NoiseProfile(**config["noise"]),
        roi,
        camera["channels"],
    )
    logger.debug(f"scenario {seed}: {len(objects)} objects, {frames} frames")
    return scenario


def scenario_seeds(config, split):
    """Seeds of the train or val scenarios.

    :param dict config: run configuration
    :param str split: train or val

    :returns: seeds
    :rtype: list
    """
    count = config["scenario"][f"{split}_count"]
    offset = 0 if split == "train" else 1_000_000
    return [config["seed"] * 10_000_000 + offset + index for index in range(count)]


def ground_truth(scenario, frame):
    """Ground-truth objects alive at a frame.

    :param Scenario scenario: scenario
    :param int frame: frame

    :returns: objects
    :rtype: tuple
    """
    return tuple(
        TrackedObject(
            script.box(frame, scenario.dt), script.class_id, 1.0, script.track_id
        )
        for script in scenario.objects
        if script.alive(frame)
    )


def _check_frame(scenario, frame):
    if not 0 <= frame < scenario.frames:
        raise IndexError(f"frame {frame} not in [0,{scenario.frames})")


def _faces(box):
    """Box faces as (center, normal, u axis, v axis) in ego coordinates.

    Axes are half extents, so face points are center + s*u + t*v for
    s, t in [-1, 1].
    """
    cos, sin = math.cos(box.yaw), math.sin(box.yaw)
    forward = np.array((cos, sin, 0.0))
    left = np.array((-sin, cos, 0.0))
    up = np.array((0.0, 0.0, 1.0))
    center = np.array(box.center)
    half = {"l": box.l / 2, "w": box.w / 2, "h": box.h / 2}
    faces = []
    for sign in (1.0, -1.0):
        faces.append(
            (center + sign * half["l"] * forward, sign * forward,
             half["w"] * left, half["h"] * up)
        )
        faces.append(
            (center + sign * half["w"] * left, sign * left,
             half["l"] * forward, half["h"] * up)
        )
    faces.append((center + half["h"] * up, up, half["l"] * forward, half["w"] * left))
    return faces


def _ray_blocked(origin, points, box):
    """Whether segments origin->point pass through a box before the point."""
    local_origin = src.geometry.points_to_box_frame(origin[None, :], box)[0]
    local_points = src.geometry.points_to_box_frame(points, box)
    direction = local_points - local_origin
    direction = np.where(np.abs(direction) < 1e-12, 1e-12, direction)
    half = np.array((box.l / 2, box.w / 2, box.h / 2))
    t1 = (-half - local_origin) / direction
    t2 = (half - local_origin) / direction
    near = np.minimum(t1, t2).max(axis=1)
    far = np.maximum(t1, t2).min(axis=1)
    return (near <= far) & (far > 0) & (near < 1.0 - 1e-9)


def render_lidar(scenario, frame, labels=False):
    """Simulate one LiDAR sweep.

    Points are sampled on the faces the sensor sees, with density falling
    off with the squared range to the box center; boxes block the rays to
    points behind them. Ground clutter lies on z = 0.

    :param Scenario scenario: scenario
    :param int frame: frame
    :param bool labels: toggle returning per-point track ids on/off

    :returns: points [N, 4] as (x, y, z, intensity) (and labels [N],
        -1 for ground)
    :rtype: ndarray
    """
    _check_frame(scenario, frame)
    lidar = scenario.lidar
    rng = make_rng(scenario.seed, "lidar", frame)
    origin = np.array((0.0, 0.0, lidar.mount_height))
    boxes = [gt.box for gt in ground_truth(scenario, frame)]
    ids = [gt.track_id for gt in ground_truth(scenario, frame)]
    chunks, owners = [], []
    for track_id, box in zip(ids, boxes):
        distance = float(np.linalg.norm(np.array(box.center) - origin))
        for center, normal, u, v in _faces(box):
            incidence = np.dot(center - origin, normal)
            if incidence >= 0:
                continue
            area = 4 * np.linalg.norm(u) * np.linalg.norm(v)
            count = rng.poisson(lidar.points_per_sqm * area / distance**2)
            st = rng.uniform(-1.0, 1.0, size=(count, 2))
            points = center + st[:, :1] * u + st[:, 1:] * v
            rays = points - origin
            cosine = np.abs(rays @ normal) / np.linalg.norm(rays, axis=1)
            chunks.append(np.column_stack((points, cosine)))
            owners.append(np.full(count, track_id))
    radius = lidar.max_range * np.sqrt(rng.uniform(size=lidar.ground_points))
    angle = rng.uniform(-math.pi, math.pi, size=lidar.ground_points)
    ground = np.column_stack(
        (
            radius * np.cos(angle),
            radius * np.sin(angle),
            np.zeros(lidar.ground_points),
            0.1 * rng.uniform(size=lidar.ground_points),
        )
    )
    chunks.append(ground)
    owners.append(np.full(lidar.ground_points, -1))
    points = np.vstack(chunks) if chunks else np.zeros((0, 4))
    owner = np.concatenate(owners).astype(int)
    keep = np.linalg.norm(points[:, :3] - origin, axis=1) <= lidar.max_range
    for track_id, box in zip(ids, boxes):
        others = owner != track_id
        keep &= ~(others & _ray_blocked(origin, points[:, :3], box))
    if scenario.noise.point_dropout > 0:
        keep &= rng.uniform(size=len(points)) >= scenario.noise.point_dropout
    if labels:
        return points[keep], owner[keep]
    return points[keep]


def occlusion_flags(scenario, frame, min_points=OCCLUSION_POINTS):
    """Track ids of objects hit by fewer than min_points LiDAR points.

    :param Scenario scenario: scenario
    :param int frame: frame
    :param int min_points: smallest number of hits of a visible object

    :returns: occluded track ids
    :rtype: frozenset
    """
    _, owner = render_lidar(scenario, frame, labels=True)
    hits = collections.Counter(owner.tolist())
    return frozenset(
        gt.track_id
        for gt in ground_truth(scenario, frame)
        if hits[gt.track_id] < min_points
    )


def _silhouette(corners, cam):
    camera = corners @ cam.rotation.T + cam.translation
    front = camera[:, 2] > 0.1
    if front.sum() < 3:
        return None
    camera = camera[front]
    pixels = np.column_stack(
        (
            cam.fx * camera[:, 0] / camera[:, 2] + cam.cx,
            cam.fy * camera[:, 1] / camera[:, 2] + cam.cy,
        )
    )
    try:
        hull = ConvexHull(pixels)
    except QhullError:
        return None
    low = np.clip(np.floor(pixels.min(axis=0)).astype(int), 0, (cam.width, cam.height))
    high = np.clip(np.ceil(pixels.max(axis=0)).astype(int), 0, (cam.width, cam.height))
    if (high <= low).any():
        return None
    cols, rows = np.meshgrid(
        np.arange(low[0], high[0]), np.arange(low[1], high[1]), indexing="xy"
    )
    centers = np.column_stack((cols.ravel() + 0.5, rows.ravel() + 0.5))
    inside = (centers @ hull.equations[:, :2].T + hull.equations[:, 2] <= 1e-12).all(
        axis=1
    )
    return rows.ravel()[inside], cols.ravel()[inside]


def render_cameras(scenario, frame):
    """Render per-camera feature grids.

    Channel 0 is the object mask, channel 1 the identity texture code,
    channel 2 the normalized depth, the remaining channels are cosine
    harmonics of the texture code. Nearer objects overwrite farther ones.

    :param Scenario scenario: scenario
    :param int frame: frame

    :returns: grids [cameras, H, W, C0]
    :rtype: ndarray
    """
    _check_frame(scenario, frame)
    cameras = scenario.cameras
    height, width = cameras[0].height, cameras[0].width
    images = np.zeros((len(cameras), height, width, scenario.channels))
    textures = {script.track_id: script.texture for script in scenario.objects}
    boxes = [(gt.track_id, gt.box) for gt in ground_truth(scenario, frame)]
    for index, cam in enumerate(cameras):
        order = sorted(
            boxes,
            key=lambda item: -float(
                np.linalg.norm(np.array(item[1].center) - cam.position)
            ),
        )
        for track_id, box in order:
            mask = _silhouette(src.geometry.box_corners_3d(box), cam)
            if mask is None:
                continue
            rows, cols = mask
            depth = float(np.linalg.norm(np.array(box.center) - cam.position))
            texture = textures[track_id]
            code = [1.0, texture, min(1.0, depth / scenario.lidar.max_range)]
            code += [
                math.cos(math.pi * k * texture)
                for k in range(1, scenario.channels - 2)
            ]
            images[index, rows, cols] = code[: scenario.channels]
    return images


def simulate_detector(truth, profile, seed, stream=(), roi=18.0, class_ids=None):
    """Emulate a noisy 3D detector.

    :param truth: ground-truth objects (TrackedObject or Box3D)
    :param NoiseProfile profile: noise profile
    :param int seed: seed
    :param tuple stream: stream identifiers
    :param float roi: half side of the square false positives are placed in
    :param tuple class_ids: classes of false positives

    :raises ValueError: when the false positive rate is not in [0,1)

    :returns: detections
    :rtype: list
    """
    if not 0.0 <= profile.fp_rate < 1.0:
        raise ValueError(f"fp_rate {profile.fp_rate} is not in [0,1)")
    rng = make_rng(seed, "detector", *stream)
    detections = []
    for item in truth:
        box = item.box if isinstance(item, TrackedObject) else item
        if rng.uniform() < profile.fn_rate:
            continue
        offset = profile.center_sigma * rng.standard_normal(3)
        sizes = np.maximum(
            np.array((box.w, box.l, box.h))
            * (1.0 + profile.size_sigma * rng.standard_normal(3)),
            0.1,
        )
        yaw = src.geometry.normalize_yaw(
            box.yaw + profile.yaw_sigma * rng.standard_normal()
        )
        error = float(np.linalg.norm(offset))
        score = math.exp(-error / profile.score_scale)
        score *= 1.0 - profile.score_jitter * rng.uniform()
        detections.append(
            Box3D(
                box.cx + offset[0],
                box.cy + offset[1],
                box.cz + offset[2],
                *sizes,
                yaw,
                min(1.0, max(0.0, score)),
                box.class_id,
            )
        )
    if class_ids is None:
        class_ids = sorted({
            (item.box if isinstance(item, TrackedObject) else item).class_id
            for item in truth
        }) or [CLASSES.index("car")]
    while rng.uniform() < profile.fp_rate:
        class_id = class_ids[int(rng.integers(len(class_ids)))]
        (w, l, h), _ = CLASS_TEMPLATES[CLASSES[class_id]]
        x, y = rng.uniform(-roi, roi, size=2)
        detections.append(
            Box3D(
                float(x),
                float(y),
                h / 2,
                w,
                l,
                h,
                float(rng.uniform(-math.pi, math.pi)),
                float(rng.uniform(0.1, 0.5)),
                class_id,
            )
        )
    return detections


def detect(scenario, frame):
    """Detector output of a scenario frame."""
    class_ids = sorted({script.class_id for script in scenario.objects}) or None
    return simulate_detector(
        ground_truth(scenario, frame),
        scenario.noise,
        scenario.seed,
        stream=(frame,),
        roi=scenario.roi,
        class_ids=class_ids,
    )


def render_frame(scenario, frame, images=True):
    """Render everything a frame offers.

    :param Scenario scenario: scenario
    :param int frame: frame
    :param bool images: toggle camera rendering on/off

    :returns: frame bundle
    :rtype: FrameBundle
    """
    points, owner = render_lidar(scenario, frame, labels=True)
    hits = collections.Counter(owner.tolist())
    truth = ground_truth(scenario, frame)
    return FrameBundle(
        frame,
        truth,
        points,
        render_cameras(scenario, frame) if images else None,
        detect(scenario, frame),
        frozenset(gt.track_id for gt in truth if hits[gt.track_id] < OCCLUSION_POINTS),
    )

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
:synopsis: Box algebra, rotated overlap, camera projection and BEV indexing.
"""


# standard library imports
import math
import collections

# third party imports
import numpy as np
import torch

# library specific imports
from src import Box3D


# nuScenes-like rig: name, yaw (degrees), horizontal field of view (degrees)
RIG_LAYOUT = (
    ("CAM_FRONT", 0.0, 70.0),
    ("CAM_FRONT_LEFT", 55.0, 70.0),
    ("CAM_FRONT_RIGHT", -55.0, 70.0),
    ("CAM_BACK", 180.0, 110.0),
    ("CAM_BACK_LEFT", 110.0, 70.0),
    ("CAM_BACK_RIGHT", -110.0, 70.0),
)
CAMERA_NAMES = tuple(name for name, _, _ in RIG_LAYOUT)
CAMERA_MOUNT = (0.0, 0.0, 1.5)


def normalize_yaw(theta):
    """Wrap angle into (-π, π].

    :param float theta: angle (in radians)

    :returns: congruent angle
    :rtype: float
    """
    wrapped = math.remainder(theta, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def normalize_yaws(theta):
    """Vectorized normalize_yaw."""
    wrapped = np.remainder(np.asarray(theta, dtype=float) + math.pi, 2 * math.pi)
    wrapped = wrapped - math.pi
    return np.where(wrapped <= -math.pi, wrapped + 2 * math.pi, wrapped)


def box_to_array(box):
    """Box geometry as [cx, cy, cz, w, l, h, yaw]."""
    return np.array(box[:7], dtype=float)


def box_params(box):
    """Regression parameterization [cx, cy, cz, log w, log l, log h, sin, cos].

    :param Box3D box: box

    :returns: parameters
    :rtype: ndarray
    """
    return np.array(
        (
            box.cx,
            box.cy,
            box.cz,
            math.log(box.w),
            math.log(box.l),
            math.log(box.h),
            math.sin(box.yaw),
            math.cos(box.yaw),
        )
    )


def params_to_box(params, score=1.0, class_id=0):
    """Inverse of box_params.

    :param params: parameters
    :param float score: confidence
    :param int class_id: class

    :returns: box
    :rtype: Box3D
    """
    cx, cy, cz, log_w, log_l, log_h, sin, cos = (float(value) for value in params)
    return Box3D(
        cx,
        cy,
        cz,
        math.exp(log_w),
        math.exp(log_l),
        math.exp(log_h),
        normalize_yaw(math.atan2(sin, cos)),
        score,
        class_id,
    )


def box_corners_bev(box):
    """Footprint corners, counter-clockwise.

    :param Box3D box: box

    :returns: corners [4, 2]
    :rtype: ndarray
    """
    half_l, half_w = box.l / 2, box.w / 2
    local = np.array(
        ((half_l, -half_w), (half_l, half_w), (-half_l, half_w), (-half_l, -half_w))
    )
    cos, sin = math.cos(box.yaw), math.sin(box.yaw)
    rotation = np.array(((cos, -sin), (sin, cos)))
    return local @ rotation.T + np.array((box.cx, box.cy))


def _side(a, b, p):
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def _intersection(p, q, a, b):
    sp, sq = _side(a, b, p), _side(a, b, q)
    t = sp / (sp - sq)
    return p + t * (q - p)


def clip_polygon(subject, clipper):
    """Clip polygon by a convex counter-clockwise polygon (Sutherland–Hodgman).

    :param subject: polygon vertices
    :param clipper: convex counter-clockwise polygon vertices

    :returns: clipped vertices (maybe empty)
    :rtype: list
    """
    output = [np.asarray(point, dtype=float) for point in subject]
    for i in range(len(clipper)):
        if not output:
            break
        a, b = clipper[i], clipper[(i + 1) % len(clipper)]
        vertices, output = output, []
        for j, current in enumerate(vertices):
            previous = vertices[j - 1]
            current_inside = _side(a, b, current) >= 0
            previous_inside = _side(a, b, previous) >= 0
            if current_inside:
                if not previous_inside:
                    output.append(_intersection(previous, current, a, b))
                output.append(current)
            elif previous_inside:
                output.append(_intersection(previous, current, a, b))
    return output


def polygon_area(vertices):
    """Shoelace area."""
    if len(vertices) < 3:
        return 0.0
    points = np.asarray(vertices, dtype=float)
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def intersection_bev(a, b):
    """Footprint intersection area."""
    if (a.cx, a.cy, a.w, a.l, a.yaw) == (b.cx, b.cy, b.w, b.l, b.yaw):
        return a.w * a.l
    return polygon_area(clip_polygon(box_corners_bev(a), box_corners_bev(b)))


def iou_bev(a, b):
    """Rotated footprint IoU.

    :param Box3D a: box
    :param Box3D b: box

    :returns: IoU in [0,1]
    :rtype: float
    """
    intersection = intersection_bev(a, b)
    if intersection <= 0:
        return 0.0
    union = a.w * a.l + b.w * b.l - intersection
    return min(1.0, max(0.0, intersection / union))


def _height_overlap(a, b):
    top = min(a.cz + a.h / 2, b.cz + b.h / 2)
    bottom = max(a.cz - a.h / 2, b.cz - b.h / 2)
    return max(0.0, top - bottom)


def _volumes(a, b):
    intersection = intersection_bev(a, b) * _height_overlap(a, b)
    union = a.volume + b.volume - intersection
    return intersection, union


def iou_3d(a, b):
    """Volumetric IoU.

    :param Box3D a: box
    :param Box3D b: box

    :returns: IoU in [0,1]
    :rtype: float
    """
    intersection, union = _volumes(a, b)
    if intersection <= 0:
        return 0.0
    return min(1.0, max(0.0, intersection / union))


def giou_3d(a, b):
    """Volumetric generalized IoU with an axis-aligned enclosing box.

    :param Box3D a: box
    :param Box3D b: box

    :returns: GIoU in (-1,1]
    :rtype: float
    """
    intersection, union = _volumes(a, b)
    corners = np.vstack((box_corners_bev(a), box_corners_bev(b)))
    extent = corners.max(axis=0) - corners.min(axis=0)
    top = max(a.cz + a.h / 2, b.cz + b.h / 2)
    bottom = min(a.cz - a.h / 2, b.cz - b.h / 2)
    hull = float(extent[0] * extent[1]) * (top - bottom)
    iou = min(1.0, max(0.0, intersection / union)) if intersection > 0 else 0.0
    return iou - (hull - union) / hull


def aligned_giou(pred, target):
    """Differentiable GIoU surrogate in the target's yaw-aligned frame.

    The prediction's footprint is replaced by its axis-aligned extent in
    the target's local frame, so yaw enters through corner positions only.

    :param Tensor pred: boxes [N, 7] as (cx, cy, cz, w, l, h, yaw)
    :param Tensor target: boxes [N, 7]

    :returns: GIoU per pair [N]
    :rtype: Tensor
    """
    cos, sin = torch.cos(target[:, 6]), torch.sin(target[:, 6])
    dx, dy = pred[:, 0] - target[:, 0], pred[:, 1] - target[:, 1]
    # prediction center in the target frame
    px, py = cos * dx + sin * dy, -sin * dx + cos * dy
    delta = pred[:, 6] - target[:, 6]
    half_l, half_w = pred[:, 4] / 2, pred[:, 3] / 2
    ext_x = (half_l * torch.cos(delta)).abs() + (half_w * torch.sin(delta)).abs()
    ext_y = (half_l * torch.sin(delta)).abs() + (half_w * torch.cos(delta)).abs()
    pred_lo = torch.stack((px - ext_x, py - ext_y, pred[:, 2] - pred[:, 5] / 2), -1)
    pred_hi = torch.stack((px + ext_x, py + ext_y, pred[:, 2] + pred[:, 5] / 2), -1)
    zeros = torch.zeros_like(target[:, 0])
    half = torch.stack((target[:, 4] / 2, target[:, 3] / 2, target[:, 5] / 2), -1)
    center = torch.stack((zeros, zeros, target[:, 2]), -1)
    target_lo, target_hi = center - half, center + half
    overlap = (torch.minimum(pred_hi, target_hi) - torch.maximum(pred_lo, target_lo))
    intersection = overlap.clamp(min=0).prod(-1)
    pred_volume = (pred_hi - pred_lo).prod(-1)
    target_volume = (target_hi - target_lo).prod(-1)
    union = pred_volume + target_volume - intersection
    hull = (
        torch.maximum(pred_hi, target_hi) - torch.minimum(pred_lo, target_lo)
    ).prod(-1)
    return intersection / union - (hull - union) / hull


_CameraModel = collections.namedtuple(
    "CameraModel",
    ("name", "fx", "fy", "cx", "cy", "rotation", "translation", "width", "height"),
)


class CameraModel(_CameraModel):
    """Pinhole camera, camera-from-ego extrinsics, image size in pixels.

    Camera axes: +z forward, +x right, +y down.
    """

    __slots__ = ()

    @property
    def intrinsics(self):
        return np.array(
            ((self.fx, 0.0, self.cx), (0.0, self.fy, self.cy), (0.0, 0.0, 1.0))
        )

    @property
    def position(self):
        """Camera center in the ego frame."""
        return -self.rotation.T @ self.translation

    @property
    def is_valid(self):
        rotation = np.asarray(self.rotation)
        return (
            self.fx > 0
            and self.fy > 0
            and self.width > 0
            and self.height > 0
            and np.allclose(rotation @ rotation.T, np.eye(3), rtol=0, atol=1e-9)
        )


def make_camera(name, yaw, fov, width, height, mount=CAMERA_MOUNT):
    """Make level camera looking along an ego heading.

    :param str name: camera name
    :param float yaw: heading (in radians)
    :param float fov: horizontal field of view (in radians)
    :param int width: image width (in pixels)
    :param int height: image height (in pixels)
    :param tuple mount: camera center in the ego frame

    :returns: camera
    :rtype: CameraModel
    """
    forward = np.array((math.cos(yaw), math.sin(yaw), 0.0))
    right = np.array((math.sin(yaw), -math.cos(yaw), 0.0))
    down = np.array((0.0, 0.0, -1.0))
    rotation = np.vstack((right, down, forward))
    translation = -rotation @ np.asarray(mount, dtype=float)
    focal = (width / 2) / math.tan(fov / 2)
    return CameraModel(
        name, focal, focal, width / 2, height / 2, rotation, translation, width, height
    )


def default_rig(width=96, height=64):
    """Six-camera surround rig.

    :param int width: image width (in pixels)
    :param int height: image height (in pixels)

    :returns: cameras
    :rtype: tuple
    """
    return tuple(
        make_camera(name, math.radians(yaw), math.radians(fov), width, height)
        for name, yaw, fov in RIG_LAYOUT
    )


def project_points(points, cam):
    """Project ego points.

    :param points: ego points [N, 3]
    :param CameraModel cam: camera

    :returns: pixels [N, 2], depths [N], in-view flags [N]
    :rtype: tuple
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    camera = points @ cam.rotation.T + cam.translation
    depth = camera[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * camera[:, 0] / depth + cam.cx
        v = cam.fy * camera[:, 1] / depth + cam.cy
    valid = (depth > 0) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    return np.stack((u, v), axis=-1), depth, valid


def project_to_image(point, cam):
    """Project ego point.

    :param point: ego point
    :param CameraModel cam: camera

    :returns: pixel and depth (u, v, depth) or None when out of view
    :rtype: tuple
    """
    pixels, depth, valid = project_points(point, cam)
    if not valid[0]:
        return None
    return float(pixels[0, 0]), float(pixels[0, 1]), float(depth[0])


def unproject(u, v, depth, cam):
    """Ego point on the pixel ray at a depth.

    :param float u: column coordinate
    :param float v: row coordinate
    :param float depth: depth along the optical axis
    :param CameraModel cam: camera

    :returns: ego point
    :rtype: ndarray
    """
    camera = np.array(
        ((u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth)
    )
    return cam.rotation.T @ (camera - cam.translation)


_BEVSpec = collections.namedtuple(
    "BEVSpec", ("x_range", "y_range", "cell", "channels"), defaults=(32,)
)


class BEVSpec(_BEVSpec):
    """Ego-centred BEV raster: rows index x, columns index y."""

    __slots__ = ()

    def __new__(cls, x_range, y_range, cell, channels=32):
        x_range, y_range = tuple(map(float, x_range)), tuple(map(float, y_range))
        if not (x_range[0] < x_range[1] and y_range[0] < y_range[1]):
            raise ValueError(f"empty range {x_range} x {y_range}")
        if cell <= 0 or channels <= 0:
            raise ValueError("cell and channels must be positive")
        return super().__new__(cls, x_range, y_range, float(cell), int(channels))

    @property
    def rows(self):
        return math.ceil(round((self.x_range[1] - self.x_range[0]) / self.cell, 9))

    @property
    def cols(self):
        return math.ceil(round((self.y_range[1] - self.y_range[0]) / self.cell, 9))

    @property
    def shape(self):
        return (self.rows, self.cols)


def bev_index(spec, x, y):
    """Cell containing a point, half-open binning.

    :param BEVSpec spec: raster
    :param float x: x (in meters)
    :param float y: y (in meters)

    :returns: (row, col) or None when out of range
    :rtype: tuple
    """
    (x0, x1), (y0, y1) = spec.x_range, spec.y_range
    if not (x0 <= x < x1 and y0 <= y < y1):
        return None
    row = min(int(math.floor((x - x0) / spec.cell)), spec.rows - 1)
    col = min(int(math.floor((y - y0) / spec.cell)), spec.cols - 1)
    return row, col


def bev_center(spec, row, col):
    """Cell center (x, y)."""
    return (
        spec.x_range[0] + (row + 0.5) * spec.cell,
        spec.y_range[0] + (col + 0.5) * spec.cell,
    )


def bev_centers(spec):
    """All cell centers.

    :param BEVSpec spec: raster

    :returns: centers [rows, cols, 2]
    :rtype: ndarray
    """
    xs = spec.x_range[0] + (np.arange(spec.rows) + 0.5) * spec.cell
    ys = spec.y_range[0] + (np.arange(spec.cols) + 0.5) * spec.cell
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    return np.stack((grid_x, grid_y), axis=-1)


def points_to_box_frame(points, box):
    """Express ego points in a box's local frame (x along length).

    :param points: ego points [N, 3]
    :param Box3D box: box

    :returns: local points [N, 3]
    :rtype: ndarray
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    shifted = points - np.array(box.center)
    cos, sin = math.cos(box.yaw), math.sin(box.yaw)
    return np.stack(
        (
            cos * shifted[:, 0] + sin * shifted[:, 1],
            -sin * shifted[:, 0] + cos * shifted[:, 1],
            shifted[:, 2],
        ),
        axis=-1,
    )


def box_corners_3d(box):
    """Box corners, bottom face first.

    :param Box3D box: box

    :returns: corners [8, 3]
    :rtype: ndarray
    """
    corners = box_corners_bev(box)
    bottom, top = box.cz - box.h / 2, box.cz + box.h / 2
    return np.vstack(
        (
            np.column_stack((corners, np.full(4, bottom))),
            np.column_stack((corners, np.full(4, top))),
        )
    )


def params_to_geometry(params):
    """Differentiable inverse of box_params for batches.

    :param Tensor params: parameters [N, 8]

    :returns: boxes [N, 7] as (cx, cy, cz, w, l, h, yaw)
    :rtype: Tensor
    """
    yaw = torch.atan2(params[:, 6], params[:, 7])
    return torch.cat((params[:, :3], params[:, 3:6].exp(), yaw[:, None]), dim=-1)


def normalize_params(params):
    """Project parameters [N, 8] onto unit-length (sin, cos) yaw encodings."""
    norm = params[:, 6:8].norm(dim=-1, keepdim=True).clamp(min=1e-12)
    return torch.cat((params[:, :6], params[:, 6:8] / norm), dim=-1)

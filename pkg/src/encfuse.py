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
:synopsis: LiDAR and camera encoders, camera-to-BEV lifting, BEV fusion
    and ROI pooling.
"""


# standard library imports
import math
import logging
import collections

# third party imports
import numpy as np
import torch
import torch.nn.functional as F

# library specific imports
import src.geometry
import src.nncore

from src.geometry import BEVSpec, CAMERA_NAMES
from src.nncore import AttentionConfig


# count, mean x/y offset from the cell center, mean z, mean intensity, max z
LIDAR_STATISTICS = 6


class SpecMismatch(ValueError):
    """Raised when BEV grids do not share a raster."""

    pass


class MaskError(ValueError):
    """Raised when a modality mask disables every sensor."""

    pass


_BEVGrid = collections.namedtuple("BEVGrid", ("spec", "features"))


class BEVGrid(_BEVGrid):
    """Feature raster [rows, cols, C] over a BEVSpec."""

    __slots__ = ()

    def __new__(cls, spec, features):
        if tuple(features.shape[:2]) != spec.shape:
            raise SpecMismatch(
                f"features {tuple(features.shape)} do not match raster {spec.shape}"
            )
        return super().__new__(cls, spec, features)

    @property
    def channels(self):
        return self.features.shape[-1]

    @classmethod
    def zeros(cls, spec, channels=None, dtype=src.nncore.DTYPE):
        channels = spec.channels if channels is None else channels
        return cls(spec, torch.zeros((*spec.shape, channels), dtype=dtype))


_ModalityMask = collections.namedtuple("ModalityMask", ("lidar", "cameras"))


class ModalityMask(_ModalityMask):
    """Enabled sensors: LiDAR flag and one flag per rig camera."""

    __slots__ = ()

    def __new__(cls, lidar=True, cameras=(True,) * len(CAMERA_NAMES)):
        cameras = tuple(bool(flag) for flag in cameras)
        if not lidar and not any(cameras):
            raise MaskError("at least one modality must stay enabled")
        return super().__new__(cls, bool(lidar), cameras)

    @property
    def any_camera(self):
        return any(self.cameras)

    @classmethod
    def from_config(cls, config):
        """Modality mask of a run configuration.

        :param dict config: run configuration

        :raises MaskError: when every sensor is disabled or a camera is
            unknown

        :returns: mask
        :rtype: ModalityMask
        """
        section = config["mask"]
        unknown = set(section["cameras"]) - set(CAMERA_NAMES)
        if unknown:
            raise MaskError(f"unknown cameras {sorted(unknown)}")
        return cls(
            section["lidar"], [name in section["cameras"] for name in CAMERA_NAMES]
        )


def bev_spec(config):
    """BEV raster of a run configuration."""
    return BEVSpec(**config["bev"])


def camera_stride(layers):
    """Total stride of the camera encoder."""
    return math.prod(stride for _, stride in layers)


def init_lidar_encoder(store, channels, rng, name="lidar"):
    src.nncore.init_linear(store, f"{name}.fc1", LIDAR_STATISTICS, channels, rng)
    src.nncore.init_linear(store, f"{name}.fc2", channels, channels, rng)


def init_camera_encoder(store, in_channels, channels, layers, rng, name="camera"):
    """Add the shared strided convolution stack.

    :param ParamStore store: parameter store
    :param int in_channels: rendered grid channels
    :param int channels: output channels
    :param list layers: [kernel, stride] per layer
    :param Generator rng: pseudo-random generator
    :param str name: layer name
    """
    for index, (kernel, _) in enumerate(layers):
        din = in_channels if index == 0 else channels
        fan = (din + channels) * kernel * kernel
        limit = math.sqrt(6.0 / fan)
        store.add(
            f"{name}.conv{index}.kernel",
            rng.uniform(-limit, limit, size=(channels, din, kernel, kernel)),
        )
        store.add(f"{name}.conv{index}.b", np.zeros(channels))


def init_lifting(store, channels, rng, name="lift"):
    src.nncore.init_linear(store, f"{name}.score", channels, 1, rng)


def init_fusion(store, channels, mode, rng, heads=4, identity=False, name="fusion"):
    """Add fusion parameters.

    :param ParamStore store: parameter store
    :param int channels: BEV channels
    :param str mode: concat or xattn
    :param Generator rng: pseudo-random generator
    :param int heads: attention heads (xattn)
    :param bool identity: toggle passing LiDAR features through at init on/off
    :param str name: layer name
    """
    eye = np.eye(channels)
    if mode == "concat":
        kernel = np.zeros((channels, 2 * channels, 3, 3))
        if identity:
            kernel[:, :channels, 1, 1] = eye
        else:
            limit = math.sqrt(6.0 / (3 * channels * 9))
            kernel = rng.uniform(-limit, limit, size=kernel.shape)
        store.add(f"{name}.conv.kernel", kernel)
        store.add(f"{name}.conv.b", np.zeros(channels))
        if identity:
            store.add(f"{name}.mix.kernel", eye[:, :, None, None])
            store.add(f"{name}.mix.b", np.zeros(channels))
        else:
            init_pointwise(store, f"{name}.mix", channels, rng)
    elif mode == "xattn":
        src.nncore.init_attention(
            store, f"{name}.attn", AttentionConfig(channels, heads), rng
        )
        if identity:
            store.add(f"{name}.mix.w", eye)
            store.add(f"{name}.mix.b", np.zeros(channels))
        else:
            src.nncore.init_linear(store, f"{name}.mix", channels, channels, rng)
    else:
        raise ValueError(f"unknown fusion mode '{mode}'")


def init_pointwise(store, name, channels, rng):
    limit = math.sqrt(6.0 / (2 * channels))
    store.add(
        f"{name}.kernel", rng.uniform(-limit, limit, size=(channels, channels, 1, 1))
    )
    store.add(f"{name}.b", np.zeros(channels))


def init_encoders(store, config, rng):
    """Add every encoder and fusion parameter a run configuration needs.

    :param ParamStore store: parameter store
    :param dict config: run configuration
    :param Generator rng: pseudo-random generator
    """
    channels = config["bev"]["channels"]
    camera = config["camera"]
    init_lidar_encoder(store, channels, rng)
    init_camera_encoder(store, camera["channels"], channels, camera["layers"], rng)
    init_lifting(store, channels, rng)
    init_fusion(
        store, channels, config["fusion"]["mode"], rng, heads=config["fusion"]["heads"]
    )


def lidar_cell_statistics(points, spec):
    """Per-cell LiDAR statistics.

    :param points: points [N, 4] as (x, y, z, intensity)
    :param BEVSpec spec: raster

    :returns: statistics [rows, cols, 6], occupancy [rows, cols]
    :rtype: tuple
    """
    points = np.asarray(points, dtype=float).reshape(-1, 4)
    (x0, x1), (y0, y1) = spec.x_range, spec.y_range
    x, y = points[:, 0], points[:, 1]
    inside = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
    points = points[inside]
    rows = np.floor((points[:, 0] - x0) / spec.cell).astype(int)
    cols = np.floor((points[:, 1] - y0) / spec.cell).astype(int)
    rows, cols = np.minimum(rows, spec.rows - 1), np.minimum(cols, spec.cols - 1)
    counts = np.zeros(spec.shape)
    np.add.at(counts, (rows, cols), 1.0)
    center_x = x0 + (rows + 0.5) * spec.cell
    center_y = y0 + (cols + 0.5) * spec.cell
    sums = np.zeros((*spec.shape, 4))
    values = np.column_stack(
        (
            (points[:, 0] - center_x) / spec.cell,
            (points[:, 1] - center_y) / spec.cell,
            points[:, 2],
            points[:, 3],
        )
    )
    np.add.at(sums, (rows, cols), values)
    top = np.full(spec.shape, -np.inf)
    np.maximum.at(top, (rows, cols), points[:, 2])
    occupied = counts > 0
    statistics = np.zeros((*spec.shape, LIDAR_STATISTICS))
    statistics[..., 0] = np.log1p(counts)
    statistics[occupied, 1:5] = sums[occupied] / counts[occupied, None]
    statistics[occupied, 5] = top[occupied]
    return statistics, occupied


def voxelize_lidar(points, spec, store, name="lidar"):
    """Encode a sweep into BEV features.

    :param points: points [N, 4] as (x, y, z, intensity)
    :param BEVSpec spec: raster
    :param ParamStore store: parameter store
    :param str name: layer name

    :returns: LiDAR grid, zero in empty cells
    :rtype: BEVGrid
    """
    statistics, occupied = lidar_cell_statistics(points, spec)
    x = torch.as_tensor(statistics, dtype=store.dtype)
    hidden = torch.relu(src.nncore.apply_linear(x, store, f"{name}.fc1"))
    features = src.nncore.apply_linear(hidden, store, f"{name}.fc2")
    occupied = torch.as_tensor(occupied, dtype=store.dtype)[..., None]
    return BEVGrid(spec, features * occupied)


def encode_camera(images, store, layers, name="camera"):
    """Shared convolution stack applied to every camera grid.

    Layers use "same" padding and are separated by ReLU.

    :param images: grids [H, W, C0] or [cameras, H, W, C0]
    :param ParamStore store: parameter store
    :param list layers: [kernel, stride] per layer
    :param str name: layer name

    :returns: feature maps [cameras, H', W', C] (or [H', W', C])
    :rtype: Tensor
    """
    x = torch.as_tensor(np.asarray(images), dtype=store.dtype)
    single = x.dim() == 3
    if single:
        x = x[None]
    x = x.permute(0, 3, 1, 2)
    for index, (kernel, stride) in enumerate(layers):
        if index:
            x = torch.relu(x)
        x = F.conv2d(
            x,
            store[f"{name}.conv{index}.kernel"],
            store[f"{name}.conv{index}.b"],
            stride=stride,
            padding=kernel // 2,
        )
    x = x.permute(0, 2, 3, 1)
    return x[0] if single else x


def _sample_grid(features, u, v):
    """Bilinear samples of one feature map at pixel coordinates.

    :param Tensor features: feature map [H, W, C]
    :param ndarray u: column coordinates [P] (pixel centers at +0.5)
    :param ndarray v: row coordinates [P]

    :returns: samples [P, C]
    :rtype: Tensor
    """
    height, width = features.shape[0], features.shape[1]
    grid = np.stack((2 * u / width - 1, 2 * v / height - 1), axis=-1)
    grid = torch.as_tensor(grid, dtype=features.dtype)[None, :, None, :]
    sampled = F.grid_sample(
        features.permute(2, 0, 1)[None],
        grid,
        mode="bilinear",
        padding_mode="border",
        align_corners=False,
    )
    return sampled[0, :, :, 0].transpose(0, 1)


def lift_cameras_to_bev(
    features, cameras, spec, anchors, store, enabled=None, stride=1, name="lift"
):
    """Lift camera feature maps onto the BEV raster.

    Every cell center is raised to each height anchor and projected into
    every enabled camera. Visible samples are blended by a softmax over
    learned sample scores; cells no camera sees stay zero.

    :param Tensor features: feature maps [cameras, H', W', C]
    :param tuple cameras: camera models (full image resolution)
    :param BEVSpec spec: raster
    :param list anchors: heights (in meters)
    :param ParamStore store: parameter store
    :param tuple enabled: per-camera flags (all if empty)
    :param int stride: total encoder stride
    :param str name: layer name

    :raises DimensionError: when maps and cameras disagree

    :returns: camera grid
    :rtype: BEVGrid
    """
    if features.shape[0] != len(cameras):
        raise src.nncore.DimensionError(
            f"{features.shape[0]} feature maps for {len(cameras)} cameras"
        )
    enabled = enabled if enabled is not None else (True,) * len(cameras)
    channels = features.shape[-1]
    centers = src.geometry.bev_centers(spec).reshape(-1, 2)
    samples, valid = [], []
    for index, cam in enumerate(cameras):
        if not enabled[index]:
            continue
        for height in anchors:
            points = np.column_stack((centers, np.full(len(centers), float(height))))
            pixels, _, visible = src.geometry.project_points(points, cam)
            # encoder output pixel j' covers input pixel j'·stride
            u = (np.nan_to_num(pixels[:, 0]) - 0.5) / stride + 0.5
            v = (np.nan_to_num(pixels[:, 1]) - 0.5) / stride + 0.5
            samples.append(_sample_grid(features[index], u, v))
            valid.append(visible)
    if not samples:
        return BEVGrid.zeros(spec, channels, dtype=features.dtype)
    samples = torch.stack(samples)
    allowed = torch.as_tensor(np.stack(valid))
    logits = src.nncore.apply_linear(samples, store, f"{name}.score")[..., 0]
    logits = logits.masked_fill(~allowed, float("-inf"))
    unseen = ~allowed.any(dim=0, keepdim=True)
    logits = logits.masked_fill(unseen, 0.0)
    weights = src.nncore.softmax(logits, axis=0).masked_fill(~allowed, 0.0)
    lifted = (weights[..., None] * samples).sum(dim=0)
    return BEVGrid(spec, lifted.reshape(*spec.shape, channels))


def _check_specs(f_l, f_c):
    if f_l.spec != f_c.spec or f_l.features.shape != f_c.features.shape:
        raise SpecMismatch(
            f"cannot fuse {f_l.spec} {tuple(f_l.features.shape)} with "
            f"{f_c.spec} {tuple(f_c.features.shape)}"
        )


def _neighbourhood(x, window):
    """Cell neighbourhoods [rows·cols, window², C] and in-grid flags."""
    rows, cols, channels = x.shape
    padding = window // 2
    patches = F.unfold(x.permute(2, 0, 1)[None], window, padding=padding)
    patches = patches[0].reshape(channels, window * window, rows * cols)
    ones = torch.ones((1, 1, rows, cols), dtype=x.dtype)
    inside = F.unfold(ones, window, padding=padding)[0].transpose(0, 1) > 0.5
    return patches.permute(2, 1, 0), inside


def fuse_bev(
    f_l, f_c, store, mode="concat", mask=None, activation="relu", heads=4, window=3,
    name="fusion",
):
    """Fuse LiDAR and camera grids.

    concat: channel stack, 3×3 convolution, activation, 1×1 mixing
    convolution. xattn: every LiDAR cell attends to the camera features of
    its window×window neighbourhood, the result is added to the LiDAR
    features and mixed by a linear layer.

    :param BEVGrid f_l: LiDAR grid
    :param BEVGrid f_c: camera grid
    :param ParamStore store: parameter store
    :param str mode: concat or xattn
    :param ModalityMask mask: enabled sensors
    :param str activation: relu or identity
    :param int heads: attention heads (xattn)
    :param int window: neighbourhood side (xattn)
    :param str name: layer name

    :raises SpecMismatch: when grids differ in raster or channels

    :returns: fused grid
    :rtype: BEVGrid
    """
    _check_specs(f_l, f_c)
    mask = mask or ModalityMask()
    lidar = f_l.features if mask.lidar else torch.zeros_like(f_l.features)
    camera = f_c.features if mask.any_camera else torch.zeros_like(f_c.features)
    rows, cols, channels = lidar.shape
    if mode == "concat":
        x = torch.cat((lidar, camera), dim=-1).permute(2, 0, 1)[None]
        kernel, bias = store[f"{name}.conv.kernel"], store[f"{name}.conv.b"]
        x = F.conv2d(x, kernel, bias, padding=1)
        if activation == "relu":
            x = torch.relu(x)
        x = F.conv2d(x, store[f"{name}.mix.kernel"], store[f"{name}.mix.b"])
        fused = x[0].permute(1, 2, 0)
    elif mode == "xattn":
        cfg = AttentionConfig(channels, heads)
        keys, inside = _neighbourhood(camera, window)
        if not mask.any_camera:
            inside = torch.zeros_like(inside)
        queries = lidar.reshape(rows * cols, 1, channels)
        context = src.nncore.multi_head_attention(
            queries, keys, keys, store, f"{name}.attn", cfg, mask=inside[:, None, :]
        )
        fused = src.nncore.apply_linear(
            lidar + context.reshape(rows, cols, channels), store, f"{name}.mix"
        )
    else:
        raise ValueError(f"unknown fusion mode '{mode}'")
    return BEVGrid(f_l.spec, fused)


def roi_pool(grid, box):
    """Pool grid features over a box footprint.

    Mean over the cells whose centers lie in the rotated footprint; a
    bilinear sample at the box center when the footprint covers no cell
    center.

    :param BEVGrid grid: grid
    :param Box3D box: box

    :returns: features [C], whether the box lies outside the grid
    :rtype: tuple
    """
    spec = grid.spec
    centers = src.geometry.bev_centers(spec).reshape(-1, 2)
    points = np.column_stack((centers, np.full(len(centers), box.cz)))
    local = src.geometry.points_to_box_frame(points, box)
    covered = (np.abs(local[:, 0]) <= box.l / 2) & (np.abs(local[:, 1]) <= box.w / 2)
    features = grid.features.reshape(-1, grid.channels)
    if covered.any():
        index = torch.as_tensor(np.flatnonzero(covered), dtype=torch.long)
        return features[index].mean(dim=0), False
    (x0, x1), (y0, y1) = spec.x_range, spec.y_range
    if not (x0 <= box.cx < x1 and y0 <= box.cy < y1):
        return torch.zeros(grid.channels, dtype=grid.features.dtype), True
    # columns run along y, rows along x
    u = np.array([(box.cy - y0) / spec.cell])
    v = np.array([(box.cx - x0) / spec.cell])
    return _sample_grid(grid.features, u, v)[0], False


def roi_pool_many(grid, boxes):
    """Pool features of several boxes.

    :param BEVGrid grid: grid
    :param list boxes: boxes

    :returns: features [N, C], outside flags [N]
    :rtype: tuple
    """
    if not boxes:
        return torch.zeros((0, grid.channels), dtype=grid.features.dtype), []
    pooled = [roi_pool(grid, box) for box in boxes]
    return torch.stack([vector for vector, _ in pooled]), [flag for _, flag in pooled]


def encode_frame(bundle, cameras, store, config, mask=None):
    """Fused BEV features of a frame.

    :param FrameBundle bundle: rendered frame
    :param tuple cameras: camera models
    :param ParamStore store: parameter store
    :param dict config: run configuration
    :param ModalityMask mask: enabled sensors

    :returns: fused grid
    :rtype: BEVGrid
    """
    logger = logging.getLogger().getChild(encode_frame.__name__)
    spec = bev_spec(config)
    mask = mask or ModalityMask()
    f_l = voxelize_lidar(bundle.points, spec, store)
    if mask.any_camera and bundle.images is not None:
        camera = config["camera"]
        features = encode_camera(bundle.images, store, camera["layers"])
        f_c = lift_cameras_to_bev(
            features,
            cameras,
            spec,
            camera["height_anchors"],
            store,
            enabled=mask.cameras,
            stride=camera_stride(camera["layers"]),
        )
    else:
        f_c = BEVGrid.zeros(spec, dtype=store.dtype)
    fusion = config["fusion"]
    fused = fuse_bev(
        f_l,
        f_c,
        store,
        mode=fusion["mode"],
        mask=mask,
        activation=fusion["activation"],
        heads=fusion["heads"],
        window=fusion["window"],
    )
    logger.debug(f"frame {bundle.frame}: {len(bundle.points)} points fused")
    return fused

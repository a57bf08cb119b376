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
:synopsis: Run configuration handling.
"""


# standard library imports
import os
import copy
import json

from pathlib import Path

# third party imports
# library specific imports
from src import CLASSES
from src.geometry import CAMERA_NAMES


DEFAULTS = {
    "seed": 0,
    "bev": {
        "x_range": [-20.0, 20.0],
        "y_range": [-20.0, 20.0],
        "cell": 0.5,
        "channels": 32,
    },
    "camera": {
        "height": 64,
        "width": 96,
        "channels": 8,
        "height_anchors": [0.0, 1.0],
        "layers": [[3, 2], [3, 1]],
    },
    "scenario": {
        "train_count": 50,
        "val_count": 10,
        "frames": 20,
        "dt": 0.5,
        "min_objects": 1,
        "max_objects": 8,
        "classes": ["car", "pedestrian"],
        "crossing": False,
        "roi": 18.0,
    },
    "noise": {
        "center_sigma": 0.3,
        "size_sigma": 0.05,
        "yaw_sigma": 0.05,
        "score_scale": 1.0,
        "score_jitter": 0.1,
        "fn_rate": 0.05,
        "fp_rate": 0.3,
        "point_dropout": 0.0,
    },
    "lidar": {
        "points_per_sqm": 400.0,
        "ground_points": 200,
        "mount_height": 1.8,
        "max_range": 40.0,
    },
    "fusion": {"mode": "concat", "activation": "relu", "heads": 4, "window": 3},
    "attention": {"model_dim": 64, "heads": 4, "dropout": 0.0},
    "smoother": {
        "window": 8,
        "mode": "online",
        "blocks": 2,
        "positive_radius": 2.0,
        "epochs": 8,
        "lr": 1e-4,
        "batch_size": 4,
    },
    "tracker": {
        "delta": 0.3,
        "dup_radius": 0.5,
        "blocks": 2,
        "patience": 0,
        "epochs": 12,
        "lr": 1e-3,
        "lr_step": 8,
        "lr_gamma": 0.1,
        "unroll": 5,
        "truncation": 2,
    },
    "loss": {
        "reg": 0.25,
        "cls": 1.0,
        "focal_alpha": 0.25,
        "focal_gamma": 2.0,
        "inherit_identity": True,
    },
    "optimizer": {"betas": [0.9, 0.999], "weight_decay": 0.01, "eps": 1e-8},
    "eval": {
        "mode": "nusc",
        "distance": 2.0,
        "recall_thresholds": 40,
        "iou": {"car": 0.5, "pedestrian": 0.25},
    },
    "mask": {"lidar": True, "cameras": list(CAMERA_NAMES)},
    "output_dir": "runs",
    "jobs": 1,
}
# sections whose keys are free-form
FREE_KEYS = {"eval.iou"}


class BadConfig(Exception):
    """Raised when configuration contains errors."""

    pass


class ConfigNotFound(Exception):
    """Raised when configuration file does not exist."""

    pass


def _positive(value):
    return value > 0


def _non_negative(value):
    return value >= 0


def _probability(value):
    return 0 <= value <= 1


def _choice(*choices):
    return lambda value: value in choices


def _interval(value):
    return len(value) == 2 and value[0] < value[1]


def _layers(value):
    return 1 <= len(value) <= 3 and all(
        len(layer) == 2 and min(layer) > 0 for layer in value
    )


CONSTRAINTS = {
    "seed": ("non-negative", _non_negative),
    "bev.x_range": ("[min, max] with min < max", _interval),
    "bev.y_range": ("[min, max] with min < max", _interval),
    "bev.cell": ("positive", _positive),
    "bev.channels": ("positive", _positive),
    "camera.height": ("positive", _positive),
    "camera.width": ("positive", _positive),
    "camera.channels": ("at least 3", lambda value: value >= 3),
    "camera.height_anchors": ("non-empty", bool),
    "camera.layers": ("1 to 3 positive [kernel, stride] pairs", _layers),
    "scenario.train_count": ("non-negative", _non_negative),
    "scenario.val_count": ("non-negative", _non_negative),
    "scenario.frames": ("at least 2", lambda value: value >= 2),
    "scenario.dt": ("positive", _positive),
    "scenario.min_objects": ("non-negative", _non_negative),
    "scenario.max_objects": ("non-negative", _non_negative),
    "scenario.classes": (
        f"non-empty subset of {CLASSES}",
        lambda value: bool(value) and set(value) <= set(CLASSES),
    ),
    "scenario.roi": ("positive", _positive),
    "noise.center_sigma": ("non-negative", _non_negative),
    "noise.size_sigma": ("non-negative", _non_negative),
    "noise.yaw_sigma": ("non-negative", _non_negative),
    "noise.score_scale": ("positive", _positive),
    "noise.score_jitter": ("in [0,1]", _probability),
    "noise.fn_rate": ("in [0,1]", _probability),
    "noise.fp_rate": ("in [0,1)", lambda value: 0 <= value < 1),
    "noise.point_dropout": ("in [0,1)", lambda value: 0 <= value < 1),
    "lidar.points_per_sqm": ("non-negative", _non_negative),
    "lidar.ground_points": ("non-negative", _non_negative),
    "lidar.mount_height": ("positive", _positive),
    "lidar.max_range": ("positive", _positive),
    "fusion.mode": ("concat or xattn", _choice("concat", "xattn")),
    "fusion.activation": ("relu or identity", _choice("relu", "identity")),
    "fusion.heads": ("positive", _positive),
    "fusion.window": ("odd and positive", lambda value: value > 0 and value % 2),
    "attention.model_dim": ("positive", _positive),
    "attention.heads": ("positive", _positive),
    "attention.dropout": ("in [0,1)", lambda value: 0 <= value < 1),
    "smoother.window": ("positive", _positive),
    "smoother.mode": ("online or offline", _choice("online", "offline")),
    "smoother.blocks": ("positive", _positive),
    "smoother.positive_radius": ("positive", _positive),
    "smoother.epochs": ("non-negative", _non_negative),
    "smoother.lr": ("non-negative", _non_negative),
    "smoother.batch_size": ("positive", _positive),
    "tracker.delta": ("in [0,1]", _probability),
    "tracker.dup_radius": ("non-negative", _non_negative),
    "tracker.blocks": ("positive", _positive),
    "tracker.patience": ("non-negative", _non_negative),
    "tracker.epochs": ("non-negative", _non_negative),
    "tracker.lr": ("non-negative", _non_negative),
    "tracker.lr_step": ("positive", _positive),
    "tracker.lr_gamma": ("in (0,1]", lambda value: 0 < value <= 1),
    "tracker.unroll": ("at least 2", lambda value: value >= 2),
    "tracker.truncation": ("positive", _positive),
    "loss.reg": ("non-negative", _non_negative),
    "loss.cls": ("non-negative", _non_negative),
    "loss.focal_alpha": ("in [0,1]", _probability),
    "loss.focal_gamma": ("non-negative", _non_negative),
    "optimizer.betas": (
        "two values in [0,1)",
        lambda value: len(value) == 2 and all(0 <= beta < 1 for beta in value),
    ),
    "optimizer.weight_decay": ("non-negative", _non_negative),
    "optimizer.eps": ("positive", _positive),
    "eval.mode": ("nusc or kitti", _choice("nusc", "kitti")),
    "eval.distance": ("positive", _positive),
    "eval.recall_thresholds": ("positive", _positive),
    "eval.iou": (
        "class name -> threshold in (0,1]",
        lambda value: set(value) <= set(CLASSES)
        and all(0 < threshold <= 1 for threshold in value.values()),
    ),
    "mask.cameras": (
        f"subset of {CAMERA_NAMES}", lambda value: set(value) <= set(CAMERA_NAMES)
    ),
    "output_dir": ("non-empty", bool),
    "jobs": ("positive", _positive),
}


def default_config():
    """Default configuration.

    :returns: configuration
    :rtype: dict
    """
    return copy.deepcopy(DEFAULTS)


def _check_type(key, value, default):
    """Check value against the type of its default.

    :param str key: dotted key path
    :param value: value
    :param default: default value

    :raises BadConfig: on type mismatch
    """
    if isinstance(default, bool) or isinstance(value, bool):
        ok = isinstance(value, bool) and isinstance(default, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float))
    elif isinstance(default, list):
        ok = isinstance(value, list)
        if ok and default:
            for item in value:
                _check_type(key, item, default[0])
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise BadConfig(
            f"'{key}' expects {type(default).__name__}, got {json.dumps(value)}"
        )


def _merge(config, update, prefix=""):
    """Merge update into config, rejecting unknown keys.

    :param dict config: configuration
    :param dict update: partial configuration
    :param str prefix: dotted key path of config

    :raises BadConfig: on unknown key or type mismatch
    """
    if not isinstance(update, dict):
        raise BadConfig(f"'{prefix or '<root>'}' expects an object")
    for key, value in update.items():
        path = f"{prefix}{key}"
        if prefix.rstrip(".") in FREE_KEYS:
            _check_type(path, value, 0.0)
            config[key] = float(value)
        elif key not in config:
            raise BadConfig(f"unknown key '{path}'")
        elif isinstance(config[key], dict):
            if path in FREE_KEYS:
                config[key] = {}
            _merge(config[key], value, prefix=f"{path}.")
        else:
            _check_type(path, value, config[key])
            if isinstance(config[key], float):
                value = float(value)
            config[key] = value


def _validate_config(config):
    """Validate configuration.

    :param dict config: configuration

    :raises BadConfig: when a value is out of range
    """
    for key, (description, check) in CONSTRAINTS.items():
        value = config
        for part in key.split("."):
            value = value[part]
        if not check(value):
            raise BadConfig(f"'{key}' must be {description}, got {json.dumps(value)}")
    scenario = config["scenario"]
    if scenario["min_objects"] > scenario["max_objects"]:
        raise BadConfig("'scenario.min_objects' exceeds 'scenario.max_objects'")
    attention = config["attention"]
    if attention["model_dim"] % attention["heads"]:
        raise BadConfig("'attention.model_dim' is not divisible by 'attention.heads'")
    if config["bev"]["channels"] % config["fusion"]["heads"]:
        raise BadConfig("'bev.channels' is not divisible by 'fusion.heads'")


def _read_config(path):
    """Read configuration file.

    :param str path: path to configuration file

    :raises BadConfig: when the file is no JSON object

    :returns: partial configuration
    :rtype: dict
    """
    text = Path(path).read_text()
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exception:
        raise BadConfig(f"{path} is no valid JSON: {exception}") from exception


def _parse_override(override):
    """Parse 'key.path=value' into a partial configuration.

    :param str override: override

    :raises BadConfig: when '=' is missing

    :returns: partial configuration
    :rtype: dict
    """
    key, sep, text = override.partition("=")
    if not sep or not key:
        raise BadConfig(f"override '{override}' is not of the form key.path=value")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    update = value
    for part in reversed(key.split(".")):
        update = {part: update}
    return update


def _environment():
    update = {}
    if "BEVTRACK_OUTPUT_DIR" in os.environ:
        update["output_dir"] = os.environ["BEVTRACK_OUTPUT_DIR"]
    if "BEVTRACK_JOBS" in os.environ:
        try:
            update["jobs"] = int(os.environ["BEVTRACK_JOBS"])
        except ValueError as exception:
            raise BadConfig(
                f"BEVTRACK_JOBS is no integer: {os.environ['BEVTRACK_JOBS']}"
            ) from exception
    return update


def load_config(path="", overrides=()):
    """Load configuration.

    Defaults are updated by the file, then the environment, then the
    overrides.

    :param str path: path to configuration file (defaults only if empty)
    :param overrides: overrides of the form key.path=value

    :raises ConfigNotFound: when configuration file does not exist
    :raises BadConfig: when configuration contains errors

    :returns: configuration
    :rtype: dict
    """
    config = default_config()
    if path:
        if not os.path.exists(path):
            raise ConfigNotFound(f"configuration file {path} does not exist")
        _merge(config, _read_config(path))
    _merge(config, _environment())
    for override in overrides:
        _merge(config, _parse_override(override))
    _validate_config(config)
    return config


def override_config(config, overrides):
    """Copy of a configuration with overrides applied.

    :param dict config: configuration
    :param overrides: overrides of the form key.path=value

    :raises BadConfig: when the result contains errors

    :returns: configuration
    :rtype: dict
    """
    config = copy.deepcopy(config)
    for override in overrides:
        _merge(config, _parse_override(override))
    _validate_config(config)
    return config


def _write_config(config, path):
    with open(path, "w") as fp:
        json.dump(config, fp, indent=2, sort_keys=True)
        fp.write("\n")


def echo_config(config, out_dir):
    """Write effective configuration to the output directory.

    :param dict config: configuration
    :param str out_dir: output directory

    :returns: path to config.json
    :rtype: Path
    """
    path = Path(out_dir) / "config.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_config(config, path)
    return path

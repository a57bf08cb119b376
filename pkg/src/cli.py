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
:synopsis: Command-line interface.
"""


# standard library imports
import json
import time
import logging
import argparse
import contextlib
import collections

from pathlib import Path
from concurrent.futures import ProcessPoolExecutor

# third party imports
import numpy as np

# library specific imports
import src.config
import src.encfuse
import src.formats
import src.metrics
import src.output_formatter
import src.scenesim
import src.tracker
import src.trainer

from src import Box3D, TrackedObject, __version__
from src.config import BadConfig, ConfigNotFound
from src.encfuse import MaskError
from src.formats import FormatError
from src.geometry import CAMERA_NAMES
from src.nncore import NumericError
from src.trainer import Sequence, TrainingError

SPLITS = ("train", "val")
# configuration sections a checkpoint must agree on
MODEL_SECTIONS = ("attention", "bev", "camera", "fusion")
DONE = "DONE"


class InputError(Exception):
    """Raised when command inputs are missing or inconsistent."""

    pass


def exit_code(exception):
    """Exit code of a failed command.

    :param Exception exception: exception

    :returns: 2 (configuration), 3 (data), 4 (numeric) or 1
    :rtype: int
    """
    if isinstance(exception, (BadConfig, ConfigNotFound, MaskError)):
        return 2
    if isinstance(exception, (FormatError, InputError, TrainingError)):
        return 3
    if isinstance(exception, NumericError):
        return 4
    return 1


class RunManifest(
    collections.namedtuple(
        "RunManifest",
        ("command", "config", "inputs", "outputs", "seeds", "version", "timings"),
    )
):
    """Description of one command run.

    :ivar str command: subcommand
    :ivar dict config: effective configuration
    :ivar dict inputs: input paths by role
    :ivar dict outputs: output paths by role
    :ivar list seeds: scenario seeds
    :ivar str version: program version
    :ivar dict timings: wall-clock seconds by phase
    """

    __slots__ = ()

    def write(self, out_dir):
        """Write manifest.json to the output directory.

        :param str out_dir: output directory

        :returns: path to manifest.json
        :rtype: Path
        """
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fp:
            json.dump(self._asdict(), fp, indent=2, sort_keys=True)
            fp.write("\n")
        return path

    def complete(self, out_dir):
        """Rewrite the manifest with timings and add the completion marker.

        :param str out_dir: output directory
        """
        self.write(out_dir)
        (Path(out_dir) / DONE).write_text(f"{self.command}\n")


def make_manifest(command, config, inputs=None, outputs=None, seeds=()):
    """Make run manifest of a command.

    :param str command: command name
    :param dict config: resolved configuration
    :param dict inputs: input name -> path
    :param dict outputs: output name -> path
    :param tuple seeds: scenario seeds

    :returns: manifest with empty timings
    :rtype: RunManifest
    """
    return RunManifest(
        command,
        config,
        {k: str(v) for k, v in (inputs or {}).items()},
        {k: str(v) for k, v in (outputs or {}).items()},
        list(seeds),
        f"v{__version__}",
        {},
    )


@contextlib.contextmanager
def timed(timings, phase):
    """Record the wall-clock time of a phase.

    :param dict timings: wall-clock seconds by phase
    :param str phase: phase
    """
    logger = logging.getLogger().getChild(timed.__name__)
    logger.info(f"{phase} started")
    start = time.perf_counter()
    yield
    timings[phase] = time.perf_counter() - start
    logger.info(f"{phase} finished after {timings[phase]:.1f}s")


def _map(func, tasks, jobs):
    """Map function over tasks, in worker processes when jobs > 1.

    :param func: picklable function
    :param list tasks: tasks
    :param int jobs: number of worker processes

    :returns: results in task order
    :rtype: list
    """
    if jobs <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(func, tasks))


def scenario_path(data, split, seed):
    """Get archive directory of a scenario.

    :param str data: dataset directory
    :param str split: train or val
    :param int seed: scenario seed

    :returns: path
    :rtype: Path
    """
    return Path(data) / split / f"{seed:010d}"


def load_sequences(data, split):
    """Load the scenario archives of a split.

    :param str data: dataset directory
    :param str split: train or val

    :raises InputError: when the split directory does not exist

    :returns: sequences in seed order
    :rtype: list
    """
    directory = Path(data) / split
    if not directory.is_dir():
        raise InputError(f"{directory} does not exist")
    sequences = []
    for path in sorted(directory.iterdir()):
        if (path / "manifest.json").exists():
            sequences.append(Sequence(*src.formats.load_scenario(path)))
    return sequences


def _model_meta(config, kind):
    return {
        "kind": kind,
        "config": {section: config[section] for section in MODEL_SECTIONS},
        "blocks": config[kind]["blocks"],
    }


def load_checkpoint(path, config, kind):
    """Load parameters and check them against the configuration.

    :param str path: checkpoint directory
    :param dict config: run configuration
    :param str kind: smoother or tracker

    :raises InputError: when the checkpoint was trained for another model

    :returns: parameters
    :rtype: ParamStore
    """
    store, meta = src.formats.load_params(path)
    expected = json.loads(json.dumps(_model_meta(config, kind)))
    actual = {key: meta.get(key) for key in expected}
    if actual != expected:
        raise InputError(f"checkpoint {path} does not match the {kind} configuration")
    return store.eval()


def _gen_one(task):
    seed, config, path = task
    scenario = src.scenesim.generate_scenario(seed, config)
    src.formats.save_scenario(scenario, path)
    return seed


def _tracks_array(frames):
    rows = [
        (t, obj.track_id, *obj.box[:7], obj.box.score, obj.class_id, obj.confidence)
        for t, objs in enumerate(frames)
        for obj in objs
    ]
    return np.array(rows, dtype=float).reshape(-1, 12)


def _track_one(task):
    path, checkpoint, smoother, config, window = task
    scenario, bundles = src.formats.load_scenario(path)
    store = load_checkpoint(checkpoint, config, "tracker")
    smoother = load_checkpoint(smoother, config, "smoother") if smoother else None
    mask = src.encfuse.ModalityMask.from_config(config)
    frames = src.tracker.track_frames(
        bundles,
        scenario.cameras,
        store,
        config,
        smoother=smoother,
        mask=mask,
        window=window,
    )
    return scenario.seed, frames


def write_tracks(out, scenario, frames, mask):
    """Write the tracks of one sequence in KITTI and raw format.

    :param str out: output directory
    :param Scenario scenario: scenario
    :param list frames: per-frame tracked objects
    :param ModalityMask mask: enabled sensors

    :returns: nuScenes results of the sequence
    :rtype: dict
    """
    cam = scenario.cameras[0]
    rows = [
        src.formats.object_to_kitti(obj, t, cam)
        for t, objs in enumerate(frames)
        for obj in objs
    ]
    (Path(out) / "kitti").mkdir(parents=True, exist_ok=True)
    src.formats.write_kitti(Path(out) / "kitti" / f"{scenario.seed:010d}.txt", rows)
    src.formats.write_archive(
        Path(out) / "raw" / f"{scenario.seed:010d}",
        {"tracks": _tracks_array(frames)},
        {"seed": scenario.seed, "frames": scenario.frames, "lidar": mask.lidar},
    )
    return src.formats.sequence_to_nusc(frames, scenario.seed, scenario.dt)


def read_raw_tracks(path):
    """Read raw tracks of one sequence.

    :param str path: archive directory

    :returns: per-frame tracked objects
    :rtype: list
    """
    meta, arrays = src.formats.read_archive(path)
    frames = [[] for _ in range(meta["frames"])]
    for row in arrays["tracks"]:
        box = Box3D(*row[2:9], float(row[9]), int(row[10]))
        frames[int(row[0])].append(
            TrackedObject(box, int(row[10]), float(row[11]), int(row[1]))
        )
    return frames


def _offenders(expected, actual):
    missing = sorted(set(expected) - set(actual))
    extra = sorted(set(actual) - set(expected))
    return [f"missing {key}" for key in missing] + [
        f"unexpected {key}" for key in extra
    ]


def read_predictions(results, sequences):
    """Read tracking results for a set of sequences.

    A JSON file is read as nuScenes results, a directory as one KITTI file
    per sequence.

    :param str results: results path
    :param list sequences: sequences with ground truth

    :raises InputError: when results and ground truth disagree on frames

    :returns: per-sequence per-frame tracked objects
    :rtype: list
    """
    path = Path(results)
    if not path.exists():
        raise InputError(f"{path} does not exist")
    if path.is_dir():
        return _read_kitti_predictions(path, sequences)
    records, _ = src.formats.read_nusc_results(path)
    expected = [
        src.formats.sample_token(sequence.scenario.seed, t)
        for sequence in sequences
        for t in range(sequence.scenario.frames)
    ]
    offenders = _offenders(expected, records)
    if offenders:
        raise InputError(f"sample tokens differ: {', '.join(offenders[:10])}")
    predictions = []
    for sequence in sequences:
        seed = sequence.scenario.seed
        predictions.append(
            [
                list(map(src.formats.nusc_to_object, records[token]))
                for token in (
                    src.formats.sample_token(seed, t)
                    for t in range(sequence.scenario.frames)
                )
            ]
        )
    return predictions


def _read_kitti_predictions(directory, sequences):
    expected = [f"{sequence.scenario.seed:010d}.txt" for sequence in sequences]
    actual = [path.name for path in directory.glob("*.txt")]
    offenders = _offenders(expected, actual)
    predictions = []
    for sequence in sequences:
        if offenders:
            break
        scenario = sequence.scenario
        frames = [[] for _ in range(scenario.frames)]
        for row in src.formats.read_kitti(directory / f"{scenario.seed:010d}.txt"):
            if not 0 <= row.frame < scenario.frames:
                offenders.append(f"frame {row.frame} of {scenario.seed:010d}")
                continue
            obj = src.formats.kitti_to_object(row, scenario.cameras[0])
            frames[row.frame].append(obj)
        predictions.append(frames)
    if offenders:
        raise InputError(f"result files differ: {', '.join(offenders[:10])}")
    return predictions


class CommandLine:
    """Command-line interface.

    :cvar dict ARGS: ArgumentParser arguments
    :ivar dict subcommands: subcommands
    """

    ARGS = {
        "--data": {"required": True, "help": "dataset directory (bevtrack gen)"},
        "--out": {"default": "", "help": "output directory (configured if empty)"},
        "--checkpoint": {"required": True, "help": "tracker checkpoint directory"},
        "--smoother": {"default": "", "help": "smoother checkpoint directory"},
        "--split": {"default": "val", "choices": SPLITS},
        "--mask-lidar": {"action": "store_true", "help": "disable LiDAR features"},
        "--mask-camera": {
            "action": "append",
            "default": [],
            "choices": CAMERA_NAMES,
            "help": "disable this camera's features",
        },
        "--smoother-mode": {"choices": ("online", "offline")},
    }

    def __init__(self):
        """Initialize command-line interface."""
        self.subcommands = {
            "gen": {
                "description": "generate synthetic scenario archives",
                "func": self.gen,
                "args": {"--out": self.ARGS["--out"]},
            },
            "train-smoother": {
                "description": "train the detection smoother",
                "func": self.train_smoother,
                "args": {"--data": self.ARGS["--data"], "--out": self.ARGS["--out"]},
            },
            "train-tracker": {
                "description": "train encoders, fusion and tracker",
                "func": self.train_tracker,
                "args": {
                    "--data": self.ARGS["--data"],
                    "--out": self.ARGS["--out"],
                    "--smoother": self.ARGS["--smoother"],
                },
            },
            "track": {
                "description": "track a split and export results",
                "func": self.track,
                "args": {
                    "--data": self.ARGS["--data"],
                    "--checkpoint": self.ARGS["--checkpoint"],
                    "--smoother": self.ARGS["--smoother"],
                    "--out": self.ARGS["--out"],
                    "--split": self.ARGS["--split"],
                    "--mask-lidar": self.ARGS["--mask-lidar"],
                    "--mask-camera": self.ARGS["--mask-camera"],
                    "--window": {"type": int, "help": "smoother window length"},
                    "--smoother-mode": self.ARGS["--smoother-mode"],
                },
            },
            "eval": {
                "description": "evaluate tracking results",
                "func": self.eval,
                "args": {
                    "--results": {
                        "required": True,
                        "help": "nuScenes JSON file or directory of KITTI files",
                    },
                    "--data": self.ARGS["--data"],
                    "--out": self.ARGS["--out"],
                    "--split": self.ARGS["--split"],
                    "--mode": {"choices": ("nusc", "kitti")},
                },
            },
            "sweep": {
                "description": "track and evaluate over several smoother windows",
                "func": self.sweep,
                "args": {
                    "--data": self.ARGS["--data"],
                    "--checkpoint": self.ARGS["--checkpoint"],
                    "--smoother": self.ARGS["--smoother"],
                    "--out": self.ARGS["--out"],
                    "--split": self.ARGS["--split"],
                    "--window": {
                        "type": int,
                        "action": "append",
                        "required": True,
                        "dest": "windows",
                        "help": "smoother window length (repeatable)",
                    },
                    "--mask-lidar": self.ARGS["--mask-lidar"],
                    "--mask-camera": self.ARGS["--mask-camera"],
                },
            },
        }
        self._init_parser()

    def _init_parser(self):
        """Initialize parser."""
        self._parser = argparse.ArgumentParser(
            prog="bevtrack", description="Camera-LiDAR query-based 3D tracking."
        )
        self._parser.add_argument(
            "-c", "--config", default="", help="configuration file"
        )
        self._parser.add_argument(
            "--set",
            action="append",
            default=[],
            dest="overrides",
            metavar="KEY=VALUE",
            help="override a configuration key, e.g. tracker.delta=0.4",
        )
        self._parser.add_argument("--jobs", type=int, help="worker processes")
        self._parser.add_argument(
            "--version", action="version", version=f"%(prog)s {__version__}"
        )
        self._init_subparsers(self._parser)

    def _init_subparsers(self, parser):
        """Initialize subparsers.

        :param ArgumentParser parser: command-line parser
        """
        subparsers = parser.add_subparsers(dest="command", required=True)
        for prog, subcommand in self.subcommands.items():
            subparser = subparsers.add_parser(
                prog, description=subcommand["description"]
            )
            subparser.set_defaults(func=subcommand["func"])
            for arg, kwargs in subcommand["args"].items():
                subparser.add_argument(arg, **kwargs)

    def parse(self, argv):
        """Parse arguments.

        :param list argv: arguments

        :returns: arguments
        :rtype: Namespace
        """
        return self._parser.parse_args(argv)

    def run(self, argv):
        """Run a subcommand.

        :param list argv: arguments

        :raises BadConfig: when the configuration contains errors

        :returns: pretty-printed output lines
        :rtype: tuple
        """
        args = self.parse(argv)
        overrides = list(args.overrides)
        if args.jobs is not None:
            overrides.append(f"jobs={args.jobs}")
        config = src.config.load_config(path=args.config, overrides=overrides)
        kwargs = {
            k: v
            for k, v in vars(args).items()
            if k not in ("func", "command", "config", "overrides", "jobs")
        }
        if not kwargs.get("out"):
            kwargs["out"] = str(Path(config["output_dir"]) / args.command)
        return args.func(config, **kwargs)

    def gen(self, config, out=""):
        """Generate and save the scenarios of both splits.

        :param dict config: run configuration
        :param str out: dataset directory

        :returns: info lines
        :rtype: tuple
        """
        seeds = {split: src.scenesim.scenario_seeds(config, split) for split in SPLITS}
        manifest = make_manifest(
            "gen",
            config,
            outputs={"data": out},
            seeds=[seed for split in SPLITS for seed in seeds[split]],
        )
        manifest.write(out)
        src.config.echo_config(config, out)
        for split in SPLITS:
            (Path(out) / split).mkdir(parents=True, exist_ok=True)
            tasks = [
                (seed, config, scenario_path(out, split, seed)) for seed in seeds[split]
            ]
            with timed(manifest.timings, f"gen {split}"):
                _map(_gen_one, tasks, config["jobs"])
        manifest.complete(out)
        return tuple(
            src.output_formatter.pprint_info(f"{split}: {len(seeds[split])} scenarios")
            for split in SPLITS
        )

    def _datasets(self, data):
        return load_sequences(data, "train"), load_sequences(data, "val")

    def train_smoother(self, config, data="", out=""):
        """Train the smoother and report on the validation split.

        :param dict config: run configuration
        :param str data: dataset directory
        :param str out: output directory

        :returns: report lines
        :rtype: tuple
        """
        manifest = make_manifest(
            "train-smoother",
            config,
            inputs={"data": data},
            outputs={"checkpoint": Path(out) / "smoother"},
        )
        manifest.write(out)
        src.config.echo_config(config, out)
        with timed(manifest.timings, "load"):
            train, val = self._datasets(data)
        log = src.trainer.TrainingLog(Path(out) / "smoother.jsonl")
        with timed(manifest.timings, "train"):
            store = src.trainer.train_smoother(train, val, config, log=log)
        src.formats.save_params(
            store, Path(out) / "smoother", meta=_model_meta(config, "smoother")
        )
        with timed(manifest.timings, "validate"):
            report = src.trainer.validate_smoother(val or train, store, config)
        report.write_json(Path(out) / "report.json")
        manifest.complete(out)
        return src.output_formatter.pprint_report(report)

    def train_tracker(self, config, data="", out="", smoother=""):
        """Train the tracker and report on the validation split.

        :param dict config: run configuration
        :param str data: dataset directory
        :param str out: output directory
        :param str smoother: smoother checkpoint (raw detections if empty)

        :returns: report lines
        :rtype: tuple
        """
        manifest = make_manifest(
            "train-tracker",
            config,
            inputs={"data": data, "smoother": smoother},
            outputs={"checkpoint": Path(out) / "tracker"},
        )
        manifest.write(out)
        src.config.echo_config(config, out)
        with timed(manifest.timings, "load"):
            train, val = self._datasets(data)
            smoother = (
                load_checkpoint(smoother, config, "smoother") if smoother else None
            )
        log = src.trainer.TrainingLog(Path(out) / "tracker.jsonl")
        with timed(manifest.timings, "train"):
            store = src.trainer.train_tracker(
                train, val, config, smoother=smoother, log=log
            )
        src.formats.save_params(
            store, Path(out) / "tracker", meta=_model_meta(config, "tracker")
        )
        with timed(manifest.timings, "validate"):
            report = src.trainer.validate_tracker(
                val or train,
                store,
                config,
                smoother=smoother,
                mask=src.encfuse.ModalityMask.from_config(config),
            )
        report.write_json(Path(out) / "report.json")
        manifest.complete(out)
        return src.output_formatter.pprint_report(report)

    def _track_config(self, config, mask_lidar, mask_camera, window, smoother_mode):
        cameras = [
            name for name in config["mask"]["cameras"] if name not in mask_camera
        ]
        overrides = [f"mask.cameras={json.dumps(cameras)}"]
        if mask_lidar:
            overrides.append("mask.lidar=false")
        if window is not None:
            overrides.append(f"smoother.window={window}")
        if smoother_mode:
            overrides.append(f"smoother.mode={smoother_mode}")
        config = src.config.override_config(config, overrides)
        src.encfuse.ModalityMask.from_config(config)
        return config

    def track(
        self,
        config,
        data="",
        checkpoint="",
        smoother="",
        out="",
        split="val",
        mask_lidar=False,
        mask_camera=(),
        window=None,
        smoother_mode=None,
    ):
        """Track every sequence of a split and export the results.

        :param dict config: run configuration
        :param str data: dataset directory
        :param str checkpoint: tracker checkpoint
        :param str smoother: smoother checkpoint (raw detections if empty)
        :param str out: output directory
        :param str split: train or val
        :param bool mask_lidar: toggle LiDAR masking on/off
        :param list mask_camera: cameras to mask
        :param int window: smoother window length (configured if None)
        :param str smoother_mode: online or offline (configured if None)

        :raises MaskError: when every sensor is masked

        :returns: info lines
        :rtype: tuple
        """
        config = self._track_config(
            config, mask_lidar, mask_camera, window, smoother_mode
        )
        directory = Path(data) / split
        if not directory.is_dir():
            raise InputError(f"{directory} does not exist")
        paths = sorted(path for path in directory.iterdir() if path.is_dir())
        manifest = make_manifest(
            "track",
            config,
            inputs={"data": directory, "checkpoint": checkpoint, "smoother": smoother},
            outputs={"results": Path(out) / "results_nusc.json"},
            seeds=[int(path.name) for path in paths],
        )
        manifest.write(out)
        src.config.echo_config(config, out)
        tasks = [(path, checkpoint, smoother, config, window) for path in paths]
        with timed(manifest.timings, "track"):
            tracked = dict(_map(_track_one, tasks, config["jobs"]))
        mask = src.encfuse.ModalityMask.from_config(config)
        results = {}
        for path in paths:
            scenario, _ = src.formats.load_scenario(path)
            results.update(write_tracks(out, scenario, tracked[scenario.seed], mask))
        src.formats.write_nusc_results(
            Path(out) / "results_nusc.json",
            results,
            meta=src.formats.default_meta(mask.lidar, mask.any_camera),
        )
        manifest.complete(out)
        return (src.output_formatter.pprint_info(f"tracked {len(paths)} sequences"),)

    def _evaluate(self, config, results, data, split, mode):
        sequences = load_sequences(data, split)
        predictions = read_predictions(results, sequences)
        truths = [
            [bundle.ground_truth for bundle in sequence.bundles]
            for sequence in sequences
        ]
        cfg = src.metrics.EvalConfig.from_config(config, mode=mode)
        return src.metrics.evaluate(predictions, truths, cfg)

    def eval(self, config, results="", data="", out="", split="val", mode=None):
        """Evaluate tracking results against the ground truth of a split.

        :param dict config: run configuration
        :param str results: nuScenes JSON file or directory of KITTI files
        :param str data: dataset directory
        :param str out: output directory
        :param str split: train or val
        :param str mode: nusc or kitti (configured if None)

        :raises InputError: when results and ground truth disagree

        :returns: report lines
        :rtype: tuple
        """
        manifest = make_manifest(
            "eval",
            config,
            inputs={"results": results, "data": Path(data) / split},
            outputs={"report": Path(out) / "report.json"},
        )
        manifest.write(out)
        with timed(manifest.timings, "evaluate"):
            report = self._evaluate(config, results, data, split, mode)
        report.write_json(Path(out) / "report.json")
        manifest.complete(out)
        return src.output_formatter.pprint_report(report)

    def sweep(
        self,
        config,
        data="",
        checkpoint="",
        smoother="",
        out="",
        split="val",
        windows=(),
        mask_lidar=False,
        mask_camera=(),
    ):
        """Track and evaluate once per smoother window length.

        :param dict config: run configuration
        :param str data: dataset directory
        :param str checkpoint: tracker checkpoint
        :param str smoother: smoother checkpoint
        :param str out: output directory
        :param str split: train or val
        :param list windows: window lengths
        :param bool mask_lidar: toggle LiDAR masking on/off
        :param list mask_camera: cameras to mask

        :returns: summary table lines
        :rtype: tuple
        """
        manifest = make_manifest(
            "sweep",
            config,
            inputs={"data": data, "checkpoint": checkpoint, "smoother": smoother},
            outputs={"summary": Path(out) / "summary.json"},
        )
        manifest.write(out)
        reports = {}
        for window in windows:
            run = Path(out) / f"window{window}"
            with timed(manifest.timings, f"window {window}"):
                self.track(
                    config,
                    data=data,
                    checkpoint=checkpoint,
                    smoother=smoother,
                    out=str(run),
                    split=split,
                    mask_lidar=mask_lidar,
                    mask_camera=mask_camera,
                    window=window,
                )
                report = self._evaluate(
                    config, run / "results_nusc.json", data, split, None
                )
            report.write_json(run / "report.json")
            reports[f"W={window}"] = report
        with open(Path(out) / "summary.json", "w") as fp:
            json.dump(
                {label: report.overall for label, report in reports.items()},
                fp,
                indent=4,
            )
        manifest.complete(out)
        return src.output_formatter.pprint_summary(reports)

#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Console script for PyBLGCN"""

###############################################################################

import sys
import logging
import argparse

from .config import load_config, config_help
from .errors import (
    BLGCNError, ConfigError, DataFormatError, NumericalError
)
from .hsi_io import save_cube, save_labels, synth_dataset
from .datasets import SCENES, get_scene, download_scene, convert_mat
from .pipeline import (
    Pipeline, run_trials, STATUS_RUNNING, STATUS_COMPLETE
)
from .shell import BLGCNShell
from .constants import (
    DEFAULT_HISTORY_PATH,
    DEFAULT_STARTUP_SCRIPT,
    CUBE_FILE, LABELS_FILE, REPORT_FILE,
    EXIT_OK, EXIT_FAILURE, EXIT_CONFIG_ERROR, EXIT_DATA_ERROR,
    EXIT_NUMERIC_ERROR,
)
from . import __version__

###############################################################################

ROOT_LOGGER = logging.getLogger()
if not ROOT_LOGGER.hasHandlers():
    ROOT_LOGGER.addHandler(logging.StreamHandler())
ROOT_LOGGER.setLevel(logging.INFO)

LOGGER = logging.getLogger(__name__)

COMMANDS = [
    "preprocess", "augment", "train", "evaluate", "pipeline", "trials",
    "synth", "download",
]

###############################################################################


def exit_code(error: Exception) -> int:
    """Exit code of a failed command"""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    if isinstance(error, (DataFormatError, FileNotFoundError)):
        return EXIT_DATA_ERROR
    if isinstance(error, NumericalError):
        return EXIT_NUMERIC_ERROR
    return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    description = (
        "Superpixel graph classification of hyperspectral images with "
        "Bayesian graph convolutions"
    )
    parser = argparse.ArgumentParser(
        description=description,
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=COMMANDS,
        help="stage or harness to run"
    )
    parser.add_argument(
        "scene",
        nargs="?",
        help=f"scene to download, one of {sorted(SCENES)}"
    )
    parser.add_argument(
        "-i",
        "--interactive",
        action="store_true",
        help="start in an interactive REPL mode"
    )
    parser.add_argument(
        "-c",
        "--config",
        help="path to a key=value configuration file"
    )
    parser.add_argument(
        "-s",
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a setting (repeatable)"
    )
    parser.add_argument(
        "-o",
        "--out",
        help="output directory (same as --set output_dir=...)"
    )
    parser.add_argument(
        "-t",
        "--trials",
        type=int,
        help="number of independent trials (same as --set trials=...)"
    )
    parser.add_argument(
        "-d",
        "--data-dir",
        help="download directory of the `download` command"
    )
    parser.add_argument(
        "-hf",
        "--history-file",
        default=DEFAULT_HISTORY_PATH,
        help="path to the history file"
    )
    parser.add_argument(
        "-sc",
        "--startup-script",
        default=DEFAULT_STARTUP_SCRIPT,
        help="path to the startup script"
    )
    parser.add_argument(
        "-dbg",
        "--debug",
        action="store_true",
        help="turn debug mode on"
    )
    parser.add_argument(
        "-v",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
        help="show version and exit"
    )
    return parser


def run_command(command: str, config, scene: str = None,
                data_dir: str = None) -> int:
    """Run one subcommand; library errors propagate to the caller"""
    pipeline = Pipeline(config)

    if command == "preprocess":
        pipeline.write_manifest(STATUS_RUNNING, stage=command)
        path = pipeline.preprocess()
        pipeline.write_manifest(STATUS_COMPLETE, stage=command)
        print(f"Graph written to '{path}'.")
    elif command == "augment":
        pipeline.augment()
        print(f"Generated nodes per class: {pipeline.augmented}")
    elif command == "train":
        pipeline.train()
        history = pipeline.history
        print(
            f"Training stopped at epoch {history.stop_epoch} "
            f"({history.stop_reason})."
        )
    elif command == "evaluate":
        pipeline.evaluate()
        print(pipeline.path(REPORT_FILE).read_text(), end="")
    elif command == "pipeline":
        if config.trials > 1:
            print(run_trials(config), end="")
        else:
            pipeline.run()
            print(pipeline.path(REPORT_FILE).read_text(), end="")
    elif command == "trials":
        print(run_trials(config), end="")
    elif command == "synth":
        cube = synth_dataset(config.synth())
        pipeline.output_dir.mkdir(parents=True, exist_ok=True)
        save_cube(cube, pipeline.path(CUBE_FILE))
        save_labels(cube, pipeline.path(LABELS_FILE))
        print(f"Synthetic {cube} written to '{pipeline.output_dir}'.")
    elif command == "download":
        if not scene:
            raise ConfigError("The download command needs a scene name.")
        scene = get_scene(scene)
        cube_mat, labels_mat = download_scene(scene.name, data_dir)
        convert_mat(
            cube_mat, labels_mat, pipeline.output_dir,
            cube_key=scene.cube_key, labels_key=scene.labels_key
        )
        print(f"Scene '{scene.name}' converted to '{pipeline.output_dir}'.")
    return EXIT_OK

###############################################################################


def main(argv=None):
    """Command Line Interface for PyBLGCN"""
    parser = build_parser()
    args = vars(parser.parse_args(argv))

    # arguments
    command = args.get("command")
    overrides = list(args.get("set"))
    if args.get("out"):
        overrides.append(f"output_dir={args.get('out')}")
    if args.get("trials") is not None:
        overrides.append(f"trials={args.get('trials')}")

    history_file = args.get("history_file")
    startup_script = args.get("startup_script")

    flag_debug = args.get("debug")
    flag_interactive = args.get("interactive")

    # debug
    if flag_debug:
        ROOT_LOGGER.setLevel(logging.DEBUG)

    try:
        config = load_config(args.get("config"), overrides)
        if flag_interactive:
            blgcn_shell = BLGCNShell(
                config=config,
                history_file=str(history_file),
                startup_script=str(startup_script)
            )
            return blgcn_shell.cmdloop()

        if command is None:
            print("Must specify a command in non-interactive mode.")
            parser.print_help()
            return EXIT_FAILURE

        return run_command(
            command, config,
            scene=args.get("scene"),
            data_dir=args.get("data_dir")
        )
    except (BLGCNError, FileNotFoundError) as error:
        LOGGER.error(f"{type(error).__name__}: {error}")
        return exit_code(error)

###############################################################################


if __name__ == "__main__":
    sys.exit(main())  # pragma: no cover

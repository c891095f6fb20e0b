#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""REPL Shell for PyBLGCN"""

###############################################################################

import logging
from pathlib import Path
from dataclasses import replace
from functools import wraps

import cmd2

from .config import RunConfig, load_config
from .errors import BLGCNError
from .hsi_io import save_cube, save_labels
from .pipeline import Pipeline
from .metrics import format_report
from .constants import CUBE_FILE, LABELS_FILE
from . import __version__

###############################################################################
# Logging

LOGGER = logging.getLogger()  # root logger
if not LOGGER.hasHandlers():
    LOGGER.addHandler(logging.StreamHandler())
LOGGER.setLevel(logging.INFO)

###############################################################################


class BasicShell(cmd2.Cmd):
    delattr(cmd2.Cmd, "do_edit")
    delattr(cmd2.Cmd, "do_run_pyscript")


def _reports_errors(method):
    """Turn library errors of a command into an error message"""
    @wraps(method)
    def wrapper(self, *args, **kwargs):
        try:
            return method(self, *args, **kwargs)
        except (BLGCNError, FileNotFoundError) as error:
            self.perror(f"{type(error).__name__}: {error}")
    return wrapper

###############################################################################


class BLGCNShell(BasicShell):
    """REPL Interface to the BLGCN pipeline"""

    intro = "Bayesian Superpixel Graph Classification (BLGCN)\n" \
            "------------------------------------------------"
    desc = "Load a cube with `load CUBE LABELS` or generate one with " \
           "`synth`, then run `segment`, `augment`, `train` and " \
           "`evaluate`.\n(help or ? for list of options)"
    prompt = "(BLGCN) "

    def __init__(
        self,
        config: RunConfig = None,
        history_file: str = None,
        startup_script: str = None
    ):
        """REPL Interface to the BLGCN pipeline

        Parameters
        ----------
        config : RunConfig, optional
            Initial run configuration. Settables of the shell override the
            matching keys.
            If None, `load_config()` defaults are used.
            The default is None.
        history_file : str or None, optional
            Path to the history file to keep a persistant history.
            If None, the history does not persist across sessions.
            The default is None.
        startup_script : str or None, optional
            Path to the startup script with a list of startup commands
            to be executed after initialization.
            If None, no startup commands are run.
            The default is None.
        """
        super().__init__(
            persistent_history_file=history_file,
            startup_script=startup_script,
            allow_cli_args=False,
        )
        self.default_category = "Utility"
        remove_settables = [
            "allow_style",
            "always_show_hint",
            "echo",
            "editor",
            "feedback_to_output",
            "max_completion_items",
        ]
        for settable in remove_settables:
            self.remove_settable(settable)

        # ------------------------------------------------------------------- #
        # Settings

        config = config or load_config()
        self.seed = config.seed
        self.n_segments = config.n_segments
        self.max_epochs = config.max_epochs
        self.t1 = config.t1
        self.t2 = config.t2
        self.loglevel = logging.getLevelName(LOGGER.level)

        self.add_settable(
            cmd2.utils.Settable("seed", int, "Root seed of the run", self)
        )
        self.add_settable(
            cmd2.utils.Settable(
                "n_segments",
                int,
                "Target superpixel count",
                self
            )
        )
        self.add_settable(
            cmd2.utils.Settable(
                "max_epochs",
                int,
                "Epoch budget",
                self
            )
        )
        self.add_settable(
            cmd2.utils.Settable("t1", float, "Validation accuracy gate", self)
        )
        self.add_settable(
            cmd2.utils.Settable("t2", float, "Confidence bound gate", self)
        )
        self.add_settable(
            cmd2.utils.Settable(
                "loglevel",
                str.upper,
                "Set Logger Level",
                self,
                choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                onchange_cb=self._set_loglevel,
            )
        )

        # ------------------------------------------------------------------- #

        self.pipeline = Pipeline(config)

    # ----------------------------------------------------------------------- #

    def _set_loglevel(self, param_name, old_value, new_value):
        LOGGER.setLevel(getattr(logging, new_value))

    def _sync_config(self, **changes) -> RunConfig:
        """Push the settables (and `changes`) into the pipeline config"""
        config = replace(
            self.pipeline.config,
            seed=self.seed,
            n_segments=self.n_segments,
            max_epochs=self.max_epochs,
            t1=self.t1,
            t2=self.t2,
            **changes
        ).validate()
        self.pipeline.config = config
        return config

    # ----------------------------------------------------------------------- #
    # Data

    load_parser = cmd2.Cmd2ArgumentParser()
    load_parser.add_argument("cube", help="BLG1 cube file")
    load_parser.add_argument("labels", help="BLGL label file")

    @cmd2.with_category("Core")
    @cmd2.with_argparser(load_parser)
    @_reports_errors
    def do_load(self, namespace: cmd2.argparse.Namespace):
        """Load a hyperspectral cube and its ground truth"""
        self._sync_config(cube=namespace.cube, labels=namespace.labels)
        cube = self.pipeline.load()
        self.poutput(f"Loaded {cube}")

    synth_parser = cmd2.Cmd2ArgumentParser()
    synth_parser.add_argument(
        "--classes", type=int, help="number of classes"
    )
    synth_parser.add_argument(
        "--save", help="directory to write the cube and label files to"
    )

    @cmd2.with_category("Core")
    @cmd2.with_argparser(synth_parser)
    @_reports_errors
    def do_synth(self, namespace: cmd2.argparse.Namespace):
        """Generate the synthetic cube of separable class squares"""
        changes = {"cube": "", "labels": ""}
        if namespace.classes is not None:
            changes["synth_classes"] = namespace.classes
        self._sync_config(**changes)
        cube = self.pipeline.load()
        self.poutput(f"Generated {cube}")
        if namespace.save:
            Path(namespace.save).mkdir(parents=True, exist_ok=True)
            cube_path = save_cube(cube, f"{namespace.save}/{CUBE_FILE}")
            save_labels(cube, f"{namespace.save}/{LABELS_FILE}")
            self.poutput(f"Saved to '{cube_path.parent}'")

    # ----------------------------------------------------------------------- #
    # Stages

    @cmd2.with_category("Core")
    @_reports_errors
    def do_segment(self, _: cmd2.Statement):
        """Segment the cube, build the superpixel graph and split it"""
        self._sync_config()
        path = self.pipeline.preprocess()
        self.poutput(f"{self.pipeline.graph}, {self.pipeline.split}")
        self.poutput(f"Graph written to '{path}'")

    @cmd2.with_category("Core")
    @_reports_errors
    def do_augment(self, _: cmd2.Statement):
        """Augment minority classes with GAN-generated nodes"""
        self._sync_config()
        graph = self.pipeline.augment()
        if self.pipeline.augmented:
            self.poutput(f"Generated nodes: {self.pipeline.augmented}")
        self.poutput(f"{graph}")

    @cmd2.with_category("Core")
    @_reports_errors
    def do_train(self, _: cmd2.Statement):
        """Train a model with the dynamic control strategy"""
        self._sync_config()
        self.pipeline.train()
        history = self.pipeline.history
        self.poutput(
            f"Stopped at epoch {history.stop_epoch} ({history.stop_reason})"
        )

    @cmd2.with_category("Core")
    @_reports_errors
    def do_evaluate(self, _: cmd2.Statement):
        """Evaluate the trained model and write the report and map"""
        self._sync_config()
        report = self.pipeline.evaluate()
        self.poutput(format_report(report))

    @cmd2.with_category("Core")
    def do_report(self, _: cmd2.Statement):
        """Show the report of the last evaluation"""
        if self.pipeline.report is None:
            self.perror("Please evaluate a model first.")
        else:
            self.poutput(format_report(self.pipeline.report))

    @cmd2.with_category("Core")
    def do_info(self, _: cmd2.Statement):
        """Display the artefacts of the current session"""
        pipeline = self.pipeline
        self.poutput(f"Output directory: {pipeline.output_dir}")
        for name, value in [
            ("Cube", pipeline.cube),
            ("Segmentation", pipeline.segmentation),
            ("Graph", pipeline.graph),
            ("Split", pipeline.split),
            ("Model", pipeline.model),
        ]:
            self.poutput(f"{name}: {value if value is not None else '-'}")

    # ----------------------------------------------------------------------- #

    def cmdloop(self, intro: cmd2.Statement = None):
        self.poutput(self.intro)
        self.poutput(self.desc)

        while True:
            try:
                super(self.__class__, self).cmdloop(intro="")
                break
            except KeyboardInterrupt:
                self.poutput("\nKeyboardInterrupt")

    # ----------------------------------------------------------------------- #

    def do_version(self, _: cmd2.Statement):
        """Show the current version of PyBLGCN"""
        self.poutput(f"PyBLGCN v{__version__}")

###############################################################################

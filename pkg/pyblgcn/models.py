#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Models for the Trial Ledger
"""

###############################################################################

import json
import logging
from pathlib import Path
from typing import List

import numpy as np
from peewee import (
    DatabaseProxy, Model, AutoField, IntegerField, FloatField, CharField,
    TextField
)
from playhouse.db_url import connect

from .metrics import ClassificationReport

###############################################################################

LOGGER = logging.getLogger(__name__)

STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"

###############################################################################


class TrialRecord(Model):
    """One trial of a batch: its seed, metrics and stopping behaviour"""
    id = AutoField()
    batch = CharField(index=True)
    seed = IntegerField()
    status = CharField(default=STATUS_COMPLETE)
    oa = FloatField(null=True)
    aa = FloatField(null=True)
    kappa = FloatField(null=True)
    epochs = IntegerField(null=True)
    stop_reason = CharField(null=True)
    per_class = TextField(default="[]")
    confusion = TextField(default="[]")
    error = TextField(null=True)

    def __str__(self) -> str:
        if self.status != STATUS_COMPLETE:
            return f"{self.batch}#{self.seed}: {self.status} ({self.error})"
        return (
            f"{self.batch}#{self.seed}: OA={self.oa:.4f}, AA={self.aa:.4f}, "
            f"Kappa={self.kappa:.4f}, {self.epochs} epochs "
            f"({self.stop_reason})"
        )

    def to_report(self) -> ClassificationReport:
        return ClassificationReport(
            confusion=np.array(json.loads(self.confusion)),
            per_class=np.array(
                [np.nan if v is None else v
                 for v in json.loads(self.per_class)],
                dtype=np.float64
            ),
            oa=self.oa,
            aa=self.aa,
            kappa=self.kappa,
        )

    class Meta:
        database = DatabaseProxy()

###############################################################################


def open_ledger(path: str or Path):
    """Bind `TrialRecord` to an SQLite file, creating the table if needed"""
    path = Path(path)
    database = connect(f"sqlite:///{path}")
    TrialRecord.bind(database)
    database.create_tables([TrialRecord], safe=True)
    LOGGER.debug(f"Trial ledger '{path}' opened.")
    return database


def record_trial(
    batch: str,
    seed: int,
    report: ClassificationReport = None,
    epochs: int = None,
    stop_reason: str = None,
    error: str = None
) -> TrialRecord:
    """Append a completed (with `report`) or failed (with `error`) trial"""
    if report is None:
        return TrialRecord.create(
            batch=batch, seed=seed, status=STATUS_FAILED, error=error
        )
    per_class = [
        None if not np.isfinite(value) else float(value)
        for value in report.per_class
    ]
    return TrialRecord.create(
        batch=batch,
        seed=seed,
        oa=report.oa,
        aa=report.aa,
        kappa=report.kappa,
        epochs=epochs,
        stop_reason=stop_reason,
        per_class=json.dumps(per_class),
        confusion=json.dumps(np.asarray(report.confusion).tolist()),
    )


def batch_records(
    batch: str,
    completed_only: bool = True
) -> List[TrialRecord]:
    query = TrialRecord.select().where(TrialRecord.batch == batch)
    if completed_only:
        query = query.where(TrialRecord.status == STATUS_COMPLETE)
    return list(query.order_by(TrialRecord.seed))

###############################################################################

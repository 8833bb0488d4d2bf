"""Evaluation metrics over an epoch-record stream.

All functions are pure; they look only at the record list handed in.
``fasd`` uses the population standard deviation over the last
ceil(10% of epochs) accuracy values.
"""

from __future__ import annotations

import math

import numpy as np

from .harness import EpochRecord


class EmptyRun(ValueError):
    """Metrics requested on an empty record stream."""


class TooFewEpochs(ValueError):
    """The tail-stability metric needs at least 10 epochs."""


def final_metrics(records: list[EpochRecord]) -> tuple[float, float]:
    """(final validation loss, final validation accuracy) of the last epoch."""
    if not records:
        raise EmptyRun("no records")
    last = records[-1]
    return last.val_loss, last.val_accuracy


def fasd(records: list[EpochRecord]) -> float:
    """Population std of validation accuracy over the last 10% of epochs."""
    if len(records) < 10:
        raise TooFewEpochs(f"need >= 10 records, got {len(records)}")
    tail = math.ceil(0.10 * len(records))
    accs = np.array([r.val_accuracy for r in records[-tail:]])
    return float(accs.std(ddof=0))


def first_epoch_to(records: list[EpochRecord], threshold_accuracy: float) -> int | None:
    """Earliest global epoch reaching the accuracy threshold, or None."""
    for r in records:
        if r.val_accuracy >= threshold_accuracy:
            return r.global_epoch
    return None


def first_round(records: list[EpochRecord]) -> tuple[int, float, float]:
    """(end epoch, val loss, val accuracy) at the last epoch of round 1."""
    if not records:
        raise EmptyRun("no records")
    round_one = [r for r in records if r.round == 1]
    if not round_one:
        raise EmptyRun("no round-1 records")
    last = round_one[-1]
    return last.global_epoch, last.val_loss, last.val_accuracy

"""Batch-switch governor driven by the trend of recent losses.

Keeps a rolling window of the latest normalized epoch losses of the
current data batch, fits an ordinary-least-squares line through them and
decides once per epoch whether training this batch is still productive.
A healthy batch shows a clearly negative slope; once the trend flattens
(slope above a nonpositive threshold ``alpha_thld``) or the per-batch
epoch budget runs out, the governor calls for the next batch.

No decision is made before the window holds ``m + 1`` points; the fit is
undefined on shorter histories and must not trigger switches.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import isinf
from typing import Sequence

import numpy as np


class DegenerateWindow(ValueError):
    """Slope fit requested on fewer than two points or constant x values."""


class BatchDecision(Enum):
    REMAIN_ON_BATCH = "remain"
    CALL_NEW_BATCH = "switch"


@dataclass(frozen=True)
class GovernorConfig:
    """Window length ``m``, slope threshold and per-batch epoch budget.

    ``alpha_thld`` must never be positive: an upward loss trend is never
    acceptable. Setting it to ``-inf`` disables the slope event entirely,
    leaving only the budget-forced switch at the last allowed epoch.
    """

    n_max: int
    m: int = 4
    alpha_thld: float = -0.001

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"window length m must be >= 1, got {self.m}")
        if self.alpha_thld > 0:
            raise ValueError(f"alpha_thld must be <= 0, got {self.alpha_thld}")
        if self.n_max <= self.m:
            raise ValueError(
                f"per-batch epoch budget n_max must exceed m, got n_max={self.n_max} m={self.m}"
            )


@dataclass(frozen=True)
class SlopeFit:
    alpha: float
    beta: float


@dataclass(frozen=True)
class GovernorState:
    """Rolling window of (epoch index, normalized loss) pairs, newest last."""

    window: tuple[tuple[int, float], ...] = ()
    epoch_in_batch: int = 0


def fit_slope(xs: Sequence[int], ys: Sequence[float]) -> SlopeFit:
    """Ordinary least squares line through (xs, ys).

    Closed form: alpha = cov(x, y) / var(x), beta = mean(y) - alpha * mean(x),
    minimizing sum((y - alpha*x - beta)^2).
    """
    if len(xs) != len(ys):
        raise DegenerateWindow(f"length mismatch: {len(xs)} xs vs {len(ys)} ys")
    if len(xs) < 2:
        raise DegenerateWindow(f"need at least 2 points, got {len(xs)}")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    x_mean = x.mean()
    y_mean = y.mean()
    var_x = float(((x - x_mean) ** 2).mean())
    if var_x == 0.0:
        raise DegenerateWindow("x values are all equal; slope is undefined")
    cov_xy = float(((x - x_mean) * (y - y_mean)).mean())
    alpha = cov_xy / var_x
    beta = y_mean - alpha * x_mean
    return SlopeFit(alpha=alpha, beta=beta)


def observe(
    state: GovernorState,
    config: GovernorConfig,
    epoch: int,
    normalized_loss: float,
) -> tuple[GovernorState, BatchDecision]:
    """Record one epoch's normalized loss and decide whether to switch batch.

    ``epoch`` is the 0-based epoch index within the current batch. The
    switch fires when the fitted slope over the last ``m + 1`` losses
    exceeds ``alpha_thld``, or unconditionally at the last allowed epoch
    (``n_max - 1``). The window is cleared on a switch so the next batch
    starts fresh.
    """
    window = (state.window + ((epoch, normalized_loss),))[-(config.m + 1):]
    if epoch >= config.n_max - 1:
        decision = BatchDecision.CALL_NEW_BATCH
    elif len(window) < config.m + 1:
        decision = BatchDecision.REMAIN_ON_BATCH
    elif isinf(config.alpha_thld):
        decision = BatchDecision.REMAIN_ON_BATCH
    else:
        fit = fit_slope([p[0] for p in window], [p[1] for p in window])
        if fit.alpha > config.alpha_thld:
            decision = BatchDecision.CALL_NEW_BATCH
        else:
            decision = BatchDecision.REMAIN_ON_BATCH
    if decision is BatchDecision.CALL_NEW_BATCH:
        new_state = GovernorState()
    else:
        new_state = GovernorState(window=window, epoch_in_batch=epoch)
    return new_state, decision

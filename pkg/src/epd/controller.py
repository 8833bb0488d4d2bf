"""E/PD learning-rate controller with an optional event-gated PD phase.

The controller treats training as a feedback loop: the epoch loss is the
measured output and the learning rate is the control input. Each data
batch starts in an Exponential phase that doubles the rate while the
loss strictly decreases. At the first non-decrease the controller
switches (irreversibly, until the next reset) to a
Proportional-Derivative phase computing

    lambda(k+1) = kp * L(k)/L(0) - kd * (L(k) - L(k-1))/L(0)

where L(0) is the loss observed after the first epoch on the batch.

The event-gated variant (``step_eb_epd``) recomputes the PD output only
when the loss increased since the previous epoch; while the loss keeps
falling the rate is held constant instead of being driven down.

All state is an explicit, immutable value; the step functions are pure
and a ``(state, loss)`` pair always maps to the same output, which makes
runs replayable from serialized state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

L0_FLOOR = 1e-12     # keeps L(k)/L(0) finite when the first loss is zero
LAMBDA_MIN = 1e-8    # PD output can go negative on a steep loss drop
LAMBDA_MAX = 10.0


class ControllerPhase(Enum):
    EXPONENTIAL = "E"
    PD = "PD"


@dataclass(frozen=True)
class ControllerGains:
    """Tuning constants: initial rate and the PD gains.

    The gains are free tuning parameters; the defaults are placeholders
    and experiments should set them explicitly.
    """

    lambda0: float
    kp: float = 1.0
    kd: float = 10.0

    def __post_init__(self) -> None:
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.kp > 0:
            raise ValueError(f"kp must be positive, got {self.kp}")
        if self.kd < 0:
            raise ValueError(f"kd must be nonnegative, got {self.kd}")


@dataclass(frozen=True)
class ControllerState:
    """Controller snapshot after observing the loss of epoch ``epoch_in_batch``.

    ``lam`` is the rate computed for the next epoch; ``l0`` is fixed per
    batch at reset and never mutated afterwards.
    """

    phase: ControllerPhase
    lam: float
    l0: float
    l_prev: float
    l_curr: float
    epoch_in_batch: int


def reset(gains: ControllerGains, first_loss: float) -> ControllerState:
    """Start a fresh batch from the loss observed after its first epoch."""
    return ControllerState(
        phase=ControllerPhase.EXPONENTIAL,
        lam=gains.lambda0,
        l0=max(first_loss, L0_FLOOR),
        l_prev=first_loss,
        l_curr=first_loss,
        epoch_in_batch=0,
    )


def event_e1(l_curr: float, l_prev: float) -> int:
    """1 iff the loss strictly increased, else 0."""
    return 1 if l_curr - l_prev > 0 else 0


def _clamp(lam: float) -> float:
    return min(max(lam, LAMBDA_MIN), LAMBDA_MAX)


def _pd_law(gains: ControllerGains, l0: float, loss: float, l_prev: float) -> float:
    return gains.kp * (loss / l0) - gains.kd * ((loss - l_prev) / l0)


def step_epd(
    gains: ControllerGains, state: ControllerState, loss: float
) -> tuple[ControllerState, float]:
    """Advance one epoch and return (new state, rate for the next epoch).

    Exponential phase: double the rate on a strict decrease; on the first
    non-decrease switch to the PD phase and apply the PD law immediately.
    PD phase: always apply the PD law. The result is clamped to
    [LAMBDA_MIN, LAMBDA_MAX].
    """
    l_prev = state.l_curr
    if state.phase is ControllerPhase.EXPONENTIAL and loss < l_prev:
        phase = ControllerPhase.EXPONENTIAL
        next_lam = _clamp(2.0 * state.lam)
    else:
        phase = ControllerPhase.PD
        next_lam = _clamp(_pd_law(gains, state.l0, loss, l_prev))
    new_state = ControllerState(
        phase=phase,
        lam=next_lam,
        l0=state.l0,
        l_prev=l_prev,
        l_curr=loss,
        epoch_in_batch=state.epoch_in_batch + 1,
    )
    return new_state, next_lam


def step_eb_epd(
    gains: ControllerGains, state: ControllerState, loss: float
) -> tuple[ControllerState, float]:
    """Event-gated step: like ``step_epd`` except that inside the PD phase
    the rate is recomputed only when the loss increased (event e1) and is
    held constant otherwise.

    The Exponential phase and the transition step itself are identical to
    the ungated controller.
    """
    if state.phase is ControllerPhase.EXPONENTIAL:
        return step_epd(gains, state, loss)
    l_prev = state.l_curr
    if event_e1(loss, l_prev):
        next_lam = _clamp(_pd_law(gains, state.l0, loss, l_prev))
    else:
        next_lam = state.lam
    new_state = ControllerState(
        phase=ControllerPhase.PD,
        lam=next_lam,
        l0=state.l0,
        l_prev=l_prev,
        l_curr=loss,
        epoch_in_batch=state.epoch_in_batch + 1,
    )
    return new_state, next_lam


def state_to_dict(state: ControllerState) -> dict:
    """JSON-ready snapshot.

    Schema: ``{"phase": "E"|"PD", "lambda": float, "l0": float,
    "l_prev": float, "l_curr": float, "epoch_in_batch": int}``.
    """
    return {
        "phase": state.phase.value,
        "lambda": state.lam,
        "l0": state.l0,
        "l_prev": state.l_prev,
        "l_curr": state.l_curr,
        "epoch_in_batch": state.epoch_in_batch,
    }


def state_from_dict(data: dict) -> ControllerState:
    return ControllerState(
        phase=ControllerPhase(data["phase"]),
        lam=float(data["lambda"]),
        l0=float(data["l0"]),
        l_prev=float(data["l_prev"]),
        l_curr=float(data["l_curr"]),
        epoch_in_batch=int(data["epoch_in_batch"]),
    )


def state_to_json(state: ControllerState) -> str:
    return json.dumps(state_to_dict(state), sort_keys=True)


def state_from_json(text: str) -> ControllerState:
    return state_from_dict(json.loads(text))

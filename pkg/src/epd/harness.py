"""Online-learning experiment harness.

Splits the training data into B disjoint batches of S instances and runs
one of two scenarios:

* classical: batches are visited once, in order, each trained for exactly
  N epochs, with the learning-rate schedule reset on every batch load;
* event-cyclic: batches are visited in order and then cyclically
  revisited; each visit ends when the batch-switch governor fires (or at
  the per-batch budget N), and the whole run stops after exactly B*N
  epochs so both scenarios consume identical budgets.

Model weights persist across batch loads; only the learning-rate
schedule and the governor are reset. The first loss L(0) of a visit is
measured right after the visit's first training epoch and anchors both
the controller normalization and the governor's normalized window.

Every epoch appends one ``EpochRecord``; records serialize to CSV with a
fixed header and floats in shortest round-trip form, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import nn
from .config import ExperimentConfig, validate
from .controller import (
    ControllerGains,
    ControllerPhase,
    event_e1,
    reset,
    step_eb_epd,
    step_epd,
    L0_FLOOR,
)
from .datasets import Dataset, load_flat_binary_dataset, make_blobs, one_hot
from .governor import BatchDecision, GovernorConfig, GovernorState, observe


class InsufficientData(ValueError):
    """Training set cannot supply B batches of S instances."""


class ScenarioKind(Enum):
    CLASSICAL = "classical"
    EVENT_BASED_CYCLIC = "event-cyclic"


@dataclass(frozen=True)
class DatasetSpec:
    """Online scenario sizing: train/test sizes, classes, batching, budget."""

    t_train: int
    v_test: int
    c_classes: int
    b_batches: int
    s_batch: int
    n_epochs: int

    def __post_init__(self) -> None:
        for name in ("t_train", "v_test", "c_classes", "b_batches", "s_batch", "n_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.b_batches * self.s_batch > self.t_train:
            raise ValueError(
                f"b_batches*s_batch = {self.b_batches * self.s_batch} "
                f"exceeds t_train = {self.t_train}"
            )


@dataclass
class EpochRecord:
    """One row of the experiment log; ``lam`` is the rate used for the epoch."""

    global_epoch: int
    batch_id: int      # 1-based
    round: int         # 1-based cycle over the batches
    lam: float
    train_loss: float
    val_loss: float
    val_accuracy: float
    e1_fired: int
    batch_switch: int
    phase: str         # "E", "PD", or "-" for schedules without phases


CSV_HEADER = [
    "global_epoch",
    "batch_id",
    "round",
    "lambda",
    "train_loss",
    "val_loss",
    "val_accuracy",
    "e1_fired",
    "batch_switch",
    "phase",
]


def write_records(path: str | Path, records: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.global_epoch,
                    r.batch_id,
                    r.round,
                    repr(r.lam),
                    repr(r.train_loss),
                    repr(r.val_loss),
                    repr(r.val_accuracy),
                    r.e1_fired,
                    r.batch_switch,
                    r.phase,
                ]
            )


def read_records(path: str | Path) -> list[EpochRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header}")
        for row in reader:
            records.append(
                EpochRecord(
                    global_epoch=int(row[0]),
                    batch_id=int(row[1]),
                    round=int(row[2]),
                    lam=float(row[3]),
                    train_loss=float(row[4]),
                    val_loss=float(row[5]),
                    val_accuracy=float(row[6]),
                    e1_fired=int(row[7]),
                    batch_switch=int(row[8]),
                    phase=row[9],
                )
            )
    return records


def split_batches(
    dataset: Dataset, spec: DatasetSpec, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """B disjoint batches of exactly S instances, shuffled with ``seed``."""
    total = spec.b_batches * spec.s_batch
    if len(dataset.x_train) < total:
        raise InsufficientData(
            f"need {total} training instances for {spec.b_batches} batches "
            f"of {spec.s_batch}, dataset has {len(dataset.x_train)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset.x_train))[:total]
    batches = []
    for i in range(spec.b_batches):
        idx = order[i * spec.s_batch:(i + 1) * spec.s_batch]
        batches.append((dataset.x_train[idx], dataset.y_train[idx]))
    return batches


# --- learning-rate schedules -------------------------------------------------
#
# A schedule owns the per-batch lifecycle of the rate: ``start_batch``
# returns the rate for a fresh batch's first epoch, ``observe`` consumes
# that epoch's loss and returns the rate for the next one.


class ControllerSchedule:
    """E/PD controller wrapper; ``gated`` selects the event-gated PD variant."""

    def __init__(self, gains: ControllerGains, gated: bool):
        self.gains = gains
        self.gated = gated
        self.state = None

    def start_batch(self) -> float:
        self.state = None
        return self.gains.lambda0

    def observe(self, loss: float) -> float:
        if self.state is None:
            self.state = reset(self.gains, loss)
            return self.state.lam
        step = step_eb_epd if self.gated else step_epd
        self.state, next_lam = step(self.gains, self.state, loss)
        return next_lam

    def phase_label(self) -> str:
        if self.state is None:
            return ControllerPhase.EXPONENTIAL.value
        return self.state.phase.value


class ConstantSchedule:
    def __init__(self, lambda0: float):
        self.lambda0 = lambda0

    def start_batch(self) -> float:
        return self.lambda0

    def observe(self, loss: float) -> float:
        return self.lambda0

    def phase_label(self) -> str:
        return "-"


class DecaySchedule:
    """Time-based decay lambda(k) = lambda0 / (1 + decay*k), reset per batch."""

    def __init__(self, lambda0: float, decay: float):
        self.lambda0 = lambda0
        self.decay = decay
        self.k = 0

    def start_batch(self) -> float:
        self.k = 0
        return self.lambda0

    def observe(self, loss: float) -> float:
        self.k += 1
        return self.lambda0 / (1.0 + self.decay * self.k)

    def phase_label(self) -> str:
        return "-"


def _make_schedule(cfg: ExperimentConfig):
    ctl = cfg.controller
    if cfg.algorithm in ("epd", "eb-epd", "deb-epd"):
        gains = ControllerGains(lambda0=ctl.lambda0, kp=ctl.kp, kd=ctl.kd)
        return ControllerSchedule(gains, gated=cfg.algorithm in ("eb-epd", "deb-epd"))
    if cfg.algorithm == "sgd-decay":
        return DecaySchedule(ctl.lambda0, cfg.sgd.decay)
    # sgd-const, adam, amsgrad: constant external step size lambda0
    return ConstantSchedule(ctl.lambda0)


# --- trainer ------------------------------------------------------------------


class NetworkTrainer:
    """Dense-network trainer over pre-split batches with a held-out test set."""

    def __init__(
        self,
        net: nn.Network,
        optimizer,
        batches: list[tuple[np.ndarray, np.ndarray]],
        x_val: np.ndarray,
        y_val: np.ndarray,
        n_classes: int,
        minibatch_size: int,
        rng: np.random.Generator,
    ):
        self.net = net
        self.optimizer = optimizer
        self.batches = [(x, one_hot(y, n_classes)) for x, y in batches]
        self.x_val = x_val
        self.y_val_onehot = one_hot(y_val, n_classes)
        self.minibatch_size = minibatch_size
        self.rng = rng

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "NetworkTrainer":
        dataset = load_dataset(cfg)
        spec = dataset_spec(cfg)
        if len(dataset.x_test) < spec.v_test:
            raise InsufficientData(
                f"need {spec.v_test} test instances, dataset has {len(dataset.x_test)}"
            )
        batches = split_batches(dataset, spec, seed=cfg.dataset.seed)
        rng = np.random.default_rng(cfg.seed)
        net = nn.Network.create(
            n_inputs=dataset.x_train.shape[1],
            hidden=cfg.network.hidden,
            n_classes=dataset.n_classes,
            rng=rng,
        )
        if cfg.algorithm == "adam":
            opt = nn.Adam(cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.epsilon)
        elif cfg.algorithm == "amsgrad":
            opt = nn.AmsGrad(cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.epsilon)
        else:
            opt = nn.SgdExternalLr()
        return cls(
            net=net,
            optimizer=opt,
            batches=batches,
            x_val=dataset.x_test[: spec.v_test],
            y_val=dataset.y_test[: spec.v_test],
            n_classes=dataset.n_classes,
            minibatch_size=cfg.network.minibatch_size,
            rng=rng,
        )

    def train_epoch(self, batch_index: int, lam: float) -> float:
        """One pass over the batch in shuffled mini-batches; mean reported loss."""
        x, y = self.batches[batch_index]
        order = self.rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), self.minibatch_size):
            idx = order[start:start + self.minibatch_size]
            loss = nn.backward_and_update(self.net, x[idx], y[idx], lam, self.optimizer)
            total += loss * len(idx)
        return total / len(x)

    def evaluate(self) -> tuple[float, float]:
        probs = nn.forward(self.net, self.x_val)
        pred = nn.PredictionBatch(y_hat=probs, y=self.y_val_onehot)
        return nn.cross_entropy(pred), nn.accuracy(pred)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    ds = cfg.dataset
    if ds.kind == "blobs":
        return make_blobs(
            n_train=ds.t_train,
            n_test=ds.v_test,
            n_classes=ds.c_classes,
            n_features=ds.n_features,
            cluster_std=ds.cluster_std,
            center_span=ds.center_span,
            seed=ds.seed,
        )
    dataset = load_flat_binary_dataset(ds.path)
    if dataset.n_classes != ds.c_classes:
        raise InsufficientData(
            f"dataset at {ds.path} has {dataset.n_classes} classes, config says {ds.c_classes}"
        )
    return dataset


def dataset_spec(cfg: ExperimentConfig) -> DatasetSpec:
    ds = cfg.dataset
    return DatasetSpec(
        t_train=ds.t_train,
        v_test=ds.v_test,
        c_classes=ds.c_classes,
        b_batches=ds.b_batches,
        s_batch=ds.s_batch,
        n_epochs=ds.n_epochs,
    )


# --- scenario loops -----------------------------------------------------------


def _run_visit(
    records: list[EpochRecord],
    trainer,
    schedule,
    gov_cfg: GovernorConfig | None,
    batch_index: int,
    round_index: int,
    n_epochs: int,
    global_epoch: int,
    budget_left: int | None,
    feed: str,
) -> tuple[int, int | None]:
    """Train one batch visit; returns updated (global_epoch, budget_left)."""
    lam = schedule.start_batch()
    gov_state = GovernorState()
    l0 = None
    prev_fed = None
    for k in range(n_epochs):
        train_loss = trainer.train_epoch(batch_index, lam)
        val_loss, val_accuracy = trainer.evaluate()
        fed = train_loss if feed == "training" else val_loss
        next_lam = schedule.observe(fed)
        e1 = event_e1(fed, prev_fed) if prev_fed is not None else 0
        if l0 is None:
            l0 = max(fed, L0_FLOOR)
        switch = 0
        if gov_cfg is not None:
            gov_state, decision = observe(gov_state, gov_cfg, k, fed / l0)
            switch = int(decision is BatchDecision.CALL_NEW_BATCH)
        global_epoch += 1
        records.append(
            EpochRecord(
                global_epoch=global_epoch,
                batch_id=batch_index + 1,
                round=round_index,
                lam=lam,
                train_loss=train_loss,
                val_loss=val_loss,
                val_accuracy=val_accuracy,
                e1_fired=e1,
                batch_switch=switch,
                phase=schedule.phase_label(),
            )
        )
        prev_fed = fed
        lam = next_lam
        if budget_left is not None:
            budget_left -= 1
            if budget_left == 0:
                break
        if switch:
            break
    return global_epoch, budget_left


def run_classical(cfg: ExperimentConfig, trainer=None) -> list[EpochRecord]:
    """Visit each batch once for exactly N epochs; B*N records total."""
    validate(cfg)
    if trainer is None:
        trainer = NetworkTrainer.from_config(cfg)
    schedule = _make_schedule(cfg)
    records: list[EpochRecord] = []
    global_epoch = 0
    for b in range(cfg.dataset.b_batches):
        global_epoch, _ = _run_visit(
            records,
            trainer,
            schedule,
            gov_cfg=None,
            batch_index=b,
            round_index=1,
            n_epochs=cfg.dataset.n_epochs,
            global_epoch=global_epoch,
            budget_left=None,
            feed=cfg.controller.feed,
        )
    return records


def run_event_based(cfg: ExperimentConfig, trainer=None) -> list[EpochRecord]:
    """Governor-driven visits cycling over the batches until exactly B*N epochs."""
    validate(cfg)
    if trainer is None:
        trainer = NetworkTrainer.from_config(cfg)
    schedule = _make_schedule(cfg)
    gov_cfg = GovernorConfig(
        n_max=cfg.dataset.n_epochs,
        m=cfg.governor.m,
        alpha_thld=cfg.governor.alpha_thld,
    )
    budget_left: int | None = cfg.dataset.b_batches * cfg.dataset.n_epochs
    records: list[EpochRecord] = []
    global_epoch = 0
    batch_index = 0
    round_index = 1
    while budget_left:
        global_epoch, budget_left = _run_visit(
            records,
            trainer,
            schedule,
            gov_cfg=gov_cfg,
            batch_index=batch_index,
            round_index=round_index,
            n_epochs=cfg.dataset.n_epochs,
            global_epoch=global_epoch,
            budget_left=budget_left,
            feed=cfg.controller.feed,
        )
        batch_index += 1
        if batch_index == cfg.dataset.b_batches:
            batch_index = 0
            round_index += 1
    return records


def run_experiment(cfg: ExperimentConfig, trainer=None) -> list[EpochRecord]:
    """Dispatch on the resolved scenario."""
    if cfg.resolved_scenario() == "event-cyclic":
        return run_event_based(cfg, trainer=trainer)
    return run_classical(cfg, trainer=trainer)

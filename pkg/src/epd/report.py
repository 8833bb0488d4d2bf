"""Aggregation of run results into tables, plot series and figures.

Reads every ``*.csv`` in a results directory together with its
``*.config.json`` echo, groups runs by (algorithm, initial rate), and
averages metrics over seeds. The convergence-speed column uses the
threshold 0.95 x best group-mean final accuracy, computed across all
runs in the directory.

Outputs, under ``<out>/``:

* ``summary.csv`` and a human-readable ``summary.txt`` table;
* ``first_round.csv`` plus a table section for event-cyclic runs
  (end epoch of the first round and the loss/accuracy reached there);
* ``series/<group>.csv`` per-epoch means for plotting;
* ``figures/{loss,accuracy,learning_rate}.png`` rendered line plots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .config import ExperimentConfig, load_config
from .harness import EpochRecord, read_records
from .metrics import fasd, final_metrics, first_epoch_to, first_round

ALGO_LABELS = {
    "epd": "E/PD",
    "eb-epd": "EB E/PD",
    "deb-epd": "D-EB E/PD",
    "sgd-const": "SGD (const)",
    "sgd-decay": "SGD (decay)",
    "adam": "Adam",
    "amsgrad": "AMSGrad",
}


class MissingResults(FileNotFoundError):
    """The results directory holds no readable run outputs."""


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[EpochRecord]
    path: Path


@dataclass
class GroupSummary:
    algorithm: str
    lr0: float
    n_runs: int
    final_loss: float
    fva: float
    fasd: float
    first_epoch: float | None     # mean over seeds; None if any seed missed
    event_cyclic: bool
    ee_of_fr: float | None        # event-cyclic groups only
    loss_after_fr: float | None
    fva_after_fr: float | None


@dataclass
class Report:
    groups: list[GroupSummary]
    threshold_accuracy: float
    total_epochs: int
    series: dict[tuple[str, float], dict[str, np.ndarray]]


def collect_runs(results_dir: str | Path) -> list[RunResult]:
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise MissingResults(f"{results_dir} is not a directory")
    runs = []
    for csv_path in sorted(results_dir.glob("*.csv")):
        echo_path = csv_path.parent / (csv_path.stem + ".config.json")
        if not echo_path.exists():
            continue
        runs.append(
            RunResult(
                config=load_config(echo_path),
                records=read_records(csv_path),
                path=csv_path,
            )
        )
    if not runs:
        raise MissingResults(f"no run CSVs with config echoes found in {results_dir}")
    return runs


def build_report(runs: list[RunResult]) -> Report:
    budgets = {
        (r.config.dataset.b_batches, r.config.dataset.n_epochs) for r in runs
    }
    if len(budgets) > 1:
        raise ValueError(
            f"runs have mixed epoch budgets (B, N) = {sorted(budgets)}; "
            "aggregate comparable runs only"
        )
    (b_batches, n_epochs) = budgets.pop()
    total_epochs = b_batches * n_epochs

    grouped: dict[tuple[str, float], list[RunResult]] = {}
    for run in runs:
        key = (run.config.algorithm, run.config.controller.lambda0)
        grouped.setdefault(key, []).append(run)

    fva_means = {
        key: float(np.mean([final_metrics(r.records)[1] for r in group]))
        for key, group in grouped.items()
    }
    threshold = 0.95 * max(fva_means.values())

    groups = []
    series: dict[tuple[str, float], dict[str, np.ndarray]] = {}
    for key in sorted(grouped, key=lambda k: (k[0], k[1])):
        group = grouped[key]
        finals = [final_metrics(r.records) for r in group]
        firsts = [first_epoch_to(r.records, threshold) for r in group]
        event = all(r.config.resolved_scenario() == "event-cyclic" for r in group)
        if event:
            frs = [first_round(r.records) for r in group]
            ee = float(np.mean([fr[0] for fr in frs]))
            fr_loss = float(np.mean([fr[1] for fr in frs]))
            fr_fva = float(np.mean([fr[2] for fr in frs]))
        else:
            ee = fr_loss = fr_fva = None
        groups.append(
            GroupSummary(
                algorithm=key[0],
                lr0=key[1],
                n_runs=len(group),
                final_loss=float(np.mean([f[0] for f in finals])),
                fva=fva_means[key],
                fasd=float(np.mean([fasd(r.records) for r in group])),
                first_epoch=(
                    float(np.mean(firsts)) if all(f is not None for f in firsts) else None
                ),
                event_cyclic=event,
                ee_of_fr=ee,
                loss_after_fr=fr_loss,
                fva_after_fr=fr_fva,
            )
        )
        series[key] = _mean_series(group)
    return Report(
        groups=groups,
        threshold_accuracy=threshold,
        total_epochs=total_epochs,
        series=series,
    )


def _mean_series(group: list[RunResult]) -> dict[str, np.ndarray]:
    lengths = {len(r.records) for r in group}
    n = min(lengths)
    def stack(field):
        return np.mean(
            [[getattr(rec, field) for rec in r.records[:n]] for r in group], axis=0
        )
    return {
        "epoch": np.arange(1, n + 1),
        "lambda": stack("lam"),
        "train_loss": stack("train_loss"),
        "val_loss": stack("val_loss"),
        "val_accuracy": stack("val_accuracy"),
    }


def _group_name(algorithm: str, lr0: float) -> str:
    return f"{algorithm}_lr{lr0:g}"


def format_summary_table(report: Report) -> str:
    """Human-readable table: one row per (algorithm, initial rate) group."""
    pct = report.threshold_accuracy * 100.0
    header = (
        f"{'Algorithm':<14}{'lr0':<9}{'Final loss':<12}"
        f"{'FVA (+-FASD) %':<22}1st epoch to {pct:.2f}%"
    )
    lines = [header, "-" * len(header)]
    for g in report.groups:
        label = ALGO_LABELS.get(g.algorithm, g.algorithm)
        fva = f"{g.fva * 100:.2f} (+-{g.fasd * 100:.2f})"
        first = (
            f"{round(g.first_epoch)}/{report.total_epochs}"
            if g.first_epoch is not None
            else "-"
        )
        lines.append(
            f"{label:<14}{g.lr0:<9g}{g.final_loss:<12.4f}{fva:<22}{first}"
        )
    event_groups = [g for g in report.groups if g.event_cyclic]
    if event_groups:
        lines.append("")
        fr_header = (
            f"{'Algorithm':<14}{'lr0':<9}{'EE of FR':<12}"
            f"{'Loss after FR':<16}FVA after FR %"
        )
        lines += [fr_header, "-" * len(fr_header)]
        for g in event_groups:
            label = ALGO_LABELS.get(g.algorithm, g.algorithm)
            lines.append(
                f"{label:<14}{g.lr0:<9g}"
                f"{str(round(g.ee_of_fr)) + '/' + str(report.total_epochs):<12}"
                f"{g.loss_after_fr:<16.4f}{g.fva_after_fr * 100:.2f}"
            )
    lines.append("")
    lines.append(
        f"EE of FR = end epoch of the first round; threshold "
        f"{pct:.2f}% = 95% of the best group-mean final accuracy."
    )
    return "\n".join(lines) + "\n"


def write_report(report: Report, out_dir: str | Path, figures: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "algorithm",
                "lr0",
                "n_runs",
                "final_loss",
                "fva",
                "fasd",
                "first_epoch_to_threshold",
                "threshold_accuracy",
                "total_epochs",
            ]
        )
        for g in report.groups:
            writer.writerow(
                [
                    g.algorithm,
                    repr(g.lr0),
                    g.n_runs,
                    repr(g.final_loss),
                    repr(g.fva),
                    repr(g.fasd),
                    repr(g.first_epoch) if g.first_epoch is not None else "-",
                    repr(report.threshold_accuracy),
                    report.total_epochs,
                ]
            )

    event_groups = [g for g in report.groups if g.event_cyclic]
    if event_groups:
        with open(out_dir / "first_round.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["algorithm", "lr0", "ee_of_fr", "loss_after_fr", "fva_after_fr"]
            )
            for g in event_groups:
                writer.writerow(
                    [
                        g.algorithm,
                        repr(g.lr0),
                        repr(g.ee_of_fr),
                        repr(g.loss_after_fr),
                        repr(g.fva_after_fr),
                    ]
                )

    (out_dir / "summary.txt").write_text(format_summary_table(report))

    series_dir = out_dir / "series"
    series_dir.mkdir(exist_ok=True)
    for (algo, lr0), data in report.series.items():
        with open(series_dir / f"{_group_name(algo, lr0)}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "lambda", "train_loss", "val_loss", "val_accuracy"])
            for i in range(len(data["epoch"])):
                writer.writerow(
                    [
                        int(data["epoch"][i]),
                        repr(float(data["lambda"][i])),
                        repr(float(data["train_loss"][i])),
                        repr(float(data["val_loss"][i])),
                        repr(float(data["val_accuracy"][i])),
                    ]
                )

    if figures:
        render_figures(report, out_dir / "figures")


def render_figures(report: Report, fig_dir: str | Path) -> None:
    """Render per-epoch mean curves, one line per group, to PNG files."""
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    panels = [
        ("val_loss", "validation loss", "loss.png", False),
        ("val_accuracy", "validation accuracy", "accuracy.png", False),
        ("lambda", "learning rate", "learning_rate.png", True),
    ]
    for field, ylabel, filename, logy in panels:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for (algo, lr0), data in sorted(report.series.items()):
            label = f"{ALGO_LABELS.get(algo, algo)} lr0={lr0:g}"
            ax.plot(data["epoch"], data[field], label=label, linewidth=1.2)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(fig_dir / filename, dpi=150)
        plt.close(fig)

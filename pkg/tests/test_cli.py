import json
from pathlib import Path

import numpy as np
import pytest

from epd.cli import main
from epd.harness import read_records


def base_config(out_dir, **extra):
    cfg = {
        "algorithm": "epd",
        "seed": 1,
        "out_dir": str(out_dir),
        "dataset": {
            "t_train": 200, "v_test": 50, "c_classes": 3,
            "b_batches": 2, "s_batch": 100, "n_epochs": 6,
            "n_features": 6, "seed": 7,
        },
        "network": {"hidden": [8], "minibatch_size": 16},
    }
    cfg.update(extra)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_csv_and_config_echo(tmp_path, capsys):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, base_config(out))
    assert main(["run", "--config", str(cfg_path)]) == 0
    csv_path = out / "epd_lr0.01_seed1.csv"
    echo_path = out / "epd_lr0.01_seed1.config.json"
    assert csv_path.exists() and echo_path.exists()
    records = read_records(csv_path)
    assert len(records) == 12  # B*N
    echo = json.loads(echo_path.read_text())
    assert echo["algorithm"] == "epd"
    assert echo["seed"] == 1
    assert echo["run_name"] == "epd_lr0.01_seed1"
    assert "wrote" in capsys.readouterr().out


def test_run_overrides_change_outputs(tmp_path):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, base_config(tmp_path / "ignored"))
    rc = main([
        "run", "--config", str(cfg_path),
        "--algo", "sgd-const", "--lr0", "0.05", "--seed", "3",
        "--out", str(out),
    ])
    assert rc == 0
    csv_path = out / "sgd-const_lr0.05_seed3.csv"
    assert csv_path.exists()
    records = read_records(csv_path)
    assert all(r.lam == 0.05 for r in records)
    echo = json.loads((out / "sgd-const_lr0.05_seed3.config.json").read_text())
    assert echo["algorithm"] == "sgd-const"
    assert echo["controller"]["lambda0"] == 0.05


def test_run_rejects_positive_alpha_threshold(tmp_path, capsys):
    cfg = base_config(tmp_path / "out", governor={"m": 4, "alpha_thld": 0.01})
    cfg_path = write_config(tmp_path, cfg)
    assert main(["run", "--config", str(cfg_path)]) == 1
    assert "alpha_thld" in capsys.readouterr().err


def test_run_rejects_unknown_algorithm(tmp_path, capsys):
    cfg_path = write_config(tmp_path, base_config(tmp_path / "out", algorithm="sgdx"))
    assert main(["run", "--config", str(cfg_path)]) == 1
    assert "algorithm" in capsys.readouterr().err


def test_run_rejects_unknown_keys(tmp_path, capsys):
    cfg_path = write_config(tmp_path, base_config(tmp_path / "out", lr=0.1))
    assert main(["run", "--config", str(cfg_path)]) == 1
    assert "unknown" in capsys.readouterr().err


def test_run_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_repeat_run_is_byte_identical(tmp_path):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, base_config(out))
    assert main(["run", "--config", str(cfg_path)]) == 0
    first = (out / "epd_lr0.01_seed1.csv").read_bytes()
    first_echo = (out / "epd_lr0.01_seed1.config.json").read_bytes()
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert (out / "epd_lr0.01_seed1.csv").read_bytes() == first
    assert (out / "epd_lr0.01_seed1.config.json").read_bytes() == first_echo


def sweep_config(out_dir, algorithms, seeds, lr0=(0.01,), workers=1):
    return {
        "algorithms": list(algorithms),
        "lr0": list(lr0),
        "seeds": list(seeds),
        "workers": workers,
        "base": base_config(out_dir),
    }


def test_sweep_runs_grid_and_aggregates(tmp_path):
    out = tmp_path / "sweep_out"
    cfg_path = write_config(
        tmp_path, sweep_config(out, ["epd", "sgd-const"], [1, 2], workers=2)
    )
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert csvs == [
        "epd_lr0.01_seed1.csv",
        "epd_lr0.01_seed2.csv",
        "sgd-const_lr0.01_seed1.csv",
        "sgd-const_lr0.01_seed2.csv",
    ]
    report_dir = out / "report"
    assert (report_dir / "summary.csv").exists()
    assert (report_dir / "summary.txt").exists()
    assert (report_dir / "figures" / "loss.png").exists()
    assert (report_dir / "figures" / "accuracy.png").exists()
    assert (report_dir / "figures" / "learning_rate.png").exists()
    series = sorted(p.name for p in (report_dir / "series").glob("*.csv"))
    assert series == ["epd_lr0.01.csv", "sgd-const_lr0.01.csv"]
    with open(report_dir / "summary.csv") as fh:
        rows = fh.read().strip().splitlines()
    assert len(rows) == 3  # header + 2 groups


def test_sweep_rerun_reproduces_results(tmp_path):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, sweep_config(out, ["epd"], [1]))
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    first = (out / "epd_lr0.01_seed1.csv").read_bytes()
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    assert (out / "epd_lr0.01_seed1.csv").read_bytes() == first


def test_sweep_rejects_empty_seed_list(tmp_path, capsys):
    cfg = sweep_config(tmp_path / "out", ["epd"], [1])
    cfg["seeds"] = []
    cfg_path = write_config(tmp_path, cfg)
    assert main(["sweep", "--config", str(cfg_path)]) == 1
    assert "seeds" in capsys.readouterr().err


def test_sweep_reports_runtime_failures(tmp_path, capsys):
    from epd.datasets import write_flat_binary

    rng = np.random.default_rng(60)
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    for split, n in (("train", 20), ("test", 50)):  # too few training rows
        write_flat_binary(
            data_dir / f"{split}.bin",
            rng.integers(0, 256, size=(n, 6), dtype=np.uint8),
            rng.integers(0, 3, size=n),
            n_classes=3,
        )
    cfg = sweep_config(tmp_path / "out", ["epd"], [1])
    cfg["base"]["dataset"]["kind"] = "image-bin"
    cfg["base"]["dataset"]["path"] = str(data_dir)
    cfg_path = write_config(tmp_path, cfg)
    assert main(["sweep", "--config", str(cfg_path)]) == 1
    err = capsys.readouterr().err
    assert "FAILED epd_lr0.01_seed1" in err
    assert "skipping aggregation" in err


def test_report_on_run_directory(tmp_path, capsys):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, base_config(out))
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert main(["run", "--config", str(cfg_path), "--seed", "2"]) == 0
    rc = main(["report", str(out), "--no-figures"])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "E/PD" in stdout
    assert "1st epoch to" in stdout
    report_dir = out / "report"
    assert (report_dir / "summary.txt").exists()
    assert not (report_dir / "figures").exists()


def test_report_rejects_mixed_epoch_budgets(tmp_path, capsys):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, base_config(out))
    assert main(["run", "--config", str(cfg_path)]) == 0
    mixed = base_config(out)
    mixed["dataset"]["n_epochs"] = 8
    mixed["seed"] = 2
    cfg_path2 = write_config(tmp_path, mixed, name="cfg2.json")
    assert main(["run", "--config", str(cfg_path2)]) == 0
    assert main(["report", str(out)]) == 1
    assert "mixed" in capsys.readouterr().err


def test_report_missing_results(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == 1
    assert "no run CSVs" in capsys.readouterr().err


def test_report_includes_first_round_for_event_runs(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = base_config(out, algorithm="deb-epd")
    cfg_path = write_config(tmp_path, cfg)
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert main(["report", str(out), "--no-figures"]) == 0
    stdout = capsys.readouterr().out
    assert "EE of FR" in stdout
    assert (out / "report" / "first_round.csv").exists()

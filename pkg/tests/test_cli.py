"""End-to-end command-line runs on small synthetic data.

Training commands here use reduced configs (short traces, few epochs) so
the whole module stays fast; the acceptance suite runs the full protocol.
"""

import csv
import json

import pytest

from vmclassify.cli import main
from vmclassify.data import CANONICAL_METRICS


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    """Generated traces shared by the CLI tests: short, very separable."""
    out = tmp_path_factory.mktemp("traces")
    config = {
        "timesteps": 240,
        "vms_per_class": 2,
        "separability": 1.0,
        "noise_scale": 0.3,
    }
    # start from packaged defaults, override the run parameters
    from vmclassify.synth import default_config

    resolved = default_config().to_dict()
    resolved.update(config)
    cfg_path = out / "synth.json"
    cfg_path.write_text(json.dumps(resolved))
    assert main(["generate", "--out", str(out), "--config", str(cfg_path), "--seed", "9"]) == 0
    return out


@pytest.fixture(scope="module")
def fast_train_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "train.json"
    path.write_text(json.dumps({"epochs": 4, "window": 8}))
    return path


@pytest.fixture(scope="module")
def trained_model(small_data, fast_train_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main([
        "train",
        "--manifest", str(small_data / "manifest.csv"),
        "--out", str(out),
        "--config", str(fast_train_cfg),
        "--seed", "5",
    ])
    assert rc == 0
    return out


def test_generate_writes_traces_manifest_and_config(small_data):
    csvs = sorted(p.name for p in small_data.glob("*.csv") if p.name != "manifest.csv")
    assert len(csvs) == 4  # 2 VMs per class
    assert (small_data / "manifest.csv").is_file()
    with open(small_data / csvs[0]) as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == CANONICAL_METRICS

    echoed = json.loads((small_data / "generate_config.json").read_text())
    assert echoed["separability"] == 1.0
    assert echoed["seed"] == 9
    assert len(echoed["metrics"]) == 16


def test_generate_default_yields_eight_traces(tmp_path):
    # default archetypes, shortened traces: still 4 VMs per class
    from vmclassify.synth import default_config

    resolved = default_config().to_dict()
    resolved["timesteps"] = 64
    cfg = tmp_path / "synth.json"
    cfg.write_text(json.dumps(resolved))
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out), "--config", str(cfg)]) == 0
    csvs = sorted(p.name for p in out.glob("*.csv") if p.name != "manifest.csv")
    assert len(csvs) == 8
    assert csvs[:2] == ["sql-00.csv", "sql-01.csv"]
    manifest = (out / "manifest.csv").read_text().splitlines()
    assert len(manifest) == 9  # header + 8 rows


@pytest.mark.filterwarnings("ignore:invalid value encountered:RuntimeWarning")
def test_train_divergence_exit_code(small_data, fast_train_cfg, tmp_path):
    # an inf cell survives ingestion (only NaN rows drop) and poisons the
    # normalizer, so the first loss is non-finite
    poisoned_dir = tmp_path / "poisoned"
    poisoned_dir.mkdir()
    for p in small_data.glob("*.csv"):
        text = p.read_text()
        (poisoned_dir / p.name).write_text(text)
    victim = poisoned_dir / "web-00.csv"
    lines = victim.read_text().splitlines()
    for i in range(1, len(lines), 5):
        cells = lines[i].split(",")
        cells[0] = "inf"
        lines[i] = ",".join(cells)
    victim.write_text("\n".join(lines) + "\n")

    rc = main([
        "train", "--manifest", str(poisoned_dir / "manifest.csv"),
        "--out", str(tmp_path / "divergent"), "--config", str(fast_train_cfg),
    ])
    assert rc == 3


def test_generate_seed_changes_content(tmp_path, small_data):
    other = tmp_path / "other"
    cfg = small_data / "synth.json"
    assert main(["generate", "--out", str(other), "--config", str(cfg), "--seed", "10"]) == 0
    a = (small_data / "web-00.csv").read_text()
    b = (other / "web-00.csv").read_text()
    assert a != b
    assert len(a.splitlines()) == len(b.splitlines())


def test_train_writes_artifacts(trained_model):
    for name in ("model.dvmw", "history.log", "report.json",
                 "train_config.json", "training_curves.png"):
        assert (trained_model / name).is_file(), name
    rep = json.loads((trained_model / "report.json").read_text())
    assert rep["window"] == 8
    assert rep["variant"] == "deepconv"
    assert 0.0 <= rep["test"]["error_percent"] <= 100.0
    echoed = json.loads((trained_model / "train_config.json").read_text())
    assert echoed["train"]["epochs"] == 4
    assert echoed["train"]["seed"] == 5


def test_train_is_byte_deterministic(small_data, fast_train_cfg, tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        rc = main([
            "train", "--manifest", str(small_data / "manifest.csv"),
            "--out", str(out), "--config", str(fast_train_cfg), "--seed", "5",
        ])
        assert rc == 0
        outs.append((out / "model.dvmw").read_bytes())
    assert outs[0] == outs[1]


def test_train_missing_manifest_no_partial_artifacts(tmp_path, fast_train_cfg):
    out = tmp_path / "never"
    rc = main([
        "train", "--manifest", str(tmp_path / "missing.csv"),
        "--out", str(out), "--config", str(fast_train_cfg),
    ])
    assert rc == 2
    assert not out.exists()


def test_train_requires_window(small_data, tmp_path):
    rc = main([
        "train", "--manifest", str(small_data / "manifest.csv"),
        "--out", str(tmp_path / "x"),
    ])
    assert rc == 1


def test_usage_error_exit_code():
    assert main(["train"]) == 1  # missing required flags
    assert main(["no-such-command"]) == 1


def test_evaluate_prints_and_writes_report(trained_model, small_data, tmp_path, capsys):
    out = tmp_path / "eval"
    rc = main([
        "evaluate", "--weights", str(trained_model / "model.dvmw"),
        "--manifest", str(small_data / "manifest.csv"),
        "--out", str(out),
    ])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "accuracy" in printed
    rep = json.loads((out / "eval_report.json").read_text())
    assert rep["accuracy"] >= 0.9  # separability-1 data, easy


def test_classify_majority_vote_and_probabilities(trained_model, small_data, capsys):
    rc = main([
        "classify", "--weights", str(trained_model / "model.dvmw"),
        "--csv", str(small_data / "sql-01.csv"),
    ])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split(",")
    assert header[:2] == ["window_index", "start"]
    rows = [line.split(",") for line in lines[1:] if line and not line.startswith("majority")]
    assert len(rows) == 240 // 8  # non-overlapping windows
    for row in rows:
        ps = [float(x) for x in row[2:4]]
        assert abs(sum(ps) - 1.0) < 1e-9
    assert "majority vote: sql-server" in lines[-1]


def test_classify_exact_window_gives_one_row(trained_model, small_data, tmp_path, capsys):
    # craft a trace of exactly W rows from an existing csv
    src = (small_data / "web-00.csv").read_text().splitlines()
    short = tmp_path / "short.csv"
    short.write_text("\n".join(src[: 1 + 8]) + "\n")
    rc = main([
        "classify", "--weights", str(trained_model / "model.dvmw"),
        "--csv", str(short), "--out", str(tmp_path / "cls"),
    ])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    majority_at = next(i for i, l in enumerate(lines) if l.startswith("majority"))
    rows = lines[1:majority_at]
    assert len(rows) == 1
    assert (tmp_path / "cls" / "probabilities.csv").is_file()
    assert (tmp_path / "cls" / "probabilities.png").is_file()


def test_classify_too_short_trace_is_data_error(trained_model, small_data, tmp_path):
    src = (small_data / "web-00.csv").read_text().splitlines()
    short = tmp_path / "tiny.csv"
    short.write_text("\n".join(src[:4]) + "\n")
    rc = main([
        "classify", "--weights", str(trained_model / "model.dvmw"),
        "--csv", str(short),
    ])
    assert rc == 2


def test_classify_corrupt_weights_is_data_error(trained_model, small_data, tmp_path):
    bad = tmp_path / "bad.dvmw"
    raw = bytearray((trained_model / "model.dvmw").read_bytes())
    raw[:4] = b"XXXX"
    bad.write_bytes(bytes(raw))
    rc = main([
        "classify", "--weights", str(bad),
        "--csv", str(small_data / "web-00.csv"),
    ])
    assert rc == 2


def test_compare_table_reference_rows_and_figures(small_data, tmp_path, capsys):
    out = tmp_path / "cmp"
    cfg = tmp_path / "cmp.json"
    cfg.write_text(json.dumps({"epochs": 2, "window": 4}))
    rc = main([
        "compare", "--manifest", str(small_data / "manifest.csv"),
        "--out", str(out), "--config", str(cfg),
        "--window", "4", "--window", "8",
    ])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "47.8*" in printed and "17.9*" in printed

    table = (out / "comparison.txt").read_text()
    assert table.count("(ref)") == 3
    assert "deepconv" in table and "deepfft" in table

    plot_rows = (out / "plot_data.csv").read_text().splitlines()
    assert len(plot_rows) == 1 + 4  # 2 windows x 2 variants
    assert (out / "accuracy_vs_window.png").is_file()
    doc = json.loads((out / "comparison.json").read_text())
    assert len(doc["computed"]) == 4
    assert {r["method"] for r in doc["reference"]} == {
        "PCA-based", "AGATE error", "AGATE grey-area",
    }
    agate = next(r for r in doc["reference"] if r["method"] == "AGATE error")
    assert agate["values"]["256"] == 2.4  # quoted even when not swept

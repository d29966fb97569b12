"""Ingestion, windowing, normalization, and split behavior."""

import csv

import numpy as np
import pytest

from vmclassify.data import (
    CANONICAL_METRICS,
    VmTrace,
    WindowSample,
    apply_normalizer,
    balance_and_split,
    fit_normalizer,
    ingest_csv,
    prepare_dataset,
    read_trace_csv,
    window_stride,
    window_trace,
)
from vmclassify.errors import DataError


def write_trace_csv(path, samples, columns=CANONICAL_METRICS):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(samples)


def write_manifest(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["csv_path", "vm_id", "class"])
        writer.writerows(rows)


def make_trace(label=0, timesteps=100, metrics=16, seed=0, vm_id="vm"):
    rng = np.random.default_rng(seed)
    return VmTrace(
        vm_id=vm_id,
        class_label=label,
        samples=rng.standard_normal((timesteps, metrics)),
    )


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def test_ingest_eight_traces_four_per_class(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(8):
        name = f"trace{i}.csv"
        write_trace_csv(tmp_path / name, rng.standard_normal((10, 16)))
        rows.append((name, f"vm-{i}", "web-server" if i < 4 else "sql-server"))
    write_manifest(tmp_path / "manifest.csv", rows)

    traces = ingest_csv(tmp_path / "manifest.csv")
    assert len(traces) == 8
    assert [t.class_label for t in traces] == [0, 0, 0, 0, 1, 1, 1, 1]
    assert all(t.samples.shape == (10, 16) for t in traces)


def test_ingest_reorders_shuffled_columns(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((5, 16))
    perm = rng.permutation(16)
    shuffled_cols = [CANONICAL_METRICS[j] for j in perm]
    write_trace_csv(tmp_path / "t.csv", data[:, perm], columns=shuffled_cols)

    samples, dropped = read_trace_csv(tmp_path / "t.csv")
    assert dropped == 0
    assert np.allclose(samples, data)


def test_ingest_missing_column_names_it(tmp_path):
    cols = [m for m in CANONICAL_METRICS if m != "CacheMiss"]
    write_trace_csv(tmp_path / "t.csv", np.zeros((3, 15)), columns=cols)
    with pytest.raises(DataError, match="CacheMiss"):
        read_trace_csv(tmp_path / "t.csv")


def test_ingest_unknown_column_rejected(tmp_path):
    cols = list(CANONICAL_METRICS) + ["Bogus"]
    write_trace_csv(tmp_path / "t.csv", np.zeros((3, 17)), columns=cols)
    with pytest.raises(DataError, match="Bogus"):
        read_trace_csv(tmp_path / "t.csv")


def test_ingest_unparseable_float_reports_location(tmp_path):
    rows = [[1.0] * 16, ["oops"] + [1.0] * 15]
    write_trace_csv(tmp_path / "t.csv", rows)
    with pytest.raises(DataError, match=r"t\.csv:3"):
        read_trace_csv(tmp_path / "t.csv")


def test_ingest_drops_and_counts_nan_rows(tmp_path):
    rows = [[1.0] * 16, ["nan"] + [1.0] * 15, [2.0] * 16, [""] + [3.0] * 15]
    write_trace_csv(tmp_path / "t.csv", rows)
    samples, dropped = read_trace_csv(tmp_path / "t.csv")
    assert dropped == 2
    assert samples.shape == (2, 16)


def test_ingest_empty_file_and_missing_manifest(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(DataError, match="empty"):
        read_trace_csv(tmp_path / "empty.csv")
    with pytest.raises(DataError, match="manifest"):
        ingest_csv(tmp_path / "nope.csv")


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

def test_window_counts():
    trace = make_trace(timesteps=1000)
    assert len(window_trace(trace, 64, overlap_enabled=False)) == 15
    assert len(window_trace(trace, 128, overlap_enabled=True)) == 28  # stride 32


def test_window_exactly_one():
    trace = make_trace(timesteps=64)
    assert len(window_trace(trace, 64, overlap_enabled=False)) == 1


def test_window_shorter_trace_yields_empty():
    trace = make_trace(timesteps=10)
    assert window_trace(trace, 64, overlap_enabled=False) == []


def test_window_stride_rule():
    assert window_stride(64, overlap_enabled=False) == 64
    assert window_stride(128, overlap_enabled=True) == 32
    assert window_stride(256, overlap_enabled=True) == 64
    with pytest.raises(ValueError):
        window_stride(64, overlap_enabled=True)  # only above 64 timesteps


def test_windows_tile_without_gaps():
    trace = make_trace(timesteps=512)
    for w, overlap in [(64, False), (128, True)]:
        samples = window_trace(trace, w, overlap_enabled=overlap)
        stride = window_stride(w, overlap)
        starts = [s.origin[1] for s in samples]
        assert starts == list(range(0, 512 - w + 1, stride))
        for s in samples:
            start = s.origin[1]
            assert np.array_equal(s.window, trace.samples[start : start + w])


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_normalizer_constant_metric_forced_to_one():
    windows = [
        WindowSample(np.full((4, 2), [5.0, 1.0]), label=0, origin=("a", 0)),
        WindowSample(np.full((4, 2), [5.0, 3.0]), label=1, origin=("b", 0)),
    ]
    norm = fit_normalizer(windows)
    assert norm.mean[0] == 5.0
    assert norm.std[0] == 1.0
    normalized = apply_normalizer(windows, norm)
    assert not np.concatenate([w.window for w in normalized])[:, 0].any()


def test_normalizer_hand_case():
    windows = [
        WindowSample(np.array([[0.0], [2.0]]), label=0, origin=("a", 0)),
    ]
    norm = fit_normalizer(windows)
    assert norm.mean[0] == 1.0 and norm.std[0] == 1.0
    out = apply_normalizer(windows, norm)[0].window
    assert np.allclose(out[:, 0], [-1.0, 1.0])


def test_normalizer_train_stats_reach_zero_mean_unit_variance():
    rng = np.random.default_rng(2)
    windows = [
        WindowSample(rng.standard_normal((8, 3)) * 4 + 7, label=0, origin=("a", i))
        for i in range(20)
    ]
    norm = fit_normalizer(windows)
    stacked = np.concatenate([w.window for w in apply_normalizer(windows, norm)])
    assert np.abs(stacked.mean(axis=0)).max() < 1e-9
    assert np.abs(stacked.var(axis=0) - 1.0).max() < 1e-9


def test_validation_uses_train_statistics_unchanged():
    rng = np.random.default_rng(3)
    train = [WindowSample(rng.standard_normal((4, 2)), 0, ("a", i)) for i in range(10)]
    # validation deliberately from a shifted distribution
    val = [WindowSample(rng.standard_normal((4, 2)) + 10.0, 1, ("b", i)) for i in range(10)]
    norm = fit_normalizer(train)
    val_out = np.concatenate([w.window for w in apply_normalizer(val, norm)])
    # shifted data stays shifted: its own mean is NOT zero under train stats
    assert val_out.mean() > 5.0


# ---------------------------------------------------------------------------
# balance and split
# ---------------------------------------------------------------------------

def _count_labels(part):
    labels = [w.label for w in part]
    return labels.count(0), labels.count(1)


def test_balance_and_split_sizes():
    rng = np.random.default_rng(4)
    windows = [WindowSample(rng.standard_normal((4, 2)), 0, ("a", i)) for i in range(120)]
    windows += [WindowSample(rng.standard_normal((4, 2)), 1, ("b", i)) for i in range(80)]
    split = balance_and_split(windows, seed=0)
    total = len(split.train) + len(split.validation) + len(split.test)
    assert total == 160  # downsampled to 80 + 80
    assert abs(len(split.train) - 112) <= 1
    assert abs(len(split.validation) - 32) <= 1
    assert abs(len(split.test) - 16) <= 1
    for part in (split.train, split.validation, split.test):
        n0, n1 = _count_labels(part)
        assert abs(n0 - n1) <= 1


def test_split_totals_within_one_sample_of_fractions():
    # 1008 per class: exact targets 1411.2 / 403.2 / 201.6
    rng = np.random.default_rng(11)
    windows = [WindowSample(rng.standard_normal((2, 2)), i % 2, ("a", i)) for i in range(2016)]
    split = balance_and_split(windows, seed=3)
    total = sum(len(p) for p in split.parts().values())
    assert total == 2016
    for part, fraction in zip(split.parts().values(), (0.7, 0.2, 0.1)):
        assert abs(len(part) - fraction * total) <= 1.0 + 1e-9
        n0, n1 = _count_labels(part)
        assert abs(n0 - n1) <= 1


def test_balance_keeps_everything_when_classes_equal():
    rng = np.random.default_rng(5)
    windows = [WindowSample(rng.standard_normal((4, 2)), i % 2, ("a", i)) for i in range(100)]
    split = balance_and_split(windows, seed=1)
    assert len(split.train) + len(split.validation) + len(split.test) == 100


def test_split_is_deterministic_and_disjoint():
    rng = np.random.default_rng(6)
    windows = [WindowSample(rng.standard_normal((4, 2)), i % 2, ("a", i)) for i in range(50)]
    s1 = balance_and_split(windows, seed=7)
    s2 = balance_and_split(windows, seed=7)
    for p1, p2 in zip(s1.parts().values(), s2.parts().values()):
        assert [w.origin for w in p1] == [w.origin for w in p2]
    origins = [w.origin for part in s1.parts().values() for w in part]
    assert len(origins) == len(set(origins))


def test_split_requires_both_classes():
    rng = np.random.default_rng(8)
    windows = [WindowSample(rng.standard_normal((4, 2)), 0, ("a", i)) for i in range(10)]
    with pytest.raises(DataError):
        balance_and_split(windows, seed=0)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def test_prepare_dataset_normalizes_on_train_only():
    traces = [make_trace(0, 400, 3, seed=i, vm_id=f"w{i}") for i in range(2)]
    traces += [make_trace(1, 400, 3, seed=10 + i, vm_id=f"s{i}") for i in range(2)]
    split = prepare_dataset(traces, window=8, seed=0)
    stacked = np.concatenate([w.window for w in split.train])
    assert np.abs(stacked.mean(axis=0)).max() < 1e-9
    assert np.abs(stacked.var(axis=0) - 1.0).max() < 1e-9
    # recompute from the raw windows: validation stats under the train
    # normalizer are close to but not exactly standard
    val = np.concatenate([w.window for w in split.validation])
    assert val.std() == pytest.approx(1.0, abs=0.2)


def test_prepare_dataset_temporal_mode_separates_time_ranges():
    traces = [make_trace(0, 500, 2, seed=1, vm_id="w0"),
              make_trace(1, 500, 2, seed=2, vm_id="s0")]
    split = prepare_dataset(traces, window=8, seed=0, split_mode="temporal")
    train_max = max(w.origin[1] for w in split.train)
    test_min = min(w.origin[1] for w in split.test)
    # train windows come from the first 70% of each trace; origins are
    # relative to each segment, so train starts stay below 0.7 * 500
    assert train_max <= 350 - 8
    assert test_min >= 0
    for part in split.parts().values():
        n0, n1 = _count_labels(part)
        assert abs(n0 - n1) <= 1


def test_prepare_dataset_rejects_short_traces():
    traces = [make_trace(0, 6, 2, vm_id="w0"), make_trace(1, 6, 2, vm_id="s0")]
    with pytest.raises(DataError):
        prepare_dataset(traces, window=16, seed=0)

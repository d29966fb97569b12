"""Trace ingestion and dataset preparation.

Traces are per-VM matrices of 16 monitored metrics sampled every 5
minutes. The pipeline cuts them into fixed-length windows (75% overlap for
windows longer than 64 steps), balances the two classes, splits
0.7/0.2/0.1 with per-class stratification, and normalizes every metric to
zero mean / unit variance using statistics fitted on the training split
only.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

CANONICAL_METRICS = (
    "SysCallRate",
    "CPU",
    "IdleCPU",
    "I/O buffer",
    "DiskAvl",
    "CacheMiss",
    "Memory",
    "UserMem",
    "PgOutRate",
    "InPktRate",
    "OutPktRate",
    "InByteRate",
    "OutByteRate",
    "AliveProc",
    "ActiveProc",
    "RunTime",
)

CLASS_NAMES = ("web-server", "sql-server")

OVERLAP_THRESHOLD = 64  # windows strictly longer than this use stride W/4

DEFAULT_FRACTIONS = (0.7, 0.2, 0.1)

MANIFEST_FIELDS = ("csv_path", "vm_id", "class")


def class_label(name: str) -> int:
    normalized = name.strip().lower()
    if normalized not in CLASS_NAMES:
        raise DataError(f"unknown class {name!r}; expected one of {CLASS_NAMES}")
    return CLASS_NAMES.index(normalized)


@dataclass
class VmTrace:
    """One VM's labeled metric streams: samples is (T, M) in canonical order."""

    vm_id: str
    class_label: int
    samples: np.ndarray
    metric_names: tuple[str, ...] = CANONICAL_METRICS
    dropped_rows: int = 0

    @property
    def timesteps(self) -> int:
        return self.samples.shape[0]


@dataclass
class WindowSample:
    """A (W, M) slice of one trace plus its label and provenance."""

    window: np.ndarray
    label: int
    origin: tuple[str, int]  # (vm_id, start_index)


@dataclass
class Normalizer:
    """Per-metric (mean, std) fitted on training windows."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, window: np.ndarray) -> np.ndarray:
        return (window - self.mean) / self.std


@dataclass
class DatasetSplit:
    train: list[WindowSample]
    validation: list[WindowSample]
    test: list[WindowSample]
    normalizer: Normalizer | None = None

    def parts(self) -> dict[str, list[WindowSample]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def read_manifest(manifest_path) -> list[tuple[Path, str, int]]:
    """Parse a manifest CSV of (csv_path, vm_id, class) records.

    Relative trace paths are resolved against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    entries: list[tuple[Path, str, int]] = []
    with open(manifest_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{manifest_path}: empty manifest") from None
        if tuple(h.strip() for h in header) != MANIFEST_FIELDS:
            raise DataError(
                f"{manifest_path}: manifest header must be {','.join(MANIFEST_FIELDS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{manifest_path}:{lineno}: expected 3 fields, got {len(row)}")
            path = Path(row[0].strip())
            if not path.is_absolute():
                path = base / path
            entries.append((path, row[1].strip(), class_label(row[2])))
    if not entries:
        raise DataError(f"{manifest_path}: manifest lists no traces")
    return entries


def _parse_cell(text: str, path, lineno: int, column: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise DataError(
            f"{path}:{lineno}: unparseable value {text!r} in column {column!r}"
        ) from None


def read_trace_csv(path) -> tuple[np.ndarray, int]:
    """Read one trace CSV, reordering columns into canonical metric order.

    Rows containing NaN (or empty cells) are dropped and counted. Returns
    (samples (T, 16), dropped_row_count).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"trace file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        unknown = [h for h in header if h not in CANONICAL_METRICS]
        if unknown:
            raise DataError(f"{path}: unknown columns {unknown}")
        missing = [m for m in CANONICAL_METRICS if m not in header]
        if missing:
            raise DataError(f"{path}: missing metric column {missing[0]!r}")
        if len(header) != len(CANONICAL_METRICS):
            raise DataError(f"{path}: duplicate metric columns")
        order = [header.index(m) for m in CANONICAL_METRICS]

        rows: list[list[float]] = []
        dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} values, got {len(row)}"
                )
            values = [_parse_cell(row[j], path, lineno, header[j]) for j in order]
            if any(math.isnan(v) for v in values):
                dropped += 1
                continue
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no usable data rows")
    return np.asarray(rows, dtype=np.float64), dropped


def ingest_csv(manifest_path) -> list[VmTrace]:
    """Load every trace listed in a manifest, in manifest order."""
    traces: list[VmTrace] = []
    for path, vm_id, label in read_manifest(manifest_path):
        samples, dropped = read_trace_csv(path)
        if dropped:
            logger.warning("%s: dropped %d rows containing NaN", path, dropped)
        traces.append(VmTrace(vm_id=vm_id, class_label=label, samples=samples,
                              dropped_rows=dropped))
    return traces


def window_stride(window: int, overlap_enabled: bool) -> int:
    if overlap_enabled:
        if window <= OVERLAP_THRESHOLD:
            raise ValueError(
                f"overlap is only used for windows longer than {OVERLAP_THRESHOLD} "
                f"timesteps, got W={window}"
            )
        return window // 4
    return window


def overlap_for_window(window: int) -> bool:
    """Default augmentation rule: 75% overlap strictly above 64 timesteps."""
    return window > OVERLAP_THRESHOLD


def window_trace(trace: VmTrace, window: int, overlap_enabled: bool) -> list[WindowSample]:
    """Cut [k*stride, k*stride + W) windows from one trace.

    A trace shorter than the window yields an empty list (with a warning),
    not an error.
    """
    if window < 1:
        raise ValueError("window must be positive")
    stride = window_stride(window, overlap_enabled)
    t = trace.timesteps
    if t < window:
        logger.warning(
            "%s: trace has %d timesteps, shorter than window %d; skipped",
            trace.vm_id, t, window,
        )
        return []
    samples = []
    for start in range(0, t - window + 1, stride):
        samples.append(
            WindowSample(
                window=trace.samples[start : start + window].copy(),
                label=trace.class_label,
                origin=(trace.vm_id, start),
            )
        )
    return samples


def fit_normalizer(train_windows: list[WindowSample]) -> Normalizer:
    """Per-metric mean and population std over all training windows.

    Constant metrics get std forced to 1 so they normalize to zero.
    """
    if not train_windows:
        raise DataError("cannot fit a normalizer on an empty training set")
    stacked = np.concatenate([w.window for w in train_windows], axis=0)
    if stacked.shape[0] < 2:
        raise DataError("need at least 2 training values per metric")
    mean = stacked.mean(axis=0)
    std = np.sqrt(stacked.var(axis=0))
    std = np.where(std < 1e-12, 1.0, std)
    return Normalizer(mean=mean, std=std)


def apply_normalizer(windows: list[WindowSample], normalizer: Normalizer) -> list[WindowSample]:
    return [
        WindowSample(window=normalizer.apply(w.window), label=w.label, origin=w.origin)
        for w in windows
    ]


def _split_points(n: int, fractions: tuple[float, float, float]) -> tuple[int, int]:
    first = int(round(fractions[0] * n))
    second = int(round((fractions[0] + fractions[1]) * n))
    return first, second


def _stratified_allocation(
    minority: int, n_classes: int, fractions: tuple[float, float, float]
) -> list[list[int]]:
    """Per-class sample counts for each split.

    Split totals are rounded globally (each within one sample of the exact
    fraction); each total is then distributed across classes so per-class
    counts within a split differ by at most one.
    """
    total = minority * n_classes
    a, b = _split_points(total, fractions)
    split_totals = [a, b - a, total - b]
    remaining = [minority] * n_classes
    table = [[0] * 3 for _ in range(n_classes)]
    for j, t in enumerate(split_totals):
        base, extra = divmod(t, n_classes)
        take = [base] * n_classes
        order = sorted(range(n_classes), key=lambda c: (-(remaining[c] - base), c))
        for c in order[:extra]:
            take[c] += 1
        for c in range(n_classes):
            table[c][j] = take[c]
            remaining[c] -= take[c]
    assert all(r == 0 for r in remaining)
    return table


def balance_and_split(
    windows: list[WindowSample],
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
    seed: int = 0,
) -> DatasetSplit:
    """Downsample to the minority class, then split with stratification.

    Deterministic for a given seed. Split sizes land within one sample of
    the exact fractions, and per-class counts within each split differ by
    at most one.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    by_label: dict[int, list[WindowSample]] = {}
    for w in windows:
        by_label.setdefault(w.label, []).append(w)
    if len(by_label) < 2:
        raise DataError(
            f"both classes must be present; got windows only for {sorted(by_label)}"
        )
    minority = min(len(v) for v in by_label.values())
    if minority == 0:
        raise DataError("a class has zero windows")

    rng = np.random.default_rng(seed)
    labels = sorted(by_label)
    allocation = _stratified_allocation(minority, len(labels), fractions)
    parts: dict[str, list[WindowSample]] = {"train": [], "validation": [], "test": []}
    for label, counts in zip(labels, allocation):
        group = by_label[label]
        order = rng.permutation(len(group))[:minority]
        kept = [group[i] for i in order]
        a, b = counts[0], counts[0] + counts[1]
        parts["train"].extend(kept[:a])
        parts["validation"].extend(kept[a:b])
        parts["test"].extend(kept[b:])
    for key, part in parts.items():
        order = rng.permutation(len(part))
        parts[key] = [part[i] for i in order]
    return DatasetSplit(train=parts["train"], validation=parts["validation"],
                        test=parts["test"])


def _temporal_split(
    traces: list[VmTrace],
    window: int,
    overlap_enabled: bool,
    fractions: tuple[float, float, float],
    seed: int,
) -> DatasetSplit:
    """Contiguous-time split: each trace contributes its earliest 70% of
    timesteps to train, the next 20% to validation, the last 10% to test.

    Avoids the near-duplicate leakage that overlapping windows can cause
    under window-level shuffling.
    """
    rng = np.random.default_rng(seed)
    parts: dict[str, list[WindowSample]] = {"train": [], "validation": [], "test": []}
    for trace in traces:
        t = trace.timesteps
        a, b = _split_points(t, fractions)
        segments = {
            "train": trace.samples[:a],
            "validation": trace.samples[a:b],
            "test": trace.samples[b:],
        }
        for key, segment in segments.items():
            sub = VmTrace(trace.vm_id, trace.class_label, segment)
            parts[key].extend(window_trace(sub, window, overlap_enabled))
    balanced: dict[str, list[WindowSample]] = {}
    for key, part in parts.items():
        by_label: dict[int, list[WindowSample]] = {}
        for w in part:
            by_label.setdefault(w.label, []).append(w)
        if len(by_label) < 2 or min(len(v) for v in by_label.values()) == 0:
            raise DataError(f"{key} split is missing a class; traces are too short")
        minority = min(len(v) for v in by_label.values())
        kept: list[WindowSample] = []
        for label in sorted(by_label):
            group = by_label[label]
            order = rng.permutation(len(group))[:minority]
            kept.extend(group[i] for i in order)
        order = rng.permutation(len(kept))
        balanced[key] = [kept[i] for i in order]
    return DatasetSplit(train=balanced["train"], validation=balanced["validation"],
                        test=balanced["test"])


def prepare_dataset(
    traces: list[VmTrace],
    window: int,
    seed: int,
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
    split_mode: str = "window",
    overlap_enabled: bool | None = None,
) -> DatasetSplit:
    """Full preprocessing pipeline: window, balance, split, normalize.

    ``overlap_enabled=None`` applies the default rule (overlap iff W > 64).
    ``split_mode`` is "window" (shuffled windows, the default protocol) or
    "temporal" (contiguous per-VM time ranges).
    """
    if overlap_enabled is None:
        overlap_enabled = overlap_for_window(window)
    if split_mode == "window":
        windows: list[WindowSample] = []
        for trace in traces:
            windows.extend(window_trace(trace, window, overlap_enabled))
        if not windows:
            raise DataError(f"no trace is long enough for window {window}")
        split = balance_and_split(windows, fractions, seed)
    elif split_mode == "temporal":
        split = _temporal_split(traces, window, overlap_enabled, fractions, seed)
    else:
        raise ValueError(f"split_mode must be 'window' or 'temporal', got {split_mode!r}")

    normalizer = fit_normalizer(split.train)
    return DatasetSplit(
        train=apply_normalizer(split.train, normalizer),
        validation=apply_normalizer(split.validation, normalizer),
        test=apply_normalizer(split.test, normalizer),
        normalizer=normalizer,
    )

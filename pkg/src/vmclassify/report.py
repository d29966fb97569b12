"""Report rendering: text tables, delimited plot data, and figures.

Figures are rendered headlessly to files next to the delimited output so a
run's directory is self-contained.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .baselines import ReferenceRow
from .training import EpochRecord, SweepResult

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "learning_rate")


def write_history_log(path, history: list[EpochRecord]) -> None:
    """Line-oriented training log: one row per epoch, tab separated."""
    with open(path, "w") as fh:
        fh.write("\t".join(HISTORY_COLUMNS) + "\n")
        for r in history:
            fh.write(
                f"{r.epoch}\t{r.train_loss:.6f}\t{r.val_loss:.6f}"
                f"\t{r.val_accuracy:.6f}\t{r.learning_rate:.8f}\n"
            )


def _fmt_cell(value, quoted: bool = False, width: int = 8) -> str:
    if value is None:
        return "-".rjust(width)
    # quoted reference numbers are reproduced verbatim (one decimal place,
    # starred); computed errors use the 0.00 format
    text = f"{value:g}*" if quoted else f"{value:.2f}"
    return text.rjust(width)


def render_comparison_table(
    sweep: SweepResult,
    reference_rows: list[ReferenceRow],
    windows: list[int],
    variants: list[str],
) -> str:
    """Error-percentage table: reference rows first, computed rows after.

    Starred entries are quoted approximations, not computed by this run.
    """
    label_width = max(
        [len("Method (error %)")]
        + [len(r.method) + len(" (ref)") for r in reference_rows]
        + [len(v) for v in variants]
    )
    header = "Method (error %)".ljust(label_width) + "".join(
        str(w).rjust(8) for w in windows
    )
    lines = [header, "-" * len(header)]
    for row in reference_rows:
        cells = "".join(_fmt_cell(row.value(w), row.approximate) for w in windows)
        lines.append(f"{row.method} (ref)".ljust(label_width) + cells)
    for variant in variants:
        cells = ""
        for w in windows:
            entry = sweep.entry(variant, w)
            cells += _fmt_cell(entry.error_percent)
        lines.append(variant.ljust(label_width) + cells)
    lines.append("")
    lines.append("* quoted reference value (approximate window mapping), not computed")
    return "\n".join(lines)


def write_plot_data(path, sweep: SweepResult) -> None:
    """One (variant, window, accuracy, error) row per trained model."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "window", "accuracy", "error_percent"])
        for e in sweep.entries:
            writer.writerow([e.variant, e.window, f"{e.accuracy:.6f}", f"{e.error_percent:.4f}"])


def plot_accuracy_curves(path, sweep: SweepResult, windows: list[int], variants: list[str]) -> None:
    """Accuracy versus window length, one line per model variant."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for variant in variants:
        accs = [100.0 * sweep.entry(variant, w).accuracy for w in windows]
        ax.plot(windows, accs, marker="o", label=variant)
    ax.set_xscale("log", base=2)
    ax.set_xticks(windows)
    ax.set_xticklabels([str(w) for w in windows])
    ax.set_xlabel("window length W (5-minute steps)")
    ax.set_ylabel("test accuracy [%]")
    ax.set_title("Model accuracy by window length")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_training_history(path, history: list[EpochRecord]) -> None:
    """Loss curves, validation accuracy, and the learning-rate schedule."""
    epochs = [r.epoch for r in history]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
    ax1.plot(epochs, [r.train_loss for r in history], label="train loss")
    ax1.plot(epochs, [r.val_loss for r in history], label="validation loss")
    ax1.set_ylabel("cross entropy")
    ax1.grid(True, alpha=0.3)
    ax1.legend()

    ax2.plot(epochs, [100.0 * r.val_accuracy for r in history],
             color="tab:green", label="validation accuracy")
    ax2.set_ylabel("accuracy [%]")
    ax2.set_xlabel("epoch")
    ax2.grid(True, alpha=0.3)
    ax_lr = ax2.twinx()
    ax_lr.plot(epochs, [r.learning_rate for r in history],
               color="tab:red", alpha=0.6, label="learning rate")
    ax_lr.set_ylabel("learning rate")
    ax_lr.set_yscale("log")
    lines1, labels1 = ax2.get_legend_handles_labels()
    lines2, labels2 = ax_lr.get_legend_handles_labels()
    ax2.legend(lines1 + lines2, labels1 + labels2, loc="center right")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_window_probabilities(path, starts: list[int], probabilities, class_names) -> None:
    """Per-window class probabilities along a classified trace."""
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    for c, name in enumerate(class_names):
        ax.plot(starts, [p[c] for p in probabilities], marker=".", label=name)
    ax.set_xlabel("window start (timestep)")
    ax.set_ylabel("probability")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p

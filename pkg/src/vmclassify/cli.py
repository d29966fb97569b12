"""Command-line entry point.

Subcommands: generate, train, evaluate, classify, compare. Every command
that writes artifacts also writes its fully resolved configuration next to
them, so a run can be audited and reproduced from its output directory
alone.

Exit codes: 0 success, 1 usage/configuration error, 2 data or weight-file
error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, report, weights
from .data import (
    CANONICAL_METRICS,
    CLASS_NAMES,
    VmTrace,
    apply_normalizer,
    ingest_csv,
    prepare_dataset,
    read_trace_csv,
    window_trace,
)
from .errors import ConfigError, DataError, DivergenceError, WeightFormatError
from .model import VARIANTS
from .nn.loss import softmax
from .nn.tensor import Tensor
from .synth import SynthConfig, default_config, synthesize
from .training import TrainConfig, evaluate, sweep, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return doc


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="vmclassify",
                     description="Train and run VM behavior classifiers on resource traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=False, out_required=False):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", type=Path, required=out_required, help="output directory")
        if manifest:
            p.add_argument("--manifest", type=Path, required=True,
                           help="manifest CSV of (csv_path, vm_id, class) records")

    p = sub.add_parser("generate", help="write synthetic traces and a manifest")
    common(p, out_required=True)

    p = sub.add_parser("train", help="train one model and save its weights")
    common(p, manifest=True, out_required=True)
    p.add_argument("--window", type=int, help="window length W (power of two in 4..256)")
    p.add_argument("--variant", choices=VARIANTS, help="model variant")

    p = sub.add_parser("evaluate", help="evaluate saved weights on labeled traces")
    common(p, manifest=True)
    p.add_argument("--weights", type=Path, required=True, help="weight container file")

    p = sub.add_parser("classify", help="classify one trace CSV with saved weights")
    common(p)
    p.add_argument("--weights", type=Path, required=True, help="weight container file")
    p.add_argument("--csv", type=Path, required=True, help="trace CSV to classify")

    p = sub.add_parser("compare", help="train a window/variant sweep and tabulate errors")
    common(p, manifest=True, out_required=True)
    p.add_argument("--window", type=int, action="append", dest="windows",
                   help="window length; repeat for several (default: full sweep)")
    p.add_argument("--variant", choices=VARIANTS, action="append", dest="variants",
                   help="model variant; repeat for both (default: both)")

    return parser


def _resolve_train_config(args, file_cfg: dict) -> tuple[TrainConfig, dict]:
    """Merge defaults <- config file <- CLI flags into a TrainConfig plus
    dataset options (fractions / split_mode / overlap)."""
    known = {
        "window", "variant", "learning_rate", "weight_decay", "batch_size",
        "epochs", "plateau_factor", "plateau_patience", "seed",
    }
    data_keys = {"fractions", "split_mode", "overlap"}
    unknown = set(file_cfg) - known - data_keys - {"windows", "variants"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    values = {k: file_cfg[k] for k in known if k in file_cfg}
    if getattr(args, "window", None) is not None:
        values["window"] = args.window
    if getattr(args, "variant", None) is not None:
        values["variant"] = args.variant
    if args.seed is not None:
        values["seed"] = args.seed
    if "window" not in values:
        raise ConfigError("a window length is required (--window or config)")
    try:
        config = TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    data_options = {
        "fractions": tuple(file_cfg.get("fractions", (0.7, 0.2, 0.1))),
        "split_mode": file_cfg.get("split_mode", "window"),
        "overlap": file_cfg.get("overlap"),
    }
    return config, data_options


def cmd_generate(args) -> int:
    config = default_config()
    if args.config is not None:
        config = SynthConfig.from_dict(_load_json(args.config))
    seed = 0 if args.seed is None else args.seed

    traces = synthesize(config, seed)
    out = report.ensure_dir(args.out)
    manifest_rows = []
    for trace in traces:
        csv_name = f"{trace.vm_id}.csv"
        with open(out / csv_name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CANONICAL_METRICS)
            for row in trace.samples:
                writer.writerow([f"{v:.6f}" for v in row])
        manifest_rows.append((csv_name, trace.vm_id, CLASS_NAMES[trace.class_label]))
    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["csv_path", "vm_id", "class"])
        writer.writerows(manifest_rows)

    resolved = {"command": "generate", "seed": seed, "out": str(out)}
    resolved.update(config.to_dict())
    _write_json(out / "generate_config.json", resolved)
    print(f"wrote {len(traces)} traces and manifest.csv to {out}")
    return 0


def cmd_train(args) -> int:
    file_cfg = _load_json(args.config) if args.config else {}
    config, data_options = _resolve_train_config(args, file_cfg)

    traces = ingest_csv(args.manifest)
    split = prepare_dataset(
        traces,
        config.window,
        seed=config.seed,
        fractions=data_options["fractions"],
        split_mode=data_options["split_mode"],
        overlap_enabled=data_options["overlap"],
    )

    result = train(split, config)
    test_report = evaluate(result.network, split.test)
    test_report.epoch_of_best = result.best_epoch

    out = report.ensure_dir(args.out)
    weights_path = out / "model.dvmw"
    weights.save(weights_path, result.network, split.normalizer)
    report.write_history_log(out / "history.log", result.history)
    report.plot_training_history(out / "training_curves.png", result.history)
    _write_json(
        out / "report.json",
        {
            "variant": config.variant,
            "window": config.window,
            "best_epoch": result.best_epoch,
            "best_val_accuracy": result.best_val_accuracy,
            "best_val_loss": result.best_val_loss,
            "test": test_report.to_dict(),
            "split_sizes": {k: len(v) for k, v in split.parts().items()},
        },
    )
    _write_json(
        out / "train_config.json",
        {
            "command": "train",
            "manifest": str(args.manifest),
            "out": str(out),
            "train": config.to_dict(),
            "data": {
                "fractions": list(data_options["fractions"]),
                "split_mode": data_options["split_mode"],
                "overlap": data_options["overlap"],
            },
        },
    )
    print(
        f"{config.variant} W={config.window}: best epoch {result.best_epoch}, "
        f"validation accuracy {100 * result.best_val_accuracy:.2f}%, "
        f"test error {test_report.error_percent:.2f}%"
    )
    print(f"artifacts written to {out}")
    return 0


def _windows_for_evaluation(traces: list[VmTrace], window: int) -> list:
    samples = []
    for trace in traces:
        samples.extend(window_trace(trace, window, overlap_enabled=window > 64))
    if not samples:
        raise DataError(f"no trace is long enough for window {window}")
    return samples


def cmd_evaluate(args) -> int:
    net, normalizer = weights.load(args.weights)
    if normalizer is None:
        raise DataError(f"{args.weights}: weight file carries no input normalizer")
    traces = ingest_csv(args.manifest)
    samples = _windows_for_evaluation(traces, net.spec.window)
    samples = apply_normalizer(samples, normalizer)
    eval_report = evaluate(net, samples)

    print(
        f"{net.spec.variant} W={net.spec.window}: accuracy "
        f"{100 * eval_report.accuracy:.2f}%, error {eval_report.error_percent:.2f}% "
        f"over {len(samples)} windows"
    )
    print(f"confusion (rows=true, cols=predicted):\n{eval_report.confusion}")
    if args.out is not None:
        out = report.ensure_dir(args.out)
        _write_json(out / "eval_report.json", eval_report.to_dict())
        _write_json(
            out / "evaluate_config.json",
            {
                "command": "evaluate",
                "weights": str(args.weights),
                "manifest": str(args.manifest),
                "seed": args.seed,
            },
        )
        print(f"artifacts written to {out}")
    return 0


def cmd_classify(args) -> int:
    net, normalizer = weights.load(args.weights)
    if normalizer is None:
        raise DataError(f"{args.weights}: weight file carries no input normalizer")
    samples, dropped = read_trace_csv(args.csv)
    w = net.spec.window
    if samples.shape[0] < w:
        raise DataError(
            f"{args.csv}: trace has {samples.shape[0]} rows but the model "
            f"needs at least {w}"
        )

    starts = list(range(0, samples.shape[0] - w + 1, w))
    batch = np.stack([normalizer.apply(samples[s : s + w]) for s in starts])
    logits = net.forward(Tensor(batch), training=False)
    probs = softmax(logits).data
    preds = probs.argmax(axis=1)

    header = ["window_index", "start"] + [f"p_{name}" for name in CLASS_NAMES] + ["predicted"]
    rows = []
    for i, (start, p, pred) in enumerate(zip(starts, probs, preds)):
        rows.append(
            [str(i), str(start)]
            + [f"{v:.10f}" for v in p]
            + [CLASS_NAMES[pred]]
        )
    print(",".join(header))
    for row in rows:
        print(",".join(row))

    counts = np.bincount(preds, minlength=len(CLASS_NAMES))
    if counts[0] == counts[1]:
        majority = int(probs.mean(axis=0).argmax())
    else:
        majority = int(counts.argmax())
    print(
        f"majority vote: {CLASS_NAMES[majority]} "
        f"({counts[majority]}/{len(preds)} windows)"
    )

    if args.out is not None:
        out = report.ensure_dir(args.out)
        with open(out / "probabilities.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        _write_json(
            out / "classification.json",
            {
                "csv": str(args.csv),
                "weights": str(args.weights),
                "window": w,
                "majority_class": CLASS_NAMES[majority],
                "window_votes": {name: int(c) for name, c in zip(CLASS_NAMES, counts)},
            },
        )
        report.plot_window_probabilities(
            out / "probabilities.png", starts, probs, CLASS_NAMES
        )
        print(f"artifacts written to {out}")
    return 0


def cmd_compare(args) -> int:
    file_cfg = _load_json(args.config) if args.config else {}
    windows = args.windows or file_cfg.get("windows") or list(baselines.REFERENCE_WINDOWS)
    variants = args.variants or file_cfg.get("variants") or list(VARIANTS)
    windows = [int(w) for w in windows]
    base_config, data_options = _resolve_train_config(
        argparse.Namespace(window=windows[0], variant=None, seed=args.seed), file_cfg
    )

    traces = ingest_csv(args.manifest)
    result = sweep(traces, windows, variants, base_config,
                   split_mode=data_options["split_mode"])

    reference_rows = baselines.load_reference_rows()
    table = report.render_comparison_table(result, reference_rows, windows, variants)
    print(table)

    out = report.ensure_dir(args.out)
    (out / "comparison.txt").write_text(table + "\n")
    report.write_plot_data(out / "plot_data.csv", result)
    report.plot_accuracy_curves(out / "accuracy_vs_window.png", result, windows, variants)
    _write_json(
        out / "comparison.json",
        {
            "windows": windows,
            "variants": variants,
            "computed": [
                {
                    "variant": e.variant,
                    "window": e.window,
                    "accuracy": e.accuracy,
                    "error_percent": e.error_percent,
                    "best_epoch": e.best_epoch,
                    "seed": e.seed,
                }
                for e in result.entries
            ],
            "reference": [
                {
                    "method": r.method,
                    "kind": r.kind,
                    "approximate": r.approximate,
                    "values": {str(k): v for k, v in r.values.items()},
                }
                for r in reference_rows
            ],
        },
    )
    _write_json(
        out / "compare_config.json",
        {
            "command": "compare",
            "manifest": str(args.manifest),
            "out": str(out),
            "windows": windows,
            "variants": variants,
            "train": base_config.to_dict(),
            "data": {
                "fractions": list(data_options["fractions"]),
                "split_mode": data_options["split_mode"],
                "overlap": data_options["overlap"],
            },
        },
    )
    print(f"artifacts written to {out}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "classify": cmd_classify,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DataError, WeightFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Training loop, reduce-on-plateau scheduling, evaluation, and the sweep.

The protocol: Adam (lr 0.0003, weight decay 0.0012) on the mean cross
entropy, batches of 64 in a freshly shuffled order every epoch (short
final batch kept), exactly 110 epochs, learning rate multiplied by 0.6
whenever validation loss fails to improve for 10 consecutive epochs, and
the snapshot with the best validation accuracy is the model that gets
tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DatasetSplit, WindowSample, prepare_dataset
from .errors import ConfigError, DivergenceError
from .model import VARIANTS, ModelSpec, Network, build
from .nn.loss import cross_entropy_loss
from .nn.optim import AdamState, adam_step
from .nn.tensor import Tensor

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    window: int
    variant: str = "deepconv"
    learning_rate: float = 0.0003
    weight_decay: float = 0.0012
    batch_size: int = 64
    epochs: int = 110
    plateau_factor: float = 0.6
    plateau_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be > 0 and weight_decay >= 0")
        if not 0 < self.plateau_factor < 1:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if self.plateau_patience < 1:
            raise ConfigError("plateau_patience must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch statistics need variance)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "variant": self.variant,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "plateau_factor": self.plateau_factor,
            "plateau_patience": self.plateau_patience,
            "seed": self.seed,
        }


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience``
    consecutive epochs without a strictly lower validation loss.

    The first observation establishes the baseline and counts as a
    non-improving epoch (there is no earlier loss it could have decreased
    from), so a run with constant validation loss reduces exactly at
    epochs patience, 2*patience, 3*patience, ... The counter restarts on
    every improvement and after every reduction.
    """

    def __init__(self, initial_lr: float, factor: float = 0.6, patience: int = 10):
        self.lr = initial_lr
        self.factor = factor
        self.patience = patience
        self.best: float | None = None
        self.counter = 0
        self.reductions = 0

    def observe(self, loss: float) -> bool:
        """Record one epoch's validation loss; True if the lr was reduced."""
        improved = self.best is not None and loss < self.best
        if self.best is None or loss < self.best:
            self.best = loss
        if improved:
            self.counter = 0
            return False
        self.counter += 1
        if self.counter >= self.patience:
            self.lr *= self.factor
            self.reductions += 1
            self.counter = 0
            return True
        return False


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    learning_rate: float


@dataclass
class EvalReport:
    accuracy: float
    error_percent: float
    confusion: np.ndarray
    per_sample: list[tuple[tuple[str, int], int, int]]
    epoch_of_best: int | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "error_percent": self.error_percent,
            "confusion": self.confusion.tolist(),
            "epoch_of_best": self.epoch_of_best,
            "per_sample": [
                {"vm_id": origin[0], "start": origin[1], "predicted": pred, "true": true}
                for origin, pred, true in self.per_sample
            ],
        }


@dataclass
class TrainResult:
    network: Network
    history: list[EpochRecord]
    best_epoch: int
    best_val_accuracy: float
    best_val_loss: float


def _stack(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.window for s in samples])
    y = np.asarray([s.label for s in samples], dtype=np.intp)
    return x, y


def _forward_logits(net: Network, x: np.ndarray, batch: int = EVAL_BATCH) -> np.ndarray:
    outs = []
    for start in range(0, x.shape[0], batch):
        outs.append(net.forward(Tensor(x[start : start + batch]), training=False).data)
    return np.concatenate(outs, axis=0)


def _validation_metrics(net: Network, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    logits = _forward_logits(net, x)
    loss, _ = cross_entropy_loss(Tensor(logits), y)
    accuracy = float((logits.argmax(axis=1) == y).mean())
    return loss, accuracy


def train(split: DatasetSplit, config: TrainConfig) -> TrainResult:
    """Run the full protocol and return the best-on-validation snapshot.

    Deterministic for a given (split, config): the network init and the
    per-epoch shuffles derive from config.seed.
    """
    for name, part in split.parts().items():
        if not part:
            raise ConfigError(f"{name} split is empty")

    window, metrics = split.train[0].window.shape
    if window != config.window:
        raise ConfigError(
            f"split was windowed at W={window} but the config says W={config.window}"
        )
    n_classes = max(2, max(s.label for s in split.parts()["train"]) + 1)
    spec = ModelSpec(window=config.window, metrics=metrics, classes=n_classes,
                     variant=config.variant)

    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    net = build(spec, seed=int(init_ss.generate_state(1)[0]))
    shuffle_rng = np.random.default_rng(shuffle_ss)

    params = net.parameters()
    opt = AdamState.for_params(params, config.learning_rate, config.weight_decay)
    scheduler = PlateauScheduler(config.learning_rate, config.plateau_factor,
                                 config.plateau_patience)

    x_train, y_train = _stack(split.train)
    x_val, y_val = _stack(split.validation)
    n = x_train.shape[0]

    best_net: Network | None = None
    best_epoch = -1
    best_acc = -1.0
    best_loss = math.inf
    history: list[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            net.zero_grad()
            loss = net.backward(Tensor(x_train[idx]), y_train[idx])
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch starting at {start}"
                )
            opt.learning_rate = scheduler.lr
            adam_step(params, opt)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / n

        val_loss, val_acc = _validation_metrics(net, x_val, y_val)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        scheduler.observe(val_loss)
        history.append(EpochRecord(epoch, train_loss, val_loss, val_acc, scheduler.lr))

        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_net = net.copy()
            best_epoch = epoch
            best_acc = val_acc
            best_loss = val_loss

    assert best_net is not None
    return TrainResult(
        network=best_net,
        history=history,
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
        best_val_loss=best_loss,
    )


def evaluate(net: Network, samples: list[WindowSample]) -> EvalReport:
    """Eval-mode predictions and the confusion matrix over ``samples``."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    x, y = _stack(samples)
    logits = _forward_logits(net, x)
    preds = logits.argmax(axis=1)
    c = net.spec.classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for true, pred in zip(y, preds):
        confusion[true, pred] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    return EvalReport(
        accuracy=accuracy,
        error_percent=100.0 * (1.0 - accuracy),
        confusion=confusion,
        per_sample=[(s.origin, int(p), int(t)) for s, p, t in zip(samples, preds, y)],
    )


def derive_seed(base_seed: int, variant: str, window: int) -> int:
    """Stable per-(variant, window) seed for sweep runs."""
    ss = np.random.SeedSequence([base_seed, VARIANTS.index(variant), window])
    return int(ss.generate_state(1)[0])


@dataclass
class SweepEntry:
    variant: str
    window: int
    accuracy: float
    error_percent: float
    best_epoch: int
    seed: int


@dataclass
class SweepResult:
    entries: list[SweepEntry] = field(default_factory=list)

    def entry(self, variant: str, window: int) -> SweepEntry:
        for e in self.entries:
            if e.variant == variant and e.window == window:
                return e
        raise KeyError(f"no sweep entry for ({variant}, {window})")


def sweep(
    traces,
    windows: list[int],
    variants: list[str],
    base_config: TrainConfig,
    split_mode: str = "window",
) -> SweepResult:
    """Train and evaluate every (variant, window) pair.

    Each pair gets an independent seed derived from the base seed, so the
    result does not depend on execution order.
    """
    result = SweepResult()
    for variant in variants:
        for window in windows:
            seed = derive_seed(base_config.seed, variant, window)
            split = prepare_dataset(traces, window, seed=seed, split_mode=split_mode)
            config = replace(base_config, window=window, variant=variant, seed=seed)
            trained = train(split, config)
            report = evaluate(trained.network, split.test)
            result.entries.append(
                SweepEntry(
                    variant=variant,
                    window=window,
                    accuracy=report.accuracy,
                    error_percent=report.error_percent,
                    best_epoch=trained.best_epoch,
                    seed=seed,
                )
            )
    return result

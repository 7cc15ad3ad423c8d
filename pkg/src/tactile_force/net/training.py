"""Training loop: Adam with the warm-up/decay schedule and best-validation
parameter keeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalError
from .losses import LossConfig, batch_loss_and_grad
from .network import Model


@dataclass(frozen=True)
class TrainingConfig:
    max_epochs: int = 200
    batch_size: int = 512
    base_lr: float = 1e-4
    lr_floor: float = 1e-8
    warmup_epochs: int = 2
    warmup_doubling_iters: int = 50
    decay_factor: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ConfigError(f"base learning rate must be positive, got {self.base_lr}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")

    def to_dict(self) -> dict:
        return {
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "base_lr": self.base_lr,
            "lr_floor": self.lr_floor,
            "warmup_epochs": self.warmup_epochs,
            "warmup_doubling_iters": self.warmup_doubling_iters,
            "decay_factor": self.decay_factor,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class LearningRateSchedule:
    """Warm-up then geometric decay.

    While epoch < warmup_epochs the rate is base_lr * 2^ceil(i / 50) with i
    the global iteration count; afterwards the running rate is multiplied by
    0.95 every iteration, floored at lr_floor.
    """

    def __init__(self, config: TrainingConfig):
        self.config = config
        self._iteration = 0
        self._rate = config.base_lr

    def step(self, epoch: int) -> float:
        """Advance one iteration and return the rate to use for it."""
        self._iteration += 1
        cfg = self.config
        if epoch < cfg.warmup_epochs:
            self._rate = cfg.base_lr * 2.0 ** math.ceil(
                self._iteration / cfg.warmup_doubling_iters
            )
        else:
            self._rate = max(self._rate * cfg.decay_factor, cfg.lr_floor)
        return self._rate

    @property
    def rate(self) -> float:
        return self._rate


class AdamOptimizer:
    """Adam over a model's parameter list (decay 0.9/0.999, eps 1e-8)."""

    def __init__(self, model: Model, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.model = model
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in model.parameters()]
        self._v = [np.zeros_like(p.value) for p in model.parameters()]

    def step(self, lr: float) -> None:
        self.t += 1
        for i, p in enumerate(self.model.parameters()):
            self._m[i] = self.beta1 * self._m[i] + (1 - self.beta1) * p.grad
            self._v[i] = self.beta2 * self._v[i] + (1 - self.beta2) * p.grad**2
            m_hat = self._m[i] / (1 - self.beta1**self.t)
            v_hat = self._v[i] / (1 - self.beta2**self.t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class ArraySamples:
    """Featurized samples ready for the model: inputs plus loss context."""

    inputs: np.ndarray
    f_3d: np.ndarray
    s_n: np.ndarray
    r_wb: np.ndarray
    source_tags: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def take(self, idx: np.ndarray) -> "ArraySamples":
        return ArraySamples(
            inputs=self.inputs[idx],
            f_3d=self.f_3d[idx],
            s_n=self.s_n[idx],
            r_wb=self.r_wb[idx],
            source_tags=self.source_tags[idx],
        )


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    skipped_train: int = 0
    skipped_val: int = 0
    iterations: int = 0


def evaluate_loss(
    model: Model, samples: ArraySamples, loss_config: LossConfig, batch_size: int = 512
) -> tuple[float, int]:
    """Mean loss over a sample set, batched; returns (loss, n_skipped)."""
    total, count, skipped = 0.0, 0, 0
    for start in range(0, len(samples), batch_size):
        batch = samples.take(np.arange(start, min(start + batch_size, len(samples))))
        pred = model.forward(batch.inputs)
        loss, _, n_skip = batch_loss_and_grad(
            pred, batch.f_3d, batch.s_n, batch.r_wb, batch.source_tags, loss_config
        )
        included = len(batch) - n_skip
        total += loss * included
        count += included
        skipped += n_skip
    if count == 0:
        raise ConfigError("no usable samples above the magnitude floor")
    return total / count, skipped


def train(
    model: Model,
    train_samples: ArraySamples,
    val_samples: ArraySamples,
    loss_config: LossConfig,
    config: TrainingConfig,
    log_every: int = 0,
) -> TrainReport:
    """Optimize the model, keeping the parameters with the best validation loss.

    The model is left holding the best-validation parameters. Raises
    NumericalError if the validation loss goes non-finite.
    """
    if len(val_samples) == 0:
        raise ConfigError("validation set is empty")
    if len(train_samples) == 0:
        raise ConfigError("training set is empty")
    rng = np.random.default_rng(config.seed)
    optimizer = AdamOptimizer(model)
    schedule = LearningRateSchedule(config)
    report = TrainReport()
    best_state = model.get_state()

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_samples))
        epoch_loss, epoch_count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = train_samples.take(order[start : start + config.batch_size])
            model.zero_grad()
            pred = model.forward(batch.inputs)
            loss, grad, n_skip = batch_loss_and_grad(
                pred, batch.f_3d, batch.s_n, batch.r_wb, batch.source_tags, loss_config
            )
            model.backward(grad)
            optimizer.step(schedule.step(epoch))
            included = len(batch) - n_skip
            epoch_loss += loss * included
            epoch_count += included
            report.skipped_train += n_skip
            report.iterations += 1
        report.train_losses.append(epoch_loss / max(epoch_count, 1))

        val_loss, val_skip = evaluate_loss(model, val_samples, loss_config, config.batch_size)
        report.skipped_val = val_skip
        if not math.isfinite(val_loss):
            raise NumericalError(
                f"validation loss became non-finite at epoch {epoch} "
                f"(train loss {report.train_losses[-1]:.6g})"
            )
        report.val_losses.append(val_loss)
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_state = model.get_state()
        if log_every and (epoch + 1) % log_every == 0:
            print(
                f"epoch {epoch + 1}/{config.max_epochs} "
                f"train {report.train_losses[-1]:.5f} val {val_loss:.5f} "
                f"lr {schedule.rate:.2e}"
            )

    model.set_state(best_state)
    return report

"""Learning-rate schedule, optimizer determinism, and a learnability smoke test."""

import math

import numpy as np
import pytest

from tactile_force.errors import ConfigError, NumericalError
from tactile_force.net import (
    LossConfig,
    LearningRateSchedule,
    TrainingConfig,
    build_mlp_net,
    train,
)
from tactile_force.net.training import ArraySamples


def make_samples(inputs, f_3d):
    n = inputs.shape[0]
    s_n = f_3d / np.linalg.norm(f_3d, axis=1, keepdims=True)
    return ArraySamples(
        inputs=inputs,
        f_3d=f_3d,
        s_n=s_n,
        r_wb=np.stack([np.eye(3)] * n),
        source_tags=np.array(["rigid_ft"] * n),
    )


class TestSchedule:
    def test_first_iteration_doubles(self):
        sched = LearningRateSchedule(TrainingConfig(base_lr=1e-4))
        assert math.isclose(sched.step(epoch=0), 2e-4)

    def test_iteration_fifty_still_first_doubling(self):
        sched = LearningRateSchedule(TrainingConfig(base_lr=1e-4))
        rate = None
        for _ in range(50):
            rate = sched.step(epoch=0)
        assert math.isclose(rate, 2e-4)  # ceil(50/50) == 1
        assert math.isclose(sched.step(epoch=0), 4e-4)  # ceil(51/50) == 2

    def test_decay_after_warmup(self):
        sched = LearningRateSchedule(TrainingConfig(base_lr=1e-4))
        for _ in range(10):
            sched.step(epoch=0)
        rate_end = sched.rate
        first = sched.step(epoch=2)
        second = sched.step(epoch=2)
        assert math.isclose(first, rate_end * 0.95)
        assert math.isclose(second, rate_end * 0.95**2)

    def test_floor(self):
        sched = LearningRateSchedule(TrainingConfig(base_lr=1e-4, lr_floor=1e-8))
        sched.step(epoch=0)
        for _ in range(600):
            rate = sched.step(epoch=5)
        assert rate == 1e-8


class TestTrain:
    def test_learnability_on_linear_map(self):
        # 200 samples from a fixed linear map: the loss should collapse
        rng = np.random.default_rng(0)
        mix = rng.normal(size=(6, 3))
        forces = rng.normal(size=(250, 3)) * 2.0 + np.array([0.0, 0.0, 3.0])
        inputs = forces @ mix.T
        samples = make_samples(inputs, forces)
        train_set = samples.take(np.arange(200))
        val_set = samples.take(np.arange(200, 250))
        model = build_mlp_net(6, (32, 16), seed=0)
        config = TrainingConfig(
            max_epochs=50, batch_size=32, base_lr=6e-3, decay_factor=0.9995, seed=0
        )
        report = train(model, train_set, val_set, LossConfig(beta=0.0), config)
        assert report.val_losses[-1] < 0.1 * report.val_losses[0]
        assert min(report.val_losses) == report.best_val_loss

    def test_deterministic_loss_curves(self):
        rng = np.random.default_rng(1)
        forces = rng.normal(size=(80, 3)) + np.array([0.0, 0.0, 2.0])
        inputs = forces @ rng.normal(size=(5, 3)).T
        samples = make_samples(inputs, forces)
        tr, va = samples.take(np.arange(60)), samples.take(np.arange(60, 80))

        def run():
            model = build_mlp_net(5, (8,), seed=3)
            report = train(
                model, tr, va, LossConfig(beta=1.0),
                TrainingConfig(max_epochs=5, batch_size=16, seed=3),
            )
            return report.train_losses, report.val_losses

        first, second = run(), run()
        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_empty_validation_rejected(self):
        rng = np.random.default_rng(2)
        forces = rng.normal(size=(10, 3)) + 2.0
        samples = make_samples(forces, forces)
        model = build_mlp_net(3, (4,), seed=0)
        with pytest.raises(ConfigError):
            train(
                model, samples, samples.take(np.array([], dtype=int)),
                LossConfig(), TrainingConfig(max_epochs=1),
            )

    def test_nan_validation_aborts_with_diagnostic(self):
        rng = np.random.default_rng(3)
        forces = rng.normal(size=(20, 3)) + 2.0
        samples = make_samples(forces, forces)
        model = build_mlp_net(3, (4,), seed=0)
        # poison one weight so the forward pass explodes
        model.parameters()[0].value[:] = 1e308
        with pytest.raises((NumericalError, FloatingPointError)):
            train(
                model, samples.take(np.arange(15)), samples.take(np.arange(15, 20)),
                LossConfig(), TrainingConfig(max_epochs=2, batch_size=8),
            )

    def test_best_parameters_restored(self):
        rng = np.random.default_rng(4)
        forces = rng.normal(size=(60, 3)) + np.array([0.0, 0.0, 2.0])
        inputs = forces @ rng.normal(size=(4, 3)).T
        samples = make_samples(inputs, forces)
        tr, va = samples.take(np.arange(45)), samples.take(np.arange(45, 60))
        model = build_mlp_net(4, (8,), seed=1)
        report = train(
            model, tr, va, LossConfig(beta=0.0),
            TrainingConfig(max_epochs=8, batch_size=16, base_lr=5e-3, seed=1),
        )
        from tactile_force.net.training import evaluate_loss

        final_val, _ = evaluate_loss(model, va, LossConfig(beta=0.0))
        assert math.isclose(final_val, report.best_val_loss, rel_tol=1e-12)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainingConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainingConfig(base_lr=-1.0)

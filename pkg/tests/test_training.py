import numpy as np
import pytest

from bankgcn.checks import random_graph
from bankgcn.errors import ConfigError, TrainingFault
from bankgcn.graph import batch_graphs, build_graph
from bankgcn.model import ModelParams, init_model, objective, total_omega
from bankgcn.training import (
    AdamState,
    LRDecay,
    TrainConfig,
    adam_step,
    best_epoch,
    evaluate,
    loss_and_gradients,
    train,
)
from conftest import make_graphs


def head_only(theta):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return ModelParams([], np.zeros((0, theta.size)), theta.copy())


def toy_graphs(rng, count):
    """Class is written in the features: trivially separable."""
    out = []
    for k in range(count):
        label = k % 2
        g = random_graph(rng, int(rng.integers(4, 9)), d=2, label=label)
        X = np.zeros((g.n, 2))
        X[:, label] = 1.0
        out.append(g.with_features(X))
    return out


def strip_time(history):
    return [{k: v for k, v in rec.items() if k != "elapsed_s"} for rec in history]


class TestConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.learning_rate, c.batch_size, c.max_epochs, c.patience) == (1e-3, 64, 500, 30)

    @pytest.mark.parametrize(
        "kw", [{"patience": 0}, {"learning_rate": 0.0}, {"batch_size": 0}, {"weight_decay": -1.0}, {"seed": -1}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)


class TestGradients:
    def test_zero_params_head_bias(self, rng):
        m = init_model(3, 3, widths=(4, 4), s=2, K=1)
        for layer in m.layers:
            layer.W[:] = 0
            layer.alpha[:] = 0
        m.head_W[:] = 0
        gs = [random_graph(rng, 5, d=3, label=k) for k in (0, 1, 1, 2)]
        _, grads = loss_and_gradients(m, batch_graphs(gs))
        y = np.eye(3)[[0, 1, 1, 2]]
        np.testing.assert_allclose(grads["head.b"], (1 / 3 - y).mean(axis=0), atol=1e-15)

    def test_duplicate_graph(self, rng):
        m = init_model(3, 2, widths=(4, 4), s=2, K=2, gamma=0.1)
        g = random_graph(rng, 7, d=3, label=1)
        t1, g1 = loss_and_gradients(m, batch_graphs([g]))
        t2, g2 = loss_and_gradients(m, batch_graphs([g, g]))
        assert t1 == pytest.approx(t2, abs=1e-14)
        for name in g1:
            np.testing.assert_allclose(g2[name], g1[name], atol=1e-13)

    def test_total_matches_objective(self, rng):
        m = init_model(3, 2, widths=(8, 8), s=4, K=2, gamma=10.0)
        b = batch_graphs(make_graphs(rng, 4))
        assert loss_and_gradients(m, b)[0] == pytest.approx(objective(m, b)[0], abs=1e-14)

    def test_grad_shapes(self, rng):
        m = init_model(3, 2, widths=(8, 8), s=4, K=2)
        _, grads = loss_and_gradients(m, batch_graphs(make_graphs(rng, 2)))
        tensors = m.tensors(trainable_only=True)
        assert list(grads) == list(tensors)
        for name in grads:
            assert grads[name].shape == tensors[name].shape

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite(self, rng):
        m = init_model(3, 2, widths=(4,), s=2, K=1)
        m.head_W[:] = np.inf
        with pytest.raises(TrainingFault):
            loss_and_gradients(m, batch_graphs(make_graphs(rng, 2)))


class TestAdam:
    def test_first_step(self):
        p = head_only([0.5])
        adam_step(AdamState(), p, {"head.b": np.array([1.0])}, TrainConfig())
        assert abs((p.head_b[0] - 0.5) + 1e-3) < 1e-6

    def test_zero_gradient(self):
        p = head_only([0.5, -2.0])
        adam_step(AdamState(), p, {"head.b": np.zeros(2)}, TrainConfig())
        np.testing.assert_array_equal(p.head_b, [0.5, -2.0])

    def test_quadratic_descent(self):
        p = head_only([1.0])
        state, cfg = AdamState(), TrainConfig(learning_rate=0.1)
        f = [0.5 * p.head_b[0] ** 2]
        for _ in range(2):
            adam_step(state, p, {"head.b": p.head_b.copy()}, cfg)
            f.append(0.5 * p.head_b[0] ** 2)
        assert f[0] > f[1] > f[2]

    def test_weight_decay_skips_alpha(self):
        m = init_model(2, 2, widths=(4,), s=2, K=1)
        before = m.copy()
        grads = {k: np.zeros_like(v) for k, v in m.tensors(trainable_only=True).items()}
        adam_step(AdamState(), m, grads, TrainConfig(learning_rate=0.1, weight_decay=1e-4))
        np.testing.assert_array_equal(m.layers[0].alpha, before.layers[0].alpha)
        np.testing.assert_allclose(m.layers[0].W, before.layers[0].W * (1 - 1e-5))

    def test_frozen_alpha_untouched(self, rng):
        m = init_model(3, 2, widths=(4, 4), frozen_lowpass=True)
        alpha = [l.alpha.copy() for l in m.layers]
        best, _ = train(m, (make_graphs(rng, 6), make_graphs(rng, 2)), TrainConfig(max_epochs=3, batch_size=2))
        for a, layer in zip(alpha, best.layers):
            np.testing.assert_array_equal(layer.alpha, a)


class TestOptimizationProperties:
    def test_objective_descent(self, rng):
        m = init_model(3, 2, widths=(8, 8), s=2, K=2, gamma=0.1)
        b = batch_graphs(make_graphs(rng, 8))
        state, cfg = AdamState(), TrainConfig(learning_rate=1e-3)
        values = [loss_and_gradients(m, b)[0]]
        for _ in range(20):
            _, grads = loss_and_gradients(m, b)
            adam_step(state, m, grads, cfg)
            values.append(objective(m, b)[0])
        assert int(np.sum(np.diff(values) < 0)) >= 18

    def test_diversity_decreases_from_colinear(self, rng):
        m = init_model(3, 2, widths=(8, 8), s=4, K=2, gamma=10.0)
        for layer in m.layers:
            v = rng.standard_normal(3)
            layer.alpha[:] = np.outer(rng.uniform(0.5, 2.0, 4), v)
        b = batch_graphs(make_graphs(rng, 6))
        start = total_omega(m)
        assert start == pytest.approx(2.0, abs=1e-9)
        state, cfg = AdamState(), TrainConfig(learning_rate=1e-2, gamma=10.0)
        for _ in range(100):
            _, grads = loss_and_gradients(m, b)
            adam_step(state, m, grads, cfg)
        assert total_omega(m) < start


class TestTrain:
    def test_toy_separable(self, rng):
        tr, va = toy_graphs(rng, 40), toy_graphs(rng, 10)
        m = init_model(2, 2, widths=(8, 8), s=2, K=1, seed=3)
        _, history = train(m, (tr, va), TrainConfig(learning_rate=1e-2, batch_size=8, max_epochs=49, patience=49))
        assert any(rec["val_acc"] == 1.0 for rec in history)

    def test_deterministic(self, rng):
        tr, va = make_graphs(rng, 12), make_graphs(rng, 4)
        m = init_model(3, 2, widths=(8, 8), s=2, K=2, seed=1)
        cfg = TrainConfig(max_epochs=4, batch_size=5, gamma=0.1, seed=9)
        p1, h1 = train(m, (tr, va), cfg)
        p2, h2 = train(m, (tr, va), cfg)
        assert strip_time(h1) == strip_time(h2)
        for k, v in p1.tensors().items():
            np.testing.assert_array_equal(v, p2.tensors()[k])

    def test_history_fields_and_best(self, rng):
        tr, va = make_graphs(rng, 8), make_graphs(rng, 4)
        best, history = train(init_model(3, 2, widths=(4,), s=2), (tr, va), TrainConfig(max_epochs=5))
        assert set(history[0]) == {"epoch", "train_loss", "omega", "val_loss", "val_acc", "lr", "elapsed_s"}
        assert [r["epoch"] for r in history] == [1, 2, 3, 4, 5]
        rec = history[best_epoch(history) - 1]
        assert evaluate(best, va)[0] == rec["val_acc"]

    def test_early_stopping(self, rng):
        tr, va = make_graphs(rng, 8), make_graphs(rng, 4)
        _, history = train(init_model(3, 2, widths=(4,), s=2), (tr, va), TrainConfig(max_epochs=200, patience=3))
        assert len(history) < 200
        assert len(history) - best_epoch(history) >= 3 or len(history) == 200

    def test_lr_decay_on_plateau(self):
        tr = [build_graph(1, [], [[1.0]], label=0) for _ in range(4)]
        va = [build_graph(1, [], [[1.0]], label=1) for _ in range(2)]
        cfg = TrainConfig(
            learning_rate=0.1, max_epochs=8, patience=50, lr_decay=LRDecay(factor=0.1, plateau_patience=2, min_lr=1e-3)
        )
        _, history = train(head_only([0.0, 0.0]), (tr, va), cfg)
        lrs = [r["lr"] for r in history]
        assert lrs[:3] == [0.1] * 3
        assert lrs[3] == pytest.approx(0.01)
        assert lrs[-1] == pytest.approx(1e-3)

    def test_empty_split(self, rng):
        with pytest.raises(ConfigError):
            train(init_model(3, 2, widths=(4,), s=2), (make_graphs(rng, 2), []), TrainConfig())


class TestEvaluate:
    def test_all_correct(self):
        gs = [build_graph(1, [], [[1.0]], label=1) for _ in range(3)]
        acc, conf = evaluate(head_only([0.0, 5.0]), gs)
        assert acc == 1.0
        np.testing.assert_array_equal(conf, [[0, 0], [0, 3]])

    def test_random_head_near_half(self, rng):
        gs = make_graphs(rng, 400, n=6)
        m = init_model(3, 2, widths=(8,), s=2, seed=5)
        m.head_W[:] = rng.uniform(-1, 1, m.head_W.shape)
        acc, conf = evaluate(m, gs)
        assert abs(acc - 0.5) <= 3 * np.sqrt(0.25 / 400)
        np.testing.assert_array_equal(conf.sum(axis=1), [200, 200])

    def test_empty(self):
        with pytest.raises(ConfigError):
            evaluate(head_only([0.0]), [])

import numpy as np
import pytest

from bankgcn.graph import batch_graphs
from bankgcn.gradcheck import (
    DEFAULT_STEP,
    DEFAULT_TOL,
    _sample_coordinates,
    central_difference,
    finite_difference_check,
    relative_error,
)
from bankgcn.model import init_model
from conftest import make_graphs


def instance(rng, gamma=0.0, s=4, K=2):
    params = init_model(3, 3, widths=(8, 8, 8, 8), s=s, K=K, gamma=gamma, seed=int(rng.integers(1 << 30)))
    return params, batch_graphs(make_graphs(rng, 3, num_classes=3))


class TestHarness:
    def test_scalar_probe(self):
        assert central_difference(lambda t: t * t, 1.0) == pytest.approx(2.0, abs=1e-8)

    def test_relative_error(self):
        assert relative_error(1.0, 1.0) == 0.0
        assert relative_error(0.1, 0.0) == pytest.approx(0.1)
        assert relative_error(110.0, 100.0) == pytest.approx(0.1)

    def test_defaults(self):
        assert (DEFAULT_STEP, DEFAULT_TOL) == (1e-5, 1e-4)

    @pytest.mark.parametrize("step", [1e-8, 1e-2])
    def test_step_range(self, rng, step):
        with pytest.raises(ValueError):
            finite_difference_check(*instance(rng), step=step)

    def test_sample_covers_every_tensor(self, rng):
        params, _ = instance(rng)
        tensors = params.tensors(trainable_only=True)
        picks, spare = _sample_coordinates(tensors, 200, rng)
        assert len(picks) >= 200
        assert {name for name, _ in picks} == set(tensors)
        assert not set(picks) & set(spare)


class TestModelGradients:
    @pytest.mark.parametrize("gamma", [0.0, 10.0])
    @pytest.mark.parametrize("s,K", [(1, 1), (4, 3)])
    def test_passes(self, rng, gamma, s, K):
        rep = finite_difference_check(*instance(rng, gamma, s, K))
        assert rep.passed, rep.describe()
        assert rep.n_checked >= 200
        assert rep.max_rel_error <= 1e-4

    def test_frozen_filters(self, rng):
        params = init_model(3, 3, widths=(8, 8), frozen_lowpass=True, seed=2)
        rep = finite_difference_check(params, batch_graphs(make_graphs(rng, 3, num_classes=3)))
        assert rep.passed, rep.describe()

    def test_injected_fault_detected(self, rng):
        rep = finite_difference_check(*instance(rng), fault=1e-2)
        assert not rep.passed
        assert len(rep.failures) == 1
        name, idx, analytic, numeric, err = rep.failures[0]
        assert err >= 1e-2 / max(1.0, abs(numeric)) - 1e-6
        assert "FAILED" in rep.describe() and name in rep.describe()

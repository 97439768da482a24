import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bankgcn.checks import random_graph
from bankgcn.errors import DimensionError
from bankgcn.graph import batch_graphs, permute_graph
from bankgcn.layer import (
    PAPER_TABLE,
    PER_SUBSPACE,
    BankLayerParams,
    bank_forward,
    bank_layer_param_count,
    diversity_penalty,
    diversity_penalty_and_grad,
    init_bank_layer,
    subspace_project,
)
from bankgcn.spectral import FilterCoeffs, eig_laplacian, spectral_filter_oracle


def straight_line(params, g, X):
    basis = eig_laplacian(g)
    parts = subspace_project(params, X)
    H = np.hstack([spectral_filter_oracle(basis, a, R) + R for a, R in zip(params.alpha, parts)])
    Z = np.maximum(H, 0.0)
    n = np.linalg.norm(Z, axis=1, keepdims=True)
    return np.divide(Z, n, out=np.zeros_like(Z), where=n > 0)


def layer(d_in, d_out, s, K, seed=0):
    return init_bank_layer(d_in, d_out, s, K, np.random.default_rng(seed))


class TestParams:
    def test_shapes(self):
        p = layer(5, 12, 3, 2)
        assert (p.d_in, p.d_out, p.s, p.K, p.width) == (5, 12, 3, 2, 4)
        assert len(p.proj_W) == 3 and p.proj_W[0].shape == (5, 4)
        assert all(isinstance(f, FilterCoeffs) for f in p.filters)

    def test_indivisible(self):
        with pytest.raises(DimensionError):
            BankLayerParams(np.zeros((2, 5)), np.zeros(5), np.zeros((2, 3)))
        with pytest.raises(DimensionError):
            init_bank_layer(2, 5, 2, 1, np.random.default_rng(0))

    def test_non_finite(self):
        with pytest.raises(DimensionError):
            BankLayerParams(np.full((2, 2), np.nan), np.zeros(2), np.zeros((1, 2)))

    def test_single_channel_input(self):
        p = layer(1, 8, 2, 2)
        assert p.s == 8 and p.width == 1

    def test_init_ranges(self):
        p = layer(64, 64, 8, 2)
        assert np.abs(p.W).max() <= np.sqrt(6 / (64 + 8))
        assert np.all(p.b == 0)
        assert np.abs(p.alpha).max() <= 1 / np.sqrt(3)


class TestProject:
    def test_identity(self, rng):
        X = rng.standard_normal((4, 3))
        p = BankLayerParams(np.eye(3), np.zeros(3), np.zeros((1, 2)))
        np.testing.assert_array_equal(subspace_project(p, X)[0], X)

    def test_bias_only(self, rng):
        p = BankLayerParams(np.zeros((3, 4)), np.ones(4), np.zeros((2, 2)))
        for R in subspace_project(p, rng.standard_normal((5, 3))):
            np.testing.assert_array_equal(R, np.ones((5, 2)))

    def test_dense(self, rng):
        p = layer(3, 6, 3, 1)
        p.b[:] = rng.standard_normal(6)
        X = rng.standard_normal((7, 3))
        for k, R in enumerate(subspace_project(p, X)):
            np.testing.assert_allclose(R, X @ p.W[:, 2 * k : 2 * k + 2] + p.b[2 * k : 2 * k + 2])

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            subspace_project(layer(3, 4, 2, 1), np.zeros((2, 4)))


class TestForward:
    def test_shortcut_only(self, rng):
        g = random_graph(rng, 6, d=3)
        X = np.abs(rng.standard_normal((6, 3)))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        p = BankLayerParams(np.eye(3), np.zeros(3), np.zeros((1, 3)))
        np.testing.assert_allclose(bank_forward(p, g, X), X, atol=1e-15)

    def test_p2(self, p2):
        p = BankLayerParams([[1.0]], [0.0], [[1.0, -1.0, 0.0]])
        np.testing.assert_allclose(bank_forward(p, p2, [[1.0], [0.0]]), [[1.0], [1.0]])

    def test_straight_line_oracle(self, rng):
        for s, K in [(1, 0), (2, 1), (4, 3)]:
            g = random_graph(rng, int(rng.integers(1, 13)), d=3)
            p = layer(3, 8, s, K, seed=int(rng.integers(1000)))
            p.b[:] = 0.1 * rng.standard_normal(8)
            np.testing.assert_allclose(bank_forward(p, g, g.features), straight_line(p, g, g.features), atol=1e-10)

    def test_permutation(self, rng):
        g = random_graph(rng, 10, d=4)
        perm = rng.permutation(10)
        p = layer(4, 8, 4, 2)
        np.testing.assert_allclose(
            bank_forward(p, permute_graph(g, perm), g.features[perm]), bank_forward(p, g, g.features)[perm], atol=1e-10
        )

    def test_batch(self, rng):
        gs = [random_graph(rng, int(rng.integers(1, 9)), d=4) for _ in range(4)]
        p = layer(4, 8, 2, 3)
        b = batch_graphs(gs)
        stacked = np.vstack([bank_forward(p, g, g.features) for g in gs])
        np.testing.assert_allclose(bank_forward(p, b, b.merged.features), stacked, atol=1e-10)

    def test_row_norms(self, rng):
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(1, 13)), d=3)
            norms = np.linalg.norm(bank_forward(layer(3, 4, 2, 2, int(rng.integers(99))), g, g.features), axis=1)
            assert np.all((norms == 0) | (np.abs(norms - 1) <= 1e-9))

    def test_subspace_decoupling(self, rng):
        g = random_graph(rng, 8, d=3)
        p = layer(3, 6, 3, 2)
        p.b[:] = rng.standard_normal(6)
        from bankgcn.layer import bank_forward_cached

        H_full = bank_forward_cached(p, g, g.features)[1].H
        q = p.copy()
        for k in (0, 2):
            q.W[:, 2 * k : 2 * k + 2] = 0
            q.b[2 * k : 2 * k + 2] = 0
            q.alpha[k] = 0
        H = bank_forward_cached(q, g, g.features)[1].H
        np.testing.assert_array_equal(H[:, [0, 1, 4, 5]], 0.0)
        np.testing.assert_allclose(H[:, 2:4], H_full[:, 2:4], atol=1e-14)

    def test_mismatch(self, p2):
        with pytest.raises(DimensionError):
            bank_forward(layer(2, 2, 1, 1), p2, np.zeros((2, 1)))


class TestDiversity:
    def test_examples(self):
        assert diversity_penalty([FilterCoeffs([1, 0, 0]), FilterCoeffs([0, 1, 0])]) == 0.0
        assert diversity_penalty([[1, 1, 0], [2, 2, 0]]) == pytest.approx(1.0, abs=1e-11)
        assert diversity_penalty([[1, 0, 0], [0, 1, 0], [1, 1, 0]]) == pytest.approx(1 / np.sqrt(2), abs=1e-11)

    def test_single_filter(self):
        assert diversity_penalty([[3.0, 1.0]]) == 0.0

    def test_zero_norm(self):
        assert diversity_penalty([[0.0, 0.0], [1.0, 2.0]]) == 0.0

    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 5)), elements=st.floats(-1e6, 1e6)))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, alpha):
        w = diversity_penalty(alpha)
        assert 0.0 <= w <= 1.0

    def test_orthogonal_exact_zero(self, rng):
        assert diversity_penalty(np.eye(5) * rng.uniform(0.1, 10, size=(5, 1))) == 0.0
        hadamard = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=float)
        assert diversity_penalty(hadamard * 0.5) == 0.0

    def test_tie_picks_first_pair(self):
        _, grad, pair = diversity_penalty_and_grad(np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]))
        assert pair == (0, 1)
        assert np.all(grad[2] == 0)

    def test_gradient_fd(self, rng):
        A = rng.standard_normal((4, 3))
        w, grad, _ = diversity_penalty_and_grad(A)
        h = 1e-6
        for idx in np.ndindex(A.shape):
            Ap, Am = A.copy(), A.copy()
            Ap[idx] += h
            Am[idx] -= h
            fd = (diversity_penalty(Ap) - diversity_penalty(Am)) / (2 * h)
            assert grad[idx] == pytest.approx(fd, abs=1e-7)


class TestParamCount:
    def test_per_subspace(self):
        assert bank_layer_param_count(layer(64, 64, 8, 2), PER_SUBSPACE) == 4184

    @pytest.mark.parametrize("K,expected", [(1, 4162), (2, 4163), (3, 4164), (4, 4165)])
    def test_table_convention(self, K, expected):
        assert bank_layer_param_count(layer(64, 64, 8, K), PAPER_TABLE) == expected

    def test_frozen(self):
        assert bank_layer_param_count(layer(64, 64, 1, 2), PER_SUBSPACE, frozen_filters=True) == 4160

    def test_unknown(self):
        with pytest.raises(ValueError):
            bank_layer_param_count(layer(2, 2, 1, 1), "bogus")

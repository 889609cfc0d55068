import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fetaprune.numerics import ValidationError, make_rng
from fetaprune.regularizers import (
    Regularizer, penalty, prox, singular_value_threshold, soft_threshold)


def prox_objective(reg, v, step):
    return lambda x: 0.5 * np.sum((x - v) ** 2) + step * reg.penalty(x)


class TestPenalty:
    def test_l1(self):
        assert penalty(Regularizer("l1", 2.0), np.array([[1.0, -1.0]])) == 4.0

    def test_nuclear_diag(self):
        assert penalty(Regularizer("nuclear", 1.0), np.diag([3.0, 1.0])) == pytest.approx(4.0)

    def test_none(self):
        assert Regularizer().penalty(np.ones((3, 3))) == 0.0

    def test_unpenalized_rows(self):
        reg = Regularizer("l1", 1.0, unpenalized_rows=1)
        assert reg.penalty(np.array([[1.0, 2.0], [10.0, 10.0]])) == 3.0

    def test_negative_lambda(self):
        with pytest.raises(ValidationError):
            Regularizer("l1", -1.0)
        with pytest.raises(ValidationError):
            Regularizer("group", 1.0)


class TestProxClosedForm:
    def test_soft_threshold_example(self):
        np.testing.assert_array_equal(soft_threshold(np.array([3.0, -0.5, 1.0]), 1.0),
                                      [2.0, 0.0, 0.0])

    def test_grid_minimisation_oracle(self):
        # 1-D grid search on each coordinate of the separable L1 prox objective
        v = np.array([3.0, -0.5, 1.0, -2.2])
        grid = np.arange(-4.0, 4.0, 1e-4)
        for vi, out in zip(v, soft_threshold(v, 1.0)):
            best = grid[np.argmin(0.5 * (grid - vi) ** 2 + np.abs(grid))]
            assert out == pytest.approx(best, abs=1e-4)

    def test_nuclear_diag(self):
        out = prox(Regularizer("nuclear", 1.0), np.diag([3.0, 1.0]), 1.0)
        np.testing.assert_allclose(out, np.diag([2.0, 0.0]), atol=1e-12)

    @pytest.mark.parametrize("kind", ["none", "l1", "nuclear"])
    def test_zero_lambda_identity(self, kind):
        v = make_rng(0).standard_normal((4, 3))
        np.testing.assert_array_equal(prox(Regularizer(kind, 0.0), v, 0.7), v)

    def test_tie_goes_to_zero(self):
        assert soft_threshold(np.array([1.0]), 1.0)[0] == 0.0

    def test_bias_row_untouched(self):
        reg = Regularizer("l1", 10.0, unpenalized_rows=1)
        v = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(reg.prox(v, 1.0), [[0.0, 0.0], [3.0, 4.0]])
        reg = Regularizer("nuclear", 100.0, unpenalized_rows=1)
        np.testing.assert_array_equal(reg.prox(v, 1.0)[1], [3.0, 4.0])

    def test_step_must_be_positive(self):
        with pytest.raises(ValidationError):
            Regularizer("l1", 1.0).prox(np.ones((2, 2)), 0.0)

    def test_svt_matches_definition(self):
        v = make_rng(1).standard_normal((5, 3))
        u, s, vt = np.linalg.svd(v, full_matrices=False)
        expect = (u * np.maximum(s - 0.5, 0)) @ vt
        np.testing.assert_allclose(singular_value_threshold(v, 0.5), expect, atol=1e-12)


class TestProxProperties:
    @pytest.mark.parametrize("kind", ["l1", "nuclear"])
    def test_optimality_probe(self, kind):
        rng = make_rng(2)
        reg = Regularizer(kind, 0.8)
        for _ in range(100):
            v = rng.standard_normal((4, 3))
            x = reg.prox(v, 0.5)
            obj = prox_objective(reg, v, 0.5)
            e = rng.standard_normal(v.shape)
            e *= 0.01 / np.linalg.norm(e)
            assert obj(x) <= obj(x + e) + 1e-12

    @pytest.mark.parametrize("kind", ["l1", "nuclear"])
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), lam=st.floats(0.0, 3.0))
    def test_nonexpansive(self, kind, seed, lam):
        rng = make_rng(seed)
        v1, v2 = rng.standard_normal((2, 5, 4))
        reg = Regularizer(kind, lam)
        d = np.linalg.norm(reg.prox(v1, 1.0) - reg.prox(v2, 1.0))
        assert d <= np.linalg.norm(v1 - v2) * (1 + 1e-12) + 1e-12

    def test_l1_sparsity_monotone(self):
        v = make_rng(3).standard_normal((10, 10))
        zeros = [np.sum(soft_threshold(v, t) == 0) for t in np.linspace(0, 3, 31)]
        assert all(a <= b for a, b in zip(zeros, zeros[1:]))

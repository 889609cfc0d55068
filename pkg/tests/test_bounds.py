import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fetaprune.bounds import (
    ANALYSIS_COLUMNS, VACUOUS, GEBoundReport, ManifoldParams, analysis_rows,
    analyze_pruning, estimate_C, estimate_epsilon, ge_bound_base, ge_bound_multi_layer,
    ge_bound_single_layer, ge_ratio_prediction, layer_perturbations, margin_gamma,
    mean_score, min_score, multi_layer_penalty, reports_to_csv, score, scores,
    single_layer_penalty, transfer_C2)
from fetaprune.network import Dataset, Layer, Network, forward, init_mlp, replace_layer
from fetaprune.numerics import DimensionError, ValidationError, make_rng

MP = ManifoldParams(C_M=1.0, k=2, N_y=2, m=1000, delta=0.01)


def fixture_net(seed=0):
    return init_mlp([4, 6, 5, 3], seed)


def fixture_data(seed=0, n=40):
    rng = make_rng(seed)
    return Dataset(rng.standard_normal((n, 4)), rng.integers(0, 3, n), 3)


class TestScores:
    def test_examples(self):
        assert score([2.0, 1.0, 0.0], 0) == pytest.approx(math.sqrt(2))
        assert score([1.0, 1.0, 1.0], 2) == 0.0
        assert score([0.0, 5.0, 1.0], 1) == pytest.approx(4 * math.sqrt(2))

    def test_min_score_loop_oracle(self):
        net, data = fixture_net(), fixture_data()
        loop = []
        for x in data.inputs:
            z = forward(net, x)
            loop.append(score(z, int(np.argmax(z))))
        np.testing.assert_allclose(scores(net, data), loop, rtol=1e-12)
        assert min_score(net, data) == pytest.approx(min(loop), rel=1e-12)
        assert mean_score(net, data) == pytest.approx(np.mean(loop), rel=1e-12)

    def test_single_sample(self):
        net, data = fixture_net(), fixture_data(n=1)
        z = forward(net, data.inputs[0])
        assert min_score(net, data) == pytest.approx(score(z, int(np.argmax(z))))

    def test_zero_net(self):
        zero = Network([Layer(np.zeros((4, 3)), np.zeros(3), "linear")])
        assert min_score(zero, fixture_data()) == 0.0

    def test_uses_own_prediction_not_label(self):
        net, data = fixture_net(), fixture_data()
        assert np.all(scores(net, data) >= 0)


class TestMarginAndC:
    def test_gamma(self):
        assert margin_gamma(math.sqrt(2), [2.0, 2.0]) == pytest.approx(math.sqrt(2) / 4)
        assert margin_gamma(0.7, [1.0, 1.0, 1.0]) == 0.7
        with pytest.raises(ValidationError):
            margin_gamma(1.0, [])

    def test_estimate_C(self):
        a = make_rng(0).standard_normal((5, 3))
        assert estimate_C(a, a) == 0.0
        b = a.copy()
        b[2, 1] += 1.0
        assert estimate_C(a, b) == pytest.approx(1.0)
        c = make_rng(1).standard_normal((5, 3))
        loop = max(sum((a[i, j] - c[i, j]) ** 2 for j in range(3)) for i in range(5))
        assert estimate_C(a, c) == pytest.approx(loop, rel=1e-12)
        with pytest.raises(DimensionError):
            estimate_C(a, c[:4])

    def test_epsilon(self):
        train = make_rng(2).standard_normal((30, 4))
        assert estimate_epsilon(train, train[:10]) == 0.0
        assert estimate_epsilon(np.zeros((1, 2)), np.array([[2.0, 0.0]])) == pytest.approx(4.0)
        test = make_rng(3).standard_normal((12, 4))
        loop = max(min(np.sum((t - s) ** 2) for s in train) for t in test)
        assert estimate_epsilon(train, test, chunk=5) == pytest.approx(loop, rel=1e-10)

    def test_transfer_C2(self):
        assert transfer_C2(0.3, 2.0, 5.0, 0.0) == 0.3
        assert transfer_C2(0.1, 4.0, 4.0, 0.01) == pytest.approx(0.18)
        assert transfer_C2(0.0, 0.0, 0.0, 0.0) == 0.0


class TestBounds:
    def test_constants_and_base(self):
        assert MP.A == pytest.approx(0.10531, abs=5e-6)
        assert MP.B == pytest.approx(0.09597, abs=5e-6)
        rep = ge_bound_base(1.0, MP)
        assert rep.bound_value == pytest.approx(0.20128, abs=1e-5)
        assert rep.bound_value >= rep.B_const

    def test_base_limit_and_monotone(self):
        vals = [ge_bound_base(g, MP).bound_value for g in (0.5, 1, 2, 10, 1e12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(MP.B, rel=1e-6)

    def test_base_precondition(self):
        for g in (0.0, -1.0):
            with pytest.raises(ValidationError):
                ge_bound_base(g, MP)

    def test_manifold_validation(self):
        with pytest.raises(ValidationError):
            ManifoldParams(1.0, 0.0, 2, 10)
        with pytest.raises(ValidationError):
            ManifoldParams(1.0, 2.0, 2, 10, delta=1.0)

    def test_single_reduces_to_base(self):
        base = ge_bound_base(0.8, MP)
        single = ge_bound_single_layer(0.8, 0.0, [2.0, 3.0], 0, MP)
        assert single.bound_value == pytest.approx(base.bound_value, rel=1e-12)

    def test_depth_penalties(self):
        norms = [2.0] * 4
        assert single_layer_penalty(0.25, norms, 0) == pytest.approx(0.5 / 2)
        assert single_layer_penalty(0.25, norms, 3) == pytest.approx(0.5 / 16)
        early = ge_bound_single_layer(0.5, 0.25, norms, 0, MP).bound_value
        late = ge_bound_single_layer(0.5, 0.25, norms, 3, MP).bound_value
        assert early > late

    def test_depth_ordering_strict(self):
        norms = [1.5] * 5
        vals = [ge_bound_single_layer(1.0, 0.01, norms, i, MP).bound_value for i in range(5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_vacuous(self):
        rep = ge_bound_single_layer(0.1, 100.0, [1.0, 1.0], 0, MP)
        assert rep.vacuous and rep.bound_value == VACUOUS
        assert "VACUOUS" in reports_to_csv([rep])

    def test_multi_reductions(self):
        norms = [2.0, 1.5, 3.0]
        base = ge_bound_base(1.0, MP).bound_value
        assert ge_bound_multi_layer(1.0, [0, 0, 0], norms, MP).bound_value == pytest.approx(
            base, rel=1e-12)
        one = ge_bound_multi_layer(1.0, [0, 0.04, 0], norms, MP).bound_value
        assert one == pytest.approx(
            ge_bound_single_layer(1.0, 0.04, norms, 1, MP).bound_value, rel=1e-12)

    def test_multi_is_sum_of_singles(self):
        norms = [2.0, 1.5, 3.0]
        pen = multi_layer_penalty([0.01, 0, 0.04], norms)
        assert pen == pytest.approx(single_layer_penalty(0.01, norms, 0)
                                    + single_layer_penalty(0.04, norms, 2), rel=1e-12)
        multi = ge_bound_multi_layer(1.0, [0.01, 0, 0.04], norms, MP).bound_value
        assert multi >= ge_bound_single_layer(1.0, 0.01, norms, 0, MP).bound_value
        assert multi >= ge_bound_single_layer(1.0, 0.04, norms, 2, MP).bound_value

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.floats(1.0, 3.0), st.floats(0.01, 1.0))
    def test_monotone_in_C_and_tail_norm(self, c1, c2, norm, bump):
        lo, hi = sorted((c1, c2))
        s = 3.0

        def bound(c, norms):
            return ge_bound_single_layer(margin_gamma(s, norms), c, norms, 0, MP).bound_value

        norms = [1.2, norm, 1.3]
        assert bound(lo, norms) <= bound(hi, norms)
        # a larger norm after the pruned layer amplifies the perturbation
        if hi > 0:
            a, b = bound(hi, norms), bound(hi, [1.2, norm + bump, 1.3])
            assert a < b or math.isinf(b)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            single_layer_penalty(0.1, [1.0, 1.0], 2)


class TestRatioPrediction:
    def test_zero_C(self):
        assert ge_ratio_prediction(0.01, 3.0, [0, 0], [2.0, 2.0], 20) == 0.01

    def test_ratio_two(self):
        # shift = sqrt(0.25) * 2 = 1 against a score of 2: ratio 2, power 10
        assert ge_ratio_prediction(0.01, 2.0, [0.25, 0.0], [2.0, 2.0], 20) == pytest.approx(10.24)

    def test_vacuous(self):
        assert ge_ratio_prediction(0.01, 1.0, [1.0, 0.0], [2.0, 2.0], 20) == VACUOUS


class TestAnalysis:
    def test_unpruned_equals_base(self):
        net, data = fixture_net(), fixture_data()
        mp = ManifoldParams(1.0, 4, 3, len(data))
        an = analyze_pruning(net, net, data, mp, test=fixture_data(1))
        assert all(p.C_max == 0 and p.C_test == 0 for p in an.layers)
        for rep in [*an.single, an.multi]:
            assert rep.bound_value == an.base.bound_value
        assert an.predicted_ge == an.base_ge
        assert an.flipped_fraction == 0.0

    def test_untouched_layers_report_zero(self):
        net, data = fixture_net(), fixture_data()
        w = net.layers[1].weights.copy()
        w[0] = 0
        pruned = replace_layer(net, 1, w)
        pert = layer_perturbations(net, pruned, data)
        assert pert[0].C_max == 0 and pert[2].C_max == 0 and pert[1].C_max > 0

    def test_rows(self):
        net, data = fixture_net(), fixture_data()
        an = analyze_pruning(net, replace_layer(net, 0, net.layers[0].weights * 0.9), data,
                             ManifoldParams(1.0, 4, 3, len(data)))
        rows = analysis_rows(an)
        assert [r["kind"] for r in rows] == ["base", "single[0]", "single[1]", "single[2]",
                                             "multi", "prediction"]
        assert all(set(r) <= set(ANALYSIS_COLUMNS) for r in rows)

    def test_report_csv_row(self):
        rep = GEBoundReport("base", 1.0, 0.0, 0.5, 0.1, 0.2)
        assert rep.csv_row()["vacuous"] == 0

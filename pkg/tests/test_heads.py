import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fpboost import heads
from fpboost.heads import (
    Activation,
    Family,
    HeadParams,
    activate,
    apply_weight_activation,
    head_cumhazard,
    head_hazard,
    head_partials,
    inverse_activation,
    mixture_cumhazard,
    mixture_hazard,
    survival,
    survival_grid,
    weibull_heads_for_polynomial,
)

W, LL = Family.WEIBULL, Family.LOGLOGISTIC


def _params(*rows):
    eta, k, w = (np.array(v, dtype=float) for v in zip(*rows))
    return HeadParams(eta, k, w)


class TestSingleHead:
    def test_weibull_values(self):
        assert head_hazard(W, 2.0, 1.0, 0.3) == 2.0
        assert head_hazard(W, 1.0, 2.0, 0.5) == 1.0
        assert head_cumhazard(W, 1.0, 2.0, 0.5) == 0.25

    def test_loglogistic_values(self):
        assert head_hazard(LL, 1.0, 1.0, 1.0) == 0.5
        assert head_cumhazard(LL, 1.0, 1.0, 1.0) == pytest.approx(math.log(2), abs=1e-15)

    @pytest.mark.parametrize("fam", [W, LL])
    def test_zero_time(self, fam):
        assert head_cumhazard(fam, 1.3, 0.7, 0.0) == 0.0

    def test_k_below_one_finite_at_zero(self):
        h = head_hazard(W, 1.0, 0.5, 0.0)
        assert np.isfinite(h) and h > 0

    @pytest.mark.parametrize("fam", [W, LL])
    def test_cumhazard_is_integral(self, fam):
        rng = np.random.default_rng(0)
        for _ in range(20):
            eta, k, T = rng.uniform(0.2, 3), rng.uniform(1.0, 4), rng.uniform(0.2, 2)
            t = np.linspace(0, T, 2048)
            num = integrate.trapezoid(head_hazard(fam, eta, k, t), t)
            assert num == pytest.approx(head_cumhazard(fam, eta, k, T), rel=1e-3)


class TestPartials:
    def test_weibull_unit_point(self):
        np.testing.assert_allclose(head_partials(W, 1.0, 1.0, 1.0), [1, 1, 1, 0], atol=1e-15)

    def test_weibull_k1_eta_partial_constant(self):
        t = np.linspace(0.1, 5, 7)
        dh_de = head_partials(W, 2.0, 1.0, t)[0]
        np.testing.assert_array_equal(dh_de, np.ones_like(t))

    @pytest.mark.parametrize("fam", [W, LL])
    def test_finite_differences(self, fam):
        rng = np.random.default_rng(1 if fam is W else 2)
        step = 1e-6
        for eta, k, t in rng.uniform(0.1, 5, size=(100, 3)):
            got = head_partials(fam, eta, k, t)
            fd = [
                (head_hazard(fam, eta + step, k, t) - head_hazard(fam, eta - step, k, t)) / (2 * step),
                (head_hazard(fam, eta, k + step, t) - head_hazard(fam, eta, k - step, t)) / (2 * step),
                (head_cumhazard(fam, eta + step, k, t) - head_cumhazard(fam, eta - step, k, t)) / (2 * step),
                (head_cumhazard(fam, eta, k + step, t) - head_cumhazard(fam, eta, k - step, t)) / (2 * step),
            ]
            for g, f in zip(got, fd):
                assert abs(g - f) <= 1e-5 * max(abs(f), 1e-3), (eta, k, t, g, f)


class TestMixture:
    def test_two_exponentials(self):
        p = _params((1, 1, 0.5), (1, 1, 0.5))
        np.testing.assert_allclose(mixture_hazard([W, W], p, np.array([0.1, 1, 7])), 1.0)
        assert mixture_cumhazard([W, W], p, 2.0) == 2.0

    def test_zero_weights(self):
        p = _params((1, 2, 0), (3, 1, 0))
        assert mixture_hazard([W, LL], p, 0.5) == 0.0

    def test_clipping(self):
        p = _params((1, 1, 1), (1, 1, -2))
        assert mixture_hazard([W, W], p, 0.4) == 0.0
        assert mixture_hazard([W, W], p, 0.4, clip=False) == -1.0

    def test_exact_cancellation(self):
        p = _params((1.3, 0.8, 1), (1.3, 0.8, -1))
        t = np.linspace(0, 3, 50)
        np.testing.assert_array_equal(mixture_cumhazard([LL, LL], p, t), 0.0)

    def test_negative_weight_matches_quadrature(self):
        fam = [W, LL]
        p = _params((2.0, 1.5, 1.0), (3.0, 2.0, -0.8))

        def h(s):
            return float(mixture_hazard(fam, p, s))

        for T in (0.3, 0.7, 1.0, 1.6):
            ref = integrate.quad(h, 0, T, limit=200)[0]
            assert mixture_cumhazard(fam, p, T) == pytest.approx(ref, rel=2e-3, abs=1e-6)

    def test_negative_weight_monotone(self):
        rng = np.random.default_rng(3)
        t = np.linspace(0, 1.5, 256)
        for _ in range(20):
            J = 3
            params = HeadParams(rng.uniform(0.1, 3, (1, J)), rng.uniform(0.3, 3, (1, J)),
                                rng.normal(0, 1, (1, J)))
            S = survival_grid([W, LL, W], params, t)[0]
            assert S[0] == 1.0
            assert np.all(np.diff(S) <= 0)

    def test_survival_values(self):
        p = _params((1, 1, 1))
        assert survival([W], p, 1.0) == pytest.approx(math.exp(-1))
        assert survival([W], p, 0.0) == 1.0
        big = _params((50, 1, 1))
        assert survival([W], big, 1.0) == pytest.approx(math.exp(-50))
        huge = _params((1e6, 1, 1))
        S = survival([W], huge, 1.0)  # H capped before exp
        assert S == math.exp(-heads.H_CAP) and np.isfinite(S)

    @given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 4), st.floats(0, 2)),
                    min_size=1, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_survival_nonincreasing(self, rows):
        fam = [W if i % 2 else LL for i in range(len(rows))]
        p = _params(*rows)
        S = survival_grid(fam, HeadParams(*(a[None, :] for a in p)), np.linspace(0, 1, 256))[0]
        assert S[0] == 1.0
        assert np.all(np.diff(S) <= 1e-15)

    def test_grid_matches_pointwise(self):
        rng = np.random.default_rng(4)
        fam = [W, LL]
        params = HeadParams(rng.uniform(0.1, 2, (5, 2)), rng.uniform(0.5, 2, (5, 2)),
                            rng.normal(0, 1, (5, 2)))
        t = np.linspace(0, 1, 11)
        grid = heads.cumhazard_grid(fam, params, t)
        for i in range(5):
            row = HeadParams(*(a[i] for a in params))
            np.testing.assert_allclose(grid[i], mixture_cumhazard(fam, row, t), rtol=1e-12)


class TestActivations:
    def test_identity(self):
        w, jac = apply_weight_activation(Activation.IDENTITY, np.array([2.0, -3.0]))
        np.testing.assert_array_equal(w, [2, -3])
        np.testing.assert_array_equal(jac, np.eye(2))

    def test_relu(self):
        w, jac = apply_weight_activation("relu", np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(w, [0, 0, 2])
        np.testing.assert_array_equal(np.diag(jac), [0, 0, 1])

    def test_softmax_example(self):
        w, jac = apply_weight_activation("softmax", np.array([0.0, 0.0]))
        np.testing.assert_allclose(w, [0.5, 0.5])
        np.testing.assert_allclose(jac, [[0.25, -0.25], [-0.25, 0.25]])

    def test_softmax_properties(self):
        rng = np.random.default_rng(5)
        raw = rng.normal(0, 3, (50, 4))
        w, jac = apply_weight_activation("softmax", raw)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(jac.sum(axis=2), 0.0, atol=1e-12)
        np.testing.assert_allclose(activate("softmax", raw + 7.5), w, atol=1e-12)

    @pytest.mark.parametrize("kind", list(Activation))
    def test_jacobian_fd(self, kind):
        raw = np.array([0.3, -1.2, 0.8])
        _, jac = apply_weight_activation(kind, raw)
        step = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            fd = (activate(kind, raw + e) - activate(kind, raw - e)) / (2 * step)
            np.testing.assert_allclose(jac[:, j], fd, atol=1e-8)

    def test_ranges(self):
        raw = np.linspace(-5, 5, 11)
        assert np.all((activate("sigmoid", raw) > 0) & (activate("sigmoid", raw) < 1))
        assert np.all(np.abs(activate("tanh", raw)) < 1)

    @pytest.mark.parametrize("kind,value", [("relu", 0.25), ("identity", 0.25),
                                            ("sigmoid", 0.25), ("tanh", 0.25), ("softmax", 0.25)])
    def test_inverse(self, kind, value):
        raw = inverse_activation(kind, value)
        if kind == "softmax":
            assert activate(kind, np.full(4, raw))[0] == pytest.approx(value)
        else:
            assert activate(kind, np.array([raw]))[0] == pytest.approx(value)

    def test_inverse_out_of_range(self):
        assert inverse_activation("sigmoid", 1.0) is None
        assert inverse_activation("tanh", -1.0) is None


class TestPolynomialHeads:
    def test_construction(self):
        ph = weibull_heads_for_polynomial([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(ph.k, [1, 2, 3])
        np.testing.assert_array_equal(ph.w, [1.0, -1.0, 1.0])

    def test_reproduces_polynomial(self):
        rng = np.random.default_rng(6)
        t = np.linspace(0, 1, 1000)
        for _ in range(10):
            coeffs = rng.uniform(-3, 3, rng.integers(1, 7))
            ph = weibull_heads_for_polynomial(coeffs)
            p = HeadParams(ph.eta, ph.k, ph.w)
            got = mixture_hazard(ph.families, p, t, clip=False)
            err = np.max(np.abs(got - np.polynomial.polynomial.polyval(t, coeffs)))
            assert err < 1e-9

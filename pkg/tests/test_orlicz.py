import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fellersim import (ConstructionFailure, DiscreteMeasure, InvalidArgument,
                       NumericFailure, YoungFunction, holder_defect, legendre,
                       luxemburg_norm, minkowski_defect, orlicz_norm,
                       young_from_uniform_integrability, young_inverse)


def uniform(n):
    return DiscreteMeasure.uniform(np.arange(float(n)))


class TestYoungFunction:
    def test_power_basics(self):
        phi = YoungFunction.power(2)
        assert phi(0.0) == 0.0
        assert phi(-2.0) == phi(2.0) == 4.0

    def test_exp_minus_one(self):
        phi = YoungFunction.exp_minus_one()
        assert phi(0.0) == 0.0
        assert phi(1.0) == pytest.approx(math.e - 1)

    def test_tabulated_eval_and_extension(self):
        phi = YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        assert phi(0.5) == pytest.approx(0.5)
        assert phi(1.5) == pytest.approx(2.0)
        assert phi(4.0) == pytest.approx(3.0 + 2.0 * 2.0)  # final-slope extension

    def test_nonconvex_tabulated_rejected(self):
        with pytest.raises(InvalidArgument):
            YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 2.0, 3.0])

    def test_exponent_below_one_rejected(self):
        with pytest.raises(InvalidArgument):
            YoungFunction.power(0.5)

    def test_flat_tail_rejected(self):
        with pytest.raises(InvalidArgument):
            YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])

    def test_power_conjugates_close_under_family(self):
        phi = YoungFunction.scaled_power(3, 1.0 / 3.0)
        conj = phi.conjugate()
        assert conj.kind == "scaled-power"
        assert conj.p == pytest.approx(1.5)
        assert conj.c == pytest.approx(2.0 / 3.0)

    def test_strictly_positive(self):
        assert YoungFunction.power(2).strictly_positive()
        vp = YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 0.0, 1.0])
        assert not vp.strictly_positive()

    def test_inverse(self):
        assert young_inverse(YoungFunction.power(2), 4.0) == pytest.approx(2.0, rel=1e-9)


class TestLegendre:
    def test_self_conjugate_quadratic(self):
        assert legendre(YoungFunction.scaled_power(2, 0.5), 3.0) == pytest.approx(4.5)

    def test_conjugate_exponent_identity(self):
        # Phi = |x|^3/3 -> Phi_c(y) = |y|^{3/2} / (3/2)
        assert legendre(YoungFunction.scaled_power(3, 1 / 3), 1.0) == pytest.approx(2 / 3, rel=1e-9)

    def test_linear_gauge(self):
        assert legendre(YoungFunction.power(1), 0.5) == 0.0
        assert legendre(YoungFunction.power(1), 2.0) == math.inf

    def test_exp_minus_one_numeric(self):
        # analytic conjugate: y ln y - y + 1 for y >= 1
        val = legendre(YoungFunction.exp_minus_one(), 3.0)
        assert val == pytest.approx(3 * math.log(3) - 2, rel=1e-8)
        assert legendre(YoungFunction.exp_minus_one(), 0.5) == pytest.approx(0.0, abs=1e-9)

    def test_tabulated_bracketed(self):
        phi = YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        # slope reaches 2 at the end, so y = 1.5 is bracketed: sup at kink x=1
        assert legendre(phi, 1.5) == pytest.approx(0.5, rel=1e-8)

    def test_tabulated_unbracketed_raises(self):
        phi = YoungFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        with pytest.raises(NumericFailure):
            legendre(phi, 5.0)

    def test_tabulated_conjugate_wrapper_agrees_with_legendre(self):
        phi = YoungFunction.tabulated([0.0, 0.7, 1.5, 3.0], [0.0, 0.35, 1.15, 3.55])
        conj = phi.conjugate()
        for y in (0.1, 0.5, 0.9, 1.3):  # final slope is 1.6
            assert float(conj(y)) == pytest.approx(legendre(phi, y), abs=1e-9)
        assert math.isinf(float(conj(2.0)))  # beyond the linear extension

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgument):
            legendre(YoungFunction.power(2), math.inf)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(1.1, 4.0), st.floats(-5, 5), st.floats(0, 5))
    def test_fenchel_young(self, p, y, x):
        phi = YoungFunction.power(p)
        assert x * abs(y) <= phi(x) + legendre(phi, y) + 1e-8 * (1 + phi(x))

    def test_convex_in_y(self):
        phi = YoungFunction.exp_minus_one()
        ys = np.linspace(0.0, 6.0, 25)
        vals = np.array([legendre(phi, y) for y in ys])
        mids = np.array([legendre(phi, y) for y in 0.5 * (ys[:-1] + ys[1:])])
        assert np.all(mids <= 0.5 * (vals[:-1] + vals[1:]) + 1e-7)


class TestLuxemburg:
    def test_matches_l2(self):
        rng = np.random.default_rng(1)
        f = rng.normal(size=8)
        mu = DiscreteMeasure.uniform(np.arange(8.0))
        l2 = math.sqrt(float(np.sum(f ** 2) / 8))
        assert luxemburg_norm(f, mu, YoungFunction.power(2)) == pytest.approx(l2, rel=1e-9)

    @pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
    def test_matches_lp(self, p):
        rng = np.random.default_rng(2)
        f = rng.normal(size=6)
        w = rng.random(6)
        mu = DiscreteMeasure(np.arange(6.0), w)
        lp = float(np.sum(w * np.abs(f) ** p)) ** (1.0 / p)
        assert luxemburg_norm(f, mu, YoungFunction.power(p)) == pytest.approx(lp, rel=1e-9)

    def test_zero_function(self):
        assert luxemburg_norm(np.zeros(4), uniform(4), YoungFunction.power(2)) == 0.0

    def test_indicator_linear_phi(self):
        # ||1_A||_(Phi) = mu(A) for Phi = |x|
        mu = DiscreteMeasure(np.arange(4.0), np.array([0.25, 0.25, 0.25, 0.25]))
        f = np.array([1.0, 1.0, 0.0, 0.0])
        assert luxemburg_norm(f, mu, YoungFunction.power(1)) == pytest.approx(0.5, rel=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.0, 4.0), st.floats(0.01, 50.0))
    def test_homogeneity(self, p, c):
        rng = np.random.default_rng(7)
        f = rng.normal(size=5)
        mu = uniform(5)
        phi = YoungFunction.power(p)
        base = luxemburg_norm(f, mu, phi)
        assert luxemburg_norm(c * f, mu, phi) == pytest.approx(c * base, rel=1e-8)

    def test_rejects_nonfinite_values(self):
        with pytest.raises(InvalidArgument):
            luxemburg_norm(np.array([1.0, math.inf]), uniform(2), YoungFunction.power(2))

    @pytest.mark.parametrize("p, mass", [(2.0, 0.5), (3.0, 0.25), (1.5, 0.7)])
    def test_indicator_norm_generalized_inverse_oracle(self, p, mass):
        # ground truth by bisection agrees with 1 / Phi^{-1}(1 / mu(A));
        # for Phi = x^2 and mu(A) = 1/2 this is 1/sqrt(2), not (Phi(1/mu(A)))^{-1} = 1/4
        n = 8
        weights = np.full(n, mass / 4)
        weights[4:] = (1.0 - mass) / 4
        mu = DiscreteMeasure(np.arange(float(n)), weights)
        f = np.zeros(n)
        f[:4] = 1.0
        phi = YoungFunction.power(p)
        direct = luxemburg_norm(f, mu, phi)
        oracle = 1.0 / young_inverse(phi, 1.0 / mass)
        assert direct == pytest.approx(oracle, rel=1e-9)
        if p == 2.0 and mass == 0.5:
            assert direct == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-9)
            assert abs(direct - 0.25) > 0.4  # the literal printed formula


class TestOrliczNorm:
    def test_zero(self):
        assert orlicz_norm(np.zeros(3), uniform(3), YoungFunction.power(2)) == 0.0

    def test_frozen_amemiya_case(self):
        # Phi = x^2, uniform on 4 atoms, f = 1: grid oracle gave 2.0 at k = 1
        val = orlicz_norm(np.ones(4), uniform(4), YoungFunction.power(2))
        assert val == pytest.approx(2.0, rel=1e-8)

    def test_linear_phi_gives_l1(self):
        # Amemiya infimum attained only as k -> inf; plateau detection
        rng = np.random.default_rng(3)
        f = rng.normal(size=5)
        w = rng.random(5)
        mu = DiscreteMeasure(np.arange(5.0), w)
        assert orlicz_norm(f, mu, YoungFunction.power(1)) == pytest.approx(
            float(np.sum(w * np.abs(f))), rel=1e-6)

    def test_between_luxemburg_and_twice(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = rng.integers(2, 9)
            f = rng.normal(size=n) * rng.random()
            mu = DiscreteMeasure(np.arange(float(n)), rng.random(n))
            phi = YoungFunction.power(float(rng.uniform(1.0, 4.0)))
            lux = luxemburg_norm(f, mu, phi)
            orl = orlicz_norm(f, mu, phi)
            assert lux - 1e-9 <= orl <= 2 * lux + 1e-9


class TestHolderDefect:
    def test_zero_functions(self):
        assert holder_defect(np.zeros(3), np.zeros(3), uniform(3), YoungFunction.power(2)) == 0.0

    def test_indicator_closed_form(self):
        # f = g = 1_A, Phi = |x|, mu(A) = 1/2:
        # 2 * mu(A) * 1 - mu(A) = mu(A) = 0.5
        mu = DiscreteMeasure(np.arange(4.0), np.full(4, 0.25))
        f = np.array([1.0, 1.0, 0.0, 0.0])
        assert holder_defect(f, f, mu, YoungFunction.power(1)) == pytest.approx(0.5, rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_nonnegative_random(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 10))
        f = rng.normal(size=n)
        g = rng.normal(size=n)
        mu = DiscreteMeasure(np.arange(float(n)), rng.random(n) + 1e-3)
        phi = YoungFunction.scaled_power(float(rng.uniform(1.0, 3.5)),
                                         float(rng.uniform(0.2, 2.0)))
        assert holder_defect(f, g, mu, phi) >= -1e-9


class TestMinkowskiDefect:
    def test_constant_in_y_vanishes(self):
        mu = DiscreteMeasure.uniform(np.arange(5.0))
        f = np.abs(np.random.default_rng(0).normal(size=5))
        F = np.tile(f[:, None], (1, 5))
        assert abs(minkowski_defect(F, mu, YoungFunction.power(2))) <= 1e-9

    def test_product_form_vanishes(self):
        rng = np.random.default_rng(1)
        mu = DiscreteMeasure.uniform(np.arange(6.0))
        f = np.abs(rng.normal(size=6))
        g = np.abs(rng.normal(size=6))
        F = np.outer(f, g)
        assert abs(minkowski_defect(F, mu, YoungFunction.power(2))) <= 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_nonnegative_random(self, seed):
        rng = np.random.default_rng(seed)
        n = 5
        mu = DiscreteMeasure.uniform(np.arange(float(n)))
        F = rng.random((n, n)) * rng.uniform(0.1, 5.0)
        phi = YoungFunction.power(float(rng.uniform(1.0, 3.0)))
        assert minkowski_defect(F, mu, phi) >= -1e-9

    def test_requires_probability(self):
        mu = DiscreteMeasure(np.arange(3.0), np.ones(3))
        with pytest.raises(InvalidArgument):
            minkowski_defect(np.ones((3, 3)), mu, YoungFunction.power(2))

    def test_rejects_negative_F(self):
        mu = DiscreteMeasure.uniform(np.arange(3.0))
        with pytest.raises(InvalidArgument):
            minkowski_defect(-np.ones((3, 3)), mu, YoungFunction.power(2))


class TestDeLaValleePoussin:
    def test_single_unit_density(self):
        mu = DiscreteMeasure.uniform(np.arange(4.0))
        phi = young_from_uniform_integrability([np.ones(4)], mu)
        assert float(np.sum(mu.weights * phi(np.ones(4)))) < math.inf
        assert phi(1.0) == pytest.approx(0.0)  # all thresholds sit at 1

    def test_truncated_gaussian_family_bound(self):
        # densities of N(0, s) against the uniform reference on a compact grid
        n = 101
        xs = np.linspace(-3.0, 3.0, n)
        mu = DiscreteMeasure(xs, np.full(n, 6.0 / n / 6.0))
        fam = []
        for s in (0.5, 0.8, 1.0, 1.5):
            dens = np.exp(-xs ** 2 / (2 * s * s)) / math.sqrt(2 * math.pi) / s
            dens = dens / float(np.sum(mu.weights * dens))  # normalize on the grid
            fam.append(dens)
        phi = young_from_uniform_integrability(fam, mu)
        sup_int = max(float(np.sum(mu.weights * phi(p))) for p in fam)
        assert sup_int <= 2.0 + 1e-9  # telescoping bound sum k 2^-k

    def test_superlinear_slopes(self):
        mu = DiscreteMeasure.uniform(np.arange(3.0))
        phi = young_from_uniform_integrability([np.array([2.0, 0.5, 0.5])], mu, k_max=12)
        slopes = np.diff(phi.ys) / np.diff(phi.xs)
        assert np.all(np.diff(slopes) >= -1e-12)
        assert slopes[-1] >= 12.0 - 1e-9

    def test_not_uniformly_integrable_family_fails(self):
        # a huge density value on a vanishing atom: the threshold needed for
        # tail 2^-2 exceeds any reasonable cap -> named construction failure
        w = np.array([1e-13, 1.0 - 1e-13])
        mu = DiscreteMeasure(np.arange(2.0), w)
        dens = np.array([5e12, 0.5])
        with pytest.raises(ConstructionFailure) as exc:
            young_from_uniform_integrability([dens], mu)
        assert exc.value.level is not None

    def test_rejects_unnormalized_density(self):
        mu = DiscreteMeasure.uniform(np.arange(3.0))
        with pytest.raises(InvalidArgument):
            young_from_uniform_integrability([np.full(3, 2.0)], mu)


class TestDiscreteMeasure:
    def test_total_cached(self):
        mu = DiscreteMeasure(np.arange(3.0), np.array([0.2, 0.3, 0.5]))
        assert mu.total == pytest.approx(1.0)
        assert mu.is_probability

    def test_negative_weights_rejected(self):
        with pytest.raises(InvalidArgument):
            DiscreteMeasure(np.arange(2.0), np.array([0.5, -0.1]))

    def test_values_of_callable(self):
        mu = DiscreteMeasure.uniform(np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(mu.values_of(lambda x: x ** 2), [0.0, 1.0, 4.0])

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fellersim import (InvalidArgument, LevyMeasureSpec, NumericFailure,
                       StableLikeIndex, StateTriplet, coeff_bound, eval_symbol,
                       radial_symbol_quadrature, stable_constant)


def brownian_triplet(sigma=1.0):
    return StateTriplet.constant(1, sigma ** 2, 0.0, LevyMeasureSpec.zero(1))


def stable_triplet(alpha, d=1):
    nu = LevyMeasureSpec.radial_power(d, stable_constant(alpha, d), alpha)
    return StateTriplet.constant(d, 0.0, 0.0, nu)


class TestStableConstant:
    def test_alpha_one_is_inverse_pi(self):
        assert stable_constant(1.0, 1) == pytest.approx(1.0 / math.pi, rel=1e-14)

    def test_alpha_half(self):
        # Gamma((0.5+1)/2) = Gamma(1 - 0.25), so the Gammas cancel
        assert stable_constant(0.5, 1) == pytest.approx(0.5 / math.sqrt(2 * math.pi), rel=1e-13)

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0, 2.5])
    def test_rejects_bad_alpha(self, alpha):
        with pytest.raises(InvalidArgument):
            stable_constant(alpha, 1)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("xi", [0.5, 1.0, 2.0])
    def test_levy_khinchine_identity_scipy(self, alpha, xi):
        # independent route: scipy quadrature of C_a int (1-cos(xi z)) |z|^{-1-a} dz;
        # the oscillatory tail is split as int z^{-1-a} (analytic) minus a
        # cosine-weighted integral
        c = stable_constant(alpha, 1)
        cut = 10.0 / xi
        v1, _ = integrate.quad(lambda z: (1 - np.cos(xi * z)) * z ** (-1 - alpha),
                               0, cut, limit=400)
        osc, _ = integrate.quad(lambda z: z ** (-1 - alpha), cut, cut + 400 * np.pi / xi,
                                weight="cos", wvar=xi, limit=500)
        v2 = cut ** (-alpha) / alpha - osc
        assert 2 * c * (v1 + v2) == pytest.approx(xi ** alpha, rel=1e-4)


class TestRadialQuadrature:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("xi", [0.5, 1.0, 2.0, 7.5])
    def test_matches_closed_form(self, alpha, xi):
        c = stable_constant(alpha, 1)
        val = radial_symbol_quadrature(c, alpha, xi)
        assert val == pytest.approx(xi ** alpha, abs=1e-6, rel=1e-6)

    def test_zero_frequency(self):
        assert radial_symbol_quadrature(1.0, 1.0, 0.0) == 0.0

    def test_budget_exhaustion_raises_with_residual(self):
        with pytest.raises(NumericFailure) as exc:
            radial_symbol_quadrature(1.0, 0.5, 1.0, abs_tol=1e-13, max_evals=40)
        assert exc.value.residual is not None

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidArgument):
            radial_symbol_quadrature(1.0, 1.0, math.inf)


class TestEvalSymbol:
    def test_pure_quadratic(self):
        p = eval_symbol(brownian_triplet(), 0.0, 2.0)
        assert p == pytest.approx(2.0)

    def test_stable_symbol_is_power(self):
        p = eval_symbol(stable_triplet(1.0), 0.0, 3.0)
        assert p.real == pytest.approx(3.0, rel=1e-12)
        assert p.imag == pytest.approx(0.0, abs=1e-12)

    def test_quadrature_route_agrees(self):
        p = eval_symbol(stable_triplet(1.5), 0.0, 2.0, radial_method="quadrature")
        assert p.real == pytest.approx(2.0 ** 1.5, rel=1e-6)

    def test_conservative_at_zero(self):
        atoms = [((0.5,), 0.4), ((-1.5,), 0.6)]
        nu = LevyMeasureSpec.finite_atoms(atoms, d=1)
        trip = StateTriplet.constant(1, 0.0, 0.25, nu)
        assert eval_symbol(trip, 0.0, 0.0) == 0.0

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.7])
    def test_radial_power_tracks_power_law(self, alpha):
        trip = stable_triplet(alpha)
        for xi in np.linspace(0.25, 10.0, 14):
            assert abs(eval_symbol(trip, 0.0, xi) - xi ** alpha) <= 1e-6 * max(1.0, xi ** alpha)

    def test_rejects_nonfinite_frequency(self):
        with pytest.raises(InvalidArgument):
            eval_symbol(brownian_triplet(), 0.0, math.nan)


@st.composite
def finite_atom_triplets(draw):
    n = draw(st.integers(1, 4))
    atoms = []
    for _ in range(n):
        z = draw(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
        w = draw(st.floats(0.05, 2.0))
        atoms.append(((z,), w))
    a = draw(st.floats(0.0, 2.0))
    b = draw(st.floats(-1.5, 1.5))
    return StateTriplet.constant(1, a, b, LevyMeasureSpec.finite_atoms(atoms, d=1))


class TestSymbolProperties:
    @settings(max_examples=60, deadline=None)
    @given(finite_atom_triplets(), st.floats(-8, 8))
    def test_negative_definiteness_and_conjugate_symmetry(self, trip, xi):
        p = eval_symbol(trip, 0.0, xi)
        assert p.real >= -1e-10
        q = eval_symbol(trip, 0.0, -xi)
        assert q == pytest.approx(p.conjugate(), abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(finite_atom_triplets())
    def test_growth_bound(self, trip):
        bound = coeff_bound(trip, [np.array([0.0])])
        for xi in np.linspace(-6, 6, 25):
            assert abs(eval_symbol(trip, 0.0, xi)) <= bound * (1 + xi ** 2) + 1e-9


class TestCoeffBound:
    def test_brownian(self):
        assert coeff_bound(brownian_triplet(), [0.0]) == pytest.approx(1.0, rel=1e-12)

    def test_stable_like_symbol(self):
        # |xi|^{alpha(x)}: sup over |xi|<=1 is 1 at every state
        def nu(x):
            a = 1.0 + 0.3 * math.tanh(float(x[0]))
            return LevyMeasureSpec.radial_power(1, stable_constant(a, 1), a)

        trip = StateTriplet(d=1, a=lambda x: np.zeros((1, 1)), b=lambda x: np.zeros(1), nu=nu)
        assert coeff_bound(trip, [-1.0, 0.0, 2.0]) == pytest.approx(2.0, rel=1e-12)

    def test_zero_triplet(self):
        trip = StateTriplet.constant(1, 0.0, 0.0, LevyMeasureSpec.zero(1))
        assert coeff_bound(trip, [0.0]) == 0.0

    def test_empty_probes_rejected(self):
        with pytest.raises(InvalidArgument):
            coeff_bound(brownian_triplet(), [])


class TestLevyMeasureSpec:
    @pytest.mark.parametrize("spec", [
        LevyMeasureSpec.radial_power(1, 0.7, 0.8),
        LevyMeasureSpec.radial_power(2, 1.3, 1.4),
        LevyMeasureSpec.finite_atoms([((0.3,), 1.0), ((-2.0,), 0.5)], d=1),
    ])
    def test_tail_monotone_and_moment_monotone(self, spec):
        rs = np.linspace(0.05, 4.0, 25)
        tails = [spec.tail_mass(r) for r in rs]
        moments = [spec.truncated_second_moment(r) for r in rs]
        assert all(a >= b - 1e-12 for a, b in zip(tails, tails[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(moments, moments[1:]))

    def test_radial_power_tail_closed_form(self):
        spec = LevyMeasureSpec.radial_power(1, 2.0, 1.0)
        # 2 c r^{-a} / a in d = 1
        assert spec.tail_mass(0.5) == pytest.approx(2 * 2.0 * 2.0, rel=1e-12)

    def test_alpha_outside_range_rejected(self):
        with pytest.raises(InvalidArgument):
            LevyMeasureSpec.radial_power(1, 1.0, 2.0)

    def test_atom_at_origin_rejected(self):
        with pytest.raises(InvalidArgument):
            LevyMeasureSpec.finite_atoms([((0.0,), 1.0)], d=1)

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(InvalidArgument):
            LevyMeasureSpec.finite_atoms([((1.0,), 0.0)], d=1)

    def test_shell_mean_finite_atoms(self):
        spec = LevyMeasureSpec.finite_atoms([((0.8,), 2.0), ((0.1,), 1.0)], d=1)
        np.testing.assert_allclose(spec.shell_mean(0.5, 1.0), [1.6])


class TestStateTriplet:
    def test_asymmetric_a_rejected(self):
        trip = StateTriplet(d=2, a=lambda x: np.array([[1.0, 0.5], [0.0, 1.0]]),
                            b=lambda x: np.zeros(2), nu=lambda x: LevyMeasureSpec.zero(2))
        with pytest.raises(InvalidArgument):
            trip.validate_at([np.zeros(2)])

    def test_negative_definite_a_rejected(self):
        trip = StateTriplet.constant(1, -1.0, 0.0, LevyMeasureSpec.zero(1))
        with pytest.raises(InvalidArgument):
            trip.validate_at([0.0])

    def test_valid_triplet_passes(self):
        stable_triplet(1.2).validate_at([0.0, 1.0, -2.0])


class TestStableLikeIndex:
    def test_bounds_enforced(self):
        idx = StableLikeIndex(alpha=lambda x: 1.0 + 0.2 * np.sin(np.pi * np.asarray(x)),
                              lower=0.8, upper=1.2)
        idx.validate_at([0.0, 0.5, -0.5])

    def test_violation_detected(self):
        idx = StableLikeIndex(alpha=lambda x: 1.5 + 0.0 * np.asarray(x), lower=0.8, upper=1.2)
        with pytest.raises(InvalidArgument):
            idx.at(0.0)

    def test_bad_declared_bounds(self):
        with pytest.raises(InvalidArgument):
            StableLikeIndex(alpha=lambda x: 1.0, lower=0.0, upper=1.0)

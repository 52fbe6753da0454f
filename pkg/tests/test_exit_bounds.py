import math

import numpy as np
import pytest
from scipy import integrate

from fellersim import (BallSpec, InvalidArgument, LevyMeasureSpec, StateTriplet,
                       bound_report, compute_H, compute_h, stable_constant)
from fellersim.exit_bounds import C_LOWER, C_UPPER


def brownian_triplet():
    return StateTriplet.constant(1, 1.0, 0.0, LevyMeasureSpec.zero(1))


def stable_triplet(alpha=1.0):
    nu = LevyMeasureSpec.radial_power(1, stable_constant(alpha, 1), alpha)
    return StateTriplet.constant(1, 0.0, 0.0, nu)


def ball(center, r):
    return BallSpec(np.atleast_1d(float(center)), r)


class TestComputeH:
    def test_brownian_only_trace_term(self):
        # (2/r^2) * (1/2 * 1) = 1/r^2
        assert compute_H(brownian_triplet(), ball(0, 0.5)) == pytest.approx(4.0, rel=1e-12)

    def test_stable_frozen_quadrature_value(self):
        # quadrature oracle (scipy): small-jump part + tail, each 2 C_1 / r
        r = 0.5
        c1 = stable_constant(1.0, 1)
        small = 2 * integrate.quad(lambda z: z ** 2 * c1 * z ** (-2), 0, r)[0] / r ** 2
        tail = 2 * integrate.quad(lambda z: c1 * z ** (-2), r, np.inf)[0]
        assert small + tail == pytest.approx(4 * c1 / r, rel=1e-10)
        assert compute_H(stable_triplet(), ball(0, r)) == pytest.approx(small + tail, rel=1e-9)

    def test_zero_triplet(self):
        trip = StateTriplet.constant(1, 0.0, 0.0, LevyMeasureSpec.zero(1))
        assert compute_H(trip, ball(0, 0.3)) == 0.0

    def test_rejects_radius_at_least_one(self):
        with pytest.raises(InvalidArgument):
            compute_H(brownian_triplet(), ball(0, 1.0))

    def test_rejects_small_probe_count(self):
        with pytest.raises(InvalidArgument):
            compute_H(brownian_triplet(), ball(0, 0.5), probe_count=4)

    def test_matches_dense_grid_oracle_state_dependent(self):
        # state-dependent drift and an atom in the compensation shell:
        # brute-force the sup on a dense grid as the independent route
        atoms = LevyMeasureSpec.finite_atoms([((0.8,), 0.7), ((0.05,), 2.0)], d=1)
        trip = StateTriplet(
            d=1,
            a=lambda x: np.array([[0.5 + 0.25 * math.sin(float(x[0]))]]),
            b=lambda x: np.array([0.3 * float(x[0])]),
            nu=lambda x: atoms,
        )
        r, x0 = 0.4, 0.2
        ys = np.linspace(x0 - r, x0 + r, 4001)
        vals = []
        for y in ys:
            a = 0.5 + 0.25 * math.sin(y)
            shell = 0.8 * 0.7 if 0.4 < 0.8 <= 1.0 else 0.0
            drift = 0.3 * y - shell
            small = 2.0 * 0.05 ** 2  # atom at 0.05 with mass 2.0 inside |z|<=r
            tail = 0.7  # atom at 0.8 beyond r
            vals.append((2 / r ** 2) * (0.5 * a + (y - x0) * drift) + small / r ** 2 + tail)
        dense = max(vals)
        assert compute_H(trip, ball(x0, r), probe_count=64) == pytest.approx(dense, rel=1e-5)


class TestComputeh:
    def test_stable_tail_closed_form(self):
        # 2 c (3r)^{-a} / a with c = C_1, r = 1/3 -> 2/pi
        val = compute_h(stable_triplet(), ball(0, 1.0 / 3.0))
        assert val == pytest.approx(2.0 / math.pi, rel=1e-12)

    def test_brownian_vanishes(self):
        assert compute_h(brownian_triplet(), ball(0, 0.5)) == 0.0

    def test_atoms_inside_three_r(self):
        nu = LevyMeasureSpec.finite_atoms([((0.2,), 1.0), ((-0.5,), 2.0)], d=1)
        trip = StateTriplet.constant(1, 0.0, 0.0, nu)
        assert compute_h(trip, ball(0, 0.3)) == 0.0  # all atoms inside |z| < 0.9

    def test_nonincreasing_in_radius(self):
        trip = stable_triplet(0.7)
        rs = np.linspace(0.05, 2.0, 15)
        vals = [compute_h(trip, ball(0, r)) for r in rs]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_radius_one_allowed(self):
        # only H carries the r < 1 restriction
        assert compute_h(stable_triplet(), ball(0, 1.0)) == pytest.approx(
            2 * stable_constant(1.0, 1) / 3.0, rel=1e-12)


class TestBoundReport:
    def test_brownian_lower_bound_values(self):
        rep = bound_report(brownian_triplet(), ball(0, 0.25))
        assert rep.H == pytest.approx(16.0, rel=1e-12)
        assert rep.e_tau_lower == pytest.approx(C_LOWER / 16.0, rel=1e-12)
        # true E tau for B(0, 0.5) is 0.25, safely above the bound
        assert rep.e_tau_lower < 0.25
        assert rep.e_tau_upper_vacuous  # no jumps: h = 0

    def test_stable_sandwich_is_ordered_and_brackets_getoor(self):
        rep = bound_report(stable_triplet(), ball(0, 0.25))
        c1 = stable_constant(1.0, 1)
        assert rep.h_upper == pytest.approx(2 * c1 / 4.5, rel=1e-12)  # tail at 18 r = 4.5
        assert rep.e_tau_upper == pytest.approx(C_UPPER / rep.h_upper, rel=1e-12)
        getoor = 0.5  # E^0 tau_{B(0,0.5)} for the Cauchy process
        assert rep.e_tau_lower <= getoor <= rep.e_tau_upper
        assert rep.e_tau_lower <= rep.e_tau_upper

    def test_probability_bounds_clip(self):
        rep = bound_report(brownian_triplet(), ball(0, 0.25))
        assert rep.p_exit_upper(1e-4) == pytest.approx(1e-4 * 16 / (1 - math.exp(-1)))
        assert rep.p_exit_upper(10.0) == 1.0
        assert rep.p_survive_upper(10.0) == 1.0  # h = 0: vacuous

    def test_zero_triplet_flags(self):
        trip = StateTriplet.constant(1, 0.0, 0.0, LevyMeasureSpec.zero(1))
        rep = bound_report(trip, ball(0, 0.25))
        assert rep.p_exit_upper(5.0) == 0.0
        assert math.isinf(rep.e_tau_lower) and rep.e_tau_lower_vacuous

    def test_note_records_radii(self):
        rep = bound_report(stable_triplet(), ball(0, 0.25))
        assert "0.25" in rep.note
        assert "1.5" in rep.note      # h evaluated at ball radius 6r
        assert "4.5" in rep.note      # jump tail at 18r
        assert "refinement" in rep.note

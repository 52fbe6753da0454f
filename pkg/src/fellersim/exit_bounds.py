"""Explicit first-exit-time bound functionals H(x, r) and h(x, r).

For a ball B(x, r) and a state-dependent triplet,

    H(x, r) = sup_{|y-x| <= r} { (2/r^2) [ tr a(y)/2
                + (y-x).(b(y) - int_{r<|z|<=1} z nu(y,dz)) ]
                + (1/r^2) int_{|z|<=r} |z|^2 nu(y,dz) + nu(y, {|z| > r}) }

    h(x, r) = inf_{|y-x| < r} nu(y, {|z| >= 3r})

yield the exit-probability bounds

    P^x(tau_{B(x,r)} <= t) <= t H(x, r) / (1 - e^{-1})
    P^x(tau_{B(x,r)} >  t) <= 1 / (t h(x, r))

and a two-sided expectation sandwich for tau_{B(x, 2r)}.  The sup/inf run
over deterministic low-discrepancy lattices with refinement doubling, so
they are reproducible lattice approximations of the true extrema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .characteristics import StateTriplet, ball_lattice
from .errors import InvalidArgument

__all__ = ["BallSpec", "BoundReport", "compute_H", "compute_h", "bound_report",
           "C_LOWER", "C_UPPER"]

# c1 from the median argument on the (1u1)-type bound: pick t* with
# t* H / (1 - e^{-1}) = 1/2, then E tau >= t*/2 = (1 - e^{-1}) / (4 H).
C_LOWER = (1.0 - math.exp(-1.0)) / 4.0
# c2 from integrating the doubled survival bound
# P(tau_{B(x,rho)} > t) <= 4 t^{-2} h(x, 3 rho)^{-2}:  E tau <= 4 / h(x, 3 rho).
C_UPPER = 4.0

_REL_TOL = 1e-4
_MAX_REFINE = 6


@dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise InvalidArgument("ball radius must be positive")
        object.__setattr__(self, "center", c)


def _refine_extremum(eval_on_lattice, center, radius, d, probe_count, take):
    n = max(int(probe_count), 8)
    prev = None
    for _ in range(_MAX_REFINE):
        pts = ball_lattice(center, radius, n, d)
        val = take(eval_on_lattice(pts))
        if prev is not None and abs(val - prev) <= _REL_TOL * max(abs(val), 1e-30):
            return float(val)
        prev = val
        n *= 2
    return float(prev)


def compute_H(triplet: StateTriplet, ball: BallSpec, probe_count: int = 64) -> float:
    """Lattice supremum of the exit-rate functional H over {|y - x| <= r}.

    Requires 0 < r < 1: the drift-correction shell {r < |z| <= 1}
    degenerates at r = 1.  The lattice doubles until the supremum moves
    by less than 1e-4 relative.
    """
    r = ball.radius
    if not (0.0 < r < 1.0):
        raise InvalidArgument("compute_H needs a ball radius in (0, 1)")
    if probe_count < 8:
        raise InvalidArgument("probe_count must be at least 8")
    x = ball.center
    if len(x) != triplet.d:
        raise InvalidArgument("ball center dimension mismatch")

    def on_lattice(pts):
        vals = np.empty(len(pts))
        for i, y in enumerate(pts):
            a = triplet.a_at(y)
            spec = triplet.nu_at(y)
            drift = triplet.b_at(y) - spec.shell_mean(r, 1.0)
            vals[i] = (
                (2.0 / r ** 2) * (0.5 * float(np.trace(a)) + float((y - x) @ drift))
                + spec.truncated_second_moment(r) / r ** 2
                + spec.tail_mass(r, strict=True)
            )
        return vals

    return _refine_extremum(on_lattice, x, r, triplet.d, probe_count, np.max)


def compute_h(triplet: StateTriplet, ball: BallSpec, probe_count: int = 64) -> float:
    """Lattice infimum of nu(y, {|z| >= 3r}) over the probe ball.

    The closed probe lattice can only lower the infimum, which keeps every
    bound built from h valid.
    """
    r = ball.radius
    if probe_count < 8:
        raise InvalidArgument("probe_count must be at least 8")
    x = ball.center
    if len(x) != triplet.d:
        raise InvalidArgument("ball center dimension mismatch")

    def on_lattice(pts):
        return np.array([triplet.nu_at(y).tail_mass(3.0 * r, strict=False) for y in pts])

    return _refine_extremum(on_lattice, x, r, triplet.d, probe_count, np.min)


@dataclass(frozen=True)
class BoundReport:
    """Exit-time bounds for B(x, r) and the expectation sandwich for B(x, 2r).

    ``p_exit_upper(t)``   = t H(x, r) / (1 - e^{-1})  clipped to [0, 1]
    ``p_survive_upper(t)``= 1 / (t h(x, r))           clipped to [0, 1]
    ``e_tau_lower``       = (1 - e^{-1}) / (4 H(x, r))      for E tau_{B(x,2r)}
    ``e_tau_upper``       = 4 / h(x, 6r)                    for E tau_{B(x,2r)}
    ``note`` records exactly which radii each piece used.
    """

    ball: BallSpec
    H: float
    h: float
    h_upper: float
    e_tau_lower: float
    e_tau_upper: float
    e_tau_lower_vacuous: bool
    e_tau_upper_vacuous: bool
    note: str

    def p_exit_upper(self, t) -> float:
        if t < 0.0:
            raise InvalidArgument("time must be >= 0")
        return min(1.0, t * self.H / (1.0 - math.exp(-1.0)))

    def p_survive_upper(self, t) -> float:
        if t <= 0.0:
            raise InvalidArgument("time must be positive")
        if self.h == 0.0:
            return 1.0
        return min(1.0, 1.0 / (t * self.h))


def bound_report(triplet: StateTriplet, ball: BallSpec, probe_count: int = 64) -> BoundReport:
    """Assemble the probability bounds and the expectation sandwich.

    H is evaluated at the ball radius r itself; the lower expectation
    bound transfers to B(x, 2r) by tau monotonicity.  The upper bound
    comes from the proof's doubling iteration at ball radius 2r, which
    needs h at ball radius 3 * (2r) = 6r, i.e. jump tails at |z| >= 18r.
    A vanishing h makes the survival/upper bounds vacuous, which is
    flagged rather than hidden.
    """
    r = ball.radius
    H = compute_H(triplet, ball, probe_count)
    h = compute_h(triplet, ball, probe_count)
    h6 = compute_h(triplet, BallSpec(ball.center, 6.0 * r), probe_count)
    lower = C_LOWER / H if H > 0.0 else math.inf
    upper = C_UPPER / h6 if h6 > 0.0 else math.inf
    note = (
        f"lower: E tau_B(x,{2 * r:g}) >= c1/H with c1=(1-1/e)/4={C_LOWER:.6f}, "
        f"H at ball radius r={r:g} (monotonicity tau_B(x,r) <= tau_B(x,2r)); "
        f"upper: E tau_B(x,{2 * r:g}) <= c2/h with c2=4, h at ball radius {6 * r:g} "
        f"(doubling iteration), jump tail at |z| >= {18 * r:g}; "
        f"p_exit/p_survive use H, h at ball radius r={r:g}. "
        "Lattice sup/inf certify extrema only up to the probe refinement."
    )
    return BoundReport(
        ball=ball,
        H=H,
        h=h,
        h_upper=h6,
        e_tau_lower=lower,
        e_tau_upper=upper,
        e_tau_lower_vacuous=not math.isfinite(lower),
        e_tau_upper_vacuous=not math.isfinite(upper),
        note=note,
    )

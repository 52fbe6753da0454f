"""State-dependent Levy triplets and their characteristic symbols.

A triplet (a(x), b(x), nu(x, dz)) determines the symbol

    p(x, xi) = 1/2 xi.a(x)xi - i b(x).xi
               + int (1 - e^{i z.xi} + i z.xi 1_{|z|<=1}) nu(x, dz).

Jump measures are restricted to three evaluable families (radial power,
finitely many atoms, zero) so that tail masses and truncated moments are
exact, or certified by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import InvalidArgument, NumericFailure

__all__ = [
    "LevyMeasureSpec",
    "StateTriplet",
    "StableLikeIndex",
    "stable_constant",
    "eval_symbol",
    "coeff_bound",
    "radial_symbol_quadrature",
    "ball_lattice",
]


def sphere_surface_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0)


def stable_constant(alpha: float, d: int = 1) -> float:
    """Normalizing constant C_alpha with
    |xi|^alpha = C_alpha * int (1 - cos(xi.z)) |z|^{-d-alpha} dz.

    C_alpha = alpha 2^{alpha-1} Gamma((alpha+d)/2) / (pi^{d/2} Gamma(1-alpha/2)).
    """
    if not (0.0 < alpha < 2.0):
        raise InvalidArgument(f"alpha must lie in (0, 2), got {alpha}")
    if d < 1:
        raise InvalidArgument(f"dimension must be >= 1, got {d}")
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * special.gamma((alpha + d) / 2.0)
        / (math.pi ** (d / 2.0) * special.gamma(1.0 - alpha / 2.0))
    )


def _as_point(x, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (d,):
        raise InvalidArgument(f"expected a point in R^{d}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("non-finite coordinates")
    return v


@dataclass(frozen=True)
class LevyMeasureSpec:
    """One of three evaluable jump-measure families.

    kind = "radial-power":  nu(dz) = c |z|^{-d-alpha} dz,  alpha in (0, 2)
    kind = "finite-atoms":  nu = sum_i w_i delta_{z_i},     w_i > 0, z_i != 0
    kind = "zero":          nu = 0
    """

    kind: str
    d: int = 1
    c: float = 0.0
    alpha: float = 1.0
    atoms: tuple = ()  # tuple of (point tuple, weight)

    def __post_init__(self):
        if self.kind == "radial-power":
            if not (0.0 < self.alpha < 2.0):
                raise InvalidArgument(
                    f"radial-power exponent must lie in (0, 2), got {self.alpha}"
                )
            if self.c < 0.0:
                raise InvalidArgument("radial-power intensity must be >= 0")
        elif self.kind == "finite-atoms":
            norm_atoms = []
            for z, w in self.atoms:
                zv = np.atleast_1d(np.asarray(z, dtype=float))
                if zv.shape != (self.d,):
                    raise InvalidArgument("atom location has wrong dimension")
                if w <= 0.0:
                    raise InvalidArgument("atom masses must be positive")
                if np.linalg.norm(zv) == 0.0:
                    raise InvalidArgument("atoms must sit away from the origin")
                norm_atoms.append((tuple(zv), float(w)))
            object.__setattr__(self, "atoms", tuple(norm_atoms))
        elif self.kind != "zero":
            raise InvalidArgument(f"unknown Levy measure kind {self.kind!r}")

    @classmethod
    def radial_power(cls, d: int, c: float, alpha: float) -> "LevyMeasureSpec":
        return cls(kind="radial-power", d=d, c=c, alpha=alpha)

    @classmethod
    def finite_atoms(cls, atoms: Sequence, d: int = 1) -> "LevyMeasureSpec":
        return cls(kind="finite-atoms", d=d, atoms=tuple(atoms))

    @classmethod
    def zero(cls, d: int = 1) -> "LevyMeasureSpec":
        return cls(kind="zero", d=d)

    def _atom_arrays(self):
        z = np.array([a for a, _ in self.atoms], dtype=float).reshape(len(self.atoms), self.d)
        w = np.array([w for _, w in self.atoms], dtype=float)
        return z, w

    def tail_mass(self, r: float, strict: bool = True) -> float:
        """nu({|z| > r}) (strict) or nu({|z| >= r})."""
        if r <= 0.0:
            raise InvalidArgument("tail radius must be positive")
        if self.kind == "zero":
            return 0.0
        if self.kind == "radial-power":
            # int_{|z|>r} c |z|^{-d-a} dz = c S_{d-1} r^{-a} / a
            return self.c * sphere_surface_area(self.d) * r ** (-self.alpha) / self.alpha
        z, w = self._atom_arrays()
        norms = np.linalg.norm(z, axis=1)
        sel = norms > r if strict else norms >= r
        return float(w[sel].sum())

    def truncated_second_moment(self, r: float) -> float:
        """int_{|z| <= r} |z|^2 nu(dz)."""
        if r <= 0.0:
            raise InvalidArgument("truncation radius must be positive")
        if self.kind == "zero":
            return 0.0
        if self.kind == "radial-power":
            # c S_{d-1} int_0^r s^{1-a} ds = c S_{d-1} r^{2-a} / (2-a)
            return (
                self.c
                * sphere_surface_area(self.d)
                * r ** (2.0 - self.alpha)
                / (2.0 - self.alpha)
            )
        z, w = self._atom_arrays()
        norms = np.linalg.norm(z, axis=1)
        sel = norms <= r
        return float((w[sel] * norms[sel] ** 2).sum())

    def shell_mean(self, r_lo: float, r_hi: float) -> np.ndarray:
        """int_{r_lo < |z| <= r_hi} z nu(dz); zero by symmetry for radial power."""
        if self.kind in ("zero", "radial-power"):
            return np.zeros(self.d)
        z, w = self._atom_arrays()
        norms = np.linalg.norm(z, axis=1)
        sel = (norms > r_lo) & (norms <= r_hi)
        return (z[sel] * w[sel, None]).sum(axis=0)

    def total_mass(self) -> float:
        """nu(R^d \\ {0}); infinite for radial power."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "radial-power":
            return math.inf if self.c > 0 else 0.0
        return float(sum(w for _, w in self.atoms))

    def small_jump_covariance(self, eps: float) -> np.ndarray:
        """int_{|z| <= eps} z z^T nu(dz); isotropic for radial power."""
        if self.kind == "zero":
            return np.zeros((self.d, self.d))
        if self.kind == "radial-power":
            return self.truncated_second_moment(eps) / self.d * np.eye(self.d)
        z, w = self._atom_arrays()
        norms = np.linalg.norm(z, axis=1)
        sel = norms <= eps
        zs = z[sel]
        return (zs[:, :, None] * zs[:, None, :] * w[sel, None, None]).sum(axis=0)


@dataclass(frozen=True)
class StateTriplet:
    """State-dependent Levy characteristics (a(x), b(x), nu(x, dz)).

    ``a`` maps a state to a symmetric PSD d x d matrix, ``b`` to a
    d-vector, ``nu`` to a :class:`LevyMeasureSpec`.  Scalars are accepted
    for d = 1.
    """

    d: int
    a: Callable
    b: Callable
    nu: Callable
    coeff_bound_hint: Optional[float] = None
    is_constant: bool = False  # set by .constant(): coefficients do not depend on x

    def a_at(self, x) -> np.ndarray:
        m = np.asarray(self.a(_as_point(x, self.d)), dtype=float)
        m = m.reshape(self.d, self.d) if m.ndim >= 1 and m.size == self.d * self.d else np.atleast_2d(m) * np.eye(self.d)
        return m

    def b_at(self, x) -> np.ndarray:
        v = np.atleast_1d(np.asarray(self.b(_as_point(x, self.d)), dtype=float))
        if v.shape != (self.d,):
            raise InvalidArgument("drift map must return a d-vector")
        return v

    def nu_at(self, x) -> LevyMeasureSpec:
        spec = self.nu(_as_point(x, self.d))
        if not isinstance(spec, LevyMeasureSpec):
            raise InvalidArgument("nu map must return a LevyMeasureSpec")
        return spec

    def validate_at(self, states: Sequence) -> None:
        """Check symmetry/PSD of a(x) and integrability of nu(x, .) at probes."""
        for x in states:
            m = self.a_at(x)
            if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
                raise InvalidArgument(f"a({x}) is not symmetric within 1e-12")
            eigmin = float(np.linalg.eigvalsh(m).min())
            if eigmin < -1e-10:
                raise InvalidArgument(f"a({x}) has eigenvalue {eigmin} < -1e-10")
            spec = self.nu_at(x)
            # 1 ^ |z|^2 integrability: exact for all three families
            total = spec.truncated_second_moment(1.0) + spec.tail_mass(1.0)
            if not math.isfinite(total):
                raise InvalidArgument(f"nu({x}) fails the 1^|z|^2 integrability test")

    @classmethod
    def constant(cls, d, a, b, nu: LevyMeasureSpec, coeff_bound_hint=None) -> "StateTriplet":
        a_mat = np.asarray(a, dtype=float) * np.eye(d) if np.ndim(a) == 0 else np.asarray(a, dtype=float)
        b_vec = np.full(d, float(b)) if np.ndim(b) == 0 else np.asarray(b, dtype=float)
        return cls(d=d, a=lambda x: a_mat, b=lambda x: b_vec, nu=lambda x: nu,
                   coeff_bound_hint=coeff_bound_hint, is_constant=True)


@dataclass(frozen=True)
class StableLikeIndex:
    """Variable stability index alpha(x) with hard bounds 0 < lower <= upper < 2."""

    alpha: Callable
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 < self.lower <= self.upper < 2.0):
            raise InvalidArgument("index bounds must satisfy 0 < lower <= upper < 2")

    def at(self, x) -> np.ndarray:
        a = np.asarray(self.alpha(np.asarray(x, dtype=float)), dtype=float)
        if np.any(a < self.lower - 1e-12) or np.any(a > self.upper + 1e-12):
            raise InvalidArgument("alpha(x) leaves its declared bounds")
        return np.clip(a, self.lower, self.upper)

    def validate_at(self, states) -> None:
        for x in states:
            self.at(x)


# ---------------------------------------------------------------------------
# adaptive quadrature for the radial-power symbol integral (d = 1)
# ---------------------------------------------------------------------------

def _adaptive_simpson(f, a, b, tol, budget):
    """Adaptive Simpson on [a, b]; budget is a mutable [evals_left]."""

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        budget[0] -= 2
        if budget[0] <= 0:
            raise NumericFailure(
                "adaptive quadrature exceeded its evaluation cap",
                residual=abs(whole),
            )
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0
        )

    m = 0.5 * (a + b)
    budget[0] -= 3
    fa, fm, fb = f(a), f(m), f(b)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol)


def radial_symbol_quadrature(c: float, alpha: float, xi: float,
                             abs_tol: float = 1e-8, max_evals: int = 10 ** 6) -> float:
    """Quadrature route for int_R (1 - cos(xi z)) c |z|^{-1-alpha} dz (d = 1).

    The integrand is split into a series piece near 0, adaptive Simpson on
    the oscillatory middle, and a two-term integration-by-parts tail whose
    remainder is certified below ``abs_tol``.  Exceeding ``max_evals``
    raises :class:`NumericFailure` with the residual estimate.
    """
    if not (0.0 < alpha < 2.0):
        raise InvalidArgument("alpha must lie in (0, 2)")
    if not math.isfinite(xi):
        raise InvalidArgument("frequency must be finite")
    xi = abs(float(xi))
    if xi == 0.0 or c == 0.0:
        return 0.0

    # series on [0, delta]: 1 - cos(xi z) = sum (-1)^{k+1} (xi z)^{2k} / (2k)!
    delta = min(0.05 / xi, 0.05)
    head = 0.0
    for k in range(1, 8):
        term = (-1.0) ** (k + 1) * xi ** (2 * k) * delta ** (2 * k - alpha) / (
            math.factorial(2 * k) * (2 * k - alpha)
        )
        head += term
    # tail from V: exact power piece + two by-parts terms, remainder bound
    V = max(delta * 2.0, 10.0 / xi)
    while (1.0 + alpha) / (xi ** 2) * V ** (-2.0 - alpha) > abs_tol / (4.0 * c * 2.0):
        V *= 2.0
    tail = V ** (-alpha) / alpha
    tail += math.sin(xi * V) / xi * V ** (-1.0 - alpha)
    tail -= (1.0 + alpha) * math.cos(xi * V) / (xi ** 2) * V ** (-2.0 - alpha)

    budget = [max_evals]
    body = _adaptive_simpson(
        lambda z: (1.0 - math.cos(xi * z)) * z ** (-1.0 - alpha),
        delta,
        V,
        abs_tol / (4.0 * c),
        budget,
    )
    return 2.0 * c * (head + body + tail)


# ---------------------------------------------------------------------------
# symbol evaluation
# ---------------------------------------------------------------------------

def eval_symbol(triplet: StateTriplet, x, xi, radial_method: str = "analytic",
                quad_tol: float = 1e-8) -> complex:
    """Evaluate the symbol p(x, xi) of a state-dependent triplet.

    The radial-power jump part is evaluated in closed form,
    ``c / C_alpha(d) * |xi|^alpha``; ``radial_method="quadrature"``
    switches to adaptive quadrature (d = 1 only, tolerance ``quad_tol``).
    Finite-atom measures are summed exactly.
    """
    xv = _as_point(x, triplet.d)
    xiv = _as_point(xi, triplet.d)

    a = triplet.a_at(xv)
    b = triplet.b_at(xv)
    p = 0.5 * float(xiv @ a @ xiv) - 1j * float(b @ xiv)

    spec = triplet.nu_at(xv)
    if spec.kind == "zero":
        return complex(p)
    if spec.kind == "radial-power":
        norm = float(np.linalg.norm(xiv))
        if radial_method == "analytic":
            p += spec.c / stable_constant(spec.alpha, spec.d) * norm ** spec.alpha
        elif radial_method == "quadrature":
            if triplet.d != 1:
                raise InvalidArgument("quadrature symbol route implemented for d = 1")
            p += radial_symbol_quadrature(spec.c, spec.alpha, norm, abs_tol=quad_tol)
        else:
            raise InvalidArgument(f"unknown radial method {radial_method!r}")
        return complex(p)
    z, w = spec._atom_arrays()
    dots = z @ xiv
    norms = np.linalg.norm(z, axis=1)
    inside = norms <= 1.0
    p += complex((w * (1.0 - np.exp(1j * dots))).sum())
    p += 1j * float((w[inside] * dots[inside]).sum())
    return complex(p)


# ---------------------------------------------------------------------------
# deterministic lattices and the bounded-coefficients certificate
# ---------------------------------------------------------------------------

_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _van_der_corput(n: int, base: int) -> np.ndarray:
    out = np.zeros(n)
    for i in range(n):
        f, num, v = 1.0, i + 1, 0.0
        while num > 0:
            f /= base
            num, rem = divmod(num, base)
            v += rem * f
        out[i] = v
    return out


def ball_lattice(center, radius: float, n: int, d: int) -> np.ndarray:
    """Deterministic low-discrepancy lattice of ~n points in the closed ball.

    Always contains the center; for d = 1 the endpoints are included so
    extrema on the boundary are probed.
    """
    center = _as_point(center, d)
    if d == 1:
        m = max(n - 3, 1)
        u = _van_der_corput(m, 2)
        pts = center[0] + radius * (2.0 * u - 1.0)
        pts = np.concatenate([[center[0] - radius, center[0], center[0] + radius], pts])
        return pts.reshape(-1, 1)
    if d + 1 > len(_HALTON_PRIMES):
        raise InvalidArgument("lattice supports dimension <= 9")
    m = max(n - 1, 1)
    cols = [_van_der_corput(m, _HALTON_PRIMES[k]) for k in range(d + 1)]
    gauss = special.ndtri(np.clip(np.column_stack(cols[:d]), 1e-12, 1 - 1e-12))
    dirs = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    radii = radius * cols[d] ** (1.0 / d)
    pts = center[None, :] + dirs * radii[:, None]
    return np.vstack([center[None, :], pts])


def _freq_lattice(n: int, d: int) -> np.ndarray:
    """Deterministic lattice on {|xi| <= 1}: directions x radial levels, |xi| = 1 included."""
    if d == 1:
        m = max(n // 2, 4)
        radii = np.arange(1, m + 1) / m
        return np.concatenate([radii, -radii]).reshape(-1, 1)
    n_rad = 8
    n_dir = max(n // n_rad, 4)
    sphere = ball_lattice(np.zeros(d), 1.0, 4 * n_dir, d)[1:]
    sphere = sphere / np.linalg.norm(sphere, axis=1, keepdims=True)
    sphere = sphere[:n_dir]
    radii = np.arange(1, n_rad + 1) / n_rad
    return (sphere[None, :, :] * radii[:, None, None]).reshape(-1, d)


def coeff_bound(triplet: StateTriplet, probe_states: Sequence, n_points: int = 64) -> float:
    """Bounded-coefficients certificate 2 sup_{|xi| <= 1} |p(x, xi)| maximized
    over the probe states.

    The inner sup is approximated on a deterministic lattice of at least
    ``n_points`` frequencies, so the result is a lattice lower bound of the
    true supremum; |xi| = 1 is always included.
    """
    probe_states = list(probe_states)
    if not probe_states:
        raise InvalidArgument("probe_states must be non-empty")
    lattice = _freq_lattice(max(n_points, 64), triplet.d)
    best = 0.0
    for x in probe_states:
        for xi in lattice:
            best = max(best, abs(eval_symbol(triplet, x, xi)))
    return 2.0 * best

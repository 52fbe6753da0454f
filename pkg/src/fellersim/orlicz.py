"""Numeric Orlicz-space toolkit over finite discrete measures.

Young functions come in four public flavours (power, scaled power,
exp(|x|)-1, tabulated convex); conjugates of the power family stay in
closed form, everything else is handled by one-dimensional numerics.
Norms are computed on weighted point masses only -- continuous measures
enter through whatever discretization the caller performs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import ConstructionFailure, InvalidArgument, NumericFailure

__all__ = [
    "YoungFunction",
    "DiscreteMeasure",
    "legendre",
    "luxemburg_norm",
    "orlicz_norm",
    "holder_defect",
    "minkowski_defect",
    "young_from_uniform_integrability",
    "young_inverse",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class YoungFunction:
    """An evaluable convex even function with Phi(0) = 0 and Phi(inf) = inf.

    Construct through the classmethods :meth:`power`, :meth:`scaled_power`,
    :meth:`exp_minus_one`, :meth:`tabulated`.  Evaluation accepts scalars
    or arrays and may return ``inf`` (conjugates of linear growth).
    """

    def __init__(self, kind, p=None, c=None, xs=None, ys=None, threshold=None, base=None):
        self.kind = kind
        self.p = p
        self.c = c
        self.xs = xs
        self.ys = ys
        self.threshold = threshold
        self.base = base
        self._validate()

    # -- constructors -------------------------------------------------

    @classmethod
    def power(cls, p: float) -> "YoungFunction":
        return cls("power", p=float(p), c=1.0)

    @classmethod
    def scaled_power(cls, p: float, c: float) -> "YoungFunction":
        return cls("scaled-power", p=float(p), c=float(c))

    @classmethod
    def exp_minus_one(cls) -> "YoungFunction":
        return cls("exp-minus-one")

    @classmethod
    def tabulated(cls, xs, ys) -> "YoungFunction":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return cls("tabulated", xs=xs, ys=ys)

    @classmethod
    def indicator(cls, threshold: float) -> "YoungFunction":
        """0 on [0, threshold], +inf beyond; the conjugate of c|x|."""
        return cls("indicator", threshold=float(threshold))

    # -- validation ----------------------------------------------------

    def _validate(self):
        if self.kind in ("power", "scaled-power"):
            if self.p < 1.0:
                raise InvalidArgument("power exponent must be >= 1")
            if self.c <= 0.0:
                raise InvalidArgument("power scale must be > 0")
        elif self.kind == "tabulated":
            xs, ys = self.xs, self.ys
            if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
                raise InvalidArgument("tabulated grid needs matching 1-d arrays, >= 2 points")
            if xs[0] != 0.0 or ys[0] != 0.0:
                raise InvalidArgument("tabulated grid must start at (0, 0)")
            if np.any(np.diff(xs) <= 0.0):
                raise InvalidArgument("tabulated abscissae must be strictly increasing")
            if np.any(ys < 0.0):
                raise InvalidArgument("tabulated values must be non-negative")
            slopes = np.diff(ys) / np.diff(xs)
            if np.any(np.diff(slopes) < -1e-12):
                raise InvalidArgument("tabulated values are not convex")
            if slopes[-1] <= 0.0:
                raise InvalidArgument("tabulated function must grow at the grid max")
        elif self.kind == "indicator":
            if self.threshold <= 0.0:
                raise InvalidArgument("indicator threshold must be positive")
        elif self.kind not in ("exp-minus-one", "numeric-conjugate"):
            raise InvalidArgument(f"unknown Young function kind {self.kind!r}")
        # midpoint convexity + growth spot checks on a default grid
        if self.kind in ("power", "scaled-power", "exp-minus-one"):
            g = np.linspace(0.0, 8.0, 33)
            v = self(g)
            mid = self(0.5 * (g[:-1] + g[1:]))
            if np.any(mid > 0.5 * (v[:-1] + v[1:]) + 1e-9 * (1.0 + np.abs(v[1:]))):
                raise InvalidArgument("midpoint convexity check failed")

    # -- evaluation ----------------------------------------------------

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self.kind in ("power", "scaled-power"):
            out = self.c * x ** self.p
        elif self.kind == "exp-minus-one":
            out = np.expm1(x)
        elif self.kind == "tabulated":
            out = np.interp(x, self.xs, self.ys)
            s_last = (self.ys[-1] - self.ys[-2]) / (self.xs[-1] - self.xs[-2])
            beyond = x > self.xs[-1]
            if np.any(beyond):
                out = np.where(beyond, self.ys[-1] + s_last * (x - self.xs[-1]), out)
        elif self.kind == "indicator":
            out = np.where(x <= self.threshold, 0.0, np.inf)
        elif self.kind == "numeric-conjugate":
            base = self.base
            if base.kind == "tabulated":
                # conjugate of a piecewise-linear convex function sits at a
                # kink; beyond the final slope the linear extension makes the
                # supremum infinite
                s_last = (base.ys[-1] - base.ys[-2]) / (base.xs[-1] - base.xs[-2])
                kinks = np.max(x[:, None] * base.xs[None, :] - base.ys[None, :], axis=1)
                out = np.where(x > s_last * (1.0 + 1e-12), np.inf,
                               np.maximum(kinks, 0.0))
            else:
                out = np.array([legendre(base, float(v)) for v in x])
        else:  # pragma: no cover
            raise InvalidArgument(self.kind)
        return float(out[0]) if scalar else out

    # -- structure -----------------------------------------------------

    def conjugate(self) -> "YoungFunction":
        """Legendre conjugate; closed form inside the power family,
        a numeric wrapper around :func:`legendre` otherwise."""
        if self.kind in ("power", "scaled-power"):
            if self.p == 1.0:
                return YoungFunction.indicator(self.c)
            q = self.p / (self.p - 1.0)
            c_conj = (1.0 - 1.0 / self.p) * (self.c * self.p) ** (-1.0 / (self.p - 1.0))
            return YoungFunction.scaled_power(q, c_conj)
        if self.kind == "indicator":
            return YoungFunction.scaled_power(1.0, self.threshold)
        return YoungFunction("numeric-conjugate", base=self)

    def strictly_positive(self) -> bool:
        """Phi(x) > 0 for every representable x > 0 (needed by the
        ultracontractivity direction)."""
        probe = np.array([1e-8, 1e-3, 0.1])
        return bool(np.all(np.asarray(self(probe)) > 0.0))

    def __repr__(self):
        if self.kind in ("power", "scaled-power"):
            return f"YoungFunction({self.kind}, p={self.p}, c={self.c})"
        return f"YoungFunction({self.kind})"


def young_inverse(phi: YoungFunction, t: float) -> float:
    """Generalized inverse sup{x >= 0 : Phi(x) <= t} by bisection."""
    if t < 0.0:
        raise InvalidArgument("inverse argument must be >= 0")
    hi = 1.0
    for _ in range(300):
        if phi(hi) > t:
            break
        hi *= 2.0
    else:
        return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) <= t:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point masses; the substrate every norm here is computed on."""

    points: np.ndarray
    weights: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(pts):
            raise InvalidArgument("weights must be one per atom")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("weights must be finite and non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total", float(w.sum()))

    def __len__(self):
        return len(self.weights)

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        n = len(pts)
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def is_probability(self) -> bool:
        return abs(self.total - 1.0) <= 1e-9

    def values_of(self, f) -> np.ndarray:
        if callable(f):
            try:
                vals = np.asarray(f(self.points), dtype=float)
                if vals.shape != (len(self),):
                    raise ValueError
            except Exception:
                vals = np.array([float(f(p)) for p in self.points])
        else:
            vals = np.asarray(f, dtype=float)
        if vals.shape != (len(self),):
            raise InvalidArgument("function values must match the atom count")
        return vals


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def _golden_max(m, lo, hi, rel_tol=1e-9):
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = m(x1), m(x2)
    while (b - a) > rel_tol * max(1.0, abs(b)):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = m(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = m(x1)
    x = 0.5 * (a + b)
    return max(m(x), f1, f2)


def legendre(phi: YoungFunction, y: float) -> float:
    """Legendre transform Phi_c(y) = sup_{x >= 0} (x |y| - Phi(x)).

    Closed form for the power family; golden-section refinement over a
    bracketing grid otherwise (relative tolerance 1e-9 in the argument).
    A tabulated Phi whose grid cannot bracket the supremum raises
    :class:`NumericFailure`.
    """
    if not math.isfinite(y):
        raise InvalidArgument("legendre argument must be finite")
    y = abs(float(y))
    if phi.kind in ("power", "scaled-power"):
        p, c = phi.p, phi.c
        if p == 1.0:
            return 0.0 if y <= c else math.inf
        xstar = (y / (c * p)) ** (1.0 / (p - 1.0))
        return max(0.0, y * xstar - c * xstar ** p)
    if phi.kind == "indicator":
        return phi.threshold * y
    if y == 0.0:
        return 0.0

    def m(x):
        return x * y - float(phi(x))

    if phi.kind == "tabulated":
        s_last = (phi.ys[-1] - phi.ys[-2]) / (phi.xs[-1] - phi.xs[-2])
        if y > s_last * (1.0 + 1e-12):
            raise NumericFailure(
                "tabulated grid does not bracket the Legendre supremum",
                residual=y - s_last,
            )
        hi = float(phi.xs[-1])
    elif phi.kind == "exp-minus-one":
        hi = max(2.0, math.log1p(y) + 2.0)
    else:
        hi = 1.0
        for _ in range(200):
            if m(2.0 * hi) <= m(hi):
                break
            hi *= 2.0
        else:
            raise NumericFailure("Legendre bracket expansion did not terminate")
        hi *= 2.0
    # coarse grid to localize the (concave) maximum, then golden refine
    grid = np.linspace(0.0, hi, 65)
    vals = np.array([m(g) for g in grid])
    j = int(vals.argmax())
    lo = grid[max(j - 1, 0)]
    up = grid[min(j + 1, len(grid) - 1)]
    return max(0.0, _golden_max(m, lo, up))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def _modular(values, weights, phi, scale):
    """sum_i w_i Phi(scale * |f_i|) with 0-weight atoms masked (0 * inf)."""
    live = weights > 0.0
    if not np.any(live):
        return 0.0
    v = phi(np.abs(values[live]) * scale)
    return float(np.sum(np.where(weights[live] > 0.0, weights[live] * v, 0.0)))


def luxemburg_norm(f, mu: DiscreteMeasure, phi: YoungFunction) -> float:
    """Luxemburg norm inf{lambda > 0 : int Phi(f / lambda) dmu <= 1}.

    Bisection on lambda (the modular is non-increasing in lambda),
    relative tolerance 1e-10; returns 0 for f = 0 mu-a.e.
    """
    if mu.total <= 0.0:
        raise InvalidArgument("measure must have positive total mass")
    vals = mu.values_of(f)
    if not np.all(np.isfinite(vals)):
        raise InvalidArgument("function values must be finite on all atoms")
    live = mu.weights > 0.0
    fmax = float(np.abs(vals[live]).max(initial=0.0))
    if fmax == 0.0:
        return 0.0

    def G(lam):
        return _modular(vals, mu.weights, phi, 1.0 / lam)

    hi = fmax * max(1.0, mu.total)
    for _ in range(400):
        if G(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise NumericFailure("Luxemburg bracket expansion failed upward")
    lo = hi
    for _ in range(400):
        lo *= 0.5
        if G(lo) > 1.0:
            break
    else:
        # modular stays <= 1 for every lambda probed: norm is numerically 0
        return 0.0
    while (hi - lo) > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if G(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def orlicz_norm(f, mu: DiscreteMeasure, phi: YoungFunction) -> float:
    """Orlicz norm via the Amemiya representation
    inf_{k > 0} (1 + int Phi(k f) dmu) / k.

    The objective is quasiconvex in k; a geometric scan brackets the
    minimum and golden-section refines it (relative tolerance 1e-9).
    Linear-growth Phi attains the infimum only as k -> inf; the scan
    detects the plateau and returns the asymptotic value.  A bracket that
    keeps escaping after 200 expansions raises :class:`NumericFailure`.
    """
    if mu.total <= 0.0:
        raise InvalidArgument("measure must have positive total mass")
    vals = mu.values_of(f)
    if not np.all(np.isfinite(vals)):
        raise InvalidArgument("function values must be finite on all atoms")
    live = mu.weights > 0.0
    fmax = float(np.abs(vals[live]).max(initial=0.0))
    if fmax == 0.0:
        return 0.0

    def A(k):
        return (1.0 + _modular(vals, mu.weights, phi, k)) / k

    k = 1.0 / fmax
    best_k, best = k, A(k)
    # walk left while the objective improves
    kl, expansions = k, 0
    while expansions < 200:
        cand = kl * 0.5
        v = A(cand)
        if v >= best:
            break
        best_k, best, kl = cand, v, cand
        expansions += 1
    # walk right, with plateau detection for linear growth
    kr, expansions, flat = k, 0, 0
    while expansions < 200:
        cand = kr * 2.0
        v = A(cand)
        if math.isinf(v) or v > best * (1.0 + 1e-12):
            break
        if v >= best * (1.0 - 1e-12):
            flat += 1
            if flat >= 4:
                return best  # asymptote reached (Phi of linear growth)
        else:
            flat = 0
        if v < best:
            best_k, best = cand, v
        kr = cand
        expansions += 1
    else:
        raise NumericFailure("Amemiya minimizer escaped the search bracket")

    lo, hi = best_k * 0.5, best_k * 2.0
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = A(x1), A(x2)
    while (b - a) > 1e-9 * b:
        if f1 > f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = A(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = A(x1)
    return min(best, f1, f2, A(0.5 * (a + b)))


def holder_defect(f, g, mu: DiscreteMeasure, phi: YoungFunction) -> float:
    """2 ||f||_(Phi) ||g||_(Phi_c) - int |f g| dmu  (>= -1e-9 up to roundoff)."""
    fv = mu.values_of(f)
    gv = mu.values_of(g)
    lhs = 2.0 * luxemburg_norm(fv, mu, phi) * luxemburg_norm(gv, mu, phi.conjugate())
    rhs = float(np.sum(mu.weights * np.abs(fv * gv)))
    if math.isinf(lhs):
        return math.inf
    return lhs - rhs


def minkowski_defect(F, mu: DiscreteMeasure, phi: YoungFunction) -> float:
    """int ||F(., y)||_Phi mu(dy) - ||int F(., y) mu(dy)||_Phi for F >= 0.

    ``F[i, j]`` holds F(x_i, y_j) on the atom grid of the probability
    measure ``mu``; both the inner norm and the mixing run over the same
    atoms.  The contract is defect >= -1e-9.
    """
    if not mu.is_probability:
        raise InvalidArgument("minkowski_defect requires a probability measure")
    Fm = np.asarray(F, dtype=float)
    n = len(mu)
    if Fm.shape != (n, n):
        raise InvalidArgument(f"F must be an ({n}, {n}) array over atom pairs")
    if np.any(Fm < 0.0) or not np.all(np.isfinite(Fm)):
        raise InvalidArgument("F must be non-negative and bounded")
    lhs = float(np.sum(mu.weights * np.array(
        [orlicz_norm(Fm[:, j], mu, phi) for j in range(n)])))
    mixed = Fm @ mu.weights
    rhs = orlicz_norm(mixed, mu, phi)
    return lhs - rhs


# ---------------------------------------------------------------------------
# de la Vallee-Poussin construction
# ---------------------------------------------------------------------------

def young_from_uniform_integrability(densities, mu: DiscreteMeasure,
                                     k_max: int = 20,
                                     threshold_cap: float = 1e12) -> YoungFunction:
    """Build a superlinear Young function certifying uniform integrability.

    Thresholds c_k are chosen so the worst tail mass over the family,
    sup_p int_{p > c_k} p dmu, drops below 2^{-k}; the returned tabulated
    function has slope k on [c_k, c_{k+1}], giving the telescoping bound
    sup_p int Phi(p) dmu <= sum_k k 2^{-k} = 2.  If some stage needs a
    threshold beyond ``threshold_cap`` the family is declared not
    uniformly integrable and :class:`ConstructionFailure` names the stage.
    """
    if not mu.is_probability:
        raise InvalidArgument("the reference measure must be a probability measure")
    dens = [mu.values_of(p) for p in densities]
    if not dens:
        raise InvalidArgument("need at least one density")
    for p in dens:
        if np.any(p < 0.0):
            raise InvalidArgument("densities must be non-negative")
        if float(np.sum(mu.weights * p)) > 1.0 + 1e-9:
            raise InvalidArgument("densities must integrate to at most 1")

    candidates = np.unique(np.concatenate([[0.0]] + [np.asarray(p) for p in dens]))

    def worst_tail(c):
        return max(float(np.sum(mu.weights[p > c] * p[p > c])) for p in dens)

    thresholds = []
    prev = 0.0
    for k in range(1, k_max + 1):
        target = 2.0 ** (-k)
        ck = None
        for c in candidates:
            if c < prev:
                continue
            if worst_tail(c) <= target:
                ck = max(float(c), prev)
                break
        if ck is None or ck > threshold_cap:
            raise ConstructionFailure(
                f"no threshold below {threshold_cap:g} achieves tail 2^-{k}; "
                "the family is not uniformly integrable on these atoms",
                level=k,
            )
        thresholds.append(ck)
        prev = ck

    # piecewise-linear Phi: slope k on [c_k, c_{k+1}], slope 0 before c_1
    xs = [0.0]
    ys = [0.0]
    for k, ck in enumerate(thresholds, start=1):
        if ck > xs[-1]:
            slope_before = k - 1
            ys.append(ys[-1] + slope_before * (ck - xs[-1]))
            xs.append(ck)
    # extend one segment beyond the last threshold with the final slope
    x_end = max(xs[-1] * 2.0, xs[-1] + 1.0)
    ys.append(ys[-1] + k_max * (x_end - xs[-1]))
    xs.append(x_end)
    return YoungFunction.tabulated(np.asarray(xs), np.asarray(ys))

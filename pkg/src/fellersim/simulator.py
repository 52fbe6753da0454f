"""Seeded Monte-Carlo engine for Levy and stable-like jump processes.

Randomness is counter-based: path ``i`` of a run with root seed ``s``
draws from ``Philox(key=[s, i])``, so results are bit-for-bit
reproducible and independent of how paths are distributed over workers.
Worker count comes from the ``FELLERSIM_WORKERS`` environment variable;
reductions always run in fixed path order.

Spatially homogeneous models (Brownian, isotropic stable, compound
Poisson) have exactly divisible increments, so Euler stepping introduces
no distributional error and terminal laws are sampled with a single
increment of the full duration.  The stable-like family is simulated by
coefficient freezing (the stability index is held at the current state
for one step); the generic-triplet family replaces jumps below a cutoff
by a Gaussian with matched covariance and compensates medium jumps
through the drift.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np

from .characteristics import LevyMeasureSpec, StableLikeIndex, StateTriplet, stable_constant
from .errors import InvalidArgument
from .orlicz import DiscreteMeasure

__all__ = [
    "Ball",
    "Box",
    "interval",
    "Brownian",
    "IsotropicStable",
    "CompoundPoisson",
    "StableLike",
    "GenericTriplet",
    "SimConfig",
    "ExitRecord",
    "PathCloud",
    "Estimate",
    "RefinementStudy",
    "path_generator",
    "worker_count",
    "sample_increment",
    "simulate_exit",
    "sample_terminal",
    "estimate_semigroup",
    "estimate_exit_functional",
    "estimate_resolvent",
    "exit_refinement",
]

_SEED_MASK = (1 << 64) - 1
_JUMP_STREAM_SALT = 0x9E3779B97F4A7C15


def worker_count() -> int:
    raw = os.environ.get("FELLERSIM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"FELLERSIM_WORKERS must be an integer, got {raw!r}")
    return max(n, 1)


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one path: Philox keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(key=[seed & _SEED_MASK, index & _SEED_MASK]))


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise InvalidArgument("ball radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def d(self):
        return len(self.center)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(np.linalg.norm(x - self.center) < self.radius)
        return np.linalg.norm(x - self.center[None, :], axis=1) < self.radius

    def boundary_distance(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.radius - np.linalg.norm(x - self.center))


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InvalidArgument("box must satisfy lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self):
        return len(self.lo)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(np.all(x > self.lo) and np.all(x < self.hi))
        return np.all((x > self.lo[None, :]) & (x < self.hi[None, :]), axis=1)

    def boundary_distance(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(min((x - self.lo).min(), (self.hi - x).min()))


def interval(lo: float, hi: float) -> Box:
    return Box(np.array([lo]), np.array([hi]))


Domain = Union[Ball, Box]


# ---------------------------------------------------------------------------
# stable variate kernels
# ---------------------------------------------------------------------------

def _cms_symmetric(alpha, u, w):
    """Chambers-Mallows-Stuck, beta = 0: cf exp(-|xi|^alpha).

    ``u`` uniform on (-pi/2, pi/2), ``w`` exponential(1); ``alpha`` may be
    an array (the exponent (1-alpha)/alpha is exactly 0 at alpha = 1, which
    reduces the formula to tan(u), the Cauchy case).
    """
    alpha = np.asarray(alpha, dtype=float)
    w = np.maximum(w, 1e-300)
    t1 = np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
    t2 = (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return t1 * t2


def _one_sided_stable(rho, u, w):
    """Kanter: positive stable with Laplace transform exp(-s^rho), 0 < rho < 1.

    ``u`` uniform on (0, 1), ``w`` exponential(1).
    """
    u = np.clip(u, 1e-16, 1.0 - 1e-16)
    w = np.maximum(w, 1e-300)
    a = (
        np.sin(rho * np.pi * u) ** (rho / (1.0 - rho))
        * np.sin((1.0 - rho) * np.pi * u)
        / np.sin(np.pi * u) ** (1.0 / (1.0 - rho))
    )
    return (a / w) ** ((1.0 - rho) / rho)


# ---------------------------------------------------------------------------
# process models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Brownian:
    sigma: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise InvalidArgument("sigma must be positive")

    state_independent = True

    def tail_index(self):
        return 2.0

    def increments(self, gen, n, dt):
        return gen.standard_normal((n, self.d)) * (self.sigma * math.sqrt(dt))

    def levy_triplet(self) -> StateTriplet:
        return StateTriplet.constant(self.d, self.sigma ** 2, 0.0, LevyMeasureSpec.zero(self.d))


@dataclass(frozen=True)
class IsotropicStable:
    alpha: float
    d: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise InvalidArgument("stable index must lie in (0, 2)")

    state_independent = True

    def tail_index(self):
        return self.alpha

    def increments(self, gen, n, dt):
        if self.d == 1:
            u = (gen.random(n) - 0.5) * np.pi
            w = gen.standard_exponential(n)
            return (_cms_symmetric(self.alpha, u, w) * dt ** (1.0 / self.alpha)).reshape(n, 1)
        # subordination: X = sqrt(2 S) Z with S positive (alpha/2)-stable
        u = gen.random(n)
        w = gen.standard_exponential(n)
        s = _one_sided_stable(self.alpha / 2.0, u, w) * dt ** (2.0 / self.alpha)
        z = gen.standard_normal((n, self.d))
        return np.sqrt(2.0 * s)[:, None] * z

    def levy_triplet(self) -> StateTriplet:
        nu = LevyMeasureSpec.radial_power(self.d, stable_constant(self.alpha, self.d), self.alpha)
        return StateTriplet.constant(self.d, 0.0, 0.0, nu)


@dataclass(frozen=True)
class CompoundPoisson:
    rate: float
    jumps: DiscreteMeasure
    d: int = 1

    def __post_init__(self):
        if self.rate < 0.0:
            raise InvalidArgument("jump rate must be >= 0")
        if self.rate > 0.0 and self.jumps.total <= 0.0:
            raise InvalidArgument("jump measure must have positive mass")

    state_independent = True

    def tail_index(self):
        return 1.0

    def _atoms(self):
        pts = np.asarray(self.jumps.points, dtype=float).reshape(len(self.jumps), self.d)
        probs = self.jumps.weights / self.jumps.total
        return pts, probs

    def increments(self, gen, n, dt):
        out = np.zeros((n, self.d))
        if self.rate == 0.0:
            return out
        counts = gen.poisson(self.rate * dt, n)
        total = int(counts.sum())
        if total == 0:
            return out
        pts, probs = self._atoms()
        draws = pts[gen.choice(len(pts), size=total, p=probs)]
        np.add.at(out, np.repeat(np.arange(n), counts), draws)
        return out

    def levy_triplet(self) -> StateTriplet:
        pts, probs = self._atoms()
        atoms = [(tuple(z), self.rate * p) for z, p in zip(pts, probs) if self.rate * p > 0]
        nu = LevyMeasureSpec.finite_atoms(atoms, d=self.d) if atoms else LevyMeasureSpec.zero(self.d)
        b = nu.shell_mean(0.0, 1.0)  # cancels the |z|<=1 compensator: raw jumps
        return StateTriplet.constant(self.d, 0.0, b, nu)


@dataclass(frozen=True)
class StableLike:
    """Jump process with symbol |xi|^{alpha(x)}, simulated by freezing the
    index at the current state for each Euler step."""

    index: StableLikeIndex
    d: int = 1

    state_independent = False

    def tail_index(self):
        return self.index.upper

    def alpha_at(self, x):
        return self.index.at(x)

    def levy_triplet(self) -> StateTriplet:
        def nu(x):
            a = float(self.index.at(x if self.d > 1 else x[0]))
            return LevyMeasureSpec.radial_power(self.d, stable_constant(a, self.d), a)

        return StateTriplet(
            d=self.d,
            a=lambda x: np.zeros((self.d, self.d)),
            b=lambda x: np.zeros(self.d),
            nu=nu,
        )


@dataclass(frozen=True)
class GenericTriplet:
    """Euler scheme for an arbitrary triplet: Gaussian part, compensated
    small jumps below ``eps`` replaced by a matched Gaussian
    (Asmussen-Rosinski), exact jumps above ``eps``.

    A constant-coefficient triplet is a Levy process: its approximating
    increments are infinitely divisible, so they are generated in chunks
    exactly like the named spatially homogeneous models.
    """

    triplet: StateTriplet
    eps: float = 1e-3

    def __post_init__(self):
        if self.eps <= 0.0:
            raise InvalidArgument("small-jump cutoff must be positive")

    @property
    def state_independent(self):
        return self.triplet.is_constant

    @property
    def d(self):
        return self.triplet.d

    def tail_index(self):
        return 2.0

    def levy_triplet(self) -> StateTriplet:
        return self.triplet

    def _constant_parts(self):
        x0 = np.zeros(self.d)
        t = self.triplet
        a = t.a_at(x0)
        b = t.b_at(x0)
        spec = t.nu_at(x0)
        if spec.kind == "finite-atoms":
            eps_eff, cov_small = 0.0, np.zeros((self.d, self.d))
            lam = spec.total_mass()
            drift = b - spec.shell_mean(0.0, 1.0)
        else:
            eps_eff = self.eps
            cov_small = spec.small_jump_covariance(eps_eff) if spec.kind != "zero" else np.zeros((self.d, self.d))
            lam = spec.tail_mass(eps_eff, strict=True) if spec.kind != "zero" else 0.0
            drift = b - spec.shell_mean(eps_eff, 1.0)
        cov = a + cov_small
        root = None
        if np.any(cov != 0.0):
            vals, vecs = np.linalg.eigh(cov)
            root = vecs @ (np.sqrt(np.clip(vals, 0.0, None))[:, None] * vecs.T)
        return drift, root, lam, spec, eps_eff

    def increments(self, gen, n, dt):
        if not self.triplet.is_constant:
            raise InvalidArgument("chunked increments need a constant triplet")
        drift, root, lam, spec, eps_eff = self._constant_parts()
        out = np.tile(drift * dt, (n, 1))
        if root is not None:
            out += math.sqrt(dt) * gen.standard_normal((n, self.d)) @ root.T
        if lam > 0.0:
            counts = gen.poisson(lam * dt, n)
            total = int(counts.sum())
            if total:
                if spec.kind == "finite-atoms":
                    z, w = spec._atom_arrays()
                    draws = z[gen.choice(len(w), size=total, p=w / w.sum())]
                else:
                    radii = eps_eff * gen.random(total) ** (-1.0 / spec.alpha)
                    if self.d == 1:
                        draws = np.where(gen.random(total) < 0.5, radii, -radii)[:, None]
                    else:
                        g = gen.standard_normal((total, self.d))
                        draws = radii[:, None] * g / np.linalg.norm(g, axis=1, keepdims=True)
                np.add.at(out, np.repeat(np.arange(n), counts), draws)
        return out

    def step(self, gen_main, gen_jump, x, dt):
        t = self.triplet
        d = t.d
        a = t.a_at(x)
        b = t.b_at(x)
        spec = t.nu_at(x)
        if spec.kind == "finite-atoms":
            eps_eff = 0.0
            cov_small = np.zeros((d, d))
            lam = spec.total_mass()
            drift = b - spec.shell_mean(0.0, 1.0)
        else:
            eps_eff = self.eps
            cov_small = spec.small_jump_covariance(eps_eff)
            lam = spec.tail_mass(eps_eff, strict=True) if spec.kind != "zero" else 0.0
            drift = b - spec.shell_mean(eps_eff, 1.0)
        disp = drift * dt
        cov = a + cov_small
        z = gen_main.standard_normal(d)
        if np.any(cov != 0.0):
            vals, vecs = np.linalg.eigh(cov)
            root = vecs @ (np.sqrt(np.clip(vals, 0.0, None))[:, None] * vecs.T)
            disp = disp + math.sqrt(dt) * (root @ z)
        if lam > 0.0:
            k = int(gen_jump.poisson(lam * dt))
            for _ in range(k):
                disp = disp + self._draw_jump(gen_jump, spec, eps_eff)
        return disp

    def _draw_jump(self, gen, spec, eps_eff):
        if spec.kind == "finite-atoms":
            z, w = spec._atom_arrays()
            probs = w / w.sum()
            return z[gen.choice(len(w), p=probs)]
        # radial power restricted to |z| > eps: Pareto radius, uniform direction
        r = eps_eff * gen.random() ** (-1.0 / spec.alpha)
        if spec.d == 1:
            return np.array([r if gen.random() < 0.5 else -r])
        g = gen.standard_normal(spec.d)
        return r * g / np.linalg.norm(g)


ProcessModel = Union[Brownian, IsotropicStable, CompoundPoisson, StableLike, GenericTriplet]


# ---------------------------------------------------------------------------
# configuration and result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    n_paths: int
    seed: int
    step_budget: float = 2e10

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise InvalidArgument("dt must be positive")
        if self.horizon < self.dt:
            raise InvalidArgument("horizon must be at least one step")
        if self.n_paths < 1:
            raise InvalidArgument("need at least one path")
        if not isinstance(self.seed, (int, np.integer)):
            raise InvalidArgument("seed must be an integer (no wall-clock default)")
        if self.n_paths * (self.horizon / self.dt) > self.step_budget:
            raise InvalidArgument(
                f"requested {self.n_paths * self.horizon / self.dt:.3g} steps "
                f"exceeds the step budget {self.step_budget:.3g}"
            )

    @property
    def max_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class ExitRecord:
    tau: float
    exit_position: np.ndarray
    censored: bool


@dataclass(frozen=True)
class PathCloud:
    t: float
    x0: np.ndarray
    positions: np.ndarray
    exit_records: Optional[List[ExitRecord]] = None


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n_effective: int
    censored_fraction: float = 0.0
    censor_bound: float = 0.0
    truncation_bound: float = 0.0
    unreliable: bool = False


@dataclass(frozen=True)
class RefinementStudy:
    dts: tuple
    means: tuple
    ses: tuple
    allowance: float
    kappa: float
    coupled: bool


# ---------------------------------------------------------------------------
# worker fan-out: contiguous path blocks, fork-inherited payload
# ---------------------------------------------------------------------------

_FORK_PAYLOAD = None


def _block_entry(bounds):
    lo, hi = bounds
    fn, args = _FORK_PAYLOAD
    return fn(lo, hi, *args)


def _map_blocks(fn, args, n_paths):
    workers = worker_count()
    if workers <= 1 or n_paths < 4 * workers:
        return [fn(0, n_paths, *args)]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return [fn(0, n_paths, *args)]
    size = -(-n_paths // workers)
    blocks = [(lo, min(lo + size, n_paths)) for lo in range(0, n_paths, size)]
    global _FORK_PAYLOAD
    _FORK_PAYLOAD = (fn, args)
    try:
        with ctx.Pool(workers) as pool:
            return pool.map(_block_entry, blocks)
    finally:
        _FORK_PAYLOAD = None


# ---------------------------------------------------------------------------
# public single-draw sampler
# ---------------------------------------------------------------------------

def sample_increment(model: ProcessModel, x, dt: float, gen: np.random.Generator,
                     size: Optional[int] = None):
    """Draw displacement(s) of one Euler step of duration ``dt`` started at ``x``.

    Returns shape (d,) for ``size=None`` and (size, d) otherwise.
    """
    if dt <= 0.0:
        raise InvalidArgument("dt must be positive")
    n = 1 if size is None else int(size)
    if isinstance(model, (Brownian, IsotropicStable, CompoundPoisson)):
        out = model.increments(gen, n, dt)
    elif isinstance(model, StableLike):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        alpha = float(model.alpha_at(xa if model.d > 1 else xa[0]))
        u = (gen.random(n) - 0.5) * np.pi
        w = gen.standard_exponential(n)
        if model.d == 1:
            out = (_cms_symmetric(alpha, u, w) * dt ** (1.0 / alpha)).reshape(n, 1)
        else:
            s = _one_sided_stable(alpha / 2.0, gen.random(n), gen.standard_exponential(n))
            out = np.sqrt(2.0 * s * dt ** (2.0 / alpha))[:, None] * gen.standard_normal((n, model.d))
    elif isinstance(model, GenericTriplet):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.stack([model.step(gen, gen, xa, dt) for _ in range(n)])
    else:
        raise InvalidArgument(f"unknown model {model!r}")
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# exit simulation
# ---------------------------------------------------------------------------

_CHUNK = 4096


def _exit_block_levy(lo, hi, model, domain, x0, cfg, levels):
    m = hi - lo
    d = model.d
    max_steps = cfg.max_steps - cfg.max_steps % (1 << (levels - 1))
    taus = np.full((levels, m), max_steps * cfg.dt)
    pos = np.tile(x0, (m, 1))
    censored = np.ones(m, dtype=bool)
    for j in range(m):
        gen = path_generator(cfg.seed, lo + j)
        x = x0.copy()
        k = 0
        open_levels = list(range(levels))
        while k < max_steps and open_levels:
            n = min(_CHUNK, max_steps - k)
            inc = model.increments(gen, n, cfg.dt)
            np.cumsum(inc, axis=0, out=inc)
            inc += x[None, :]
            inside = domain.contains(inc)
            if not inside.all():
                steps = np.arange(k + 1, k + n + 1)
                for lev in list(open_levels):
                    hitmask = (~inside) & (steps % (1 << lev) == 0)
                    idx = int(np.argmax(hitmask))
                    if hitmask[idx]:
                        taus[lev, j] = steps[idx] * cfg.dt
                        if lev == 0:
                            pos[j] = inc[idx]
                            censored[j] = False
                        open_levels.remove(lev)
            x = inc[-1]
            k += n
        if open_levels and 0 in open_levels:
            pos[j] = x
    return taus, pos, censored


def _exit_block_stable_like(lo, hi, model, domain, x0, cfg, levels):
    if levels != 1:
        raise InvalidArgument("coupled refinement needs a spatially homogeneous model")
    m = hi - lo
    max_steps = cfg.max_steps
    gens = [path_generator(cfg.seed, lo + j) for j in range(m)]
    x = np.tile(x0, (m, 1))
    alive = np.ones(m, dtype=bool)
    taus = np.full((1, m), max_steps * cfg.dt)
    pos = np.tile(x0, (m, 1))
    censored = np.ones(m, dtype=bool)
    chunk = 256
    k = 0
    while k < max_steps and alive.any():
        n = min(chunk, max_steps - k)
        U = np.zeros((m, n))
        W = np.ones((m, n))
        for j in range(m):
            if alive[j]:
                U[j] = gens[j].random(n)
                W[j] = gens[j].standard_exponential(n)
        for s in range(n):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            xa = x[idx]
            alpha = np.asarray(model.index.at(xa if model.d > 1 else xa[:, 0]), dtype=float)
            u = (U[idx, s] - 0.5) * np.pi
            w = W[idx, s]
            if model.d == 1:
                inc = (_cms_symmetric(alpha, u, w) * cfg.dt ** (1.0 / alpha))[:, None]
            else:
                sv = _one_sided_stable(alpha / 2.0, U[idx, s], w) * cfg.dt ** (2.0 / alpha)
                z = np.column_stack([gens[i].standard_normal(model.d) for i in idx]).T
                inc = np.sqrt(2.0 * sv)[:, None] * z
            xa = xa + inc
            x[idx] = xa
            out = ~domain.contains(xa)
            if out.any():
                hit = idx[out]
                taus[0, hit] = (k + s + 1) * cfg.dt
                pos[hit] = x[hit]
                censored[hit] = False
                alive[hit] = False
        k += n
    still = np.nonzero(censored)[0]
    pos[still] = x[still]
    return taus, pos, censored


def _exit_block_generic(lo, hi, model, domain, x0, cfg, levels):
    if levels != 1:
        raise InvalidArgument("coupled refinement needs a spatially homogeneous model")
    m = hi - lo
    max_steps = cfg.max_steps
    taus = np.full((1, m), max_steps * cfg.dt)
    pos = np.tile(x0, (m, 1))
    censored = np.ones(m, dtype=bool)
    for j in range(m):
        gen_main = path_generator(cfg.seed, lo + j)
        gen_jump = path_generator(cfg.seed ^ _JUMP_STREAM_SALT, lo + j)
        x = x0.copy()
        for k in range(max_steps):
            x = x + model.step(gen_main, gen_jump, x, cfg.dt)
            if not domain.contains(x):
                taus[0, j] = (k + 1) * cfg.dt
                pos[j] = x
                censored[j] = False
                break
        else:
            pos[j] = x
    return taus, pos, censored


def _exit_arrays(model, domain, x0, cfg, levels=1):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.d,):
        raise InvalidArgument(f"x0 must be a point in R^{model.d}")
    if not domain.contains(x0):
        raise InvalidArgument("the start point must lie inside the open domain")
    if model.state_independent:
        fn = _exit_block_levy
    elif isinstance(model, StableLike):
        fn = _exit_block_stable_like
    else:
        fn = _exit_block_generic
    parts = _map_blocks(fn, (model, domain, x0, cfg, levels), cfg.n_paths)
    taus = np.concatenate([p[0] for p in parts], axis=1)
    pos = np.concatenate([p[1] for p in parts], axis=0)
    censored = np.concatenate([p[2] for p in parts])
    return taus, pos, censored


def simulate_exit(model: ProcessModel, domain: Domain, x0, cfg: SimConfig) -> List[ExitRecord]:
    """First exit from ``domain``: Euler stepping, exit recorded at the first
    grid time outside (no overshoot correction), censoring at the horizon."""
    taus, pos, censored = _exit_arrays(model, domain, x0, cfg)
    return [ExitRecord(float(taus[0, i]), pos[i].copy(), bool(censored[i]))
            for i in range(cfg.n_paths)]


def exit_refinement(model, domain, x0, cfg, levels: int = 3,
                    tail_index: Optional[float] = None) -> RefinementStudy:
    """Discretization study: exit-time means at grids dt, 2 dt, 4 dt ...

    For spatially homogeneous models the coarser grids are subsampled from
    the same paths (common random numbers), so the level differences are
    nearly noise-free.  The quoted allowance follows the model
    ``bias(dt) = C dt^kappa`` with ``kappa = 1 / tail_index``:
    allowance = (mean(tau_2dt - tau_dt) + 3 SE) / (2^kappa - 1).
    State-dependent models fall back to independent runs per level.
    """
    kappa = 1.0 / (tail_index if tail_index is not None else model.tail_index())
    if model.state_independent:
        taus, _, _ = _exit_arrays(model, domain, x0, cfg, levels=levels)
        means = taus.mean(axis=1)
        ses = taus.std(axis=1, ddof=1) / math.sqrt(cfg.n_paths)
        diff = taus[1] - taus[0]
        d12 = float(diff.mean())
        se12 = float(diff.std(ddof=1)) / math.sqrt(cfg.n_paths)
        coupled = True
    else:
        means_l, ses_l = [], []
        for lev in range(levels):
            c = SimConfig(cfg.dt * (1 << lev), cfg.horizon, cfg.n_paths, cfg.seed,
                          step_budget=cfg.step_budget)
            taus, _, _ = _exit_arrays(model, domain, x0, c)
            means_l.append(taus[0].mean())
            ses_l.append(taus[0].std(ddof=1) / math.sqrt(cfg.n_paths))
        means = np.array(means_l)
        ses = np.array(ses_l)
        d12 = float(means[1] - means[0])
        se12 = float(math.hypot(ses[0], ses[1]))
        coupled = False
    allowance = (max(d12, 0.0) + 3.0 * se12) / (2.0 ** kappa - 1.0)
    dts = tuple(cfg.dt * (1 << lev) for lev in range(levels))
    return RefinementStudy(dts, tuple(float(v) for v in means),
                           tuple(float(v) for v in ses), float(allowance), kappa, coupled)


# ---------------------------------------------------------------------------
# terminal clouds and functionals
# ---------------------------------------------------------------------------

def _terminal_block_levy(lo, hi, model, t, x0, cfg):
    m = hi - lo
    out = np.empty((m, model.d))
    for j in range(m):
        gen = path_generator(cfg.seed, lo + j)
        out[j] = x0 + model.increments(gen, 1, t)[0]
    return out


def _terminal_block_statedep(lo, hi, model, t, x0, cfg):
    m = hi - lo
    steps = max(int(round(t / cfg.dt)), 1)
    out = np.empty((m, model.d))
    if isinstance(model, StableLike):
        gens = [path_generator(cfg.seed, lo + j) for j in range(m)]
        x = np.tile(x0, (m, 1))
        for _ in range(steps):
            U = np.array([g.random() for g in gens])
            W = np.array([g.standard_exponential() for g in gens])
            alpha = np.asarray(model.index.at(x if model.d > 1 else x[:, 0]), dtype=float)
            u = (U - 0.5) * np.pi
            if model.d == 1:
                x = x + (_cms_symmetric(alpha, u, W) * cfg.dt ** (1.0 / alpha))[:, None]
            else:
                sv = _one_sided_stable(alpha / 2.0, U, W) * cfg.dt ** (2.0 / alpha)
                z = np.stack([g.standard_normal(model.d) for g in gens])
                x = x + np.sqrt(2.0 * sv)[:, None] * z
        out[:] = x
    else:
        for j in range(m):
            gen_main = path_generator(cfg.seed, lo + j)
            gen_jump = path_generator(cfg.seed ^ _JUMP_STREAM_SALT, lo + j)
            x = x0.copy()
            for _ in range(steps):
                x = x + model.step(gen_main, gen_jump, x, cfg.dt)
            out[j] = x
    return out


def _terminal_exit_block_levy(lo, hi, model, t, x0, cfg, domain):
    m = hi - lo
    steps = max(int(round(t / cfg.dt)), 1)
    positions = np.empty((m, model.d))
    taus = np.full(m, steps * cfg.dt)
    exit_pos = np.tile(x0, (m, 1))
    censored = np.ones(m, dtype=bool)
    for j in range(m):
        gen = path_generator(cfg.seed, lo + j)
        x = x0.copy()
        k = 0
        while k < steps:
            n = min(_CHUNK, steps - k)
            inc = model.increments(gen, n, cfg.dt)
            np.cumsum(inc, axis=0, out=inc)
            inc += x[None, :]
            if censored[j]:
                inside = domain.contains(inc)
                idx = int(np.argmax(~inside))
                if not inside[idx]:
                    taus[j] = (k + idx + 1) * cfg.dt
                    exit_pos[j] = inc[idx]
                    censored[j] = False
            x = inc[-1]
            k += n
        positions[j] = x
    return positions, taus, exit_pos, censored


def sample_terminal(model: ProcessModel, t: float, x0, cfg: SimConfig,
                    domain: Optional[Domain] = None) -> PathCloud:
    """Positions of ``cfg.n_paths`` paths at time ``t``.

    Spatially homogeneous models are sampled with a single exact increment
    of duration ``t``; state-dependent models Euler-step on the ``cfg.dt``
    grid.  With a ``domain`` supplied, paths walk the grid and each carries
    its first-exit record (censored at ``t``) alongside the terminal
    position; this path-coupled variant needs a spatially homogeneous model.
    """
    if t <= 0.0:
        raise InvalidArgument("time must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if domain is not None:
        if not model.state_independent:
            raise InvalidArgument(
                "terminal clouds with coupled exit records are implemented for "
                "spatially homogeneous models; use simulate_exit for the rest")
        if not domain.contains(x0):
            raise InvalidArgument("the start point must lie inside the open domain")
        parts = _map_blocks(_terminal_exit_block_levy, (model, t, x0, cfg, domain),
                            cfg.n_paths)
        positions = np.concatenate([p[0] for p in parts], axis=0)
        taus = np.concatenate([p[1] for p in parts])
        exit_pos = np.concatenate([p[2] for p in parts], axis=0)
        censored = np.concatenate([p[3] for p in parts])
        records = [ExitRecord(float(taus[i]), exit_pos[i].copy(), bool(censored[i]))
                   for i in range(cfg.n_paths)]
        return PathCloud(t=t, x0=x0, positions=positions, exit_records=records)
    fn = _terminal_block_levy if model.state_independent else _terminal_block_statedep
    parts = _map_blocks(fn, (model, t, x0, cfg), cfg.n_paths)
    positions = np.concatenate(parts, axis=0)
    return PathCloud(t=t, x0=x0, positions=positions)


def _apply_u(u: Callable, positions: np.ndarray) -> np.ndarray:
    n, d = positions.shape
    arg = positions[:, 0] if d == 1 else positions
    try:
        vals = np.asarray(u(arg), dtype=float)
        if vals.shape == (n,):
            return vals
    except Exception:
        pass
    return np.array([float(u(arg[i])) for i in range(n)])


def estimate_semigroup(model: ProcessModel, u: Callable, t: float, x0,
                       cfg: SimConfig) -> Estimate:
    """Monte-Carlo estimate of T_t u(x0) = E^x0 u(X_t) with standard error."""
    cloud = sample_terminal(model, t, x0, cfg)
    vals = _apply_u(u, cloud.positions)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return Estimate(float(vals.mean()), se, len(vals))


def estimate_exit_functional(model: ProcessModel, u: Callable, domain: Domain, x0,
                             cfg: SimConfig, u_sup: Optional[float] = None) -> Estimate:
    """Monte-Carlo estimate of E^x0 u(X_tau) over non-censored paths.

    The censoring fraction is reported; above 50% the estimate is flagged
    unreliable.  With ``u_sup`` supplied, ``censor_bound`` carries the
    worst-case contribution of the censored tail.
    """
    taus, pos, censored = _exit_arrays(model, domain, x0, cfg)
    ok = ~censored
    frac = float(censored.mean())
    if not ok.any():
        return Estimate(math.nan, math.inf, 0, frac, math.inf, unreliable=True)
    vals = _apply_u(u, pos[ok])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    bound = frac * (u_sup if u_sup is not None else float(np.abs(vals).max()))
    return Estimate(float(vals.mean()), se, int(ok.sum()), frac, float(bound),
                    unreliable=frac > 0.5)


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------

def _resolvent_block_levy(lo, hi, model, u, rate, x0, cfg):
    m = hi - lo
    M = cfg.max_steps
    # exact exponential weights for piecewise-constant path values:
    # w_n = int_{t_n}^{t_{n+1}} e^{-rate s} ds, so u = 1 integrates exactly
    grid = np.arange(M + 1) * cfg.dt
    weights = (np.exp(-rate * grid[:-1]) - np.exp(-rate * grid[1:])) / rate
    out = np.empty(m)
    for j in range(m):
        gen = path_generator(cfg.seed, lo + j)
        inc = model.increments(gen, M, cfg.dt)
        np.cumsum(inc, axis=0, out=inc)
        traj = np.vstack([x0[None, :], x0[None, :] + inc[:-1]])
        out[j] = float(_apply_u(u, traj) @ weights)
    return out


def _resolvent_block_statedep(lo, hi, model, u, rate, x0, cfg):
    m = hi - lo
    M = cfg.max_steps
    grid = np.arange(M + 1) * cfg.dt
    weights = (np.exp(-rate * grid[:-1]) - np.exp(-rate * grid[1:])) / rate
    out = np.zeros(m)
    for j in range(m):
        gen_main = path_generator(cfg.seed, lo + j)
        gen_jump = path_generator(cfg.seed ^ _JUMP_STREAM_SALT, lo + j)
        x = x0.copy()
        acc = 0.0
        for k in range(M):
            acc += weights[k] * float(u(x[0] if model.d == 1 else x))
            if isinstance(model, StableLike):
                alpha = float(model.index.at(x if model.d > 1 else x[0]))
                uu = (gen_main.random() - 0.5) * np.pi
                w = gen_main.standard_exponential()
                if model.d == 1:
                    x = x + _cms_symmetric(alpha, uu, w) * cfg.dt ** (1.0 / alpha)
                else:
                    sv = _one_sided_stable(alpha / 2.0, gen_main.random(),
                                           gen_main.standard_exponential())
                    x = x + np.sqrt(2.0 * sv * cfg.dt ** (2.0 / alpha)) * gen_main.standard_normal(model.d)
            else:
                x = x + model.step(gen_main, gen_jump, x, cfg.dt)
        out[j] = acc
    return out


def estimate_resolvent(model: ProcessModel, u: Callable, rate: float, x0,
                       cfg: SimConfig, u_sup: float = 1.0) -> Estimate:
    """Monte-Carlo estimate of R_rate u(x0) = E^x0 int_0^inf e^{-rate t} u(X_t) dt.

    The time integral is truncated at the horizon; the deterministic
    truncation bound ``u_sup * exp(-rate T) / rate`` is reported alongside
    the Monte-Carlo standard error.
    """
    if rate <= 0.0:
        raise InvalidArgument("resolvent rate must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    fn = _resolvent_block_levy if model.state_independent else _resolvent_block_statedep
    parts = _map_blocks(fn, (model, u, rate, x0, cfg), cfg.n_paths)
    vals = np.concatenate(parts)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    trunc = u_sup * math.exp(-rate * cfg.horizon) / rate
    return Estimate(float(vals.mean()), se, len(vals), truncation_bound=float(trunc))

"""Empirical strong-Feller diagnostics.

Everything here is a finite-sample probe with quantified uncertainty:
kernel total-variation profiles, absolute-continuity moduli, local
Orlicz-ultracontractivity ratios, harmonic-function continuity profiles
and uniform exit-time decay tables.  A strong-Feller kernel shows TV
distances vanishing with the start-point gap and an absolute-continuity
modulus vanishing with the Lebesgue budget; a deterministic drift pins
both at 1.  None of this certifies the property in the mathematical
sense -- the outputs are diagnostics, not proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import GridCoverageError, InvalidArgument
from .exit_bounds import BallSpec, compute_H
from .orlicz import DiscreteMeasure, YoungFunction, orlicz_norm
from .simulator import (Domain, ProcessModel, SimConfig,
                        estimate_exit_functional, sample_terminal, simulate_exit)

__all__ = [
    "HistogramGrid",
    "EmpiricalKernel",
    "TVRow",
    "TVProfile",
    "ACModulus",
    "UltraReport",
    "HarmonicProfile",
    "DecayTable",
    "build_grid",
    "empirical_kernel",
    "tv_profile",
    "tv_null_floor",
    "ac_modulus",
    "ultracontractivity_ratio",
    "harmonic_profile",
    "uniform_decay_check",
]

_INDEP_SEED_SALT = 0x5DEECE66D


@dataclass(frozen=True)
class HistogramGrid:
    """Shared rectangular grid: uniform bin edges per axis."""

    edges: tuple  # tuple of 1-d arrays

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        for e in edges:
            if len(e) < 2 or np.any(np.diff(e) <= 0):
                raise InvalidArgument("each axis needs increasing bin edges")
            widths = np.diff(e)
            if not np.allclose(widths, widths[0], rtol=1e-9, atol=0.0):
                raise InvalidArgument("bin widths must be uniform per axis")
        object.__setattr__(self, "edges", edges)

    @property
    def d(self):
        return len(self.edges)

    @property
    def bin_lebesgue(self) -> float:
        return float(np.prod([e[1] - e[0] for e in self.edges]))

    @property
    def n_bins(self) -> int:
        return int(np.prod([len(e) - 1 for e in self.edges]))

    def centers(self) -> np.ndarray:
        axes = [0.5 * (e[:-1] + e[1:]) for e in self.edges]
        if self.d == 1:
            return axes[0].reshape(-1, 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def histogram(self, positions: np.ndarray):
        counts, _ = np.histogramdd(positions, bins=self.edges)
        overflow = positions.shape[0] - int(counts.sum())
        return counts.ravel(), overflow

    def refined(self) -> "HistogramGrid":
        halves = []
        for e in self.edges:
            fine = np.empty(2 * len(e) - 1)
            fine[0::2] = e
            fine[1::2] = 0.5 * (e[:-1] + e[1:])
            halves.append(fine)
        return HistogramGrid(tuple(halves))


def build_grid(clouds: Sequence[np.ndarray], rule: str = "fd",
               bin_width: Optional[float] = None, pad: float = 0.5,
               max_bins: int = 4096) -> HistogramGrid:
    """Common grid from pooled clouds: Freedman-Diaconis width by default.

    Degenerate pools (zero IQR, or a single point) fall back to a span- or
    unit-based width so deterministic kernels still land in distinct bins.
    """
    pooled = np.concatenate([np.asarray(c, dtype=float) for c in clouds], axis=0)
    if pooled.ndim == 1:
        pooled = pooled[:, None]
    n, d = pooled.shape
    edges = []
    for k in range(d):
        col = pooled[:, k]
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        if bin_width is not None:
            w = float(bin_width)
        else:
            if rule != "fd":
                raise InvalidArgument(f"unknown binning rule {rule!r}")
            iqr = float(np.percentile(col, 75) - np.percentile(col, 25))
            w = 2.0 * iqr / n ** (1.0 / 3.0)
            if w <= 0.0:
                w = span / 64.0 if span > 0.0 else 1e-3
        n_bins = min(max(int(math.ceil((span + 2 * pad * w) / w)), 1), max_bins)
        start = lo - pad * w
        edges.append(start + w * np.arange(n_bins + 1))
    return HistogramGrid(tuple(edges))


@dataclass(frozen=True)
class EmpiricalKernel:
    x: np.ndarray
    t: float
    grid: HistogramGrid
    counts: np.ndarray
    n_total: int
    overflow: int

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_total

    @property
    def overflow_fraction(self) -> float:
        return self.overflow / self.n_total


def empirical_kernel(model: ProcessModel, t: float, x, cfg: SimConfig,
                     grid: HistogramGrid, overflow_tol: float = 0.01) -> EmpiricalKernel:
    """Histogram estimate of P_t(x, .) on a shared grid."""
    cloud = sample_terminal(model, t, x, cfg)
    counts, overflow = grid.histogram(cloud.positions)
    if overflow > overflow_tol * cfg.n_paths:
        raise GridCoverageError(
            f"histogram grid misses {overflow / cfg.n_paths:.1%} of the mass "
            f"started from {np.atleast_1d(x)}",
            probe=np.atleast_1d(np.asarray(x, dtype=float)),
            overflow_fraction=overflow / cfg.n_paths,
        )
    return EmpiricalKernel(np.atleast_1d(np.asarray(x, dtype=float)), t, grid,
                           counts, cfg.n_paths, overflow)


def _binning_allowance(model, t, x, cfg, grid) -> float:
    """Half the largest kernel mass oscillation across one bin, measured by
    refinement doubling (never folded into the SE silently)."""
    fine = grid.refined()
    cloud = sample_terminal(model, t, x, cfg)
    counts, _ = fine.histogram(cloud.positions)
    p = counts / cfg.n_paths
    if grid.d == 1:
        # adjacent fine-bin pairs partition each coarse bin exactly
        return 0.5 * float(np.abs(p.reshape(-1, 2)[:, 0] - p.reshape(-1, 2)[:, 1]).max(initial=0.0))
    # d > 1: largest fine-bin mass bounds the within-bin oscillation
    return float(p.max(initial=0.0))


def tv_null_floor(kernel: EmpiricalKernel) -> float:
    """Expected TV between two independent clouds of the SAME kernel
    (plug-in binomial folding bias); compare independent-cloud estimates
    against this floor."""
    p = kernel.probabilities
    var = 2.0 * p * (1.0 - p) / kernel.n_total
    return 0.5 * float(np.sum(np.sqrt(2.0 * var / math.pi)))


@dataclass(frozen=True)
class TVRow:
    x: np.ndarray
    y: np.ndarray
    tv: float
    se: float
    binning_allowance: float
    null_floor: float


@dataclass(frozen=True)
class TVProfile:
    t: float
    rows: List[TVRow]
    grid: HistogramGrid
    common_rng: bool


def tv_profile(model: ProcessModel, t: float, pairs: Sequence, cfg: SimConfig,
               grid: Optional[HistogramGrid] = None, common_rng: bool = True,
               overflow_tol: float = 0.01) -> TVProfile:
    """Empirical total-variation profile TV(P_t(x, .), P_t(y, .)).

    TV = 1/2 sum_bins |phat - qhat| on a shared histogram grid; the SE is
    binomial propagation (conservative under common random numbers).  With
    ``common_rng`` both clouds of a pair reuse the same per-path streams,
    so TV(x, x) is exactly 0.  The binning allowance is reported per row,
    and for independent clouds the plug-in null floor as well.
    """
    pair_list = [(np.atleast_1d(np.asarray(x, dtype=float)),
                  np.atleast_1d(np.asarray(y, dtype=float))) for x, y in pairs]
    cfg_y = cfg if common_rng else replace(cfg, seed=cfg.seed ^ _INDEP_SEED_SALT)
    clouds = {}
    for x, y in pair_list:
        clouds[tuple(x)] = sample_terminal(model, t, x, cfg).positions
        key_y = (tuple(y), "indep") if not common_rng else tuple(y)
        if key_y not in clouds:
            clouds[key_y] = sample_terminal(model, t, y, cfg_y).positions
    if grid is None:
        grid = build_grid(list(clouds.values()))
    rows = []
    for x, y in pair_list:
        key_y = (tuple(y), "indep") if not common_rng else tuple(y)
        px = _kernel_from_cloud(clouds[tuple(x)], x, t, cfg, grid, overflow_tol)
        qy = _kernel_from_cloud(clouds[key_y], y, t, cfg, grid, overflow_tol)
        p, q = px.probabilities, qy.probabilities
        tv = 0.5 * float(np.abs(p - q).sum())
        se = 0.5 * math.sqrt(float(np.sum(p * (1 - p) + q * (1 - q))) / cfg.n_paths)
        allow = max(_binning_allowance(model, t, x, cfg, grid),
                    _binning_allowance(model, t, y, cfg_y, grid))
        floor = 0.0 if common_rng else tv_null_floor(px)
        rows.append(TVRow(x, y, tv, se, allow, floor))
    return TVProfile(t=t, rows=rows, grid=grid, common_rng=common_rng)


def _kernel_from_cloud(positions, x, t, cfg, grid, overflow_tol):
    counts, overflow = grid.histogram(positions)
    if overflow > overflow_tol * cfg.n_paths:
        raise GridCoverageError(
            f"histogram grid misses {overflow / cfg.n_paths:.1%} of the mass "
            f"started from {x}",
            probe=x, overflow_fraction=overflow / cfg.n_paths,
        )
    return EmpiricalKernel(x, t, grid, counts, cfg.n_paths, overflow)


@dataclass(frozen=True)
class ACModulus:
    t: float
    rows: List[tuple]  # (delta, worst_mass, se)
    grid: HistogramGrid

    def as_dict(self):
        return {float(d): float(m) for d, m, _ in self.rows}


def ac_modulus(model: ProcessModel, t: float, probes: Sequence, deltas: Sequence[float],
               cfg: SimConfig, grid: Optional[HistogramGrid] = None,
               overflow_tol: float = 0.01) -> ACModulus:
    """Worst-case kernel mass on bin unions of Lebesgue measure <= delta.

    For fixed bins the greedy selection (descending empirical density) is
    exactly optimal, so each row is max over probes of the top-k bin mass
    with k = delta / bin_lebesgue.  Deltas must be multiples of the bin
    Lebesgue measure; smaller than one bin is rejected.
    """
    probe_list = [np.atleast_1d(np.asarray(x, dtype=float)) for x in probes]
    clouds = [sample_terminal(model, t, x, cfg).positions for x in probe_list]
    if grid is None:
        grid = build_grid(clouds)
    leb = grid.bin_lebesgue
    ks = []
    for delta in deltas:
        ratio = delta / leb
        if delta < leb * (1.0 - 1e-9):
            raise InvalidArgument(f"delta={delta:g} is smaller than one bin ({leb:g})")
        if abs(ratio - round(ratio)) > 1e-6 * max(ratio, 1.0):
            raise InvalidArgument(f"delta={delta:g} is not a multiple of the bin measure {leb:g}")
        ks.append(int(round(ratio)))
    kernels = [_kernel_from_cloud(c, x, t, cfg, grid, overflow_tol)
               for c, x in zip(clouds, probe_list)]
    rows = []
    for delta, k in zip(deltas, ks):
        worst, se = 0.0, 0.0
        for kern in kernels:
            p = np.sort(kern.probabilities)[::-1]
            mass = float(p[: min(k, len(p))].sum())
            if mass >= worst:
                worst = mass
                se = math.sqrt(max(mass * (1 - mass), 0.0) / cfg.n_paths)
        rows.append((float(delta), worst, se))
    return ACModulus(t=t, rows=rows, grid=grid)


@dataclass(frozen=True)
class UltraReport:
    ratio: float
    rows: List[tuple]  # (label, sup_estimate, norm, ratio, se_at_sup)
    grid: HistogramGrid


def ultracontractivity_ratio(model: ProcessModel, t: float, probes: Sequence,
                             phi: YoungFunction, u_list: Sequence, cfg: SimConfig,
                             grid: HistogramGrid,
                             labels: Optional[Sequence[str]] = None) -> UltraReport:
    """max_u  sup_{x in K} |T_t u(x)| / ||u||_Phi  over a test corpus.

    The reference measure is Lebesgue restricted to the histogram grid,
    discretized to bin centers with weight = bin measure.  A stable ratio
    across a diverse corpus evidences a local ultracontractivity constant;
    unbounded growth under shrinking spikes is the failure signature.
    """
    if not phi.strictly_positive():
        raise InvalidArgument("the Young function must vanish only at 0 for this test")
    probe_list = [np.atleast_1d(np.asarray(x, dtype=float)) for x in probes]
    centers = grid.centers()
    leb_measure = DiscreteMeasure(centers if grid.d > 1 else centers[:, 0],
                                  np.full(grid.n_bins, grid.bin_lebesgue))
    labels = list(labels) if labels is not None else [f"u{i}" for i in range(len(u_list))]
    rows = []
    best = 0.0
    for label, u in zip(labels, u_list):
        uvals = leb_measure.values_of(u)
        norm = orlicz_norm(uvals, leb_measure, phi)
        if norm == 0.0:
            raise InvalidArgument(f"test function {label} has zero Orlicz norm")
        sup_est, sup_se = 0.0, 0.0
        for x in probe_list:
            cloud = sample_terminal(model, t, x, cfg)
            vals = np.asarray([u(p[0] if model.d == 1 else p) for p in cloud.positions])
            est = abs(float(vals.mean()))
            if est >= sup_est:
                sup_est = est
                sup_se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        ratio = sup_est / norm
        rows.append((label, sup_est, norm, ratio, sup_se))
        best = max(best, ratio)
    return UltraReport(ratio=best, rows=rows, grid=grid)


@dataclass(frozen=True)
class HarmonicProfile:
    rows: List[tuple]  # (x, estimate, se, censored_fraction)
    modulus: float     # max adjacent |difference|


def harmonic_profile(model: ProcessModel, u: Callable, domain: Domain,
                     probes: Sequence, cfg: SimConfig,
                     u_sup: Optional[float] = None) -> HarmonicProfile:
    """Exit-functional profile x -> E^x u(X_tau) over probe states.

    Common random numbers across probes (same root seed) cancel shared
    Monte-Carlo noise, isolating the x-dependence; the discrete modulus of
    continuity over adjacent probes is reported.
    """
    rows = []
    for x in probes:
        est = estimate_exit_functional(model, u, domain, x, cfg, u_sup=u_sup)
        rows.append((np.atleast_1d(np.asarray(x, dtype=float)), est.value, est.se,
                     est.censored_fraction))
    vals = np.array([r[1] for r in rows])
    modulus = float(np.abs(np.diff(vals)).max(initial=0.0)) if len(vals) > 1 else 0.0
    return HarmonicProfile(rows=rows, modulus=modulus)


@dataclass(frozen=True)
class DecayTable:
    rows: List[tuple]  # (t, sup_empirical, se, bound)
    radius: float      # dist(D, boundary of U), after the r < 1 guard


def uniform_decay_check(model: ProcessModel, probes: Sequence, domain: Domain,
                        t_grid: Sequence[float], cfg: SimConfig,
                        probe_count: int = 64) -> DecayTable:
    """sup_{x in D} empirical P(tau_U <= t) against the H-based bound.

    The bound line is t * max_x H(x, r) / (1 - e^{-1}) with
    r = min(dist(D, dU), 0.99) -- the guard keeps H's r < 1 precondition,
    and shrinking the ball only weakens the bound, never invalidates it.
    """
    probe_list = [np.atleast_1d(np.asarray(x, dtype=float)) for x in probes]
    r = min(domain.boundary_distance(x) for x in probe_list)
    if r <= 0.0:
        raise InvalidArgument("the probe set must keep a positive distance to the boundary")
    r_eff = min(r, 0.99)
    triplet = model.levy_triplet()
    Hmax = max(compute_H(triplet, BallSpec(x, r_eff), probe_count) for x in probe_list)
    t_sorted = sorted(float(t) for t in t_grid)
    horizon = max(t_sorted)
    run_cfg = replace(cfg, horizon=max(cfg.horizon, horizon))
    taus = []
    for x in probe_list:
        rec_tau = np.array([rec.tau if not rec.censored else math.inf
                            for rec in simulate_exit(model, domain, x, run_cfg)])
        taus.append(rec_tau)
    rows = []
    for t in t_sorted:
        sup_emp, se = 0.0, 0.0
        for rec_tau in taus:
            p = float((rec_tau <= t).mean())
            if p >= sup_emp:
                sup_emp = p
                se = math.sqrt(max(p * (1 - p), 0.0) / cfg.n_paths)
        bound = min(1.0, t * Hmax / (1.0 - math.exp(-1.0)))
        rows.append((t, sup_emp, se, bound))
    return DecayTable(rows=rows, radius=r_eff)

"""Batch command-line front end.

``fellersim run config.cfg`` executes the tasks declared in a TOML
configuration and writes three artifacts into the output directory:

* ``report.json``   -- every estimate with an SE, every bound tagged;
* ``task_NN_<kind>.csv`` -- one plot-ready table per task;
* ``manifest.json`` -- config hash, seed, version, worker count, timestamp.

Identical config + seed give byte-identical CSV bodies; the manifest is
the only artifact carrying a timestamp.  Exit codes: 0 success, 2 schema
violation, 3 numeric failure (the failing operation is named), 4
invariant-check failure (reports are still written).  The worker count is
taken from the ``FELLERSIM_WORKERS`` environment variable only.

The remaining subcommands are one-off sugar: each assembles the
equivalent single-task configuration and goes through the same runner.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .characteristics import (LevyMeasureSpec, StableLikeIndex, StateTriplet,
                              eval_symbol)
from .diagnostics import (ac_modulus, build_grid, harmonic_profile, tv_profile,
                          ultracontractivity_ratio, uniform_decay_check)
from .errors import ConstructionFailure, GridCoverageError, InvalidArgument, NumericFailure
from .exit_bounds import BallSpec, bound_report
from .orlicz import (DiscreteMeasure, YoungFunction, holder_defect, legendre,
                     luxemburg_norm, orlicz_norm)
from .simulator import (Ball, Box, Brownian, CompoundPoisson, GenericTriplet,
                        IsotropicStable, SimConfig, StableLike, estimate_resolvent,
                        estimate_semigroup, exit_refinement, interval,
                        simulate_exit, worker_count)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4


class SchemaError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def _need(table, key, path, types, default=None, required=False):
    if key not in table:
        if required:
            raise SchemaError(f"{path}.{key}", "missing required field")
        return default
    val = table[key]
    if types is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, types if isinstance(types, tuple) else (types,)):
        raise SchemaError(f"{path}.{key}", f"expected {types}, got {type(val).__name__}")
    return val


def build_model(table, path="model"):
    kind = _need(table, "kind", path, str, required=True)
    d = int(_need(table, "dimension", path, int, default=1))
    if kind == "brownian":
        return Brownian(sigma=_need(table, "sigma", path, float, default=1.0), d=d)
    if kind == "stable":
        return IsotropicStable(alpha=_need(table, "alpha", path, float, required=True), d=d)
    if kind == "compound-poisson":
        rate = _need(table, "rate", path, float, required=True)
        atoms = _need(table, "atoms", path, list, required=True)
        pts = [a[0] for a in atoms]
        wts = [a[1] for a in atoms]
        return CompoundPoisson(rate=rate, jumps=DiscreteMeasure(np.asarray(pts, dtype=float),
                                                                np.asarray(wts, dtype=float)), d=d)
    if kind == "stable-like":
        base = _need(table, "alpha_base", path, float, default=1.0)
        amp = _need(table, "alpha_amp", path, float, default=0.2)
        lo, hi = base - abs(amp), base + abs(amp)
        if not (0.0 < lo <= hi < 2.0):
            raise SchemaError(f"{path}.alpha_amp", "index range must stay inside (0, 2)")
        idx = StableLikeIndex(alpha=lambda x: base + amp * np.sin(np.pi * np.asarray(x)),
                              lower=lo, upper=hi)
        return StableLike(index=idx, d=d)
    if kind == "drift":
        b = _need(table, "drift", path, float, required=True)
        trip = StateTriplet.constant(d, 0.0, b, LevyMeasureSpec.zero(d))
        return GenericTriplet(triplet=trip, eps=1e-3)
    if kind == "generic":
        a = _need(table, "a", path, float, default=0.0)
        b = _need(table, "b", path, float, default=0.0)
        nu_kind = _need(table, "nu_kind", path, str, default="zero")
        if nu_kind == "zero":
            nu = LevyMeasureSpec.zero(d)
        elif nu_kind == "radial-power":
            nu = LevyMeasureSpec.radial_power(
                d, _need(table, "nu_c", path, float, required=True),
                _need(table, "nu_alpha", path, float, required=True))
        elif nu_kind == "atoms":
            raw = _need(table, "nu_atoms", path, list, required=True)
            nu = LevyMeasureSpec.finite_atoms([(a_[0], a_[1]) for a_ in raw], d=d)
        else:
            raise SchemaError(f"{path}.nu_kind", f"unknown jump-measure kind {nu_kind!r}")
        trip = StateTriplet.constant(d, a, b, nu)
        return GenericTriplet(triplet=trip, eps=_need(table, "eps", path, float, default=1e-3))
    raise SchemaError(f"{path}.kind", f"unknown model kind {kind!r}")


def build_young(table, path):
    kind = _need(table, "kind", path, str, required=True)
    try:
        if kind == "power":
            return YoungFunction.power(_need(table, "p", path, float, required=True))
        if kind == "scaled-power":
            return YoungFunction.scaled_power(_need(table, "p", path, float, required=True),
                                              _need(table, "c", path, float, required=True))
        if kind == "exp-minus-one":
            return YoungFunction.exp_minus_one()
        if kind == "tabulated":
            return YoungFunction.tabulated(_need(table, "xs", path, list, required=True),
                                           _need(table, "ys", path, list, required=True))
    except InvalidArgument as exc:
        raise SchemaError(path, str(exc))
    raise SchemaError(f"{path}.kind", f"unknown Young function kind {kind!r}")


def build_domain(table, path):
    if "interval" in table:
        lo, hi = table["interval"]
        return interval(float(lo), float(hi))
    if "ball_center" in table:
        return Ball(np.atleast_1d(np.asarray(table["ball_center"], dtype=float)),
                    float(table["ball_radius"]))
    if "box_lo" in table:
        return Box(np.asarray(table["box_lo"], dtype=float),
                   np.asarray(table["box_hi"], dtype=float))
    raise SchemaError(path, "domain needs 'interval', 'ball_center'/'ball_radius' or 'box_lo'/'box_hi'")


def resolve_u(spec, path="u"):
    """Named bounded test functions: one, step:c, absstep:c, box:a,b,
    cos:k, gauss:center,width."""
    if not isinstance(spec, str):
        raise SchemaError(path, "test function must be a string spec")
    name, _, argstr = spec.partition(":")
    args = [float(v) for v in argstr.split(",")] if argstr else []
    if name == "one":
        return (lambda x: np.ones_like(np.asarray(x, dtype=float))), 1.0, spec
    if name == "step":
        c = args[0]
        return (lambda x: (np.asarray(x, dtype=float) >= c).astype(float)), 1.0, spec
    if name == "absstep":
        c = args[0]
        return (lambda x: (np.abs(np.asarray(x, dtype=float)) >= c).astype(float)), 1.0, spec
    if name == "box":
        a, b = args
        return (lambda x: ((np.asarray(x, dtype=float) >= a)
                           & (np.asarray(x, dtype=float) <= b)).astype(float)), 1.0, spec
    if name == "cos":
        k = args[0]
        return (lambda x: np.cos(k * np.asarray(x, dtype=float))), 1.0, spec
    if name == "gauss":
        c, w = args
        if w <= 0:
            raise SchemaError(path, "gauss width must be positive")
        return (lambda x: np.exp(-((np.asarray(x, dtype=float) - c) / w) ** 2)), 1.0, spec
    raise SchemaError(path, f"unknown test function {spec!r}")


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def _jsonable(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _num(value, se=None, tag=None):
    """Every number carries an SE or an exact/bound tag."""
    out = {"value": _jsonable(value)}
    if se is not None:
        out["se"] = _jsonable(se)
    else:
        out["tag"] = tag or "exact"
    return out


def _fmt(v):
    # numpy scalars repr as np.float64(...) under numpy 2; convert first
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    _atomic_write(path, buf.getvalue().encode())


def _atomic_write(path, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# task execution
# ---------------------------------------------------------------------------

def _scalar_x0(task, path, default=0.0):
    x0 = _need(task, "x0", path, (float, int, list), default=default)
    return np.atleast_1d(np.asarray(x0, dtype=float))


def run_task_semigroup(task, ctx, path):
    model = ctx["model"]
    t = _need(task, "t", path, float, required=True)
    u, usup, label = resolve_u(_need(task, "u", path, str, default="one"), path + ".u")
    est = estimate_semigroup(model, u, t, _scalar_x0(task, path), ctx["cfg"])
    header = ["t", "u", "estimate", "se", "n"]
    rows = [[t, label, est.value, est.se, est.n_effective]]
    entry = {"t": _num(t), "u": label, "estimate": _num(est.value, se=est.se)}
    return rows, header, entry, [], {}


def run_task_exit(task, ctx, path):
    model = ctx["model"]
    domain = build_domain(task, path)
    x0 = _scalar_x0(task, path)
    records = simulate_exit(model, domain, x0, ctx["cfg"])
    taus = np.array([r.tau for r in records])
    cens = np.array([r.censored for r in records])
    mean = float(taus[~cens].mean()) if (~cens).any() else math.nan
    se = float(taus[~cens].std(ddof=1) / math.sqrt((~cens).sum())) if (~cens).sum() > 1 else 0.0
    header = ["mean_tau", "se", "censored_fraction", "n"]
    rows = [[mean, se, float(cens.mean()), len(records)]]
    entry = {"mean_tau": _num(mean, se=se),
             "censored_fraction": _num(float(cens.mean()), tag="exact")}
    return rows, header, entry, [], {}


def run_task_exit_bounds(task, ctx, path):
    model = ctx["model"]
    center = np.atleast_1d(np.asarray(task.get("center", 0.0), dtype=float))
    radius = float(_need(task, "radius", path, float, required=True))
    triplet = model.levy_triplet()
    rep = bound_report(triplet, BallSpec(center, radius))
    t_values = [float(t) for t in task.get("t_values", [0.05, 0.1, 0.2, 0.5, 1.0])]
    header = ["t", "p_exit_upper", "p_survive_upper"]
    rows = [[t, rep.p_exit_upper(t), rep.p_survive_upper(t)] for t in t_values]
    entry = {
        "H": _num(rep.H, tag="exact"),
        "h": _num(rep.h, tag="exact"),
        "h_upper_radius": _num(rep.h_upper, tag="exact"),
        "e_tau_lower": _num(rep.e_tau_lower, tag="bound"),
        "e_tau_upper": _num(rep.e_tau_upper, tag="bound"),
        "note": rep.note,
    }
    violations = []
    flags = {"e_tau_upper_vacuous": rep.e_tau_upper_vacuous}
    if task.get("verify", False):
        cfg = ctx["cfg"]
        ball = Ball(center, 2.0 * radius)
        records = simulate_exit(model, ball, center, cfg)
        taus = np.array([r.tau for r in records])
        mean = float(taus.mean())
        se = float(taus.std(ddof=1) / math.sqrt(len(taus)))
        study = exit_refinement(model, ball, center, cfg)
        entry["empirical_e_tau_2r"] = _num(mean, se=se)
        entry["allowance"] = _num(study.allowance, tag="bound")
        if rep.e_tau_lower > mean + 3 * se + study.allowance:
            violations.append(
                f"{path}: e_tau_lower {rep.e_tau_lower:.6g} exceeds empirical "
                f"{mean:.6g} + tolerance")
        if math.isfinite(rep.e_tau_upper) and mean > rep.e_tau_upper + 3 * se + study.allowance:
            violations.append(
                f"{path}: empirical E tau {mean:.6g} exceeds e_tau_upper {rep.e_tau_upper:.6g}")
        small = Ball(center, radius)
        rec_small = simulate_exit(model, small, center, cfg)
        tau_small = np.array([r.tau for r in rec_small])
        for t in t_values:
            emp = float((tau_small <= t).mean())
            se_p = math.sqrt(max(emp * (1 - emp), 0.0) / len(tau_small))
            if emp > rep.p_exit_upper(t) + 3 * se_p:
                violations.append(
                    f"{path}: P(tau<= {t:g}) = {emp:.4f} violates bound {rep.p_exit_upper(t):.4f}")
            if rep.h > 0:
                emps = float((tau_small > t).mean())
                se_s = math.sqrt(max(emps * (1 - emps), 0.0) / len(tau_small))
                if emps > rep.p_survive_upper(t) + 3 * se_s:
                    violations.append(
                        f"{path}: P(tau> {t:g}) = {emps:.4f} violates bound "
                        f"{rep.p_survive_upper(t):.4f}")
    return rows, header, entry, violations, flags


def run_task_tv_profile(task, ctx, path):
    model = ctx["model"]
    t = _need(task, "t", path, float, required=True)
    pairs = _need(task, "pairs", path, list, required=True)
    bin_width = _need(task, "bin_width", path, float, default=None)
    grid = None
    if bin_width is not None:
        from .simulator import sample_terminal
        clouds = []
        for x, y in pairs:
            clouds.append(sample_terminal(model, t, np.atleast_1d(float(x)), ctx["cfg"]).positions)
            clouds.append(sample_terminal(model, t, np.atleast_1d(float(y)), ctx["cfg"]).positions)
        grid = build_grid(clouds, bin_width=bin_width)
    profile = tv_profile(model, t, [(float(x), float(y)) for x, y in pairs], ctx["cfg"], grid=grid)
    header = ["x", "y", "tv", "se", "binning_allowance"]
    rows = [[r.x[0], r.y[0], r.tv, r.se, r.binning_allowance] for r in profile.rows]
    gaps = [float(np.linalg.norm(r.x - r.y)) for r in profile.rows]
    tv_by_gap = sorted(zip(gaps, profile.rows), key=lambda g: g[0])
    min_gap_tv = next((r.tv for g, r in tv_by_gap if g > 0), None)
    flags = {"strong_feller_tv": bool(min_gap_tv is not None and min_gap_tv < 0.2)}
    violations = []
    for g, r in tv_by_gap:
        if g == 0.0 and r.tv != 0.0:
            violations.append(f"{path}: TV(x,x) = {r.tv} != 0 under common random numbers")
    entry = {"rows": [{"x": float(r.x[0]), "y": float(r.y[0]),
                       "tv": _num(r.tv, se=r.se),
                       "binning_allowance": _num(r.binning_allowance, tag="bound")}
                      for r in profile.rows]}
    return rows, header, entry, violations, flags


def run_task_ac_modulus(task, ctx, path):
    model = ctx["model"]
    t = _need(task, "t", path, float, required=True)
    probes = [float(p) for p in _need(task, "probes", path, list, required=True)]
    deltas = [float(d) for d in _need(task, "deltas", path, list, required=True)]
    bin_width = _need(task, "bin_width", path, float, default=None)
    grid = None
    if bin_width is not None:
        from .simulator import sample_terminal
        clouds = [sample_terminal(model, t, np.atleast_1d(p), ctx["cfg"]).positions
                  for p in probes]
        grid = build_grid(clouds, bin_width=bin_width)
    mod = ac_modulus(model, t, probes, deltas, ctx["cfg"], grid=grid)
    header = ["delta", "worst_mass", "se"]
    rows = [[d, m, s] for d, m, s in mod.rows]
    masses = [m for _, m, _ in mod.rows]
    violations = []
    if any(b < a - 1e-12 for a, b in zip(masses, masses[1:])):
        violations.append(f"{path}: modulus is not non-decreasing in delta")
    flags = {"strong_feller_ac": bool(masses and masses[0] < 0.5)}
    entry = {"rows": [{"delta": _num(d, tag="exact"), "worst_mass": _num(m, se=s)}
                      for d, m, s in mod.rows]}
    return rows, header, entry, violations, flags


def run_task_ultra(task, ctx, path):
    model = ctx["model"]
    t = _need(task, "t", path, float, required=True)
    probes = [float(p) for p in _need(task, "probes", path, list, required=True)]
    phi = ctx["young"].get(_need(task, "young", path, str, required=True))
    if phi is None:
        raise SchemaError(f"{path}.young", "references an undeclared Young function")
    u_specs = _need(task, "u", path, list, required=True)
    resolved = [resolve_u(s, f"{path}.u") for s in u_specs]
    bin_width = _need(task, "bin_width", path, float, default=0.05)
    from .simulator import sample_terminal
    clouds = [sample_terminal(model, t, np.atleast_1d(p), ctx["cfg"]).positions for p in probes]
    grid = build_grid(clouds, bin_width=bin_width)
    rep = ultracontractivity_ratio(model, t, probes, phi,
                                   [u for u, _, _ in resolved], ctx["cfg"], grid,
                                   labels=[lab for _, _, lab in resolved])
    header = ["u", "sup_estimate", "orlicz_norm", "ratio", "se"]
    rows = [[lab, s, n, r, se] for lab, s, n, r, se in rep.rows]
    entry = {"ratio": _num(rep.ratio, tag="bound"),
             "rows": [{"u": lab, "sup_estimate": _num(s, se=se),
                       "orlicz_norm": _num(n, tag="exact")}
                      for lab, s, n, r, se in rep.rows]}
    return rows, header, entry, [], {"ultra_ratio": rep.ratio}


def run_task_harmonic(task, ctx, path):
    model = ctx["model"]
    domain = build_domain(task, path)
    u, usup, label = resolve_u(_need(task, "u", path, str, required=True), path + ".u")
    probes = [float(p) for p in _need(task, "probes", path, list, required=True)]
    prof = harmonic_profile(model, u, domain, probes, ctx["cfg"], u_sup=usup)
    header = ["x", "estimate", "se", "censored_fraction"]
    rows = [[x[0], v, s, c] for x, v, s, c in prof.rows]
    entry = {"u": label, "modulus": _num(prof.modulus, tag="exact"),
             "rows": [{"x": float(x[0]), "estimate": _num(v, se=s)}
                      for x, v, s, c in prof.rows]}
    return rows, header, entry, [], {"harmonic_modulus": prof.modulus}


def run_task_decay(task, ctx, path):
    model = ctx["model"]
    domain = build_domain(task, path)
    probes = [float(p) for p in _need(task, "probes", path, list, required=True)]
    t_values = [float(t) for t in _need(task, "t_values", path, list, required=True)]
    table = uniform_decay_check(model, probes, domain, t_values, ctx["cfg"])
    header = ["t", "sup_empirical", "se", "bound"]
    rows = [[t, emp, se, b] for t, emp, se, b in table.rows]
    violations = []
    for t, emp, se, b in table.rows:
        if emp > b + 3 * se:
            violations.append(f"{path}: empirical P(tau<={t:g}) = {emp:.4f} violates bound {b:.4f}")
    entry = {"radius": _num(table.radius, tag="exact"),
             "rows": [{"t": _num(t, tag="exact"), "sup_empirical": _num(e, se=s),
                       "bound": _num(b, tag="bound")} for t, e, s, b in table.rows]}
    return rows, header, entry, violations, {}


def run_task_resolvent(task, ctx, path):
    model = ctx["model"]
    rates = [float(r) for r in _need(task, "rates", path, list, required=True)]
    u, usup, label = resolve_u(_need(task, "u", path, str, default="one"), path + ".u")
    x0 = _scalar_x0(task, path)
    header = ["rate", "estimate", "se", "truncation_bound"]
    rows, entries = [], []
    for rate in rates:
        est = estimate_resolvent(model, u, rate, x0, ctx["cfg"], u_sup=usup)
        rows.append([rate, est.value, est.se, est.truncation_bound])
        entries.append({"rate": _num(rate, tag="exact"),
                        "estimate": _num(est.value, se=est.se),
                        "truncation_bound": _num(est.truncation_bound, tag="bound")})
    return rows, header, {"u": label, "rows": entries}, [], {}


def run_task_orlicz(task, ctx, path):
    phi = ctx["young"].get(_need(task, "young", path, str, required=True))
    if phi is None:
        raise SchemaError(f"{path}.young", "references an undeclared Young function")
    points = np.asarray(_need(task, "points", path, list, required=True), dtype=float)
    weights = np.asarray(_need(task, "weights", path, list, required=True), dtype=float)
    mu = DiscreteMeasure(points, weights)
    f = np.asarray(_need(task, "f", path, list, required=True), dtype=float)
    lux = luxemburg_norm(f, mu, phi)
    orl = orlicz_norm(f, mu, phi)
    header = ["luxemburg", "orlicz", "holder_defect"]
    violations = []
    if not (lux - 1e-9 <= orl <= 2.0 * lux + 1e-9):
        violations.append(f"{path}: norm ordering luxemburg <= orlicz <= 2 luxemburg violated")
    hd = None
    if "g" in task:
        g = np.asarray(task["g"], dtype=float)
        hd = holder_defect(f, g, mu, phi)
        if hd < -1e-9:
            violations.append(f"{path}: holder defect {hd} < -1e-9")
    ys = [float(y) for y in task.get("legendre_at", [])]
    rows = [[lux, orl, hd if hd is not None else ""]]
    entry = {"luxemburg": _num(lux, tag="exact"), "orlicz": _num(orl, tag="exact")}
    if hd is not None:
        entry["holder_defect"] = _num(hd, tag="exact")
    if ys:
        entry["legendre"] = [{"y": _num(y, tag="exact"),
                              "value": _num(legendre(phi, y), tag="exact")} for y in ys]
    return rows, header, entry, violations, {}


def run_task_symbol(task, ctx, path):
    model = ctx["model"]
    triplet = model.levy_triplet()
    x = _scalar_x0(task, path)
    xi_values = [float(v) for v in _need(task, "xi_values", path, list, required=True)]
    use_quad = bool(task.get("quadrature", False))
    header = ["xi", "re", "im"] + (["re_quadrature"] if use_quad else [])
    rows = []
    entries = []
    for xi in xi_values:
        p = eval_symbol(triplet, x, np.full(triplet.d, 0.0) + xi)
        row = [xi, p.real, p.imag]
        if use_quad:
            q = eval_symbol(triplet, x, np.full(triplet.d, 0.0) + xi, radial_method="quadrature")
            row.append(q.real)
        rows.append(row)
        entries.append({"xi": _num(xi, tag="exact"), "re": _num(p.real, tag="exact"),
                        "im": _num(p.imag, tag="exact")})
    return rows, header, {"rows": entries}, [], {}


_TASK_RUNNERS = {
    "semigroup": run_task_semigroup,
    "simulate": run_task_semigroup,
    "exit": run_task_exit,
    "exit-bounds": run_task_exit_bounds,
    "tv-profile": run_task_tv_profile,
    "ac-modulus": run_task_ac_modulus,
    "ultra": run_task_ultra,
    "harmonic": run_task_harmonic,
    "decay": run_task_decay,
    "resolvent": run_task_resolvent,
    "orlicz": run_task_orlicz,
    "symbol": run_task_symbol,
}


# ---------------------------------------------------------------------------
# config validation and the runner
# ---------------------------------------------------------------------------

def validate_config(cfg_dict, overrides=None):
    """Schema validation; returns the execution context.

    Raises :class:`SchemaError` naming the offending field.
    """
    overrides = overrides or {}
    run_tbl = cfg_dict.get("run", {})
    seed = overrides.get("seed", _need(run_tbl, "seed", "run", int,
                                       required="seed" not in overrides))
    out_dir = overrides.get("out") or _need(run_tbl, "out", "run", str, default="fellersim-out")
    sim_tbl = cfg_dict.get("sim", {})
    dt = overrides.get("dt") or _need(sim_tbl, "dt", "sim", float, default=1e-3)
    horizon = _need(sim_tbl, "horizon", "sim", float, default=4.0)
    paths = overrides.get("paths") or _need(sim_tbl, "paths", "sim", int, default=10000)
    try:
        cfg = SimConfig(dt=float(dt), horizon=float(horizon), n_paths=int(paths), seed=int(seed))
    except InvalidArgument as exc:
        raise SchemaError("sim", str(exc))
    model = None
    if "model" in cfg_dict:
        model = build_model(cfg_dict["model"])
    young = {}
    for name, tbl in cfg_dict.get("young", {}).items():
        young[name] = build_young(tbl, f"young.{name}")
    tasks = cfg_dict.get("task", [])
    if not isinstance(tasks, list):
        raise SchemaError("task", "must be an array of tables")
    for i, task in enumerate(tasks):
        kind = _need(task, "kind", f"task[{i}]", str, required=True)
        if kind not in _TASK_RUNNERS:
            raise SchemaError(f"task[{i}].kind", f"unknown task kind {kind!r}")
        if kind in ("semigroup", "simulate", "exit", "exit-bounds", "tv-profile",
                    "ac-modulus", "ultra", "harmonic", "decay", "resolvent",
                    "symbol") and model is None:
            raise SchemaError(f"task[{i}]", "needs a [model] section")
        if kind == "exit-bounds":
            radius = _need(task, "radius", f"task[{i}]", float, required=True)
            if not (0.0 < radius < 1.0):
                raise SchemaError(
                    f"task[{i}].radius",
                    f"the exit-bound functional H requires a ball radius r with 0 < r < 1 "
                    f"(got r = {radius:g})")
        if kind in ("ultra", "orlicz"):
            name = _need(task, "young", f"task[{i}]", str, required=True)
            if name not in young:
                raise SchemaError(f"task[{i}].young",
                                  f"references undeclared Young function {name!r}")
    return {"cfg": cfg, "model": model, "young": young, "tasks": tasks, "out": out_dir}


def execute(ctx, config_bytes):
    out_dir = ctx["out"]
    os.makedirs(out_dir, exist_ok=True)
    report = {"version": __version__, "tasks": []}
    all_violations = []
    for i, task in enumerate(ctx["tasks"]):
        kind = task["kind"]
        runner = _TASK_RUNNERS[kind]
        try:
            rows, header, entry, violations, flags = runner(task, ctx, f"task[{i}]")
        except (NumericFailure, GridCoverageError, ConstructionFailure) as exc:
            report["tasks"].append({"index": i, "kind": kind, "error": str(exc)})
            _write_report(out_dir, report, config_bytes, ctx)
            print(f"numeric failure in task[{i}] ({kind}): {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        csv_path = os.path.join(out_dir, f"task_{i:02d}_{kind.replace('-', '_')}.csv")
        write_csv(csv_path, header, rows)
        report["tasks"].append({
            "index": i, "kind": kind, "csv": os.path.basename(csv_path),
            "result": entry, "flags": flags, "violations": violations,
        })
        all_violations.extend(violations)
    _write_report(out_dir, report, config_bytes, ctx)
    if all_violations:
        for v in all_violations:
            print(f"invariant violation: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _write_report(out_dir, report, config_bytes, ctx):
    _atomic_write(os.path.join(out_dir, "report.json"),
                  json.dumps(report, indent=2, sort_keys=True).encode())
    manifest = {
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "seed": ctx["cfg"].seed,
        "paths": ctx["cfg"].n_paths,
        "dt": ctx["cfg"].dt,
        "version": __version__,
        "workers": worker_count(),
        "created_unix": time.time(),
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True).encode())


def run_config_file(path, overrides=None):
    try:
        with open(path, "rb") as fh:
            config_bytes = fh.read()
        cfg_dict = tomllib.loads(config_bytes.decode())
    except FileNotFoundError:
        print(f"config not found: {path}", file=sys.stderr)
        return EXIT_SCHEMA
    except tomllib.TOMLDecodeError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        ctx = validate_config(cfg_dict, overrides)
    except SchemaError as exc:
        print(f"config schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return execute(ctx, config_bytes)


# ---------------------------------------------------------------------------
# argparse front end
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="root seed (required; no wall-clock default)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--paths", type=int, default=None, help="number of Monte-Carlo paths")
    p.add_argument("--dt", type=float, default=None, help="Euler step size")
    p.add_argument("--horizon", type=float, default=None, help="time horizon")


def _model_args(p):
    p.add_argument("--model", default="brownian",
                   choices=["brownian", "stable", "compound-poisson", "stable-like", "drift"])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--atoms", default="1.0:1.0", help="compound-poisson atoms z:w,z:w,...")
    p.add_argument("--drift-b", type=float, default=1.0)
    p.add_argument("--alpha-base", type=float, default=1.0)
    p.add_argument("--alpha-amp", type=float, default=0.2)


def _model_table(args):
    kind = args.model
    tbl = {"kind": kind}
    if kind == "brownian":
        tbl["sigma"] = args.sigma
    elif kind == "stable":
        tbl["alpha"] = args.alpha
    elif kind == "compound-poisson":
        tbl["rate"] = args.rate
        tbl["atoms"] = [[float(z), float(w)] for z, w in
                        (pair.split(":") for pair in args.atoms.split(","))]
    elif kind == "stable-like":
        tbl["alpha_base"] = args.alpha_base
        tbl["alpha_amp"] = args.alpha_amp
    elif kind == "drift":
        tbl["drift"] = args.drift_b
    return tbl


def _floats(s):
    return [float(v) for v in s.split(",") if v != ""]


def _assemble(args, model_tbl, task_tbl):
    cfg = {"run": {}, "task": [task_tbl]}
    if model_tbl is not None:
        cfg["model"] = model_tbl
    if args.seed is None:
        print("a --seed is required (results must be reproducible)", file=sys.stderr)
        return None
    cfg["run"]["seed"] = args.seed
    sim = {}
    if args.dt is not None:
        sim["dt"] = args.dt
    if args.paths is not None:
        sim["paths"] = args.paths
    if getattr(args, "horizon", None) is not None:
        sim["horizon"] = args.horizon
    if sim:
        cfg["sim"] = sim
    return cfg


def _run_assembled(args, cfg_dict):
    if cfg_dict is None:
        return EXIT_SCHEMA
    overrides = {"out": args.out} if args.out else {}
    try:
        ctx = validate_config(cfg_dict, {"seed": args.seed, **overrides})
    except SchemaError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    blob = json.dumps(cfg_dict, sort_keys=True).encode()
    return execute(ctx, blob)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fellersim",
        description="Levy/stable-like process simulation, exit-time bounds and "
                    "strong-Feller diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a TOML config")
    p_run.add_argument("config")
    _add_common(p_run)

    p_sim = sub.add_parser("simulate", help="semigroup estimate E^x u(X_t)")
    _model_args(p_sim)
    _add_common(p_sim)
    p_sim.add_argument("--t", type=float, required=True)
    p_sim.add_argument("--x0", type=float, default=0.0)
    p_sim.add_argument("--u", default="one")

    p_eb = sub.add_parser("exit-bounds", help="H/h bound report for a ball")
    _model_args(p_eb)
    _add_common(p_eb)
    p_eb.add_argument("--center", type=float, default=0.0)
    p_eb.add_argument("--radius", type=float, required=True)
    p_eb.add_argument("--verify", action="store_true",
                      help="Monte-Carlo check of the bounds")

    p_tv = sub.add_parser("tv-profile", help="total-variation kernel profile")
    _model_args(p_tv)
    _add_common(p_tv)
    p_tv.add_argument("--t", type=float, required=True)
    p_tv.add_argument("--pairs", required=True, help="x:y,x:y,...")
    p_tv.add_argument("--bin-width", type=float, default=None)

    p_ac = sub.add_parser("ac-modulus", help="absolute-continuity modulus")
    _model_args(p_ac)
    _add_common(p_ac)
    p_ac.add_argument("--t", type=float, required=True)
    p_ac.add_argument("--probes", required=True)
    p_ac.add_argument("--deltas", required=True)
    p_ac.add_argument("--bin-width", type=float, default=0.02)

    p_ul = sub.add_parser("ultra", help="Orlicz ultracontractivity ratio")
    _model_args(p_ul)
    _add_common(p_ul)
    p_ul.add_argument("--t", type=float, required=True)
    p_ul.add_argument("--probes", required=True)
    p_ul.add_argument("--young", default="power:2", help="power:p or scaled-power:p,c")
    p_ul.add_argument("--u", required=True, help="comma-separated test function specs")
    p_ul.add_argument("--bin-width", type=float, default=0.05)

    p_ha = sub.add_parser("harmonic", help="exit-functional continuity profile")
    _model_args(p_ha)
    _add_common(p_ha)
    p_ha.add_argument("--domain", required=True, help="lo,hi interval")
    p_ha.add_argument("--u", required=True)
    p_ha.add_argument("--probes", required=True)

    p_de = sub.add_parser("decay", help="uniform exit-probability decay table")
    _model_args(p_de)
    _add_common(p_de)
    p_de.add_argument("--domain", required=True, help="lo,hi interval")
    p_de.add_argument("--probes", required=True)
    p_de.add_argument("--t-values", required=True)

    p_re = sub.add_parser("resolvent", help="resolvent estimate R_rate u(x0)")
    _model_args(p_re)
    _add_common(p_re)
    p_re.add_argument("--rates", required=True)
    p_re.add_argument("--u", default="one")
    p_re.add_argument("--x0", type=float, default=0.0)

    p_or = sub.add_parser("orlicz", help="Luxemburg/Orlicz norms on discrete data")
    _add_common(p_or)
    p_or.add_argument("--young", default="power:2")
    p_or.add_argument("--points", required=True)
    p_or.add_argument("--weights", required=True)
    p_or.add_argument("--f", required=True)
    p_or.add_argument("--g", default=None)
    p_or.add_argument("--legendre-at", default=None)

    p_sy = sub.add_parser("symbol", help="evaluate the Levy-Khinchine symbol")
    _model_args(p_sy)
    _add_common(p_sy)
    p_sy.add_argument("--x", type=float, default=0.0)
    p_sy.add_argument("--xi", required=True, help="comma-separated frequencies")
    p_sy.add_argument("--quadrature", action="store_true")

    args = parser.parse_args(argv)

    if args.command == "run":
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out:
            overrides["out"] = args.out
        if args.paths:
            overrides["paths"] = args.paths
        if args.dt:
            overrides["dt"] = args.dt
        return run_config_file(args.config, overrides)

    if args.command == "simulate":
        task = {"kind": "semigroup", "t": args.t, "x0": args.x0, "u": args.u}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "exit-bounds":
        task = {"kind": "exit-bounds", "center": args.center, "radius": args.radius,
                "verify": args.verify}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "tv-profile":
        pairs = [[float(a), float(b)] for a, b in
                 (p.split(":") for p in args.pairs.split(","))]
        task = {"kind": "tv-profile", "t": args.t, "pairs": pairs}
        if args.bin_width:
            task["bin_width"] = args.bin_width
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "ac-modulus":
        task = {"kind": "ac-modulus", "t": args.t, "probes": _floats(args.probes),
                "deltas": _floats(args.deltas), "bin_width": args.bin_width}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "ultra":
        name, _, spec = args.young.partition(":")
        yt = {"kind": name}
        if name == "power":
            yt["p"] = float(spec)
        elif name == "scaled-power":
            p_, c_ = spec.split(",")
            yt["p"], yt["c"] = float(p_), float(c_)
        cfg = _assemble(args, _model_table(args),
                        {"kind": "ultra", "t": args.t, "probes": _floats(args.probes),
                         "young": "cli", "u": args.u.split(","),
                         "bin_width": args.bin_width})
        if cfg is not None:
            cfg["young"] = {"cli": yt}
        return _run_assembled(args, cfg)
    if args.command == "harmonic":
        lo, hi = _floats(args.domain)
        task = {"kind": "harmonic", "interval": [lo, hi], "u": args.u,
                "probes": _floats(args.probes)}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "decay":
        lo, hi = _floats(args.domain)
        task = {"kind": "decay", "interval": [lo, hi], "probes": _floats(args.probes),
                "t_values": _floats(args.t_values)}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "resolvent":
        task = {"kind": "resolvent", "rates": _floats(args.rates), "u": args.u,
                "x0": args.x0}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    if args.command == "orlicz":
        name, _, spec = args.young.partition(":")
        yt = {"kind": name}
        if name == "power":
            yt["p"] = float(spec)
        elif name == "scaled-power":
            p_, c_ = spec.split(",")
            yt["p"], yt["c"] = float(p_), float(c_)
        task = {"kind": "orlicz", "young": "cli", "points": _floats(args.points),
                "weights": _floats(args.weights), "f": _floats(args.f)}
        if args.g:
            task["g"] = _floats(args.g)
        if args.legendre_at:
            task["legendre_at"] = _floats(args.legendre_at)
        cfg = _assemble(args, None, task)
        if cfg is not None:
            cfg["young"] = {"cli": yt}
        return _run_assembled(args, cfg)
    if args.command == "symbol":
        task = {"kind": "symbol", "x0": args.x, "xi_values": _floats(args.xi),
                "quadrature": args.quadrature}
        return _run_assembled(args, _assemble(args, _model_table(args), task))
    parser.error("unknown command")


if __name__ == "__main__":
    sys.exit(main())

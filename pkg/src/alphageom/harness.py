"""Closed-form versus numeric verification suite.

Each check produces a :class:`CheckResult` holding the worst error seen and
the tolerance it was held to. :func:`run_checks` bundles the invariants of
the numeric, geometric and family layers; ``perturb`` scales named
closed-form constants so the suite's sensitivity can itself be tested.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import ExpectationEngine
from .errors import GeometryError
from .families import (
    ConnectionConstants,
    GeneralizedGaussianFamily,
    OrthantGaussianFamily,
    gg_connection_constants,
    gg_curvature_1212_closed,
    gg_first_factor,
    gg_flat_alphas,
    gg_gaussian_curvature_closed,
    gg_metric_closed,
    gg_moment,
    gg_one_connection_closed,
    gg_skewness_closed,
    m2_alpha_connection_closed,
    m2_marginal_check,
    m2_metric_closed,
    m2_skewness_closed,
)
from .geometry import AlphaCurvature, levi_civita, score_moments
from .numerics import RandomStream, log_gamma, spd_inverse

__all__ = ["CheckResult", "VerifyOptions", "run_checks", "format_table", "gg_grid", "gg_curvature_grid", "m2_grid"]

# Tolerance ladder.
TOL_CLOSED = 1e-6
TOL_ZERO = 1e-8
TOL_ONE_FD = 5e-5
TOL_TWO_FD = 2e-3
TOL_SPREAD = 1e-3
TOL_FLAT = 1e-5
TOL_DUAL = 5e-4
TOL_NORMALIZATION = 1e-9
TOL_SCORE_MEAN = 1e-7
N_SE = 4.0
# Absolute slack added to 4-SE bands so zero-variance quantities compare cleanly.
SE_FLOOR = 1e-12

GG_MU = (-1.0, 0.0, 1.0)
GG_SIGMA = (0.5, 1.0, 2.0)
GG_ALPHAS = (-1.0, 0.0, 1.0 / 3.0, 0.5, 1.0)
M2_ALPHAS = (-1.0, 0.0, 0.5, 1.0)
M2_LAMBDA = (0.5, 1.25, 2.0)

# Nonzero ledger entries, as (constant, tensor, 0-based index).
_T_ENTRIES = (("c112", (0, 0, 1)), ("c121", (0, 1, 0)), ("c222", (1, 1, 1)))
_G1_ENTRIES = (("c1_112", (0, 0, 1)), ("c1_121", (0, 1, 0)), ("c1_222", (1, 1, 1)))
_T_ZEROS = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))
_G1_ZEROS = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))


@dataclass(frozen=True)
class CheckResult:
    section: str
    name: str
    worst: float
    tol: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerifyOptions:
    families: tuple = ("gg", "m2")
    betas: tuple = (2, 4, 6)
    ps: tuple = (1, 2, 3)
    gg_alphas: tuple = GG_ALPHAS
    m2_alphas: tuple = M2_ALPHAS
    gg_mu: tuple = GG_MU
    gg_sigma: tuple = GG_SIGMA
    curvature_side: int = 4
    m2_lambda: tuple = M2_LAMBDA
    nodes: int = 400
    samples: int = 10**6
    seed: int = 20240601
    monte_carlo: bool = True
    tol: Optional[float] = None
    perturb: Mapping[str, float] = field(default_factory=dict)


def gg_grid(family, mu=GG_MU, sigma=GG_SIGMA):
    return [family.point(m, s) for m in mu for s in sigma]


def gg_curvature_grid(family, side=4):
    """side x side grid over [-1, 1] x [0.5, 2]."""
    return [family.point(m, s) for m in np.linspace(-1.0, 1.0, side) for s in np.linspace(0.5, 2.0, side)]


def m2_grid(family, lam=M2_LAMBDA, chart="natural"):
    pts = []
    for combo in itertools.product(lam, repeat=family.p):
        pt = family.point(np.array(combo), chart="precision")
        pts.append(family.convert(pt, chart))
    return pts


class _Collector:
    def __init__(self, tol_override):
        self.results = []
        self.tol_override = tol_override

    def add(self, section, name, worst, tol, detail=""):
        tol = tol if self.tol_override is None else self.tol_override
        worst = float(worst)
        passed = bool(np.isfinite(worst) and worst <= tol)
        self.results.append(CheckResult(section, name, worst, tol, passed, detail))

    def guard(self, section, name, fn: Callable[[], object]):
        """Record a failed check instead of propagating a library error."""
        try:
            return fn()
        except (GeometryError, ArithmeticError, ValueError) as exc:
            self.results.append(CheckResult(section, name, math.inf, 0.0, False, f"{type(exc).__name__}: {exc}"))
            return None


def _rel(num, ref):
    # Relative for |ref| >= 1, absolute below; some ledger entries vanish at beta = 2.
    return abs(num - ref) / max(abs(ref), 1.0)


def _perturbed(beta, perturb) -> ConnectionConstants:
    c = gg_connection_constants(beta)
    unknown = set(perturb) - set(ConnectionConstants.names())
    if unknown:
        raise ValueError(f"unknown constant(s) {sorted(unknown)}")
    return dataclasses.replace(c, **{k: getattr(c, k) * (1.0 + d) for k, d in perturb.items()})


# --------------------------------------------------------------------------- numerics


def _check_numerics(col: _Collector):
    sec = "numerics"
    xs = np.geomspace(0.05, 200.0, 400)
    worst = max(abs(log_gamma(x + 1) - log_gamma(x) - math.log(x)) / max(1.0, abs(log_gamma(x + 1))) for x in xs)
    col.add(sec, "log_gamma recurrence", worst, 1e-12)

    rng = RandomStream(7, 0).generator()
    worst = 0.0
    for p in (1, 2, 3, 5):
        a = rng.standard_normal((p, p))
        m = a @ a.T + p * np.eye(p)
        worst = max(worst, float(np.max(np.abs(spd_inverse(m) @ m - np.eye(p)))))
    col.add(sec, "spd_inverse round trip", worst, 1e-10)


# --------------------------------------------------------------------------- shared


def _score_checks(col, sec, family, grid, engine):
    moms = []
    for pt in grid:
        moms.append(score_moments(family, pt, engine))
    col.add(sec, "normalization", max(abs(m.normalization - 1.0) for m in moms), TOL_NORMALIZATION)
    col.add(sec, "score identity", max(np.max(np.abs(m.mean_score)) for m in moms), TOL_SCORE_MEAN)
    col.add(sec, "Bartlett identity", max(np.max(np.abs(m.metric - m.outer)) for m in moms), TOL_CLOSED)
    return moms


def _levi_civita_check(col, sec, family, grid, engine, moms):
    worst = 0.0
    for pt, m in zip(grid, moms):
        lc = levi_civita(family, pt, engine).components
        worst = max(worst, float(np.max(np.abs(m.one_connection + 0.5 * m.skewness - lc))))
    col.add(sec, "Gamma(0) = Levi-Civita", worst, TOL_ONE_FD)


def _symmetry_check(col, sec, moms, curv, alphas):
    worst = 0.0
    for m in moms:
        t = m.skewness
        worst = max(worst, float(np.max(np.abs(t - t.transpose(1, 0, 2)))), float(np.max(np.abs(t - t.transpose(0, 2, 1)))))
        g1 = m.one_connection
        worst = max(worst, float(np.max(np.abs(g1 - g1.transpose(1, 0, 2)))))
    for ac in curv:
        for a in alphas:
            worst = max(worst, ac.tensor(a).antisymmetry_defect())
    col.add(sec, "symmetry classes", worst, TOL_ZERO)


def _mc_agreement(col, sec, family, point, quad, mc):
    q = score_moments(family, point, quad)
    m = score_moments(family, point, mc)
    worst = 0.0
    for key in ("metric", "skewness", "one_connection"):
        diff = np.abs(getattr(m, key) - getattr(q, key))
        band = N_SE * m.stderr[key] + SE_FLOOR
        worst = max(worst, float(np.max(diff / band)))
    # Reported in units of the 4-SE band; passes at <= 1.
    col.add(sec, "monte-carlo vs quadrature (x 4 SE)", worst, 1.0)


# --------------------------------------------------------------------------- gg


def _check_gg(col: _Collector, beta: int, opts: VerifyOptions):
    sec = f"gg beta={beta}"
    fam = GeneralizedGaussianFamily(beta)
    quad = ExpectationEngine.quadrature(opts.nodes)

    def identities():
        gg_connection_constants(beta)
        for a in opts.gg_alphas:
            gg_first_factor(beta, a)
        gg_flat_alphas(beta)
        return 0.0

    ok = col.guard(sec, "gamma identities and closed roots", identities)
    if ok is not None:
        col.add(sec, "gamma identities and closed roots", ok, math.inf)

    consts = _perturbed(beta, opts.perturb)
    grid = gg_grid(fam, opts.gg_mu, opts.gg_sigma)
    moms = _score_checks(col, sec, fam, grid, quad)

    # Metric and tensor ledger.
    errs = {k: 0.0 for k in ("c11", "c22", "g zero", "T zero", "gamma1 zero")}
    errs.update({name: 0.0 for name, _ in _T_ENTRIES + _G1_ENTRIES})
    for pt, m in zip(grid, moms):
        sigma = pt.coords[1]
        g = gg_metric_closed(sigma, beta, consts).components
        errs["c11"] = max(errs["c11"], _rel(m.metric[0, 0], g[0, 0]))
        errs["c22"] = max(errs["c22"], _rel(m.metric[1, 1], g[1, 1]))
        errs["g zero"] = max(errs["g zero"], abs(m.metric[0, 1]), abs(m.metric[1, 0]))
        t = gg_skewness_closed(sigma, beta, consts).components
        g1 = gg_one_connection_closed(sigma, beta, consts).components
        for name, idx in _T_ENTRIES:
            errs[name] = max(errs[name], _rel(m.skewness[idx], t[idx]))
        for name, idx in _G1_ENTRIES:
            errs[name] = max(errs[name], _rel(m.one_connection[idx], g1[idx]))
        errs["T zero"] = max([errs["T zero"]] + [abs(m.skewness[i]) for i in _T_ZEROS])
        errs["gamma1 zero"] = max([errs["gamma1 zero"]] + [abs(m.one_connection[i]) for i in _G1_ZEROS])
    col.add(sec, "g11 (c11, relative)", errs["c11"], TOL_CLOSED)
    col.add(sec, "g22 (c22, relative)", errs["c22"], TOL_CLOSED)
    col.add(sec, "g12 = 0", errs["g zero"], TOL_ZERO)
    for name, idx in _T_ENTRIES:
        col.add(sec, f"T{''.join(str(i + 1) for i in idx)} ({name}, relative)", errs[name], TOL_CLOSED)
    for name, idx in _G1_ENTRIES:
        col.add(sec, f"gamma1_{''.join(str(i + 1) for i in idx)} ({name}, relative)", errs[name], TOL_CLOSED)
    col.add(sec, "T declared zeros", errs["T zero"], TOL_ZERO)
    col.add(sec, "gamma1 declared zeros", errs["gamma1 zero"], TOL_ZERO)

    # Curvature on the side x side grid.
    cgrid = gg_curvature_grid(fam, opts.curvature_side)
    curv = [AlphaCurvature(fam, pt, quad) for pt in cgrid]
    for a in opts.gg_alphas:
        r_err, k_err, ks = 0.0, 0.0, []
        for pt, ac in zip(cgrid, curv):
            r = ac.tensor(a)
            r_err = max(r_err, abs(r[0, 1, 0, 1] - gg_curvature_1212_closed(pt.coords[1], beta, a)))
            k = ac.gaussian_curvature(a)
            ks.append(k)
            k_err = max(k_err, abs(k - gg_gaussian_curvature_closed(beta, a)))
        col.add(sec, f"R1212 closed vs numeric, alpha={a:.6g}", r_err, TOL_TWO_FD)
        col.add(sec, f"K closed vs numeric, alpha={a:.6g}", k_err, TOL_TWO_FD)
        col.add(sec, f"K spread over grid, alpha={a:.6g}", max(ks) - min(ks), TOL_SPREAD)

    dual = 0.0
    for ac in curv:
        for a in (0.5, 1.0):
            rp = ac.tensor(a).components
            rm = ac.tensor(-a).components
            dual = max(dual, float(np.max(np.abs(rp + rm.transpose(0, 1, 3, 2)))))
    col.add(sec, "dual curvature identity", dual, TOL_DUAL)

    _levi_civita_check(col, sec, fam, grid, quad, moms)
    _symmetry_check(col, sec, moms, curv, opts.gg_alphas)

    if opts.monte_carlo:
        mc = ExpectationEngine.monte_carlo(opts.samples, opts.seed, stream_id=beta)
        _mc_agreement(col, sec, fam, fam.point(0.0, 1.0), quad, mc)
        x = fam.sample(fam.point(0.0, 1.0), opts.samples, RandomStream(opts.seed, 100 + beta))
        worst = 0.0
        for k in (1, 2, 3, 4):
            v = x**k
            se = v.std(ddof=1) / math.sqrt(v.size)
            worst = max(worst, abs(v.mean() - gg_moment(k, beta)) / (N_SE * se))
        col.add(sec, "sampler moments (x 4 SE)", worst, 1.0)


# --------------------------------------------------------------------------- m2


def _check_m2(col: _Collector, p: int, opts: VerifyOptions):
    sec = f"m2 p={p}"
    fam = OrthantGaussianFamily(p)
    quad = ExpectationEngine.quadrature(opts.nodes)

    grid = m2_grid(fam, opts.m2_lambda, chart="natural")
    moms = _score_checks(col, sec, fam, grid, quad)

    off = ~np.eye(p, dtype=bool)
    diag3 = np.zeros((p, p, p), dtype=bool)
    diag3[np.arange(p), np.arange(p), np.arange(p)] = True
    g_err = g_zero = t_err = t_zero = g1_zero = 0.0
    ga_err = 0.0
    for pt, m in zip(grid, moms):
        g = m2_metric_closed(pt.array).components
        t = m2_skewness_closed(pt.array).components
        g_err = max(g_err, float(np.max(np.abs(np.diag(m.metric) - np.diag(g)) / np.abs(np.diag(g)))))
        g_zero = max(g_zero, float(np.max(np.abs(m.metric[off]), initial=0.0)))
        t_err = max(t_err, float(np.max(np.abs(m.skewness[diag3] - t[diag3]) / np.abs(t[diag3]))))
        t_zero = max(t_zero, float(np.max(np.abs(m.skewness[~diag3]), initial=0.0)))
        g1_zero = max(g1_zero, float(np.max(np.abs(m.one_connection))))
        for a in opts.m2_alphas:
            ref = m2_alpha_connection_closed(pt.array, a).components
            num = m.one_connection + 0.5 * (1 - a) * m.skewness
            scale = np.maximum(np.abs(ref), 1.0)
            ga_err = max(ga_err, float(np.max(np.abs(num - ref) / scale)))
    col.add(sec, "metric diagonal (relative)", g_err, TOL_CLOSED)
    col.add(sec, "metric off-diagonal", g_zero, TOL_ZERO)
    col.add(sec, "T diagonal (relative)", t_err, TOL_CLOSED)
    col.add(sec, "T off-diagonal", t_zero, TOL_ZERO)
    col.add(sec, "gamma1 = 0 in natural chart", g1_zero, TOL_ZERO)
    col.add(sec, "gamma_alpha closed vs numeric", ga_err, TOL_CLOSED)

    worst = 0.0
    for pt in grid:
        back = fam.convert(fam.convert(pt, "precision"), "natural")
        worst = max(worst, float(np.max(np.abs(back.array - pt.array))))
    col.add(sec, "chart round trip", worst, 1e-15)

    curv = [AlphaCurvature(fam, pt, quad) for pt in grid]
    for a in opts.m2_alphas:
        col.add(sec, f"flatness max|R|, alpha={a:.6g}", max(ac.tensor(a).max_abs for ac in curv), TOL_FLAT)

    # Connection derivatives are costly at p = 3; check Levi-Civita at the ends and centre.
    pick = sorted({0, len(grid) // 2, len(grid) - 1})
    _levi_civita_check(col, sec, fam, [grid[i] for i in pick], quad, [moms[i] for i in pick])
    _symmetry_check(col, sec, moms, curv, opts.m2_alphas)

    lam = np.array(opts.m2_lambda[: p] if len(opts.m2_lambda) >= p else [1.0] * p)
    engines = [("quadrature", quad)]
    if opts.monte_carlo:
        engines.append(("monte-carlo", ExpectationEngine.monte_carlo(opts.samples, opts.seed, stream_id=200 + p)))
    for label, eng in engines:
        worst = 0.0
        for i in range(p):
            rep = m2_marginal_check(lam, i, eng)
            for mo, ex, tl, cmp_ in zip(rep.moments, rep.expected, rep.tolerances, rep.compared):
                if cmp_:
                    worst = max(worst, abs(mo - ex) / (tl + SE_FLOOR))
        col.add(sec, f"Gaussian marginals, {label} (x band)", worst, 1.0)

    if opts.monte_carlo:
        pt = fam.point(lam, chart="precision")
        _mc_agreement(col, sec, fam, pt, quad, ExpectationEngine.monte_carlo(opts.samples, opts.seed, stream_id=300 + p))
        x = np.atleast_2d(fam.sample(pt, opts.samples, RandomStream(opts.seed, 400 + p)).T).T
        worst = 0.0 if np.all(np.prod(x, axis=1) > 0) else math.inf
        if p > 1:
            signs = np.sign(x)
            share = 1.0 / 2 ** (p - 1)
            for pattern in itertools.product((1.0, -1.0), repeat=p):
                if np.prod(pattern) < 0:
                    continue
                hit = np.all(signs == np.array(pattern), axis=1).astype(float)
                se = math.sqrt(share * (1 - share) / hit.size)
                worst = max(worst, abs(hit.mean() - share) / (N_SE * se))
        col.add(sec, "sampler support and sign balance (x 4 SE)", worst, 1.0)


# --------------------------------------------------------------------------- entry


def run_checks(opts: VerifyOptions | None = None) -> list:
    """Run the suite and return one :class:`CheckResult` per check."""
    opts = VerifyOptions() if opts is None else opts
    col = _Collector(opts.tol)
    _check_numerics(col)
    if "gg" in opts.families:
        for b in opts.betas:
            col.guard(f"gg beta={b}", "section", lambda b=b: _check_gg(col, b, opts))
    if "m2" in opts.families:
        for p in opts.ps:
            col.guard(f"m2 p={p}", "section", lambda p=p: _check_m2(col, p, opts))
    return col.results


def format_table(results: Sequence[CheckResult]) -> str:
    width = max([len(f"{r.section} | {r.name}") for r in results] + [10])
    lines = [f"{'status':6}  {'check':{width}}  {'worst':>12}  {'tol':>10}"]
    for r in results:
        label = f"{r.section} | {r.name}"
        line = f"{'PASS' if r.passed else 'FAIL':6}  {label:{width}}  {r.worst:12.4e}  {r.tol:10.3e}"
        if r.detail:
            line += f"  {r.detail}"
        lines.append(line)
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed} passed, {failed} failed")
    return "\n".join(lines) + "\n"

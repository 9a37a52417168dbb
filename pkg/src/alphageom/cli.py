"""Command-line front end.

    alphageom curvature --family gg --beta 4 --mu 0 --sigma 1 --alpha 0
    alphageom sweep --family gg --beta 2,4,6 --alpha -1:1:0.5 --output csv
    alphageom verify --family m2 --p 3 --alpha 0.5

Exit status: 0 success, 1 computational or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .core import ExpectationEngine
from .errors import DomainError, GeometryError
from .families import (
    GeneralizedGaussianFamily,
    OrthantGaussianFamily,
    gg_curvature_1212_closed,
    gg_flat_alphas,
    gg_gaussian_curvature_closed,
    gg_moment,
)
from .geometry import AlphaCurvature, score_moments
from .harness import VerifyOptions, format_table, run_checks
from .numerics import RandomStream, bracket_roots
from .report import OutputRecord, emit

__all__ = ["RunConfig", "parse_args", "run", "run_sweep", "run_verify", "main"]

COMMANDS = ("metric", "connection", "curvature", "sweep", "verify", "flat-roots", "sample")
ENGINES = ("closed", "quad", "mc")


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: Optional[str]
    betas: tuple = ()
    ps: tuple = ()
    chart: Optional[str] = None
    points: tuple = ()  # coordinate tuples; for m2 they depend on p and are filled per p
    alphas: tuple = (0.0,)
    alphas_given: bool = False
    engine: str = "quad"
    nodes: int = 400
    samples: Optional[int] = None
    seed: Optional[int] = None
    tol: Optional[float] = None
    output: str = "json"
    out: Optional[str] = None


# --------------------------------------------------------------------------- value syntax


def _number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def parse_range(text: str) -> list:
    """``start:stop:step`` with the stop included when it lies within half a step."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    start, stop, step = (_number(p) for p in parts)
    if not step > 0:
        raise ValueError(f"range step must be positive, got {text!r}")
    if stop < start:
        raise ValueError(f"range stop below start in {text!r}")
    n = int(math.floor((stop - start) / step + 0.5)) + 1
    return [start + k * step for k in range(n)]


def parse_values(text: str) -> list:
    """A single value, a comma list, or a start:stop:step range."""
    if ":" in text:
        return parse_range(text)
    vals = [_number(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty value list")
    return vals


def _ints(text: str, flag: str) -> list:
    out = []
    for v in parse_values(text):
        if v != int(v):
            raise ValueError(f"{flag} needs integers, got {v!r}")
        out.append(int(v))
    return out


# --------------------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="alphageom", description="Fisher metric, alpha-connections and alpha-curvature.")
    ap.add_argument("--version", action="version", version=f"alphageom {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--family", choices=("gg", "m2"))
    ap.add_argument("--beta", help="even shape; value, comma list or range")
    ap.add_argument("--mu")
    ap.add_argument("--sigma")
    ap.add_argument("--p")
    ap.add_argument("--lambda", dest="lam", help="precision vector, comma separated")
    ap.add_argument("--theta", help="natural coordinates, comma separated")
    ap.add_argument("--alpha", help="value, comma list or start:stop:step")
    ap.add_argument("--engine", choices=ENGINES, default="quad")
    ap.add_argument("--nodes", type=int, default=400)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--grid-mu", help="start:stop:step")
    ap.add_argument("--grid-sigma", help="start:stop:step")
    ap.add_argument("--grid-lambda", help="start:stop:step applied to every axis")
    ap.add_argument("--grid-theta", help="start:stop:step applied to every axis")
    ap.add_argument("--output", choices=("json", "csv"), default="json")
    ap.add_argument("--out")
    return ap


def _gg_points(ns, ap):
    def axis(explicit, grid, default, name):
        if explicit is not None and grid is not None:
            ap.error(f"--{name} and --grid-{name} are mutually exclusive")
        if grid is not None:
            return parse_range(grid)
        if explicit is not None:
            return parse_values(explicit)
        return [default]

    mus = axis(ns.mu, ns.grid_mu, 0.0, "mu")
    sigmas = axis(ns.sigma, ns.grid_sigma, 1.0, "sigma")
    if any(s <= 0 for s in sigmas):
        ap.error("--sigma must be positive")
    return tuple((m, s) for m in mus for s in sigmas)


_VALUE_FLAGS = {"--beta", "--mu", "--sigma", "--lambda", "--theta", "--alpha", "--grid-mu", "--grid-sigma", "--grid-lambda", "--grid-theta"}


def _glue_negatives(argv):
    """Attach values such as ``-1,0`` to their flag so argparse does not read them as options."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
            else:
                out += [tok, nxt]
        else:
            out.append(tok)
    return out


def parse_args(argv) -> RunConfig:
    """Parse and validate; usage problems exit with status 2."""
    ap = _build_parser()
    ns = ap.parse_args(_glue_negatives(list(argv)))
    try:
        return _validate(ns, ap)
    except ValueError as exc:
        ap.error(str(exc))


def _validate(ns, ap) -> RunConfig:
    cmd = ns.command
    if ns.nodes < 8:
        ap.error("--nodes must be at least 8")
    if ns.samples is not None and ns.samples < 2:
        ap.error("--samples must be at least 2")
    if ns.tol is not None and not ns.tol > 0:
        ap.error("--tol must be positive")

    family = ns.family
    if family is None and cmd != "verify":
        ap.error("--family is required")

    alphas_given = ns.alpha is not None
    alphas = tuple(parse_values(ns.alpha)) if alphas_given else (0.0,)

    betas = ()
    if ns.beta is not None:
        vals = parse_values(ns.beta)
        for b in vals:
            if b != int(b) or int(b) % 2 or b < 2:
                ap.error(f"--beta: beta must be even (got {b:g})")
        betas = tuple(int(b) for b in vals)

    ps = tuple(_ints(ns.p, "--p")) if ns.p is not None else ()
    if any(p < 1 for p in ps):
        ap.error("--p must be a positive integer")

    engine = ns.engine
    if cmd == "sample" and engine != "mc":
        ap.error("sample draws from the family; use --engine mc")
    if engine == "mc" and cmd != "verify":
        if ns.seed is None:
            ap.error("--engine mc requires --seed")
        if ns.samples is None:
            ap.error("--engine mc requires --samples")
        if cmd in ("curvature", "sweep", "flat-roots"):
            ap.error(f"{cmd} differentiates expectations; use --engine quad or closed")

    chart = None
    points = ()
    if cmd != "verify":
        if family == "gg":
            if ns.lam is not None or ns.theta is not None or ns.grid_lambda or ns.grid_theta or ps:
                ap.error("--p, --lambda and --theta belong to --family m2")
            betas = betas or (2,)
            chart = "location-scale"
            points = _gg_points(ns, ap)
        else:
            if ns.beta is not None or ns.mu is not None or ns.sigma is not None or ns.grid_mu or ns.grid_sigma:
                ap.error("--beta, --mu and --sigma belong to --family gg")
            chart, points, ps = _m2_points(ns, ap, ps)
            if cmd in ("sweep", "flat-roots"):
                ap.error(f"{cmd} is defined for --family gg")

    return RunConfig(
        command=cmd,
        family=family,
        betas=betas,
        ps=ps,
        chart=chart,
        points=points,
        alphas=alphas,
        alphas_given=alphas_given,
        engine=engine,
        nodes=ns.nodes,
        samples=ns.samples,
        seed=ns.seed,
        tol=ns.tol,
        output=ns.output,
        out=ns.out,
    )


def _m2_points(ns, ap, ps):
    given = [f for f in ("lam", "theta", "grid_lambda", "grid_theta") if getattr(ns, f) is not None]
    if len(given) > 1:
        ap.error("give only one of --lambda, --theta, --grid-lambda, --grid-theta")
    if len(ps) > 1:
        ap.error("--p takes a single value outside verify")
    p = ps[0] if ps else None
    kind = given[0] if given else None
    chart = "natural" if kind in ("theta", "grid_theta") else "precision"
    if kind in ("lam", "theta"):
        vec = tuple(parse_values(getattr(ns, kind)))
        if p is None:
            p = len(vec)
        if len(vec) != p:
            ap.error(f"--{'lambda' if kind == 'lam' else 'theta'} has {len(vec)} entries but --p is {p}")
        points = (vec,)
    elif kind is not None:
        if p is None:
            ap.error("--p is required with a grid")
        axis = parse_range(getattr(ns, kind))
        points = tuple(itertools.product(axis, repeat=p))
    else:
        if p is None:
            ap.error("--p is required for --family m2")
        points = ((1.0,) * p,)
    for vec in points:
        if chart == "precision" and any(v <= 0 for v in vec):
            ap.error("--lambda entries must be positive")
        if chart == "natural" and any(v >= 0 for v in vec):
            ap.error("--theta entries must be negative")
    return chart, points, (p,)


# --------------------------------------------------------------------------- computations


def _engine(cfg: RunConfig, stream_id: int = 0) -> ExpectationEngine:
    if cfg.engine == "closed":
        return ExpectationEngine.closed_form()
    if cfg.engine == "mc":
        return ExpectationEngine.monte_carlo(cfg.samples, cfg.seed, stream_id)
    return ExpectationEngine.quadrature(cfg.nodes)


def _families(cfg: RunConfig):
    """Yield (family, family-level params)."""
    if cfg.family == "gg":
        for b in cfg.betas:
            yield GeneralizedGaussianFamily(b), {"beta": b}
    else:
        for p in cfg.ps:
            yield OrthantGaussianFamily(p), {"p": p}


def _point_params(fam, pt) -> dict:
    if fam.name == "gg":
        return {"mu": float(pt.coords[0]), "sigma": float(pt.coords[1])}
    name = "theta" if pt.chart == "natural" else "lambda"
    return {f"{name}{i + 1}": float(v) for i, v in enumerate(pt.coords)}


def _records_for_array(base, quantity, alpha, arr, ref=None, mask=None):
    out = []
    for idx in itertools.product(*(range(n) for n in arr.shape)):
        r = None
        if ref is not None and (mask is None or mask[idx]):
            r = float(ref[idx])
        out.append(
            OutputRecord(
                **base,
                alpha=alpha,
                quantity=quantity,
                indices=tuple(i + 1 for i in idx),
                value=float(arr[idx]),
                reference_value=r,
            )
        )
    return out


def _base(cfg, fam, fparams, pt):
    return {
        "family": fam.name,
        "chart": pt.chart,
        "params": {**fparams, **_point_params(fam, pt)},
        "engine": cfg.engine,
    }


def _iter_points(cfg):
    for fam, fparams in _families(cfg):
        for coords in cfg.points:
            yield fam, fparams, fam.point(*coords) if fam.name == "gg" else fam.point(np.array(coords), chart=cfg.chart)


def _closed_moments(fam, pt):
    return score_moments(fam, pt, ExpectationEngine.closed_form())


def _cmd_metric(cfg):
    recs = []
    for k, (fam, fparams, pt) in enumerate(_iter_points(cfg)):
        m = score_moments(fam, pt, _engine(cfg, k))
        ref = None if cfg.engine == "closed" else _closed_moments(fam, pt).metric
        recs += _records_for_array(_base(cfg, fam, fparams, pt), "g", None, m.metric, ref)
    return recs


def _cmd_connection(cfg):
    recs = []
    for k, (fam, fparams, pt) in enumerate(_iter_points(cfg)):
        m = score_moments(fam, pt, _engine(cfg, k))
        c = None if cfg.engine == "closed" else _closed_moments(fam, pt)
        base = _base(cfg, fam, fparams, pt)
        recs += _records_for_array(base, "T", None, m.skewness, None if c is None else c.skewness)
        recs += _records_for_array(base, "gamma1", None, m.one_connection, None if c is None else c.one_connection)
        for a in cfg.alphas:
            ga = m.one_connection + 0.5 * (1 - a) * m.skewness
            ref = None if c is None else c.one_connection + 0.5 * (1 - a) * c.skewness
            recs += _records_for_array(base, "gamma_alpha", a, ga, ref)
    return recs


def _closed_curvature(fam, pt, alpha):
    """(R array, K or None) from the closed forms."""
    p = fam.param_dim
    r = np.zeros((p,) * 4)
    if fam.name == "gg":
        v = gg_curvature_1212_closed(pt.coords[1], fam.beta, alpha)
        r[0, 1, 0, 1], r[1, 0, 0, 1] = v, -v
        return r, gg_gaussian_curvature_closed(fam.beta, alpha)
    return r, (0.0 if p == 2 else None)


def _cmd_curvature(cfg):
    recs = []
    for fam, fparams, pt in _iter_points(cfg):
        base = _base(cfg, fam, fparams, pt)
        ac = None if cfg.engine == "closed" else AlphaCurvature(fam, pt, _engine(cfg))
        for a in cfg.alphas:
            r_ref, k_ref = _closed_curvature(fam, pt, a)
            if ac is None:
                if fam.name == "gg":
                    # Only the 1212 entry has a closed form.
                    recs += [
                        OutputRecord(**base, alpha=a, quantity="R", indices=(1, 2, 1, 2), value=float(r_ref[0, 1, 0, 1]))
                    ]
                else:
                    recs += _records_for_array(base, "R", a, r_ref)
                if k_ref is not None:
                    recs.append(OutputRecord(**base, alpha=a, quantity="K", indices=(), value=float(k_ref)))
                continue
            r = ac.tensor(a).components
            mask = None
            if fam.name == "gg":
                # References exist for the 1212 entry and its antisymmetric partner only.
                mask = np.zeros_like(r, dtype=bool)
                mask[0, 1, 0, 1] = mask[1, 0, 0, 1] = True
            recs += _records_for_array(base, "R", a, r, r_ref, mask)
            if fam.param_dim == 2:
                recs.append(
                    OutputRecord(**base, alpha=a, quantity="K", indices=(), value=ac.gaussian_curvature(a), reference_value=k_ref)
                )
    return recs


def run_sweep(cfg: RunConfig) -> tuple:
    """K^(alpha) over beta x alpha; returns (records, any_failed).

    Each cell carries the closed-form value; with a numeric engine the value
    is the numeric K and the closed form becomes the reference.
    """
    cells = []
    mu, sigma = cfg.points[0] if cfg.points else (0.0, 1.0)
    for b in cfg.betas:
        fam = GeneralizedGaussianFamily(b)
        pt = fam.point(mu, sigma)
        base = {"family": "gg", "chart": pt.chart, "params": {"beta": b, "mu": float(mu), "sigma": float(sigma)}, "engine": cfg.engine}
        ac, err = None, None
        if cfg.engine != "closed":
            try:
                ac = AlphaCurvature(fam, pt, _engine(cfg))
            except GeometryError as exc:
                err = f"{type(exc).__name__}: {exc}"
        for a in cfg.alphas:
            closed = gg_gaussian_curvature_closed(b, a)
            if cfg.engine == "closed":
                cells.append(OutputRecord(**base, alpha=a, quantity="K", indices=(), value=closed))
            elif err is not None:
                cells.append(OutputRecord(**base, alpha=a, quantity="K", indices=(), value=math.nan, error=err))
            else:
                try:
                    cells.append(
                        OutputRecord(**base, alpha=a, quantity="K", indices=(), value=ac.gaussian_curvature(a), reference_value=closed)
                    )
                except GeometryError as exc:
                    cells.append(
                        OutputRecord(**base, alpha=a, quantity="K", indices=(), value=math.nan, error=f"{type(exc).__name__}: {exc}")
                    )
    return cells, any(c.failed for c in cells)


def _cmd_flat_roots(cfg):
    recs = []
    for fam, fparams, pt in _iter_points(cfg):
        base = _base(cfg, fam, fparams, pt)
        closed = gg_flat_alphas(fam.beta)
        if cfg.engine == "closed":
            for r in sorted(set(closed)):
                recs.append(OutputRecord(**base, alpha=None, quantity="flat_alpha", indices=(), value=r))
            continue
        ac = AlphaCurvature(fam, pt, _engine(cfg))
        for r in bracket_roots(ac.gaussian_curvature, -2.0, 2.0):
            ref = min(closed, key=lambda c: abs(c - r))
            recs.append(OutputRecord(**base, alpha=None, quantity="flat_alpha", indices=(), value=r, reference_value=ref))
    return recs


def _half_normal_moment(k, lam):
    # E[X^k] for X half-normal with variance parameter 1/lam.
    return 2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi) * lam ** (-k / 2)


def _cmd_sample(cfg):
    recs = []
    for k, (fam, fparams, pt) in enumerate(_iter_points(cfg)):
        base = _base(cfg, fam, fparams, pt)
        x = fam.sample(pt, cfg.samples, RandomStream(cfg.seed, k))
        if fam.name == "gg":
            z = x - pt.coords[0]
            for order in range(1, 5):
                recs.append(
                    OutputRecord(
                        **base,
                        alpha=None,
                        quantity="moment",
                        indices=(order,),
                        value=float(np.mean(z**order)),
                        reference_value=gg_moment(order, fam.beta, pt.coords[1]),
                    )
                )
            continue
        lam = fam.precision(pt)
        x = x.reshape(-1, fam.p)
        for i in range(fam.p):
            v = 1.0 / lam[i]
            for order in range(1, 5):
                if fam.p == 1:
                    ref = _half_normal_moment(order, lam[i])
                else:
                    ref = (0.0, v, 0.0, 3 * v * v)[order - 1]
                recs.append(
                    OutputRecord(
                        **base,
                        alpha=None,
                        quantity="moment",
                        indices=(i + 1, order),
                        value=float(np.mean(x[:, i] ** order)),
                        reference_value=ref,
                    )
                )
    return recs


def run_verify(cfg: RunConfig, perturb=None) -> tuple:
    """Run the invariant suite; returns (table text, results, exit status)."""
    opts = {"nodes": cfg.nodes, "tol": cfg.tol, "perturb": dict(perturb or {})}
    if cfg.family is not None:
        opts["families"] = (cfg.family,)
    if cfg.betas:
        opts["betas"] = cfg.betas
    if cfg.ps:
        opts["ps"] = cfg.ps
    if cfg.alphas_given:
        opts["gg_alphas"] = cfg.alphas
        opts["m2_alphas"] = cfg.alphas
    if cfg.samples is not None:
        opts["samples"] = cfg.samples
    if cfg.seed is not None:
        opts["seed"] = cfg.seed
    results = run_checks(VerifyOptions(**opts))
    status = 0 if all(r.passed for r in results) else 1
    return format_table(results), results, status


_HANDLERS = {
    "metric": _cmd_metric,
    "connection": _cmd_connection,
    "curvature": _cmd_curvature,
    "flat-roots": _cmd_flat_roots,
    "sample": _cmd_sample,
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute a parsed configuration and return the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        if cfg.command == "verify":
            table, results, status = run_verify(cfg)
            if cfg.out:
                with open(cfg.out, "w", encoding="utf-8") as fh:
                    fh.write(table)
            else:
                stdout.write(table)
            for r in results:
                if not r.passed:
                    stderr.write(f"failed: {r.section} | {r.name}\n")
            return status
        if cfg.command == "sweep":
            records, failed = run_sweep(cfg)
        else:
            records, failed = _HANDLERS[cfg.command](cfg), False
        meta = {"version": __version__, "seed": cfg.seed, "nodes": cfg.nodes}
        emit(records, cfg.output, cfg.out if cfg.out else stdout, meta)
        return 1 if failed else 0
    except OSError as exc:
        stderr.write(f"alphageom: cannot write output: {exc}\n")
        return 1
    except (GeometryError, ArithmeticError, DomainError) as exc:
        stderr.write(f"alphageom: {type(exc).__name__}: {exc}\n")
        return 1


def main(argv=None) -> int:
    cfg = parse_args(sys.argv[1:] if argv is None else argv)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

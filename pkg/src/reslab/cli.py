"""``reslab`` command line.

Every subcommand reads an optional JSON config (``--config``), lets flags
override it, validates the merged document, resolves defaults, then writes
``results.csv`` and ``summary.json`` into ``--out``. The ``config`` block of a
summary is itself a valid config, so a run can be replayed from its summary.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time

import jsonschema
import numpy as np

from . import __version__
from .algorithms import AlgorithmId, StopRule, iterate, step_map
from .errors import NumericsError, ReslabError
from .experiments import basin_escape_study, set_convergence_study, transfer_study
from .expr import parse_objective
from .fields import HyperParams, as_point, eval_F
from .odes import ResolutionOrder, consistency_exponent, resolution_field, rk4_integrate
from .problems import BUILTIN_IDS, ProblemSpec, SpectrumSpec, builtin, random_quadratic
from .stability import Kind, classify_equilibrium, jacobian_at, step_bounds
from .trajectory import SOLVER_ERROR, fit_decay

__all__ = ["main", "run", "CONFIG_SCHEMA", "load_config", "resolve_config", "EXIT_OK",
           "EXIT_INVALID", "EXIT_NUMERIC"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("classify", "simulate", "bounds", "consistency", "basin", "transfer", "setconv")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_count = {"type": "integer", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


CONFIG_SCHEMA = _obj({
    "command": {"enum": list(COMMANDS)},
    "problem": {"oneOf": [
        _obj({"builtin": {"enum": list(BUILTIN_IDS)}}, ["builtin"]),
        _obj({"expr": {"type": "string"}}, ["expr"]),
        _obj({"random_quadratic": _obj({
            "n": {"type": "integer", "minimum": 1}, "m": {"type": "integer", "minimum": 1},
            "seed": _count, "xx": _pair, "yy": _pair, "coupling": {"type": "number", "minimum": 0},
        }, ["n", "m", "seed"])}, ["random_quadratic"]),
    ]},
    "algorithm": {"type": "string"},
    "order": {"enum": ["o1", "os", None]},
    "kind": {"enum": ["continuous", "discrete", "both", None]},
    "hyperparams": _obj({"s": _pos, "tau": _pos, "gamma": _pos, "phi": _pos}),
    "grid": _obj({k: {"type": "array", "items": _pos, "minItems": 1} for k in ("s", "tau", "gamma", "phi")}),
    "experiment": _obj({
        "at": _vec, "z0": _vec, "trials": _count, "radius": _pos,
        "max_iters": {"type": "integer", "minimum": 1}, "tol_F": {"type": ["number", "null"]},
        "target_radius": {"type": ["number", "null"]}, "t_end": _pos, "dt": _pos,
        "s_grid": {"type": "array", "items": _pos, "minItems": 4}, "annulus": _pair,
        "tol": _pos, "box": {"type": ["array", "null"], "items": _num, "minItems": 2, "maxItems": 2},
    }),
    "seeds": _obj({"seed": _count}),
    "output": _obj({"dir": {"type": "string"}, "emit_plot_data": {"type": "boolean"}}),
    "stride": {"type": "integer", "minimum": 1},
})


class _Invalid(Exception):
    """Validation failure; maps to exit code 2."""


# -- config -------------------------------------------------------------------

def _validate(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise _Invalid(f"config error at {where}: {exc.message}")


def load_config(path) -> dict:
    """Read a JSON config; a previous run's summary.json is accepted too."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise _Invalid(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise _Invalid(f"config {path} is not valid JSON: {exc}")
    if isinstance(doc, dict) and "config" in doc and "version" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise _Invalid("config must be a JSON object")
    _validate(doc)
    return doc


def _parse_vec(text, what):
    try:
        return [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise _Invalid(f"--{what} expects comma-separated numbers, got {text!r}")


def _flag_overrides(args) -> dict:
    """Nested config fragment built from the flags that were given."""
    out: dict = {}

    def put(path, value):
        if value is None:
            return
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    if args.problem is not None:
        put(("problem",), {"builtin": args.problem})
    if args.expr is not None:
        put(("problem",), {"expr": args.expr})
    if args.random is not None:
        vals = _parse_vec(args.random, "random")
        if len(vals) != 3 or not all(v.is_integer() for v in vals):
            raise _Invalid("--random expects n,m,seed")
        put(("problem",), {"random_quadratic": {"n": int(vals[0]), "m": int(vals[1]), "seed": int(vals[2])}})
    put(("algorithm",), args.alg)
    put(("order",), args.order)
    put(("kind",), args.kind)
    for name in ("s", "tau", "gamma", "phi"):
        put(("hyperparams", name), getattr(args, name))
        grid = getattr(args, f"{name}_grid")
        if grid is not None:
            put(("grid", name), _parse_vec(grid, f"{name}-grid"))
    if args.at is not None:
        put(("experiment", "at"), _parse_vec(args.at, "at"))
    if args.z0 is not None:
        put(("experiment", "z0"), _parse_vec(args.z0, "z0"))
    for name in ("trials", "radius", "max_iters", "tol_F", "target_radius", "t_end", "dt", "tol"):
        put(("experiment", name), getattr(args, name))
    if args.annulus is not None:
        put(("experiment", "annulus"), _parse_vec(args.annulus, "annulus"))
    if args.consistency_grid is not None:
        put(("experiment", "s_grid"), _parse_vec(args.consistency_grid, "consistency-grid"))
    put(("seeds", "seed"), args.seed)
    put(("output", "dir"), args.out)
    if args.emit_plot_data:
        put(("output", "emit_plot_data"), True)
    put(("stride",), args.stride)
    return out


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "problem":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_EXP_DEFAULTS = {
    "classify": {},
    "simulate": {"max_iters": 1000, "tol_F": None, "target_radius": None, "t_end": 10.0, "dt": 0.01},
    "bounds": {},
    "consistency": {"s_grid": [float(v) for v in np.logspace(-3, -1, 8)]},
    "basin": {"trials": 1000, "radius": 0.1, "max_iters": 2000},
    "transfer": {"trials": 50, "radius": 0.5, "max_iters": 600},
    "setconv": {"trials": 20, "annulus": [1.2, 1.5], "t_end": 20.0, "dt": 0.005,
                "max_iters": 10_000, "tol": 1e-6},
}
_NEEDS_ALG = {"classify", "simulate", "bounds", "consistency", "basin", "transfer", "setconv"}


def resolve_config(cfg: dict, command: str) -> dict:
    """Fill defaults so the stored config fully determines the run."""
    if cfg.get("command", command) != command:
        raise _Invalid(f"config is for {cfg['command']!r}, not {command!r}")
    out = copy.deepcopy(cfg)
    out["command"] = command
    if "problem" not in out:
        raise _Invalid("no problem given (use --problem, --expr or --random)")
    if command in _NEEDS_ALG:
        if "algorithm" not in out:
            raise _Invalid("no algorithm given (use --alg)")
        try:
            out["algorithm"] = str(AlgorithmId.parse(out["algorithm"]))
        except ReslabError as exc:
            raise _Invalid(str(exc))
    out.setdefault("order", None)
    if out.get("kind") is None:
        out["kind"] = "continuous" if out["order"] else "discrete"
    hp = {"s": 0.1, "tau": 1.0, "gamma": 1.0, "phi": 1.0}
    hp.update(out.get("hyperparams", {}))
    out["hyperparams"] = hp
    out.setdefault("grid", {})
    exp = dict(_EXP_DEFAULTS[command])
    exp.update(out.get("experiment", {}))
    out["experiment"] = exp
    out["seeds"] = {"seed": 0, **out.get("seeds", {})}
    out["output"] = {"dir": ".", "emit_plot_data": False, **out.get("output", {})}
    out.setdefault("stride", 1)
    _validate(out)
    return out


def _problem(cfg) -> ProblemSpec:
    spec = cfg["problem"]
    if "builtin" in spec:
        return builtin(spec["builtin"])
    if "expr" in spec:
        obj = parse_objective(spec["expr"])
        return ProblemSpec(obj.name, obj, box=(-1.0, 1.0))
    rq = spec["random_quadratic"]
    sp = SpectrumSpec(tuple(rq.get("xx", (1.0, 2.0))), tuple(rq.get("yy", (-2.0, -1.0))),
                      rq.get("coupling", 1.0))
    return random_quadratic(rq["n"], rq["m"], rq["seed"], sp)


def _point(cfg, key, dim, default=0.0):
    v = cfg["experiment"].get(key)
    if v is None:
        return np.full(dim, default)
    if len(v) != dim:
        raise _Invalid(f"{key} has {len(v)} components, problem dimension is {dim}")
    return np.asarray(v, dtype=float)


def _hp(cfg, **over) -> HyperParams:
    return HyperParams(**{**cfg["hyperparams"], **over})


# -- output -------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


class _Run:
    """Collects everything a subcommand produces."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.columns: list = []
        self.rows: list = []
        self.verdicts: list = []
        self.bounds: list = []
        self.fits: list = []
        self.plot: list = []      # (series, t_or_k, value)
        self.lines: list = []     # human summary
        self.partial = False

    def say(self, text):
        self.lines.append(text)


def _write_outputs(run: _Run, started, elapsed):
    out_dir = run.cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "results.csv"), _csv_text(run.columns, run.rows))
    summary = {
        "config": run.cfg,
        "verdicts": run.verdicts,
        "bounds": run.bounds,
        "fits": run.fits,
        "timing": {"started": started, "wall_clock_s": elapsed},
        "partial": run.partial,
        "version": __version__,
    }
    _atomic_write(os.path.join(out_dir, "summary.json"),
                  json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    if run.cfg["output"]["emit_plot_data"]:
        rows = [{"series": s, "t_or_k": t, "value": v} for s, t, v in run.plot]
        _atomic_write(os.path.join(out_dir, "plot_data.csv"),
                      _csv_text(["series", "t_or_k", "value"], rows))


# -- subcommands --------------------------------------------------------------

def _classify(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    obj = prob.objective
    z = _point(cfg, "at", obj.dim)
    p = _hp(cfg)
    kinds = ["continuous", "discrete"] if cfg["kind"] == "both" else [cfg["kind"]]
    run.columns = ["kind", "index", "re", "im", "modulus"]
    for kind in kinds:
        if kind == "continuous":
            order = cfg["order"] or "o1"
            target = resolution_field(cfg["algorithm"], order, obj, p)
        else:
            order = None
            target = step_map(cfg["algorithm"], obj, p)
        rep = classify_equilibrium(Kind.parse(kind), jacobian_at(target, z))
        for i, lam in enumerate(rep.eigenvalues):
            run.rows.append({"kind": kind, "index": i, "re": lam.real, "im": lam.imag, "modulus": abs(lam)})
        run.verdicts.append({"kind": kind, "algorithm": cfg["algorithm"], "order": order,
                             "at": z.tolist(), **rep.to_dict()})
        run.say(f"{kind} verdict: {rep.verdict} (margin {rep.margin:.6g})")


def _simulate(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    exp = cfg["experiment"]
    obj = prob.objective
    z0 = _point(cfg, "z0", obj.dim, default=1.0)
    at = _point(cfg, "at", obj.dim)
    p = _hp(cfg)
    if cfg["order"]:
        W = resolution_field(cfg["algorithm"], cfg["order"], obj, p)
        tr = rk4_integrate(W, z0, exp["t_end"], exp["dt"], stride=cfg["stride"])
        stamp = "t"
    else:
        stop = StopRule(exp["max_iters"], tol_F=exp["tol_F"],
                        target=at if exp["target_radius"] is not None else None,
                        target_radius=exp["target_radius"], stride=cfg["stride"])
        tr = iterate(cfg["algorithm"], obj, p, z0, stop)
        stamp = "k"
    zc = [f"z{i + 1}" for i in range(obj.dim)]
    run.columns = [stamp] + zc + ["norm", "dist_to_at", "norm_F"]
    dist = np.linalg.norm(tr.states - at, axis=1)
    for t, z, d in zip(tr.stamps, tr.states, dist):
        row = {stamp: float(t) if stamp == "t" else int(t), "norm": float(np.linalg.norm(z)),
               "dist_to_at": float(d), "norm_F": float(np.max(np.abs(eval_F(obj, z))))}
        row.update({c: float(v) for c, v in zip(zc, z)})
        run.rows.append(row)
        run.plot.append(("dist_to_at", row[stamp], float(d)))
    fit = fit_decay(tr.stamps, dist)
    run.fits.append({"quantity": "dist_to_at", "termination": tr.termination, "steps": tr.steps,
                     "slope": None if fit is None else fit.slope,
                     "rate": None if fit is None else fit.rate,
                     "r2": None if fit is None else fit.r2,
                     "samples": 0 if fit is None else fit.samples})
    run.say(f"{'field' if cfg['order'] else 'iteration'} run: {tr.termination} after {tr.steps} steps, "
            f"final |z| = {np.linalg.norm(tr.final):.6g}")
    if tr.termination == SOLVER_ERROR:
        run.partial = True
        raise NumericsError(tr.error or "step failed")


def _bounds(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    obj = prob.objective
    z = _point(cfg, "at", obj.dim)
    box = cfg["experiment"].get("box") or prob.box
    rep = step_bounds(cfg["algorithm"], obj, z, _hp(cfg), box=tuple(box))
    run.columns = ["quantity", "value", "provenance"]
    for name in ("s_max", "escape_s_max", "M", "phi_min"):
        val = getattr(rep, name)
        if val is not None:
            run.rows.append({"quantity": name, "value": val, "provenance": rep.provenance.get(name, "")})
    run.rows.append({"quantity": "L", "value": rep.L,
                     "provenance": "estimated" if rep.flags.get("L_estimated") else "analytic"})
    run.bounds.append(rep.to_dict())
    s_max = "none" if rep.s_max is None else f"{rep.s_max:.17g}"
    run.say(f"s_max {s_max}  [{rep.provenance.get('s_max', '')}]")
    for k, v in rep.flags.items():
        run.say(f"  {k}: {v}")


def _consistency(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    obj = prob.objective
    z0 = _point(cfg, "z0", obj.dim, default=1.0)
    alg = AlgorithmId.parse(cfg["algorithm"])
    orders = [cfg["order"]] if cfg["order"] else (["o1"] if alg is AlgorithmId.JM else ["o1", "os"])
    run.columns = ["order", "s", "error", "used"]
    for order in orders:
        res = consistency_exponent(alg, order, obj, _hp(cfg), z0, cfg["experiment"]["s_grid"])
        for s, e, u in zip(res.s_grid, res.errors, res.used):
            run.rows.append({"order": order, "s": float(s), "error": float(e), "used": bool(u)})
            run.plot.append((f"error_{order}", float(s), float(e)))
        run.fits.append({"quantity": f"one_step_error_{order}", "slope": res.slope,
                         "intercept": res.intercept, "indeterminate": res.indeterminate})
        slope = "indeterminate" if res.slope is None else f"{res.slope:.4f}"
        run.say(f"{alg} vs {order} field: log-log slope {slope}")


def _records_table(run: _Run, records, preferred):
    cols = list(preferred)
    for r in records:
        for k in r:
            if k not in cols:
                cols.append(k)
    run.columns = cols
    run.rows = [dict(r) for r in records]


def _basin(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    exp = cfg["experiment"]
    obj = prob.objective
    res = basin_escape_study(cfg["algorithm"], obj, _point(cfg, "at", obj.dim), _hp(cfg),
                             exp["trials"], exp["radius"], seed=cfg["seeds"]["seed"],
                             max_iters=exp["max_iters"])
    _records_table(run, res.records, ["seed", "outcome", "escaped", "steps", "min_distance", "z0", "error"])
    sm = res.summary
    run.verdicts.append({"kind": "discrete", "verdict": sm["discrete_verdict"], "margin": sm["discrete_margin"],
                         "precondition_met": sm["precondition_met"]})
    run.fits.append({"quantity": "escape_fraction", "value": sm["escape_fraction"],
                     "fraction_undefined": sm["fraction_undefined"], "escaped": sm["escaped"],
                     "trials": sm["trials"], "max_iters_runs": sm["max_iters_runs"]})
    run.say(f"escape fraction {sm['escape_fraction']} ({sm['escaped']}/{sm['trials']}); "
            f"discrete verdict at the equilibrium: {sm['discrete_verdict']}")


def _p_grid(cfg):
    base = cfg["hyperparams"]
    names = [k for k in ("s", "tau", "gamma", "phi") if k in cfg["grid"]]
    if not names:
        return [HyperParams(**base)]
    combos = itertools.product(*(cfg["grid"][k] for k in names))
    return [HyperParams(**{**base, **dict(zip(names, c))}) for c in combos]


def _transfer(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    exp = cfg["experiment"]
    obj = prob.objective
    res = transfer_study(cfg["algorithm"], obj, _point(cfg, "at", obj.dim), _p_grid(cfg), exp["radius"],
                         exp["trials"], seed=cfg["seeds"]["seed"], max_iters=exp["max_iters"])
    _records_table(run, res.records, ["grid_index", "s", "tau", "gamma", "phi", "seed", "termination",
                                      "success", "rate", "r2"])
    for pt in res.summary["points"]:
        run.verdicts.append({"kind": "continuous", "order": pt["field_order"], "s": pt["s"], "gamma": pt["gamma"],
                             "phi": pt["phi"], "tau": pt["tau"], "verdict": pt["continuous_verdict"],
                             "margin": pt["continuous_margin"]})
        run.verdicts.append({"kind": "discrete", "s": pt["s"], "gamma": pt["gamma"], "phi": pt["phi"],
                             "tau": pt["tau"], "verdict": pt["discrete_verdict"], "margin": pt["discrete_margin"]})
        run.fits.append({"quantity": "geometric_decay", "grid_index": pt["grid_index"],
                         "decay_fraction": pt["decay_fraction"], "min_r2": pt["min_r2"],
                         "median_rate": pt["median_rate"]})
        run.say(f"s={pt['s']:g} gamma={pt['gamma']:g} phi={pt['phi']:g}: field {pt['continuous_verdict']}, "
                f"map {pt['discrete_verdict']}, decaying runs {pt['decay_fraction']:.3f}")
    run.fits.append({"quantity": "s_star_empirical", "value": res.summary["s_star_empirical"]})
    run.say(f"empirical s* on the grid: {res.summary['s_star_empirical']}")


def _setconv(run: _Run, prob: ProblemSpec):
    cfg = run.cfg
    exp = cfg["experiment"]
    p = _hp(cfg)
    if cfg["order"]:
        target = resolution_field(cfg["algorithm"], cfg["order"], prob.objective, p)
    else:
        target = cfg["algorithm"]
    res = set_convergence_study(target, prob, p, trials=exp["trials"], start_annulus=tuple(exp["annulus"]),
                                seed=cfg["seeds"]["seed"], t_end=exp["t_end"], dt=exp["dt"],
                                max_iters=exp["max_iters"], tol=exp["tol"], stride=cfg["stride"])
    _records_table(run, res.records, ["seed", "r0", "termination", "final_distance", "success", "monotone",
                                      "max_increase", "steps", "z0", "error"])
    sm = res.summary
    run.fits.append({"quantity": "set_distance", **sm})
    run.say(f"{sm['mode']}: {sm['success_fraction']:.3f} of runs within {sm['tol']:g} of the set "
            f"(worst {sm['max_final_distance']}); interior fixed {sm['interior_fixed']}/{sm['interior_checks']}")


_HANDLERS = {"classify": _classify, "simulate": _simulate, "bounds": _bounds, "consistency": _consistency,
             "basin": _basin, "transfer": _transfer, "setconv": _setconv}

_COLUMNS_HELP = {
    "classify": "kind,index,re,im,modulus",
    "simulate": "k|t,z1..zd,norm,dist_to_at,norm_F",
    "bounds": "quantity,value,provenance",
    "consistency": "order,s,error,used",
    "basin": "seed,outcome,escaped,steps,min_distance,z0,error",
    "transfer": "grid_index,s,tau,gamma,phi,seed,termination,success,rate,r2,...",
    "setconv": "seed,r0,termination,final_distance,success,monotone,max_increase,steps,z0,error",
}


# -- entry points -------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem and algorithm")
    g.add_argument("--config", help="JSON config (or a previous summary.json)")
    g.add_argument("--problem", choices=BUILTIN_IDS, help="builtin problem id")
    g.add_argument("--expr", help="objective f(x, y) as an expression, e.g. 'x^2 - y^4'")
    g.add_argument("--random", metavar="N,M,SEED", help="seeded random quadratic")
    g.add_argument("--alg", help="tt-gda | geg | tt-ppm | dn | rdn | jm")
    g.add_argument("--order", choices=["o1", "os"], help="resolution field order")
    g.add_argument("--kind", choices=["continuous", "discrete", "both"])
    h = common.add_argument_group("hyperparameters")
    for name in ("s", "tau", "gamma", "phi"):
        h.add_argument(f"--{name}", type=float)
        h.add_argument(f"--{name}-grid", dest=f"{name}_grid", metavar="V1,V2,...")
    e = common.add_argument_group("experiment")
    e.add_argument("--at", metavar="Z", help="equilibrium / evaluation point, comma separated")
    e.add_argument("--z0", metavar="Z", help="initial point, comma separated")
    e.add_argument("--trials", type=int)
    e.add_argument("--radius", type=float)
    e.add_argument("--max-iters", dest="max_iters", type=int)
    e.add_argument("--tol-f", dest="tol_F", type=float)
    e.add_argument("--target-radius", dest="target_radius", type=float)
    e.add_argument("--t-end", dest="t_end", type=float)
    e.add_argument("--dt", type=float)
    e.add_argument("--tol", type=float)
    e.add_argument("--annulus", metavar="R_LO,R_HI")
    e.add_argument("--consistency-grid", metavar="S1,S2,...")
    e.add_argument("--seed", type=int)
    e.add_argument("--stride", type=int)
    o = common.add_argument_group("output")
    o.add_argument("--out", help="output directory (default: current)")
    o.add_argument("--emit-plot-data", action="store_true", help="also write long-format plot_data.csv")

    ap = argparse.ArgumentParser(prog="reslab", description="Resolution-ODE analysis of min-max algorithms.")
    ap.add_argument("--version", action="version", version=f"reslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common], help=f"results.csv columns: {_COLUMNS_HELP[cmd]}",
                       description=f"results.csv columns: {_COLUMNS_HELP[cmd]}")
    return ap


def run(argv=None, stdout=None) -> int:
    """Parse ``argv``, execute, and return the exit code."""
    stdout = stdout or sys.stdout
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    run_ = None
    try:
        base = load_config(args.config) if args.config else {}
        cfg = _merge(base, _flag_overrides(args))
        _validate(cfg)
        cfg = resolve_config(cfg, args.command)
        prob = _problem(cfg)
        run_ = _Run(cfg)
        _HANDLERS[args.command](run_, prob)
    except _Invalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if run_ is not None:
            run_.partial = True
            _write_outputs(run_, started, time.perf_counter() - t0)
        return EXIT_NUMERIC
    except ReslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _write_outputs(run_, started, time.perf_counter() - t0)
    for line in run_.lines:
        print(line, file=stdout)
    print(f"wrote {os.path.join(run_.cfg['output']['dir'], 'results.csv')} "
          f"({len(run_.rows)} rows) and summary.json", file=stdout)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

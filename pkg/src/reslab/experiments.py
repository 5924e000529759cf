"""Batch studies: stability transfer, escape statistics, set convergence and
degenerate-saddle convergence.

Every study draws its random starts from per-trial Philox streams keyed by
``(seed, trial)``, so a trial's start does not depend on scheduling and
records can be produced concurrently (``RESLAB_THREADS``) then sorted.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .algorithms import AlgorithmId, StopRule, iterate, step, step_map
from .errors import DomainError, NotAnEquilibriumError, ReslabError
from .fields import HyperParams, Objective, as_point, eval_F
from .odes import ResolutionOrder, VectorField, resolution_field, rk4_integrate
from .problems import ProblemSpec
from .stability import Kind, Verdict, classify_equilibrium, is_saddle, jacobian_at
from .trajectory import (DIVERGED, ESCAPED, MAX_ITERS, REACHED_TARGET, SOLVER_ERROR,
                         fit_decay)

__all__ = ["ExperimentResult", "sample_ball", "sample_annulus", "trial_rng", "transfer_study",
           "basin_escape_study", "set_convergence_study", "degenerate_saddle_study",
           "decay_success", "thread_count"]

DECAY_R2 = 0.95
DECAY_FLOOR = 1e-12
EQUILIBRIUM_F_TOL = 1e-10
CONVERGED_BACK = "converged_back"


@dataclass
class ExperimentResult:
    id: str
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def same_outcome(self, other: "ExperimentResult") -> bool:
        """Equality ignoring wall-clock time."""
        return (self.id == other.id and self.config == other.config
                and self.records == other.records and self.summary == other.summary)


# -- sampling ---------------------------------------------------------------

def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, trial], dtype=np.uint64)))


def sample_ball(rng: np.random.Generator, center, radius: float) -> np.ndarray:
    """One point uniform in the open ball, never the center itself."""
    center = as_point(center)
    d = center.size
    while True:
        g = rng.standard_normal(d)
        nrm = np.linalg.norm(g)
        u = rng.random()
        if nrm > 0 and u > 0:
            return center + radius * u ** (1.0 / d) * g / nrm


def sample_annulus(rng: np.random.Generator, dim: int, r_lo: float, r_hi: float) -> np.ndarray:
    """Uniform (by volume) in ``r_lo <= |z| <= r_hi`` around the origin."""
    while True:
        g = rng.standard_normal(dim)
        nrm = np.linalg.norm(g)
        if nrm > 0:
            break
    r = (r_lo**dim + rng.random() * (r_hi**dim - r_lo**dim)) ** (1.0 / dim)
    return r * g / nrm


def thread_count() -> int:
    raw = os.environ.get("RESLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"RESLAB_THREADS must be an integer, got {raw!r}")


def _pmap(fn: Callable, items: Sequence) -> list:
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _params_dict(p: HyperParams) -> dict:
    return {"s": p.s, "tau": p.tau, "gamma": p.gamma, "phi": p.phi}


# -- stability transfer ------------------------------------------------------

def decay_success(termination: str, fit, floor_hit: bool, r2_min: float = DECAY_R2) -> bool:
    """Geometric decay: a good log-linear fit, or a drop to roundoff too fast to fit."""
    if termination in (DIVERGED, SOLVER_ERROR):
        return False
    if fit is not None:
        return fit.decaying and fit.r2 >= r2_min
    return floor_hit


def _transfer_trial(alg, obj, p, z_star, z0, max_iters):
    stop = StopRule(max_iters, target=z_star, target_radius=DECAY_FLOOR)
    tr = iterate(alg, obj, p, z0, stop)
    dist = np.linalg.norm(tr.states - z_star, axis=1)
    fit = fit_decay(tr.stamps, dist, floor=DECAY_FLOOR)
    floor_hit = tr.termination == REACHED_TARGET
    return {
        "termination": tr.termination,
        "steps": int(tr.steps),
        "final_distance": float(dist[-1]),
        "rate": None if fit is None else fit.rate,
        "r2": None if fit is None else fit.r2,
        "fit_samples": 0 if fit is None else fit.samples,
        "success": decay_success(tr.termination, fit, floor_hit),
        "error": tr.error,
    }


def transfer_study(alg, obj: Objective, z_star, p_grid: Sequence[HyperParams], radius: float,
                   trials: int, seed: int = 0, max_iters: int = 600, starts=None,
                   decay_fraction: float = 0.95) -> ExperimentResult:
    """Compare the resolution-field verdict, the step-map verdict and sampled
    trajectories at ``z_star`` across a hyperparameter grid.

    The field is the O(s) one (O(1) for JM, which has no O(s) field). The
    empirical ``s_star`` is the largest grid ``s`` where the field and the map
    are both ExpStable and at least ``decay_fraction`` of the runs decay
    geometrically; it is only resolved to the grid.
    """
    t0 = time.perf_counter()
    alg = AlgorithmId.parse(alg)
    z_star = as_point(z_star, obj.dim)
    if not radius > 0:
        raise DomainError("radius must be positive")
    resid = float(np.max(np.abs(eval_F(obj, z_star))))
    if resid > EQUILIBRIUM_F_TOL:
        raise NotAnEquilibriumError(f"|F(z_star)| = {resid:.3e}; not a critical point")
    if starts is None:
        starts = [sample_ball(trial_rng(seed, i), z_star, radius) for i in range(trials)]
    else:
        starts = [as_point(z, obj.dim) for z in starts]
    order = ResolutionOrder.O1 if alg is AlgorithmId.JM else ResolutionOrder.Os

    records, points = [], []
    for gi, p in enumerate(p_grid):
        W = resolution_field(alg, order, obj, p)
        cont = classify_equilibrium(Kind.CONTINUOUS, W.jac(z_star))
        disc = classify_equilibrium(Kind.DISCRETE, jacobian_at(step_map(alg, obj, p), z_star))
        runs = _pmap(lambda z0: _transfer_trial(alg, obj, p, z_star, z0, max_iters), starts)
        for i, (z0, run) in enumerate(zip(starts, runs)):
            records.append({"grid_index": gi, **_params_dict(p), "seed": i,
                            "z0": [float(v) for v in z0], **run})
        frac = float(np.mean([r["success"] for r in runs])) if runs else float("nan")
        r2s = [r["r2"] for r in runs if r["r2"] is not None]
        rates = [r["rate"] for r in runs if r["rate"] is not None]
        agree = (cont.verdict is Verdict.EXP_STABLE and disc.verdict is Verdict.EXP_STABLE
                 and runs and frac >= decay_fraction)
        points.append({
            "grid_index": gi, **_params_dict(p),
            "field_order": str(order),
            "continuous_verdict": str(cont.verdict), "continuous_margin": cont.margin,
            "discrete_verdict": str(disc.verdict), "discrete_margin": disc.margin,
            "decay_fraction": frac,
            "min_r2": min(r2s) if r2s else None,
            "median_rate": float(np.median(rates)) if rates else None,
            "all_stable": bool(agree),
        })
    stable_s = [pt["s"] for pt in points if pt["all_stable"]]
    summary = {"points": points, "s_star_empirical": max(stable_s) if stable_s else None}
    config = {"alg": str(alg), "objective": obj.name, "z_star": [float(v) for v in z_star],
              "p_grid": [_params_dict(p) for p in p_grid], "radius": radius, "trials": len(starts),
              "seed": seed, "max_iters": max_iters}
    return ExperimentResult("transfer", config, records, summary, time.perf_counter() - t0)


# -- escape statistics -------------------------------------------------------

def _escape_trial(alg, obj, p, z_u, z0, radius, max_iters, exit_factor, growth_factor):
    z = z0
    d = float(np.linalg.norm(z - z_u))
    d_min = d
    for k in range(1, max_iters + 1):
        try:
            z = step(alg, obj, p, z).z_next
        except ReslabError as exc:
            return {"outcome": SOLVER_ERROR, "steps": k - 1, "escaped": False,
                    "error": f"{type(exc).__name__}: {exc}", "min_distance": d_min}
        d = float(np.linalg.norm(z - z_u))
        d_min = min(d_min, d)
        if d > exit_factor * radius or (d_min > 0 and d > growth_factor * d_min):
            return {"outcome": ESCAPED, "steps": k, "escaped": True, "error": None,
                    "min_distance": d_min}
        if d <= DECAY_FLOOR * radius:
            # collapsed onto the equilibrium: it will never leave
            return {"outcome": CONVERGED_BACK, "steps": k, "escaped": False, "error": None,
                    "min_distance": d_min}
    return {"outcome": MAX_ITERS, "steps": max_iters, "escaped": False, "error": None,
            "min_distance": d_min}


def basin_escape_study(alg, obj: Objective, z_unstable, p: HyperParams, trials: int, radius: float,
                       seed: int = 0, max_iters: int = 2000, exit_factor: float = 10.0,
                       growth_factor: float = 100.0) -> ExperimentResult:
    """Fraction of starts near an unstable equilibrium that leave its neighbourhood.

    A run escapes once it is farther than ``exit_factor * radius`` or its
    distance has grown ``growth_factor`` times past its running minimum. The
    precondition (a discrete Unstable verdict) is evaluated and reported,
    not enforced, so that controls can be run too.
    """
    t0 = time.perf_counter()
    alg = AlgorithmId.parse(alg)
    z_u = as_point(z_unstable, obj.dim)
    if trials < 0:
        raise DomainError("trials must be >= 0")
    if not radius > 0:
        raise DomainError("radius must be positive")
    disc = classify_equilibrium(Kind.DISCRETE, jacobian_at(step_map(alg, obj, p), z_u))
    starts = [sample_ball(trial_rng(seed, i), z_u, radius) for i in range(trials)]
    runs = _pmap(lambda z0: _escape_trial(alg, obj, p, z_u, z0, radius, max_iters,
                                          exit_factor, growth_factor), starts)
    records = [{"seed": i, "z0": [float(v) for v in z0], **run}
               for i, (z0, run) in enumerate(zip(starts, runs))]
    escaped = sum(r["escaped"] for r in records)
    summary = {
        "discrete_verdict": str(disc.verdict),
        "discrete_margin": disc.margin,
        "precondition_met": disc.verdict is Verdict.UNSTABLE,
        "escaped": escaped,
        "trials": trials,
        "escape_fraction": escaped / trials if trials else float("nan"),
        "fraction_undefined": trials == 0,
        "max_iters_runs": sum(r["outcome"] == MAX_ITERS for r in records),
        "solver_errors": sum(r["outcome"] == SOLVER_ERROR for r in records),
        "converged_back": sum(r["outcome"] == CONVERGED_BACK for r in records),
    }
    config = {"alg": str(alg), "objective": obj.name, "z_unstable": [float(v) for v in z_u],
              "params": _params_dict(p), "trials": trials, "radius": radius, "seed": seed,
              "max_iters": max_iters, "exit_factor": exit_factor, "growth_factor": growth_factor}
    return ExperimentResult("basin", config, records, summary, time.perf_counter() - t0)


# -- set convergence ---------------------------------------------------------

def _set_distance(center, R):
    return lambda z: max(0.0, float(np.linalg.norm(z - center)) - R)


def set_convergence_study(target, problem: ProblemSpec, p: Optional[HyperParams] = None,
                          trials: int = 20, start_annulus=(1.2, 1.5), seed: int = 0,
                          t_end: float = 20.0, dt: float = 0.005, max_iters: int = 10_000,
                          tol: float = 1e-6, stride: int = 1, starts=None,
                          interior_checks: int = 100, interior_steps: int = 10,
                          monotone_tol: float = 1e-9) -> ExperimentResult:
    """Distance-to-set convergence toward ``problem.known_invariant_set``.

    ``target`` is a :class:`VectorField` (integrated with RK4 to ``t_end``)
    or an algorithm id (iterated with ``p`` for at most ``max_iters`` steps,
    stopping once within ``tol``). Also checks that ``interior_checks``
    starts in the set do not move.
    """
    t0 = time.perf_counter()
    if problem.known_invariant_set is None:
        raise DomainError(f"problem {problem.id!r} has no known invariant set")
    center, R = problem.known_invariant_set
    center = as_point(center)
    obj = problem.objective
    dist = _set_distance(center, R)
    is_field = isinstance(target, VectorField)
    if not is_field:
        alg = AlgorithmId.parse(target)
        if p is None:
            raise DomainError("iterating an algorithm needs hyperparameters")
    lo, hi = start_annulus
    if not 0 <= lo <= hi:
        raise DomainError(f"bad start annulus {start_annulus}")
    if starts is None:
        starts = [center + sample_annulus(trial_rng(seed, i), obj.dim, lo, hi) for i in range(trials)]
    else:
        starts = [as_point(z, obj.dim) for z in starts]

    def run(z0):
        try:
            if is_field:
                tr = rk4_integrate(target, z0, t_end, dt, stride=stride)
            else:
                tr = iterate(alg, obj, p, z0, StopRule(max_iters, target_set_distance=dist,
                                                       target_set_tol=tol, stride=stride))
        except ReslabError as exc:
            return {"termination": SOLVER_ERROR, "final_distance": None, "success": False,
                    "monotone": None, "max_increase": None, "steps": 0,
                    "error": f"{type(exc).__name__}: {exc}"}
        dA = np.array([dist(z) for z in tr.states])
        inc = float(np.max(np.diff(dA))) if dA.size > 1 else 0.0
        return {"termination": tr.termination, "final_distance": float(dA[-1]),
                "success": bool(dA[-1] <= tol), "monotone": bool(inc <= monotone_tol),
                "max_increase": max(inc, 0.0), "steps": int(tr.steps), "error": tr.error}

    runs = _pmap(run, starts)
    records = [{"seed": i, "z0": [float(v) for v in z0], "r0": float(np.linalg.norm(z0 - center)),
                **r} for i, (z0, r) in enumerate(zip(starts, runs))]

    # forward invariance of the set itself
    fixed = 0
    rng = trial_rng(seed, 2**32 + 1)
    for _ in range(interior_checks):
        z = sample_ball(rng, center, R)
        if is_field:
            ok = bool(np.all(target(z) == 0.0))
        else:
            w, ok = z, True
            for _ in range(interior_steps):
                w = step(alg, obj, p, w).z_next
                ok = ok and bool(np.array_equal(w, z))
        fixed += ok

    finals = [r["final_distance"] for r in records if r["final_distance"] is not None]
    summary = {
        "mode": "field" if is_field else "dta",
        "success_fraction": float(np.mean([r["success"] for r in records])) if records else float("nan"),
        "max_final_distance": max(finals) if finals else None,
        "all_monotone": all(r["monotone"] for r in records if r["monotone"] is not None),
        "interior_checks": interior_checks,
        "interior_fixed": fixed,
        "tol": tol,
    }
    config = {"target": "field" if is_field else str(alg), "problem": problem.id,
              "params": None if p is None else _params_dict(p),
              "field": None if not is_field else {"alg": str(target.alg), "order": str(target.order),
                                                  "params": _params_dict(target.params)},
              "trials": len(starts), "start_annulus": [lo, hi], "seed": seed, "t_end": t_end,
              "dt": dt, "max_iters": max_iters, "tol": tol}
    return ExperimentResult("setconv", config, records, summary, time.perf_counter() - t0)


# -- degenerate saddles ------------------------------------------------------

def degenerate_saddle_study(problem: ProblemSpec, algs, p: HyperParams, trials: int, radius: float,
                            seed: int = 0, max_iters: int = 100_000, tol: float = 1e-4,
                            starts=None) -> ExperimentResult:
    """Plain convergence ``|z_k| <= tol`` near a degenerate saddle at the origin.

    No rate is asserted. A DN run that hits a singular Newton system (for
    x2y4, any iterate on the line ``y = 0`` with ``x != 0``) is recorded as a
    ``solver_error`` and the study continues.
    """
    t0 = time.perf_counter()
    obj = problem.objective
    origin = np.zeros(obj.dim)
    sc = is_saddle(obj, origin)
    if sc.verdict != "boundary":
        raise DomainError(f"origin of {problem.id!r} is not a degenerate (boundary) saddle: {sc.verdict}")
    algs = [AlgorithmId.parse(a) for a in algs]
    if starts is None:
        starts = [sample_ball(trial_rng(seed, i), origin, radius) for i in range(trials)]
    else:
        starts = [as_point(z, obj.dim) for z in starts]
    records, per_alg = [], {}
    for alg in algs:
        def run(z0, alg=alg):
            tr = iterate(alg, obj, p, z0, StopRule(max_iters, target=origin, target_radius=tol,
                                                   stride=max(1, max_iters // 1000)))
            return {"alg": str(alg), "termination": tr.termination, "steps": int(tr.steps),
                    "final_norm": float(np.linalg.norm(tr.final)),
                    "success": tr.termination == REACHED_TARGET,
                    "failed_index": tr.failed_index, "error": tr.error}
        runs = _pmap(run, starts)
        records += [{"seed": i, "z0": [float(v) for v in z0], **r}
                    for i, (z0, r) in enumerate(zip(starts, runs))]
        per_alg[str(alg)] = {
            "success_fraction": float(np.mean([r["success"] for r in runs])) if runs else float("nan"),
            "solver_errors": sum(r["termination"] == SOLVER_ERROR for r in runs),
            "max_final_norm": max((r["final_norm"] for r in runs), default=None),
        }
    summary = {"saddle_check": sc.verdict, "per_alg": per_alg, "tol": tol}
    config = {"problem": problem.id, "algs": [str(a) for a in algs], "params": _params_dict(p),
              "trials": len(starts), "radius": radius, "seed": seed, "max_iters": max_iters, "tol": tol}
    return ExperimentResult("degenerate", config, records, summary, time.perf_counter() - t0)

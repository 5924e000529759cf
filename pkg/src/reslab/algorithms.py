"""Discrete-time min-max algorithms as one-step maps ``z -> w_s(z)``.

=========  ==========================================================
TT_GDA     ``z - s L F(z)``
GEG        ``z - gamma s L F(z - s L F(z))``
TT_PPM     ``z+`` solving ``z+ + s L F(z+) = z``
DN         ``z - s (grad F(z))^-1 F(z)``
RDN        ``z - s (grad F(z) + phi I)^-1 F(z)``
JM         ``z + s grad F(z) F(z)``
=========  ==========================================================

with ``L = Lambda_tau``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _linalg
from .errors import DomainError, ImplicitSolveError, NumericsError, ReslabError, SingularJacobianError
from .fields import HyperParams, Objective, as_point, eval_F, eval_grad_F, hess_F_tensor
from .trajectory import (CONVERGED_GRAD, DIVERGED, MAX_ITERS, REACHED_TARGET, SOLVER_ERROR,
                         Trajectory)

__all__ = ["AlgorithmId", "StepOutcome", "StopRule", "StepMap", "step", "step_map", "iterate"]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 100
FIXED_POINT_ITERS = 500
FIXED_POINT_DAMPING = 0.5
# below this |F|, a singular Newton system is read as "already at a critical point"
CRITICAL_F_TOL = 1e-10


class AlgorithmId(str, enum.Enum):
    TT_GDA = "tt-gda"
    GEG = "geg"
    TT_PPM = "tt-ppm"
    DN = "dn"
    RDN = "rdn"
    JM = "jm"

    @classmethod
    def parse(cls, name) -> "AlgorithmId":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for alg in cls:
            if key in (alg.value, alg.value.replace("-", "")):
                return alg
        raise DomainError(f"unknown algorithm {name!r}; choose from {[a.value for a in cls]}")

    def __str__(self):
        return self.value


@dataclass
class StepOutcome:
    z_next: np.ndarray
    iterations: Optional[int] = None    # TT_PPM implicit solve
    residual: Optional[float] = None    # TT_PPM implicit solve, inf-norm
    condition: Optional[float] = None   # DN / RDN linear system


def _lam(obj, tau):
    return np.concatenate([np.full(obj.n, 1.0 / tau), np.ones(obj.m)])


def _ppm_tol(z, lamF, s):
    # 1e-12 absolute, tightened to relative when the iterate is small (else the
    # warm start z itself passes near z* and the iteration freezes), and never
    # below the residual's own roundoff floor
    scale = float(np.max(np.abs(z)) + s * np.max(np.abs(lamF)))
    return max(NEWTON_TOL * min(1.0, scale), 8 * np.finfo(float).eps * scale)


def _ppm_solve(obj, lam, s, z):
    d = z.size
    u = z.copy()
    lamF = lam * eval_F(obj, u)
    r = u + s * lamF - z
    tol = _ppm_tol(z, lamF, s)
    it = 0
    while np.max(np.abs(r)) > tol:
        if it >= NEWTON_MAX_ITERS:
            raise ImplicitSolveError(f"Newton did not converge in {NEWTON_MAX_ITERS} iterations, "
                                     f"residual {np.max(np.abs(r)):.3e}")
        J = np.eye(d) + s * lam[:, None] * eval_grad_F(obj, u)
        try:
            delta = _linalg.solve(J, -r)
        except SingularJacobianError:
            return _ppm_fixed_point(obj, lam, s, z, u, it)
        u = u + delta
        it += 1
        lamF = lam * eval_F(obj, u)
        r = u + s * lamF - z
        tol = _ppm_tol(z, lamF, s)
    return u, it, float(np.max(np.abs(r)))


def _ppm_fixed_point(obj, lam, s, z, u, it):
    for k in range(FIXED_POINT_ITERS):
        target = z - s * lam * eval_F(obj, u)
        u = (1 - FIXED_POINT_DAMPING) * u + FIXED_POINT_DAMPING * target
        lamF = lam * eval_F(obj, u)
        res = float(np.max(np.abs(u + s * lamF - z)))
        if res <= _ppm_tol(z, lamF, s):
            return u, it + k + 1, res
    raise ImplicitSolveError(f"fixed-point fallback did not converge, residual {res:.3e}")


def _newton_direction(A, F):
    try:
        lu = _linalg.LU(A)
    except SingularJacobianError:
        if np.max(np.abs(F)) <= CRITICAL_F_TOL:
            return np.zeros_like(F), np.inf
        raise
    return lu.solve(F), lu.condition


def step(alg, obj: Objective, p: HyperParams, z) -> StepOutcome:
    """Apply one iteration of ``alg`` to ``z``."""
    alg = AlgorithmId.parse(alg)
    z = as_point(z, obj.dim)
    lam = _lam(obj, p.tau)
    s = p.s
    out = StepOutcome(z)
    if alg is AlgorithmId.TT_GDA:
        out.z_next = z - s * lam * eval_F(obj, z)
    elif alg is AlgorithmId.GEG:
        z_half = z - s * lam * eval_F(obj, z)
        out.z_next = z - p.gamma * s * lam * eval_F(obj, z_half)
    elif alg is AlgorithmId.TT_PPM:
        out.z_next, out.iterations, out.residual = _ppm_solve(obj, lam, s, z)
    elif alg is AlgorithmId.DN:
        F = eval_F(obj, z)
        u, out.condition = _newton_direction(eval_grad_F(obj, z), F)
        out.z_next = z - s * u
    elif alg is AlgorithmId.RDN:
        F = eval_F(obj, z)
        A = eval_grad_F(obj, z) + p.phi * np.eye(obj.dim)
        u, out.condition = _newton_direction(A, F)
        out.z_next = z - s * u
    elif alg is AlgorithmId.JM:
        out.z_next = z + s * (eval_grad_F(obj, z) @ eval_F(obj, z))
    if not np.all(np.isfinite(out.z_next)):
        raise NumericsError(f"{alg} step produced a non-finite iterate")
    return out


def _step_jacobian(alg, obj, p, z):
    """Analytic Jacobian of the step map at ``z``."""
    d = obj.dim
    lam = _lam(obj, p.tau)
    s = p.s
    I = np.eye(d)
    A = eval_grad_F(obj, z)
    if alg is AlgorithmId.TT_GDA:
        return I - s * lam[:, None] * A
    if alg is AlgorithmId.GEG:
        z_half = z - s * lam * eval_F(obj, z)
        return I - p.gamma * s * lam[:, None] * eval_grad_F(obj, z_half) @ (I - s * lam[:, None] * A)
    if alg is AlgorithmId.TT_PPM:
        w = _ppm_solve(obj, lam, s, z)[0]
        return _linalg.solve(I + s * lam[:, None] * eval_grad_F(obj, w), I)
    F = eval_F(obj, z)
    T = hess_F_tensor(obj, z)
    if alg is AlgorithmId.JM:
        # d/dz [A F] v = (T v) F + A A v
        return I + s * (np.einsum("ijk,j->ik", T, F) + A @ A)
    B = A if alg is AlgorithmId.DN else A + p.phi * I
    lu = _linalg.LU(B)
    u = lu.solve(F)
    # d/dz [B^-1 F] v = B^-1 A v - B^-1 (T v) u
    return I - s * (lu.solve(A) - lu.solve(np.einsum("ijk,j->ik", T, u)))


@dataclass
class StepMap:
    """The map ``z -> w_s(z)`` with analytic Jacobian access."""

    alg: AlgorithmId
    obj: Objective
    params: HyperParams
    kind: str = "discrete"

    def __call__(self, z) -> np.ndarray:
        return step(self.alg, self.obj, self.params, z).z_next

    def jac(self, z) -> np.ndarray:
        return _step_jacobian(self.alg, self.obj, self.params, as_point(z, self.obj.dim))

    @property
    def dim(self):
        return self.obj.dim


def step_map(alg, obj: Objective, p: HyperParams) -> StepMap:
    return StepMap(AlgorithmId.parse(alg), obj, p)


@dataclass
class StopRule:
    """Termination criteria for :func:`iterate`.

    ``target_set_distance`` maps a point to its distance from a target set;
    the run stops with ``reached_target`` once it is ``<= target_set_tol``.
    """

    max_iters: int
    tol_F: Optional[float] = None
    target: Optional[np.ndarray] = None
    target_radius: Optional[float] = None
    target_set_distance: Optional[Callable[[np.ndarray], float]] = None
    target_set_tol: float = 0.0
    divergence_radius: float = 1e6
    stride: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.stride < 1:
            raise DomainError("stride must be >= 1")
        if (self.target is None) != (self.target_radius is None):
            raise DomainError("target and target_radius go together")


def _stop_reason(obj, rule, z):
    if rule.tol_F is not None and np.max(np.abs(eval_F(obj, z))) <= rule.tol_F:
        return CONVERGED_GRAD
    if rule.target is not None and np.linalg.norm(z - rule.target) <= rule.target_radius:
        return REACHED_TARGET
    if rule.target_set_distance is not None and rule.target_set_distance(z) <= rule.target_set_tol:
        return REACHED_TARGET
    if np.max(np.abs(z)) > rule.divergence_radius:
        return DIVERGED
    return None


def iterate(alg, obj: Objective, p: HyperParams, z0, stop: StopRule) -> Trajectory:
    """Run ``alg`` from ``z0`` until a stop criterion fires.

    Step errors do not propagate: the run ends with ``solver_error`` and the
    failing iteration index is recorded.
    """
    alg = AlgorithmId.parse(alg)
    z = as_point(z0, obj.dim)
    if stop.target is not None:
        stop.target = as_point(stop.target, obj.dim)
    stamps, states = [0], [z]
    reason, failed, err = _stop_reason(obj, stop, z), None, None
    k = 0
    while reason is None:
        if k >= stop.max_iters:
            reason = MAX_ITERS
            break
        try:
            z = step(alg, obj, p, z).z_next
        except ReslabError as exc:
            reason, failed, err = SOLVER_ERROR, k, f"{type(exc).__name__}: {exc}"
            break
        k += 1
        reason = _stop_reason(obj, stop, z)
        if k % stop.stride == 0 or reason is not None:
            stamps.append(k)
            states.append(z)
    if stamps[-1] != k:
        stamps.append(k)
        states.append(z)
    return Trajectory(np.asarray(stamps), np.asarray(states), reason, failed, err, steps=k)

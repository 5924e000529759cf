"""O(1)- and O(s)-resolution vector fields, a fixed-step RK4 integrator and
the one-step consistency checker.

With ``L = Lambda_tau`` and ``A = grad F``, ``T[u] = (grad^2 F)[u]``:

=======  ==============================  ====================================================
alg      O(1) field                      O(s) field
=======  ==============================  ====================================================
TT_GDA   ``-L F``                        ``-(I + s/2 L A) L F``
GEG      ``-gamma L F``                  ``(-I + (1 - gamma/2) s L A) gamma L F``
TT_PPM   ``-L F``                        ``(-I + s/2 L A) L F``
DN       ``-u``, ``u = A^-1 F``          ``(-1 - s/2) u + s/2 A^-1 T[u] u``
RDN      ``-u``, ``u = (A+phi)^-1 F``    ``-u - s/2 ((A+phi)^-1 A u - (A+phi)^-1 T[u] u)``
JM       ``A F``                         (not supported)
=======  ==============================  ====================================================
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _linalg
from .algorithms import AlgorithmId, step
from .errors import DomainError, NumericsError, SingularJacobianError, UnsupportedError
from .fields import (HyperParams, Objective, as_point, eval_F, eval_grad_F, eval_hess_F_dir,
                     hess_F_tensor)
from .trajectory import COMPLETED, Trajectory

__all__ = ["ResolutionOrder", "VectorField", "resolution_field", "rk4_integrate",
           "ConsistencyResult", "consistency_exponent"]


class ResolutionOrder(str, enum.Enum):
    O1 = "o1"
    Os = "os"

    @classmethod
    def parse(cls, name) -> "ResolutionOrder":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"o1": cls.O1, "o(1)": cls.O1, "1": cls.O1, "os": cls.Os, "o(s)": cls.Os, "s": cls.Os}
        if key not in aliases:
            raise DomainError(f"unknown resolution order {name!r}")
        return aliases[key]

    def __str__(self):
        return self.value


def _fd_jacobian(fun, z, h=None):
    z = np.asarray(z, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + float(np.max(np.abs(z))))
    d = z.size
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (fun(z + e) - fun(z - e)) / (2 * h)
    return J


@dataclass
class VectorField:
    """Continuous dynamics ``z' = W(z)``.

    ``analytic_jac`` may raise :class:`SingularJacobianError` where its closed
    form breaks down; :meth:`jac` then falls back to finite differences.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    dim: int
    alg: Optional[AlgorithmId] = None
    order: Optional[ResolutionOrder] = None
    params: Optional[HyperParams] = None
    analytic_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "continuous"

    def __call__(self, z):
        return self.eval(z)

    def jac(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        if self.analytic_jac is not None:
            try:
                return self.analytic_jac(z)
            except SingularJacobianError:
                pass
        return self.fd_jac(z)

    def fd_jac(self, z) -> np.ndarray:
        return _fd_jacobian(self.eval, as_point(z, self.dim))


def _contract(T, w):
    """Matrix ``M`` with ``M v = T[v] w``."""
    return np.einsum("ijk,j->ik", T, w)


def resolution_field(alg, order, obj: Objective, p: HyperParams) -> VectorField:
    """Closed-form resolution ODE of ``alg`` with the hyperparameters baked in."""
    alg = AlgorithmId.parse(alg)
    order = ResolutionOrder.parse(order)
    d = obj.dim
    lam = np.concatenate([np.full(obj.n, 1.0 / p.tau), np.ones(obj.m)])
    s, gamma, phi = p.s, p.gamma, p.phi
    I = np.eye(d)
    os_ = order is ResolutionOrder.Os

    if alg is AlgorithmId.JM and os_:
        raise UnsupportedError("the Jacobian method has only an O(1)-resolution field")

    if alg in (AlgorithmId.TT_GDA, AlgorithmId.GEG, AlgorithmId.TT_PPM):
        # all three share the form  c0 L F + s c1 L A L F
        c0 = -gamma if alg is AlgorithmId.GEG else -1.0
        if not os_:
            c1 = 0.0
        elif alg is AlgorithmId.TT_GDA:
            c1 = -0.5
        elif alg is AlgorithmId.GEG:
            c1 = gamma * (1.0 - gamma / 2.0)
        else:
            c1 = 0.5

        def field(z):
            lF = lam * eval_F(obj, z)
            if c1 == 0.0:
                return c0 * lF
            return c0 * lF + s * c1 * lam * (eval_grad_F(obj, z) @ lF)

        def jac(z):
            A = eval_grad_F(obj, z)
            LA = lam[:, None] * A
            if c1 == 0.0:
                return c0 * LA
            lF = lam * eval_F(obj, z)
            T = hess_F_tensor(obj, z)
            return c0 * LA + s * c1 * lam[:, None] * (_contract(T, lF) + A @ LA)

    elif alg is AlgorithmId.JM:
        def field(z):
            return eval_grad_F(obj, z) @ eval_F(obj, z)

        def jac(z):
            A = eval_grad_F(obj, z)
            return _contract(hess_F_tensor(obj, z), eval_F(obj, z)) + A @ A

    else:  # DN / RDN
        shift = 0.0 if alg is AlgorithmId.DN else phi

        def field(z):
            F = eval_F(obj, z)
            A = eval_grad_F(obj, z)
            B = A + shift * I
            u = _linalg.solve_removable(B, F)
            if not os_:
                return -u
            Tu_u = eval_hess_F_dir(obj, z, u) @ u
            if alg is AlgorithmId.DN:
                # grouped so that u is formed once: (-1 - s/2) u + s/2 A^-1 T[u] u
                return (-1.0 - s / 2.0) * u + (s / 2.0) * _linalg.solve_removable(B, Tu_u)
            return -u - (s / 2.0) * (_linalg.solve_removable(B, A @ u) - _linalg.solve_removable(B, Tu_u))

        def jac(z):
            F = eval_F(obj, z)
            B = eval_grad_F(obj, z) + shift * I
            lu = _linalg.LU(B)
            u = lu.solve(F)
            # d/dz [-B^-1 F] v = B^-1 T[v] u - B^-1 A v
            return lu.solve(_contract(hess_F_tensor(obj, z), u)) - lu.solve(B - shift * I)

        if os_:
            jac = None

    def checked(z):
        out = field(as_point(z, d))
        if not np.all(np.isfinite(out)):
            raise NumericsError(f"non-finite {alg} {order} field value")
        return out

    return VectorField(checked, d, alg, order, p, jac)


def rk4_integrate(field, z0, t_end: float, dt: float, stride: int = 1,
                  record: bool = True) -> Trajectory:
    """Classical fixed-step RK4 from ``t=0`` to ``t_end``.

    Takes ``floor(t_end/dt)`` full steps, then one shortened step so the last
    state sits exactly at ``t_end``. ``field`` is a :class:`VectorField` or a
    plain callable.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not t_end >= dt:
        raise DomainError("t_end must be at least dt")
    f = field.eval if isinstance(field, VectorField) else field
    z = as_point(z0)
    n_full = int(math.floor(t_end / dt * (1 + 1e-12)))
    rem = t_end - n_full * dt
    if rem < 1e-12 * dt:
        rem = 0.0
    steps = [(dt, (k + 1) * dt) for k in range(n_full)]
    if rem > 0:
        steps.append((rem, t_end))
    else:
        steps[-1] = (steps[-1][0], t_end)
    stamps, states = [0.0], [z]
    for i, (h, t_next) in enumerate(steps):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise NumericsError(f"non-finite state at t={t_next:.6g}")
        last = i == len(steps) - 1
        if record and ((i + 1) % stride == 0 or last):
            stamps.append(t_next)
            states.append(z)
    if not record:
        stamps.append(t_end)
        states.append(z)
    return Trajectory(np.asarray(stamps), np.asarray(states), COMPLETED, steps=len(steps))


@dataclass
class ConsistencyResult:
    s_grid: np.ndarray
    errors: np.ndarray
    slope: Optional[float]   # None when indeterminate
    intercept: Optional[float]
    used: np.ndarray         # mask of grid points kept in the fit

    @property
    def indeterminate(self) -> bool:
        return self.slope is None


ROUNDOFF_FLOOR = 1e-13
INNER_STEPS = 64


def consistency_exponent(alg, order, obj: Objective, p_base: HyperParams, z0,
                         s_grid) -> ConsistencyResult:
    """Fit the order of the one-step gap ``|Z(s; z0) - w_s(z0)|`` in ``s``.

    For each ``s`` the resolution field (built with that ``s``) is integrated
    to time ``s`` with RK4 at ``dt = s/64`` and compared to one DTA step.
    Errors under the roundoff floor are left out of the log-log fit.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size < 4 or np.any(s_grid <= 0):
        raise DomainError("need at least four positive step sizes")
    z0 = as_point(z0, obj.dim)
    errors = np.empty_like(s_grid)
    for i, s in enumerate(s_grid):
        p = p_base.replace(s=float(s))
        W = resolution_field(alg, order, obj, p)
        Z = rk4_integrate(W, z0, float(s), float(s) / INNER_STEPS, record=False).final
        errors[i] = np.linalg.norm(Z - step(alg, obj, p, z0).z_next)
    used = errors > ROUNDOFF_FLOOR
    if used.sum() < 2:
        return ConsistencyResult(s_grid, errors, None, None, used)
    slope, icpt = np.polyfit(np.log(s_grid[used]), np.log(errors[used]), 1)
    return ConsistencyResult(s_grid, errors, float(slope), float(icpt), used)

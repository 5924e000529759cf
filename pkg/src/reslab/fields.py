"""Objective container and the signed-gradient operators built from it.

For ``f(x, y)`` with ``x`` in R^n (minimised) and ``y`` in R^m (maximised)
this module evaluates

* ``F(z) = [grad_x f; -grad_y f]``,
* ``H(z) = diag(-I_n, I_m) hess f(z)``, so that ``grad F = -H``,
* ``Lambda_tau = diag(I_n / tau, I_m)``,
* the directional derivative of ``z -> grad F(z)`` along a vector ``v``.

Every derivative has an analytic path (when the objective supplies it) and a
central finite-difference fallback.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, NumericsError

__all__ = [
    "Objective",
    "HyperParams",
    "as_point",
    "eval_F",
    "eval_H",
    "eval_grad_F",
    "eval_hess_F_dir",
    "hess_F_tensor",
    "eval_grad",
    "eval_hess",
    "lambda_tau",
    "lipschitz",
    "estimate_lipschitz",
    "derivative_mismatch",
]


@dataclass(frozen=True)
class Objective:
    """A smooth min-max objective ``f: R^(n+m) -> R``.

    ``grad``, ``hess`` and ``third_dir`` are optional analytic derivatives;
    ``third_dir(z, v)`` returns the derivative of the Hessian of ``f`` along
    ``v`` as an ``(n+m, n+m)`` matrix.
    """

    n: int
    m: int
    value: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    third_dir: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    lipschitz_L: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.lipschitz_L is not None and not self.lipschitz_L > 0:
            raise DomainError("lipschitz_L must be positive")

    @property
    def dim(self) -> int:
        return self.n + self.m

    def scaled(self, c: float) -> "Objective":
        """Return the objective ``c * f`` (``c > 0``)."""
        if not c > 0:
            raise DomainError("scale must be positive")
        grad = hess = third = None
        if self.grad is not None:
            grad = lambda z, g=self.grad: c * g(z)
        if self.hess is not None:
            hess = lambda z, h=self.hess: c * h(z)
        if self.third_dir is not None:
            third = lambda z, v, t=self.third_dir: c * t(z, v)
        L = None if self.lipschitz_L is None else c * self.lipschitz_L
        return Objective(self.n, self.m, lambda z, f=self.value: c * f(z), grad, hess, third, L,
                         name=f"{c:g}*{self.name}" if self.name else "")


@dataclass(frozen=True)
class HyperParams:
    """Step size ``s``, timescale ratio ``tau``, GEG ratio ``gamma``, RDN regulariser ``phi``."""

    s: float
    tau: float = 1.0
    gamma: float = 1.0
    phi: float = 1.0

    def __post_init__(self):
        for name in ("s", "tau", "gamma", "phi"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise DomainError(f"hyperparameter {name} must be a positive finite number, got {val!r}")

    def replace(self, **changes) -> "HyperParams":
        fields = dict(s=self.s, tau=self.tau, gamma=self.gamma, phi=self.phi)
        fields.update(changes)
        return HyperParams(**fields)


def as_point(z, dim: int | None = None) -> np.ndarray:
    """Validate ``z`` as a finite float vector (of length ``dim`` if given)."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite point {arr}")
    return arr


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite {what}")
    return arr


def _grad_step(z):
    return max(1e-6, 1e-6 * float(np.max(np.abs(z))))


def _hess_step(z):
    return max(1e-4, 1e-4 * float(np.max(np.abs(z))))


def _fd_grad(value, z):
    h = _grad_step(z)
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (value(z + e) - value(z - e)) / (2 * h)
    return g


def eval_grad(obj: Objective, z) -> np.ndarray:
    """Gradient of ``f``; analytic when available, else central differences."""
    z = as_point(z, obj.dim)
    if obj.grad is not None:
        g = np.asarray(obj.grad(z), dtype=float)
    else:
        g = _fd_grad(obj.value, z)
    return _check_finite(g, "gradient")


def eval_hess(obj: Objective, z) -> np.ndarray:
    """Hessian of ``f``; finite differences of the gradient when not analytic."""
    z = as_point(z, obj.dim)
    if obj.hess is not None:
        return _check_finite(np.asarray(obj.hess(z), dtype=float), "Hessian")
    d = z.size
    h = _hess_step(z)
    out = np.empty((d, d))
    if obj.grad is not None:
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            out[:, j] = (np.asarray(obj.grad(z + e)) - np.asarray(obj.grad(z - e))) / (2 * h)
    else:
        f = obj.value
        f0 = f(z)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h
            out[i, i] = (f(z + ei) - 2 * f0 + f(z - ei)) / h**2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = h
                out[i, j] = (f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)) / (4 * h * h)
    out = 0.5 * (out + out.T)
    return _check_finite(out, "Hessian")


def _sign_blocks(n, m):
    return np.concatenate([-np.ones(n), np.ones(m)])


def eval_F(obj: Objective, z) -> np.ndarray:
    """``F(z) = [grad_x f(z); -grad_y f(z)]``."""
    g = eval_grad(obj, z)
    return -_sign_blocks(obj.n, obj.m) * g


def eval_H(obj: Objective, z) -> np.ndarray:
    """Signed Hessian ``H(z) = diag(-I_n, I_m) hess f(z)``."""
    return _sign_blocks(obj.n, obj.m)[:, None] * eval_hess(obj, z)


def eval_grad_F(obj: Objective, z) -> np.ndarray:
    """Jacobian of ``F``, identical to ``-eval_H``."""
    return -eval_H(obj, z)


def eval_hess_F_dir(obj: Objective, z, v) -> np.ndarray:
    """Directional derivative of ``z -> grad F(z)`` along ``v``."""
    z = as_point(z, obj.dim)
    v = as_point(v, obj.dim)
    if obj.third_dir is not None:
        t = np.asarray(obj.third_dir(z, v), dtype=float)
        return _check_finite(-_sign_blocks(obj.n, obj.m)[:, None] * t, "third derivative")
    vmax = float(np.max(np.abs(v)))
    if vmax == 0.0:
        return np.zeros((obj.dim, obj.dim))
    # step measured along the unit-max direction keeps the stencil scale-free in v
    h = _hess_step(z) / vmax
    return (eval_grad_F(obj, z + h * v) - eval_grad_F(obj, z - h * v)) / (2 * h)


def hess_F_tensor(obj: Objective, z) -> np.ndarray:
    """Third-order tensor ``T`` with ``T[:, :, k] = eval_hess_F_dir(z, e_k)``."""
    d = obj.dim
    T = np.empty((d, d, d))
    eye = np.eye(d)
    for k in range(d):
        T[:, :, k] = eval_hess_F_dir(obj, z, eye[k])
    return T


def lambda_tau(n: int, m: int, tau: float) -> np.ndarray:
    """Timescale matrix ``diag(I_n / tau, I_m)``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return np.diag(np.concatenate([np.full(n, 1.0 / tau), np.ones(m)]))


def estimate_lipschitz(obj: Objective, box, samples: int = 1000, seed: int = 0) -> float:
    """Largest spectral norm of the Hessian over uniform samples in ``box``.

    ``box`` is ``(lo, hi)`` with scalars or per-coordinate arrays.
    """
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (obj.dim,)) for b in box)
    rng = np.random.Generator(np.random.Philox(seed))
    pts = lo + (hi - lo) * rng.random((samples, obj.dim))
    return max(float(np.linalg.norm(eval_hess(obj, p), 2)) for p in pts)


def lipschitz(obj: Objective, box=None, samples: int = 1000, seed: int = 0) -> tuple[float, bool]:
    """Return ``(L, estimated)``, sampling the Hessian when ``L`` is not supplied."""
    if obj.lipschitz_L is not None:
        return float(obj.lipschitz_L), False
    if box is None:
        box = (-1.0, 1.0)
    return estimate_lipschitz(obj, box, samples=samples, seed=seed), True


def derivative_mismatch(obj: Objective, z) -> dict:
    """Relative gaps between analytic derivatives and their finite-difference versions.

    Keys are present only for the derivatives the objective supplies.
    """
    z = as_point(z, obj.dim)
    out = {}
    bare = Objective(obj.n, obj.m, obj.value)
    if obj.grad is not None:
        g = eval_grad(obj, z)
        gf = eval_grad(bare, z)
        out["grad"] = float(np.max(np.abs(g - gf)) / max(1.0, np.max(np.abs(g))))
    if obj.hess is not None:
        H = eval_hess(obj, z)
        Hf = eval_hess(Objective(obj.n, obj.m, obj.value, grad=obj.grad), z)
        out["hess"] = float(np.max(np.abs(H - Hf)) / max(1.0, np.max(np.abs(H))))
        out["hess_asym"] = float(np.max(np.abs(H - H.T)))
    return out

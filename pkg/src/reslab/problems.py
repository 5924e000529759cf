"""Builtin benchmark objectives and a seeded random quadratic saddle generator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, NotFoundError
from .fields import Objective

__all__ = ["ProblemSpec", "SpectrumSpec", "builtin", "random_quadratic", "BUILTIN_IDS",
           "chi", "psi", "COMPACT_R", "COMPACT_EPS"]

COMPACT_R = 1.0
COMPACT_EPS = 0.2


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    objective: Objective
    known_saddles: list = field(default_factory=list)
    known_equilibria: list = field(default_factory=list)
    known_invariant_set: Optional[tuple] = None   # (center, radius)
    box: tuple = (-1.0, 1.0)                      # sampling box for estimates
    notes: str = ""


def _quadratic(Q, n, m, name, L=None):
    Q = np.asarray(Q, dtype=float)
    zero3 = np.zeros_like(Q)
    return Objective(
        n, m,
        value=lambda z: 0.5 * float(z @ Q @ z),
        grad=lambda z: Q @ z,
        hess=lambda z: Q,
        third_dir=lambda z, v: zero3,
        lipschitz_L=float(np.linalg.norm(Q, 2)) if L is None else L,
        name=name,
    )


def _x2y4():
    return Objective(
        1, 1,
        value=lambda z: z[0] ** 2 - z[1] ** 4,
        grad=lambda z: np.array([2 * z[0], -4 * z[1] ** 3]),
        hess=lambda z: np.array([[2.0, 0.0], [0.0, -12 * z[1] ** 2]]),
        third_dir=lambda z, v: np.array([[0.0, 0.0], [0.0, -24 * z[1] * v[1]]]),
        name="x2y4",
    )


def _x4y4():
    return Objective(
        1, 1,
        value=lambda z: z[0] ** 4 - z[1] ** 4,
        grad=lambda z: np.array([4 * z[0] ** 3, -4 * z[1] ** 3]),
        hess=lambda z: np.diag([12 * z[0] ** 2, -12 * z[1] ** 2]),
        third_dir=lambda z, v: np.diag([24 * z[0] * v[0], -24 * z[1] * v[1]]),
        name="x4y4",
    )


def psi(p):
    return 3 * p**2 - 2 * p**3


def chi(r, R=COMPACT_R, eps=COMPACT_EPS):
    """Smoothstep blend: 0 on ``[0, R]``, 1 on ``[R+eps, inf)``."""
    if r <= R:
        return 0.0
    if r >= R + eps:
        return 1.0
    return psi((r - R) / eps)


def _chi_derivs(r, R=COMPACT_R, eps=COMPACT_EPS):
    """``(chi, chi', chi'')`` with respect to ``r``."""
    if r <= R:
        return 0.0, 0.0, 0.0
    if r >= R + eps:
        return 1.0, 0.0, 0.0
    p = (r - R) / eps
    return psi(p), (6 * p - 6 * p**2) / eps, (6 - 12 * p) / eps**2


def _compact_attractor():
    S = np.diag([1.0, -1.0])

    def value(z):
        return chi(float(np.hypot(z[0], z[1]))) * (z[0] ** 2 - z[1] ** 2)

    def grad(z):
        r = float(np.hypot(z[0], z[1]))
        c, c1, _ = _chi_derivs(r)
        g = z[0] ** 2 - z[1] ** 2
        out = 2 * c * (S @ z)
        if c1:
            out = out + c1 * g * z / r
        return out

    def hess(z):
        r = float(np.hypot(z[0], z[1]))
        c, c1, c2 = _chi_derivs(r)
        if c == 0.0 and c1 == 0.0:
            return np.zeros((2, 2))
        g = z[0] ** 2 - z[1] ** 2
        dg = 2 * (S @ z)
        out = 2 * c * S
        if c1 or c2:
            e = z / r
            out = out + (c2 * g) * np.outer(e, e) + (c1 * g / r) * (np.eye(2) - np.outer(e, e))
            out = out + c1 * (np.outer(e, dg) + np.outer(dg, e))
        return out

    # third derivative left to finite differences
    return Objective(1, 1, value, grad, hess, None, None, name="compact_attractor")


BUILTIN_IDS = ("bilinear", "quad_saddle", "compact_attractor", "x2y4", "x4y4", "antisaddle")


def builtin(id: str) -> ProblemSpec:
    """Look up a builtin problem by id."""
    origin = np.zeros(2)
    if id == "bilinear":
        obj = _quadratic([[0.0, 1.0], [1.0, 0.0]], 1, 1, "bilinear", L=1.0)
        return ProblemSpec(id, obj, [origin], [origin], notes="f = x*y; purely imaginary spectrum of H")
    if id == "quad_saddle":
        obj = _quadratic(np.diag([2.0, -2.0]), 1, 1, "quad_saddle", L=2.0)
        return ProblemSpec(id, obj, [origin], [origin], notes="f = x^2 - y^2")
    if id == "antisaddle":
        obj = _quadratic(np.diag([-2.0, 2.0]), 1, 1, "antisaddle", L=2.0)
        return ProblemSpec(id, obj, [], [origin], notes="f = -x^2 + y^2; origin is an unstable equilibrium")
    if id == "x2y4":
        return ProblemSpec(id, _x2y4(), [origin], [origin], box=(-1.0, 1.0),
                           notes="f = x^2 - y^4; Hessian singular at the saddle")
    if id == "x4y4":
        return ProblemSpec(id, _x4y4(), [origin], [origin], box=(-1.0, 1.0),
                           notes="f = x^4 - y^4; Hessian vanishes at the saddle")
    if id == "compact_attractor":
        return ProblemSpec(id, _compact_attractor(), [origin], [origin],
                           known_invariant_set=(origin, COMPACT_R), box=(-2.0, 2.0),
                           notes="f = chi(r)(x^2 - y^2), R=1, eps=0.2; every point of the unit ball "
                                 "is a boundary saddle; third derivative by finite differences")
    raise NotFoundError(f"unknown builtin problem {id!r}; choose from {list(BUILTIN_IDS)}")


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalue ranges of the diagonal Hessian blocks and the coupling size.

    ``xx`` must lie in ``(0, inf)``, ``yy`` in ``(-inf, 0)``; ``coupling`` is
    the Frobenius-norm radius of the cross block ``hess_xy``.
    """

    xx: tuple = (1.0, 2.0)
    yy: tuple = (-2.0, -1.0)
    coupling: float = 1.0


MAX_Q_NORM = 10.0


def _random_orthogonal(rng, k):
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def random_quadratic(n: int, m: int, seed: int, spectrum: SpectrumSpec = SpectrumSpec()) -> ProblemSpec:
    """Random ``f = z^T Q z / 2`` whose unique (strict) saddle is the origin."""
    lo_x, hi_x = spectrum.xx
    lo_y, hi_y = spectrum.yy
    if not (0 < lo_x <= hi_x) or not (lo_y <= hi_y < 0):
        raise DomainError(f"infeasible block spectra xx={spectrum.xx}, yy={spectrum.yy}")
    if spectrum.coupling < 0:
        raise DomainError("coupling must be nonnegative")
    if max(hi_x, -lo_y) > MAX_Q_NORM:
        raise DomainError(f"block spectra exceed ||Q|| <= {MAX_Q_NORM}")
    if n < 1 or m < 1:
        raise DomainError("need n, m >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    U = _random_orthogonal(rng, n)
    V = _random_orthogonal(rng, m)
    Axx = U @ np.diag(rng.uniform(lo_x, hi_x, n)) @ U.T
    Ayy = V @ np.diag(rng.uniform(lo_y, hi_y, m)) @ V.T
    # uniform in the Frobenius ball of radius `coupling`
    direction = rng.standard_normal((n, m))
    direction /= np.linalg.norm(direction)
    B = spectrum.coupling * rng.random() ** (1.0 / (n * m)) * direction
    Q = np.block([[Axx, B], [B.T, Ayy]])
    while np.linalg.norm(Q, 2) > MAX_Q_NORM:
        B *= 0.9
        Q = np.block([[Axx, B], [B.T, Ayy]])
    Q = 0.5 * (Q + Q.T)
    origin = np.zeros(n + m)
    obj = _quadratic(Q, n, m, f"random_quadratic(n={n},m={m},seed={seed})")
    return ProblemSpec(obj.name, obj, [origin], [origin], box=(-1.0, 1.0),
                       notes=f"seeded random quadratic; coupling radius {spectrum.coupling}")

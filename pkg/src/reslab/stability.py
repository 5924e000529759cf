"""Spectral classification of equilibria, saddle-point predicates and the
hyperparameter bounds attached to each algorithm."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algorithms import AlgorithmId
from .eigen import eigs
from .errors import NotAnEquilibriumError, SingularJacobianError
from .fields import (HyperParams, Objective, as_point, eval_F, eval_grad, eval_H, eval_hess,
                     hess_F_tensor, lambda_tau, lipschitz)

__all__ = [
    "Verdict", "Kind", "SpectrumReport", "classify_equilibrium", "jacobian_at",
    "SaddleCheck", "is_saddle", "lemma_negeig_check", "BoundsReport", "step_bounds", "eigs",
]

EQUILIBRIUM_TOL = 1e-8


class Verdict(str, enum.Enum):
    EXP_STABLE = "ExpStable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"

    @classmethod
    def parse(cls, kind) -> "Kind":
        return kind if isinstance(kind, cls) else cls(str(kind).lower())

    def __str__(self):
        return self.value


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    verdict: Verdict
    margin: float
    kind: Kind
    tol: float

    def to_dict(self):
        return {
            "kind": str(self.kind),
            "verdict": str(self.verdict),
            "margin": self.margin,
            "eigenvalues": [[float(l.real), float(l.imag)] for l in self.eigenvalues],
        }


def classify_equilibrium(kind, J) -> SpectrumReport:
    """Linearised stability verdict from the spectrum of ``J``.

    Continuous: compares ``max Re`` with 0; discrete: ``max |lambda|`` with 1.
    Inside ``1e-9 * (1 + ||J||)`` of the boundary the verdict is Inconclusive.
    """
    kind = Kind.parse(kind)
    J = np.asarray(J, dtype=float)
    lam = eigs(J)
    tol = 1e-9 * (1.0 + float(np.linalg.norm(J, 2)))
    if kind is Kind.CONTINUOUS:
        margin = -float(np.max(lam.real))
    else:
        margin = 1.0 - float(np.max(np.abs(lam)))
    if margin > tol:
        verdict = Verdict.EXP_STABLE
    elif margin < -tol:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.INCONCLUSIVE
    return SpectrumReport(lam, verdict, margin, kind, tol)


def jacobian_at(target, z, check: bool = True) -> np.ndarray:
    """Jacobian of a step map or vector field at an equilibrium ``z``.

    ``target`` is an object with ``kind`` ("discrete" for maps, "continuous"
    for fields) and optionally ``jac``; bare callables are treated as maps.
    Raises :class:`NotAnEquilibriumError` if the map residual ``w(z) - z``
    (field value ``W(z)``) exceeds ``1e-8`` in the inf-norm.
    """
    z = as_point(z)
    kind = Kind.parse(getattr(target, "kind", Kind.DISCRETE))
    if check:
        out = np.asarray(target(z), dtype=float)
        resid = out - z if kind is Kind.DISCRETE else out
        r = float(np.max(np.abs(resid)))
        if r > EQUILIBRIUM_TOL:
            raise NotAnEquilibriumError(f"residual {r:.3e} at {z}; not an equilibrium")
    jac = getattr(target, "jac", None)
    if jac is not None:
        try:
            return np.asarray(jac(z), dtype=float)
        except SingularJacobianError:
            pass
    h = 1e-6 * (1.0 + float(np.max(np.abs(z))))
    d = z.size
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (np.asarray(target(z + e)) - np.asarray(target(z - e))) / (2 * h)
    return J


@dataclass
class SaddleCheck:
    verdict: str            # "yes" | "no" | "boundary"
    grad_norm: float
    min_eig_xx: float
    max_eig_yy: float
    eps: float

    def __bool__(self):
        return self.verdict in ("yes", "boundary")


def is_saddle(obj: Objective, z) -> SaddleCheck:
    """Second-order saddle test: critical point, ``hess_xx > 0``, ``hess_yy < 0``.

    ``boundary`` means only the semidefinite (necessary) conditions hold.
    """
    z = as_point(z, obj.dim)
    g = float(np.max(np.abs(eval_grad(obj, z))))
    Hf = eval_hess(obj, z)
    n = obj.n
    eps = 1e-8 * (1.0 + float(np.linalg.norm(Hf, 2)))
    lo = float(np.min(np.linalg.eigvalsh(Hf[:n, :n])))
    hi = float(np.max(np.linalg.eigvalsh(Hf[n:, n:])))
    if g > 1e-8:
        verdict = "no"
    elif lo > eps and hi < -eps:
        verdict = "yes"
    elif lo >= -eps and hi <= eps:
        verdict = "boundary"
    else:
        verdict = "no"
    return SaddleCheck(verdict, g, lo, hi, eps)


def lemma_negeig_check(obj: Objective, z, tau: float) -> tuple[bool, float]:
    """Whether every eigenvalue of ``Lambda_tau H(z)`` has real part ``<= 0``.

    Returns ``(passed, max Re)``; the comparison allows ``1e-9 (1 + ||J||)``.
    """
    J = lambda_tau(obj.n, obj.m, tau) @ eval_H(obj, z)
    lam = eigs(J)
    max_re = float(np.max(lam.real))
    tol = 1e-9 * (1.0 + float(np.linalg.norm(J, 2)))
    return max_re <= tol, max_re


@dataclass
class BoundsReport:
    algorithm: AlgorithmId
    s_max: Optional[float]                      # stability bound on s (may be inf)
    escape_s_max: Optional[float] = None        # local-diffeomorphism bound for escape results
    gamma_range: Optional[tuple] = None
    phi_min: Optional[float] = None
    M: Optional[float] = None
    L: float = float("nan")
    provenance: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    spectrum: list = field(default_factory=list)
    jm_condition: Optional[list] = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        def num(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else float(x)
        return {
            "algorithm": str(self.algorithm),
            "s_max": num(self.s_max),
            "escape_s_max": num(self.escape_s_max),
            "gamma_range": list(self.gamma_range) if self.gamma_range else None,
            "phi_min": num(self.phi_min),
            "M": num(self.M),
            "L": float(self.L),
            "provenance": dict(self.provenance),
            "flags": dict(self.flags),
            "jm_condition": self.jm_condition,
            "notes": list(self.notes),
        }


def _box_sup(obj, box, samples=10_000, seed=0):
    """Sampled sup of ``|F|`` and of the Frobenius norm of ``grad^2 F`` over ``box``."""
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (obj.dim,)) for b in box)
    rng = np.random.Generator(np.random.Philox(seed))
    pts = lo + (hi - lo) * rng.random((samples, obj.dim))
    sup_F = sup_T = 0.0
    for p in pts:
        sup_F = max(sup_F, float(np.linalg.norm(eval_F(obj, p))))
        sup_T = max(sup_T, float(np.linalg.norm(hess_F_tensor(obj, p))))
    return sup_F, sup_T


def step_bounds(alg, obj: Objective, z_star, p: HyperParams, box=None, L: Optional[float] = None,
                box_samples: int = 10_000, seed: int = 0) -> BoundsReport:
    """Every explicit bound on the hyperparameters of ``alg`` at the saddle ``z_star``.

    ``box`` (``(lo, hi)``) is used to estimate ``L`` when the objective has
    none, and to take the sampled suprema the Newton-type escape bounds need.
    """
    alg = AlgorithmId.parse(alg)
    z_star = as_point(z_star, obj.dim)
    tau = p.tau
    if L is None:
        L, L_est = lipschitz(obj, box=box)
    else:
        L_est = False
    H = eval_H(obj, z_star)
    LH = lambda_tau(obj.n, obj.m, tau) @ H
    tol = 1e-9 * (1.0 + float(np.linalg.norm(H, 2)))
    sig = eigs(H) if alg in (AlgorithmId.RDN, AlgorithmId.JM) else eigs(LH)
    re = sig.real
    nonzero = np.abs(re) > tol
    rep = BoundsReport(alg, None, L=L)
    rep.spectrum = [[float(l.real), float(l.imag)] for l in sig]
    rep.flags = {
        "hessian_invertible_at_z_star": bool(np.min(np.abs(eigs(eval_hess(obj, z_star)))) > tol),
        "re_nonzero": bool(np.all(nonzero)),
        "L_estimated": bool(L_est),
    }
    Lsq = max(L * L, L * L / tau**2)
    escape_gd = min(1.0, tau) / L
    max_re = float(np.max(re))
    rep.notes.append(f"max Re = {max_re:.6g}, max |Re| = {float(np.max(np.abs(re))):.6g}")

    def geg_M():
        if max_re < -tol:
            return abs(max_re) / Lsq
        return math.inf

    if alg is AlgorithmId.TT_GDA:
        terms = [2.0 * abs(a) / Lsq for a in re[nonzero]]
        rep.s_max = min([escape_gd] + terms)
        rep.escape_s_max = escape_gd
        rep.provenance["s_max"] = ("s_TTGDA: min{min(1,tau)/L, min over Re(lambda) != 0 of "
                                   "2|Re lambda|/max(L^2, L^2/tau^2)}, lambda in sigma(Lambda_tau H)")
        rep.provenance["escape_s_max"] = "tt-gda escape: min(1,tau)/L"
        if not rep.flags["re_nonzero"]:
            rep.notes.append("purely imaginary eigenvalues: O(s) field stability not guaranteed")
    elif alg is AlgorithmId.GEG:
        rep.M = geg_M()
        rep.s_max = min(rep.M, min(1.0 / L, tau / L))
        rep.gamma_range = (0.0, 2.0)
        rep.provenance["M"] = "def_M: |max Re lambda| / max(L^2, L^2/tau^2), inf if max Re = 0"
        rep.provenance["s_max"] = "geg O(s) field: min{M, min(1/L, tau/L)}"
        rep.provenance["gamma_range"] = "geg O(s) field: 0 < gamma < 2"
        rep.flags["gamma_in_range"] = bool(0.0 < p.gamma < 2.0)
    elif alg is AlgorithmId.TT_PPM:
        rep.M = geg_M()
        rep.s_max = 2.0 * min(rep.M, min(1.0 / L, tau / L))
        rep.escape_s_max = escape_gd
        rep.provenance["M"] = "def_M: |max Re lambda| / max(L^2, L^2/tau^2), inf if max Re = 0"
        rep.provenance["s_max"] = "tt-ppm O(s) field: 2 min{M, min(1/L, tau/L)}"
        rep.provenance["escape_s_max"] = "tt-ppm escape: min(1,tau)/L"
    elif alg is AlgorithmId.DN:
        rep.s_max = math.inf
        rep.provenance["s_max"] = "dn O(s) field: stable for every s > 0"
        if box is not None:
            sup_F, sup_T = _box_sup(obj, box, box_samples, seed)
            rep.escape_s_max = 1.0 / (1.0 + sup_F * sup_T / L**2)
            rep.provenance["escape_s_max"] = ("dn diffeomorphism: 1/(1 + sup|F| sup||grad^2 F||/L^2), "
                                              f"sampled at {box_samples} points")
    elif alg is AlgorithmId.RDN:
        phi = p.phi
        mags = np.abs(re[nonzero])
        if mags.size:
            rep.phi_min = L * L / float(np.min(mags))
            rep.provenance["phi_min"] = "rdn O(1) field: L^2 / min{|Re kappa| : Re kappa != 0}, kappa in sigma(H)"
        else:
            rep.provenance["phi_min"] = "n/a: every eigenvalue of H is purely imaginary"
        limits = [2.0 * L * L / phi**2]
        for kap in sig:
            a, b = kap.real, kap.imag
            den = (phi - a) ** 2 + b * b
            q1 = (phi * a - (a * a + b * b)) / den
            q2 = phi * b / den
            gap = q1 * q1 - q2 * q2
            if gap < 0:
                limits.append(2.0 * abs(q1) / abs(gap))
        rep.s_max = min(limits)
        rep.provenance["s_max"] = "rdn O(s) field: min{2L^2/phi^2, min over q1^2<q2^2 of 2|q1|/|q1^2-q2^2|}"
        rep.flags["phi_above_L"] = bool(phi > L)
        rep.flags["phi_above_phi_min"] = bool(rep.phi_min is not None and phi > rep.phi_min)
        if box is not None:
            sup_F, sup_T = _box_sup(obj, box, box_samples, seed)
            rep.escape_s_max = 1.0 / (L / (L + phi) + sup_F * sup_T / (L + phi) ** 2)
            rep.provenance["escape_s_max"] = ("rdn diffeomorphism: 1/(L/(L+phi) + sup|F| sup||grad^2 F||/(L+phi)^2), "
                                              f"sampled at {box_samples} points")
    elif alg is AlgorithmId.JM:
        cond = []
        for kap in sig:
            a, b = kap.real, kap.imag
            ok = abs(b) > tol and (abs(a) <= tol or abs(a) < abs(b))
            cond.append({"eigenvalue": [float(a), float(b)], "satisfied": bool(ok)})
        rep.jm_condition = cond
        rep.flags["jm_condition"] = all(c["satisfied"] for c in cond)
        rep.provenance["jm_condition"] = "jm: Im(kappa) != 0 and (Re(kappa) = 0 or |Re| < |Im|), kappa in sigma(H)"
        rep.provenance["s_max"] = "n/a: no explicit step-size bound for jm"
    return rep

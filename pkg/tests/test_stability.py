import math

import numpy as np
import pytest

from oracles import bounds_oracle
from reslab.algorithms import iterate, StopRule, step_map
from reslab.errors import NotAnEquilibriumError
from reslab.fields import HyperParams, eval_H
from reslab.odes import resolution_field
from reslab.problems import builtin, random_quadratic
from reslab.stability import (Kind, Verdict, classify_equilibrium, is_saddle, jacobian_at,
                              lemma_negeig_check, step_bounds)

ORIGIN = np.zeros(2)


def obj(pid):
    return builtin(pid).objective


def rquads(count=20):
    for k in range(count):
        yield random_quadratic(1 + k % 3, 1 + (k // 3) % 3, k).objective


# -- classify --------------------------------------------------------------

def test_classify_examples():
    assert classify_equilibrium("continuous", eval_H(obj("quad_saddle"), ORIGIN)).verdict is Verdict.EXP_STABLE
    assert classify_equilibrium("continuous", eval_H(obj("bilinear"), ORIGIN)).verdict is Verdict.INCONCLUSIVE
    s = 0.1
    J = np.array([[1.0, -s], [s, 1.0]])  # |lambda|^2 = 1 + s^2
    rep = classify_equilibrium(Kind.DISCRETE, J)
    assert rep.verdict is Verdict.UNSTABLE and rep.margin < 0


def test_margin_sign_matches_verdict():
    rng = np.random.default_rng(1)
    for _ in range(100):
        J = rng.standard_normal((3, 3))
        for kind in Kind:
            rep = classify_equilibrium(kind, J)
            if rep.verdict is Verdict.EXP_STABLE:
                assert rep.margin > 0
            elif rep.verdict is Verdict.UNSTABLE:
                assert rep.margin < 0
            else:
                assert abs(rep.margin) <= rep.tol


# -- jacobian_at -----------------------------------------------------------

def test_jacobian_at_tt_gda_map():
    J = jacobian_at(step_map("tt-gda", obj("bilinear"), HyperParams(0.1)), ORIGIN)
    assert np.allclose(J, np.eye(2) - 0.1 * np.array([[0, 1], [-1, 0]]))


def test_jacobian_at_dn_field_degenerate_origin():
    W = resolution_field("dn", "o1", obj("x2y4"), HyperParams(0.1))
    assert np.allclose(jacobian_at(W, ORIGIN), np.diag([-1.0, -1.0 / 3.0]), atol=1e-6)


def test_jacobian_at_identity_and_fd_path():
    assert np.allclose(jacobian_at(lambda z: z, np.array([0.3, 0.2, 1.0])), np.eye(3))


def test_jacobian_at_rejects_non_equilibrium():
    with pytest.raises(NotAnEquilibriumError):
        jacobian_at(step_map("tt-gda", obj("bilinear"), HyperParams(0.1)), [1.0, 1.0])


# -- saddle predicates -----------------------------------------------------

def test_is_saddle_examples():
    assert is_saddle(obj("quad_saddle"), ORIGIN).verdict == "yes"
    assert is_saddle(obj("x2y4"), ORIGIN).verdict == "boundary"
    assert is_saddle(obj("bilinear"), [1.0, 1.0]).verdict == "no"
    assert is_saddle(obj("antisaddle"), ORIGIN).verdict == "no"
    assert is_saddle(obj("compact_attractor"), [0.2, 0.3]).verdict == "boundary"


def test_lemma_negeig_examples():
    ok, top = lemma_negeig_check(obj("quad_saddle"), ORIGIN, 3.0)
    assert ok and top == pytest.approx(-2 / 3)
    ok, top = lemma_negeig_check(obj("bilinear"), ORIGIN, 1.0)
    assert ok and top == 0.0
    ok, top = lemma_negeig_check(obj("antisaddle"), ORIGIN, 1.0)
    assert not ok and top == pytest.approx(2.0)


def test_random_quadratic_saddles_pass_lemma():
    for q in rquads():
        z = np.zeros(q.dim)
        assert is_saddle(q, z).verdict == "yes"
        for tau in (0.3, 1.0, 4.0):
            assert lemma_negeig_check(q, z, tau)[0]


# -- bounds ----------------------------------------------------------------

def test_bounds_examples_against_oracle():
    ref = bounds_oracle.values()
    rep = step_bounds("tt-gda", obj("quad_saddle"), ORIGIN, HyperParams(0.1))
    assert abs(rep.s_max - 0.5) <= 1e-12 and abs(rep.s_max - ref["tt_gda_quad_saddle_tau1"]) <= 1e-12
    assert rep.escape_s_max == pytest.approx(0.5)
    rep = step_bounds("geg", obj("bilinear"), ORIGIN, HyperParams(0.1))
    assert math.isinf(rep.M) and math.isinf(ref["geg_M_bilinear_tau1"])
    assert rep.s_max == pytest.approx(1.0) and rep.gamma_range == (0.0, 2.0)
    rep = step_bounds("rdn", obj("quad_saddle"), ORIGIN, HyperParams(0.1, phi=3.0))
    assert abs(rep.phi_min - 2.0) <= 1e-12 and abs(rep.phi_min - ref["rdn_phi_min_quad_saddle"]) <= 1e-12
    rep = step_bounds("dn", obj("quad_saddle"), ORIGIN, HyperParams(0.1))
    assert math.isinf(rep.s_max)


def test_bounds_provenance_and_flags():
    for alg in ("tt-gda", "geg", "tt-ppm", "dn", "rdn", "jm"):
        rep = step_bounds(alg, obj("quad_saddle"), ORIGIN, HyperParams(0.1, phi=3.0), box=(-1, 1),
                          box_samples=200)
        assert rep.provenance and all(rep.provenance.values())
        for key in ("hessian_invertible_at_z_star", "re_nonzero", "L_estimated"):
            assert key in rep.flags
        if rep.s_max is not None:
            assert rep.s_max > 0
        d = rep.to_dict()
        assert d["algorithm"] == alg


def test_tt_gda_bound_imaginary_spectrum_flags():
    rep = step_bounds("tt-gda", obj("bilinear"), ORIGIN, HyperParams(0.1))
    assert rep.flags["re_nonzero"] is False
    assert rep.s_max == pytest.approx(1.0)


def test_jm_condition():
    assert step_bounds("jm", obj("bilinear"), ORIGIN, HyperParams(0.1)).flags["jm_condition"]
    assert not step_bounds("jm", obj("quad_saddle"), ORIGIN, HyperParams(0.1)).flags["jm_condition"]


def test_rdn_imaginary_spectrum_phi_min_na():
    rep = step_bounds("rdn", obj("bilinear"), ORIGIN, HyperParams(0.1, phi=2.0))
    assert rep.phi_min is None and rep.flags["re_nonzero"] is False


def test_escape_bounds_newton_family():
    rep = step_bounds("dn", obj("x4y4"), ORIGIN, HyperParams(0.1), box=(-0.5, 0.5), box_samples=500)
    assert 0 < rep.escape_s_max < 1
    rep = step_bounds("rdn", obj("antisaddle"), ORIGIN, HyperParams(0.1, phi=3.0), box=(-1, 1), box_samples=500)
    # quadratic: third derivative vanishes, so the bound is (L + phi)/L
    assert rep.escape_s_max == pytest.approx(2.5)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_tt_gda_bound_scaling(c):
    for q in list(rquads(5)):
        z = np.zeros(q.dim)
        b1 = step_bounds("tt-gda", q, z, HyperParams(0.1)).s_max
        b2 = step_bounds("tt-gda", q.scaled(c), z, HyperParams(0.1)).s_max
        assert b2 == pytest.approx(b1 / c, rel=1e-12)


# -- coherence of bounds with the O(s) field -------------------------------

def os_verdict(alg, q, p):
    W = resolution_field(alg, "os", q, p)
    return classify_equilibrium("continuous", W.jac(np.zeros(q.dim))).verdict


def test_tt_gda_coherence():
    for q in rquads():
        for tau in (0.5, 1.0, 2.0):
            b = step_bounds("tt-gda", q, np.zeros(q.dim), HyperParams(0.1, tau=tau)).s_max
            for frac in (0.1, 0.5, 0.9):
                assert os_verdict("tt-gda", q, HyperParams(frac * b, tau=tau)) is Verdict.EXP_STABLE


def test_geg_coherence():
    for q in rquads():
        for gamma in (0.5, 1.0, 1.5):
            p = HyperParams(0.1, gamma=gamma)
            b = step_bounds("geg", q, np.zeros(q.dim), p).s_max
            for frac in (0.1, 0.5, 0.9):
                assert os_verdict("geg", q, p.replace(s=frac * b)) is Verdict.EXP_STABLE


def test_tt_ppm_dn_rdn_coherence():
    for q in rquads():
        z = np.zeros(q.dim)
        b = step_bounds("tt-ppm", q, z, HyperParams(0.1)).s_max
        assert os_verdict("tt-ppm", q, HyperParams(0.5 * b)) is Verdict.EXP_STABLE
        for s in (0.1, 1.0, 10.0):
            assert os_verdict("dn", q, HyperParams(s)) is Verdict.EXP_STABLE
        phi_min = step_bounds("rdn", q, z, HyperParams(0.1)).phi_min
        p = HyperParams(0.1, phi=1.5 * phi_min)
        s_max = step_bounds("rdn", q, z, p).s_max
        assert os_verdict("rdn", q, p.replace(s=0.5 * s_max)) is Verdict.EXP_STABLE


# -- discrete verdict vs observed iterates ---------------------------------

def test_discrete_verdict_matches_iterates():
    rng = np.random.default_rng(2)
    checked = 0
    for q in rquads():
        z = np.zeros(q.dim)
        for alg, s in (("tt-gda", 0.2), ("tt-gda", 1.6), ("geg", 0.4), ("jm", 0.05)):
            p = HyperParams(s)
            rep = classify_equilibrium("discrete", jacobian_at(step_map(alg, q, p), z))
            if abs(rep.margin) < 1e-2:
                continue
            z0 = rng.standard_normal(q.dim)
            tr = iterate(alg, q, p, z0, StopRule(200, divergence_radius=1e300))
            ratio = np.linalg.norm(tr.final) / np.linalg.norm(z0)
            assert (ratio < 1) == (rep.verdict is Verdict.EXP_STABLE), (alg, s, rep.margin, ratio)
            checked += 1
    assert checked >= 40

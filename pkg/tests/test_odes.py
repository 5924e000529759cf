import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.algorithms import AlgorithmId
from reslab.errors import DomainError, NumericsError, UnsupportedError
from reslab.fields import HyperParams, Objective, eval_F, eval_grad_F
from reslab.odes import ResolutionOrder, consistency_exponent, resolution_field, rk4_integrate
from reslab.problems import BUILTIN_IDS, builtin, random_quadratic

ALGS = list(AlgorithmId)
ORDERS = list(ResolutionOrder)
GRID = np.logspace(-3, -1, 8)


def obj(pid):
    return builtin(pid).objective


def pairs():
    for alg in ALGS:
        for order in ORDERS:
            if alg is AlgorithmId.JM and order is ResolutionOrder.Os:
                continue
            yield alg, order


def test_tt_gda_o1_example():
    W = resolution_field("tt-gda", "o1", obj("bilinear"), HyperParams(0.1))
    assert np.allclose(W([1.0, 1.0]), [-1.0, 1.0])


def test_dn_o1_x2y4_example():
    W = resolution_field("dn", "o1", obj("x2y4"), HyperParams(0.1))
    assert np.allclose(W([2.0, 1.0]), [-2.0, -1.0 / 3.0], atol=1e-10)


def test_tt_ppm_os_example():
    W = resolution_field("tt-ppm", "os", obj("quad_saddle"), HyperParams(0.5))
    assert np.allclose(W([1.0, 1.0]), [-1.0, -1.0])


def test_jm_os_unsupported():
    with pytest.raises(UnsupportedError):
        resolution_field("jm", "os", obj("bilinear"), HyperParams(0.1))


def test_geg_gamma_two_drops_correction():
    o = obj("x4y4")
    p = HyperParams(0.3, tau=0.7, gamma=2.0)
    z = np.array([0.4, -0.9])
    lam = np.array([1 / 0.7, 1.0])
    assert np.array_equal(resolution_field("geg", "os", o, p)(z), -2.0 * lam * eval_F(o, z))


@pytest.mark.parametrize("alg,order", list(pairs()))
@pytest.mark.parametrize("pid", BUILTIN_IDS)
def test_shared_equilibria(alg, order, pid):
    spec = builtin(pid)
    W = resolution_field(alg, order, spec.objective, HyperParams(0.1, tau=2, gamma=0.5, phi=3))
    for z in spec.known_equilibria:
        assert np.max(np.abs(eval_F(spec.objective, z))) <= 1e-12
        assert np.max(np.abs(W(z))) <= 1e-8


@pytest.mark.parametrize("alg,order", list(pairs()))
def test_field_jac_matches_fd(alg, order):
    o = obj("x4y4")
    W = resolution_field(alg, order, o, HyperParams(0.2, tau=1.5, gamma=0.6, phi=4.0))
    z = np.array([0.7, -0.6])
    assert np.allclose(W.jac(z), W.fd_jac(z), rtol=1e-4, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.sampled_from([a for a in ALGS if a is not AlgorithmId.JM]))
def test_os_collapses_to_o1(x, y, alg):
    o = obj("x4y4")
    z = np.array([x, y])
    if alg in (AlgorithmId.DN,) and min(abs(x), abs(y)) < 0.05:
        return  # grad F nearly singular: the constant blows up
    base = HyperParams(1.0, tau=1.3, gamma=0.8, phi=20.0)
    o1 = resolution_field(alg, "o1", o, base)(z)
    gaps = []
    for s in (1e-2, 1e-3):
        gaps.append(np.max(np.abs(resolution_field(alg, "os", o, base.replace(s=s))(z) - o1)))
    # the O(s) correction is linear in s
    assert gaps[1] <= 0.11 * gaps[0] + 1e-12


def test_rk4_exact_exponential():
    # 0.5 x^2 - 0.5 y^2 gives z' = -z
    half = Objective(1, 1, lambda z: 0.5 * (z[0] ** 2 - z[1] ** 2),
                     grad=lambda z: np.array([z[0], -z[1]]), hess=lambda z: np.diag([1.0, -1.0]),
                     third_dir=lambda z, v: np.zeros((2, 2)))
    W = resolution_field("tt-gda", "o1", half, HyperParams(0.1))
    tr = rk4_integrate(W, [1.0, 1.0], 1.0, 0.01)
    assert np.allclose(tr.final, np.exp(-1.0), atol=1e-8)
    assert tr.stamps[-1] == 1.0 and np.all(np.diff(tr.stamps) > 0)


def test_rk4_shortened_last_step():
    tr = rk4_integrate(lambda z: -z, [1.0], 1.0, 0.3)
    assert np.allclose(tr.stamps, [0, 0.3, 0.6, 0.9, 1.0])
    assert abs(tr.final[0] - np.exp(-1)) < 1e-3


def test_rk4_zero_field():
    tr = rk4_integrate(lambda z: np.zeros_like(z), [0.3, 0.4], 2.0, 0.1)
    assert np.all(tr.states == [0.3, 0.4])


def rk4_order_ratio():
    errs = []
    for dt in (0.1, 0.05):
        tr = rk4_integrate(lambda z: -z, [1.0], 1.0, dt, record=False)
        errs.append(abs(tr.final[0] - np.exp(-1)))
    return errs[0] / errs[1]


def test_rk4_order_four():
    assert 12 <= rk4_order_ratio() <= 20


def test_rk4_errors():
    with pytest.raises(DomainError):
        rk4_integrate(lambda z: -z, [1.0], 1.0, 0.0)
    with pytest.raises(DomainError):
        rk4_integrate(lambda z: -z, [1.0], 0.01, 0.1)
    with pytest.raises(NumericsError), np.errstate(over="ignore"):
        rk4_integrate(lambda z: z * 1e300, [1e10], 1.0, 0.5)


@pytest.mark.parametrize("pid", ["bilinear", "quad_saddle"])
@pytest.mark.parametrize("alg,order", list(pairs()))
def test_consistency_slopes(pid, alg, order):
    res = consistency_exponent(alg, order, obj(pid), HyperParams(0.1, phi=3.0), [1.0, 1.0], GRID)
    lo, hi = (1.8, 2.2) if order is ResolutionOrder.O1 else (2.8, 3.2)
    assert lo <= res.slope <= hi


def test_consistency_nonlinear_problem():
    # tau != 1 and a nonzero third derivative exercise every term of the O(s) fields
    for alg in ("tt-gda", "geg", "tt-ppm", "dn", "rdn"):
        res = consistency_exponent(alg, "os", obj("x4y4"), HyperParams(0.1, tau=2.0, gamma=0.7, phi=5.0),
                                   [0.8, 0.6], GRID)
        assert 2.8 <= res.slope <= 3.2, (alg, res.slope)


def test_consistency_indeterminate_at_critical_point():
    res = consistency_exponent("tt-gda", "o1", obj("bilinear"), HyperParams(0.1), [0.0, 0.0], GRID)
    assert res.indeterminate and np.all(res.errors <= 1e-14)


def test_consistency_needs_four_points():
    with pytest.raises(DomainError):
        consistency_exponent("geg", "o1", obj("bilinear"), HyperParams(0.1), [1.0, 1.0], [0.1, 0.01, 0.001])


def test_dn_field_matches_closed_form_on_quadratic():
    q = random_quadratic(2, 1, 5).objective
    z = np.array([0.2, -0.1, 0.4])
    A = eval_grad_F(q, z)
    u = np.linalg.solve(A, eval_F(q, z))
    s = 0.3
    W = resolution_field("dn", "os", q, HyperParams(s))
    assert np.allclose(W(z), (-1 - s / 2) * u)

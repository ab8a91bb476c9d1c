import numpy as np
import pytest

from nccp.cones import Zero
from nccp.errors import ConfigError, IncompatibleOracle
from nccp.mirror_prox import (
    MirrorProxState, estimate_lipschitz, mirror_prox_step, run_mirror_prox, run_mirror_prox_sen_svm,
)
from nccp.oracles import ConeMapOracle, NccpProblem, NonsmoothOracle, SmoothOracle
from nccp.problems import l1_least_squares, linear_qp, one_dim
from nccp.structured import gen_sen_svm


def _bilinear():
    # L(u, p) = u p on U = R, C* = R
    return NccpProblem(SmoothOracle.zero(1), NonsmoothOracle.zero(1), ConeMapOracle.affine([[1.0]]),
                       Zero(1))


def test_bilinear_toy_step():
    s = mirror_prox_step(_bilinear(), MirrorProxState(np.ones(1), np.ones(1)), 0.5)
    assert s.u_tilde[0] == pytest.approx(0.5)
    assert s.p_tilde[0] == pytest.approx(1.5)
    assert s.u[0] == pytest.approx(0.25)
    assert s.p[0] == pytest.approx(1.25)
    assert s.k == 1 and s.gamma_k == 0.5


def test_bilinear_distance_nonincreasing():
    prob = _bilinear()
    s = MirrorProxState(np.array([2.0]), np.array([-1.0]))
    d = [np.hypot(s.u[0], s.p[0])]
    for _ in range(200):
        s = mirror_prox_step(prob, s, 0.5)
        d.append(np.hypot(s.u[0], s.p[0]))
    assert np.all(np.diff(d) <= 1e-15)
    assert d[-1] < 1e-3 * d[0]


def test_saddle_point_is_fixed():
    for prob in (one_dim(), linear_qp(3)):
        ref = prob.reference
        s = mirror_prox_step(prob, MirrorProxState(ref.u_star.copy(), ref.p_star.copy()), 0.1)
        np.testing.assert_allclose(s.u, ref.u_star, atol=1e-12)
        np.testing.assert_allclose(s.p, ref.p_star, atol=1e-12)


def test_rejects_nonsmooth_parts():
    with pytest.raises(IncompatibleOracle, match="J = 0"):
        run_mirror_prox(l1_least_squares(0), max_iter=1)
    inst = gen_sen_svm(3, 5, 1, 0.4, 0)
    with pytest.raises(IncompatibleOracle, match="smooth Phi"):
        mirror_prox_step(inst.problem_I(), MirrorProxState(np.zeros(5), np.zeros(1)), 0.1)
    with pytest.raises(ConfigError):
        mirror_prox_step(one_dim(), MirrorProxState(np.zeros(1), np.zeros(1)), 0.0)


def test_lipschitz_estimate_on_linear_field():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(4, 4))
    P = P.T @ P
    A = rng.normal(size=(2, 4))
    prob = NccpProblem(SmoothOracle.quadratic(P), NonsmoothOracle.zero(4), ConeMapOracle.affine(A),
                       Zero(2))
    J = np.block([[P, A.T], [-A, np.zeros((2, 2))]])
    assert estimate_lipschitz(prob, iters=200) == pytest.approx(np.linalg.norm(J, 2), rel=1e-6)


def test_run_converges_on_one_dim():
    r = run_mirror_prox(one_dim(), max_iter=2000, tol_feas=1e-8, tol_obj=1e-8)
    assert r.status == "converged"
    assert r.solution.u[0] == pytest.approx(1.0, abs=1e-6)
    t = r.trace[-1]
    assert t.delta_k is None and t.lemma1_lhs is None


def test_sen_svm_dual_stays_in_ball_and_converges():
    inst = gen_sen_svm(8, 20, 2, 0.4, 5)
    r = run_mirror_prox_sen_svm(inst, max_iter=50000)
    assert r.status == "converged"
    assert max(t.dual_norm for t in r.trace) <= inst.M2 * (1 + 1e-15)


def test_sen_svm_fast_loop_matches_generic_step():
    inst = gen_sen_svm(4, 6, 2, 0.4, 1)
    prob = inst.problem_C()
    g = 0.01
    r = run_mirror_prox_sen_svm(inst, gamma=g, max_iter=30, tol_feas=0.0, tol_obj=0.0)
    s = MirrorProxState(np.zeros(6), np.zeros(7))
    for _ in range(30):
        s = mirror_prox_step(prob, s, g, inst.M2)
    np.testing.assert_allclose(r.u, s.u, atol=1e-12)
    np.testing.assert_allclose(r.p, s.p, atol=1e-12)

import numpy as np
import pytest

from nccp.errors import IncompatibleOracle
from nccp.fbs import fbs_step, gamma_op, op_B
from nccp.lagrangian import PrimalDual
from nccp.oracles import ConeMapOracle, NccpProblem, NonsmoothOracle, SmoothOracle
from nccp.cones import NonnegOrthant
from nccp.problems import l1_least_squares, linear_qp, one_dim, random_smooth_instance
from nccp.vapp import SolverConfig, init_state, step_bound, vapp_step


def test_op_B_one_dim():
    B = op_B(one_dim(), PrimalDual(np.zeros(1), np.zeros(1)), 1.0)
    assert B.primal_part[0] == pytest.approx(-1.0)
    assert B.dual_part[0] == pytest.approx(1.0)


def test_op_B_at_kkt_point():
    prob = linear_qp(0)
    ref = prob.reference
    B = op_B(prob, PrimalDual(ref.u_star, ref.p_star), 0.7)
    np.testing.assert_allclose(B.dual_part, 0.0, atol=1e-12)


def test_op_B_without_constraint():
    g = SmoothOracle.quadratic(np.diag([1.0, 2.0]), [0.5, 0.0])
    prob = NccpProblem(g, NonsmoothOracle.zero(2), ConeMapOracle.zero(2), NonnegOrthant(1))
    w = PrimalDual(np.array([1.0, -1.0]), np.array([0.3]))
    B = op_B(prob, w, 1.0)
    np.testing.assert_allclose(B.primal_part, g.gradient(w.u))
    # Theta = 0: -(Pi(p) - p)/gamma vanishes for p in C*
    np.testing.assert_allclose(B.dual_part, 0.0)


def test_gamma_op_one_dim():
    G = gamma_op(one_dim(), PrimalDual(np.ones(1), np.zeros(1)),
                 PrimalDual(np.zeros(1), np.zeros(1)), 0.5, 1.0)
    assert G.primal_part[0] == pytest.approx(2.0)
    assert G.dual_part[0] == pytest.approx(0.0)


def test_gamma_op_primal_block_without_phi():
    prob = random_smooth_instance(4)
    prob.theta = ConeMapOracle.zero(prob.n, prob.m)
    u = np.arange(prob.n, dtype=float)
    w = PrimalDual(u, np.zeros(prob.m))
    np.testing.assert_allclose(gamma_op(prob, w, w, 0.25, 1.0).primal_part, u / 0.25)


@pytest.mark.parametrize("seed", range(5))
def test_gamma_op_strongly_monotone(seed):
    prob = random_smooth_instance(seed)
    gamma = 0.8
    eps = 0.9 * (step_bound(prob, gamma) or 0.1)
    rng = np.random.default_rng(seed)
    anchor = PrimalDual(rng.normal(size=prob.n), prob.cone.dual()._project(rng.normal(size=prob.m)))
    for _ in range(100):
        w1 = PrimalDual(rng.normal(size=prob.n), rng.normal(size=prob.m))
        w2 = PrimalDual(rng.normal(size=prob.n), rng.normal(size=prob.m))
        g1 = gamma_op(prob, w1, anchor, eps, gamma)
        g2 = gamma_op(prob, w2, anchor, eps, gamma)
        du, dp = w1.u - w2.u, w1.p - w2.p
        inner = float((g1.primal_part - g2.primal_part) @ du + (g1.dual_part - g2.dual_part) @ dp)
        bound = prob.core.beta / (2 * eps) * float(du @ du) + float(dp @ dp) / (2 * gamma)
        assert inner >= bound - 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_op_B_sampled_monotone(seed):
    prob = random_smooth_instance(seed + 20)
    rng = np.random.default_rng(seed)
    dual = prob.cone.dual()
    for _ in range(200):
        w1 = PrimalDual(rng.normal(size=prob.n), dual._project(rng.normal(size=prob.m)))
        w2 = PrimalDual(rng.normal(size=prob.n), dual._project(rng.normal(size=prob.m)))
        b1, b2 = op_B(prob, w1, 1.0), op_B(prob, w2, 1.0)
        inner = float((b1.primal_part - b2.primal_part) @ (w1.u - w2.u)
                      + (b1.dual_part - b2.dual_part) @ (w1.p - w2.p))
        assert inner >= -1e-8


def test_fbs_step_one_dim():
    prob = one_dim()
    cfg = SolverConfig(gamma=1.0, eps0=0.5, check_step_bound=False)
    a = fbs_step(prob, init_state(prob, cfg), cfg)
    b = vapp_step(prob, init_state(prob, cfg), cfg)
    assert a.u[0] == pytest.approx(0.5, abs=1e-12)
    assert a.p[0] == pytest.approx(-0.5, abs=1e-12)
    np.testing.assert_allclose([a.u[0], a.p[0]], [b.u[0], b.p[0]], atol=1e-12)


def test_fbs_saddle_point_fixed():
    prob = linear_qp(1)
    ref = prob.reference
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0))
    new = fbs_step(prob, init_state(prob, cfg, ref.u_star, ref.p_star), cfg)
    np.testing.assert_allclose(new.u, ref.u_star, atol=1e-12)
    np.testing.assert_allclose(new.p, ref.p_star, atol=1e-12)


def test_fbs_rejects_nonsmooth_phi():
    from nccp.structured import gen_sen_svm

    prob = gen_sen_svm(4, 8, 2, 0.4, 0).problem_I()
    with pytest.raises(IncompatibleOracle):
        op_B(prob, PrimalDual(np.zeros(prob.n), np.zeros(prob.m)), 1.0)


def test_fbs_matches_vapp_with_l1_j():
    prob = l1_least_squares(2)
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0))
    a = b = init_state(prob, cfg)
    for _ in range(100):
        a, b = fbs_step(prob, a, cfg), vapp_step(prob, b, cfg)
    np.testing.assert_allclose(a.u, b.u, atol=1e-10, rtol=0)
    np.testing.assert_allclose(a.p, b.p, atol=1e-10, rtol=0)

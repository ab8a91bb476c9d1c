import numpy as np
import pytest

from nccp.analysis import rate_fit
from nccp.cones import NonnegOrthant, Zero
from nccp.errors import ConfigError
from nccp.oracles import BregmanCore, ConeMapOracle, NccpProblem, NonsmoothOracle, SmoothOracle
from nccp.problems import one_dim, strong_suite
from nccp.strong import (
    StrongSchedule, params_strong, run_strong, schedule_for, shift_strong_convexity,
    vapp_s_step, weights_ab,
)
from nccp.vapp import SolverConfig, init_state

S = StrongSchedule(beta_g=1.0, b_g=1.0, b_omega=0.0, tau=1.0)


def test_params_examples():
    assert S.eta == 0.5
    assert S.c0 == 4.0
    rho, eps = params_strong(S, 0)
    assert rho == pytest.approx(0.5) and eps == pytest.approx(0.4)
    rho, eps = params_strong(S, 9)
    assert rho == pytest.approx(5.0) and eps == pytest.approx(1 / 7)


def test_params_monotone():
    vals = np.array([params_strong(S, k) for k in range(200)])
    assert np.all(np.diff(vals[:, 0]) > 0)
    assert np.all(np.diff(vals[:, 1]) < 0)


def test_weights_examples_and_bounds():
    a0, b0 = weights_ab(S, 0)
    assert a0 == pytest.approx(3.0) and b0 == pytest.approx(4.0)
    for sched in (S, StrongSchedule(0.3, 2.0, 0.7, 1.9), StrongSchedule(2.0, 2.0, 0.0, 0.4)):
        for k in range(0, 10001, 7):
            a, b = weights_ab(sched, k)
            assert a >= sched.beta_g / 4 * (k + 1) ** 2 * (1 - 1e-12)
            assert b >= 1 / (2 * sched.eta) * (1 - 1e-12)


def test_schedule_requires_beta():
    with pytest.raises(ConfigError, match="missing β_G"):
        StrongSchedule(0.0, 1.0, 0.0, 1.0)
    g = SmoothOracle.quadratic(np.zeros((1, 1)))
    prob = NccpProblem(g, NonsmoothOracle.zero(1), ConeMapOracle.affine([[1.0]], [1.0]), Zero(1))
    with pytest.raises(ConfigError, match="missing β_G"):
        schedule_for(prob)
    with pytest.raises(ConfigError, match="missing β_G"):
        run_strong(prob, SolverConfig())


def test_rejects_non_euclidean_core():
    prob = one_dim()
    prob.core = BregmanCore.diagonal(np.array([2.0]))
    with pytest.raises(ConfigError):
        run_strong(prob, SolverConfig(max_iter=2))


def test_shift_moves_strong_convexity_into_g():
    g = SmoothOracle.quadratic(np.zeros((2, 2)), [1.0, -1.0])
    j = NonsmoothOracle.sq_l2(2, 0.8)
    prob = NccpProblem(g, j, ConeMapOracle.affine(np.ones((1, 2)), [1.0]), NonnegOrthant(1))
    sh = shift_strong_convexity(prob)
    assert sh.g.strong_convexity == pytest.approx(0.8)
    assert sh.j.tag == "zero"
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.normal(size=2)
        assert sh.objective(u) == pytest.approx(prob.objective(u), abs=1e-12)
    # nothing to move when G already carries beta
    p0 = one_dim()
    assert shift_strong_convexity(p0) is p0


def test_saddle_point_is_fixed():
    for prob in strong_suite(0):
        sched = schedule_for(prob)
        ref = prob.reference
        s = init_state(prob, SolverConfig(), ref.u_star, ref.p_star)
        new = vapp_s_step(prob, s, sched)
        np.testing.assert_allclose(new.u, ref.u_star, atol=1e-12)
        np.testing.assert_allclose(new.p, ref.p_star, atol=1e-12)


@pytest.mark.filterwarnings("ignore:dist_sq reaches zero")
def test_one_dim_distance_rate():
    r = run_strong(one_dim(), SolverConfig(max_iter=1000, tol_feas=0.0, tol_obj=0.0))
    fit = rate_fit(r.trace, "dist_sq", (10, 1000))
    assert fit.loglog_slope <= -2.0


@pytest.mark.parametrize("idx", [0, 1, 2])
def test_weighted_distance_descent_each_step(idx):
    prob = strong_suite(1)[idx]
    r = run_strong(prob, SolverConfig(max_iter=500, tol_feas=0.0, tol_obj=0.0))
    for lhs, rhs in r.extras["lemma2"]:
        assert lhs <= rhs + 1e-8
        assert lhs <= 1e-8


def test_ergodic_weights_and_trace_columns():
    prob = strong_suite(0)[1]
    sched = schedule_for(prob)
    states = []
    r = run_strong(prob, SolverConfig(max_iter=6, tol_feas=0.0, tol_obj=0.0), callback=states.append)
    w = np.array([sched.c0 + k for k in range(6)])
    num = sum(wi * s.u for wi, s in zip(w, states))
    np.testing.assert_allclose(r.ergodic.u, num / w.sum(), atol=1e-14)
    t = r.trace[0]
    assert (t.rho_k, t.eps_k) == pytest.approx(params_strong(sched, 0))
    assert (t.a_k, t.b_k) == pytest.approx(weights_ab(sched, 1))


def test_vapp_sm_keeps_ball():
    prob = strong_suite(0)[2]
    M = 1.05 * np.linalg.norm(prob.reference.p_star)
    states = []
    run_strong(prob, SolverConfig(dual_bound=M, max_iter=300, tol_feas=0.0, tol_obj=0.0),
               callback=states.append)
    assert max(np.linalg.norm(s.p) for s in states) <= M * (1 + 1e-15)
    assert max(np.linalg.norm(s.q) for s in states) <= M * (1 + 1e-15)

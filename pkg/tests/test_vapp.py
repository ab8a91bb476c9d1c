import numpy as np
import pytest

from nccp.cones import NonnegOrthant, Zero
from nccp.errors import BacktrackingError, ConfigError, DivergenceError
from nccp.oracles import ConeMapOracle, FeasibleSet, NccpProblem, NonsmoothOracle, SmoothOracle
from nccp.problems import l1_least_squares, linear_qp, one_dim
from nccp.vapp import (
    SolverConfig, backtracking_step, delta_k, dual_update, init_state, run,
    solve_primal_subproblem, step_bound, vapp_step,
)


def _unconstrained(n=4, seed=0, j=None, U=None):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(n, n))
    g = SmoothOracle.quadratic(R.T @ R / n + 0.1 * np.eye(n), rng.normal(size=n))
    return NccpProblem(g, j or NonsmoothOracle.zero(n), ConeMapOracle.zero(n, 1), NonnegOrthant(1), U)


# --- primal subproblem ----------------------------------------------------

def test_subproblem_is_gradient_step_when_j_phi_zero():
    prob = _unconstrained()
    u = np.array([0.3, -1.0, 2.0, 0.5])
    out = solve_primal_subproblem(prob, u, [0.0], 0.2)
    np.testing.assert_allclose(out, u - 0.2 * prob.g.gradient(u), atol=1e-15)


def test_subproblem_one_dim_example():
    out = solve_primal_subproblem(one_dim(), [0.0], [-1.0], 0.5)
    assert out[0] == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(5))
def test_subproblem_soft_threshold_matches_generic(seed):
    n = 2 + seed % 4
    lam = 0.4
    prob = _unconstrained(n, seed, j=NonsmoothOracle.l1(n, lam))
    rng = np.random.default_rng(seed + 10)
    u = rng.normal(size=n)
    eps = 0.3
    z = u - eps * prob.g.gradient(u)
    closed = solve_primal_subproblem(prob, u, [0.0], eps)
    np.testing.assert_allclose(closed, np.sign(z) * np.maximum(np.abs(z) - eps * lam, 0.0), atol=1e-15)
    generic = solve_primal_subproblem(prob, u, [0.0], eps, inner_tol=1e-13, force_generic=True)
    np.testing.assert_allclose(closed, generic, atol=1e-9)


def test_subproblem_variational_inequality():
    # optimality of u+ for <c, u> + J(u) + ||u - a||^2/(2 eps) over a box
    prob = l1_least_squares(0)
    prob.set = FeasibleSet.box(-0.3, 0.3, n=prob.n)
    rng = np.random.default_rng(0)
    u = rng.normal(size=prob.n) * 0.2
    q = np.abs(rng.normal(size=prob.m))
    eps = 0.2
    u1 = solve_primal_subproblem(prob, u, q, eps)
    c = prob.g.gradient(u) + prob.theta.jt(u, q)

    def obj(x):
        return float(c @ x) + prob.j.value(x) + float((x - u) @ (x - u)) / (2 * eps)

    f1 = obj(u1)
    for _ in range(500):
        x = prob.set.project(u1 + rng.normal(size=prob.n) * 0.05)
        assert obj(x) >= f1 - 1e-12


def test_block_parallel_matches_sequential():
    U = FeasibleSet.product([FeasibleSet.ball(0.5, n=2), FeasibleSet.ball(0.7, n=3),
                             FeasibleSet.box(-0.2, 0.2, n=1)])
    prob = _unconstrained(6, 3, U=U)
    u = np.random.default_rng(1).normal(size=6)
    seq = solve_primal_subproblem(prob, u, [0.0], 0.3, threads=1)
    par = solve_primal_subproblem(prob, u, [0.0], 0.3, threads=3)
    np.testing.assert_array_equal(seq, par)


# --- dual update ----------------------------------------------------------

def test_dual_update_examples():
    assert dual_update(NonnegOrthant(1), [0.0], [-2.0], 1.0)[0] == 0.0
    assert dual_update(Zero(1), [-0.5], [0.25], 1.0)[0] == pytest.approx(-0.25)
    assert dual_update(NonnegOrthant(1), [0.9], [1.0], 1.0, dual_bound=1.0)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dual_update(NonnegOrthant(1), [0.0], [1.0], 0.0)


# --- certificate ----------------------------------------------------------

def _one_dim_plain():
    # G = u^2/2, Theta(u) = u, C = {0}
    return NccpProblem(SmoothOracle.quadratic(np.eye(1)), NonsmoothOracle.zero(1),
                       ConeMapOracle.affine([[1.0]]), Zero(1))


def test_delta_examples():
    prob = _one_dim_plain()
    assert delta_k(prob, [0.7], [0.7], [0.0], 0.25, 1.0).value == 0.0
    d = delta_k(prob, np.zeros(1), np.ones(1), np.zeros(1), 0.25, 1.0)
    assert d.value == pytest.approx(0.25)
    assert d.lower_bound == pytest.approx(0.25)
    assert delta_k(prob, np.zeros(1), np.ones(1), np.zeros(1), 0.6, 1.0).value == pytest.approx(-0.1)


def test_backtracking_halves_once():
    prob = _one_dim_plain()
    cfg = SolverConfig(gamma=1.0, eps0=0.6, eps_mode="backtracking", eta=0.5)
    assert delta_k(prob, np.zeros(1), np.ones(1), np.zeros(1), 0.3, 1.0).value == pytest.approx(0.2)
    new = backtracking_step(prob, init_state(prob, cfg, u0=[1.0]), cfg)
    assert new.backtracks == 1
    assert new.eps_k == pytest.approx(0.3)
    assert new.delta.value >= 0
    # accepted at the first trial: eps unchanged
    again = backtracking_step(prob, new, cfg)
    assert again.backtracks == 0 and again.eps_k == new.eps_k


def test_backtracking_cap():
    # a remainder no step size can offset
    g = SmoothOracle(lambda u: float(np.sum(np.exp(u))), lambda u: np.exp(u), 1,
                     remainder=lambda u, v: 1e300)
    prob = NccpProblem(g, NonsmoothOracle.zero(1), ConeMapOracle.affine([[1.0]]), Zero(1))
    cfg = SolverConfig(gamma=1.0, eps0=1.0, eps_mode="backtracking", backtrack_cap=5)
    with pytest.raises(BacktrackingError):
        backtracking_step(prob, init_state(prob, cfg), cfg)


def test_backtracking_lower_bound_and_monotone():
    prob = linear_qp(0)
    cfg = SolverConfig(gamma=1.0, eps0=5.0, eps_mode="backtracking", eta=0.5, max_iter=300,
                       tol_feas=0.0, tol_obj=0.0)
    r = run(prob, cfg)
    eps = np.array([t.eps_k for t in r.trace])
    assert np.all(np.diff(eps) <= 0)
    assert eps[-1] >= 0.5 * step_bound(prob, 1.0) - 1e-15
    assert np.all(np.array([t.delta_k for t in r.trace]) >= 0)


# --- iteration ------------------------------------------------------------

def test_vapp_step_one_dim_example():
    prob = one_dim()
    cfg = SolverConfig(gamma=1.0, eps0=0.5, check_step_bound=False)
    new = vapp_step(prob, init_state(prob, cfg), cfg)
    assert new.q[0] == pytest.approx(-1.0)
    assert new.u[0] == pytest.approx(0.5)
    assert new.p[0] == pytest.approx(-0.5)
    assert new.delta.value >= 0


def test_dual_uses_q_before_primal_step():
    # q^k comes from (u^k, p^k); the new multiplier from u^{k+1}
    prob = linear_qp(1)
    cfg = SolverConfig(gamma=0.8, eps0=0.99 * step_bound(prob, 0.8))
    rng = np.random.default_rng(0)
    s = init_state(prob, cfg, rng.normal(size=prob.n), np.abs(rng.normal(size=prob.m)))
    new = vapp_step(prob, s, cfg)
    dual = prob.cone.dual()
    np.testing.assert_allclose(new.q, dual._project(s.p + 0.8 * prob.theta.value(s.u)))
    np.testing.assert_allclose(new.p, dual._project(s.p + 0.8 * prob.theta.value(new.u)))


@pytest.mark.parametrize("make", [one_dim, lambda: linear_qp(2), lambda: l1_least_squares(1)])
def test_saddle_point_is_fixed(make):
    prob = make()
    ref = prob.reference
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0))
    s = init_state(prob, cfg, ref.u_star, ref.p_star)
    new = vapp_step(prob, s, cfg)
    np.testing.assert_allclose(new.u, ref.u_star, atol=1e-12)
    np.testing.assert_allclose(new.p, ref.p_star, atol=1e-12)


def test_run_one_dim_converges():
    prob = one_dim()
    cfg = SolverConfig(gamma=1.0, eps0=0.4, max_iter=200, tol_feas=1e-7, tol_obj=1e-7, stop_on="last")
    r = run(prob, cfg)
    assert r.converged and r.iterations <= 200
    assert abs(r.solution.u[0] - 1.0) <= 1e-6
    assert abs(r.solution.p[0] + 1.0) <= 1e-6


def test_run_without_constraint_is_proximal_gradient():
    n, lam, eps = 5, 0.3, 0.2
    prob = _unconstrained(n, 4, j=NonsmoothOracle.l1(n, lam))
    cfg = SolverConfig(gamma=1.0, eps0=eps, max_iter=50, tol_feas=0.0, tol_obj=0.0, check_step_bound=False)
    r = run(prob, cfg)
    u = np.zeros(n)
    for _ in range(50):
        z = u - eps * prob.g.gradient(u)
        u = np.sign(z) * np.maximum(np.abs(z) - eps * lam, 0.0)
    np.testing.assert_array_equal(r.solution.u, u)


@pytest.mark.parametrize("make", [lambda: linear_qp(0), lambda: l1_least_squares(0)])
def test_descent_merit_and_dual_step(make):
    prob = make()
    gamma = 1.0
    cfg = SolverConfig(gamma=gamma, eps0=0.99 * step_bound(prob, gamma), max_iter=400,
                       tol_feas=0.0, tol_obj=0.0)
    states = []
    r = run(prob, cfg, callback=states.append)
    tau = prob.theta.tau
    for t in r.trace:
        assert t.lemma1_lhs <= t.lemma1_rhs + 1e-8
        assert t.lemma1_lhs <= 1e-12
    for s in states:
        assert np.linalg.norm(s.p - s.q) <= gamma * tau * np.linalg.norm(s.u - s.u_prev) + 1e-12


def test_ergodic_bifunction_bound():
    from nccp.analysis import bifunction_bound, make_probes
    from nccp.lagrangian import lagrangian

    prob = linear_qp(3)
    gamma = 1.0
    eps = 0.99 * step_bound(prob, gamma)
    cfg = SolverConfig(gamma=gamma, eps0=eps, max_iter=300, tol_feas=0.0, tol_obj=0.0)
    r = run(prob, cfg)
    u0, p0 = np.zeros(prob.n), np.zeros(prob.m)
    for w in make_probes(prob, 30, seed=1):
        lhs = lagrangian(prob, r.ergodic.u, w.p) - lagrangian(prob, w.u, r.ergodic.p)
        rhs = bifunction_bound(prob, w.u, w.p, u0, p0, eps, gamma, eps, r.iterations)
        assert lhs <= rhs + 1e-9


def test_vapp_m_keeps_ball():
    prob = linear_qp(0)
    M = 1.1 * np.linalg.norm(prob.reference.p_star)
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0, M), dual_bound=M, max_iter=200,
                       tol_feas=0.0, tol_obj=0.0)
    states = []
    run(prob, cfg, callback=states.append)
    assert max(np.linalg.norm(s.p) for s in states) <= M * (1 + 1e-15)
    assert max(np.linalg.norm(s.q) for s in states) <= M * (1 + 1e-15)


def test_ergodic_weights():
    prob = linear_qp(0)
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0), max_iter=5, tol_feas=0.0, tol_obj=0.0)
    states = []
    r = run(prob, cfg, callback=states.append)
    np.testing.assert_allclose(r.ergodic.u, np.mean([s.u for s in states], axis=0), atol=1e-14)
    np.testing.assert_allclose(r.ergodic.p, np.mean([s.q for s in states], axis=0), atol=1e-14)


def test_config_errors():
    prob = one_dim()
    with pytest.raises(ConfigError):
        run(prob, SolverConfig(gamma=1.0, eps0=0.5))  # above 0.99 * 0.5
    with pytest.raises(ConfigError):
        SolverConfig(eps_mode="backtracking", eta=1.5)
    with pytest.raises(ConfigError):
        SolverConfig(gamma=0.0)
    g = SmoothOracle(lambda u: float(u @ u), lambda u: 2 * u, 1)
    nobg = NccpProblem(g, NonsmoothOracle.zero(1), ConeMapOracle.affine([[1.0]], [1.0]), Zero(1))
    with pytest.raises(ConfigError, match="backtracking"):
        run(nobg, SolverConfig(eps0=0.1))


def test_divergence_guard():
    # a concave "G" makes the iteration blow up
    g = SmoothOracle.quadratic(-np.eye(1))
    prob = NccpProblem(g, NonsmoothOracle.zero(1), ConeMapOracle.zero(1), NonnegOrthant(1))
    cfg = SolverConfig(eps0=0.5, max_iter=10000, check_step_bound=False, divergence_bound=1e6)
    with pytest.raises(DivergenceError):
        run(prob, cfg, u0=[1.0])

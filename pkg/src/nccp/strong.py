"""Accelerated variants VAPP-S / VAPP-SM for strongly convex G.

Parameters grow with the iteration counter k:

    rho^k = (k+1) eta,    eps^k = 1 / ((k+1) eta tau^2 + B_G + B_Omega + beta_G),
    eta   = beta_G / (2 tau^2),

and the core is fixed to K = ||.||^2/2.  Ergodic averages use weights
c0 + k with c0 = 2 (B_G + B_Omega)/beta_G + 2.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cones import DualProjector
from .errors import ConfigError, DivergenceError
from .lagrangian import PrimalDual, lagrangian
from .oracles import NccpProblem, NonsmoothOracle, SmoothOracle
from .vapp import RunResult, SolverConfig, SolverState, effective_b_omega, init_state, \
    solve_primal_subproblem

__all__ = [
    "StrongSchedule",
    "schedule_for",
    "params_strong",
    "weights_ab",
    "shift_strong_convexity",
    "vapp_s_step",
    "lemma2_terms",
    "run_strong",
]


@dataclass(frozen=True)
class StrongSchedule:
    beta_g: float
    b_g: float
    b_omega: float
    tau: float

    def __post_init__(self):
        if not self.beta_g > 0:
            raise ConfigError("missing β_G: the strong variant needs a strongly convex G")
        if not self.tau > 0:
            raise ConfigError("the strong variant needs tau > 0")
        if self.b_g < 0 or self.b_omega < 0:
            raise ConfigError("constants must be nonnegative")

    @property
    def eta(self):
        return self.beta_g / (2.0 * self.tau ** 2)

    @property
    def c0(self):
        return 2.0 * (self.b_g + self.b_omega) / self.beta_g + 2.0


def schedule_for(problem: NccpProblem, dual_bound=None):
    g, th = problem.g, problem.theta
    if not g.strong_convexity:
        raise ConfigError("missing β_G: the strong variant needs a strongly convex G")
    bo = effective_b_omega(problem, dual_bound)
    if g.lipschitz_grad is None or bo is None or th.tau is None:
        raise ConfigError("the strong variant needs declared B_G, B_Omega and tau")
    return StrongSchedule(g.strong_convexity, g.lipschitz_grad, bo, th.tau)


def params_strong(schedule: StrongSchedule, k):
    """(rho^k, eps^k)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    s = schedule
    rho = (k + 1) * s.eta
    eps = 1.0 / ((k + 1) * s.eta * s.tau ** 2 + s.b_g + s.b_omega + s.beta_g)
    return rho, eps


def weights_ab(schedule: StrongSchedule, k):
    """(a^k, b^k) = ((c0+k)(1/(2 eps^k) - beta_G/2), (c0+k)/(2 rho^k))."""
    rho, eps = params_strong(schedule, k)
    c = schedule.c0 + k
    return c * (0.5 / eps - 0.5 * schedule.beta_g), c / (2.0 * rho)


def shift_strong_convexity(problem: NccpProblem):
    """Move a strongly convex part of J into G.

    With J strongly convex (modulus beta_J) and G merely convex,
    J <- J - beta_J/2 ||.||^2 and G <- G + beta_J/2 ||.||^2.  Returns the
    problem unchanged when G already carries strong convexity or J has none.
    """
    g, j = problem.g, problem.j
    bj = j.strong_convexity or 0.0
    if (g.strong_convexity or 0.0) > 0 or bj <= 0:
        return problem
    if j.tag == "sq_l2":
        j_new = NonsmoothOracle.zero(j.dim)
    elif j.tag == "quadratic":
        j_new = NonsmoothOracle("quadratic", j.dim, matrix=j.matrix - bj * np.eye(j.dim))
    else:
        raise ConfigError(f"cannot shift strong convexity out of J={j.tag!r}")
    rem = g.remainder
    g_new = SmoothOracle(
        value=lambda u: g.value(u) + 0.5 * bj * float(u @ u),
        gradient=lambda u: g.gradient(u) + bj * u,
        dim=g.dim,
        lipschitz_grad=None if g.lipschitz_grad is None else g.lipschitz_grad + bj,
        strong_convexity=(g.strong_convexity or 0.0) + bj,
        remainder=None if rem is None else (lambda u, v: rem(u, v) + 0.5 * bj * float((v - u) @ (v - u))),
        hessian=None if g.hessian is None else g.hessian + bj * np.eye(g.dim),
        name=g.name + "+shift",
    )
    return NccpProblem(g_new, j_new, problem.theta, problem.cone, problem.set, problem.core,
                       problem.reference, problem.name)


def vapp_s_step(problem, state: SolverState, schedule: StrongSchedule, dual_bound=None,
                proj=None, inner_tol=1e-10):
    """One VAPP-S iteration (VAPP-SM when ``dual_bound`` is given)."""
    if problem.core.kind != "half_squared":
        raise ConfigError("the strong variant uses K = ||u||^2/2 only")
    if proj is None:
        proj = DualProjector(problem.cone, dual_bound)
    k = state.k
    rho, eps = params_strong(schedule, k)
    qt = proj(state.p + rho * problem.theta.value(state.u))
    u1 = solve_primal_subproblem(problem, state.u, qt, eps, inner_tol)
    p1 = proj(state.p + rho * problem.theta.value(u1))
    w = schedule.c0 + k
    return SolverState(
        k=k + 1, u=u1, p=p1, q=qt, eps_k=eps,
        ergodic_u_num=state.ergodic_u_num + w * u1,
        ergodic_p_num=state.ergodic_p_num + w * qt,
        ergodic_wsum=state.ergodic_wsum + w,
        u_prev=state.u, p_prev=state.p,
    )


def lemma2_terms(problem, schedule, old: SolverState, new: SolverState, u, p):
    """(lhs, rhs) of the per-step descent inequality for the weighted distance.

    lhs = [a^{k+1}||u-u^{k+1}||^2 + b^{k+1}||p-p^{k+1}||^2] - [a^k||u-u^k||^2 + b^k||p-p^k||^2]
    rhs = (c0+k)[L(u, q~^k) - L(u^{k+1}, p)] - c0 beta_G/2 ||u^k-u^{k+1}||^2
          - ||q~^k - p^k||^2 / (2 eta)
    """
    k = old.k
    a0, b0 = weights_ab(schedule, k)
    a1, b1 = weights_ab(schedule, k + 1)

    def sq(x):
        return float(x @ x)

    lhs = (a1 * sq(u - new.u) + b1 * sq(p - new.p)) - (a0 * sq(u - old.u) + b0 * sq(p - old.p))
    rhs = ((schedule.c0 + k) * (lagrangian(problem, u, new.q) - lagrangian(problem, new.u, p))
           - 0.5 * schedule.c0 * schedule.beta_g * sq(old.u - new.u)
           - sq(new.q - old.p) / (2 * schedule.eta))
    return lhs, rhs


def run_strong(problem, config: SolverConfig, u0=None, p0=None, schedule=None, callback=None):
    """Run VAPP-S (VAPP-SM with ``config.dual_bound``); trace rows add a_k, b_k, rho_k.

    When a reference saddle point is known, ``result.extras['lemma2']``
    holds the per-step (lhs, rhs) pairs and ``dist_sq`` records
    ||u* - u^k||^2.
    """
    from .analysis import TraceRecord, kkt_residual

    problem = shift_strong_convexity(problem)
    if problem.core.kind != "half_squared":
        raise ConfigError("the strong variant uses K = ||u||^2/2 only")
    if schedule is None:
        schedule = schedule_for(problem, config.dual_bound)
    proj = DualProjector(problem.cone, config.dual_bound)
    dual = problem.cone.dual()
    state = init_state(problem, config, u0, p0)
    ref = problem.reference
    opt = None if ref is None else ref.opt_value
    trace, lemma2 = [], []
    t_start = time.perf_counter()
    step_time = 0.0
    status = "max_iter"
    tol = config.resolved_inner_tol
    for _ in range(config.max_iter):
        t0 = time.perf_counter()
        new = vapp_s_step(problem, state, schedule, config.dual_bound, proj, tol)
        step_time += time.perf_counter() - t0
        if not np.all(np.isfinite(new.u)) or float(np.abs(new.u).max(initial=0.0)) > config.divergence_bound:
            raise DivergenceError(f"primal iterate diverged at iteration {new.k}")
        rho, eps = params_strong(schedule, state.k)
        a1, b1 = weights_ab(schedule, new.k)
        erg = new.ergodic
        th1, th_bar = problem.theta_value(new.u), problem.theta_value(erg.u)
        f_last = float(np.linalg.norm(dual._project(th1)))
        f_bar = float(np.linalg.norm(dual._project(th_bar)))
        obj1, obj_bar = problem.objective(new.u), problem.objective(erg.u)
        kkt = kkt_residual(problem, PrimalDual(state.u, state.p), PrimalDual(new.u, new.p),
                           new.q, eps, rho)
        dist = None
        if ref is not None:
            du = ref.u_star - new.u
            dist = float(du @ du)
            lemma2.append(lemma2_terms(problem, schedule, state, new, ref.u_star, ref.p_star))
        if config.record_trace:
            trace.append(TraceRecord(
                iter=new.k,
                wall_time_s=(time.perf_counter() - t_start) if config.timing else None,
                obj=obj1, obj_ergodic=obj_bar, feas=f_last, feas_ergodic=f_bar,
                dual_norm=float(np.linalg.norm(new.p)), eps_k=eps, kkt_res=kkt,
                dist_sq=dist, a_k=a1, b_k=b1, rho_k=rho,
            ))
        state = new
        if callback is not None:
            callback(state)
        if config.stop_on == "ergodic":
            f_chk = f_bar
            gap = abs(obj_bar - opt) if opt is not None else max(abs(float(erg.p @ th_bar)), kkt)
        else:
            f_chk = f_last
            gap = abs(obj1 - opt) if opt is not None else max(abs(float(new.p @ th1)), kkt)
        if f_chk <= config.tol_feas and gap <= config.tol_obj:
            status = "converged"
            break
    return RunResult(PrimalDual(state.u.copy(), state.p.copy()), state.ergodic, trace, status,
                     state.k, state, step_time, time.perf_counter() - t_start,
                     extras={"lemma2": lemma2, "schedule": schedule})

"""Mirror-Prox (Euclidean extragradient) baseline for the saddle form

    min_{u in U} max_{p in C* ∩ B_M}  L(u, p) = G(u) + <p, Theta(u)>.

One step::

    u~ = P_U(u - g grad_u L(u, p)),      p~ = P_M(p + g Theta(u)),
    u+ = P_U(u - g grad_u L(u~, p~)),    p+ = P_M(p + g Theta(u~)).

The baseline needs a differentiable Lagrangian: J must be zero and Phi
smooth.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cones import DualProjector, _proj_linf_cone
from .errors import ConfigError, DivergenceError, IncompatibleOracle
from .lagrangian import PrimalDual

__all__ = [
    "MirrorProxState",
    "mirror_prox_step",
    "estimate_lipschitz",
    "run_mirror_prox",
    "run_mirror_prox_sen_svm",
]


@dataclass
class MirrorProxState:
    u: np.ndarray
    p: np.ndarray
    u_tilde: Optional[np.ndarray] = None
    p_tilde: Optional[np.ndarray] = None
    gamma_k: Optional[float] = None
    k: int = 0


def _require_smooth(problem):
    if problem.j.tag != "zero":
        raise IncompatibleOracle(f"Mirror-Prox needs J = 0, got {problem.j.tag!r}")
    if not problem.theta.phi_smooth:
        raise IncompatibleOracle(f"Mirror-Prox needs a smooth Phi, got {problem.theta.phi_tag!r}")


def _grad_u(problem, u, p):
    return problem.g.gradient(u) + problem.theta.jt(u, p)


def mirror_prox_step(problem, state: MirrorProxState, gamma_k, M=None, proj=None):
    """One extragradient step; ``M=None`` drops the ball."""
    if not gamma_k > 0:
        raise ConfigError("Mirror-Prox step must be positive")
    _require_smooth(problem)
    if proj is None:
        proj = DualProjector(problem.cone, M)
    U, th = problem.set, problem.theta
    u, p = state.u, state.p
    ut = U.project(u - gamma_k * _grad_u(problem, u, p))
    pt = proj(p + gamma_k * th.value(u))
    u1 = U.project(u - gamma_k * _grad_u(problem, ut, pt))
    p1 = proj(p + gamma_k * th.value(ut))
    return MirrorProxState(u1, p1, ut, pt, float(gamma_k), state.k + 1)


def _saddle_field(problem, u, p):
    return np.concatenate((_grad_u(problem, u, p), -problem.theta.value(u)))


def estimate_lipschitz(problem, u0=None, p0=None, iters=50, seed=0, h=1e-6):
    """Power-iteration estimate of the norm of the saddle-field Jacobian at (u0, p0).

    Jacobian-vector products are central differences of
    F(u, p) = (grad_u L(u, p), -Theta(u)).
    """
    n, m = problem.n, problem.m
    u0 = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float)
    p0 = np.zeros(m) if p0 is None else np.asarray(p0, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n + m)
    v /= np.linalg.norm(v)
    scale = h * max(1.0, float(np.linalg.norm(np.concatenate((u0, p0)))))

    def jv(x):
        d_u, d_p = scale * x[:n], scale * x[n:]
        fp = _saddle_field(problem, u0 + d_u, p0 + d_p)
        fm = _saddle_field(problem, u0 - d_u, p0 - d_p)
        return (fp - fm) / (2 * scale)

    def jtv(x):
        # J = [[H, B^T], [-B, 0]] with H symmetric, so J^T (x_u, x_p) is
        # J (x_u, -x_p) with its dual block negated
        y = jv(np.concatenate((x[:n], -x[n:])))
        y[n:] *= -1.0
        return y

    lam = 0.0
    for _ in range(iters):
        w = jtv(jv(v))
        nrm = float(np.linalg.norm(w))
        if nrm == 0:
            return 0.0
        lam, v = nrm, w / nrm
    return float(np.sqrt(lam))


def run_mirror_prox(problem, gamma=None, M=None, max_iter=10000, tol_feas=1e-6, tol_obj=1e-6,
                    u0=None, p0=None, stop_on="last", timing=False, record_trace=True,
                    divergence_bound=1e12, step_safety=0.5):
    """Constant-step Mirror-Prox; ``gamma`` defaults to ``step_safety / L_hat``.

    The extragradient method needs gamma < 1/L; the estimate ignores the
    curvature brought in by the multiplier, so the default keeps a factor 2.

    Ergodic averages are uniform over (u~, p~).  The trace shares the
    VAPP schema; step-certificate and descent columns stay empty.
    """
    from .analysis import TraceRecord
    from .vapp import RunResult

    _require_smooth(problem)
    if stop_on not in ("last", "ergodic"):
        raise ConfigError("stop_on must be 'ergodic' or 'last'")
    n, m = problem.n, problem.m
    u = problem.set.project(np.zeros(n) if u0 is None else np.asarray(u0, dtype=float))
    proj = DualProjector(problem.cone, M)
    p = proj(np.zeros(m) if p0 is None else np.asarray(p0, dtype=float))
    if gamma is None:
        L = estimate_lipschitz(problem, u, p)
        if not L > 0:
            raise ConfigError("could not estimate a positive Lipschitz constant")
        gamma = step_safety / L
    dual = problem.cone.dual()
    ref = problem.reference
    opt = None if ref is None else ref.opt_value
    state = MirrorProxState(u, p, gamma_k=gamma)
    u_sum, p_sum = np.zeros(n), np.zeros(m)
    trace = []
    status = "max_iter"
    step_time = 0.0
    t_start = time.perf_counter()
    for _ in range(max_iter):
        t0 = time.perf_counter()
        state = mirror_prox_step(problem, state, gamma, M, proj)
        step_time += time.perf_counter() - t0
        if not np.all(np.isfinite(state.u)) or float(np.abs(state.u).max(initial=0.0)) > divergence_bound:
            raise DivergenceError(f"primal iterate diverged at iteration {state.k}")
        u_sum += state.u_tilde
        p_sum += state.p_tilde
        ub, pb = u_sum / state.k, p_sum / state.k
        th1, thb = problem.theta_value(state.u), problem.theta_value(ub)
        f1 = float(np.linalg.norm(dual._project(th1)))
        fb = float(np.linalg.norm(dual._project(thb)))
        o1, ob = problem.objective(state.u), problem.objective(ub)
        if record_trace:
            dist = None
            if ref is not None:
                du, dp = ref.u_star - state.u, ref.p_star - state.p
                dist = float(du @ du + dp @ dp)
            trace.append(TraceRecord(
                iter=state.k, wall_time_s=(time.perf_counter() - t_start) if timing else None,
                obj=o1, obj_ergodic=ob, feas=f1, feas_ergodic=fb,
                dual_norm=float(np.linalg.norm(state.p)), eps_k=gamma, dist_sq=dist,
            ))
        if stop_on == "last":
            f_chk, o_chk, pp, th = f1, o1, state.p, th1
        else:
            f_chk, o_chk, pp, th = fb, ob, pb, thb
        gap = abs(o_chk - opt) if opt is not None else abs(float(pp @ th))
        if f_chk <= tol_feas and gap <= tol_obj:
            status = "converged"
            break
    return RunResult(PrimalDual(state.u.copy(), state.p.copy()), PrimalDual(ub, pb), trace,
                     status, state.k, None, step_time, time.perf_counter() - t_start,
                     extras={"gamma": gamma})


def _proj_linf_ball(v, M):
    p = _proj_linf_cone(v)
    nrm = float(np.sqrt(p @ p))
    return p * (M / nrm) if nrm > M else p


def run_mirror_prox_sen_svm(instance, gamma=None, dual_bound=None, max_iter=50000,
                            tol_feas=1e-5, tol_obj=1e-5, timing=False, record_every=1,
                            step_safety=0.5, divergence_bound=1e12):
    """Mirror-Prox on the cone form of SEN-SVM with the same matrix tricks
    as the fast VAPP loop: each step costs two products with [A^T A; Q].

    ``gamma`` defaults to ``step_safety / L_hat`` with the generic estimator at (0, 0).
    """
    from .analysis import TraceRecord
    from .structured import SenSvmRun

    inst = instance
    M = inst.M2 if dual_bound is None else dual_bound
    if gamma is None:
        gamma = step_safety / estimate_lipschitz(inst.problem_C())
    A, b, Q, a, dl = inst.A, inst.b, inst.Q, inst.alpha, inst.delta
    n = inst.n
    AtA = A.T @ A
    Atb = A.T @ b
    S = np.vstack([AtA, Q])
    bb = float(b @ b)
    c2 = 2 * (1 - a)

    def omega(uv, Quv):
        out = np.empty(n + 1)
        out[0] = (1 - a) * float(uv @ Quv) - dl
        out[1:] = a * uv
        return out

    u = np.zeros(n)
    AtAu, Qu = np.zeros(n), np.zeros(n)
    p = np.zeros(n + 1)
    th = omega(u, Qu)
    u_sum = np.zeros(n)
    trace = []
    status = "max_iter"
    step_time = 0.0
    t_start = time.perf_counter()
    k = 0
    for k in range(1, max_iter + 1):
        t0 = time.perf_counter()
        ut = u - gamma * (AtAu - Atb + (c2 * p[0]) * Qu + a * p[1:])
        pt = _proj_linf_ball(p + gamma * th, M)
        SU = S @ ut
        AtAut, Qut = SU[:n], SU[n:]
        th_t = omega(ut, Qut)
        u = u - gamma * (AtAut - Atb + (c2 * pt[0]) * Qut + a * pt[1:])
        p = _proj_linf_ball(p + gamma * th_t, M)
        SU = S @ u
        AtAu, Qu = SU[:n], SU[n:]
        th = omega(u, Qu)
        u_sum += ut
        step_time += time.perf_counter() - t0
        if not np.isfinite(th[0]) or float(np.abs(u).max()) > divergence_bound:
            raise DivergenceError(f"primal iterate diverged at iteration {k}")
        obj = max(0.5 * float(u @ AtAu) - float(Atb @ u) + 0.5 * bb, 0.0)
        feas = float(np.linalg.norm(_proj_linf_cone(th)))
        if record_every and k % record_every == 0:
            ub = u_sum / k
            thb = omega(ub, Q @ ub)
            trace.append(TraceRecord(
                iter=k, wall_time_s=(time.perf_counter() - t_start) if timing else None,
                obj=obj, obj_ergodic=inst.objective(ub), feas=feas,
                feas_ergodic=float(np.linalg.norm(_proj_linf_cone(thb))),
                dual_norm=float(np.linalg.norm(p)), eps_k=gamma,
            ))
        if feas <= tol_feas and obj <= tol_obj:
            status = "converged"
            break
    return SenSvmRun("SP", u, p, u_sum / max(k, 1), k, status, trace, step_time, gamma)

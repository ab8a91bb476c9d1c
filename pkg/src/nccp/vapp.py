"""The VAPP iteration and its dual-bounded variant VAPP-M.

One iteration from (u^k, p^k) with step eps^k and dual step gamma:

    q^k     = Pi(p^k + gamma Theta(u^k))
    u^{k+1} = argmin_{u in U} <grad G(u^k), u> + J(u)
                  + <q^k, grad Omega(u^k) u + Phi(u)> + D(u, u^k) / eps^k
    p^{k+1} = Pi(p^k + gamma Theta(u^{k+1}))

Pi projects onto C*, or onto C* ∩ {||p|| <= M} when a dual bound M is
configured.  The primal step has a coordinatewise closed form for
separable cores, J in {0, weighted l1, mu/2 ||.||^2}, Phi in {0, affine,
W|u| + c} and box sets; everything else goes to an accelerated proximal
gradient inner solver.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._inner import fista, prox_j_on_set
from .cones import DualProjector, as_vec
from .errors import BacktrackingError, ConfigError, DivergenceError, IncompatibleOracle
from .lagrangian import PrimalDual
from .oracles import NccpProblem, NonsmoothOracle, aggregate_b_omega

__all__ = [
    "SolverConfig",
    "SolverState",
    "DeltaCertificate",
    "RunResult",
    "step_bound",
    "effective_b_omega",
    "init_state",
    "solve_primal_subproblem",
    "dual_update",
    "delta_k",
    "vapp_step",
    "backtracking_step",
    "run",
    "thread_cap",
]


def thread_cap():
    """Worker cap for block-parallel subproblems, from ``NCCP_THREADS``."""
    try:
        return max(1, int(os.environ.get("NCCP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class SolverConfig:
    """Parameters of a VAPP run.

    ``eps_mode`` is ``"fixed"`` (eps^k = eps0, needs declared constants)
    or ``"backtracking"`` (eps^k = eta^i eps^{k-1} with the smallest i
    giving Delta^k >= 0).  Setting ``dual_bound`` switches to VAPP-M.
    """

    gamma: float = 1.0
    eps0: float = 1.0
    eps_mode: str = "fixed"
    eta: float = 0.5
    dual_bound: Optional[float] = None
    max_iter: int = 10000
    tol_feas: float = 1e-6
    tol_obj: float = 1e-6
    inner_tol: Optional[float] = None
    seed: int = 0
    stop_on: str = "ergodic"
    check_step_bound: bool = True
    backtrack_cap: int = 60
    force_generic: bool = False
    timing: bool = False
    divergence_bound: float = 1e12
    record_trace: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if not self.eps0 > 0:
            raise ConfigError("eps0 must be positive")
        if self.eps_mode not in ("fixed", "backtracking"):
            raise ConfigError(f"unknown eps_mode {self.eps_mode!r}")
        if self.eps_mode == "backtracking" and not 0 < self.eta < 1:
            raise ConfigError("backtracking eta must lie in (0, 1)")
        if self.dual_bound is not None and not self.dual_bound > 0:
            raise ConfigError("dual bound M must be positive")
        if self.stop_on not in ("ergodic", "last"):
            raise ConfigError("stop_on must be 'ergodic' or 'last'")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    @property
    def rho(self):
        return self.gamma

    @property
    def resolved_inner_tol(self):
        if self.inner_tol is not None:
            return self.inner_tol
        return min(1e-10, self.tol_obj / 10.0)


@dataclass
class DeltaCertificate:
    value: float
    lower_bound: Optional[float] = None
    roundoff: float = 0.0

    @property
    def ok(self):
        return self.value >= -self.roundoff


@dataclass
class SolverState:
    k: int
    u: np.ndarray
    p: np.ndarray
    q: Optional[np.ndarray]
    eps_k: float
    ergodic_u_num: np.ndarray
    ergodic_p_num: np.ndarray
    ergodic_wsum: float = 0.0
    u_prev: Optional[np.ndarray] = None
    p_prev: Optional[np.ndarray] = None
    delta: Optional[DeltaCertificate] = None
    backtracks: int = 0

    @property
    def ergodic(self):
        if self.ergodic_wsum == 0:
            return PrimalDual(self.u.copy(), self.p.copy())
        return PrimalDual(self.ergodic_u_num / self.ergodic_wsum,
                          self.ergodic_p_num / self.ergodic_wsum)


def init_state(problem, config, u0=None, p0=None):
    n, m = problem.n, problem.m
    u = problem.set.project(np.zeros(n) if u0 is None else as_vec(u0, n, "u0"))
    p = np.zeros(m) if p0 is None else as_vec(p0, m, "p0")
    p = DualProjector(problem.cone, config.dual_bound)(p)
    return SolverState(0, u, p, None, float(config.eps0), np.zeros(n), np.zeros(m))


# ---------------------------------------------------------------------------
# constants


def effective_b_omega(problem: NccpProblem, dual_bound=None):
    """B_Omega used in the step rule: M * sum of component constants under a
    dual bound when available, otherwise the declared value."""
    th = problem.theta
    if th.omega_is_zero:
        return 0.0
    if dual_bound is not None and th.b_omega_components is not None:
        return aggregate_b_omega(th.b_omega_components, dual_bound)
    return th.b_omega


def step_bound(problem: NccpProblem, gamma, dual_bound=None):
    """beta / (B_G + B_Omega + gamma tau^2), or None when a constant is missing."""
    bg = problem.g.lipschitz_grad
    bo = effective_b_omega(problem, dual_bound)
    tau = problem.theta.tau
    if bg is None or bo is None or tau is None:
        return None
    denom = bg + bo + gamma * tau * tau
    if denom <= 0:
        return math.inf
    return problem.core.beta / denom


# ---------------------------------------------------------------------------
# primal step


def _closed_form_ok(problem):
    th, j, U = problem.theta, problem.j, problem.set
    if not problem.core.separable or not j.separable:
        return False
    if th.phi_tag not in ("zero", "linear", "separable-l1"):
        return False
    if U.kind == "product":
        return all(b.kind in ("full", "box") for b in U.blocks)
    return U.kind in ("full", "box")


def _box_bounds(U):
    if U.kind == "full":
        return None, None
    if U.kind == "box":
        return U.lo, U.hi
    lo = np.full(U.dim, -np.inf)
    hi = np.full(U.dim, np.inf)
    for blk, sl in zip(U.blocks, U.block_slices()):
        if blk.kind == "box":
            lo[sl], hi[sl] = blk.lo, blk.hi
    return lo, hi


def _l1_weights(problem, q):
    """Total l1 weight per coordinate: from J and from <q, W|u|>."""
    j, th = problem.j, problem.theta
    w = j.weight if j.tag == "l1" else None
    if th.phi_tag == "separable-l1":
        wq = th.W.T @ q
        if np.any(wq < -1e-12 * max(1.0, float(np.abs(wq).max()))):
            raise IncompatibleOracle("W^T q has negative entries; the primal step is not convex")
        wq = np.maximum(wq, 0.0)
        w = wq if w is None else w + wq
    return w


def _closed_form(problem, c, q, anchor, eps):
    # per coordinate: min c u + w|u| + mu/2 u^2 + d/(2 eps)(u - a)^2 on [lo, hi]
    core, j = problem.core, problem.j
    t = eps if core.kind == "half_squared" else eps / core.weights
    z = anchor - t * c
    w = _l1_weights(problem, q)
    if j.tag == "sq_l2" and j.mu > 0:
        s = 1.0 + t * j.mu
        z = z / s
        thr = None if w is None else (t * w) / s
    else:
        thr = None if w is None else t * w
    u = z if thr is None else np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
    lo, hi = _box_bounds(problem.set)
    if lo is not None:
        u = np.clip(u, lo, hi)
    return u


def _generic(problem, c, q, anchor, eps, tol, threads):
    th, j, core, U = problem.theta, problem.j, problem.core, problem.set
    w_extra = None
    if th.phi_tag == "separable-l1":
        w_extra = _l1_weights(problem, q)
        if j.tag == "l1":
            w_extra = w_extra - j.weight
    # fold the l1 part of <q, Phi> into J
    if w_extra is not None:
        if j.tag == "zero":
            jj = NonsmoothOracle.l1(problem.n, w_extra)
        elif j.tag == "l1":
            jj = NonsmoothOracle.l1(problem.n, j.weight + w_extra)
        else:
            raise IncompatibleOracle(f"J={j.tag!r} cannot absorb a W|u| term")
    else:
        jj = j
    smooth_j = jj.tag == "quadratic"
    if smooth_j:
        jmat = jj.matrix
        jj = NonsmoothOracle.zero(problem.n)
    phi_custom = th.phi_tag == "custom"

    def make(idx, sub_core, sub_c, sub_anchor):
        def f(u):
            val = float(sub_c @ u) + sub_core.distance(u, sub_anchor) / eps
            if smooth_j:
                val += 0.5 * float(u @ (jmat @ u))
            if phi_custom:
                val += float(q @ th.phi(u))
            return val

        gk = sub_core.grad(sub_anchor)

        def grad(u):
            out = sub_c + (sub_core.grad(u) - gk) / eps
            if smooth_j:
                out = out + jmat @ u
            if phi_custom:
                out = out + th.phi_jt(u, q)
            return out
        return f, grad

    if th.phi_tag == "linear":
        c = c + th.A.T @ q

    L0 = problem.core.B / eps
    splittable = (U.kind == "product" and core.separable and jj.separable
                  and not smooth_j and not phi_custom)
    if not splittable:
        f, grad = make(None, core, c, anchor)
        u, _, _ = fista(f, grad, lambda v, t: prox_j_on_set(jj, U, v, t),
                        U.project(anchor), tol=tol, L0=L0)
        return u

    def solve_block(args):
        blk, sl = args
        idx = np.arange(sl.start, sl.stop)
        sub_core = core.subset(idx)
        sub_j = jj.subset(idx)
        f, grad = make(idx, sub_core, c[sl], anchor[sl])
        u, _, _ = fista(f, grad, lambda v, t: prox_j_on_set(sub_j, blk, v, t),
                        blk.project(anchor[sl]), tol=tol, L0=L0)
        return u

    jobs = list(zip(U.blocks, U.block_slices()))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as ex:
            parts = list(ex.map(solve_block, jobs))
    else:
        parts = [solve_block(a) for a in jobs]
    return np.concatenate(parts)


def _solve_linearized(problem, lin, q, anchor, eps, tol=1e-10, force_generic=False,
                      threads=None):
    """argmin_{u in U} <lin, u> + J(u) + <q, Phi(u)> + D(u, anchor)/eps."""
    if not force_generic and _closed_form_ok(problem):
        c = lin if problem.theta.phi_tag != "linear" else lin + problem.theta.A.T @ q
        return _closed_form(problem, c, q, anchor, eps)
    return _generic(problem, lin, q, anchor, eps, tol, thread_cap() if threads is None else threads)


def solve_primal_subproblem(problem, u_k, q_k, eps_k, inner_tol=1e-10, force_generic=False,
                            threads=None):
    """Minimiser over U of <grad G(u^k), u> + J(u) + <q^k, grad Omega(u^k) u + Phi(u)>
    + D(u, u^k) / eps^k."""
    if not eps_k > 0:
        raise ValueError("eps_k must be positive")
    u_k = as_vec(u_k, problem.n, "u_k")
    q_k = as_vec(q_k, problem.m, "q_k")
    lin = problem.g.gradient(u_k) + problem.theta.omega_jt(u_k, q_k)
    return _solve_linearized(problem, lin, q_k, u_k, eps_k, inner_tol, force_generic, threads)


# ---------------------------------------------------------------------------
# dual step and certificate


def dual_update(cone, p_k, theta_next, rho, dual_bound=None):
    """Pi(p^k + rho Theta(u^{k+1})), onto C* or C* ∩ ball(M)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    p_k = as_vec(p_k, cone.dim, "p_k")
    theta_next = as_vec(theta_next, cone.dim, "theta_next")
    return DualProjector(cone, dual_bound)(p_k + rho * theta_next)


_ULP = np.finfo(float).eps


def delta_k(problem, u, v, q_k, eps_k, gamma, dual_bound=None, theta_u=None, theta_v=None):
    """Step certificate

        D(v, u) - eps [ G(v) - G(u) - <grad G(u), v - u>
                        + <q, Omega(v) - Omega(u) - grad Omega(u)(v - u)>
                        + gamma/2 ||Theta(u) - Theta(v)||^2 ].
    """
    if not (eps_k > 0 and gamma > 0):
        raise ValueError("eps_k and gamma must be positive")
    u = as_vec(u, problem.n, "u")
    v = as_vec(v, problem.n, "v")
    q_k = as_vec(q_k, problem.m, "q_k")
    g, th = problem.g, problem.theta
    tu = th.value(u) if theta_u is None else theta_u
    tv = th.value(v) if theta_v is None else theta_v
    dth = tu - tv
    rg = g.bregman(u, v)
    ro = th.remainder(u, v, q_k)
    D = problem.core.distance(v, u)
    val = D - eps_k * (rg + ro + 0.5 * gamma * float(dth @ dth))
    # absolute rounding in the remainders when they come from differences
    roundoff = 0.0
    if g.remainder is None:
        roundoff += 8 * _ULP * eps_k * (abs(g.value(u)) + abs(g.value(v)))
    if th.omega_remainder is None:
        roundoff += 8 * _ULP * eps_k * float(np.abs(q_k) @ (np.abs(th.omega(u)) + np.abs(th.omega(v))))
    lb = None
    bound = step_bound(problem, gamma, dual_bound)
    if bound is not None:
        denom = problem.core.beta / bound if bound != math.inf else 0.0
        lb = 0.5 * (problem.core.beta - eps_k * denom) * float((u - v) @ (u - v))
    return DeltaCertificate(float(val), lb, roundoff)


# ---------------------------------------------------------------------------
# iterations


def _advance(problem, state, config, q, u1, theta1, eps, delta, proj, backtracks=0):
    p1 = proj(state.p + config.gamma * theta1)
    return SolverState(
        k=state.k + 1,
        u=u1,
        p=p1,
        q=q,
        eps_k=eps,
        ergodic_u_num=state.ergodic_u_num + eps * u1,
        ergodic_p_num=state.ergodic_p_num + eps * q,
        ergodic_wsum=state.ergodic_wsum + eps,
        u_prev=state.u,
        p_prev=state.p,
        delta=delta,
        backtracks=backtracks,
    )


def vapp_step(problem, state, config, proj=None):
    """One fixed-step iteration: q^k, then u^{k+1}, then p^{k+1}."""
    if proj is None:
        proj = DualProjector(problem.cone, config.dual_bound)
    gamma, eps = config.gamma, state.eps_k
    theta0 = problem.theta.value(state.u)
    q = proj(state.p + gamma * theta0)
    u1 = solve_primal_subproblem(problem, state.u, q, eps, config.resolved_inner_tol,
                                 config.force_generic)
    theta1 = problem.theta.value(u1)
    delta = delta_k(problem, state.u, u1, q, eps, gamma, config.dual_bound, theta0, theta1)
    return _advance(problem, state, config, q, u1, theta1, eps, delta, proj)


def backtracking_step(problem, state, config, proj=None):
    """One iteration with eps^k = eta^i eps^{k-1}, i >= 0 smallest with Delta^k >= 0."""
    if config.eps_mode != "backtracking":
        raise ConfigError("backtracking_step needs eps_mode='backtracking'")
    if proj is None:
        proj = DualProjector(problem.cone, config.dual_bound)
    gamma = config.gamma
    theta0 = problem.theta.value(state.u)
    q = proj(state.p + gamma * theta0)
    eps = state.eps_k
    for i in range(config.backtrack_cap + 1):
        u1 = solve_primal_subproblem(problem, state.u, q, eps, config.resolved_inner_tol,
                                     config.force_generic)
        theta1 = problem.theta.value(u1)
        delta = delta_k(problem, state.u, u1, q, eps, gamma, config.dual_bound, theta0, theta1)
        if delta.ok:
            return _advance(problem, state, config, q, u1, theta1, eps, delta, proj, backtracks=i)
        eps *= config.eta
    raise BacktrackingError(
        f"no acceptable step after {config.backtrack_cap} shrinks at iteration {state.k}; "
        "check the oracles and declared constants"
    )


# ---------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    solution: PrimalDual
    ergodic: PrimalDual
    trace: List = field(default_factory=list)
    status: str = "max_iter"
    iterations: int = 0
    state: Optional[SolverState] = None
    step_time_s: float = 0.0
    total_time_s: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def mean_step_time(self):
        return self.step_time_s / max(self.iterations, 1)


def validate_config(problem, config):
    if config.eps_mode == "fixed":
        bound = step_bound(problem, config.gamma, config.dual_bound)
        if bound is None:
            raise ConfigError("fixed step mode needs B_G, B_Omega and tau; use backtracking")
        if config.check_step_bound and config.eps0 > 0.99 * bound:
            raise ConfigError(
                f"eps0={config.eps0:.6g} exceeds 0.99 * beta/(B_G+B_Omega+gamma tau^2) = {0.99 * bound:.6g}"
            )


def run(problem, config, u0=None, p0=None, step=None, callback=None):
    """Iterate until the stopping rule holds or ``max_iter`` is reached.

    Stops when ||Pi(Theta(u))|| <= tol_feas and the objective gap
    estimate is <= tol_obj, evaluated on the ergodic averages
    (``stop_on="ergodic"``) or on the last iterate (``"last"``).  The
    gap estimate is |obj - opt| when the reference optimal value is
    known and max(|<p, Theta(u)>|, kkt residual) otherwise.

    Parameters
    ----------
    step : callable, optional
        Replacement for the iteration map, ``step(problem, state, config, proj)``.
    callback : callable, optional
        Called with each new state.
    """
    from .analysis import TraceRecord, kkt_residual
    from .lagrangian import lagrangian

    validate_config(problem, config)
    if step is None:
        step = backtracking_step if config.eps_mode == "backtracking" else vapp_step
    proj = DualProjector(problem.cone, config.dual_bound)
    dual = problem.cone.dual()
    state = init_state(problem, config, u0, p0)
    ref = problem.reference
    opt = None if ref is None else ref.opt_value
    gamma = config.gamma
    trace = []
    t_start = time.perf_counter()
    step_time = 0.0
    status = "max_iter"

    def feas(th):
        return float(np.linalg.norm(dual._project(th)))

    for it in range(config.max_iter):
        t0 = time.perf_counter()
        new = step(problem, state, config, proj)
        step_time += time.perf_counter() - t0
        u1, p1, q, eps = new.u, new.p, new.q, new.eps_k
        if not np.all(np.isfinite(u1)) or float(np.abs(u1).max(initial=0.0)) > config.divergence_bound:
            raise DivergenceError(f"primal iterate exceeded {config.divergence_bound:g} at iteration {new.k}")
        erg = new.ergodic
        th1 = problem.theta_value(u1)
        th_bar = problem.theta_value(erg.u)
        obj1 = problem.objective(u1)
        obj_bar = problem.objective(erg.u)
        kkt = kkt_residual(problem, PrimalDual(state.u, state.p), PrimalDual(u1, p1), q, eps, gamma)
        f_last, f_bar = feas(th1), feas(th_bar)
        l1_lhs = l1_rhs = dist_sq = None
        if ref is not None:
            us, ps = ref.u_star, ref.p_star
            c = eps / (2 * gamma)
            D1 = problem.core.distance(us, u1)
            D0 = problem.core.distance(us, state.u)
            dist_sq = D1 + c * float((ps - p1) @ (ps - p1))
            l1_lhs = dist_sq - (D0 + c * float((ps - state.p) @ (ps - state.p)))
            l1_rhs = (eps * (lagrangian(problem, us, q) - lagrangian(problem, u1, ps))
                      - (new.delta.value + c * float((q - state.p) @ (q - state.p))))
        if config.record_trace:
            trace.append(TraceRecord(
                iter=new.k,
                wall_time_s=(time.perf_counter() - t_start) if config.timing else None,
                obj=obj1, obj_ergodic=obj_bar, feas=f_last, feas_ergodic=f_bar,
                dual_norm=float(np.linalg.norm(p1)), eps_k=eps,
                delta_k=new.delta.value if new.delta is not None else None,
                lemma1_lhs=l1_lhs, lemma1_rhs=l1_rhs, kkt_res=kkt, dist_sq=dist_sq,
            ))
        state = new
        if callback is not None:
            callback(state)
        if config.stop_on == "ergodic":
            f_chk = f_bar
            gap = abs(obj_bar - opt) if opt is not None else max(abs(float(erg.p @ th_bar)), kkt)
        else:
            f_chk = f_last
            gap = abs(obj1 - opt) if opt is not None else max(abs(float(p1 @ th1)), kkt)
        if f_chk <= config.tol_feas and gap <= config.tol_obj:
            status = "converged"
            break
    return RunResult(
        solution=PrimalDual(state.u.copy(), state.p.copy()),
        ergodic=state.ergodic,
        trace=trace,
        status=status,
        iterations=state.k,
        state=state,
        step_time_s=step_time,
        total_time_s=time.perf_counter() - t_start,
    )

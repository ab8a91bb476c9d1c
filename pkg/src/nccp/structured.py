"""Certified cone-convex constraint maps and the SEN-SVM benchmark family.

Stacked maps

    (i)   Theta(u) = (w^T g(u) + g0(u); Q g(u))
    (ii)  Theta(u) = (g0(u); A u - b)
    (iii) Theta(u) = (w^T g(u) + g0(u); Q g(u); A u - b)

with convex g0, g_j, Q >= 0 entrywise and w_j >= sum_i Q_ij are convex
with respect to every nu-norm cone of matching dimension.  The builder
checks the weight condition and stamps the resulting oracle with that
certificate.

The SEN-SVM instance is

    minimize ||A u - b||^2 / 2  s.t.  alpha ||u||_1 + (1 - alpha) u^T Q u <= delta,

posed either as one scalar inequality (formulation I) or as the cone
constraint ((1 - alpha) u^T Q u - delta; alpha u) in -K_1^{n+1}
(formulation C).  Data are generated so that u* is feasible with
objective 0, hence optimal.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .cones import NonnegOrthant, NormCone, _proj_linf_cone
from .errors import ConfigError, DimensionMismatch
from .lagrangian import PrimalDual
from .oracles import ConeMapOracle, NccpProblem, NonsmoothOracle, Reference, SmoothOracle, \
    soft_threshold, spectral_norm
from .vapp import SolverConfig, SolverState, delta_k

__all__ = [
    "StructuredMapSpec",
    "build_structured_map",
    "SenSvmInstance",
    "gen_sen_svm",
    "sen_svm_closed_form_updates",
    "SenSvmRun",
    "run_sen_svm",
]


# ---------------------------------------------------------------------------
# stacked maps


@dataclass
class StructuredMapSpec:
    """Ingredients of a stacked cone-convex map.

    ``g0`` is a convex scalar: a SmoothOracle, a NonsmoothOracle with tag
    ``zero`` or ``l1`` (placed in Phi), or None.  ``g`` holds smooth
    convex scalars.  ``affine`` is an optional pair (A, b).
    """

    g0: Union[SmoothOracle, NonsmoothOracle, None]
    g: Sequence[SmoothOracle] = ()
    Q: Optional[np.ndarray] = None
    omega_weights: Optional[np.ndarray] = None
    affine: Optional[tuple] = None
    variant: str = "i"
    nu: object = 1
    n: Optional[int] = None


def _check_weights(Q, w):
    if np.any(Q < 0):
        i, j = np.argwhere(Q < 0)[0]
        raise ValueError(f"Q must be nonnegative (entry {i},{j} is {Q[i, j]})")
    if np.any(w < 0):
        raise ValueError("omega weights must be nonnegative")
    col = Q.sum(axis=0)
    bad = np.nonzero(w < col - 1e-15 * np.maximum(1.0, col))[0]
    if bad.size:
        j = int(bad[0])
        raise ValueError(f"weight condition fails in column {j}: omega_j={w[j]} < sum_i Q_ij={col[j]}")


def build_structured_map(spec: StructuredMapSpec) -> ConeMapOracle:
    """Assemble the stacked map and certify it for the nu-norm cone."""
    variant = spec.variant.lower()
    if variant not in ("i", "ii", "iii"):
        raise ValueError(f"unknown variant {spec.variant!r}")
    gs: List[SmoothOracle] = list(spec.g) if variant in ("i", "iii") else []
    l = len(gs)
    n = spec.n
    if n is None:
        if gs:
            n = gs[0].dim
        elif spec.g0 is not None:
            n = spec.g0.dim
        elif spec.affine is not None:
            n = np.atleast_2d(spec.affine[0]).shape[1]
        else:
            raise ValueError("cannot infer the input dimension")
    if variant in ("i", "iii"):
        Q = np.atleast_2d(np.asarray(spec.Q, dtype=float)).reshape(-1, l) if l else np.zeros((0, 0))
        w = np.asarray(spec.omega_weights, dtype=float).reshape(l)
        _check_weights(Q, w)
        mq = Q.shape[0]
    else:
        Q, w, mq = np.zeros((0, 0)), np.zeros(0), 0
    if variant in ("ii", "iii"):
        if spec.affine is None:
            raise ValueError(f"variant {variant} needs an affine part (A, b)")
        A = np.atleast_2d(np.asarray(spec.affine[0], dtype=float))
        b = np.asarray(spec.affine[1], dtype=float).reshape(A.shape[0])
        if A.shape[1] != n:
            raise DimensionMismatch("affine block has the wrong number of columns")
    else:
        A, b = np.zeros((0, n)), np.zeros(0)
    for gj in gs:
        if gj.dim != n:
            raise DimensionMismatch("component dimensions differ")

    g0 = spec.g0
    g0_smooth = isinstance(g0, SmoothOracle)
    g0_l1 = isinstance(g0, NonsmoothOracle) and g0.tag == "l1"
    if isinstance(g0, NonsmoothOracle) and g0.tag not in ("zero", "l1"):
        raise ValueError("a nonsmooth g0 must be tagged zero or l1")
    ma = A.shape[0]
    m = 1 + mq + ma

    def omega(u):
        gv = np.array([gj.value(u) for gj in gs]) if l else np.zeros(0)
        top = float(w @ gv) + (g0.value(u) if g0_smooth else 0.0)
        return np.concatenate(([top], Q @ gv if l else np.zeros(mq), A @ u - b))

    def omega_jt(u, p):
        p0, pq, pa = p[0], p[1:1 + mq], p[1 + mq:]
        out = A.T @ pa if ma else np.zeros(n)
        if l:
            coef = p0 * w + (Q.T @ pq if mq else 0.0)
            for cj, gj in zip(coef, gs):
                if cj != 0.0:
                    out = out + cj * gj.gradient(u)
        if g0_smooth:
            out = out + p0 * g0.gradient(u)
        return out

    def omega_remainder(u, v, p):
        p0, pq = p[0], p[1:1 + mq]
        coef = p0 * w + (Q.T @ pq if mq else 0.0) if l else np.zeros(0)
        total = sum(cj * gj.bregman(u, v) for cj, gj in zip(coef, gs))
        if g0_smooth:
            total += p0 * g0.bregman(u, v)
        return float(total)

    bj = np.array([gj.lipschitz_grad if gj.lipschitz_grad is not None else np.nan for gj in gs])
    comps = None
    if not np.any(np.isnan(bj)) and (not g0_smooth or g0.lipschitz_grad is not None):
        top = float(w @ bj) + (g0.lipschitz_grad if g0_smooth else 0.0)
        comps = [top] + list(Q @ bj if l else np.zeros(mq)) + [0.0] * ma

    kw = {}
    if g0_l1:
        W = np.zeros((m, n))
        W[0] = g0.weight
        kw = dict(phi_tag="separable-l1", W=W)
    cone = NormCone(spec.nu, m)
    return ConeMapOracle(
        n, m, omega=omega, omega_jt=omega_jt, omega_remainder=omega_remainder,
        b_omega_components=comps, certificate=cone, name=f"structured-{variant}", **kw,
    )


# ---------------------------------------------------------------------------
# SEN-SVM


@dataclass
class SenSvmInstance:
    A: np.ndarray
    Q: np.ndarray
    u_star: np.ndarray
    b: np.ndarray
    alpha: float
    delta: float
    seed: Optional[int] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def q_norm(self):
        if "qn" not in self._cache:
            self._cache["qn"] = spectral_norm(self.Q)
        return self._cache["qn"]

    @property
    def a_norm_sq(self):
        if "an" not in self._cache:
            self._cache["an"] = spectral_norm(self.A) ** 2
        return self._cache["an"]

    @property
    def M1(self):
        """Dual bound used for formulation I: ||b||^2/(2 delta) + 1."""
        return float(self.b @ self.b) / (2 * self.delta) + 1.0

    @property
    def M2(self):
        """Dual bound used for formulation C: sqrt(n+1) ||b||^2/(2 delta) + 1."""
        return np.sqrt(self.n + 1) * float(self.b @ self.b) / (2 * self.delta) + 1.0

    def objective(self, u):
        r = self.A @ u - self.b
        return 0.5 * float(r @ r)

    def constraint(self, u):
        """alpha ||u||_1 + (1 - alpha) u^T Q u - delta."""
        return (self.alpha * float(np.abs(u).sum())
                + (1 - self.alpha) * float(u @ (self.Q @ u)) - self.delta)

    def tau_on_ball(self, radius, formulation):
        """Lipschitz constant of Theta on the ball of the given radius."""
        c = 2 * (1 - self.alpha) * self.q_norm * radius
        if formulation == "I":
            return c + self.alpha * np.sqrt(self.n)
        return float(np.sqrt(c * c + self.alpha ** 2))

    def _g(self):
        return SmoothOracle.least_squares(self.A, self.b)

    def problem_I(self, tau=None):
        a, Q, dl = self.alpha, self.Q, self.delta
        n = self.n
        om = ConeMapOracle(
            n, 1,
            omega=lambda u: np.array([(1 - a) * float(u @ (Q @ u)) - dl]),
            omega_jt=lambda u, p: (2 * (1 - a) * p[0]) * (Q @ u),
            omega_remainder=lambda u, v, p: p[0] * (1 - a) * float((v - u) @ (Q @ (v - u))),
            phi_tag="separable-l1", W=np.full((1, n), a), c=np.zeros(1),
            b_omega_components=[2 * (1 - a) * self.q_norm], tau=tau,
            certificate=NonnegOrthant(1), name="sensvm-I",
        )
        ref = Reference(self.u_star, np.zeros(1), 0.0)
        return NccpProblem(self._g(), NonsmoothOracle.zero(n), om, NonnegOrthant(1),
                           reference=ref, name="sensvm-I")

    def problem_C(self, tau=None):
        a, Q, dl = self.alpha, self.Q, self.delta
        n = self.n

        def omega(u):
            return np.concatenate(([(1 - a) * float(u @ (Q @ u)) - dl], a * u))

        om = ConeMapOracle(
            n, n + 1,
            omega=omega,
            omega_jt=lambda u, p: (2 * (1 - a) * p[0]) * (Q @ u) + a * p[1:],
            omega_remainder=lambda u, v, p: p[0] * (1 - a) * float((v - u) @ (Q @ (v - u))),
            b_omega_components=[2 * (1 - a) * self.q_norm] + [0.0] * n, tau=tau,
            certificate=NormCone(1, n + 1), name="sensvm-C",
        )
        ref = Reference(self.u_star, np.zeros(n + 1), 0.0)
        return NccpProblem(self._g(), NonsmoothOracle.zero(n), om, NormCone(1, n + 1),
                           reference=ref, name="sensvm-C")

    def structured_spec_C(self):
        """The formulation-C map as a stacked-map spec (variant ii: quadratic head, affine rows)."""
        a, Q, dl = self.alpha, self.Q, self.delta
        g0 = SmoothOracle.quadratic(2 * (1 - a) * Q, const=-dl)
        return StructuredMapSpec(g0=g0, affine=(a * np.eye(self.n), np.zeros(self.n)),
                                 variant="ii", nu=1, n=self.n)

    def to_dict(self):
        return {
            "A": self.A.tolist(), "Q": self.Q.tolist(), "u_star": self.u_star.tolist(),
            "b": self.b.tolist(), "alpha": self.alpha, "delta": self.delta, "seed": self.seed,
        }


def gen_sen_svm(m, n, s, alpha, seed) -> SenSvmInstance:
    """Random instance: A, B with N(0,1) entries, Q = B^T B + 1e-10 I,
    u* with s nonzero N(0,1) entries at random positions, b = A u*."""
    if not (m >= 1 and n >= 1 and 1 <= s <= n):
        raise ValueError(f"invalid dimensions m={m}, n={n}, s={s}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    B = rng.standard_normal((n, n))
    Q = B.T @ B + 1e-10 * np.eye(n)
    u = np.zeros(n)
    idx = rng.choice(n, size=s, replace=False)
    u[idx] = rng.standard_normal(s)
    b = A @ u
    delta = alpha * float(np.abs(u).sum()) + (1 - alpha) * float(u @ (Q @ u))
    return SenSvmInstance(A, Q, u, b, float(alpha), float(delta), seed)


# ---------------------------------------------------------------------------
# closed-form VAPP-M updates


def _proj_linf_ball(v, M):
    p = _proj_linf_cone(v)
    nrm = float(np.sqrt(p @ p))
    return p * (M / nrm) if nrm > M else p


def sen_svm_closed_form_updates(instance: SenSvmInstance, state: SolverState, config: SolverConfig,
                                formulation="C"):
    """One VAPP-M step with the explicit SEN-SVM formulas.

    Formulation I uses q1 = min(M, max(0, p + gamma Theta(u))) and
    u+ = argmin alpha q1 ||u||_1 + ||u - (u - eps zeta1)||^2/(2 eps), i.e.
    soft-thresholding with threshold eps alpha q1; this form stays valid
    at q1 = 0.  Formulation C is a plain gradient step
    u+ = u - eps zeta2.
    """
    M = config.dual_bound
    if M is None:
        M = instance.M1 if formulation == "I" else instance.M2
    gamma, eps = config.gamma, state.eps_k
    A, b, Q, a, dl = instance.A, instance.b, instance.Q, instance.alpha, instance.delta
    u, p = state.u, state.p
    Qu = Q @ u
    res = A.T @ (A @ u - b)
    if formulation == "I":
        th0 = a * float(np.abs(u).sum()) + (1 - a) * float(u @ Qu) - dl
        q = np.array([min(M, max(0.0, p[0] + gamma * th0))])
        zeta = res + 2 * (1 - a) * q[0] * Qu
        u1 = soft_threshold(u - eps * zeta, eps * a * q[0])
        th1 = a * float(np.abs(u1).sum()) + (1 - a) * float(u1 @ (Q @ u1)) - dl
        p1 = np.array([min(M, max(0.0, p[0] + gamma * th1))])
        theta0, theta1 = np.array([th0]), np.array([th1])
    elif formulation == "C":
        theta0 = np.concatenate(([(1 - a) * float(u @ Qu) - dl], a * u))
        q = _proj_linf_ball(p + gamma * theta0, M)
        zeta = res + 2 * (1 - a) * q[0] * Qu + a * q[1:]
        u1 = u - eps * zeta
        theta1 = np.concatenate(([(1 - a) * float(u1 @ (Q @ u1)) - dl], a * u1))
        p1 = _proj_linf_ball(p + gamma * theta1, M)
    else:
        raise ValueError("formulation must be 'I' or 'C'")
    return SolverState(
        k=state.k + 1, u=u1, p=p1, q=q, eps_k=eps,
        ergodic_u_num=state.ergodic_u_num + eps * u1,
        ergodic_p_num=state.ergodic_p_num + eps * q,
        ergodic_wsum=state.ergodic_wsum + eps,
        u_prev=u, p_prev=p,
    )


@dataclass
class SenSvmRun:
    formulation: str
    u: np.ndarray
    p: np.ndarray
    u_bar: np.ndarray
    iterations: int
    status: str
    trace: list
    step_time_s: float
    eps: float

    @property
    def mean_step_time(self):
        return self.step_time_s / max(self.iterations, 1)


def run_sen_svm(instance: SenSvmInstance, formulation, gamma, eps0, dual_bound=None,
                max_iter=50000, tol_feas=1e-5, tol_obj=1e-5, eps_mode="fixed", eta=0.5,
                stop_on="last", timing=False, record_every=1):
    """Fast VAPP-M loop for SEN-SVM.

    Each iteration costs one product with the stacked matrix [A^T A; Q]
    (its halves give the gradient and the quadratic form at the new
    iterate) plus O(n) work; Q u is carried across iterations.  In
    formulation I the multiplier is a scalar and the shrinkage is skipped
    when q1 = 0.  With ``eps_mode="backtracking"`` eps shrinks by ``eta``
    until the step certificate Delta >= 0, evaluated in closed form.

    Only the update itself is timed (``step_time_s``); trace metrics are
    excluded.
    """
    from .analysis import TraceRecord

    if formulation not in ("I", "C"):
        raise ValueError("formulation must be 'I' or 'C'")
    if eps_mode not in ("fixed", "backtracking"):
        raise ConfigError(f"unknown eps_mode {eps_mode!r}")
    if stop_on not in ("last", "ergodic"):
        raise ConfigError(f"unknown stop_on {stop_on!r}")
    if not (gamma > 0 and eps0 > 0):
        raise ConfigError("gamma and eps0 must be positive")
    inst = instance
    M = dual_bound if dual_bound is not None else (inst.M1 if formulation == "I" else inst.M2)
    A, b, Q, a, dl = inst.A, inst.b, inst.Q, inst.alpha, inst.delta
    n = inst.n
    AtA = A.T @ A
    Atb = A.T @ b
    S = np.vstack([AtA, Q])
    bb = float(b @ b)
    c2 = 2 * (1 - a)
    backtrack = eps_mode == "backtracking"

    u = np.zeros(n)
    Qu = np.zeros(n)
    AtAu = np.zeros(n)
    u_num = np.zeros(n)
    wsum = 0.0
    eps = float(eps0)
    trace = []
    status = "max_iter"
    step_time = 0.0
    t_start = time.perf_counter()

    if formulation == "I":
        p = 0.0
        theta = -dl

        def theta_vec(uv, quad):
            return np.array([a * float(np.abs(uv).sum()) + (1 - a) * quad - dl])
    else:
        p = np.zeros(n + 1)
        theta = np.concatenate(([-dl], a * u))

        def theta_vec(uv, quad):
            out = np.empty(n + 1)
            out[0] = (1 - a) * quad - dl
            out[1:] = a * uv
            return out

    def delta_cert(d, dAtA, dQ, q0, dth):
        # ||d||^2/2 - eps [||A d||^2/2 + q0 (1-a) d^T Q d + gamma/2 ||dTheta||^2]
        return 0.5 * float(d @ d) - eps * (0.5 * float(d @ dAtA) + q0 * (1 - a) * float(d @ dQ)
                                           + 0.5 * gamma * dth)

    k = 0
    for k in range(1, max_iter + 1):
        t0 = time.perf_counter()
        grad = AtAu - Atb
        if formulation == "I":
            q = min(M, max(0.0, p + gamma * theta))
            zeta = grad + (c2 * q) * Qu if q > 0 else grad
            while True:
                v = u - eps * zeta
                u1 = soft_threshold(v, eps * a * q) if q > 0 else v
                SU = S @ u1
                AtAu1, Qu1 = SU[:n], SU[n:]
                theta1 = a * float(np.abs(u1).sum()) + (1 - a) * float(u1 @ Qu1) - dl
                if not backtrack:
                    break
                d = u1 - u
                dth = (theta - theta1) ** 2
                if delta_cert(d, AtAu1 - AtAu, Qu1 - Qu, q, dth) >= 0:
                    break
                eps *= eta
                if eps < 1e-300:
                    raise ConfigError("backtracking collapsed eps to zero")
            p = min(M, max(0.0, p + gamma * theta1))
        else:
            q = _proj_linf_ball(p + gamma * theta, M)
            zeta = grad + (c2 * q[0]) * Qu + a * q[1:]
            while True:
                u1 = u - eps * zeta
                SU = S @ u1
                AtAu1, Qu1 = SU[:n], SU[n:]
                theta1 = np.empty(n + 1)
                theta1[0] = (1 - a) * float(u1 @ Qu1) - dl
                theta1[1:] = a * u1
                if not backtrack:
                    break
                d = u1 - u
                dv = theta - theta1
                if delta_cert(d, AtAu1 - AtAu, Qu1 - Qu, q[0], float(dv @ dv)) >= 0:
                    break
                eps *= eta
                if eps < 1e-300:
                    raise ConfigError("backtracking collapsed eps to zero")
            p = _proj_linf_ball(p + gamma * theta1, M)
        u, Qu, AtAu, theta = u1, Qu1, AtAu1, theta1
        u_num += eps * u1
        wsum += eps
        step_time += time.perf_counter() - t0

        # metrics at the new iterate; ||Au-b||^2/2 = u^T AtA u/2 - Atb^T u + b^T b/2
        obj = max(0.5 * float(u @ AtAu) - float(Atb @ u) + 0.5 * bb, 0.0)
        th_vec = np.array([theta]) if formulation == "I" else theta
        feas = float(np.linalg.norm(proj_dual_full(th_vec, formulation)))
        record = bool(record_every) and k % record_every == 0
        if record or stop_on == "ergodic":
            ub = u_num / wsum
            obj_b = inst.objective(ub)
            feas_b = float(np.linalg.norm(proj_dual_full(theta_vec(ub, float(ub @ (Q @ ub))),
                                                         formulation)))
        if record:
            trace.append(TraceRecord(
                iter=k, wall_time_s=(time.perf_counter() - t_start) if timing else None,
                obj=obj, obj_ergodic=obj_b, feas=feas, feas_ergodic=feas_b,
                dual_norm=float(np.linalg.norm(p)), eps_k=eps,
            ))
        if stop_on == "last":
            done = feas <= tol_feas and obj <= tol_obj
        else:
            done = feas_b <= tol_feas and obj_b <= tol_obj
        if done:
            status = "converged"
            break
    p_arr = np.array([p]) if formulation == "I" else p
    return SenSvmRun(formulation, u, p_arr, u_num / max(wsum, 1e-300), k, status, trace,
                     step_time, eps)


def proj_dual_full(theta, formulation):
    """Projection onto the (unbounded) dual cone, for the feasibility residual."""
    if formulation == "I":
        return np.maximum(theta, 0.0)
    return _proj_linf_cone(theta)

"""Forward-backward splitting view of the VAPP iteration.

The saddle-point conditions of the augmented Lagrangian are written as
0 in A(w) + B(w) with w = (u, p),

    A(w) = (dJ(u) + N_U(u); 0),
    B(w) = (grad G(u) + (grad Omega(u) + grad Phi(u))^T Pi(p + gamma Theta(u));
            -(Pi(p + gamma Theta(u)) - p) / gamma),

and the iteration-dependent operator anchored at w^k

    Gamma^k(w) = (grad K(u)/eps + grad Phi(u)^T q^k;  (p - Pi(p^k + gamma Theta(u))) / gamma),

with q^k = Pi(p^k + gamma Theta(u^k)).  The step
w^{k+1} = (Gamma^k + A)^{-1} (Gamma^k - B) w^k reproduces VAPP.  This
module exists to verify that equivalence; it is not a second solver.
Phi must be differentiable (zero, affine or custom smooth).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import DualProjector
from .errors import IncompatibleOracle
from .lagrangian import PrimalDual
from .vapp import SolverState, _solve_linearized, delta_k

__all__ = ["OperatorEval", "op_B", "gamma_op", "fbs_step"]


@dataclass
class OperatorEval:
    primal_part: np.ndarray
    dual_part: np.ndarray

    def dot(self, w: PrimalDual):
        return float(self.primal_part @ w.u + self.dual_part @ w.p)


def _require_smooth_phi(problem):
    if not problem.theta.phi_smooth:
        raise IncompatibleOracle(f"Phi tag {problem.theta.phi_tag!r} is not differentiable")


def op_B(problem, w: PrimalDual, gamma, proj=None):
    _require_smooth_phi(problem)
    if proj is None:
        proj = DualProjector(problem.cone)
    z = proj(w.p + gamma * problem.theta.value(w.u))
    primal = problem.g.gradient(w.u) + problem.theta.jt(w.u, z)
    dual = -(z - w.p) / gamma
    return OperatorEval(primal, dual)


def gamma_op(problem, w: PrimalDual, w_anchor: PrimalDual, eps_k, gamma, proj=None):
    _require_smooth_phi(problem)
    if proj is None:
        proj = DualProjector(problem.cone)
    th = problem.theta
    q = proj(w_anchor.p + gamma * th.value(w_anchor.u))
    primal = problem.core.grad(w.u) / eps_k + th.phi_jt(w.u, q)
    dual = (w.p - proj(w_anchor.p + gamma * th.value(w.u))) / gamma
    return OperatorEval(primal, dual)


def fbs_step(problem, state: SolverState, config, proj=None):
    """w^{k+1} = (Gamma^k + A)^{-1} (Gamma^k - B) w^k.

    The forward part r = Gamma^k(w^k) - B(w^k) is evaluated from the two
    operators.  The backward part solves Gamma^k(w) + A(w) ∋ r: its
    primal block is the minimisation of
    K(u)/eps + <q^k, Phi(u)> + J(u) - <r_u, u> over U, its dual block is
    p = gamma r_p + Pi(p^k + gamma Theta(u^{k+1})).
    """
    _require_smooth_phi(problem)
    if proj is None:
        proj = DualProjector(problem.cone, config.dual_bound)
    gamma, eps = config.gamma, state.eps_k
    wk = PrimalDual(state.u, state.p)
    G = gamma_op(problem, wk, wk, eps, gamma, proj)
    B = op_B(problem, wk, gamma, proj)
    r_u = G.primal_part - B.primal_part
    r_p = G.dual_part - B.dual_part
    th = problem.theta
    theta0 = th.value(state.u)
    q = proj(state.p + gamma * theta0)
    # K(u)/eps - <r_u, u> = D(u, u^k)/eps + <grad K(u^k)/eps - r_u, u> + const
    lin = problem.core.grad(state.u) / eps - r_u
    u1 = _solve_linearized(problem, lin, q, state.u, eps, config.resolved_inner_tol,
                           config.force_generic)
    theta1 = th.value(u1)
    p1 = gamma * r_p + proj(state.p + gamma * theta1)
    delta = delta_k(problem, state.u, u1, q, eps, gamma, config.dual_bound, theta0, theta1)
    return SolverState(
        k=state.k + 1, u=u1, p=p1, q=q, eps_k=eps,
        ergodic_u_num=state.ergodic_u_num + eps * u1,
        ergodic_p_num=state.ergodic_p_num + eps * q,
        ergodic_wsum=state.ergodic_wsum + eps,
        u_prev=state.u, p_prev=state.p, delta=delta,
    )

"""Lagrangian, augmented Lagrangian and the penalty kernel phi."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._inner import fista, prox_j_on_set
from .cones import ConeSpec, as_vec
from .errors import IncompatibleOracle
from .oracles import NonsmoothOracle

__all__ = ["PrimalDual", "lagrangian", "phi", "aug_lagrangian", "dual_value_approx"]


@dataclass
class PrimalDual:
    u: np.ndarray
    p: np.ndarray


def lagrangian(problem, u, p):
    """L(u, p) = G(u) + J(u) + <p, Theta(u)>."""
    u = as_vec(u, problem.n, "u")
    p = as_vec(p, problem.m, "p")
    return problem.objective(u) + float(p @ problem.theta_value(u))


def _phi(theta, p, gamma, dual):
    z = dual._project(p + gamma * theta)
    return (float(z @ z) - float(p @ p)) / (2.0 * gamma)


def phi(theta, p, gamma, cone: ConeSpec):
    """Penalty kernel [||Pi(p + gamma theta)||^2 - ||p||^2] / (2 gamma).

    Equals max_{q in C*} <q, theta> - ||q - p||^2 / (2 gamma).
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    theta = as_vec(theta, cone.dim, "theta")
    p = as_vec(p, cone.dim, "p")
    return _phi(theta, p, float(gamma), cone.dual())


def aug_lagrangian(problem, u, p, gamma):
    """L_gamma(u, p) = G(u) + J(u) + phi(Theta(u), p)."""
    u = as_vec(u, problem.n, "u")
    return problem.objective(u) + phi(problem.theta_value(u), p, gamma, problem.cone)


def dual_value_approx(problem, p, gamma, inner_tol=1e-10, u0=None, max_iter=50000):
    """Approximate psi_gamma(p) = min_{u in U} L_gamma(u, p).

    The minimisation runs the accelerated proximal gradient solver with J
    (and the indicator of U) in the prox step.  Phi must be
    differentiable.

    Returns
    -------
    value : float
    u_hat : ndarray
    residual : float
        Final gradient-mapping norm of the inner solve.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not inner_tol > 0:
        raise ValueError("inner_tol must be positive")
    th = problem.theta
    if not th.phi_smooth:
        raise IncompatibleOracle("psi_gamma needs a differentiable Phi")
    p = as_vec(p, problem.m, "p")
    dual = problem.cone.dual()
    g, j = problem.g, problem.j
    smooth_j = j.tag == "quadratic"

    def f(u):
        val = g.value(u) + _phi(th.value(u), p, gamma, dual)
        if smooth_j:
            val += j.value(u)
        return val

    def grad(u):
        z = dual._project(p + gamma * th.value(u))
        out = g.gradient(u) + th.jt(u, z)
        if smooth_j:
            out = out + j.matrix @ u
        return out

    jp = NonsmoothOracle.zero(problem.n) if smooth_j else j

    def prox(v, t):
        return prox_j_on_set(jp, problem.set, v, t)

    x0 = np.zeros(problem.n) if u0 is None else as_vec(u0, problem.n, "u0")
    L0 = (g.lipschitz_grad or 1.0) + gamma * (th.tau or 1.0) ** 2
    u_hat, res, _ = fista(f, grad, prox, problem.set.project(x0), tol=inner_tol,
                          max_iter=max_iter, L0=L0)
    value = problem.objective(u_hat) + _phi(th.value(u_hat), p, gamma, dual)
    return value, u_hat, res

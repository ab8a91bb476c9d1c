"""Accelerated proximal gradient used when a subproblem has no closed form."""
from __future__ import annotations

import numpy as np

from .errors import IncompatibleOracle, InnerSolverError
from .oracles import FeasibleSet, NonsmoothOracle


def _prox_block(j: NonsmoothOracle, U: FeasibleSet, v, t):
    if U.kind == "full":
        return j.prox(v, t)
    if j.tag == "zero":
        return U.project(v)
    if U.kind == "box" and j.separable:
        # one-dimensional convex pieces: clip the unconstrained minimiser
        return np.clip(j.prox(v, t), U.lo, U.hi)
    raise IncompatibleOracle(f"no prox for J={j.tag!r} restricted to a {U.kind} set")


def prox_j_on_set(j: NonsmoothOracle, U: FeasibleSet, v, t):
    """argmin_{x in U} J(x) + ||x - v||^2 / (2t) for the supported combinations."""
    if U.kind != "product":
        return _prox_block(j, U, v, t)
    if not (j.separable or j.tag == "zero"):
        raise IncompatibleOracle(f"J={j.tag!r} does not split over the blocks of U")
    out = np.empty_like(v)
    for blk, sl in zip(U.blocks, U.block_slices()):
        idx = np.arange(sl.start, sl.stop)
        out[sl] = prox_j_on_set(j.subset(idx), blk, v[sl], t)
    return out


def fista(f, grad, prox, x0, tol=1e-10, max_iter=20000, L0=1.0, raise_on_cap=True):
    """Minimise f + h by FISTA with backtracking and adaptive restart.

    Parameters
    ----------
    f, grad : callables for the smooth part
    prox : callable ``prox(v, t)`` of the nonsmooth part
    tol : float
        Stop once the gradient mapping ||x - prox(x - grad(x)/L)|| * L
        falls below ``tol``.

    Returns
    -------
    x, residual, iterations
    """
    x = np.array(x0, dtype=float, copy=True)
    y = x.copy()
    L = float(L0)
    theta = 1.0
    fx = f(x)
    res = np.inf
    for it in range(1, max_iter + 1):
        gy = grad(y)
        fy = f(y)
        while True:
            x_new = prox(y - gy / L, 1.0 / L)
            d = x_new - y
            if f(x_new) <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-15 * max(1.0, abs(fy)):
                break
            L *= 2.0
            if L > 1e20:
                raise InnerSolverError("step-size search diverged in the inner solver")
        # gradient-mapping residual at y; certifies near-stationarity of x_new
        res = L * float(np.sqrt(d @ d))
        f_new = f(x_new)
        if res <= tol:
            return x_new, res, it
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        if f_new > fx:
            # restart momentum
            y = x_new.copy()
            theta_new = 1.0
        else:
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, fx, theta = x_new, f_new, theta_new
        L = max(L * 0.9, 1e-12)
    if raise_on_cap:
        raise InnerSolverError(f"inner solver hit {max_iter} iterations (residual {res:.3e})")
    return x, res, max_iter

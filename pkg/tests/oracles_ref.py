"""Independent reference solvers used only by the tests.

None of these share code with the package: polyhedral cone projections
go through NNLS on the cone's generators, the second-order cone through
a reduced one-dimensional root solve (with an interior-point QP as a
looser second opinion), and intersections through Dykstra's alternating
projections.
"""
import itertools

import numpy as np
from scipy.optimize import brentq, nnls


def _generators(nu, k):
    """Extreme rays of the epigraph cone of the nu-norm on R^k (nu in {1, inf})."""
    rows = []
    if nu == 1:
        for i in range(k):
            for s in (1.0, -1.0):
                r = np.zeros(k + 1)
                r[0] = 1.0
                r[1 + i] = s
                rows.append(r)
    else:
        for signs in itertools.product((1.0, -1.0), repeat=k):
            rows.append(np.concatenate(([1.0], signs)))
    return np.array(rows)


def nnls_norm_cone(nu, x):
    """Projection onto K_nu (nu in {1, inf}) as min ||G^T lam - x||, lam >= 0."""
    x = np.asarray(x, float)
    G = _generators(nu, x.size - 1)
    lam, _ = nnls(G.T, x, maxiter=50 * G.shape[0])
    return G.T @ lam


def qp_soc(x):
    """Projection onto the second-order cone through a conic QP (accurate to ~1e-5)."""
    import cvxpy as cp

    x = np.asarray(x, float)
    y = cp.Variable(x.size)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - x)), [cp.SOC(y[0], y[1:])])
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(y.value)


def nested_soc(x):
    """Projection onto the second-order cone by a reduced 1-D solve.

    For a fixed height s the best xbar-part is the radial clip of xbar to
    the s-ball, leaving f(s) = (s - t)^2 + (r - s)_+^2 over s >= 0.  Its
    derivative is monotone, so the minimiser is found by bracketing.
    """
    x = np.asarray(x, float)
    t, xb = x[0], x[1:]
    r = np.linalg.norm(xb)

    def df(s):
        return (s - t) - max(r - s, 0.0)

    if df(0.0) >= 0:
        s = 0.0
    else:
        hi = 1.0 + abs(t) + r
        s = brentq(df, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    yb = xb if r <= s else xb * (s / r)
    return np.concatenate(([s], yb))


def qp_norm_cone(nu, x):
    if nu == 2:
        return nested_soc(x)
    return nnls_norm_cone(nu, x)


def dykstra(proj_a, proj_b, x, iters=20000, tol=1e-14):
    """Projection onto the intersection of two convex sets."""
    y = np.asarray(x, float).copy()
    p = np.zeros_like(y)
    q = np.zeros_like(y)
    for _ in range(iters):
        z = proj_a(y + p)
        p = y + p - z
        y_new = proj_b(z + q)
        q = z + q - y_new
        if np.linalg.norm(y_new - y) < tol:
            y = y_new
            break
        y = y_new
    return y


def ball(M):
    def proj(v):
        n = np.linalg.norm(v)
        return v if n <= M else v * (M / n)
    return proj

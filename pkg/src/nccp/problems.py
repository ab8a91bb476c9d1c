"""Instance library with exactly known saddle points.

Most instances are *planted*: a primal point u*, a complementary pair
(Theta(u*), p*) and the linear term of G are chosen so that the KKT
conditions hold by construction.  Complementary pairs come from the
Moreau decomposition z = Pi_C(z) + Pi_{-C*}(z): with x = Pi_C(z) and
p* = x - z one has x in C, p* in C* and <x, p*> = 0, so
Theta(u*) = -x is feasible and complementary to p*.
"""
from __future__ import annotations

import numpy as np

from .cones import ConeSpec, NonnegOrthant, NormCone, Product, Zero
from .oracles import ConeMapOracle, NccpProblem, NonsmoothOracle, Reference, SmoothOracle
from .structured import gen_sen_svm

__all__ = [
    "one_dim",
    "complementary_pair",
    "planted",
    "linear_qp",
    "l1_least_squares",
    "equality_qp",
    "strong_suite",
    "convex_suite",
    "sen_svm_desk",
    "slater_instance",
    "quadratic_lower_bound",
    "random_smooth_instance",
]


def one_dim(as_phi=False):
    """G = u^2/2, J = 0, Theta(u) = u - 1, C = {0}; saddle point (1, -1)."""
    theta = ConeMapOracle.affine(np.ones((1, 1)), np.ones(1), as_phi=as_phi)
    return NccpProblem(SmoothOracle.quadratic(np.eye(1)), NonsmoothOracle.zero(1), theta, Zero(1),
                       reference=Reference(np.ones(1), -np.ones(1), 0.5), name="one_dim")


def complementary_pair(cone: ConeSpec, z):
    """(x, p) with x in C, p in C*, <x, p> = 0, from z = x - p."""
    x = cone.project(z)
    return x, x - z


def planted(n, cone: ConeSpec, seed, rank=None, mu=0.0, l1=0.0, sparsity=None, affine_in="phi",
            interior_at_zero=False, name="planted"):
    """Planted instance  min u^T P u/2 + c^T u + l1 ||u||_1  s.t.  A u - b in -C.

    Parameters
    ----------
    rank : int, optional
        Rank of the PSD part R^T R of P (default n).
    mu : float
        Ridge added to P, the strong convexity modulus when ``rank < n``.
    l1 : float
        Weight of the l1 term J.
    sparsity : int, optional
        Number of nonzeros of u* (default n).
    affine_in : {"phi", "omega"}
        Where the affine map is placed.
    interior_at_zero : bool
        Shift A so that u = 0 is strictly feasible (Slater point).
    """
    rng = np.random.default_rng(seed)
    m = cone.dim
    rank = n if rank is None else rank
    R = rng.standard_normal((rank, n)) / np.sqrt(max(n, 1))
    P = R.T @ R + mu * np.eye(n)
    A = rng.standard_normal((m, n)) / np.sqrt(n)
    u = rng.standard_normal(n)
    if sparsity is not None:
        u[rng.permutation(n)[sparsity:]] = 0.0
    x, p = complementary_pair(cone, rng.standard_normal(m))
    if interior_at_zero:
        # A <- A + (w - A u) u^T/||u||^2 so that A u = w, with w deep inside C
        w = np.zeros(m)
        for blk, off in zip(_blocks(cone), _offsets(cone)):
            if isinstance(blk, NonnegOrthant):
                w[off:off + blk.dim] = 2.0 + np.abs(x[off:off + blk.dim]).max(initial=0.0)
            elif isinstance(blk, NormCone):
                w[off] = 2.0 + 2 * np.sqrt(blk.dim) * np.abs(x[off:off + blk.dim]).max()
            else:
                raise ValueError("Slater instances need orthant or norm-cone blocks")
        A = A + np.outer(w - A @ u, u) / float(u @ u)
    b = A @ u + x
    s = np.sign(u)
    off_support = u == 0
    s[off_support] = rng.uniform(-0.5, 0.5, off_support.sum())
    c = -(P @ u) - A.T @ p - l1 * s
    g = SmoothOracle.quadratic(P, c)
    j = NonsmoothOracle.l1(n, l1) if l1 > 0 else NonsmoothOracle.zero(n)
    theta = ConeMapOracle.affine(A, b, as_phi=(affine_in == "phi"))
    opt = g.value(u) + j.value(u)
    return NccpProblem(g, j, theta, cone, reference=Reference(u, p, opt), name=name)


def _blocks(cone):
    return list(cone.blocks) if isinstance(cone, Product) else [cone]


def _offsets(cone):
    return list(cone.offsets) if isinstance(cone, Product) else [0]


def linear_qp(seed=0, n=8):
    """Convex (rank-deficient) QP with equality and inequality rows."""
    cone = Product([Zero(2), NonnegOrthant(4)])
    return planted(n, cone, seed, rank=n // 2, name="linear_qp")


def l1_least_squares(seed=0, n=10):
    """l1-regularized convex quadratic with orthant constraints and a sparse solution."""
    return planted(n, NonnegOrthant(4), seed, rank=n - 2, l1=0.3, sparsity=n // 2,
                   name="l1_least_squares")


def equality_qp(seed=0, n=6, m=3, mu=0.5):
    """Strongly convex G with equality constraints A u = b."""
    return planted(n, Zero(m), seed, rank=n, mu=mu, name="equality_qp")


def strong_suite(seed=0):
    """Three strongly convex instances with known saddle points."""
    return [
        one_dim(),
        planted(5, Product([Zero(1), NormCone(2, 3)]), seed, mu=0.5, name="strong_soc"),
        planted(6, Product([NonnegOrthant(3), Zero(2)]), seed + 1, mu=0.5, name="strong_orthant"),
    ]


def sen_svm_desk(seed=7, m=20, n=100, s=3, alpha=0.4, radius_factor=2.0):
    """The desk-scale SEN-SVM instance in cone form, with tau on a ball.

    Theta is quadratic, hence only locally Lipschitz; tau is its constant
    on the ball of radius ``radius_factor * ||u*||``, which contains the
    iterates of the runs used here (checked by the tests).
    """
    inst = gen_sen_svm(m, n, s, alpha, seed)
    r = radius_factor * float(np.linalg.norm(inst.u_star))
    return inst, inst.problem_C(tau=inst.tau_on_ball(r, "C"))


def convex_suite(seed=0):
    return [linear_qp(seed), l1_least_squares(seed), sen_svm_desk()[1]]


def slater_instance(kind, seed, n=6, m=4):
    """Planted instance with u = 0 strictly feasible.

    ``kind`` is ``"orthant"`` or a nu value for the norm cone K_nu^{m}.
    """
    if kind == "orthant":
        cone = NonnegOrthant(m)
    else:
        cone = NormCone(kind, m)
    return planted(n, cone, seed, mu=0.2, interior_at_zero=True, name=f"slater_{kind}")


def quadratic_lower_bound(problem):
    """min_u u^T P u/2 + c^T u for a strongly convex quadratic G (J >= 0 assumed)."""
    P = problem.g.hessian
    c = problem.g.gradient(np.zeros(problem.n))
    const = problem.g.value(np.zeros(problem.n))
    return float(const - 0.5 * c @ np.linalg.solve(P, c))


def random_smooth_instance(seed, n=None, m=None):
    """Small planted instance with differentiable Phi.

    The affine map sits in Omega or Phi at random; orthant instances get
    an extra inactive quadratic row ||u - u*||^2/2 - 1 in Omega.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7)) if n is None else n
    kind = int(rng.integers(0, 4))
    mm = int(rng.integers(2, 5)) if m is None else m
    cone = [Zero(mm), NonnegOrthant(mm), NormCone(2, mm + 1),
            Product([Zero(1), NonnegOrthant(mm)])][kind]
    prob = planted(n, cone, seed, rank=n, mu=0.1 * rng.uniform(),
                   affine_in="omega" if rng.uniform() < 0.5 else "phi", name=f"smooth_{seed}")
    if kind != 1:
        return prob
    th, ref = prob.theta, prob.reference
    us = ref.u_star.copy()
    k = th.m

    def omega(u):
        d = u - us
        return np.concatenate((th.value(u), [0.5 * float(d @ d) - 1.0]))

    def omega_jt(u, p):
        return th.jt(u, p[:k]) + p[k] * (u - us)

    def remainder(u, v, p):
        d = v - u
        return th.remainder(u, v, p[:k]) + 0.5 * p[k] * float(d @ d)

    theta = ConeMapOracle(
        n, k + 1, omega=omega, omega_jt=omega_jt, omega_remainder=remainder,
        b_omega_components=[0.0] * k + [1.0], name="affine+quadratic",
    )
    return NccpProblem(prob.g, prob.j, theta, NonnegOrthant(k + 1),
                       reference=Reference(us, np.concatenate((ref.p_star, [0.0])), ref.opt_value),
                       name=prob.name)

"""Problem model: oracles for G, J, Omega, Phi, the set U and the core K.

The program solved throughout the package is

    minimize G(u) + J(u)  over u in U  subject to  Theta(u) = Omega(u) + Phi(u) in -C,

with G smooth, J convex and possibly nonsmooth, Omega smooth and
C-convex, Phi C-convex and kept un-linearised in the primal step.

Oracles are closures over data.  Dense numpy matrices (or anything
supporting ``@`` and ``.T``) are the provided implementation; all
constants (B_G, beta_G, tau, B_Omega) are optional declarations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .cones import ConeSpec, as_vec
from .errors import DimensionMismatch, IncompatibleOracle

__all__ = [
    "SmoothOracle",
    "NonsmoothOracle",
    "ConeMapOracle",
    "FeasibleSet",
    "BregmanCore",
    "Reference",
    "NccpProblem",
    "CheckResult",
    "ValidationReport",
    "bregman_distance",
    "aggregate_b_omega",
    "validate_problem",
    "check_c_convexity",
    "soft_threshold",
    "spectral_norm",
]


def soft_threshold(v, t):
    """Componentwise shrinkage sign(v) * max(|v| - t, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _floor_eig(eig):
    # smallest eigenvalue, with rounding-level values treated as 0
    lo, hi = float(eig[0]), float(max(eig[-1], 0.0))
    return lo if lo > 1e-12 * max(hi, 1.0) else 0.0


def spectral_norm(A):
    """Largest singular value of a dense matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


# ---------------------------------------------------------------------------
# G


@dataclass
class SmoothOracle:
    """Convex differentiable function with optional curvature constants.

    Parameters
    ----------
    value, gradient : callables
    dim : int
    lipschitz_grad : float, optional
        B_G, Lipschitz constant of the gradient.
    strong_convexity : float, optional
        beta_G.
    remainder : callable, optional
        ``remainder(u, v)`` returning G(v) - G(u) - <grad G(u), v - u>
        exactly.  Used instead of the subtraction formula when present,
        which avoids cancellation for quadratics.
    hessian : ndarray, optional
        Constant Hessian of a quadratic, kept for introspection.
    """

    value: Callable
    gradient: Callable
    dim: int
    lipschitz_grad: Optional[float] = None
    strong_convexity: Optional[float] = None
    remainder: Optional[Callable] = None
    hessian: Optional[np.ndarray] = None
    name: str = "custom"

    def bregman(self, u, v):
        if self.remainder is not None:
            return float(self.remainder(u, v))
        return float(self.value(v) - self.value(u) - self.gradient(u) @ (v - u))

    @classmethod
    def quadratic(cls, P, c=None, const=0.0):
        """G(u) = u^T P u / 2 + c^T u + const with P symmetric PSD."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        n = P.shape[0]
        P = 0.5 * (P + P.T)
        c = np.zeros(n) if c is None else as_vec(c, n, "c")
        eig = np.linalg.eigvalsh(P) if n else np.zeros(1)
        return cls(
            value=lambda u: float(0.5 * u @ (P @ u) + c @ u + const),
            gradient=lambda u: P @ u + c,
            dim=n,
            lipschitz_grad=float(max(eig[-1], 0.0)),
            strong_convexity=_floor_eig(eig),
            remainder=lambda u, v: float(0.5 * (v - u) @ (P @ (v - u))),
            hessian=P,
            name="quadratic",
        )

    @classmethod
    def least_squares(cls, A, b):
        """G(u) = ||A u - b||^2 / 2."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = as_vec(b, A.shape[0], "b")
        AtA = A.T @ A
        eig = np.linalg.eigvalsh(AtA)
        return cls(
            value=lambda u: float(0.5 * np.sum((A @ u - b) ** 2)),
            gradient=lambda u: A.T @ (A @ u - b),
            dim=A.shape[1],
            lipschitz_grad=float(eig[-1]),
            strong_convexity=_floor_eig(eig),
            remainder=lambda u, v: float(0.5 * np.sum((A @ (v - u)) ** 2)),
            hessian=AtA,
            name="least_squares",
        )

    @classmethod
    def zero(cls, n):
        return cls.quadratic(np.zeros((n, n)))


# ---------------------------------------------------------------------------
# J


@dataclass
class NonsmoothOracle:
    """Convex l.s.c. function, described by a tag the subproblem solver understands.

    Tags
    ----
    ``zero``
        J = 0.
    ``l1``
        J(u) = sum_i w_i |u_i| with ``weight`` a scalar or vector, w >= 0.
    ``sq_l2``
        J(u) = mu/2 ||u||^2 (strongly convex with modulus mu).
    ``quadratic``
        J(u) = u^T P u / 2 with ``matrix`` P PSD; handled as smooth in
        the generic subproblem path.
    ``custom``
        user ``value`` and ``prox(v, t)`` = argmin J(x) + ||x - v||^2/(2t).
    """

    tag: str
    dim: int
    weight: object = 0.0
    mu: float = 0.0
    matrix: Optional[np.ndarray] = None
    custom_value: Optional[Callable] = None
    custom_prox: Optional[Callable] = None
    strong_convexity: float = 0.0

    def __post_init__(self):
        if self.tag not in ("zero", "l1", "sq_l2", "quadratic", "custom"):
            raise ValueError(f"unknown nonsmooth tag {self.tag!r}")
        if self.tag == "l1":
            w = np.broadcast_to(np.asarray(self.weight, dtype=float), (self.dim,)).copy()
            if np.any(w < 0):
                raise ValueError("l1 weights must be nonnegative")
            self.weight = w
        if self.tag == "sq_l2":
            if self.mu < 0:
                raise ValueError("mu must be nonnegative")
            self.strong_convexity = float(self.mu)
        if self.tag == "quadratic":
            P = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            self.matrix = 0.5 * (P + P.T)
            self.strong_convexity = float(max(np.linalg.eigvalsh(self.matrix)[0], 0.0))
        if self.tag == "custom" and (self.custom_value is None or self.custom_prox is None):
            raise ValueError("custom J needs both value and prox")

    @classmethod
    def zero(cls, n):
        return cls("zero", n)

    @classmethod
    def l1(cls, n, weight=1.0):
        return cls("l1", n, weight=weight)

    @classmethod
    def sq_l2(cls, n, mu):
        return cls("sq_l2", n, mu=float(mu))

    @property
    def separable(self):
        return self.tag in ("zero", "l1", "sq_l2")

    def value(self, u):
        if self.tag == "zero":
            return 0.0
        if self.tag == "l1":
            return float(self.weight @ np.abs(u))
        if self.tag == "sq_l2":
            return 0.5 * self.mu * float(u @ u)
        if self.tag == "quadratic":
            return 0.5 * float(u @ (self.matrix @ u))
        return float(self.custom_value(u))

    def prox(self, v, t):
        """argmin_x J(x) + ||x - v||^2 / (2t)."""
        if self.tag == "zero":
            return v.copy()
        if self.tag == "l1":
            return soft_threshold(v, t * self.weight)
        if self.tag == "sq_l2":
            return v / (1.0 + t * self.mu)
        if self.tag == "quadratic":
            return np.linalg.solve(np.eye(self.dim) + t * self.matrix, v)
        return self.custom_prox(v, t)

    def subset(self, idx):
        """Restriction of a separable J to the coordinates ``idx``."""
        if self.tag == "l1":
            return NonsmoothOracle("l1", len(idx), weight=self.weight[idx])
        if self.tag == "sq_l2":
            return NonsmoothOracle("sq_l2", len(idx), mu=self.mu)
        if self.tag == "zero":
            return NonsmoothOracle("zero", len(idx))
        raise IncompatibleOracle(f"J with tag {self.tag!r} is not separable")


# ---------------------------------------------------------------------------
# Theta = Omega + Phi


def _zero_map(m):
    return lambda u: np.zeros(m)


@dataclass
class ConeMapOracle:
    """Constraint map Theta = Omega + Phi : R^n -> R^m.

    Omega is smooth and enters the primal step through its Jacobian;
    Phi is kept exactly.  Phi tags:

    ``zero``
        Phi = 0.
    ``linear``
        Phi(u) = A u - b.
    ``separable-l1``
        Phi(u) = W |u| + c with W >= 0 entrywise.  Only C-convex when
        W|.| is, e.g. C an orthant.
    ``custom``
        user ``phi(u)`` and ``phi_jt(u, p)``; treated as smooth inside
        the generic subproblem solver.

    Parameters
    ----------
    omega, omega_jt : callables
        Omega(u) and (grad Omega(u))^T p.
    tau : float, optional
        Lipschitz constant of Theta.
    b_omega : float, optional
        Lipschitz constant of u -> (grad Omega(u))^T p over the
        multipliers that occur (see the dual-bound variant).
    b_omega_components : list of float, optional
        Per-component gradient Lipschitz constants of Omega_j.
    certificate : ConeSpec, optional
        Cone for which the map is known to be C-convex.
    omega_remainder : callable, optional
        ``omega_remainder(u, v, p)`` = <p, Omega(v) - Omega(u) - grad Omega(u)(v - u)>.
    """

    n: int
    m: int
    omega: Callable = None
    omega_jt: Callable = None
    phi_tag: str = "zero"
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    phi_custom: Optional[Callable] = None
    phi_custom_jt: Optional[Callable] = None
    tau: Optional[float] = None
    b_omega: Optional[float] = None
    b_omega_components: Optional[List[float]] = None
    certificate: Optional[ConeSpec] = None
    omega_remainder: Optional[Callable] = None
    omega_is_zero: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.phi_tag not in ("zero", "linear", "separable-l1", "custom"):
            raise ValueError(f"unknown Phi tag {self.phi_tag!r}")
        if self.omega is None:
            self.omega = _zero_map(self.m)
            self.omega_jt = lambda u, p: np.zeros(self.n)
            self.omega_remainder = lambda u, v, p: 0.0
            self.omega_is_zero = True
            if self.b_omega is None:
                self.b_omega = 0.0
        elif self.omega_jt is None:
            raise ValueError("omega needs omega_jt")
        if self.phi_tag == "linear":
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = np.zeros(self.m) if self.b is None else as_vec(self.b, self.m, "b")
            if self.A.shape != (self.m, self.n):
                raise DimensionMismatch(f"A has shape {self.A.shape}, expected {(self.m, self.n)}")
        if self.phi_tag == "separable-l1":
            self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
            if self.W.shape != (self.m, self.n):
                raise DimensionMismatch(f"W has shape {self.W.shape}, expected {(self.m, self.n)}")
            if np.any(self.W < 0):
                raise ValueError("separable-l1 weights must be nonnegative")
            self.c = np.zeros(self.m) if self.c is None else as_vec(self.c, self.m, "c")
        if self.phi_tag == "custom" and (self.phi_custom is None or self.phi_custom_jt is None):
            raise ValueError("custom Phi needs phi and phi_jt")

    # constructors -------------------------------------------------------

    @classmethod
    def affine(cls, A, b=None, as_phi=True, **kw):
        """Theta(u) = A u - b, placed in Phi (default) or in Omega."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, n = A.shape
        b = np.zeros(m) if b is None else np.asarray(b, dtype=float).reshape(m)
        tau = spectral_norm(A)
        if as_phi:
            return cls(n, m, phi_tag="linear", A=A, b=b, tau=tau, **kw)
        return cls(
            n, m,
            omega=lambda u: A @ u - b,
            omega_jt=lambda u, p: A.T @ p,
            omega_remainder=lambda u, v, p: 0.0,
            tau=tau, b_omega=0.0, b_omega_components=[0.0] * m, **kw,
        )

    @classmethod
    def zero(cls, n, m=1):
        return cls(n, m, tau=0.0)

    # evaluation ---------------------------------------------------------

    def phi(self, u):
        if self.phi_tag == "zero":
            return np.zeros(self.m)
        if self.phi_tag == "linear":
            return self.A @ u - self.b
        if self.phi_tag == "separable-l1":
            return self.W @ np.abs(u) + self.c
        return np.asarray(self.phi_custom(u), dtype=float)

    def phi_jt(self, u, p):
        """A (sub)gradient of u -> <p, Phi(u)> at u."""
        if self.phi_tag == "zero":
            return np.zeros(self.n)
        if self.phi_tag == "linear":
            return self.A.T @ p
        if self.phi_tag == "separable-l1":
            return np.sign(u) * (self.W.T @ p)
        return np.asarray(self.phi_custom_jt(u, p), dtype=float)

    @property
    def phi_smooth(self):
        return self.phi_tag in ("zero", "linear", "custom")

    def value(self, u):
        return np.asarray(self.omega(u), dtype=float) + self.phi(u)

    def jt(self, u, p):
        """(grad Omega(u) + grad Phi(u))^T p for differentiable Phi."""
        return self.omega_jt(u, p) + self.phi_jt(u, p)

    def remainder(self, u, v, p):
        """<p, Omega(v) - Omega(u) - grad Omega(u)(v - u)>."""
        if self.omega_remainder is not None:
            return float(self.omega_remainder(u, v, p))
        return float(p @ (self.omega(v) - self.omega(u)) - self.omega_jt(u, p) @ (v - u))


# ---------------------------------------------------------------------------
# U


@dataclass
class FeasibleSet:
    """Closed convex set U: full space, box, ball or a product of blocks."""

    kind: str
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    blocks: Optional[Sequence["FeasibleSet"]] = None

    def __post_init__(self):
        if self.kind == "box":
            self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.dim,)).copy()
            self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.dim,)).copy()
            if np.any(self.lo > self.hi):
                raise ValueError("box needs lo <= hi")
        elif self.kind == "ball":
            self.center = np.zeros(self.dim) if self.center is None else as_vec(self.center, self.dim, "center")
            if not self.radius or self.radius <= 0:
                raise ValueError("ball radius must be positive")
        elif self.kind == "product":
            self.blocks = tuple(self.blocks)
            if sum(b.dim for b in self.blocks) != self.dim:
                raise DimensionMismatch("block dimensions do not add up")
            self.offsets = np.cumsum([0] + [b.dim for b in self.blocks])
        elif self.kind != "full":
            raise ValueError(f"unknown set kind {self.kind!r}")

    @classmethod
    def full(cls, n):
        return cls("full", n)

    @classmethod
    def box(cls, lo, hi, n=None):
        if n is None:
            n = np.size(lo) if np.ndim(lo) else np.size(hi)
        return cls("box", int(n), lo=lo, hi=hi)

    @classmethod
    def ball(cls, radius, center=None, n=None):
        if n is None:
            n = np.size(center)
        return cls("ball", int(n), center=center, radius=float(radius))

    @classmethod
    def product(cls, blocks):
        blocks = list(blocks)
        return cls("product", sum(b.dim for b in blocks), blocks=blocks)

    def block_slices(self):
        if self.kind != "product":
            return [slice(0, self.dim)]
        return [slice(int(a), int(b)) for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def project(self, u):
        if self.kind == "full":
            return np.array(u, dtype=float, copy=True)
        if self.kind == "box":
            return np.clip(u, self.lo, self.hi)
        if self.kind == "ball":
            d = u - self.center
            r = float(np.sqrt(d @ d))
            if r <= self.radius:
                return np.array(u, dtype=float, copy=True)
            return self.center + d * (self.radius / r)
        out = np.empty(self.dim)
        for blk, sl in zip(self.blocks, self.block_slices()):
            out[sl] = blk.project(u[sl])
        return out

    def to_dict(self):
        if self.kind == "full":
            return {"full": self.dim}
        if self.kind == "box":
            return {"box": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}
        if self.kind == "ball":
            return {"ball": {"center": self.center.tolist(), "radius": self.radius}}
        return {"product": [b.to_dict() for b in self.blocks]}

    @classmethod
    def from_dict(cls, d, n=None):
        if "full" in d:
            return cls.full(int(d["full"]))
        if "box" in d:
            lo, hi = d["box"]["lo"], d["box"]["hi"]
            return cls.box(lo, hi, n=d["box"].get("dim", n))
        if "ball" in d:
            return cls.ball(d["ball"]["radius"], d["ball"]["center"])
        if "product" in d:
            return cls.product([cls.from_dict(b) for b in d["product"]])
        raise ValueError(f"unrecognised set descriptor {d!r}")


# ---------------------------------------------------------------------------
# K


@dataclass
class BregmanCore:
    """Strongly convex core function K inducing D(u, v) = K(u) - K(v) - <grad K(v), u - v>.

    ``half_squared`` is K = ||u||^2/2 (beta = B = 1); ``diagonal`` is
    K = sum d_i u_i^2 / 2 (beta = min d, B = max d); ``custom`` takes
    ``value``, ``grad``, ``beta`` and ``B``.
    """

    kind: str
    dim: int
    weights: Optional[np.ndarray] = None
    value_fn: Optional[Callable] = None
    grad_fn: Optional[Callable] = None
    beta: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if self.kind == "half_squared":
            self.beta = self.B = 1.0
        elif self.kind == "diagonal":
            w = np.broadcast_to(np.asarray(self.weights, dtype=float), (self.dim,)).copy()
            if np.any(w <= 0):
                raise ValueError("diagonal core weights must be positive")
            self.weights = w
            self.beta, self.B = float(w.min()), float(w.max())
        elif self.kind == "custom":
            if self.value_fn is None or self.grad_fn is None:
                raise ValueError("custom core needs value and grad")
            if not 0 < self.beta <= self.B:
                raise ValueError("custom core needs 0 < beta <= B")
        else:
            raise ValueError(f"unknown core kind {self.kind!r}")

    @classmethod
    def half_squared(cls, n):
        return cls("half_squared", n)

    @classmethod
    def diagonal(cls, weights):
        w = np.asarray(weights, dtype=float)
        return cls("diagonal", w.size, weights=w)

    @property
    def separable(self):
        return self.kind in ("half_squared", "diagonal")

    @property
    def diag(self):
        """Per-coordinate weights for separable cores."""
        if self.kind == "half_squared":
            return np.ones(self.dim)
        return self.weights

    def value(self, u):
        if self.kind == "half_squared":
            return 0.5 * float(u @ u)
        if self.kind == "diagonal":
            return 0.5 * float(self.weights @ (u * u))
        return float(self.value_fn(u))

    def grad(self, u):
        if self.kind == "half_squared":
            return np.array(u, dtype=float, copy=True)
        if self.kind == "diagonal":
            return self.weights * u
        return np.asarray(self.grad_fn(u), dtype=float)

    def distance(self, u, v):
        """D(u, v); exact for the separable cores."""
        if self.kind == "half_squared":
            d = u - v
            return 0.5 * float(d @ d)
        if self.kind == "diagonal":
            d = u - v
            return 0.5 * float(self.weights @ (d * d))
        return float(self.value(u) - self.value(v) - self.grad(v) @ (u - v))

    def subset(self, idx):
        if self.kind == "half_squared":
            return BregmanCore.half_squared(len(idx))
        if self.kind == "diagonal":
            return BregmanCore.diagonal(self.weights[idx])
        raise IncompatibleOracle("custom cores are not separable")


def bregman_distance(core: BregmanCore, u, v):
    """D(u, v) = K(u) - K(v) - <grad K(v), u - v>."""
    u = as_vec(u, core.dim, "u")
    v = as_vec(v, core.dim, "v")
    return core.distance(u, v)


def aggregate_b_omega(components, p_bound):
    """B_Omega = M * sum_j B_{Omega_j} for multipliers bounded by M."""
    comps = np.asarray(list(components), dtype=float)
    if np.any(comps < 0):
        raise ValueError(f"negative component constant at index {int(np.argmax(comps < 0))}")
    if not p_bound > 0:
        raise ValueError("dual bound M must be positive")
    return float(p_bound * comps.sum())


# ---------------------------------------------------------------------------
# problem bundle


@dataclass
class Reference:
    u_star: np.ndarray
    p_star: np.ndarray
    opt_value: Optional[float] = None


@dataclass
class NccpProblem:
    g: SmoothOracle
    j: NonsmoothOracle
    theta: ConeMapOracle
    cone: ConeSpec
    set: FeasibleSet = None
    core: BregmanCore = None
    reference: Optional[Reference] = None
    name: str = "problem"

    def __post_init__(self):
        n = self.g.dim
        if self.set is None:
            self.set = FeasibleSet.full(n)
        if self.core is None:
            self.core = BregmanCore.half_squared(n)
        for what, d in (("J", self.j.dim), ("Theta input", self.theta.n),
                        ("U", self.set.dim), ("K", self.core.dim)):
            if d != n:
                raise DimensionMismatch(f"{what} has dimension {d}, G has {n}")
        if self.cone.dim != self.theta.m:
            raise DimensionMismatch(f"cone dimension {self.cone.dim} != Theta output {self.theta.m}")
        if self.reference is not None:
            self.reference.u_star = as_vec(self.reference.u_star, n, "u_star")
            self.reference.p_star = as_vec(self.reference.p_star, self.theta.m, "p_star")

    @property
    def n(self):
        return self.g.dim

    @property
    def m(self):
        return self.theta.m

    def objective(self, u):
        return self.g.value(u) + self.j.value(u)

    def theta_value(self, u):
        return self.theta.value(u)


# ---------------------------------------------------------------------------
# sampled assumption checks


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst = float(self.worst)


@dataclass
class ValidationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_text(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status} {c.name}: worst={c.worst:.3e} {c.detail}".rstrip())
        return "\n".join(lines)


def _sample_points(rng, problem, count, scale=1.0):
    U = problem.set
    pts = rng.normal(size=(count, problem.n)) * scale
    return np.array([U.project(x) for x in pts])


def check_c_convexity(theta: ConeMapOracle, cone: ConeSpec, samples=1000, seed=0,
                      scale=1.0, tol=1e-8, points=None):
    """Sampled test that Theta(a u + (1-a) v) - a Theta(u) - (1-a) Theta(v) lies in -C.

    The distance of a vector d to -C equals ||Proj_{C*}(d)||, which is
    the reported violation (relative to the magnitude of the values).
    """
    rng = np.random.default_rng(seed)
    dual = cone.dual()
    if points is None:
        U = rng.normal(size=(samples, theta.n)) * scale
        V = rng.normal(size=(samples, theta.n)) * scale
    else:
        U, V = points
    alphas = rng.uniform(size=samples)
    worst = 0.0
    failures = 0
    for u, v, a in zip(U, V, alphas):
        tu, tv = theta.value(u), theta.value(v)
        tw = theta.value(a * u + (1 - a) * v)
        d = tw - a * tu - (1 - a) * tv
        viol = float(np.linalg.norm(dual._project(d)))
        size = max(1.0, float(np.abs(tu).max()), float(np.abs(tv).max()))
        rel = viol / size
        worst = max(worst, rel)
        failures += rel > tol
    return CheckResult("c_convexity", failures == 0, worst, f"{failures} violations in {samples}")


def validate_problem(problem: NccpProblem, samples=100, seed=0, dual_bound=None,
                     scale=1.0) -> ValidationReport:
    """Run the sampled assumption checks; failures are reported, not raised."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    rep = ValidationReport()
    n, m = problem.n, problem.m
    P = _sample_points(rng, problem, samples, scale)
    Q = _sample_points(rng, problem, samples, scale)
    g, th = problem.g, problem.theta

    # gradient of G against central differences
    worst = 0.0
    for u in P[: min(samples, 20)]:
        grad = g.gradient(u)
        h = 1e-6 * max(1.0, float(np.abs(u).max()))
        fd = np.array([(g.value(u + h * e) - g.value(u - h * e)) / (2 * h) for e in np.eye(n)])
        worst = max(worst, float(np.linalg.norm(fd - grad) / max(1.0, np.linalg.norm(grad))))
    rep.checks.append(CheckResult("gradient_G", worst <= 1e-5, worst))

    # Jacobian of Omega against central differences of <p, Omega>
    if not th.omega_is_zero:
        worst = 0.0
        for u in P[: min(samples, 10)]:
            p = rng.normal(size=m)
            jt = th.omega_jt(u, p)
            h = 1e-6 * max(1.0, float(np.abs(u).max()))
            fd = np.array([p @ (th.omega(u + h * e) - th.omega(u - h * e)) / (2 * h) for e in np.eye(n)])
            worst = max(worst, float(np.linalg.norm(fd - jt) / max(1.0, np.linalg.norm(jt))))
        rep.checks.append(CheckResult("jacobian_Omega", worst <= 1e-5, worst))

    if g.lipschitz_grad is not None:
        B = g.lipschitz_grad
        viol = max(g.bregman(u, v) - 0.5 * B * float((u - v) @ (u - v)) for u, v in zip(P, Q))
        # also the unit pair, which witnesses a too-small constant on quadratics
        e = np.zeros(n)
        e[0] = 1.0
        u0, v0 = problem.set.project(np.zeros(n)), problem.set.project(e)
        viol = max(viol, g.bregman(u0, v0) - 0.5 * B * float((u0 - v0) @ (u0 - v0)))
        rep.checks.append(CheckResult("descent_lemma_G", viol <= 1e-9, max(viol, 0.0)))

    if g.strong_convexity:
        beta = g.strong_convexity
        viol = max(0.5 * beta * float((u - v) @ (u - v)) - g.bregman(u, v) for u, v in zip(P, Q))
        rep.checks.append(CheckResult("strong_convexity_G", viol <= 1e-9, max(viol, 0.0)))

    if problem.j.tag == "l1":
        worst = max(abs(problem.j.value(u) - sum(w * abs(x) for w, x in zip(problem.j.weight, u)))
                    for u in P[:10])
        rep.checks.append(CheckResult("l1_value", worst <= 1e-12 * max(1.0, scale * n), worst))

    if th.certificate is not None and th.certificate == problem.cone:
        rep.checks.append(CheckResult("c_convexity", True, 0.0, "certified"))
    else:
        rep.checks.append(check_c_convexity(th, problem.cone, points=(P, Q), samples=samples,
                                            seed=seed))

    if th.tau is not None:
        viol = max(float(np.linalg.norm(th.value(u) - th.value(v)) - th.tau * np.linalg.norm(u - v))
                   for u, v in zip(P, Q))
        rep.checks.append(CheckResult("lipschitz_Theta", viol <= 1e-9 * max(1.0, scale), max(viol, 0.0)))

    if th.b_omega is not None and not th.omega_is_zero:
        radius = 1.0 if dual_bound is None else float(dual_bound)
        dual = problem.cone.dual()
        viol = -np.inf
        for u, v in zip(P, Q):
            p = dual._project(rng.normal(size=m))
            nrm = np.linalg.norm(p)
            if nrm == 0:
                continue
            p *= radius / nrm
            viol = max(viol, th.remainder(u, v, p) - 0.5 * th.b_omega * float((u - v) @ (u - v)))
        viol = max(viol, 0.0)
        rep.checks.append(CheckResult("descent_lemma_Omega", viol <= 1e-9 * max(1.0, scale ** 2), viol))

    # projection onto U
    U = problem.set
    viol = 0.0
    for u, v in zip(P, Q):
        a, b = rng.normal(size=n) * 3 * scale, rng.normal(size=n) * 3 * scale
        pa, pb = U.project(a), U.project(b)
        viol = max(viol, float(np.linalg.norm(U.project(pa) - pa)),
                   float(np.linalg.norm(pa - pb) - np.linalg.norm(a - b)))
    rep.checks.append(CheckResult("set_projection", viol <= 1e-12 * max(1.0, scale), viol))

    core = problem.core
    viol = 0.0
    for u, v in zip(P, Q):
        d2 = float((u - v) @ (u - v))
        D = core.distance(u, v)
        viol = max(viol, 0.5 * core.beta * d2 - D, D - 0.5 * core.B * d2)
    rep.checks.append(CheckResult("core_sandwich", viol <= 1e-9 * max(1.0, scale ** 2), viol))
    return rep

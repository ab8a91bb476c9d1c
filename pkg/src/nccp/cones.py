"""Closed convex cones and their Euclidean projections.

Every cone knows its dimension, its dual cone and how to project onto
itself.  Multipliers of the cone program live in the dual cone, so the
solvers mostly call :func:`project_dual`.

Supported families: the zero cone, the full space (dual of zero), the
nonnegative orthant and the norm cones

    K_nu = {(x0, xbar) : x0 >= ||xbar||_nu},   nu in {1, 2, inf},

together with Cartesian products of these.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "ConeSpec",
    "Zero",
    "FullSpace",
    "NonnegOrthant",
    "NormCone",
    "Product",
    "as_vec",
    "project_dual",
    "project_neg_cone",
    "project_cone_ball",
    "project_norm_cone",
    "dual_cone",
    "conjugate_exponent",
    "cone_from_dict",
]


def as_vec(v, dim=None, name="v"):
    """Convert to a 1-D float array, rejecting NaN/Inf and wrong sizes."""
    x = np.asarray(v, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    elif x.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return x


def _parse_nu(nu):
    if isinstance(nu, str):
        if nu.lower() in ("inf", "infinity"):
            return np.inf
        nu = float(nu)
    nu = float(nu)
    if nu not in (1.0, 2.0, np.inf):
        raise ValueError(f"unsupported norm exponent {nu!r}; use 1, 2 or inf")
    return nu


def conjugate_exponent(nu):
    """Return omega with 1/nu + 1/omega = 1 for nu in {1, 2, inf}."""
    nu = _parse_nu(nu)
    if nu == 1.0:
        return np.inf
    if nu == np.inf:
        return 1.0
    return 2.0


def _nu_norm(x, nu):
    if nu == 1.0:
        return float(np.sum(np.abs(x)))
    if nu == 2.0:
        return float(np.sqrt(x @ x))
    return float(np.max(np.abs(x))) if x.size else 0.0


class ConeSpec:
    """Base class of cone descriptors.

    Subclasses implement ``_project`` (projection onto the cone itself,
    no input checks), ``dual`` and ``to_dict``.
    """

    dim: int

    def project(self, v):
        """Euclidean projection of ``v`` onto this cone."""
        return self._project(as_vec(v, self.dim))

    def _project(self, x):
        raise NotImplementedError

    def dual(self) -> "ConeSpec":
        raise NotImplementedError

    def contains(self, v, tol=1e-10):
        x = as_vec(v, self.dim)
        return bool(np.linalg.norm(x - self._project(x)) <= tol * max(1.0, np.linalg.norm(x)))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(ConeSpec):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def _project(self, x):
        return np.zeros_like(x)

    def dual(self):
        return FullSpace(self.dim)

    def to_dict(self):
        return {"zero": self.dim}


@dataclass(frozen=True)
class FullSpace(ConeSpec):
    """The whole space R^dim; appears as the dual of the zero cone."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def _project(self, x):
        return x.copy()

    def dual(self):
        return Zero(self.dim)

    def to_dict(self):
        return {"free": self.dim}


@dataclass(frozen=True)
class NonnegOrthant(ConeSpec):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be >= 1")

    def _project(self, x):
        return np.maximum(x, 0.0)

    def dual(self):
        return self

    def to_dict(self):
        return {"orthant": self.dim}


@dataclass(frozen=True)
class NormCone(ConeSpec):
    """Epigraph cone of the nu-norm, ``x[0] >= ||x[1:]||_nu``."""

    nu: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "nu", _parse_nu(self.nu))
        if self.dim < 2:
            raise ValueError("norm cone dimension must be >= 2")

    def _project(self, x):
        return _project_norm_cone(self.nu, x)

    def dual(self):
        return NormCone(conjugate_exponent(self.nu), self.dim)

    def to_dict(self):
        nu = "inf" if self.nu == np.inf else int(self.nu)
        return {"norm": nu, "dim": self.dim}


class Product(ConeSpec):
    """Cartesian product of cones; projections act blockwise."""

    def __init__(self, blocks: Sequence[ConeSpec]):
        blocks = tuple(blocks)
        if not blocks:
            raise ValueError("product cone needs at least one block")
        self.blocks = blocks
        self.offsets = np.cumsum([0] + [b.dim for b in blocks])
        self.dim = int(self.offsets[-1])

    def __eq__(self, other):
        return isinstance(other, Product) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"Product({list(self.blocks)!r})"

    def _project(self, x):
        out = np.empty_like(x)
        for b, lo, hi in zip(self.blocks, self.offsets[:-1], self.offsets[1:]):
            out[lo:hi] = b._project(x[lo:hi])
        return out

    def dual(self):
        return Product([b.dual() for b in self.blocks])

    def to_dict(self):
        return {"product": [b.to_dict() for b in self.blocks]}


def cone_from_dict(d: dict) -> ConeSpec:
    """Inverse of ``ConeSpec.to_dict``; accepts a ``{"cone": ...}`` wrapper."""
    if "cone" in d and isinstance(d["cone"], dict):
        d = d["cone"]
    if "product" in d:
        return Product([cone_from_dict(b) for b in d["product"]])
    if "norm" in d:
        return NormCone(d["norm"], int(d["dim"]))
    if "orthant" in d:
        return NonnegOrthant(int(d["orthant"]))
    if "zero" in d:
        return Zero(int(d["zero"]))
    if "free" in d:
        return FullSpace(int(d["free"]))
    raise ValueError(f"unrecognised cone descriptor {d!r}")


# ---------------------------------------------------------------------------
# norm cone projections


def _proj_soc(x):
    t, xb = x[0], x[1:]
    r = float(np.sqrt(xb @ xb))
    if r <= t:
        return x.copy()
    if r <= -t:
        return np.zeros_like(x)
    a = 0.5 * (t + r)
    out = np.empty_like(x)
    out[0] = a
    out[1:] = (a / r) * xb
    return out


def _proj_linf_cone(x):
    # min (s-t)^2 + sum (y_i - x_i)^2  s.t. |y_i| <= s.  The optimal s
    # is the root of (s - t) - sum_i (a_i - s)_+ with a = |xbar|.
    t, xb = x[0], x[1:]
    a = np.abs(xb)
    if t >= a.max(initial=0.0):
        return x.copy()
    if -t >= a.sum():
        return np.zeros_like(x)
    srt = np.sort(a)[::-1]
    # candidate s with the j largest entries clipped, j = 0..k
    csum = np.concatenate(([0.0], np.cumsum(srt)))
    cand = (t + csum) / np.arange(1, srt.size + 2)
    nxt = np.concatenate((srt, [0.0]))
    j = int(np.argmax(cand >= nxt))
    s = max(cand[j], 0.0)
    out = np.empty_like(x)
    out[0] = s
    out[1:] = np.clip(xb, -s, s)
    return out


def _proj_l1_cone(x):
    # min (s-t)^2/2 + ||y-x||^2/2 s.t. ||y||_1 <= s.  With multiplier lam:
    # s = t + lam, y = soft(xbar, lam), lam the root of
    # sum_i (a_i - lam)_+ - t - lam.
    t, xb = x[0], x[1:]
    a = np.abs(xb)
    if a.sum() <= t:
        return x.copy()
    if a.max(initial=0.0) <= -t:
        return np.zeros_like(x)
    srt = np.sort(a)[::-1]
    csum = np.cumsum(srt)
    j1 = np.arange(1, srt.size + 1)
    lam = (csum - t) / (j1 + 1)
    nxt = np.concatenate((srt[1:], [0.0]))
    j = int(np.argmax(lam >= nxt))
    lam_j = max(lam[j], 0.0)
    out = np.empty_like(x)
    out[0] = t + lam_j
    out[1:] = np.sign(xb) * np.maximum(a - lam_j, 0.0)
    return out


def _project_norm_cone(nu, x):
    if nu == 2.0:
        return _proj_soc(x)
    if nu == 1.0:
        return _proj_l1_cone(x)
    return _proj_linf_cone(x)


def project_norm_cone(nu, x):
    """Project ``x = (x0, xbar)`` onto ``{x0 >= ||xbar||_nu}``.

    nu = 2 uses the closed form for the second-order cone; nu = 1 and
    nu = inf use an exact sort-based threshold search, O(k log k).
    """
    nu = _parse_nu(nu)
    x = as_vec(x, name="x")
    if x.shape[0] < 2:
        raise DimensionMismatch("norm cone vectors need length >= 2")
    return _project_norm_cone(nu, x)


# ---------------------------------------------------------------------------
# public projections


def dual_cone(cone: ConeSpec) -> ConeSpec:
    return cone.dual()


def project_dual(cone: ConeSpec, v):
    """Projection onto the dual cone C*."""
    return cone.dual()._project(as_vec(v, cone.dim))


def project_neg_cone(cone: ConeSpec, v):
    """Projection onto -C, computed as ``v - project_dual(cone, v)``."""
    x = as_vec(v, cone.dim)
    return x - cone.dual()._project(x)


def _truncate(p, M):
    nrm = float(np.sqrt(p @ p))
    if nrm > M:
        return p * (M / nrm)
    return p


def project_cone_ball(cone: ConeSpec, M, v):
    """Projection onto ``C* ∩ {||p|| <= M}``.

    Because C* is a cone and the ball is centred at the origin, this is
    the cone projection followed by radial truncation.
    """
    if not M > 0:
        raise ValueError(f"ball radius must be positive, got {M}")
    return _truncate(project_dual(cone, v), float(M))


class DualProjector:
    """Cached projector onto C* (or C* ∩ ball) for hot loops.

    Skips input validation; callers guarantee finite arrays of the
    right size.
    """

    def __init__(self, cone: ConeSpec, M=None):
        if M is not None and not M > 0:
            raise ValueError(f"ball radius must be positive, got {M}")
        self.cone = cone
        self.dual = cone.dual()
        self.M = None if M is None else float(M)

    def __call__(self, v):
        p = self.dual._project(v)
        if self.M is not None:
            p = _truncate(p, self.M)
        return p

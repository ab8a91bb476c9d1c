"""Convergence diagnostics: residuals, distances, dual bounds and rate fits."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .cones import ConeSpec, as_vec, conjugate_exponent, _nu_norm, _parse_nu
from .lagrangian import PrimalDual, aug_lagrangian, lagrangian

__all__ = [
    "TRACE_COLUMNS",
    "STRONG_COLUMNS",
    "TraceRecord",
    "RateFit",
    "feasibility_residual",
    "kkt_residual",
    "kkt_bound_constants",
    "generalized_distance",
    "distance_sandwich",
    "dual_bound_orthant",
    "dual_bound_norm_cone",
    "rate_fit",
    "saddle_gap_estimate",
    "make_probes",
    "initial_distance_bound",
    "bifunction_bound",
    "trace_column",
    "write_trace_csv",
    "write_trace_json",
    "trace_to_csv_text",
]

TRACE_COLUMNS = (
    "iter", "wall_time_s", "obj", "obj_ergodic", "feas", "feas_ergodic", "dual_norm",
    "eps_k", "delta_k", "lemma1_lhs", "lemma1_rhs", "kkt_res", "dist_sq",
)
STRONG_COLUMNS = ("a_k", "b_k", "rho_k")


@dataclass
class TraceRecord:
    """Metrics of one iteration.

    ``iter`` counts completed iterations, so the row with ``iter = k+1``
    describes the new iterate (u^{k+1}, p^{k+1}); ``eps_k`` and
    ``delta_k`` belong to the step that produced it.  Optional fields are
    ``None`` when not computed (written as empty CSV cells).
    """

    iter: int
    wall_time_s: Optional[float] = None
    obj: Optional[float] = None
    obj_ergodic: Optional[float] = None
    feas: Optional[float] = None
    feas_ergodic: Optional[float] = None
    dual_norm: Optional[float] = None
    eps_k: Optional[float] = None
    delta_k: Optional[float] = None
    lemma1_lhs: Optional[float] = None
    lemma1_rhs: Optional[float] = None
    kkt_res: Optional[float] = None
    dist_sq: Optional[float] = None
    a_k: Optional[float] = None
    b_k: Optional[float] = None
    rho_k: Optional[float] = None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _columns(records, columns=None):
    if columns is not None:
        return tuple(columns)
    cols = TRACE_COLUMNS
    if any(r.a_k is not None for r in records):
        cols = cols + STRONG_COLUMNS
    return cols


def trace_to_csv_text(records: Sequence[TraceRecord], columns=None):
    cols = _columns(records, columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_trace_csv(records, path, columns=None):
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv_text(records, columns))


def write_trace_json(records, path, columns=None):
    cols = _columns(records, columns)
    rows = []
    for r in records:
        row = {}
        for c in cols:
            v = getattr(r, c)
            row[c] = None if v is None else (int(v) if c == "iter" else float(v))
        rows.append(row)
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")


def trace_column(trace, metric):
    """(iters, values) arrays for one metric; None entries become NaN."""
    it = np.array([r.iter for r in trace], dtype=float)
    vals = np.array([np.nan if getattr(r, metric) is None else getattr(r, metric)
                     for r in trace], dtype=float)
    return it, vals


# ---------------------------------------------------------------------------
# residuals


def feasibility_residual(cone: ConeSpec, theta_u):
    """||Pi_{C*}(Theta(u))||, the distance of Theta(u) to -C."""
    th = as_vec(theta_u, cone.dim, "theta_u")
    return float(np.linalg.norm(cone.dual()._project(th)))


def kkt_residual(problem, w_prev: PrimalDual, w_next: PrimalDual, q_k, eps_k, gamma):
    """Norm of the element of the KKT map at w^{k+1} built from one step.

    Primal block::

        grad G(u1) - grad G(u0) + theta1^T (p1 - q) + (grad Omega(u1) - grad Omega(u0))^T q
            + (grad K(u0) - grad K(u1)) / eps

    with theta1 = grad Omega(u1) + grad Phi(u1); dual block (p0 - p1)/gamma.
    For the W|u| form of Phi the sign subgradient is used.
    """
    g, th, core = problem.g, problem.theta, problem.core
    u0, p0 = w_prev.u, w_prev.p
    u1, p1 = w_next.u, w_next.p
    primal = (g.gradient(u1) - g.gradient(u0)
              + th.omega_jt(u1, p1) - th.omega_jt(u0, q_k)
              + th.phi_jt(u1, p1 - q_k)
              + (core.grad(u0) - core.grad(u1)) / eps_k)
    dual = (p0 - p1) / gamma
    return float(np.sqrt(primal @ primal + dual @ dual))


def kkt_bound_constants(problem, gamma, eps, b_omega=None):
    """(a, b) with ||v||^2 <= a ||du||^2 + b ||dp||^2.

    a = (B_G + gamma tau^2 + B_Omega + B/eps)^2 follows from Lipschitz
    bounds on each primal term and ||p^{k+1} - q^k|| <= gamma tau ||du||;
    b = 1/gamma^2.
    """
    bg = problem.g.lipschitz_grad
    tau = problem.theta.tau
    bo = problem.theta.b_omega if b_omega is None else b_omega
    if problem.theta.omega_is_zero:
        bo = 0.0
    if bg is None or tau is None or bo is None:
        return None
    a = (bg + gamma * tau * tau + bo + problem.core.B / eps) ** 2
    return a, 1.0 / gamma ** 2


def generalized_distance(core, gamma, eps_k, w: PrimalDual, reference: Optional[PrimalDual]):
    """[D(u*, u) + eps/(2 gamma) ||p - p*||^2]^{1/2} for a single reference point."""
    if reference is None:
        raise ValueError("generalized distance needs a reference saddle point")
    dp = w.p - reference.p
    return math.sqrt(max(core.distance(reference.u, w.u) + eps_k / (2 * gamma) * float(dp @ dp), 0.0))


def distance_sandwich(core, gamma, eps_lo, eps_hi):
    """Constants (b1, b2) with b1 dist <= dist_{D,eps} <= b2 dist."""
    b1 = math.sqrt(min(core.beta / 2, eps_lo / (2 * gamma)))
    b2 = math.sqrt(max(core.B / 2, eps_hi / (2 * gamma)))
    return b1, b2


# ---------------------------------------------------------------------------
# dual bounds


def dual_bound_orthant(problem, u_hat, lower_bound):
    """(f(u_hat) - lower_bound) / min_j (-Theta_j(u_hat)) for an orthant cone.

    u_hat must be strictly feasible.
    """
    u_hat = as_vec(u_hat, problem.n, "u_hat")
    th = problem.theta_value(u_hat)
    slack = float(np.min(-th))
    if not slack > 0:
        raise ValueError("u_hat is not strictly feasible (some Theta_j(u_hat) >= 0)")
    gap = problem.objective(u_hat) - lower_bound
    return max(gap, 0.0) / slack


def dual_bound_norm_cone(problem, u_hat, lower_bound, nu):
    """Bound on ||p*|| for C the nu-norm cone of dimension m+1.

        m^{max((omega-2)/(2 omega), 0)} * 2^{1/omega} * gap / (-theta0 - ||thetabar||_nu)

    with 1/nu + 1/omega = 1 and m the length of thetabar.
    """
    nu = _parse_nu(nu)
    u_hat = as_vec(u_hat, problem.n, "u_hat")
    th = problem.theta_value(u_hat)
    t0, tb = th[0], th[1:]
    denom = -t0 - _nu_norm(tb, nu)
    if not denom > 0:
        raise ValueError("Theta(u_hat) is not in the interior of -C")
    omega = conjugate_exponent(nu)
    m = tb.size
    if omega == np.inf:
        expo, two = 0.5, 1.0
    else:
        expo, two = max((omega - 2) / (2 * omega), 0.0), 2.0 ** (1.0 / omega)
    gap = max(problem.objective(u_hat) - lower_bound, 0.0)
    return float(m ** expo * two * gap / denom)


# ---------------------------------------------------------------------------
# rates


@dataclass
class RateFit:
    metric: str
    window: tuple
    loglog_slope: float
    contraction_ratio: Optional[float] = None
    geometric_rate: Optional[float] = None
    points: int = 0


def rate_fit(trace, metric, window, geometric=False):
    """Least-squares slope of log(metric) against log(iter) over ``window``.

    ``trace`` is a list of TraceRecord or a pair of arrays (iters,
    values).  With ``geometric=True`` also returns the contraction ratio
    (geometric mean of successive ratios) and the rate exp(slope) of a
    least-squares fit of log(metric) against iter.  A zero inside the
    window truncates it there with a warning.
    """
    k_lo, k_hi = window
    if k_hi < k_lo:
        raise ValueError("empty window")
    if isinstance(trace, tuple):
        it, vals = (np.asarray(a, dtype=float) for a in trace)
    else:
        it, vals = trace_column(trace, metric)
    mask = (it >= k_lo) & (it <= k_hi) & np.isfinite(vals)
    it, vals = it[mask], vals[mask]
    bad = np.nonzero(vals <= 0)[0]
    if bad.size:
        cut = int(bad[0])
        warnings.warn(f"{metric} reaches zero at iter {it[cut]:g}; window truncated", RuntimeWarning)
        it, vals = it[:cut], vals[:cut]
    if it.size < 2:
        raise ValueError(f"not enough positive {metric} values in window {window}")
    x, y = np.log(it), np.log(vals)
    slope = float(np.polyfit(x, y, 1)[0])
    ratio = rate = None
    if geometric:
        ratio = float(np.exp((y[-1] - y[0]) / (it[-1] - it[0])))
        rate = float(np.exp(np.polyfit(it, y, 1)[0]))
    return RateFit(metric, (float(it[0]), float(it[-1])), slope, ratio, rate, int(it.size))


# ---------------------------------------------------------------------------
# saddle gaps


def saddle_gap_estimate(problem, ergodic: PrimalDual, probe_points, gamma=None, augmented=False):
    """max over probes (u, p) of L(u_bar, p) - L(u, p_bar).

    A finite probe set gives a lower bound on the supremum gap.  With
    ``augmented=True`` the augmented Lagrangian L_gamma is used.
    """
    probes = list(probe_points)
    if not probes:
        raise ValueError("empty probe list")
    if augmented:
        if gamma is None:
            raise ValueError("augmented gap needs gamma")
        f = lambda u, p: aug_lagrangian(problem, u, p, gamma)  # noqa: E731
    else:
        f = lambda u, p: lagrangian(problem, u, p)  # noqa: E731
    return max(f(ergodic.u, w.p) - f(w.u, ergodic.p) for w in probes)


def make_probes(problem, count, seed=0, radius_u=1.0, radius_p=1.0, center=None,
                include_reference=True):
    """Seeded probe points in (U ∩ ball) x (C* ∩ ball), plus the reference."""
    rng = np.random.default_rng(seed)
    dual = problem.cone.dual()
    cu = np.zeros(problem.n) if center is None else center.u
    cp = np.zeros(problem.m) if center is None else center.p
    out = []
    for _ in range(count):
        du = rng.normal(size=problem.n)
        du *= radius_u * rng.uniform() ** (1 / problem.n) / max(np.linalg.norm(du), 1e-300)
        dp = rng.normal(size=problem.m)
        dp *= radius_p * rng.uniform() ** (1 / problem.m) / max(np.linalg.norm(dp), 1e-300)
        out.append(PrimalDual(problem.set.project(cu + du), dual._project(cp + dp)))
    if include_reference and problem.reference is not None:
        out.append(PrimalDual(problem.reference.u_star.copy(), problem.reference.p_star.copy()))
    return out


def initial_distance_bound(problem, u, p, u0, p0, eps0, gamma):
    """D(u, u^0) + eps^0/(2 gamma) ||p - p^0||^2."""
    dp = p - p0
    return problem.core.distance(u, u0) + eps0 / (2 * gamma) * float(dp @ dp)


def bifunction_bound(problem, u, p, u0, p0, eps0, gamma, eps_min, t):
    """Right-hand side of the ergodic estimate L(u_bar_t, p) - L(u, p_bar_t) <= ...

    [D(u, u^0) + eps^0/(2 gamma) ||p - p^0||^2] / (eps_min (t + 1)).
    """
    return initial_distance_bound(problem, u, p, u0, p0, eps0, gamma) / (eps_min * (t + 1))


def record_dict(rec: TraceRecord):
    return asdict(rec)


def record_fields():
    return [f.name for f in fields(TraceRecord)]

"""Self-check suites run by ``nccp check``.

Each suite returns a CheckResult; ``run_suites`` runs a selection.  The
per-step descent suite (``lemma1``) accepts a replacement step so that a
deliberately broken iteration can be shown to fail it.
"""
from __future__ import annotations

import warnings

import numpy as np

from . import problems
from .analysis import rate_fit
from .cones import FullSpace, NonnegOrthant, NormCone, Product, Zero
from .fbs import fbs_step
from .oracles import CheckResult, NonsmoothOracle, SmoothOracle, check_c_convexity
from .strong import run_strong
from .structured import StructuredMapSpec, build_structured_map
from .vapp import SolverConfig, _advance, delta_k, init_state, run, \
    solve_primal_subproblem, step_bound, vapp_step

__all__ = ["SUITES", "FAMILIES", "run_suites", "misordered_step", "structured_example"]

FAMILIES = {
    "zero": Zero(4),
    "free": FullSpace(4),
    "orthant": NonnegOrthant(5),
    "soc": NormCone(2, 6),
    "l1cone": NormCone(1, 6),
    "linfcone": NormCone("inf", 6),
    "product": Product([NonnegOrthant(2), NormCone(1, 4), Zero(1), NormCone(2, 3)]),
}


def _mixed(rng, shape):
    scale = rng.choice([1e-2, 1.0, 1e2], size=(shape[0], 1))
    return rng.normal(size=shape) * scale


def suite_cones(samples=10000, seed=0):
    """Moreau decomposition, complementarity, idempotence, nonexpansiveness."""
    worst = 0.0
    for name, cone in FAMILIES.items():
        rng = np.random.default_rng(seed)
        dual = cone.dual()
        V = _mixed(rng, (samples, cone.dim))
        W = _mixed(rng, (samples, cone.dim))
        for v, w in zip(V, W):
            pv = dual._project(v)
            nv = -cone.project(-v)
            s = max(1.0, float(np.abs(v).max()))
            pw = dual._project(w)
            errs = (
                np.linalg.norm(pv + nv - v) / s,
                abs(pv @ nv) / s ** 2,
                np.linalg.norm(dual._project(pv) - pv) / s,
                max(np.linalg.norm(pv - pw) - np.linalg.norm(v - w), 0.0) / max(s, np.abs(w).max()),
            )
            worst = max(worst, max(errs))
    return CheckResult("cones", bool(worst <= 1e-10), worst, f"{samples} samples x {len(FAMILIES)} families")


def suite_prop1(samples=10000, seed=0):
    """2<P(w+u) - P(w+v), u> <= ||u-v||^2 + ||P(w+u)-w||^2 - ||P(w+v)-w||^2."""
    worst = 0.0
    for cone in FAMILIES.values():
        rng = np.random.default_rng(seed + 1)
        dual = cone.dual()
        U, V, W = (_mixed(rng, (samples, cone.dim)) for _ in range(3))
        for u, v, w in zip(U, V, W):
            a, b = dual._project(w + u), dual._project(w + v)
            lhs = 2 * (a - b) @ u
            rhs = (u - v) @ (u - v) + (a - w) @ (a - w) - (b - w) @ (b - w)
            worst = max(worst, (lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    return CheckResult("prop1", bool(worst <= 1e-10), worst, f"{samples} samples per family")


def misordered_step(problem, state, config, proj=None):
    """A wrong iteration: the primal step uses the stale multiplier and q is
    formed only after it (q = P(p + gamma Theta(u^{k+1})))."""
    from .cones import DualProjector

    if proj is None:
        proj = DualProjector(problem.cone, config.dual_bound)
    gamma, eps = config.gamma, state.eps_k
    stale = state.p if state.q is None else state.q
    u1 = solve_primal_subproblem(problem, state.u, stale, eps, config.resolved_inner_tol)
    theta1 = problem.theta.value(u1)
    q = proj(state.p + gamma * theta1)
    delta = delta_k(problem, state.u, u1, q, eps, gamma, config.dual_bound)
    return _advance(problem, state, config, q, u1, theta1, eps, delta, proj)


def suite_lemma1(samples=200, seed=0, step=None):
    """Per-step descent inequality on the 1-D instance and a planted QP."""
    worst = np.inf
    for prob in (problems.one_dim(), problems.linear_qp(seed)):
        sb = step_bound(prob, 1.0)
        cfg = SolverConfig(gamma=1.0, eps0=0.99 * sb if step is None else 0.4, max_iter=samples,
                           tol_feas=0.0, tol_obj=0.0, check_step_bound=step is None)
        r = run(prob, cfg, step=step)
        worst = min(worst, min(t.lemma1_rhs - t.lemma1_lhs for t in r.trace))
    return CheckResult("lemma1", bool(worst >= -1e-8), worst, "min slack rhs - lhs")


def suite_lemma2(samples=200, seed=0):
    worst = np.inf
    for prob in problems.strong_suite(seed):
        r = run_strong(prob, SolverConfig(max_iter=samples, tol_feas=0.0, tol_obj=0.0))
        worst = min(worst, min(rhs - lhs for lhs, rhs in r.extras["lemma2"]))
    return CheckResult("lemma2", bool(worst >= -1e-8), worst, "min slack rhs - lhs")


def suite_eq20(samples=200, seed=0):
    """Delta^k against its lower bound in fixed mode."""
    worst = np.inf
    for prob in (problems.linear_qp(seed), problems.l1_least_squares(seed)):
        sb = step_bound(prob, 1.0)
        cfg = SolverConfig(gamma=1.0, eps0=0.99 * sb, max_iter=samples, tol_feas=0.0, tol_obj=0.0)
        state = init_state(prob, cfg)
        for _ in range(samples):
            new = vapp_step(prob, state, cfg)
            d = new.delta
            worst = min(worst, d.value - d.lower_bound)
            state = new
    return CheckResult("eq20", bool(worst >= -1e-9), worst, "min Delta - lower bound")


def suite_fbs(samples=20, seed=0):
    worst = 0.0
    for i in range(samples):
        prob = problems.random_smooth_instance(seed + i)
        sb = step_bound(prob, 0.7)
        cfg = SolverConfig(gamma=0.7, eps0=0.9 * sb if sb else 0.1, check_step_bound=False)
        a = b = init_state(prob, cfg)
        for _ in range(30):
            a, b = vapp_step(prob, a, cfg), fbs_step(prob, b, cfg)
            worst = max(worst, float(np.abs(a.u - b.u).max()), float(np.abs(a.p - b.p).max()))
    return CheckResult("fbs", bool(worst <= 1e-10), worst, f"{samples} instances x 30 steps")


def structured_example(variant, nu, n=4, seed=0):
    """A random stacked map of the given variant."""
    rng = np.random.default_rng(seed)
    l, mq, ma = 3, 2, 2
    gs = []
    for _ in range(l):
        R = rng.normal(size=(n, n))
        gs.append(SmoothOracle.quadratic(R.T @ R / n, rng.normal(size=n)))
    Q = rng.uniform(size=(mq, l))
    w = Q.sum(axis=0) + rng.uniform(size=l)
    R0 = rng.normal(size=(n, n))
    g0 = (SmoothOracle.quadratic(R0.T @ R0 / n, rng.normal(size=n)) if seed % 2 == 0
          else NonsmoothOracle.l1(n, rng.uniform(0.5, 1.5, size=n)))
    affine = (rng.normal(size=(ma, n)), rng.normal(size=ma))
    spec = StructuredMapSpec(g0=g0, g=gs, Q=Q, omega_weights=w,
                             affine=affine if variant != "i" else None,
                             variant=variant, nu=nu, n=n)
    return build_structured_map(spec)


def suite_cconvexity(samples=10000, seed=0):
    worst = 0.0
    ok = True
    for variant in ("i", "ii", "iii"):
        for nu in (1, 2, "inf"):
            for s in (seed, seed + 1):
                th = structured_example(variant, nu, seed=s)
                res = check_c_convexity(th, th.certificate, samples=samples, seed=s, tol=1e-10)
                worst = max(worst, res.worst)
                ok = ok and res.passed
    return CheckResult("cconvexity", bool(ok), worst, "variants i-iii, nu in {1, 2, inf}")


def suite_rates(samples=2000, seed=0):
    """Ergodic feasibility slopes of VAPP (O(1/t)) and VAPP-S (O(1/t^2))."""
    prob = problems.linear_qp(seed)
    cfg = SolverConfig(gamma=1.0, eps0=0.99 * step_bound(prob, 1.0), max_iter=samples,
                       tol_feas=0.0, tol_obj=0.0)
    r = run(prob, cfg)
    s1 = rate_fit(r.trace, "feas_ergodic", (100, samples)).loglog_slope
    rs = run_strong(problems.strong_suite(seed)[1], SolverConfig(max_iter=samples, tol_feas=0.0,
                                                                 tol_obj=0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s2 = rate_fit(rs.trace, "feas_ergodic", (10, samples)).loglog_slope
    ok = s1 <= -0.9 and s2 <= -1.8
    return CheckResult("rates", bool(ok), max(s1 + 0.9, s2 + 1.8), f"slopes {s1:.3f} (VAPP), {s2:.3f} (VAPP-S)")


SUITES = {
    "cones": suite_cones,
    "prop1": suite_prop1,
    "lemma1": suite_lemma1,
    "lemma2": suite_lemma2,
    "eq20": suite_eq20,
    "fbs": suite_fbs,
    "cconvexity": suite_cconvexity,
    "rates": suite_rates,
}

_DEFAULT_SAMPLES = {"cones": 2000, "prop1": 2000, "lemma1": 300, "lemma2": 300, "eq20": 300,
                    "fbs": 20, "cconvexity": 2000, "rates": 2000}


def run_suites(names=None, samples=None, seed=0, lemma1_step=None):
    names = list(SUITES) if not names else list(names)
    out = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
        n = _DEFAULT_SAMPLES[name] if samples is None else samples
        if name == "rates":
            # a slope fit needs a long run; --samples can only extend it
            n = max(n, _DEFAULT_SAMPLES["rates"])
        if name == "lemma1":
            out.append(suite_lemma1(n, seed, step=lemma1_step))
        else:
            out.append(SUITES[name](n, seed))
    return out

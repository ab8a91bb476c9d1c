"""Command-line driver.

    nccp solve SPEC [--variant ...] [--gamma G] [--eps0 E] ...
    nccp bench-sensvm [--m M --n N --s S --alpha A --seed K] [--variants ...]
    nccp check [--suites a,b] [--samples N] [--seed K]

Exit codes: 0 converged / all checks pass, 1 error, 2 iteration cap.
Traces carry no wall-clock column unless ``--timing`` is given, so two
runs with the same manifest write byte-identical trace files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .analysis import rate_fit, write_trace_csv, write_trace_json
from .errors import NccpError
from .specio import build_problem, load_spec, spec_to_dict
from .vapp import SolverConfig, run, step_bound

__all__ = ["RunManifest", "main", "cmd_solve", "cmd_bench_sensvm", "cmd_check"]

EXIT_OK, EXIT_ERROR, EXIT_MAXITER = 0, 1, 2
VARIANTS = ("vapp", "vapp-m", "vapp-s", "vapp-sm", "mirror-prox")
BENCH_VARIANTS = ("vapp-m-I", "vapp-m-C", "mirror-prox-SP")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    input_hash: str
    outputs: dict = field(default_factory=dict)

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")


def content_hash(*parts):
    """sha256 over canonical JSON of the inputs (git-style content address)."""
    h = hashlib.sha256()
    for p in parts:
        blob = json.dumps(p, sort_keys=True, default=_jsonable).encode()
        h.update(b"blob %d\0" % len(blob))
        h.update(blob)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _write_trace(trace, outdir, stem, fmt):
    path = os.path.join(outdir, f"{stem}.{fmt}")
    if fmt == "csv":
        write_trace_csv(trace, path)
    else:
        write_trace_json(trace, path)
    return path


def _fits(trace):
    out = {}
    if len(trace) < 20:
        return out
    k_hi = trace[-1].iter
    for metric in ("feas_ergodic", "obj_ergodic", "kkt_res"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                out[metric] = rate_fit(trace, metric, (10, k_hi)).loglog_slope
            except ValueError:
                out[metric] = None
    return out


def _final(trace):
    if not trace:
        return {}
    t = trace[-1]
    return {k: getattr(t, k) for k in ("obj", "obj_ergodic", "feas", "feas_ergodic", "dual_norm")}


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args):
    try:
        spec = load_spec(args.spec)
        problem = build_problem(spec)
    except (NccpError, ValueError, OSError) as exc:
        return _err(f"cannot load spec: {exc}")
    variant = args.variant
    if variant in ("vapp-m", "vapp-sm") and args.dual_bound is None:
        return _err(f"--variant {variant} needs --dual-bound")
    M = args.dual_bound if variant in ("vapp-m", "vapp-sm", "mirror-prox") else None
    if variant in ("vapp", "vapp-s") and args.dual_bound is not None:
        return _err(f"--dual-bound is only used by the bounded variants, not {variant}")
    try:
        if args.backtrack_eta is not None:
            eps_mode, eps0 = "backtracking", (args.eps0 if args.eps0 is not None else 1.0)
        elif args.eps0 is not None:
            eps_mode, eps0 = "fixed", args.eps0
        else:
            sb = step_bound(problem, args.gamma, M)
            if sb is None or not np.isfinite(sb):
                eps_mode, eps0 = "backtracking", 1.0
            else:
                eps_mode, eps0 = "fixed", 0.99 * sb
        cfg = SolverConfig(
            gamma=args.gamma, eps0=eps0, eps_mode=eps_mode,
            eta=args.backtrack_eta if args.backtrack_eta is not None else 0.5,
            dual_bound=M, max_iter=args.max_iter, tol_feas=args.tol_feas, tol_obj=args.tol_obj,
            seed=args.seed, stop_on=args.stop_on, timing=args.timing,
        )
        if variant in ("vapp", "vapp-m"):
            res = run(problem, cfg)
        elif variant in ("vapp-s", "vapp-sm"):
            from .strong import run_strong

            res = run_strong(problem, cfg)
        else:
            from .mirror_prox import run_mirror_prox

            res = run_mirror_prox(problem, gamma=args.eps0, M=M, max_iter=args.max_iter,
                                  tol_feas=args.tol_feas, tol_obj=args.tol_obj, stop_on=args.stop_on,
                                  timing=args.timing)
    except (NccpError, ValueError) as exc:
        return _err(str(exc))
    os.makedirs(args.output, exist_ok=True)
    trace_path = _write_trace(res.trace, args.output, "trace", args.format)
    summary = {
        "problem": problem.name, "variant": variant, "status": res.status,
        "iterations": res.iterations, "wall_time_s": res.total_time_s,
        "final": _final(res.trace), "rate_fits": _fits(res.trace),
        "solution": {"u": res.solution.u.tolist(), "p": res.solution.p.tolist()},
        "ergodic": {"u": res.ergodic.u.tolist(), "p": res.ergodic.p.tolist()},
    }
    summary_path = os.path.join(args.output, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    cfg_snapshot = asdict(cfg)
    cfg_snapshot.update(variant=variant, format=args.format)
    man = RunManifest("solve", cfg_snapshot, args.seed,
                      content_hash(spec_to_dict(spec), cfg_snapshot),
                      {"trace": trace_path, "summary": summary_path})
    man.write(os.path.join(args.output, "manifest.json"))
    print(f"{variant}: {res.status} after {res.iterations} iterations")
    return EXIT_OK if res.status == "converged" else EXIT_MAXITER


# ---------------------------------------------------------------------------
# SEN-SVM benchmark


def _bench_one(inst, variant, args):
    from .mirror_prox import run_mirror_prox_sen_svm
    from .structured import run_sen_svm

    if variant == "mirror-prox-SP":
        return run_mirror_prox_sen_svm(inst, gamma=args.mp_gamma, max_iter=args.max_iter,
                                       tol_feas=args.tol_feas, tol_obj=args.tol_obj,
                                       timing=args.timing)
    form = variant[-1]
    radius = args.radius_factor * float(np.linalg.norm(inst.u_star))
    M = inst.M1 if form == "I" else inst.M2
    tau = inst.tau_on_ball(radius, form)
    eps = args.eps0
    if eps is None:
        eps = 0.99 / (inst.a_norm_sq + M * 2 * (1 - inst.alpha) * inst.q_norm + args.gamma * tau ** 2)
    return run_sen_svm(inst, form, args.gamma, eps, max_iter=args.max_iter, tol_feas=args.tol_feas,
                       tol_obj=args.tol_obj, timing=args.timing,
                       eps_mode="backtracking" if args.backtrack_eta else "fixed",
                       eta=args.backtrack_eta or 0.5)


def cmd_bench_sensvm(args):
    from .structured import gen_sen_svm

    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in variants if v not in BENCH_VARIANTS]
    if bad or not variants:
        return _err(f"unknown variant(s) {bad}; choose from {', '.join(BENCH_VARIANTS)}")
    try:
        inst = gen_sen_svm(args.m, args.n, args.s, args.alpha, args.seed)
    except ValueError as exc:
        return _err(str(exc))
    os.makedirs(args.output, exist_ok=True)
    results, outputs = {}, {}
    try:
        for v in variants:
            results[v] = _bench_one(inst, v, args)
            outputs[v] = _write_trace(results[v].trace, args.output, f"trace_{v}", args.format)
    except (NccpError, ValueError) as exc:
        return _err(str(exc))
    per_iter = {v: r.mean_step_time for v, r in results.items()}
    ratios = {}
    if "mirror-prox-SP" in per_iter and per_iter["mirror-prox-SP"] > 0:
        for v in ("vapp-m-I", "vapp-m-C"):
            if v in per_iter:
                ratios[f"{v}/mirror-prox-SP"] = per_iter[v] / per_iter["mirror-prox-SP"]
    if "vapp-m-I" in per_iter and "vapp-m-C" in per_iter and per_iter["vapp-m-C"] > 0:
        ratios["vapp-m-I/vapp-m-C"] = per_iter["vapp-m-I"] / per_iter["vapp-m-C"]
    summary = {
        "instance": {"m": args.m, "n": args.n, "s": args.s, "alpha": args.alpha, "seed": args.seed,
                     "delta": inst.delta, "M1": inst.M1, "M2": inst.M2},
        "variants": {
            v: {"status": r.status, "iterations": r.iterations, "step_size": r.eps,
                "objective": inst.objective(r.u),
                "constraint": inst.constraint(r.u),
                "per_iteration_s": r.mean_step_time, "step_time_s": r.step_time_s}
            for v, r in results.items()
        },
        "cost_ratios": ratios,
    }
    summary_path = os.path.join(args.output, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    cfg = {k: getattr(args, k) for k in ("m", "n", "s", "alpha", "seed", "variants", "gamma", "eps0",
                                         "mp_gamma", "max_iter", "tol_feas", "tol_obj", "format",
                                         "radius_factor", "backtrack_eta")}
    man = RunManifest("bench-sensvm", cfg, args.seed, content_hash(cfg),
                      dict(outputs, summary=summary_path))
    man.write(os.path.join(args.output, "manifest.json"))
    for v, r in results.items():
        print(f"{v}: {r.status} after {r.iterations} iterations, {r.mean_step_time * 1e6:.1f} us/iter")
    return EXIT_OK if all(r.status == "converged" for r in results.values()) else EXIT_MAXITER


# ---------------------------------------------------------------------------
# check


def cmd_check(args):
    from .checks import SUITES, misordered_step, run_suites

    names = [s.strip() for s in args.suites.split(",")] if args.suites else list(SUITES)
    step = misordered_step if args.mutate == "dual-order" else None
    try:
        results = run_suites(names, args.samples, args.seed, lemma1_step=step)
    except ValueError as exc:
        return _err(str(exc))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: worst={r.worst:.3e} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="nccp", description="Primal-dual solvers for convex cone programs")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a JSON problem spec")
    s.add_argument("spec")
    s.add_argument("--variant", choices=VARIANTS, default="vapp")
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--eps0", type=float, default=None,
                   help="primal step (Mirror-Prox: its step); default from the constants")
    s.add_argument("--backtrack-eta", type=float, default=None)
    s.add_argument("--dual-bound", type=float, default=None)
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--tol-feas", type=float, default=1e-6)
    s.add_argument("--tol-obj", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stop-on", choices=("ergodic", "last"), default="last")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--output", default="nccp_out")
    s.add_argument("--timing", action="store_true", help="record wall time in the trace")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench-sensvm", help="SEN-SVM benchmark")
    b.add_argument("--m", type=int, default=20)
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--s", type=int, default=3)
    b.add_argument("--alpha", type=float, default=0.4)
    b.add_argument("--seed", type=int, default=7)
    b.add_argument("--variants", default=",".join(BENCH_VARIANTS))
    b.add_argument("--gamma", type=float, default=1e-3)
    b.add_argument("--eps0", type=float, default=None)
    b.add_argument("--mp-gamma", type=float, default=None)
    b.add_argument("--backtrack-eta", type=float, default=None)
    b.add_argument("--radius-factor", type=float, default=2.0)
    b.add_argument("--max-iter", type=int, default=50000)
    b.add_argument("--tol-feas", type=float, default=1e-5)
    b.add_argument("--tol-obj", type=float, default=1e-5)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--output", default="nccp_bench")
    b.add_argument("--timing", action="store_true")
    b.set_defaults(func=cmd_bench_sensvm)

    c = sub.add_parser("check", help="run the self-check suites")
    c.add_argument("--suites", default=None)
    c.add_argument("--samples", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--mutate", choices=("dual-order",), default=None, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

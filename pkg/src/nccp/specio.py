"""JSON problem specs.

A spec is one JSON document::

    {
      "name": "...",
      "objective": {"smooth": {...}, "nonsmooth": {...}},
      "constraint_map": {...},
      "cone": {...},
      "set": {...},
      "core": {...},
      "constants": {...},
      "reference": {...}
    }

Matrix and vector payloads are inline lists or ``{"path": "file"}``
with a path relative to the spec file (``.npy`` or ``.csv``).  Smooth
parts: ``quadratic`` (P, c, const), ``least_squares`` (A, b), ``zero``
(dim); declared ``lipschitz_grad`` / ``strong_convexity`` override the
computed ones.  Nonsmooth parts: ``zero``, ``l1`` (weight), ``sq_l2``
(mu).  Constraint maps: ``affine`` (A, b, ``"in": "phi" | "omega"``).
Instead of objective and constraint map a spec may name a generator,
``{"generator": {"sen_svm": {"m", "n", "s", "alpha", "seed",
"formulation"}}}``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cones import ConeSpec, cone_from_dict
from .errors import ConfigError
from .oracles import BregmanCore, ConeMapOracle, FeasibleSet, NccpProblem, NonsmoothOracle, \
    Reference, SmoothOracle

__all__ = ["ProblemSpec", "parse_spec", "load_spec", "dump_spec", "spec_to_dict", "build_problem"]

_SMOOTH_KEYS = {
    "quadratic": {"P": 2, "c": 1},
    "least_squares": {"A": 2, "b": 1},
    "zero": {},
}
_MAP_KEYS = {"affine": {"A": 2, "b": 1}}


@dataclass
class ProblemSpec:
    name: str = "problem"
    smooth: dict = field(default_factory=dict)
    nonsmooth: dict = field(default_factory=lambda: {"type": "zero"})
    constraint_map: dict = field(default_factory=dict)
    cone: Optional[ConeSpec] = None
    set: Optional[dict] = None
    core: Optional[dict] = None
    constants: dict = field(default_factory=dict)
    reference: Optional[dict] = None
    generator: Optional[dict] = None

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return _canon(spec_to_dict(self)) == _canon(spec_to_dict(other))


def _canon(d):
    return json.dumps(d, sort_keys=True)


def _load_array(v, ndim, base, what):
    if isinstance(v, dict):
        if "path" not in v:
            raise ConfigError(f"{what}: payload object needs a 'path'")
        path = os.path.join(base, v["path"])
        if not os.path.exists(path):
            raise ConfigError(f"{what}: file {v['path']!r} not found")
        arr = np.load(path) if path.endswith(".npy") else np.loadtxt(path, delimiter=",", ndmin=ndim)
    else:
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{what}: not numeric") from exc
    arr = np.asarray(arr, dtype=float)
    if ndim == 2:
        arr = np.atleast_2d(arr)
    else:
        arr = np.atleast_1d(arr)
    if arr.ndim != ndim:
        raise ConfigError(f"{what}: expected {ndim}-d data, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what}: non-finite entries")
    return arr


def _arrays(d, keys, base, where):
    out = dict(d)
    for k, nd in keys.items():
        if k in d and d[k] is not None:
            out[k] = _load_array(d[k], nd, base, f"{where}.{k}")
    return out


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}: missing {key!r}")
    return d[key]


def parse_spec(doc: dict, base_dir=".") -> ProblemSpec:
    """Validate and load a spec document (arrays become numpy arrays)."""
    if not isinstance(doc, dict):
        raise ConfigError("spec must be a JSON object")
    spec = ProblemSpec(name=str(doc.get("name", "problem")))
    if "generator" in doc:
        gen = doc["generator"]
        if not isinstance(gen, dict) or set(gen) != {"sen_svm"}:
            raise ConfigError("unknown generator")
        g = dict(gen["sen_svm"])
        for k in ("m", "n", "s", "alpha", "seed"):
            _require(g, k, "generator.sen_svm")
        g.setdefault("formulation", "C")
        if g["formulation"] not in ("I", "C"):
            raise ConfigError("generator.sen_svm.formulation must be 'I' or 'C'")
        spec.generator = {"sen_svm": g}
        spec.constants = dict(doc.get("constants", {}))
        return spec
    obj = _require(doc, "objective", "spec")
    sm = dict(_require(obj, "smooth", "objective"))
    t = _require(sm, "type", "objective.smooth")
    if t not in _SMOOTH_KEYS:
        raise ConfigError(f"objective.smooth: unknown type {t!r}")
    spec.smooth = _arrays(sm, _SMOOTH_KEYS[t], base_dir, "objective.smooth")
    ns = dict(obj.get("nonsmooth", {"type": "zero"}))
    if ns.get("type") not in ("zero", "l1", "sq_l2"):
        raise ConfigError(f"objective.nonsmooth: unknown type {ns.get('type')!r}")
    if ns["type"] == "l1" and isinstance(ns.get("weight"), (list, dict)):
        ns["weight"] = _load_array(ns["weight"], 1, base_dir, "objective.nonsmooth.weight")
    spec.nonsmooth = ns
    cm = dict(_require(doc, "constraint_map", "spec"))
    t = _require(cm, "type", "constraint_map")
    if t not in _MAP_KEYS:
        raise ConfigError(f"constraint_map: unknown type {t!r}")
    cm.setdefault("in", "phi")
    if cm["in"] not in ("phi", "omega"):
        raise ConfigError("constraint_map.in must be 'phi' or 'omega'")
    spec.constraint_map = _arrays(cm, _MAP_KEYS[t], base_dir, "constraint_map")
    try:
        spec.cone = cone_from_dict(_require(doc, "cone", "spec"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cone: {exc}") from exc
    spec.set = doc.get("set")
    spec.core = doc.get("core")
    spec.constants = dict(doc.get("constants", {}))
    if doc.get("reference") is not None:
        ref = dict(doc["reference"])
        for k in ("u_star", "p_star"):
            ref[k] = _load_array(_require(ref, k, "reference"), 1, base_dir, f"reference.{k}")
        spec.reference = ref
    return spec


def load_spec(path) -> ProblemSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return parse_spec(doc, os.path.dirname(os.path.abspath(path)))


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def spec_to_dict(spec: ProblemSpec) -> dict:
    """Serialize with inline payloads."""
    d = {"name": spec.name}
    if spec.generator is not None:
        d["generator"] = _plain(spec.generator)
        if spec.constants:
            d["constants"] = _plain(spec.constants)
        return d
    d["objective"] = {"smooth": _plain(spec.smooth), "nonsmooth": _plain(spec.nonsmooth)}
    d["constraint_map"] = _plain(spec.constraint_map)
    d["cone"] = spec.cone.to_dict()
    for k in ("set", "core", "reference"):
        v = getattr(spec, k)
        if v is not None:
            d[k] = _plain(v)
    if spec.constants:
        d["constants"] = _plain(spec.constants)
    return d


def dump_spec(spec: ProblemSpec, path):
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _build_smooth(sm):
    t = sm["type"]
    if t == "quadratic":
        g = SmoothOracle.quadratic(sm["P"], sm.get("c"), float(sm.get("const", 0.0)))
    elif t == "least_squares":
        g = SmoothOracle.least_squares(sm["A"], sm["b"])
    else:
        g = SmoothOracle.zero(int(_require(sm, "dim", "objective.smooth")))
    if "lipschitz_grad" in sm:
        g.lipschitz_grad = float(sm["lipschitz_grad"])
    if "strong_convexity" in sm:
        g.strong_convexity = float(sm["strong_convexity"])
    return g


def _build_nonsmooth(ns, n):
    t = ns["type"]
    if t == "zero":
        return NonsmoothOracle.zero(n)
    if t == "l1":
        return NonsmoothOracle.l1(n, ns.get("weight", 1.0))
    return NonsmoothOracle.sq_l2(n, float(_require(ns, "mu", "objective.nonsmooth")))


def build_problem(spec: ProblemSpec):
    """NccpProblem described by the spec (and the SEN-SVM instance for generator specs)."""
    c = spec.constants
    if spec.generator is not None:
        from .structured import gen_sen_svm

        g = spec.generator["sen_svm"]
        inst = gen_sen_svm(int(g["m"]), int(g["n"]), int(g["s"]), float(g["alpha"]), int(g["seed"]))
        tau = c.get("tau")
        prob = inst.problem_I(tau) if g["formulation"] == "I" else inst.problem_C(tau)
        prob.name = spec.name
        return prob
    g = _build_smooth(spec.smooth)
    n = g.dim
    j = _build_nonsmooth(spec.nonsmooth, n)
    cm = spec.constraint_map
    theta = ConeMapOracle.affine(cm["A"], cm.get("b"), as_phi=(cm["in"] == "phi"))
    if "tau" in c:
        theta.tau = float(c["tau"])
    if "b_omega" in c:
        theta.b_omega = float(c["b_omega"])
    if "b_omega_components" in c:
        theta.b_omega_components = [float(x) for x in c["b_omega_components"]]
    try:
        U = FeasibleSet.from_dict(spec.set, n) if spec.set is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"set: {exc}") from exc
    core = None
    if spec.core is not None:
        kind = spec.core.get("type", "half_squared")
        if kind == "half_squared":
            core = BregmanCore.half_squared(n)
        elif kind == "diagonal":
            core = BregmanCore.diagonal(np.asarray(spec.core["weights"], dtype=float))
        else:
            raise ConfigError(f"core: unknown type {kind!r}")
    ref = None
    if spec.reference is not None:
        r = spec.reference
        ref = Reference(np.array(r["u_star"]), np.array(r["p_star"]), r.get("opt_value"))
    try:
        return NccpProblem(g, j, theta, spec.cone, U, core, ref, spec.name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


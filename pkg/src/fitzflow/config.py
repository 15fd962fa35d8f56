"""Experiment configuration: YAML documents validated into ExperimentConfig.

A document is a mapping with a ``command`` key and command-specific
sections. Inside operator / function / representative descriptors a number
may be replaced by a sequence parameter ``{seq: {const: a, coef: b, power: p}}``
standing for ``a + b * n**(-p)``; :func:`resolve` substitutes a given ``n``
(``n = inf`` gives the limit ``a``).
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .exceptions import ConfigError

COMMANDS = ("conjugate", "fitz", "solve", "gamma", "stability")
KINDS = ("MM", "DNE1", "DNE2")

__all__ = ["COMMANDS", "ExperimentConfig", "load_config", "parse_config", "resolve", "seq_value", "n_values"]


@dataclass
class ExperimentConfig:
    """Validated run description; ``body`` holds the command's sections."""

    command: str
    seed: int = 0
    output: str = None
    body: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def seq_value(spec, n):
    """``const + coef * n**(-power)``; ``n = inf`` gives ``const``."""
    a = float(spec.get("const", 0.0))
    b = float(spec.get("coef", 0.0))
    p = float(spec.get("power", 1.0))
    if math.isinf(n):
        return a
    return a + b * float(n) ** (-p)


def resolve(desc, n):
    """Copy of ``desc`` with every ``{seq: ...}`` replaced by its value at ``n``."""
    if isinstance(desc, dict):
        if set(desc) == {"seq"}:
            return seq_value(desc["seq"], n)
        return {k: resolve(v, n) for k, v in desc.items()}
    if isinstance(desc, list):
        return [resolve(v, n) for v in desc]
    return desc


def _has_seq(desc):
    if isinstance(desc, dict):
        return set(desc) == {"seq"} or any(_has_seq(v) for v in desc.values())
    if isinstance(desc, list):
        return any(_has_seq(v) for v in desc)
    return False


def n_values(spec, where="n_list"):
    """A list of positive indices from a list or ``{start, stop, step}`` / ``{powers_of_two: [a, b]}``."""
    if isinstance(spec, list):
        out = spec
    elif isinstance(spec, dict) and "powers_of_two" in spec:
        a, b = spec["powers_of_two"]
        out = [2**k for k in range(int(a), int(b) + 1)]
    elif isinstance(spec, dict) and "stop" in spec:
        out = list(range(int(spec.get("start", 1)), int(spec["stop"]) + 1, int(spec.get("step", 1))))
    else:
        raise ConfigError(where, "expected a list of integers, {start, stop, step} or {powers_of_two: [a, b]}")
    try:
        out = [int(v) for v in out]
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, f"entries must be integers ({exc})") from exc
    if len(out) < 2 or any(v < 1 for v in out):
        raise ConfigError(where, "needs at least two positive integers")
    return sorted(set(out))


# ---------------------------------------------------------------------------
# Field checks
# ---------------------------------------------------------------------------


def _get(sec, key, where, kind=None, default=..., choices=None):
    name = f"{where}.{key}" if where else key
    if not isinstance(sec, dict):
        raise ConfigError(where or "<document>", "expected a mapping")
    if key not in sec or sec[key] is None:
        if default is ...:
            raise ConfigError(name, "is required")
        return default
    val = sec[key]
    if kind is not None:
        try:
            if kind is int and (isinstance(val, bool) or float(val) != int(val)):
                raise ValueError("not an integer")
            val = kind(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(name, f"expected {kind.__name__}, got {sec[key]!r}") from exc
    if choices is not None and val not in choices:
        raise ConfigError(name, f"must be one of {list(choices)}, got {val!r}")
    return val


def _descriptor(sec, key, where, required=True):
    name = f"{where}.{key}" if where else key
    d = sec.get(key)
    if d is None:
        if required:
            raise ConfigError(name, "is required")
        return None
    if not isinstance(d, dict) or "tag" not in d:
        raise ConfigError(name, "must be a mapping with a 'tag'")
    return d


def _vector(val, name):
    try:
        arr = np.atleast_1d(np.asarray(val, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"expected numbers, got {val!r}") from exc
    if arr.ndim != 1:
        raise ConfigError(name, "expected a scalar or flat list")
    return arr.tolist()


def _box(sec, key, where, required=True):
    name = f"{where}.{key}" if where else key
    b = sec.get(key)
    if b is None:
        if required:
            raise ConfigError(name, "is required")
        return None
    if not isinstance(b, dict) or "lo" not in b or "hi" not in b:
        raise ConfigError(name, "must have 'lo' and 'hi'")
    lo, hi = _vector(b["lo"], name + ".lo"), _vector(b["hi"], name + ".hi")
    if len(lo) != len(hi) or any(a > c for a, c in zip(lo, hi)):
        raise ConfigError(name, "needs lo <= hi with equal lengths")
    return (lo, hi)


def _grid(sec, where):
    g = sec.get("grid")
    if not isinstance(g, dict):
        raise ConfigError(f"{where}.grid", "must be a mapping with T and N")
    T = _get(g, "T", f"{where}.grid", float, 1.0)
    N = _get(g, "N", f"{where}.grid", int)
    if T <= 0 or N < 1:
        raise ConfigError(f"{where}.grid", "needs T > 0 and N >= 1")
    return {"T": T, "N": N}


def _source(sec, where):
    s = sec.get("source")
    if s is None:
        return None
    if not isinstance(s, dict) or not set(s) <= {"constant", "nodal", "file", "sine"} or not s:
        raise ConfigError(f"{where}.source", "allowed keys: constant, nodal, file, sine")
    if "sine" in s:
        sn = s["sine"]
        if not isinstance(sn, dict) or "amplitude" not in sn:
            raise ConfigError(f"{where}.source.sine", "needs an amplitude")
    return s


def _flow_body(doc, where, sequence=False):
    body = {
        "kind": _get(doc, "kind", where, str, choices=KINDS),
        "operator": _descriptor(doc, "operator", where),
        "grid": _grid(doc, where),
        "source": _source(doc, where),
    }
    if body["kind"] == "DNE1":
        body["w0"] = _vector(_get(doc, "w0", where), f"{where}.w0" if where else "w0")
    else:
        body["u0"] = _vector(_get(doc, "u0", where), f"{where}.u0" if where else "u0")
    if body["kind"] != "MM":
        body["potential"] = _descriptor(doc, "potential", where)
    opt = doc.get("optimizer") or {}
    if not isinstance(opt, dict):
        raise ConfigError("optimizer", "must be a mapping")
    allowed = {"tol_abs", "tol_factor", "tol_rel", "patience", "max_iter", "weighted", "method"}
    bad = set(opt) - allowed
    if bad:
        raise ConfigError(f"optimizer.{sorted(bad)[0]}", "unknown optimizer setting")
    body["optimizer"] = opt
    return body


def parse_config(doc, path_base="."):
    """Validate a loaded document into an :class:`ExperimentConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    cmd = _get(doc, "command", "", str, choices=COMMANDS)
    seed = _get(doc, "seed", "", int, 0)
    output = _get(doc, "output", "", str, None)
    body = {}
    if cmd == "conjugate":
        body["function"] = _descriptor(doc, "function", "")
        lat = doc.get("lattice") or {}
        body["lattice"] = {
            "lo": _vector(lat.get("lo", -3.0), "lattice.lo"),
            "hi": _vector(lat.get("hi", 3.0), "lattice.hi"),
            "n": _get(lat, "n", "lattice", int, 61),
        }
        if body["lattice"]["n"] < 3:
            raise ConfigError("lattice.n", "needs at least 3 nodes")
    elif cmd == "fitz":
        body["operator"] = _descriptor(doc, "operator", "")
        body["representative"] = _descriptor(doc, "representative", "", required=False)
        checks = doc.get("checks", ["represents"])
        if not isinstance(checks, list) or not set(checks) <= {"represents", "band"}:
            raise ConfigError("checks", "list drawn from ['represents', 'band']")
        body["checks"] = checks
        body["box"] = _box(doc, "box", "")
        body["dual_box"] = _box(doc, "dual_box", "", required=False)
        body["density"] = _get(doc, "density", "", int, 21)
        body["probe_density"] = _get(doc, "probe_density", "", int, None)
    elif cmd == "solve":
        body.update(_flow_body(doc, ""))
    elif cmd == "gamma":
        mode = _get(doc, "mode", "", str, "static", choices=("static", "evolutionary"))
        body["mode"] = mode
        body["n_list"] = n_values(doc.get("n_list"), "n_list")
        if mode == "static":
            body["family"] = _descriptor(doc, "family", "")
            body["limit"] = _descriptor(doc, "limit", "", required=False)
            body["box"] = _box(doc, "box", "")
            body["density"] = _get(doc, "density", "", int, 9)
            body["tol"] = _get(doc, "tol", "", float, 1e-6)
            k = doc.get("kuratowski")
            if k is not None:
                if not isinstance(k, dict) or "v" not in k or "vs_bounds" not in k:
                    raise ConfigError("kuratowski", "needs 'v' ({lo, hi, n}) and 'vs_bounds'")
                body["kuratowski"] = {
                    "v": {
                        "lo": _get(k["v"], "lo", "kuratowski.v", float),
                        "hi": _get(k["v"], "hi", "kuratowski.v", float),
                        "n": _get(k["v"], "n", "kuratowski.v", int),
                    },
                    "vs_bounds": _vector(k["vs_bounds"], "kuratowski.vs_bounds"),
                }
        else:
            integ = doc.get("integrand")
            if not isinstance(integ, dict):
                raise ConfigError("integrand", "is required")
            body["integrand"] = {
                "type": _get(integ, "type", "integrand", str, choices=("scaled", "oscillatory")),
                "dim": _get(integ, "dim", "integrand", int, 1),
                "coef": _get(integ, "coef", "integrand", float, 1.0),
                "power": _get(integ, "power", "integrand", float, 1.0),
            }
            body["grid"] = _grid(doc, "")
            body["tol"] = _get(doc, "tol", "", float, 1e-6)
    else:
        body.update(_flow_body(doc, ""))
        body["n_list"] = n_values(doc.get("n_list"), "n_list")
        body["null_min"] = bool(doc.get("null_min", True))
        if not any(_has_seq(doc.get(k)) for k in ("operator", "potential", "source")):
            raise ConfigError("operator", "a stability family needs at least one {seq: ...} parameter")
    body["_base"] = os.path.abspath(path_base)
    return ExperimentConfig(cmd, seed, output, body, doc)


def load_config(path):
    """Read and validate a YAML experiment file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"invalid YAML: {exc}") from exc
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))

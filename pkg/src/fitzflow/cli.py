"""Command-line front end: ``fitzflow <command> --config run.yaml``.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 I/O error.
"""

import argparse
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import convex, operators, representatives
from .config import ConfigError, load_config, resolve
from .exceptions import ConvergenceError, FitzflowError
from .flows import FlowProblem, OptimizerConfig, Source, TimeGrid, relative_l2, solve_null_min, solve_reference
from .flows import evaluate_functional
from .gamma import (
    FnSequence,
    dne_stability_experiment,
    evolutionary_gamma_check,
    gamma_check_static,
    stability_experiment,
)
from .io import OutputError, config_hash, read_csv, write_csv, write_json, write_plot_data

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "FITZFLOW_OUT"
DEFAULT_OUT = "fitzflow-out"

log = logging.getLogger("fitzflow")


class NonConvergence(Exception):
    """Raised after partial outputs are written for a stagnated solve."""


class Run:
    """Output directory, provenance line and timing book-keeping of one run."""

    def __init__(self, cfg, out_dir, seed):
        self.cfg = cfg
        self.out = out_dir
        self.seed = seed
        self.hash = config_hash({"config": cfg.raw, "seed": seed})
        self.files = []
        self.timings = {}

    @property
    def meta(self):
        return {"config_hash": self.hash, "seed": self.seed}

    def path(self, name):
        return os.path.join(self.out, name)

    def csv(self, name, header, rows):
        self.files.append(write_csv(self.path(name), header, rows, self.meta))

    def plot(self, name, pairs):
        self.files.append(write_plot_data(self.path(name), pairs, self.meta))

    def timed(self, label, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[label] = time.perf_counter() - t0

    def manifest(self, status):
        write_json(
            self.path("manifest.json"),
            {
                "command": self.cfg.command,
                "config_hash": self.hash,
                "seed": self.seed,
                "library_version": __version__,
                "status": status,
                "timings_seconds": self.timings,
                "outputs": sorted(os.path.relpath(f, self.out) for f in self.files),
                "created": datetime.now(timezone.utc).isoformat(),
            },
        )


# ---------------------------------------------------------------------------
# Builders (descriptor -> object), failures become configuration errors
# ---------------------------------------------------------------------------


def _build(field, factory, desc):
    try:
        return factory(desc)
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{field}.{exc.args[0]}", "missing parameter") from exc
    except (TypeError, ValueError, FitzflowError) as exc:
        raise ConfigError(field, f"{type(exc).__name__}: {exc}") from exc


def _fn_or_rep(desc):
    try:
        return representatives.from_description(desc)
    except ValueError as exc:
        if "unknown representative tag" not in str(exc):
            raise
    return convex.from_description(desc)


def _source(spec, grid, dim, base):
    if spec is None:
        return Source.zero(dim)
    src = None
    if "constant" in spec:
        src = Source.constant(spec["constant"])
    if "nodal" in spec:
        src = Source.nodal(grid, np.asarray(spec["nodal"], dtype=float).reshape(grid.N + 1, -1))
    if "file" in spec:
        path = spec["file"] if os.path.isabs(spec["file"]) else os.path.join(base, spec["file"])
        try:
            _, header, rows = read_csv(path)
        except OSError as exc:
            raise ConfigError("source.file", f"cannot read {path}: {exc}") from exc
        data = np.asarray(rows, dtype=float)
        if data.shape[0] != grid.N + 1:
            raise ConfigError("source.file", f"needs {grid.N + 1} rows (one per node), found {data.shape[0]}")
        src = Source.nodal(grid, data[:, 1:] if header and header[0] == "t" else data)
    if "sine" in spec:
        amp = np.atleast_1d(np.asarray(spec["sine"]["amplitude"], dtype=float))
        freq = float(spec["sine"].get("frequency", 1.0))
        amp = np.broadcast_to(amp, (dim,)).copy()
        sine = Source(lambda t: np.sin(2 * np.pi * freq * t)[:, None] * amp, dim, "sine")
        src = sine if src is None else src.plus(sine)
    if src.dim != dim:
        raise ConfigError("source", f"dimension {src.dim} differs from operator dimension {dim}")
    return src


def _problem(body, n=math.inf):
    """FlowProblem from a (possibly sequence-parametrized) flow body at index ``n``."""
    b = resolve({k: v for k, v in body.items() if k != "_base"}, n)
    op = _build("operator", operators.from_description, b["operator"])
    grid = TimeGrid(b["grid"]["T"], b["grid"]["N"])
    gamma = _build("potential", convex.from_description, b["potential"]) if "potential" in b else None
    src = _source(b.get("source"), grid, op.dim, body["_base"])
    try:
        return FlowProblem(b["kind"], op, grid, src, u0=b.get("u0"), w0=b.get("w0"), gamma=gamma)
    except (ValueError, FitzflowError) as exc:
        raise ConfigError(b["kind"], str(exc)) from exc


def _optimizer(opt):
    try:
        return OptimizerConfig(**opt)
    except TypeError as exc:
        raise ConfigError("optimizer", str(exc)) from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_conjugate(run):
    body = run.cfg.body
    f = _build("function", convex.from_description, body["function"])
    if f.dim not in (1, 2):
        raise ConfigError("function", "grid conjugation supports dimensions 1 and 2")
    lat = body["lattice"]
    lo = np.broadcast_to(np.asarray(lat["lo"], dtype=float), (f.dim,))
    hi = np.broadcast_to(np.asarray(lat["hi"], dtype=float), (f.dim,))
    g = run.timed("sample", convex.GridConvexFn.from_function, f.values, lo, hi, lat["n"])
    gs = run.timed("grid_conjugate", g.conjugate)

    h, rows = g.to_csv_rows()
    run.csv("function.csv", h, rows)

    Y = gs.nodes()
    try:
        analytic = f.conjugate().values(Y)
    except (NotImplementedError, FitzflowError):
        analytic = np.full(len(Y), np.nan)
    slo, shi = g.slope_range()
    interior = np.all((Y >= slo) & (Y <= shi), axis=1)
    names = [f"y{i + 1}" for i in range(f.dim)]
    rows = [[*y, v, a, int(k)] for y, v, a, k in zip(Y, gs.nodal.reshape(-1), analytic, interior)]
    run.csv("conjugate.csv", names + ["value", "analytic", "interior"], rows)

    dev_grid = run.timed("biconjugate", convex.biconjugate_check, g, g.nodes())
    bound = g.cell_bound()
    try:
        dev_analytic = convex.biconjugate_check(f, g.nodes())
    except (NotImplementedError, FitzflowError):
        dev_analytic = math.nan
    fin = interior & np.isfinite(analytic)
    gap = float(np.max(np.abs(gs.nodal.reshape(-1)[fin] - analytic[fin]))) if fin.any() else math.nan
    run.csv(
        "summary.csv",
        ["metric", "value"],
        [
            ["grid_biconjugate_deviation", dev_grid],
            ["grid_cell_bound", bound],
            ["grid_within_bound", int(dev_grid <= bound)],
            ["analytic_biconjugate_deviation", dev_analytic],
            ["grid_vs_analytic_interior", gap],
        ],
    )
    return EXIT_OK


def cmd_fitz(run):
    body = run.cfg.body
    op = _build("operator", operators.from_description, body["operator"])
    rep_desc = body["representative"]
    rep = _build("representative", representatives.from_description, rep_desc) if rep_desc else representatives.default_rep(op)
    rows = []
    if "represents" in body["checks"]:
        rpt = run.timed("represents_check", representatives.represents_check, rep, op, body["box"], body["density"], body["dual_box"])
        rows += [
            ["max_violation_of_domination", rpt.max_violation_of_domination],
            ["domination_scale", rpt.domination_scale],
            ["domination_ok", int(rpt.domination_ok)],
            ["equality_set_match", rpt.equality_set_match],
            ["spurious_equality_points", len(rpt.spurious_equality_points)],
            ["graph_points", rpt.n_graph],
            ["probes", rpt.n_probes],
            ["represents", int(rpt.represents)],
        ]
        sp = np.atleast_2d(rpt.spurious_equality_points)
        d = rep.dim
        hdr = [f"v{i + 1}" for i in range(d)] + [f"vstar{i + 1}" for i in range(d)]
        run.csv("spurious.csv", hdr, [list(p) for p in sp] if sp.size else [])
    if "band" in body["checks"]:
        try:
            band = run.timed(
                "band_check", representatives.band_check, op, rep, body["box"], body["density"], body["dual_box"], body["probe_density"]
            )
        except ValueError as exc:
            raise ConfigError("checks", str(exc)) from exc
        rows += [
            ["band_ok", int(band.ok)],
            ["band_rejected", int(band.rejected)],
            ["band_lower_margin", band.lower_margin],
            ["band_upper_margin", band.upper_margin],
            ["band_lower_slack", band.lower_slack],
            ["band_upper_slack", band.upper_slack],
            ["band_probes", band.n_probes],
        ]
    run.csv("report.csv", ["metric", "value"], rows)
    return EXIT_OK


def _trajectory_rows(sol):
    g = sol.u.grid
    cols = [sol.u.values] + ([sol.aux.values] if sol.aux is not None else [])
    data = np.hstack(cols)
    return [[t, *row] for t, row in zip(g.nodes, data)]


def _trajectory_header(kind, d):
    aux = {"MM": [], "DNE1": ["w"], "DNE2": ["z"]}[kind]
    hdr = ["t"] + [f"u{i + 1}" for i in range(d)]
    for a in aux:
        hdr += [f"{a}{i + 1}" for i in range(d)]
    return hdr


def cmd_solve(run):
    body = run.cfg.body
    P = _problem(body)
    cfg = _optimizer(body["optimizer"])
    ref = run.timed("solve_reference", solve_reference, P)
    nm = run.timed("solve_null_min", solve_null_min, P, None, cfg)
    hdr = _trajectory_header(P.kind, P.dim)
    run.csv("reference.csv", hdr, _trajectory_rows(ref))
    run.csv("null_min.csv", hdr, _trajectory_rows(nm.solution))
    val = nm.value
    g = P.grid
    run.csv(
        "gaps.csv",
        ["interval", "t_mid", "weighted_gap", "rep_gap"],
        [[k, t, w, r] for k, (t, w, r) in enumerate(zip(g.mids, val.per_interval, val.gaps))],
    )
    ref_val = evaluate_functional(P, ref, weighted=cfg.weighted)
    run.csv(
        "summary.csv",
        ["metric", "value"],
        [
            ["relative_l2_null_min_vs_reference", relative_l2(nm.u, ref.u)],
            ["null_min_value", val.total],
            ["reference_value", ref_val.total],
            ["reference_max_step_residual", ref.residual],
            ["iterations", nm.iterations],
            ["converged", int(nm.converged)],
            ["tol_abs", nm.tol_abs],
            ["method", nm.solution.meta.get("method", "")],
        ],
    )
    if not nm.converged:
        raise NonConvergence(f"null-minimization stopped above tolerance: {nm.message}")
    return EXIT_OK


def _integrand(spec):
    coef, power = spec["coef"], spec["power"]
    if spec["type"] == "scaled":
        return lambda n, t, W: (1.0 + coef * float(n) ** (-power)) * np.sum(W * W, axis=1)
    return lambda n, t, W: (1.0 + coef * np.sin(2 * np.pi * n * t) * float(n) ** (-power)) * np.sum(W * W, axis=1)


def cmd_gamma(run):
    body = run.cfg.body
    n_list = body["n_list"]
    if body["mode"] == "static":
        fam = body["family"]
        build = lambda n: _build("family", _fn_or_rep, resolve(fam, n))  # noqa: E731
        limit = _build("limit", _fn_or_rep, body["limit"]) if body["limit"] else build(math.inf)
        seq = FnSequence(build, limit, max(n_list), fam.get("tag", "family"))
        seq(n_list[0])  # surface descriptor errors before the run
        kur = None
        if "kuratowski" in body:
            k = body["kuratowski"]
            kur = (np.linspace(k["v"]["lo"], k["v"]["hi"], k["v"]["n"]), tuple(k["vs_bounds"]))
        v = run.timed(
            "gamma_check_static", gamma_check_static, seq, body["box"], n_list, body["density"], 4, run.seed, body["tol"], kur
        )
        rows = v.rows()
        rows += [["liminf_witness_sequence", v.liminf_witness.get("sequence", "")]]
        if "kuratowski" in v.diagnostics:
            kr = v.diagnostics["kuratowski"]
            rows += [["kuratowski_converges", int(kr.converges)], ["kuratowski_upper_inclusion", int(kr.upper_inclusion)]]
            run.csv(
                "kuratowski.csv",
                ["n", "lower_distance", "upper_distance"],
                [[n, a, b] for n, a, b in zip(kr.n_list, kr.lower_distance, kr.upper_distance)],
            )
            run.plot("kuratowski.dat", list(zip(kr.n_list, kr.lower_distance)))
        run.csv("verdict.csv", ["metric", "value"], rows)
        return EXIT_OK
    spec = body["integrand"]
    grid = TimeGrid(body["grid"]["T"], body["grid"]["N"])
    v = run.timed(
        "evolutionary_gamma_check",
        evolutionary_gamma_check,
        _integrand(spec),
        lambda t, W: np.sum(W * W, axis=1),
        n_list,
        grid,
        dim=spec["dim"],
        seed=run.seed,
        tol=body["tol"],
        time_independent=spec["type"] == "scaled",
    )
    run.csv("verdict.csv", ["metric", "value"], v.rows())
    run.csv(
        "weights.csv",
        ["weight", "liminf_deficit", "recovery_deficit"],
        [[pw["weight"], pw["liminf_deficit"], pw["recovery_deficit"]] for pw in v.per_weight],
    )
    return EXIT_OK


def cmd_stability(run):
    body = run.cfg.body
    limit = _problem(body)
    family = lambda n: _problem(body, n)  # noqa: E731
    family(body["n_list"][0])
    cfg = _optimizer(body["optimizer"])
    if limit.kind == "MM":
        rep = run.timed("stability_experiment", stability_experiment, family, limit, body["n_list"], body["null_min"], cfg)
    else:
        rep = run.timed(
            "dne_stability_experiment", dne_stability_experiment, limit.kind, family, limit, body["n_list"], body["null_min"], cfg
        )
    run.csv("stability.csv", ["n", "distance", "null_min_distance", "null_min_value", "graph_gap"], rep.rows())
    run.plot("distance.dat", rep.plot_data())
    rows = [["rate", rep.rate], ["rate_residual", rep.rate_residual], ["limit_functional", rep.limit_functional]]
    rows += [[k, float(v)] for k, v in rep.diagnostics.items()]
    run.csv("summary.csv", ["metric", "value"], rows)
    return EXIT_OK


COMMAND_FUNCS = {
    "conjugate": cmd_conjugate,
    "fitz": cmd_fitz,
    "solve": cmd_solve,
    "gamma": cmd_gamma,
    "stability": cmd_stability,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="fitzflow", description="Representative-function experiments for monotone flows.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "conjugate": "grid and analytic conjugates of a convex function",
        "fitz": "check a representative against a monotone operator",
        "solve": "solve a flow by resolvent stepping and by null-minimization",
        "gamma": "Gamma-convergence verdicts for function sequences",
        "stability": "structural stability experiment over a perturbation family",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="YAML experiment file")
        s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        s.add_argument("--seed", type=int, help="override the configuration seed")
        s.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigError("command", f"file is for '{cfg.command}', invoked as '{args.command}'")
    except ConfigError as exc:
        log.error("configuration error in %s", exc)
        return EXIT_CONFIG
    out = args.out or cfg.output or os.environ.get(OUT_ENV) or DEFAULT_OUT
    seed = args.seed if args.seed is not None else cfg.seed
    run = Run(cfg, out, seed)
    status, code = "ok", EXIT_OK
    try:
        code = COMMAND_FUNCS[cfg.command](run)
    except ConfigError as exc:
        log.error("configuration error in %s", exc)
        status, code = f"config error: {exc}", EXIT_CONFIG
    except (NonConvergence, ConvergenceError) as exc:
        log.error("numerical non-convergence: %s", exc)
        status, code = f"non-convergence: {exc}", EXIT_NUMERIC
    except (OutputError, OSError) as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except FitzflowError as exc:
        log.error("numerical failure: %s", exc)
        status, code = f"numerical failure: {exc}", EXIT_NUMERIC
    try:
        run.manifest(status)
    except OutputError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    if code == EXIT_OK:
        log.info("%s: wrote %d files to %s", cfg.command, len(run.files), out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

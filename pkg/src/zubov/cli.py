"""Command-line entry point: reproducible solve / check / extract runs.

Every subcommand drops a ``metadata.json`` into its output directory holding
the fully resolved configuration and the library versions that produced the
artifacts.  Feeding that file back through ``--config`` (with a fresh
``--out``) regenerates the outputs bit for bit.

Exit codes: 0 success, 1 unusable configuration or input, 2 the solver
stopped on max_iters, 3 the oracle refused its enumeration budget, 4 a
verification, synthesis, or demo check failed.
"""

import argparse
import json
import math
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .oracle import (
    BudgetError,
    SynthesisError,
    maximal_cost,
    min_value,
    synthesize_epsilon_optimal,
)
from .regions import contour2d, extract_doa, save_contours, save_mask
from .solver import SolverSettings, interpolate, solve_hjbe, solve_zubov
from .systems import (
    ConfigError,
    Grid,
    ValidationError,
    builtin,
    closed_form_value,
    load_field,
    load_system,
    save_field,
)
from .trajectories import ControlSchedule, rk4_step
from .verify import (
    VerificationReport,
    check_boundary_blowup,
    check_lyapunov_decrease,
    residual_stats,
)

_CHECKS = ("invariants", "fixed_point", "residual", "decrease", "blowup")

_DEFAULTS = {
    "builtin": None,
    "system": None,      # inline definition table (load_system schema)
    "nodes": None,
    "box": None,
    "controls": None,
    "dt": 0.05,
    "tol": 1e-6,
    "max_iters": 2000,
    "exterior": None,    # None: solver picks 1 (kruzhkov) / 0 (raw)
    "rk4_feet": False,
    "switch_dt": 0.25,
    "depth": 8,
    "rho": 0.05,
    "budget": 2_000_000,
    "seed": 0,
    "threads": 0,        # 0: every available core
    "out": ".",
    "epsilon": 0.01,
    "checks": list(_CHECKS),
    "report_json": None,
}

# default grids for the registered problems; inline systems must spell theirs out
_BUILTIN_BOX = {"lift2d": 1.2, "lift2d-psi-sqrt": 1.2, "lift2d-psi-abs": 1.2,
                "ex1": 2.0, "arctan1d": 3.0, "hav1d": 1.0, "fuller": 1.0}
_BUILTIN_NODES = {"lift2d": 201, "lift2d-psi-sqrt": 201, "lift2d-psi-abs": 201,
                  "ex1": 801, "arctan1d": 601, "hav1d": 401, "fuller": 101}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which this tool reserves
    # for solver non-convergence; route usage problems to exit code 1.
    def error(self, message):
        raise _UsageError(message)


# --- configuration -----------------------------------------------------------

def _ints(val, what):
    if isinstance(val, str):
        val = [tok for tok in val.split(",") if tok.strip()]
    try:
        out = [int(tok) for tok in val]
    except (TypeError, ValueError):
        raise ConfigError("%s wants comma-separated integers, got %r"
                          % (what, val))
    if not out:
        raise ConfigError("%s names no values" % what)
    return out


def _floats(val, what):
    if isinstance(val, str):
        val = [tok for tok in val.split(",") if tok.strip()]
    try:
        out = [float(tok) for tok in val]
    except (TypeError, ValueError):
        raise ConfigError("%s wants comma-separated reals, got %r"
                          % (what, val))
    if not out:
        raise ConfigError("%s names no values" % what)
    return out


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    if "command" in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]  # a metadata.json from an earlier run
    unknown = sorted(set(doc) - set(_DEFAULTS))
    if unknown:
        raise ConfigError("unknown config keys: %s" % ", ".join(unknown))
    return doc


def _resolve(args):
    """Merge defaults < config file < flags into one plain dict."""
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config))
    if getattr(args, "builtin", None) is not None:
        cfg["system"] = None  # the flag replaces any inline table wholesale
    for key in ("builtin", "nodes", "box", "dt", "tol", "max_iters",
                "controls", "switch_dt", "depth", "rho", "seed", "threads",
                "out", "epsilon", "report_json"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val

    if cfg["nodes"] is not None:
        cfg["nodes"] = _ints(cfg["nodes"], "--nodes")
    if cfg["box"] is not None:
        cfg["box"] = _floats(cfg["box"], "--box")
    if cfg["builtin"] is not None and cfg["system"] is not None:
        raise ConfigError("give a builtin name or an inline system, not both")
    for key in ("dt", "tol", "switch_dt", "rho", "epsilon"):
        cfg[key] = float(cfg[key])
    for key in ("max_iters", "depth", "budget", "seed", "threads"):
        cfg[key] = int(cfg[key])
    if cfg["controls"] is not None:
        cfg["controls"] = int(cfg["controls"])
    if not isinstance(cfg["checks"], (list, tuple)):
        raise ConfigError("config key 'checks' must be a list of check names")
    cfg["checks"] = list(cfg["checks"])
    unknown = sorted(set(cfg["checks"]) - set(_CHECKS))
    if unknown:
        raise ConfigError("unknown checks: %s (have: %s)"
                          % (", ".join(unknown), ", ".join(_CHECKS)))
    return cfg


def _make_system(cfg):
    if cfg["builtin"] is not None:
        overrides = {}
        if cfg["controls"] is not None:
            overrides["controls"] = cfg["controls"]
        return builtin(cfg["builtin"], **overrides)
    if cfg["system"] is not None:
        return load_system(cfg["system"])
    raise ConfigError("no system given: pass --builtin NAME or a config "
                      "file with a \"system\" table")


def _make_grid(cfg, system):
    n = system.n_state
    nodes = cfg["nodes"]
    if nodes is None:
        if cfg["builtin"] is None or system.name not in _BUILTIN_NODES:
            raise ConfigError("inline systems need an explicit --nodes")
        nodes = [_BUILTIN_NODES[system.name]] * n
    elif len(nodes) == 1:
        nodes = nodes * n
    if len(nodes) != n:
        raise ConfigError("--nodes names %d axes, system has %d"
                          % (len(nodes), n))
    box = cfg["box"]
    if box is None:
        if cfg["builtin"] is None or system.name not in _BUILTIN_BOX:
            raise ConfigError("inline systems need an explicit --box")
        half = _BUILTIN_BOX[system.name]
        lo, hi = [-half] * n, [half] * n
    elif len(box) == 2:
        lo, hi = [box[0]] * n, [box[1]] * n
    elif len(box) == 2 * n:
        lo, hi = list(box[0::2]), list(box[1::2])
    else:
        raise ConfigError("--box wants LO,HI (broadcast) or one LO,HI pair "
                          "per axis; got %d values for %d axes"
                          % (len(box), n))
    return Grid(lo, hi, nodes)


def _threads(cfg):
    return cfg["threads"] if cfg["threads"] >= 1 else (os.cpu_count() or 1)


def _settings(cfg):
    return SolverSettings(dt=cfg["dt"], tol=cfg["tol"],
                          max_iters=cfg["max_iters"],
                          exterior_value=cfg["exterior"],
                          rk4_feet=bool(cfg["rk4_feet"]),
                          threads=_threads(cfg))


# --- artifacts ---------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, ControlSchedule):
        return {"segments": [[float(d), c.tolist()]
                             for d, c in obj.segments]}
    return obj


def _write_metadata(cfg, command, result):
    blob = {
        "command": command,
        "config": _jsonable(cfg),
        "versions": {"python": platform.python_version(),
                     "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "zubov": __version__},
        "result": _jsonable(result),
    }
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "metadata.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_cli_field(path):
    """Load a field CSV, recovering run facts from a sibling metadata.json.

    The CSV format carries no solver record, so dt / tolerance / convergence
    are read back from the metadata file the producing run left next to it
    (when present).
    """
    field = load_field(path)
    sibling = os.path.join(os.path.dirname(os.path.abspath(path)),
                           "metadata.json")
    if not os.path.exists(sibling):
        return field
    with open(sibling, encoding="utf-8") as fh:
        doc = json.load(fh)
    run_cfg = doc.get("config") or {}
    result = doc.get("result") or {}
    meta = dict(field.metadata)
    for key in ("dt", "tol", "rk4_feet"):
        if key in run_cfg:
            meta[key] = run_cfg[key]
    if run_cfg.get("exterior") is not None:
        meta["exterior_value"] = run_cfg["exterior"]
    for key in ("converged", "iterations", "final_change"):
        if key in result:
            meta[key] = result[key]
    return field.with_values(field.values, metadata=meta)


# --- solve / hjbe ------------------------------------------------------------

def _run_solver(cfg, raw):
    system = _make_system(cfg)
    grid = _make_grid(cfg, system)
    started = time.perf_counter()
    field = (solve_hjbe if raw else solve_zubov)(system, grid, _settings(cfg))
    elapsed = time.perf_counter() - started
    meta = field.metadata
    os.makedirs(cfg["out"], exist_ok=True)
    save_field(field, os.path.join(cfg["out"], "field.csv"))
    result = {
        "grid": {"lo": grid.lo.tolist(), "hi": grid.hi.tolist(),
                 "counts": [int(c) for c in grid.counts]},
        "converged": bool(meta["converged"]),
        "iterations": int(meta["iterations"]),
        "final_change": float(meta["final_change"]),
        "seconds": round(elapsed, 3),
        "field": "field.csv",
    }
    _write_metadata(cfg, "hjbe" if raw else "solve", result)
    print("%s %s: %s nodes, %d sweeps, final sup-change %.3g (%.1fs)"
          % ("hjbe" if raw else "solve", system.name,
             "x".join(str(int(c)) for c in grid.counts),
             result["iterations"], result["final_change"], elapsed))
    if not result["converged"]:
        print("solver stopped on max_iters=%d without converging"
              % cfg["max_iters"], file=sys.stderr)
        return 2
    return 0


def _cmd_solve(cfg, args):
    return _run_solver(cfg, raw=(args.command == "hjbe"))


# --- oracle ------------------------------------------------------------------

def _read_points(path, n):
    pts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise ConfigError("points file line %d is not comma-"
                                  "separated reals: %r" % (lineno, line))
            if len(vals) != n:
                raise ConfigError("points file line %d has %d coordinates, "
                                  "system wants %d" % (lineno, len(vals), n))
            pts.append(np.array(vals))
    if not pts:
        raise ConfigError("points file %s holds no points" % path)
    return pts


def _cmd_oracle(cfg, args):
    system = _make_system(cfg)
    points = _read_points(args.points, system.n_state)
    bracket = maximal_cost if system.mode == "maximize" else min_value
    rows, over_budget = [], 0
    for x in points:
        try:
            vb = bracket(system, x, switch_dt=cfg["switch_dt"],
                         depth=cfg["depth"], rho=cfg["rho"],
                         budget=cfg["budget"])
        except BudgetError:
            over_budget += 1
            rows.append((x, None))
            continue
        rows.append((x, vb))

    os.makedirs(cfg["out"], exist_ok=True)
    out_csv = os.path.join(cfg["out"], "bounds.csv")
    with open(out_csv, "w", encoding="utf-8") as fh:
        coords = ",".join("x%d" % (i + 1) for i in range(system.n_state))
        fh.write(coords + ",lower,upper,tail_bound,depth,horizon,"
                 "truncated,status\n")
        for x, vb in rows:
            head = ",".join("%.17g" % c for c in x)
            if vb is None:
                fh.write("%s,nan,nan,nan,%d,nan,0,budget\n"
                         % (head, cfg["depth"]))
            else:
                fh.write("%s,%.17g,%.17g,%.17g,%d,%.17g,%d,ok\n"
                         % (head, vb.lower, vb.upper, vb.tail_bound,
                            vb.depth, vb.horizon, int(vb.truncated)))
    result = {"points": len(rows), "budget_exceeded": over_budget,
              "bounds": "bounds.csv"}
    _write_metadata(cfg, "oracle", result)
    print("oracle %s: %d point(s) -> %s%s"
          % (system.name, len(rows), out_csv,
             ", %d over budget" % over_budget if over_budget else ""))
    return 3 if over_budget else 0


# --- verify ------------------------------------------------------------------

def _fixed_point_defect(system, field, dt, exterior, rk4):
    """Re-apply one value-iteration sweep through the public interpolator.

    A converged field moves by less than its tolerance under its own
    operator, so any edited or swapped node sticks out by roughly the size
    of the edit — a deterministic corruption detector that robust residual
    statistics and random trajectory sampling both miss.
    """
    grid = field.grid
    nodes = grid.node_coords().reshape(-1, grid.n_axes)
    best = None
    for a in system.control.points:
        if rk4:
            z = np.concatenate([nodes, np.zeros((nodes.shape[0], 3))], axis=1)
            z1 = rk4_step(system, z, a, dt)
            feet = z1[:, :grid.n_axes]
            g_step = z1[:, grid.n_axes + 1]
        else:
            feet = nodes + dt * np.asarray(system.f(nodes, a), dtype=float)
            g_step = dt * np.asarray(system.g(nodes, a), dtype=float)
        beta = np.exp(-np.maximum(g_step, 0.0))
        cand = (1.0 - beta) + beta * interpolate(field, feet, exterior)
        best = cand if best is None else np.maximum(best, cand)
    best[np.ravel_multi_index(grid.origin_index, grid.counts)] = 0.0
    return np.abs(best - field.values.reshape(-1))


def _check_fixed_point(system, field, cfg):
    meta = field.metadata
    dt = float(meta.get("dt", cfg["dt"]))
    tol = float(meta.get("tol", cfg["tol"]))
    rk4 = bool(meta.get("rk4_feet", cfg["rk4_feet"]))
    exterior = float(meta.get("exterior_value", 1.0))
    defect = _fixed_point_defect(system, field, dt, exterior, rk4)
    threshold = 10.0 * tol
    worst = int(np.argmax(defect))
    stats = {"max_defect": float(defect[worst]), "threshold": threshold,
             "dt": dt}
    passed = defect[worst] <= threshold
    witnesses = ()
    if not passed:
        node = np.unravel_index(worst, field.grid.counts)
        witnesses = ({"node": tuple(int(i) for i in node),
                      "x": field.grid.node_coords()[node],
                      "value": float(field.values[node]),
                      "defect": float(defect[worst])},)
    return VerificationReport("fixed_point", bool(passed), stats, witnesses)


def _cmd_verify(cfg, args):
    system = _make_system(cfg)
    grid = _make_grid(cfg, system)
    field = _load_cli_field(args.field)
    if not field.grid.same_layout(grid):
        raise ConfigError("field grid %s does not match the configured "
                          "grid %s" % ("x".join(map(str, field.grid.counts)),
                                       "x".join(map(str, grid.counts))))
    if field.transform != "kruzhkov":
        raise ConfigError("verify wants a Kruzhkov field (run `solve`, "
                          "not `hjbe`)")

    reports = []
    for name in cfg["checks"]:
        if name == "invariants":
            problems = field.check_invariants()
            reports.append(VerificationReport(
                "invariants", not problems, {"problems": len(problems)},
                tuple({"problem": p} for p in problems)))
        elif name == "fixed_point":
            reports.append(_check_fixed_point(system, field, cfg))
        elif name == "residual":
            reports.append(residual_stats(system, field))
        elif name == "decrease":
            reports.append(check_lyapunov_decrease(
                system, field, samples=200, seed=cfg["seed"]))
        elif name == "blowup":
            try:
                mask = extract_doa(field, cfg["epsilon"])
            except ConfigError as exc:
                reports.append(VerificationReport(
                    "boundary_blowup", False, {},
                    ({"error": str(exc)},)))
            else:
                reports.append(check_boundary_blowup(system, field, mask))

    for rep in reports:
        line = "[%s] %s" % ("PASS" if rep.passed else "FAIL", rep.name)
        bits = ["%s=%.4g" % (k, v) if isinstance(v, float) else "%s=%s" % (k, v)
                for k, v in rep.stats.items()]
        if bits:
            line += ": " + ", ".join(bits)
        if rep.note:
            line += " (%s)" % rep.note
        print(line)
        for wit in rep.witnesses[:3]:
            print("    witness: %s" % _jsonable(wit))
    passed = all(rep.passed for rep in reports)
    print("verify: %d/%d checks passed" % (sum(r.passed for r in reports),
                                           len(reports)))

    result = {"field": args.field, "passed": passed,
              "checks": [{"name": r.name, "passed": r.passed,
                          "stats": r.stats, "note": r.note,
                          "witnesses": [_jsonable(w) for w in r.witnesses]}
                         for r in reports]}
    _write_metadata(cfg, "verify", result)
    if cfg["report_json"]:
        with open(cfg["report_json"], "w", encoding="utf-8") as fh:
            json.dump(_jsonable(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if passed else 4


# --- doa / synthesize / demo -------------------------------------------------

def _cmd_doa(cfg, args):
    field = _load_cli_field(args.field)
    mask = extract_doa(field, cfg["epsilon"])
    os.makedirs(cfg["out"], exist_ok=True)
    save_mask(mask, os.path.join(cfg["out"], "mask.csv"))
    result = {"nodes": mask.node_count,
              "touches_boundary": mask.touches_boundary,
              "epsilon": cfg["epsilon"], "mask": "mask.csv"}
    if field.grid.n_axes == 2:
        polys = contour2d(field, 1.0 - cfg["epsilon"])
        save_contours(polys, os.path.join(cfg["out"], "contour.csv"))
        result["contour"] = "contour.csv"
        result["polylines"] = len(polys)
    _write_metadata(cfg, "doa", result)
    print("doa: %d node(s) inside, touches_boundary=%s%s"
          % (mask.node_count, mask.touches_boundary,
             ", %d contour polyline(s)" % result["polylines"]
             if "polylines" in result else ""))
    return 0


def _cmd_synthesize(cfg, args):
    system = _make_system(cfg)
    field = _load_cli_field(args.field)
    if "converged" not in field.metadata:
        # a bare CSV carries no run record; loading one asserts it is final
        meta = dict(field.metadata)
        meta["converged"] = True
        field = field.with_values(field.values, metadata=meta)
    x0 = np.array(_floats(args.x0, "x0"))
    schedule, report = synthesize_epsilon_optimal(
        system, field, x0, cfg["epsilon"], args.m,
        switch_dt=cfg["switch_dt"])

    os.makedirs(cfg["out"], exist_ok=True)
    out_csv = os.path.join(cfg["out"], "schedule.csv")
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write("duration," + ",".join("a%d" % (j + 1)
                                        for j in range(schedule.m)) + "\n")
        for duration, control in schedule.segments:
            fh.write("%.17g," % duration
                     + ",".join("%.17g" % c for c in control) + "\n")
    result = {"schedule": "schedule.csv",
              "segments": len(schedule.segments),
              "residual": report["residual"],
              "defects": report["defects"],
              "allowances": report["allowances"],
              "start_value": report["start_value"],
              "final_value": report["final_value"],
              "final_state": report["final_state"]}
    _write_metadata(cfg, "synthesize", result)
    print("synthesize: %d segment(s), residual %.4g (>= -epsilon %.4g), "
          "defects %s" % (len(schedule.segments), report["residual"],
                          cfg["epsilon"],
                          ["%.4g" % d for d in report["defects"]]))
    return 0


def _closed_form_gap(field, name, half):
    """Sup gap between the field and the transformed closed form on
    the sub-box of half-width `half`."""
    grid = field.grid
    pts = grid.node_coords().reshape(-1, grid.n_axes)
    flat = field.values.reshape(-1)
    keep = np.max(np.abs(pts), axis=1) <= half + 1e-12
    worst = 0.0
    for x, v in zip(pts[keep], flat[keep]):
        w = closed_form_value(name, x if x.size > 1 else float(x[0]))
        worst = max(worst, abs(v - (1.0 - math.exp(-w))))
    return worst


def _cmd_demo(cfg, args):
    jobs = (("lift2d", 201, 1.2), ("arctan1d", 601, 3.0), ("ex1", 801, 2.0))
    bound = 0.02
    rows, all_ok = [], True
    for name, nodes, half in jobs:
        system = builtin(name)
        n = system.n_state
        grid = Grid([-half] * n, [half] * n, [nodes] * n)
        field = solve_zubov(system, grid,
                            SolverSettings(dt=0.05, tol=1e-6, max_iters=2000,
                                           threads=_threads(cfg)))
        err = _closed_form_gap(field, name, 0.8)
        good = bool(field.metadata["converged"]) and err <= bound
        all_ok &= good
        rows.append({"system": name,
                     "nodes": "x".join([str(nodes)] * n),
                     "sweeps": int(field.metadata["iterations"]),
                     "sup_error": err, "bound": bound,
                     "status": "ok" if good else "FAIL"})
    print("%-10s %-9s %7s %11s %7s  %s"
          % ("system", "nodes", "sweeps", "sup_error", "bound", "status"))
    for row in rows:
        print("%-10s %-9s %7d %11.5f %7.3f  %s"
              % (row["system"], row["nodes"], row["sweeps"],
                 row["sup_error"], row["bound"], row["status"]))
    os.makedirs(cfg["out"], exist_ok=True)
    with open(os.path.join(cfg["out"], "demo.csv"), "w") as fh:
        fh.write("system,nodes,sweeps,sup_error,bound,status\n")
        for row in rows:
            fh.write("%s,%s,%d,%.17g,%.17g,%s\n"
                     % (row["system"], row["nodes"], row["sweeps"],
                        row["sup_error"], row["bound"], row["status"]))
    _write_metadata(cfg, "demo", {"rows": rows, "passed": all_ok})
    return 0 if all_ok else 4


# --- entry point -------------------------------------------------------------

_DISPATCH = {"solve": _cmd_solve, "hjbe": _cmd_solve, "oracle": _cmd_oracle,
             "verify": _cmd_verify, "doa": _cmd_doa,
             "synthesize": _cmd_synthesize, "demo": _cmd_demo}


def _build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    g = shared.add_argument_group("run configuration")
    g.add_argument("--config", metavar="PATH",
                   help="JSON config file; flags override its keys")
    g.add_argument("--builtin", metavar="NAME",
                   help="registered problem: lift2d, lift2d-psi-sqrt, "
                        "lift2d-psi-abs, ex1, arctan1d, hav1d, fuller")
    g.add_argument("--nodes", metavar="K[,K...]",
                   help="grid nodes per axis (a single value broadcasts)")
    g.add_argument("--box", metavar="LO,HI[,...]",
                   help="grid box, one LO,HI pair per axis or one to "
                        "broadcast (write --box=-1.2,1.2)")
    g.add_argument("--dt", type=float, help="semi-Lagrangian step")
    g.add_argument("--tol", type=float, help="sup-norm convergence threshold")
    g.add_argument("--max-iters", type=int, dest="max_iters")
    g.add_argument("--controls", type=int,
                   help="control samples per axis for builtins")
    g.add_argument("--switch-dt", type=float, dest="switch_dt",
                   help="oracle/synthesis switching interval")
    g.add_argument("--depth", type=int, help="oracle enumeration depth")
    g.add_argument("--rho", type=float, help="oracle tail-certificate radius")
    g.add_argument("--seed", type=int, help="sampling seed for verify")
    g.add_argument("--threads", type=int,
                   help="worker threads; 0 = every available core")
    g.add_argument("--out", metavar="DIR", help="output directory")
    g.add_argument("--epsilon", type=float,
                   help="doa level gap / synthesis tolerance")
    g.add_argument("--report-json", metavar="PATH", dest="report_json",
                   help="also write the verify report as JSON")

    parser = _Parser(
        prog="zubov",
        description="Grid solvers, trajectory oracles, and post-hoc checks "
                    "for robust Lyapunov value functions.")
    parser.add_argument("--version", action="version",
                        version="zubov %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    sub.add_parser("solve", parents=[shared],
                   help="iterate the Kruzhkov-transformed value to a "
                        "fixed point")
    sub.add_parser("hjbe", parents=[shared],
                   help="iterate the raw optimal-cost value (needs a "
                        "declared convergence guard)")
    p = sub.add_parser("oracle", parents=[shared],
                       help="trajectory-enumeration value brackets")
    p.add_argument("points", help="file with one comma-separated state "
                                  "per line")
    p = sub.add_parser("verify", parents=[shared],
                       help="post-hoc checks on a solved field")
    p.add_argument("field", help="field CSV produced by solve")
    p = sub.add_parser("doa", parents=[shared],
                       help="extract the origin's sublevel component "
                            "and, in 2-D, its contour")
    p.add_argument("field", help="field CSV produced by solve")
    p = sub.add_parser("synthesize", parents=[shared],
                       help="greedy near-optimal schedule from a field")
    p.add_argument("field", help="field CSV produced by solve")
    p.add_argument("x0", help="comma-separated start state (prefix "
                              "negatives with --)")
    p.add_argument("m", type=int, help="number of unit intervals")
    sub.add_parser("demo", parents=[shared],
                   help="solve the reference problems and compare to "
                        "their closed forms")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    try:
        cfg = _resolve(args)
        return _DISPATCH[args.command](cfg, args)
    except BudgetError as exc:
        print("oracle budget exceeded: %s" % exc, file=sys.stderr)
        return 3
    except SynthesisError as exc:
        print("synthesis failed: %s" % exc, file=sys.stderr)
        return 4
    except (ConfigError, ValidationError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print("unreadable JSON: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("cannot read or write: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

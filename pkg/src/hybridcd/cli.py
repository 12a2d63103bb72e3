"""Command-line interface: ``hybridcd <command> [flags]``.

Exit codes: 0 pass, 1 violation found, 2 usage, schema or I/O error.
Settings resolve as ``DEFAULTS`` < command-line flags < ``--config`` file.
JSON reports are written with sorted keys and carry no timestamps, so equal
inputs give byte-identical files; the creation time goes to
``<out>.meta.json``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import cd, heat, inequalities as ineq, ricci
from .graph import GraphError, graph_from_dict, load_graph
from .upsilon import c_of_r

EXIT_PASS, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

#: Every default in one place; keys are the resolved config field names.
DEFAULTS = {
    "constants": {"r": None, "tol": 1e-8},
    "cd": {
        "graph": None,
        "mode": "check",
        "kappa": 0.0,
        "d": 2.0,
        "vertex": None,
        "samples": 2000,
        "restarts": 64,
    },
    "ricci": {"graph": None, "interpretation": "multiset", "budget": ricci.DEFAULT_BUDGET},
    "verify": {
        "kind": "liyau",
        "graph": None,
        "solution": None,
        "n": 1,
        "random_terms": 3,
        "d": None,
        "d_source": "auto",
        "kappa": 0.0,
        "t_min": 0.05,
        "t_max": 10.0,
        "n_t": 25,
        "n_x": 400,
        "pairs": 10_000,
        "same_species": False,
    },
    "simulate": {
        "graph": None,
        "solution": None,
        "equilibrium": None,
        "n": 1,
        "h": 0.1,
        "box": 24.0,
        "dt": None,
        "t0": 0.0,
        "t_end": 1.0,
        "snapshot_every": 0,
        "monitor_d": None,
    },
    "convergence": {
        "graph": None,
        "solution": None,
        "n": 1,
        "h": 0.2,
        "levels": 3,
        "box": 24.0,
        "dt_factor": 0.25,
        "t0": 0.0,
        "t1": 0.5,
        "order_range": [1.7, 2.3],
    },
}
COMMON = {"seed": 0, "out": None, "format": "json"}


class UsageError(Exception):
    pass


# config plumbing ------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridcd", description="Hybrid curvature-dimension toolkit")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", help="JSON file; its fields override flags")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=["json", "csv"])

    sp = sub.add_parser("constants", help="C(r) = inf nu_{r,r-1}(w)/w^2")
    sp.add_argument("--r", type=float, nargs="*")
    sp.add_argument("--tol", type=float)
    common(sp)

    sp = sub.add_parser("cd", help="check or estimate CD_Upsilon on a graph")
    sp.add_argument("--graph")
    sp.add_argument("--mode", choices=["check", "estimate"])
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--d", type=float)
    sp.add_argument("--vertex")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--restarts", type=int)
    common(sp)

    sp = sub.add_parser("ricci", help="Ricci-flatness certificates")
    sp.add_argument("--graph")
    sp.add_argument("--interpretation", choices=["multiset", "set"])
    sp.add_argument("--budget", type=int)
    common(sp)

    sp = sub.add_parser("verify", help="Li-Yau, Harnack, CD_hyb or Gamma_2 lemma checks")
    sp.add_argument("--kind", choices=["liyau", "harnack", "cdhyb", "gamma2"])
    sp.add_argument("--graph")
    sp.add_argument("--solution", help="mixture JSON (n, terms)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--random-terms", dest="random_terms", type=int)
    sp.add_argument("--d", type=float)
    sp.add_argument(
        "--d-source",
        dest="d_source",
        choices=["auto", "analytic_complete", "analytic_ricci_flat", "numeric_estimate"],
    )
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--t-min", dest="t_min", type=float)
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.add_argument("--n-t", dest="n_t", type=int)
    sp.add_argument("--n-x", dest="n_x", type=int)
    sp.add_argument("--pairs", type=int)
    sp.add_argument("--same-species", dest="same_species", action="store_const", const=True)
    common(sp)

    for name in ("simulate", "convergence"):
        sp = sub.add_parser(name, help="finite-difference simulator" if name == "simulate" else "order study")
        sp.add_argument("--graph")
        sp.add_argument("--solution")
        sp.add_argument("--n", type=int)
        sp.add_argument("--h", type=float)
        sp.add_argument("--box", type=float)
        sp.add_argument("--t0", type=float)
        common(sp)
        if name == "simulate":
            sp.add_argument("--equilibrium", type=float, help="constant initial value")
            sp.add_argument("--dt", type=float)
            sp.add_argument("--t-end", dest="t_end", type=float)
            sp.add_argument("--snapshot-every", dest="snapshot_every", type=int)
            sp.add_argument("--monitor-d", dest="monitor_d", type=float)
        else:
            sp.add_argument("--levels", type=int)
            sp.add_argument("--dt-factor", dest="dt_factor", type=float)
            sp.add_argument("--t1", type=float)
    return p


def resolve(command: str, flags: dict) -> dict:
    """Merge defaults, flags and the optional config file; reject unknown fields."""
    cfg = {**COMMON, **DEFAULTS[command]}
    for k, v in flags.items():
        if k in cfg and v is not None:
            cfg[k] = v
    if flags.get("config"):
        try:
            with open(flags["config"]) as fh:
                extra = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(extra, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(extra) - set(cfg) - {"command"})
        if unknown:
            raise UsageError(f"unknown config fields: {unknown}")
        if extra.get("command", command) != command:
            raise UsageError(f"config is for command {extra['command']!r}")
        cfg.update({k: v for k, v in extra.items() if k != "command"})
    cfg["command"] = command
    return cfg


def _graph(cfg):
    src = cfg["graph"]
    if src is None:
        raise UsageError("--graph is required")
    try:
        return graph_from_dict(src) if isinstance(src, dict) else load_graph(src)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read graph: {exc}") from None


def _solution(cfg, g, required=True):
    src = cfg["solution"]
    if src is None:
        if required:
            raise UsageError("--solution is required")
        return None
    try:
        if not isinstance(src, dict):
            with open(src) as fh:
                src = json.load(fh)
        unknown = set(src) - {"n", "terms", "graph_digest"}
        if unknown:
            raise UsageError(f"unknown solution fields: {sorted(unknown)}")
        return heat.GaussianMixtureSolution.from_dict(g, src)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read solution: {exc}") from None


def _vertex(g, label):
    if label is None:
        return None
    for v in g.vertices:
        if str(v) == str(label):
            return v
    raise UsageError(f"unknown vertex {label!r}")


def _clean(obj):
    return ineq._jsonable(obj)


def _emit(cfg, payload: dict, rows: list[list] | None = None) -> None:
    if cfg["format"] == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows or [])
        text = buf.getvalue()
    else:
        text = json.dumps(_clean({"config": cfg, **payload}), indent=2, sort_keys=True) + "\n"
    if cfg["out"]:
        try:
            with open(cfg["out"], "w") as fh:
                fh.write(text)
            with open(cfg["out"] + ".meta.json", "w") as fh:
                meta = {"created": datetime.now(timezone.utc).isoformat(), "command": cfg["command"]}
                json.dump(meta, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise UsageError(f"cannot write output: {exc}") from None
    else:
        sys.stdout.write(text)


# commands --------------------------------------------------------------------

def cmd_constants(cfg) -> int:
    rs = cfg["r"]
    if not rs:
        raise UsageError("constants needs at least one value of --r")
    if any(not (isinstance(r, (int, float)) and r >= 0) for r in rs):
        raise UsageError("every r must be a number >= 0")
    table = []
    for r in rs:
        res = c_of_r(float(r), tol=cfg["tol"])
        table.append({"r": float(r), "C": res.value, "argmin": res.argmin})
    rows = [["r", "C", "argmin"]] + [[t["r"], repr(t["C"]), repr(t["argmin"])] for t in table]
    for t in table:
        print(f"r = {t['r']:g}  C(r) = {t['C']:.12f}  argmin = {t['argmin']:.6f}", file=sys.stderr)
    _emit(cfg, {"constants": table}, rows)
    return EXIT_PASS


def cmd_cd(cfg) -> int:
    g = _graph(cfg)
    target = _vertex(g, cfg["vertex"])
    vertices = [target] if target is not None else list(g.vertices)
    reports = []
    if cfg["mode"] == "check":
        try:
            params = cd.CdParams(float(cfg["kappa"]), float(cfg["d"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        sc = cd.SamplerConfig(random_samples=int(cfg["samples"]), seed=int(cfg["seed"]))
        for y in vertices:
            reports.append(cd.cd_upsilon_check_at(g, y, params, sc))
        code = EXIT_PASS if all(r.satisfied_on_samples for r in reports) else EXIT_VIOLATION
    else:
        oc = cd.OptimizerConfig(restarts=int(cfg["restarts"]), seed=int(cfg["seed"]))
        for y in vertices:
            reports.append(cd.cd_upsilon_estimate_min_d(g, y, oc))
        code = EXIT_PASS
    rows = [["vertex", "mode", "satisfied_on_samples", "minimal_d_estimate", "worst_slack"]]
    rows += [[r.vertex, r.mode, r.satisfied_on_samples, repr(r.minimal_d_estimate), repr(r.worst_slack)] for r in reports]
    _emit(cfg, {"reports": [r.to_dict() for r in reports]}, rows)
    return code


def cmd_ricci(cfg) -> int:
    g = _graph(cfg)
    results = ricci.certify(g, budget=int(cfg["budget"]), interpretation=cfg["interpretation"])
    checks = {}
    for y, res in results.items():
        if res.certificate is not None:
            v = ricci.verify_certificate(g, res.certificate, seed=int(cfg["seed"]), interpretation=cfg["interpretation"])
            checks[str(y)] = {"ok": v.ok, "checks": v.checks, "clause": v.clause}
    rows = [["vertex", "status", "nodes"]] + [[r.vertex, r.status, r.nodes] for r in results.values()]
    _emit(cfg, {"results": [r.to_dict() for r in results.values()], "verification": checks}, rows)
    ok = all(r.status == "certified" for r in results.values()) and all(c["ok"] for c in checks.values())
    return EXIT_PASS if ok else EXIT_VIOLATION


def _auto_d(n, g, source):
    if source == "auto":
        if cd._is_constant_complete(g):
            source = "analytic_complete"
        else:
            try:
                return cd.hybrid_d_for_euclidean(n, g, "analytic_ricci_flat"), "analytic_ricci_flat"
            except GraphError:
                source = "numeric_estimate"
    return cd.hybrid_d_for_euclidean(n, g, source), source


def cmd_verify(cfg) -> int:
    g = _graph(cfg)
    sol = _solution(cfg, g, required=False)
    if sol is None:
        rng = np.random.default_rng(int(cfg["seed"]))
        sol = heat.random_mixture(g, int(cfg["n"]), rng, terms=int(cfg["random_terms"]))
    if cfg["d"] is None:
        d, source = _auto_d(sol.n, g, cfg["d_source"])
    else:
        d, source = float(cfg["d"]), "user"
    if not d > 0:
        raise UsageError("d must be positive")
    tplan = ineq.TensorPlan(cfg["t_min"], cfg["t_max"], int(cfg["n_t"]), int(cfg["n_x"]))
    kind = cfg["kind"]
    if kind == "liyau":
        rep = ineq.verify_liyau_global(sol, d, tplan)
    elif kind == "harnack":
        pplan = ineq.PairPlan(pairs=int(cfg["pairs"]), seed=int(cfg["seed"]), same_species=bool(cfg["same_species"]))
        rep = ineq.verify_harnack_global(sol, d, pplan)
    elif kind == "cdhyb":
        rep = ineq.verify_cd_hyb(sol, float(cfg["kappa"]), d, tplan)
    elif kind == "gamma2":
        rep = ineq.verify_gamma2_lemma(sol, tplan)
    else:
        raise UsageError(f"unknown kind {kind!r}")
    rows = [["kind", "params", "samples", "min_slack", "passed"]]
    rows.append([rep.kind, json.dumps(_clean(rep.parameters), sort_keys=True), rep.samples, repr(rep.min_slack), rep.passed])
    _emit(cfg, {"report": rep.to_dict(), "d_source": source, "solution": sol.to_dict()}, rows)
    return EXIT_PASS if rep.passed else EXIT_VIOLATION


def _sim_config(cfg, dt, t_end):
    return heat.SimulationConfig(
        n=int(cfg["n"]),
        h=float(cfg["h"]),
        box=float(cfg["box"]),
        dt=dt,
        t_end=t_end,
        snapshot_every=int(cfg.get("snapshot_every") or 0),
    )


def cmd_simulate(cfg) -> int:
    g = _graph(cfg)
    n, h = int(cfg["n"]), float(cfg["h"])
    dt = float(cfg["dt"]) if cfg["dt"] is not None else h * h / (2 * n)
    scfg = _sim_config(cfg, dt, float(cfg["t_end"]))
    if dt > scfg.max_dt * (1 + 1e-12):
        raise UsageError(f"dt = {dt} violates the CFL bound; admissible dt <= {scfg.max_dt}")
    if cfg["equilibrium"] is not None:
        c = float(cfg["equilibrium"])
        if not c > 0:
            raise UsageError("equilibrium value must be positive")
        N = int(round(scfg.box / h))
        u0 = heat.GridState(n, h, (-scfg.box / 2,) * n, g, np.full((N,) * n + (g.size,), c), float(cfg["t0"]))
    else:
        sol = _solution(cfg, g)
        if sol.n != n:
            raise UsageError("solution dimension differs from --n")
        u0 = heat.grid_from_solution(sol, float(cfg["t0"]), scfg)
    traj = heat.simulate(g, scfg, u0)
    m0 = heat.total_mass(traj[0])
    snaps = []
    code = EXIT_PASS
    for s in traj:
        entry = {"t": s.time, "mass": heat.total_mass(s), "min": float(s.values.min()), "max": float(s.values.max())}
        if cfg["monitor_d"] is not None and s.time > 0:
            lhs, budget = heat.grid_liyau_lhs(s, dt)
            slack = float(cfg["monitor_d"]) / (2 * s.time) - lhs
            worst = float(np.min(slack + budget))
            entry["liyau_min_slack"] = float(slack.min())
            entry["liyau_passed"] = worst >= 0
            if worst < 0:
                code = EXIT_VIOLATION
        snaps.append(entry)
    final = traj[-1]
    drift = abs(heat.total_mass(final) - m0) / m0 / max(final.time - traj[0].time, 1e-300)
    axes = [a.tolist() for a in final.axes()]
    payload = {
        "snapshots": snaps,
        "mass_drift_per_time": drift if final.time > traj[0].time else 0.0,
        "positive": bool(all(np.all(s.values > 0) for s in traj)),
        "grid": {"axes": axes, "vertices": list(g.vertices)},
        "final_values": final.values.tolist(),
    }
    rows = [["t"] + [f"x{k + 1}" for k in range(n)] + ["y", "u"]]
    pts = final.points()
    flat = final.values.reshape(-1, g.size)
    for p, x in enumerate(pts):
        for i, y in enumerate(g.vertices):
            rows.append([repr(final.time)] + [repr(float(c)) for c in x] + [y, repr(float(flat[p, i]))])
    _emit(cfg, payload, rows)
    return code


def cmd_convergence(cfg) -> int:
    g = _graph(cfg)
    sol = _solution(cfg, g)
    hs = [float(cfg["h"]) / 2**k for k in range(int(cfg["levels"]))]
    table = heat.convergence_table(
        sol, float(cfg["t0"]), float(cfg["t1"]), hs, box=float(cfg["box"]), n=sol.n, dt_factor=float(cfg["dt_factor"])
    )
    lo, hi = cfg["order_range"]
    orders = [r["order"] for r in table if r["order"] is not None]
    ok = all(lo <= o <= hi for o in orders)
    rows = [["h", "dt", "error", "order", "roundoff_floor"]]
    rows += [[repr(r["h"]), repr(r["dt"]), repr(r["error"]), "" if r["order"] is None else repr(r["order"]), r["roundoff_floor"]] for r in table]
    _emit(cfg, {"table": table, "orders_in_range": ok}, rows)
    return EXIT_PASS if ok else EXIT_VIOLATION


COMMANDS = {
    "constants": cmd_constants,
    "cd": cmd_cd,
    "ricci": cmd_ricci,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve(args.command, vars(args))
        return COMMANDS[args.command](cfg)
    except (UsageError, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``fraclab <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 1 acceptance failures (selftest only), 2 invalid
configuration, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_crack, build_density, build_domain, load_config, resolve
from .energy import EnergyError
from .expr import ExpressionError
from .fem import ConvergenceError
from .geometry import GeometryError
from .mesh import MeshError

log = logging.getLogger("fraclab")

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_SCHEMA = 2
EXIT_SOLVER = 3
EXIT_IO = 4
MANIFEST_VERSION = 1


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _out_dir(path) -> Path:
    if path is None:
        raise CliError(EXIT_SCHEMA, "usage", "--out is required for this subcommand")
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot create output directory {p}: {exc}") from None
    return p


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=_json_default, allow_nan=True) + "\n")


def _manifest(cfg: dict, artifacts: list[str], results: dict, timings: dict, threads: int) -> dict:
    import matplotlib
    import scipy

    return {
        "manifest_version": MANIFEST_VERSION,
        "tool": "fraclab",
        "config": cfg,
        "versions": {"fraclab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "matplotlib": matplotlib.__version__},
        "tolerances": {k: cfg[k] for k in ("tol", "max_iter", "verify_tol") if k in cfg},
        "threads": threads,
        "artifacts": sorted(artifacts),
        "results": results,
        "timings_s": timings,
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _solve(cfg: dict):
    from .mesh import build_mesh
    from .solver import solve_elastic

    dom = build_domain(cfg["domain"])
    K = build_crack(cfg["crack"])
    mesh = build_mesh(dom, K, cfg["n"])
    d = build_density(cfg["density"])
    return solve_elastic(mesh, d, cfg["datum"], tol=cfg["tol"], max_iter=cfg["max_iter"])


def _emit_solution(sol, out: Path) -> list[str]:
    from .plotting import plot_solution

    m = sol.mesh
    _write_csv(out / "nodes.csv", ("node_id", "x", "y", "u"),
               ((i, m.points[i, 0], m.points[i, 1], sol.u[i]) for i in range(len(sol.u))))
    g = sol.grad
    b = m.barycenters
    _write_csv(out / "gradients.csv", ("triangle_id", "n0", "n1", "n2", "xc", "yc", "ux", "uy"),
               ((t, *m.triangles[t].tolist(), b[t, 0], b[t, 1], g[t, 0], g[t, 1]) for t in range(len(g))))
    plot_solution(sol, out / "solution.svg")
    return ["nodes.csv", "gradients.csv", "solution.svg"]


def cmd_solve(cfg: dict, out: Path, threads: int) -> dict:
    from .energy import total_energy

    t0 = time.perf_counter()
    sol = _solve(cfg)
    t1 = time.perf_counter()
    arts = _emit_solution(sol, out)
    rep = total_energy(sol, sol.mesh.crack)
    res = {"density": sol.density.to_dict(), "resolution": sol.mesh.n, "residual": sol.residual,
           "iterations": sol.iterations, "nodes": int(len(sol.u)), "triangles": int(len(sol.mesh.triangles)),
           "components": int(sol.mesh.n_components), "bulk": rep.bulk, "surface": rep.surface,
           "total": rep.total}
    return {"artifacts": arts, "results": res,
            "timings": {"solve": t1 - t0, "output": time.perf_counter() - t1}}


def cmd_conjugate(cfg: dict, out: Path, threads: int) -> dict:
    from .duality import build_conjugate, build_local_conjugate, verify_solution_via_conjugate
    from .plotting import plot_conjugate

    t0 = time.perf_counter()
    sol = _solve(cfg)
    rects = cfg.get("rectangles") or []
    if rects:
        fields = [(f"local_{k}", build_local_conjugate(sol, U)) for k, U in enumerate(rects)]
    else:
        fields = [("global", build_conjugate(sol))]
    t1 = time.perf_counter()
    arts = []
    report = {}
    for name, v in fields:
        xy = v.midpoints_xy
        _write_csv(out / f"conjugate_{name}.csv", ("edge_id", "x", "y", "v", "mismatch"),
                   ((int(e), xy[i, 0], xy[i, 1], v.midpoint[i], v.mismatch[i])
                    for i, e in enumerate(v.edge_ids)))
        plot_conjugate(v, out / f"conjugate_{name}.svg")
        verdict = verify_solution_via_conjugate(sol, v, tol=cfg["verify_tol"])
        report[name] = {"diagnostics": v.diagnostics(), "verdict": verdict.to_dict()}
        arts += [f"conjugate_{name}.csv", f"conjugate_{name}.svg"]
    _write_json(out / "conjugate_report.json", report)
    arts.append("conjugate_report.json")
    return {"artifacts": arts, "results": {"fields": list(report), "residual": sol.residual},
            "timings": {"build": t1 - t0, "output": time.perf_counter() - t1}}


def cmd_capacity(cfg: dict, out: Path, threads: int) -> dict:
    from .capacity import CapacitySet, capacity
    from .plotting import plot_capacity

    t0 = time.perf_counter()
    E = CapacitySet.from_dict(cfg["set"])
    B = build_domain(cfg["container"])
    res = capacity(E, B, cfg["r"], cfg["n"], tol=cfg["tol"])
    t1 = time.perf_counter()
    m = res.mesh
    _write_csv(out / "potential.csv", ("node_id", "x", "y", "u", "constrained"),
               ((i, m.points[i, 0], m.points[i, 1], res.u[i], int(res.constrained[i])) for i in range(len(res.u))))
    plot_capacity(res, B, out / "capacity.svg")
    return {"artifacts": ["potential.csv", "capacity.svg"],
            "results": {"capacity": res.value, "r": cfg["r"], "n": cfg["n"], "residual": res.residual,
                        "iterations": res.iterations, "constrained_nodes": int(res.constrained.sum())},
            "timings": {"solve": t1 - t0, "output": time.perf_counter() - t1}}


def cmd_stability(cfg: dict, out: Path, threads: int) -> dict:
    from .experiments import convergence_experiment, make_sequence
    from .plotting import plot_error_decay

    t0 = time.perf_counter()
    dom = build_domain(cfg["domain"])
    s = cfg["sequence"]
    kw = {k: s[k] for k in ("n", "n_per_index", "at", "end", "lam", "m") if k in s}
    if "direction" in s:
        kw["direction"] = tuple(s["direction"])
    seq = make_sequence(s["kind"], dom, build_crack(s["limit"]), s["hs"], **kw)
    d = build_density(cfg["density"])
    tables = {"raw": convergence_experiment(seq, cfg["datum"], d, reference_n=cfg["reference_n"],
                                            exponent=cfg.get("exponent"), threads=threads)}
    if "join" in cfg:
        fac = cfg["join"].get("delta_factor", 2.0)
        gamma = dom.neumann_part() if cfg["join"].get("with_neumann") else None
        joined = seq.joined(lambda h: fac / h, gamma)
        tables["joined"] = convergence_experiment(joined, cfg["datum"], d, reference_n=cfg["reference_n"],
                                                  exponent=cfg.get("exponent"), threads=threads)
    t1 = time.perf_counter()
    arts = []
    for name, tab in tables.items():
        fname = "table.csv" if name == "raw" else f"table_{name}.csv"
        tab.to_csv(out / fname)
        arts.append(fname)
    plot_error_decay(tables, out / "error_decay.svg")
    arts.append("error_decay.svg")
    results = {name: {"reference": tab.reference, "final_rel_error": tab.rows[-1].get("rel_error_p"),
                      "failed_rows": sum(1 for r in tab.rows if r.get("status") != "ok")}
               for name, tab in tables.items()}
    results["sequence"] = seq.to_dict()
    return {"artifacts": arts, "results": results,
            "timings": {"experiment": t1 - t0, "output": time.perf_counter() - t1}}


def cmd_evolve(cfg: dict, out: Path, threads: int) -> dict:
    from .experiments import LoadProgram, quasistatic_evolve
    from .plotting import plot_crack_history

    t0 = time.perf_counter()
    dom = build_domain(cfg["domain"])
    ld = cfg["load"]
    load = LoadProgram.ramp(str(ld["datum"]), *ld["ramp"]) if "ramp" in ld else \
        LoadProgram(tuple(ld["times"]), str(ld["datum"]))
    dictionary = [build_crack(c) for c in cfg["dictionary"]]
    st = quasistatic_evolve(dom, build_density(cfg["density"]), load, dictionary, n=cfg["n"],
                            K0=build_crack(cfg["initial_crack"]), tol=cfg["tol"])
    t1 = time.perf_counter()
    recs = st.to_records()
    _write_json(out / "steps.json", recs)
    _write_csv(out / "energies.csv", ("step", "t", "bulk", "surface", "total"),
               ((r["step"], r["t"], r["bulk"], r["surface"], r["total"]) for r in recs))
    plot_crack_history(dom, st, out / "crack_history.svg")
    res = {"steps": len(recs), "first_growth_time": st.first_growth_time(),
           "irreversible": st.is_irreversible(), "aborted": st.aborted}
    if st.aborted:
        raise CliError(EXIT_SOLVER, "solver", f"evolution aborted: {st.aborted}")
    return {"artifacts": ["steps.json", "energies.csv", "crack_history.svg"], "results": res,
            "timings": {"evolve": t1 - t0, "output": time.perf_counter() - t1}}


def cmd_selftest(cfg: dict, out: Path | None, threads: int) -> dict:
    from .acceptance import run_acceptance

    t0 = time.perf_counter()
    results = run_acceptance(seed=cfg["seed"], threads=threads, only=cfg.get("only"), echo=print)
    npass = sum(c.passed for c in results)
    print(f"{npass}/{len(results)} criteria passed")
    report = [{"criterion": c.number, "title": c.title, "passed": c.passed, "summary": c.summary,
               "seconds": c.seconds, "measurements": c.measurements} for c in results]
    arts = []
    if out is not None:
        _write_json(out / "acceptance.json", report)
        arts.append("acceptance.json")
    return {"artifacts": arts, "results": {"passed": npass, "total": len(results)},
            "timings": {"suite": time.perf_counter() - t0}, "all_passed": npass == len(results)}


COMMANDS = {"solve": cmd_solve, "conjugate": cmd_conjugate, "capacity": cmd_capacity,
            "stability": cmd_stability, "evolve": cmd_evolve, "selftest": cmd_selftest}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclab", description="Unilateral fracture laboratory.")
    ap.add_argument("--version", action="version", version=f"fraclab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration (or a manifest.json to rerun)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (recorded in the manifest)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "conjugate":
            sp.add_argument("--solution", help="output directory of a previous solve")
        if name == "capacity":
            sp.add_argument("--set", dest="set_spec", help="set as JSON text or a JSON file")
            sp.add_argument("--r", type=float)
            sp.add_argument("--n", type=int)
        if name == "selftest":
            sp.add_argument("--only", type=int, nargs="*", help="run only these criteria")
    return ap


def _gather_config(args) -> dict:
    cfg: dict = {}
    if getattr(args, "solution", None):
        cfg = load_config(Path(args.solution) / "manifest.json")
        cfg.pop("subcommand", None)
    if args.config:
        cfg.update(load_config(args.config))
    if args.command == "capacity":
        if args.set_spec is not None:
            text = args.set_spec
            if not text.lstrip().startswith("{"):
                text = Path(text).read_text()
            try:
                cfg["set"] = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--set: not valid JSON ({exc.msg})") from None
        if args.r is not None:
            cfg["r"] = args.r
        if args.n is not None:
            cfg["n"] = args.n
    if args.command == "selftest" and args.only:
        cfg["only"] = args.only
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.command != "selftest" and not cfg:
        raise ConfigError("no configuration given (use --config)")
    return cfg


def _report_error(code: int, kind: str, message: str, out) -> None:
    err = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    if out is not None:
        try:
            p = Path(out)
            if p.is_dir():
                _write_json(p / "error.json", err)
        except OSError:
            pass


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        _report_error(EXIT_SCHEMA, "schema", "--threads must be at least 1", None)
        return EXIT_SCHEMA
    try:
        try:
            raw = _gather_config(args)
            cfg = resolve(args.command, raw)
        except (ConfigError, GeometryError, ExpressionError, EnergyError) as exc:
            raise CliError(EXIT_SCHEMA, "schema", str(exc)) from None
        if args.command == "selftest":
            out = _out_dir(args.out) if args.out else None
        else:
            out = _out_dir(args.out)
        np.random.seed(cfg.get("seed", 0))
        try:
            result = COMMANDS[args.command](cfg, out, args.threads)
        except ConvergenceError as exc:
            raise CliError(EXIT_SOLVER, "solver", str(exc)) from None
        except (ConfigError, GeometryError, ExpressionError, EnergyError, MeshError, ValueError) as exc:
            raise CliError(EXIT_SCHEMA, "schema", str(exc)) from None
        if out is not None:
            man = _manifest(cfg, result["artifacts"] + ["manifest.json"], result["results"],
                            result["timings"], args.threads)
            _write_json(out / "manifest.json", man)
    except CliError as exc:
        _report_error(exc.code, exc.kind, str(exc), args.out)
        return exc.code
    except OSError as exc:
        _report_error(EXIT_IO, "io", str(exc), None)
        return EXIT_IO
    if args.command == "selftest" and not result.get("all_passed", True):
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

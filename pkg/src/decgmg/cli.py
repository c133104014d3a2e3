"""Command-line harness: ``decgmg poisson | convection | mesh``.

Exit codes: 0 success, 1 I/O error, 2 usage error, 3 validation error,
4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, convection_config, load_config, poisson_config
from .krylov import KrylovBreakdown
from .maps import MapError, save_map
from .mesh import MeshError, make_equilateral_grid, make_triangulated_grid, read_obj, validate_complex, write_obj
from .multigrid import MultigridError, build_hierarchy
from .physics.convection import (
    PressureSolveError,
    integrate_convection,
    rmse_over_time,
    write_rmse_csv,
    write_trajectory_csv,
)
from .physics.poisson import POISSON_SOLVERS, base_mesh, per_cycle_time, solve_poisson
from .physics.rk import StepSizeUnderflow
from .smoothers import SmootherError
from .subdivision import subdivide, subdivision_tower

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2, 3, 4
THREADS_ENV = "DECGMG_NUM_THREADS"


class ValidationFailure(Exception):
    """Raised for invalid inputs that were detected after parsing."""


def _environment():
    import numba
    import scipy

    return {
        "decgmg": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "threads": os.environ.get(THREADS_ENV),
    }


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _load(args):
    return load_config(args.config) if args.config else {}


def _out_dir(args, doc):
    d = Path(args.out or doc.get("output", {}).get("dir", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_poisson(args):
    doc = _load(args)
    tower = doc.setdefault("tower", {})
    solver = doc.setdefault("solver", {})
    if args.levels is not None:
        tower["levels"] = args.levels
    if args.scheme is not None:
        tower["scheme"] = args.scheme
    if args.cycles is not None:
        solver["cycles"] = args.cycles
    if args.solver is not None:
        solver["kind"] = args.solver
    if args.seed is not None:
        doc.setdefault("poisson", {})["seed"] = args.seed
    cfg = poisson_config(doc)
    out = _out_dir(args, doc)
    base = base_mesh(cfg.mesh)
    tower_res = subdivision_tower(base, cfg.scheme, cfg.levels)
    h = build_hierarchy(tower_res, levels=cfg.mg_levels)
    rep = solve_poisson(cfg, hierarchy=h)
    rep.config["environment"] = _environment()
    rep.write_json(out / "report.json")
    rep.write_residuals_csv(out / "residuals.csv")
    _write_json(out / "config.json", {"config": cfg.to_dict(), "environment": _environment()})
    if args.timing:
        with open(out / "timing.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subdivisions", "levels", "fine_vertices", "seconds_per_cycle"])
            for depth in range(1, cfg.levels + 1):
                sub = tower_res[cfg.levels - depth :]
                nl = len(sub) if cfg.mg_levels is None else min(cfg.mg_levels, len(sub))
                hd = build_hierarchy(sub, levels=nl)
                t = per_cycle_time(hd, cfg.cycle, cfg.pre, cfg.post, cfg.smoother, cfg.seed)
                w.writerow([depth, nl, hd.finest.n, repr(t)])
    print(
        f"poisson: {cfg.solver} on {h.finest.n} vertices, {rep.iterations} iterations, "
        f"relative residual {rep.final_residual:.3e}"
    )
    return EXIT_OK if (cfg.solver == "gmg" or rep.converged) else EXIT_SOLVER


def _read_reference(directory):
    directory = Path(directory)
    with open(directory / "times.csv") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["t"]) for r in rows])
    temps = []
    for r in rows:
        with open(directory / r["file"]) as fh:
            temps.append(np.array([float(x["T"]) for x in csv.DictReader(fh)]))
    return times, temps


def cmd_convection(args):
    doc = _load(args)
    if args.solver is not None:
        doc.setdefault("solver", {})["kind"] = args.solver
    if args.tfinal is not None:
        doc.setdefault("convection", {})["t_final"] = args.tfinal
    cfg = convection_config(doc)
    out = _out_dir(args, doc)
    ref = _read_reference(args.reference) if args.reference else None
    res = integrate_convection(cfg)
    write_trajectory_csv(res, out)
    summary = res.summary()
    summary["environment"] = _environment()
    if ref is not None:
        times, temps = ref
        if not np.allclose(times, res.times, rtol=0, atol=1e-12):
            raise ValidationFailure("reference run has different sample times")
        try:
            rmse = rmse_over_time(res.temperatures, temps)
        except ValueError as exc:
            raise ValidationFailure(f"reference run does not match: {exc}") from None
        write_rmse_csv(res.times, rmse, out / "rmse.csv")
        summary["rmse_vs_reference"] = {"reference": str(args.reference), "final": float(rmse[-1]), "max": float(rmse.max())}
    _write_json(out / "summary.json", summary)
    _write_json(out / "config.json", {"config": cfg.to_dict(), "environment": _environment()})
    print(
        f"convection: {cfg.pressure_solver} pressure solver, {res.integrator['accepted_steps']} steps, "
        f"{res.pressure['solves']} pressure solves, {res.wall_time:.1f} s"
    )
    return EXIT_OK


def cmd_mesh_generate(args):
    if args.kind == "grid":
        c = make_triangulated_grid(args.n1, args.n2, args.lx, args.ly)
    else:
        c = make_equilateral_grid(args.n1, args.n2, args.side)
    write_obj(c, args.output)
    print(f"wrote {args.output}: {c.nv} vertices, {c.ne} edges, {c.nt} triangles")
    return EXIT_OK


def cmd_mesh_subdivide(args):
    c = read_obj(args.input)
    _require_valid(c)
    out = Path(args.output)
    res = None
    for k in range(args.times):
        res = subdivide(c if res is None else res.fine, args.scheme)
        if args.maps:
            save_map(res.map, out.with_name(f"{out.stem}_map{k + 1}.mtx"))
    fine = res.fine if res is not None else c
    write_obj(fine, out)
    print(f"wrote {out}: {fine.nv} vertices, {fine.ne} edges, {fine.nt} triangles")
    return EXIT_OK


def _require_valid(c):
    diag = validate_complex(c)
    if not diag.is_valid:
        raise ValidationFailure(f"invalid mesh: {diag}")


def cmd_mesh_inspect(args):
    try:
        c = read_obj(args.input)
    except MeshError as exc:
        info = {"file": str(args.input), "valid": False, "violations": [str(exc)]}
        print(json.dumps(info, indent=2) if args.json else f"{args.input}: {exc}")
        return EXIT_VALIDATION
    diag = validate_complex(c)
    lo, hi = c.bounding_box()
    info = {
        "file": str(args.input),
        "vertices": c.nv,
        "edges": c.ne,
        "triangles": c.nt,
        "euler_characteristic": c.euler_characteristic(),
        "bounding_box": [lo.tolist(), hi.tolist()],
        "digest": c.digest,
        "valid": diag.is_valid,
        "violations": [str(v) for v in diag.violations],
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        for k, v in info.items():
            if k != "violations":
                print(f"{k}: {v}")
        for v in info["violations"]:
            print(f"violation: {v}")
    return EXIT_OK if diag.is_valid else EXIT_VALIDATION


def build_parser():
    p = argparse.ArgumentParser(prog="decgmg", description="DEC geometric multigrid benchmarks")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    po = sub.add_parser("poisson", help="solve L u = b on a subdivided mesh")
    po.add_argument("--config")
    po.add_argument("--levels", type=int)
    po.add_argument("--scheme", choices=["binary", "cubic"])
    po.add_argument("--cycles", type=int)
    po.add_argument("--solver", choices=list(POISSON_SOLVERS))
    po.add_argument("--seed", type=int)
    po.add_argument("--out")
    po.add_argument("--timing", action="store_true", help="write timing.csv (20-minus-10 cycle protocol)")
    po.set_defaults(func=cmd_poisson)

    co = sub.add_parser("convection", help="integrate porous convection")
    co.add_argument("--config")
    co.add_argument("--solver", choices=["gmg", "direct", "gmres"])
    co.add_argument("--tfinal", type=float)
    co.add_argument("--out")
    co.add_argument("--reference", help="output directory of a previous run to compare against")
    co.set_defaults(func=cmd_convection)

    me = sub.add_parser("mesh", help="mesh utilities")
    msub = me.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("generate", help="write a generated mesh as OBJ")
    g.add_argument("kind", choices=["grid", "equilateral"])
    g.add_argument("n1", type=int, help="nx (grid) or rows (equilateral)")
    g.add_argument("n2", type=int, help="ny (grid) or cols (equilateral)")
    g.add_argument("--lx", type=float, default=1.0)
    g.add_argument("--ly", type=float, default=1.0)
    g.add_argument("--side", type=float, default=1.0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_mesh_generate)
    s = msub.add_parser("subdivide", help="subdivide an OBJ mesh")
    s.add_argument("input")
    s.add_argument("--scheme", choices=["binary", "cubic"], default="binary")
    s.add_argument("--times", type=int, default=1)
    s.add_argument("--maps", action="store_true", help="also write each map as Matrix Market")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_mesh_subdivide)
    i = msub.add_parser("inspect", help="print counts and validation diagnostics")
    i.add_argument("input")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_mesh_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "levels", None) is not None and args.levels < 1:
        parser.error("--levels must be >= 1")
    if getattr(args, "times", None) is not None and args.times < 0:
        parser.error("--times must be >= 0")
    try:
        return args.func(args)
    except (ConfigError, ValidationFailure, MeshError, MapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MultigridError, PressureSolveError, KrylovBreakdown, StepSizeUnderflow, SmootherError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

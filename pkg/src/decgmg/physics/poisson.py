"""Poisson benchmark: ``L u = b`` on a subdivided mesh with several solvers."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..krylov import gmg_preconditioned_cg, gmg_preconditioner, gmres
from ..mesh import make_equilateral_grid, make_triangulated_grid, read_obj
from ..multigrid import (
    PinnedSolver,
    SolveReport,
    build_hierarchy,
    relative_residual,
    run_cycle,
    standard_plans,
)
from ..operators import Cochain
from ..subdivision import subdivision_tower

__all__ = [
    "POISSON_SOLVERS",
    "PoissonConfig",
    "base_mesh",
    "poisson_rhs_random",
    "poisson_rhs_divrho",
    "solve_poisson",
    "per_cycle_time",
]

POISSON_SOLVERS = ("direct", "gmg", "cg", "gmg_pcg", "gmres")


@dataclass
class PoissonConfig:
    """Poisson run settings.

    ``mesh`` selects the base mesh: ``{"kind": "equilateral", "rows", "cols",
    "side"}`` (default: the 32-triangle strip), ``{"kind": "grid", "nx", "ny",
    "lx", "ly"}`` or ``{"kind": "obj", "path"}``.  ``levels`` is the number of
    subdivisions; ``mg_levels`` optionally keeps only the finest hierarchy
    levels.
    """

    mesh: dict = field(default_factory=lambda: {"kind": "equilateral", "rows": 4, "cols": 8, "side": 1.0})
    scheme: str = "binary"
    levels: int = 3
    mg_levels: int | None = None
    rhs: str = "random"
    seed: int = 0
    solver: str = "gmg"
    cycle: str = "W"
    cycles: int = 5
    pre: int = 3
    post: int = 3
    smoother: str = "gauss_seidel"
    precond_cycle: str = "W"
    precond_cycles: int = 2
    tol: float = 1e-8
    maxiter: int = 5000
    restart: int = 50

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.scheme not in ("binary", "cubic"):
            raise ValueError(f"unknown subdivision scheme {self.scheme!r}")
        if self.rhs not in ("random", "divrho"):
            raise ValueError(f"unknown right-hand side {self.rhs!r}")
        if self.solver not in POISSON_SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")

    def to_dict(self):
        return asdict(self)


def base_mesh(desc: dict):
    desc = dict(desc)
    kind = desc.pop("kind", "equilateral")
    if kind == "equilateral":
        return make_equilateral_grid(desc.get("rows", 4), desc.get("cols", 8), desc.get("side", 1.0))
    if kind == "grid":
        return make_triangulated_grid(desc["nx"], desc["ny"], desc.get("lx", 1.0), desc.get("ly", 1.0), tuple(desc.get("origin", (0.0, 0.0))))
    if kind == "obj":
        return read_obj(desc["path"])
    raise ValueError(f"unknown mesh kind {kind!r}")


def poisson_rhs_random(L, seed, complex=None):
    """``b = L r`` with ``r ~ U[0, 1)`` drawn from a seeded PCG64 generator."""
    r = np.random.default_rng(seed).random(L.shape[0])
    b = L @ r
    return Cochain(b, 0, complex) if complex is not None else b


def poisson_rhs_divrho(ops, T, alpha_rho0=1.0 / 9.81, g=9.81):
    """``delta(b_flat ^ (alpha_rho0 T))`` with buoyancy ``b = (0, g)``."""
    b_flat = ops.flat(np.array([0.0, g, 0.0]))
    return ops.codiff(ops.wedge01(alpha_rho0 * np.asarray(T, dtype=float), b_flat))


def _gaussian_temperature(c):
    lo, hi = c.bounding_box()
    center = 0.5 * (lo[:2] + hi[:2])
    r2 = np.sum((c.positions[:, :2] - center) ** 2, axis=1)
    return 400.0 * np.exp(-r2) / np.pi


def solve_poisson(cfg: PoissonConfig, hierarchy=None) -> SolveReport:
    """Build the tower and hierarchy, assemble ``b`` and dispatch to the solver.

    The reported ``final_residual`` is recomputed from the returned solution.
    """
    t0 = time.perf_counter()
    if hierarchy is None:
        tower = subdivision_tower(base_mesh(cfg.mesh), cfg.scheme, cfg.levels)
        hierarchy = build_hierarchy(tower, levels=cfg.mg_levels)
    h = hierarchy
    setup = time.perf_counter() - t0
    L, mass = h.L, h.mass
    if cfg.rhs == "random":
        b = poisson_rhs_random(L, cfg.seed)
    else:
        b = poisson_rhs_divrho(h.finest.ops, _gaussian_temperature(h.finest.complex))
    echo = dict(cfg.to_dict(), levels_vertices=h.sizes())

    if cfg.solver == "direct":
        start = time.perf_counter()
        x = PinnedSolver(L, mass).solve(b)
        rep = SolveReport(x, config=echo, iterations=1, converged=True)
        rep.wall_time = time.perf_counter() - start
        rep.residuals = [relative_residual(L, x, b)]
        rep.times = [rep.wall_time]
    elif cfg.solver == "gmg":
        plan = standard_plans(len(h), cfg.cycle, cfg.pre, cfg.post, cfg.smoother, cfg.cycles)
        rep = run_cycle(h, plan, b, config=echo)
    elif cfg.solver in ("cg", "gmg_pcg"):
        plan = None
        if cfg.solver == "gmg_pcg":
            plan = standard_plans(len(h), cfg.precond_cycle, cfg.pre, cfg.post, cfg.smoother, cfg.precond_cycles)
        rep = gmg_preconditioned_cg(h, b, plan, tol=cfg.tol, maxiter=cfg.maxiter)
        rep.config = dict(echo, **rep.config)
    else:
        plan = standard_plans(len(h), cfg.precond_cycle, cfg.pre, cfg.post, cfg.smoother, cfg.precond_cycles)
        rep = gmres(L, b, M=gmg_preconditioner(h, plan), restart=cfg.restart, tol=cfg.tol, maxiter=cfg.maxiter, config=echo)
    rep.final_residual = relative_residual(L, rep.solution, b)
    rep.config["setup_seconds"] = setup
    rep.config["n_vertices"] = int(L.shape[0])
    return rep


def per_cycle_time(h, plan_kind="V", pre=3, post=3, smoother="gauss_seidel", seed=0, repeats=3, many=20, few=10):
    """Seconds per cycle as ``(t(many) - t(few)) / (many - few)``.

    Each of ``t(many)`` and ``t(few)`` is the minimum over ``repeats`` runs,
    which keeps timer noise from making the difference negative on small meshes.
    """
    b = poisson_rhs_random(h.L, seed)
    plans = {k: standard_plans(len(h), plan_kind, pre, post, smoother, k) for k in (few, many)}
    spans = {few: np.inf, many: np.inf}
    for _ in range(repeats):
        for k, plan in plans.items():
            t = time.perf_counter()
            run_cycle(h, plan, b)
            spans[k] = min(spans[k], time.perf_counter() - t)
    return (spans[many] - spans[few]) / (many - few)

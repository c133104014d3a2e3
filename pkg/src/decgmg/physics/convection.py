"""Porous-medium (Darcy-Boussinesq) convection on a triangulated rectangle.

Per right-hand-side evaluation:

1. solve ``L P = delta(b_flat ^ (alpha_rho0 T))`` for the pressure,
2. form the Darcy flux ``q = -k (d0 P - alpha_rho0 (b_flat ^ T))``,
3. return ``dT/dt = -(1/phi) L_q T + kappa L T`` with the update zeroed on
   the top and bottom walls.

``b = -g`` is the buoyancy direction, so hot fluid rises.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..krylov import gmg_preconditioner, gmres
from ..mesh import make_triangulated_grid
from ..operators import DECOperators
from ..multigrid import (
    MultigridError,
    PinnedSolver,
    build_hierarchy,
    relative_residual,
    run_cycle,
    standard_plans,
)
from ..subdivision import subdivision_tower
from .rk import DP54, integrate

__all__ = [
    "ConvectionConfig",
    "ConvectionState",
    "ConvectionModel",
    "ConvectionResult",
    "PressureSolveError",
    "initial_temperature",
    "darcy_flux",
    "temperature_rhs",
    "integrate_convection",
    "rmse_over_time",
    "write_trajectory_csv",
    "write_rmse_csv",
]

PRESSURE_SOLVERS = ("direct", "gmg", "gmres")


class PressureSolveError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} at t = {t!r}")
        self.t = t


@dataclass
class ConvectionConfig:
    """Desk-scale defaults: a 4x4 base grid subdivided 3 times (33x33 vertices) on [-1, 1]^2."""

    nx: int = 4
    ny: int = 4
    lx: float = 2.0
    ly: float = 2.0
    levels: int = 3
    scheme: str = "binary"
    g: float = 9.81
    alpha_rho0: float | None = None  # defaults to 1/g
    phi: float = 0.1
    Ra: float = 1000.0
    k_eta: float = 1.0
    delta_T: float = 200.0
    T_top: float = -100.0
    T_bottom: float = 100.0
    ic_scale: float = 400.0
    ic_variance: float = 0.5
    t_final: float = 0.5
    n_samples: int = 11
    rtol: float = 1e-9
    atol: float = 1e-9
    pressure_solver: str = "gmg"
    pressure_tol: float = 1e-8
    cycle: str = "W"
    pre: int = 3
    post: int = 3
    smoother: str = "gauss_seidel"
    max_cycles: int = 100
    gmres_restart: int = 50
    gmres_maxiter: int = 5000
    gmres_preconditioner: str = "none"
    advection: bool = True
    diffusion: bool = True
    diffusivity: float | None = None  # overrides the derived value

    def __post_init__(self):
        if self.alpha_rho0 is None:
            self.alpha_rho0 = 1.0 / self.g
        self.validate()

    def validate(self):
        for name in ("lx", "ly", "g", "alpha_rho0", "phi", "Ra", "k_eta", "delta_T", "ic_scale", "ic_variance", "rtol", "atol", "pressure_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.nx < 1 or self.ny < 1 or self.levels < 0:
            raise ValueError("grid sizes must be >= 1 and levels >= 0")
        if self.t_final < 0 or self.n_samples < 1:
            raise ValueError("t_final must be >= 0 and n_samples >= 1")
        if self.pressure_solver not in PRESSURE_SOLVERS:
            raise ValueError(f"unknown pressure solver {self.pressure_solver!r}")
        if self.gmres_preconditioner not in ("none", "gmg"):
            raise ValueError(f"unknown GMRES preconditioner {self.gmres_preconditioner!r}")
        if self.diffusivity is not None and self.diffusivity < 0:
            raise ValueError("diffusivity must be non-negative")

    @property
    def derived_diffusivity(self) -> float:
        """``(1/Ra) g alpha_rho0 k delta_T y_max / phi`` with ``y_max`` the domain height."""
        return self.g * self.alpha_rho0 * self.k_eta * self.delta_T * self.ly / (self.Ra * self.phi)

    @property
    def kappa(self) -> float:
        if not self.diffusion:
            return 0.0
        return self.derived_diffusivity if self.diffusivity is None else self.diffusivity

    @property
    def origin(self):
        return (-self.lx / 2, -self.ly / 2)

    def sample_times(self):
        if self.t_final == 0:
            return np.zeros(1)
        return np.linspace(0.0, self.t_final, max(self.n_samples, 2))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown convection parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ConvectionState:
    T: np.ndarray
    P: np.ndarray
    q: np.ndarray
    t: float


class ConvectionModel:
    """Mesh, operators, wall masks and pressure solver for one configuration."""

    def __init__(self, cfg: ConvectionConfig):
        cfg.validate()
        self.cfg = cfg
        base = make_triangulated_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly, origin=cfg.origin)
        if cfg.levels > 0:
            self.tower = subdivision_tower(base, cfg.scheme, cfg.levels)
            self.hierarchy = build_hierarchy(self.tower)
            self.complex = self.tower[0].fine
            self.ops = self.hierarchy.finest.ops
            self.L = self.hierarchy.L
        else:
            self.tower, self.hierarchy, self.complex = [], None, base
            self.ops = DECOperators(base)
            self.L = self.ops.laplacian.tocsr()
        self.mass = self.ops.area
        y = self.complex.positions[:, 1]
        ymin, ymax = self.complex.bounding_box()[0][1], self.complex.bounding_box()[1][1]
        tol = 1e-9 * cfg.ly
        self.top = np.flatnonzero(np.abs(y - ymax) <= tol)
        self.bottom = np.flatnonzero(np.abs(y - ymin) <= tol)
        self.walls = np.concatenate([self.top, self.bottom])
        # buoyancy 1-form: flat of b = -g = (0, g)
        self.b_flat = self.ops.flat(np.array([0.0, cfg.g, 0.0]))
        self._direct = None
        self._plan = None
        self._precond = None

    @property
    def nv(self):
        return self.complex.nv

    def buoyancy(self, T):
        """``alpha_rho0 (b_flat ^ T)``, a primal 1-form."""
        return self.cfg.alpha_rho0 * self.ops.wedge01(T, self.b_flat)

    def pressure_rhs(self, T):
        return self.ops.codiff(self.buoyancy(T))

    def solve_pressure(self, rhs, x0=None):
        """Return ``(P, relative residual, iterations)``."""
        cfg = self.cfg
        kind = cfg.pressure_solver
        if kind == "direct":
            if self._direct is None:
                self._direct = PinnedSolver(self.L, self.mass)
            P = self._direct.solve(rhs)
            return P, relative_residual(self.L, P, rhs), 1
        if kind == "gmg":
            self._require_hierarchy()
            if self._plan is None:
                self._plan = standard_plans(len(self.hierarchy), cfg.cycle, cfg.pre, cfg.post, cfg.smoother, cfg.max_cycles)
            rep = run_cycle(self.hierarchy, self._plan, rhs, x0=x0, tol=cfg.pressure_tol)
            if not rep.converged:
                raise PressureSolveError(f"GMG pressure solve stalled at residual {rep.final_residual:.3e}")
            return rep.solution, rep.final_residual, rep.iterations
        M = None
        if cfg.gmres_preconditioner == "gmg":
            self._require_hierarchy()
            if self._precond is None:
                plan = standard_plans(len(self.hierarchy), cfg.cycle, cfg.pre, cfg.post, cfg.smoother, 1)
                self._precond = gmg_preconditioner(self.hierarchy, plan)
            M = self._precond
        rep = gmres(self.L, rhs, M=M, x0=x0, restart=cfg.gmres_restart, tol=cfg.pressure_tol, maxiter=cfg.gmres_maxiter)
        if not rep.converged:
            raise PressureSolveError(f"GMRES pressure solve failed ({rep.message or 'maxiter'}) at residual {rep.final_residual:.3e}")
        return rep.solution, rep.final_residual, rep.iterations

    def _require_hierarchy(self):
        if self.hierarchy is None:
            raise MultigridError("multigrid pressure solves need levels >= 1")

    def relative_divergence(self, q, rhs):
        """``||delta q|| / ||delta(buoyancy)||``; the plain norm when the latter vanishes."""
        dq = np.linalg.norm(self.ops.codiff(q))
        nb = np.linalg.norm(rhs)
        return float(dq / nb) if nb > 0 else float(dq)


def initial_temperature(model: ConvectionModel) -> np.ndarray:
    """Scaled isotropic Gaussian centred in the domain, with wall values imposed."""
    cfg = model.cfg
    xy = model.complex.positions[:, :2]
    center = np.array(cfg.origin) + 0.5 * np.array([cfg.lx, cfg.ly])
    s2 = cfg.ic_variance
    r2 = np.sum((xy - center) ** 2, axis=1)
    T = cfg.ic_scale * np.exp(-0.5 * r2 / s2) / (2 * np.pi * s2)
    T[model.top] = cfg.T_top
    T[model.bottom] = cfg.T_bottom
    return T


def darcy_flux(T, P, model: ConvectionModel) -> np.ndarray:
    return -model.cfg.k_eta * (model.ops.grad(P) - model.buoyancy(T))


def temperature_rhs(state: ConvectionState, model: ConvectionModel) -> np.ndarray:
    """``dT/dt`` for a state whose pressure and flux are already consistent with ``T``."""
    cfg = model.cfg
    out = np.zeros(model.nv)
    if cfg.advection:
        out -= model.ops.lie(state.q, state.T) / cfg.phi
    if cfg.kappa:
        out += cfg.kappa * (model.L @ state.T)
    out[model.walls] = 0.0
    return out


@dataclass
class ConvectionResult:
    times: np.ndarray
    states: list
    config: ConvectionConfig
    integrator: dict
    pressure: dict
    max_divergence: float
    walls_exact: bool
    wall_time: float
    positions: np.ndarray = field(repr=False, default=None)

    @property
    def temperatures(self):
        return [s.T for s in self.states]

    def summary(self):
        return {
            "config": self.config.to_dict(),
            "n_vertices": int(len(self.states[0].T)),
            "sample_times": [float(t) for t in self.times],
            "diffusivity": self.config.kappa,
            "integrator": self.integrator,
            "pressure_solves": self.pressure,
            "max_relative_divergence": self.max_divergence,
            "walls_exact": self.walls_exact,
            "wall_time": self.wall_time,
        }


def integrate_convection(cfg: ConvectionConfig, model: ConvectionModel | None = None) -> ConvectionResult:
    """Method-of-lines integration with DP5(4), re-solving pressure at every stage."""
    start = time.perf_counter()
    model = model if model is not None else ConvectionModel(cfg)
    T0 = initial_temperature(model)
    wall_values = T0[model.walls].copy()
    pstats = {"solver": cfg.pressure_solver, "solves": 0, "iterations": 0, "max_residual": 0.0}
    div = {"max": 0.0}
    last = {"P": np.zeros(model.nv), "t": 0.0, "P_stage": np.zeros(model.nv)}
    walls_ok = {"ok": True}

    def pressure(T, t):
        rhs = model.pressure_rhs(T)
        try:
            P, res, its = model.solve_pressure(rhs, x0=last["P"])
        except (PressureSolveError, MultigridError, ArithmeticError) as exc:
            raise PressureSolveError(str(exc), t) from exc
        if not np.all(np.isfinite(P)):
            raise PressureSolveError("non-finite pressure", t)
        pstats["solves"] += 1
        pstats["iterations"] += its
        pstats["max_residual"] = max(pstats["max_residual"], res)
        q = darcy_flux(T, P, model)
        div["max"] = max(div["max"], model.relative_divergence(q, rhs))
        return P, q

    def f(t, T):
        P, q = pressure(T, t)
        last["P_stage"] = P
        return temperature_rhs(ConvectionState(T, P, q, t), model)

    def on_accept(t, T):
        # warm start from the pressure of the accepted solution (its FSAL stage)
        last["P"] = last["P_stage"]
        if not np.array_equal(T[model.walls], wall_values):
            walls_ok["ok"] = False

    times = cfg.sample_times()
    samples, stats = integrate(f, T0, times, rtol=cfg.rtol, atol=cfg.atol, on_accept=on_accept)
    states = []
    for t, T in zip(times, samples):
        P, q = pressure(T, float(t))
        states.append(ConvectionState(T, P, q, float(t)))
    pstats["mean_iterations"] = pstats["iterations"] / max(pstats["solves"], 1)
    return ConvectionResult(
        times=times,
        states=states,
        config=cfg,
        integrator=dict(stats.to_dict(), method=DP54.name, rtol=cfg.rtol, atol=cfg.atol),
        pressure=pstats,
        max_divergence=div["max"],
        walls_exact=walls_ok["ok"],
        wall_time=time.perf_counter() - start,
        positions=model.complex.positions,
    )


def rmse_over_time(a, b, weights=None) -> np.ndarray:
    """Per-sample RMSE between two temperature trajectories.

    ``a`` and ``b`` are :class:`ConvectionResult` objects or sequences of
    vertex arrays.  ``weights`` (e.g. dual cell areas) gives the weighted
    variant.
    """
    Ta = a.temperatures if isinstance(a, ConvectionResult) else list(a)
    Tb = b.temperatures if isinstance(b, ConvectionResult) else list(b)
    if isinstance(a, ConvectionResult) and isinstance(b, ConvectionResult):
        if not np.array_equal(a.times, b.times):
            raise ValueError("trajectories have different sample times")
    if len(Ta) != len(Tb):
        raise ValueError("trajectories have different numbers of samples")
    out = np.empty(len(Ta))
    for i, (x, y) in enumerate(zip(Ta, Tb)):
        x, y = np.asarray(x), np.asarray(y)
        if x.shape != y.shape:
            raise ValueError(f"sample {i}: meshes differ ({x.shape} vs {y.shape})")
        d2 = (x - y) ** 2
        out[i] = np.sqrt(np.average(d2, weights=weights))
    return out


def write_trajectory_csv(result: ConvectionResult, directory, prefix="T"):
    """One CSV per sample, columns ``vertex, x, y, T, P``; returns the paths."""
    directory = Path(directory)
    paths = []
    pos = result.positions
    for k, s in enumerate(result.states):
        p = directory / f"{prefix}_{k:04d}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "x", "y", "T", "P"])
            for v in range(len(s.T)):
                w.writerow([v, repr(float(pos[v, 0])), repr(float(pos[v, 1])), repr(float(s.T[v])), repr(float(s.P[v]))])
        paths.append(p)
    with open(directory / "times.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "t", "file"])
        for k, (t, p) in enumerate(zip(result.times, paths)):
            w.writerow([k, repr(float(t)), p.name])
    return paths


def write_rmse_csv(times, rmse, path):
    """Columns ``t, rmse``; the t = 0 row is written (as zero) but flagged for log plots."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rmse", "log_plottable"])
        for t, r in zip(times, rmse):
            w.writerow([repr(float(t)), repr(float(r)), int(t > 0 and r > 0)])

"""Geometric multigrid over a subdivision tower.

Every level carries the 0-form Laplacian rediscretized on its own mesh,
prolongation ``P = M(f).T`` and full-weighting restriction
``R = rownormalize(M(f))``.  A cycle is described by a :class:`CyclePlan`,
an explicit walk of ``"down"``/``"up"`` moves over the levels, so V-, W-,
F- and arbitrary mixed schedules all run through the same executor.

The reflective-boundary Laplacian annihilates constants.  Right-hand sides
are projected onto the complement of constants in the ``star0`` inner
product, the coarsest solve pins vertex 0 and re-projects, and returned
solutions have zero ``star0``-weighted mean.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .maps import matrix_of, restriction_matrix
from .operators import DECOperators
from .smoothers import SMOOTHERS, _as_csr, smooth_inplace

__all__ = [
    "MultigridError",
    "Level",
    "MultigridHierarchy",
    "PinnedSolver",
    "CyclePlan",
    "SolveReport",
    "build_hierarchy",
    "standard_plans",
    "run_cycle",
    "weighted_mean",
    "project_mean_zero",
    "relative_residual",
]


class MultigridError(RuntimeError):
    pass


def weighted_mean(u, mass):
    return float(mass @ u) / float(mass.sum())


def project_mean_zero(u, mass):
    """Remove the ``mass``-weighted mean of ``u``."""
    return u - weighted_mean(u, mass)


def relative_residual(A, x, b):
    """``||A x - b||_2 / ||b||_2``; the plain residual norm when ``b == 0``."""
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


class PinnedSolver:
    """Sparse LU of a singular Laplacian with vertex 0 pinned to zero."""

    def __init__(self, L, mass):
        n = L.shape[0]
        self.mass = np.asarray(mass, dtype=float)
        self.n = n
        keep = np.ones(n)
        keep[0] = 0.0
        K = sp.diags(keep)
        pinned = (K @ L @ K + sp.csc_matrix(([1.0], ([0], [0])), shape=(n, n))).tocsc()
        try:
            self._lu = spla.splu(pinned)
        except RuntimeError as exc:
            raise MultigridError(f"coarsest factorization failed: {exc}") from exc

    def solve(self, b):
        rhs = project_mean_zero(np.asarray(b, dtype=float), self.mass)
        rhs[0] = 0.0
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise MultigridError("coarsest solve produced non-finite values")
        return project_mean_zero(x, self.mass)


@dataclass(eq=False)
class Level:
    complex: object
    ops: DECOperators
    L: sp.csr_matrix
    mass: np.ndarray
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None

    @property
    def n(self):
        return self.L.shape[0]

    @cached_property
    def S(self):
        """Symmetric positive semidefinite form ``-star0 L``."""
        return _as_csr(-self.ops.stiffness)


class MultigridHierarchy:
    """Levels finest first plus a factorized coarsest-level solver."""

    def __init__(self, levels, galerkin=False):
        self.levels = levels
        self.galerkin = galerkin
        self.coarse_solver = PinnedSolver(levels[-1].L, levels[-1].mass)

    def __len__(self):
        return len(self.levels)

    @property
    def finest(self) -> Level:
        return self.levels[0]

    @property
    def L(self):
        return self.levels[0].L

    @property
    def mass(self):
        return self.levels[0].mass

    def sizes(self):
        return [lev.n for lev in self.levels]


def build_hierarchy(tower, levels=None, galerkin=False, clamp=False) -> MultigridHierarchy:
    """Assemble a hierarchy from a subdivision tower (finest first).

    Level ``k`` lives on ``tower[k].fine``; its transfer operators come from
    ``tower[k].map``.  ``levels`` keeps only the finest entries.  With
    ``galerkin=True`` coarse operators are ``R L P`` instead of being
    rediscretized.
    """
    tower = list(tower)
    if levels is not None:
        if levels < 1 or levels > len(tower):
            raise MultigridError(f"cannot take {levels} levels from a tower of {len(tower)}")
        tower = tower[:levels]
    for fine, coarse in zip(tower, tower[1:]):
        if fine.map.codomain is not coarse.fine:
            raise MultigridError("tower maps are not composable")
    out = []
    for k, res in enumerate(tower):
        ops = DECOperators(res.fine, clamp=clamp)
        out.append(Level(res.fine, ops, _as_csr(ops.laplacian), ops.area))
    for k in range(len(out) - 1):
        M = matrix_of(tower[k].map)
        out[k].P = sp.csr_matrix(M.T)
        out[k].R = sp.csr_matrix(restriction_matrix(tower[k].map))
        if galerkin:
            out[k + 1].L = _as_csr(out[k].R @ out[k].L @ out[k].P)
    _warm_up_kernels()
    for lev in out:
        d = lev.L.diagonal()
        if np.any(d == 0):
            raise MultigridError("Laplacian with zero diagonal entry")
    return MultigridHierarchy(out, galerkin=galerkin)


def _warm_up_kernels():
    # load or compile the Gauss-Seidel kernel before anything is timed
    A = _as_csr(sp.identity(1, format="csr"))
    smooth_inplace(A, np.zeros(1), np.ones(1), "gauss_seidel", 1)


@dataclass(frozen=True)
class CyclePlan:
    """A multigrid schedule: a walk of level transitions plus smoothing settings.

    ``walk`` starts and ends at the finest level (0).  ``pre`` and ``post``
    are sweep counts, either one int for all levels or one per level.
    """

    walk: tuple
    pre: object = 3
    post: object = 3
    smoother: str = "gauss_seidel"
    cycles: int = 1
    omega: float = 2.0 / 3.0
    name: str = "custom"

    def depth(self):
        d = m = 0
        for move in self.walk:
            d += 1 if move == "down" else -1
            m = max(m, d)
        return m

    def validate(self, nlevels):
        d = 0
        for i, move in enumerate(self.walk):
            if move not in ("down", "up"):
                raise MultigridError(f"invalid move {move!r} at position {i}")
            d += 1 if move == "down" else -1
            if d < 0:
                raise MultigridError(f"walk rises above the finest level at position {i}")
            if d > nlevels - 1:
                raise MultigridError(f"walk descends below the coarsest level at position {i}")
        if d != 0:
            raise MultigridError("walk does not return to the finest level")
        if self.smoother not in SMOOTHERS:
            raise MultigridError(f"unknown smoother {self.smoother!r}")
        if self.cycles < 0:
            raise MultigridError("cycles must be non-negative")
        for counts in (self.pre, self.post):
            if not np.isscalar(counts) and len(counts) < nlevels:
                raise MultigridError("per-level smoothing counts shorter than the hierarchy")
        return self

    def sweeps(self, level):
        pre = self.pre if np.isscalar(self.pre) else self.pre[level]
        post = self.post if np.isscalar(self.post) else self.post[level]
        return int(pre), int(post)

    def to_dict(self):
        d = asdict(self)
        d["walk"] = list(self.walk)
        return d


def _walk(level, nlevels, kind):
    """Moves of one cycle invoked at ``level``; the coarsest level contributes nothing."""
    if level >= nlevels - 1:
        return []
    if kind == "V":
        inner = _walk(level + 1, nlevels, "V")
    elif kind == "W":
        inner = _walk(level + 1, nlevels, "W") * 2
    elif kind == "F":
        inner = _walk(level + 1, nlevels, "F") + _walk(level + 1, nlevels, "V")
    else:
        raise MultigridError(f"unknown cycle type {kind!r}")
    return ["down"] + inner + ["up"]


def standard_plans(levels, kind="V", pre=3, post=3, smoother="gauss_seidel", cycles=1) -> CyclePlan:
    """Canonical V (gamma=1), W (gamma=2) or F walk over ``levels`` levels."""
    if levels < 1:
        raise MultigridError("levels must be >= 1")
    kind = {1: "V", 2: "W"}.get(kind, kind)
    kind = str(kind).upper()
    plan = CyclePlan(tuple(_walk(0, levels, kind)), pre, post, smoother, cycles, name=kind)
    return plan.validate(levels)


def _smooth(level: Level, x, b, plan: CyclePlan, sweeps):
    if sweeps <= 0:
        return
    if plan.smoother == "cg_smoother":
        # CG needs the symmetric form: -star0 L x = -star0 b
        smooth_inplace(level.S, x, -level.mass * b, "cg_smoother", sweeps)
    else:
        smooth_inplace(level.L, x, b, plan.smoother, sweeps, plan.omega)


def _one_cycle(h: MultigridHierarchy, plan: CyclePlan, x, b):
    levels = h.levels
    nl = len(levels)
    if nl == 1:
        x[:] = h.coarse_solver.solve(b)
        return x
    xs = [x] + [None] * (nl - 1)
    bs = [b] + [None] * (nl - 1)
    lev = 0
    prev = None
    for move in plan.walk:
        if move == "down":
            cur = levels[lev]
            _smooth(cur, xs[lev], bs[lev], plan, plan.sweeps(lev)[0])
            r = bs[lev] - cur.L @ xs[lev]
            bs[lev + 1] = cur.R @ r
            lev += 1
            if lev == nl - 1:
                xs[lev] = h.coarse_solver.solve(bs[lev])
            else:
                xs[lev] = np.zeros(levels[lev].n)
        else:
            if prev == "down" and lev < nl - 1:
                # turnaround above the coarsest level: smooth instead of solving
                _smooth(levels[lev], xs[lev], bs[lev], plan, sum(plan.sweeps(lev)))
            xs[lev - 1] += levels[lev - 1].P @ xs[lev]
            lev -= 1
            _smooth(levels[lev], xs[lev], bs[lev], plan, plan.sweeps(lev)[1])
        prev = move
    return x


@dataclass
class SolveReport:
    """Outcome of a linear solve: solution, residual history and configuration echo."""

    solution: np.ndarray
    residuals: list = field(default_factory=list)
    times: list = field(default_factory=list)
    iterations: int = 0
    wall_time: float = 0.0
    converged: bool = False
    final_residual: float = float("nan")
    config: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self, include_solution=False):
        d = {
            "residuals": [float(r) for r in self.residuals],
            "cumulative_seconds": [float(t) for t in self.times],
            "iterations": int(self.iterations),
            "wall_time": float(self.wall_time),
            "converged": bool(self.converged),
            "final_residual": float(self.final_residual),
            "config": self.config,
            "message": self.message,
        }
        if include_solution:
            d["solution"] = np.asarray(self.solution).tolist()
        return d

    def write_json(self, path, include_solution=False):
        with open(path, "w") as fh:
            json.dump(self.to_dict(include_solution), fh, indent=2)

    def write_residuals_csv(self, path):
        """CSV with columns ``cycle, rel_residual, cumulative_seconds``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "rel_residual", "cumulative_seconds"])
            for k, (r, t) in enumerate(zip(self.residuals, self.times), start=1):
                w.writerow([k, repr(float(r)), repr(float(t))])


def run_cycle(h: MultigridHierarchy, plan: CyclePlan, b, x0=None, tol=None, config=None) -> SolveReport:
    """Run ``plan.cycles`` multigrid cycles on the finest-level system ``L x = b``.

    The relative residual at the finest level is recorded after every cycle.
    With ``tol`` set, cycling stops early once the residual drops to ``tol``.
    """
    plan.validate(len(h))
    L, mass = h.L, h.mass
    b_in = np.asarray(b, dtype=float)
    if b_in.shape != (L.shape[0],):
        raise MultigridError(f"right-hand side has shape {b_in.shape}, expected {(L.shape[0],)}")
    b = project_mean_zero(b_in, mass)
    x = np.zeros(L.shape[0]) if x0 is None else np.array(x0, dtype=float, copy=True)
    report = SolveReport(x, config=dict(config or {}, plan=plan.to_dict(), levels=h.sizes()))
    start = time.perf_counter()
    for _ in range(plan.cycles):
        _one_cycle(h, plan, x, b)
        report.iterations += 1
        res = relative_residual(L, x, b_in)
        report.residuals.append(res)
        report.times.append(time.perf_counter() - start)
        if not np.isfinite(res):
            raise MultigridError(f"non-finite residual after cycle {report.iterations}")
        if tol is not None and res <= tol:
            break
    x[:] = project_mean_zero(x, mass)
    report.solution = x
    report.wall_time = time.perf_counter() - start
    report.final_residual = relative_residual(L, x, b_in)
    report.converged = tol is None or report.final_residual <= tol
    return report


def apply_cycle(h: MultigridHierarchy, plan: CyclePlan, b):
    """``plan.cycles`` cycles from a zero guess, returning only the approximation."""
    b = project_mean_zero(np.asarray(b, dtype=float), h.mass)
    x = np.zeros_like(b)
    for _ in range(plan.cycles):
        _one_cycle(h, plan, x, b)
    return x

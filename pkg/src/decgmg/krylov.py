"""Conjugate gradients and restarted GMRES, optionally preconditioned by multigrid.

The DEC Laplacian ``L = star0^-1 A`` is not symmetric, but ``-star0 L = -A``
is.  :func:`laplacian_cg` therefore runs CG on ``-A x = -star0 b`` while
measuring convergence by the relative residual of the original system.
"""

from __future__ import annotations

import time

import numpy as np

from .multigrid import (
    CyclePlan,
    MultigridHierarchy,
    SolveReport,
    apply_cycle,
    project_mean_zero,
    relative_residual,
)

__all__ = ["KrylovBreakdown", "cg", "gmres", "laplacian_cg", "gmg_preconditioned_cg", "gmg_preconditioner"]


class KrylovBreakdown(ArithmeticError):
    def __init__(self, message, iteration):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


def cg(A, b, x0=None, M=None, tol=1e-8, maxiter=1000, residual_norm=None, callback=None):
    """Flexible preconditioned conjugate gradients for symmetric ``A``.

    Parameters
    ----------
    M : callable, optional
        Preconditioner, ``z = M(r)``.  May be nonsymmetric or vary between
        calls; the Polak-Ribiere form of beta keeps CG robust to that.
    residual_norm : callable, optional
        Maps the CG residual to the relative residual used for the stopping
        test.  Defaults to ``||r|| / ||b||``.

    Returns
    -------
    x, residual_history, converged
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    nb = np.linalg.norm(b)
    if residual_norm is None:
        def residual_norm(r):
            return np.linalg.norm(r) / nb if nb > 0 else np.linalg.norm(r)

    r = b - A @ x
    history = [residual_norm(r)]
    if history[-1] <= tol:
        return x, history, True
    z = M(r) if M is not None else r.copy()
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise KrylovBreakdown("CG breakdown (non-positive curvature)", k)
        alpha = rz / pAp
        x += alpha * p
        r_old = r
        r = r - alpha * Ap
        history.append(residual_norm(r))
        if callback is not None:
            callback(k, x, history[-1])
        if not np.isfinite(history[-1]):
            raise KrylovBreakdown("CG produced non-finite residual", k)
        if history[-1] <= tol:
            return x, history, True
        z = M(r) if M is not None else r.copy()
        rz_new = r @ z
        if rz == 0.0:
            raise KrylovBreakdown("CG breakdown (zero r.z)", k)
        beta = (z @ (r - r_old)) / rz if M is not None else rz_new / rz
        p = z + beta * p
        rz = rz_new
    return x, history, False


def gmres(A, b, M=None, x0=None, restart=50, tol=1e-8, maxiter=1000, config=None) -> SolveReport:
    """Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.

    The optional preconditioner ``M`` (callable) is applied on the right,
    so the monitored residual is the true residual ``b - A x``.
    ``maxiter`` counts inner iterations.  A restart window that fails to
    reduce the residual at all ends the solve with ``message="stagnated"``.
    """
    start = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    nb = np.linalg.norm(b)
    scale = nb if nb > 0 else 1.0
    prec = M if M is not None else (lambda v: v)
    report = SolveReport(x, config=dict(config or {}, method="gmres", restart=restart, tol=tol))
    r = b - A @ x
    beta = np.linalg.norm(r)
    total = 0
    if beta / scale <= tol:
        report.converged = True
    while not report.converged and total < maxiter:
        m = min(restart, maxiter - total)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        window_start = beta
        j_done = 0
        for j in range(m):
            Z[j] = prec(V[j])
            w = A @ Z[j]
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            res = abs(g[j + 1]) / scale
            report.residuals.append(res)
            report.times.append(time.perf_counter() - start)
            happy = denom == 0.0 or H[j + 1, j] == 0.0 and np.linalg.norm(w) == 0.0
            if res <= tol or happy:
                break
            V[j + 1] = w / np.linalg.norm(w) if np.linalg.norm(w) > 0 else w
        y = _back_substitute(H[:j_done, :j_done], g[:j_done])
        x += Z[:j_done].T @ y
        r = b - A @ x
        beta = np.linalg.norm(r)
        if beta / scale <= tol:
            report.converged = True
        elif beta >= window_start:
            report.message = "stagnated"
            break
    report.solution = x
    report.iterations = total
    report.final_residual = relative_residual(A, x, b)
    report.converged = report.final_residual <= tol
    report.wall_time = time.perf_counter() - start
    return report


def _back_substitute(R, g):
    k = len(g)
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        d = R[i, i]
        y[i] = (g[i] - R[i, i + 1 :] @ y[i + 1 :]) / d if d != 0 else 0.0
    return y


def gmg_preconditioner(h: MultigridHierarchy, plan: CyclePlan):
    """Callable applying ``plan.cycles`` multigrid cycles from a zero guess."""
    plan.validate(len(h))

    def apply(r):
        return apply_cycle(h, plan, r)

    return apply


def laplacian_cg(L, mass, stiffness, b, x0=None, tol=1e-8, maxiter=1000, precondition=None, config=None) -> SolveReport:
    """Solve ``L x = b`` (``L = star0^-1 stiffness``) by CG on ``-stiffness``.

    ``precondition`` approximates ``L^-1``; it receives residuals of the
    original system.
    """
    start = time.perf_counter()
    b_in = np.asarray(b, dtype=float)
    bp = project_mean_zero(b_in, mass)
    S = -stiffness
    c = -mass * bp
    nb = np.linalg.norm(b_in)
    scale = nb if nb > 0 else 1.0

    def residual_norm(r):
        return np.linalg.norm(r / mass) / scale

    M = None
    if precondition is not None:
        def M(r):
            return project_mean_zero(precondition(-r / mass), mass)

    x, hist, _ = cg(S, c, x0=x0, M=M, tol=tol, maxiter=maxiter, residual_norm=residual_norm)
    x = project_mean_zero(x, mass)
    rep = SolveReport(x, residuals=hist[1:], config=dict(config or {}, tol=tol, maxiter=maxiter))
    rep.iterations = len(hist) - 1
    rep.final_residual = relative_residual(L, x, b_in)
    rep.converged = rep.final_residual <= tol
    rep.wall_time = time.perf_counter() - start
    rep.times = [rep.wall_time] * len(rep.residuals)
    return rep


def gmg_preconditioned_cg(h: MultigridHierarchy, b, inner_plan: CyclePlan | None, tol=1e-8, maxiter=1000, x0=None) -> SolveReport:
    """CG on the finest-level Laplacian of ``h``, preconditioned by ``inner_plan`` cycles.

    ``inner_plan=None`` gives unpreconditioned CG on the same system.
    """
    lev = h.finest
    pre = gmg_preconditioner(h, inner_plan) if inner_plan is not None else None
    cfg = {"method": "gmg_pcg" if pre else "cg", "levels": h.sizes()}
    if inner_plan is not None:
        cfg["plan"] = inner_plan.to_dict()
    return laplacian_cg(lev.L, lev.mass, lev.ops.stiffness, b, x0=x0, tol=tol, maxiter=maxiter, precondition=pre, config=cfg)

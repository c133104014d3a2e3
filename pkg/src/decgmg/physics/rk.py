"""Adaptive Dormand-Prince 5(4) integrator with a PI step-size controller."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["StepSizeUnderflow", "DP54", "IntegrationStats", "integrate"]


class StepSizeUnderflow(RuntimeError):
    def __init__(self, t, h):
        super().__init__(f"step size {h:.3e} underflowed at t = {t!r}")
        self.t = t
        self.h = h


class DP54:
    name = "dormand-prince 5(4)"
    order = 5
    c = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    a = [
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
    b = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
    b_hat = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
    e = b - b_hat


@dataclass
class IntegrationStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    method: str = DP54.name
    step_sizes: list = field(default_factory=list)

    def to_dict(self):
        h = self.step_sizes
        return {
            "method": self.method,
            "accepted_steps": self.accepted,
            "rejected_steps": self.rejected,
            "rhs_evaluations": self.rhs_evals,
            "min_step": float(min(h)) if h else None,
            "max_step": float(max(h)) if h else None,
        }


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, rtol, atol):
    # Hairer, Norsett & Wanner starting-step heuristic
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / DP54.order)
    return min(100 * h0, h1)


def integrate(f, y0, t_out, rtol=1e-9, atol=1e-9, h0=None, on_accept=None, h_min=1e-14, max_steps=10_000_000):
    """Integrate ``y' = f(t, y)`` and sample the solution at ``t_out``.

    Steps are shortened to land exactly on each output time.  ``on_accept``
    is called as ``on_accept(t, y)`` after every accepted step.

    Returns
    -------
    samples : list of arrays, one per entry of ``t_out``
    stats : IntegrationStats
    """
    t_out = np.asarray(t_out, dtype=float)
    if np.any(np.diff(t_out) < 0):
        raise ValueError("output times must be non-decreasing")
    t = float(t_out[0])
    y = np.array(y0, dtype=float, copy=True)
    stats = IntegrationStats()
    samples = [y.copy()]
    if len(t_out) == 1 or t_out[-1] == t:
        return samples + [y.copy() for _ in t_out[1:]], stats

    tab = DP54
    k = [None] * 7
    k[0] = f(t, y)
    stats.rhs_evals += 1
    h = h0 if h0 is not None else _initial_step(f, t, y, k[0], rtol, atol)
    if h0 is None:
        stats.rhs_evals += 1
    beta, alpha = 0.04, 0.2 - 0.75 * 0.04  # PI gains for a 5th-order pair
    err_prev = 1e-4
    safety, fac_min, fac_max = 0.9, 0.2, 10.0

    for target in t_out[1:]:
        while t < target:
            if stats.accepted + stats.rejected >= max_steps:
                raise RuntimeError(f"step budget exhausted at t = {t!r}")
            landing = h >= target - t
            step = target - t if landing else h
            if step < h_min * max(1.0, abs(t)):
                raise StepSizeUnderflow(t, step)
            for i in range(1, 7):
                yi = y + step * sum(aij * kj for aij, kj in zip(tab.a[i], k) if aij != 0.0)
                k[i] = f(t + tab.c[i] * step, yi)
            stats.rhs_evals += 6
            y_new = yi  # last stage is the 5th-order solution (FSAL)
            err = step * sum(ei * ki for ei, ki in zip(tab.e, k) if ei != 0.0)
            en = _error_norm(err, y, y_new, rtol, atol)
            if not np.isfinite(en):
                stats.rejected += 1
                h = step * fac_min
                continue
            if en <= 1.0:
                t = target if landing else t + step
                y = y_new
                k[0] = k[6]
                stats.accepted += 1
                stats.step_sizes.append(step)
                if on_accept is not None:
                    on_accept(t, y)
                fac = safety * en ** (-alpha) * err_prev**beta if en > 0 else fac_max
                err_prev = max(en, 1e-4)
                h_next = step * min(fac_max, max(fac_min, fac))
                # a step clipped to hit an output time says little about the next one
                h = max(h_next, h) if landing else h_next
            else:
                stats.rejected += 1
                h = step * max(fac_min, safety * en ** (-1.0 / tab.order))
        samples.append(y.copy())
    return samples, stats

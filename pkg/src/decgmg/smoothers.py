"""Relaxation sweeps on CSR matrices.

Gauss-Seidel runs in vertex-index order (forward) and optionally back again
(symmetric); kernels are compiled with numba and are strictly sequential,
so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit

__all__ = ["SMOOTHERS", "SmootherError", "smooth", "smooth_inplace"]

SMOOTHERS = ("gauss_seidel", "symmetric_gauss_seidel", "weighted_jacobi", "cg_smoother")


class SmootherError(ValueError):
    pass


@njit(cache=True)
def _gs_sweep(indptr, indices, data, x, b, first, last, step):
    i = first
    while i != last:
        diag = 0.0
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag += data[k]
            else:
                s -= data[k] * x[j]
        x[i] = s / diag
        i += step


def _as_csr(A):
    if not sp.isspmatrix_csr(A):
        A = sp.csr_matrix(A)
    if not A.has_sorted_indices:
        A = A.sorted_indices()
    return A


def _check_diagonal(A):
    d = A.diagonal()
    if np.any(d == 0):
        raise SmootherError(f"zero diagonal entry at row {int(np.flatnonzero(d == 0)[0])}")
    return d


def _cg_fixed(A, x, b, iters):
    r = b - A @ x
    p = r.copy()
    rr = r @ r
    for _ in range(iters):
        Ap = A @ p
        pAp = p @ Ap
        if pAp == 0.0 or rr == 0.0:
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        p *= rr_new / rr
        p += r
        rr = rr_new
    return x


def smooth_inplace(A, x, b, method="gauss_seidel", iters=1, omega=2.0 / 3.0, diag=None):
    """Apply ``iters`` sweeps of ``method`` to ``x`` in place.

    ``A`` must be CSR with sorted indices for the Gauss-Seidel kernels.
    ``cg_smoother`` runs exactly ``iters`` plain CG steps (no tolerance exit)
    and is only meaningful for symmetric positive (semi)definite ``A``.
    """
    n = A.shape[0]
    if method == "gauss_seidel":
        for _ in range(iters):
            _gs_sweep(A.indptr, A.indices, A.data, x, b, 0, n, 1)
    elif method == "symmetric_gauss_seidel":
        for _ in range(iters):
            _gs_sweep(A.indptr, A.indices, A.data, x, b, 0, n, 1)
            _gs_sweep(A.indptr, A.indices, A.data, x, b, n - 1, -1, -1)
    elif method == "weighted_jacobi":
        if diag is None:
            diag = A.diagonal()
        for _ in range(iters):
            x += omega * (b - A @ x) / diag
    elif method == "cg_smoother":
        _cg_fixed(A, x, b, iters)
    else:
        raise SmootherError(f"unknown smoother {method!r}")
    return x


def smooth(A, x, b, method="gauss_seidel", iters=1, omega=2.0 / 3.0):
    """Return a smoothed copy of ``x`` for the system ``A x = b``.

    Examples
    --------
    >>> import numpy as np, scipy.sparse as sp
    >>> A = sp.csr_matrix([[4.0]])
    >>> smooth(A, np.zeros(1), np.array([2.0]))
    array([0.5])
    """
    if A.shape[0] != A.shape[1]:
        raise SmootherError("smoother needs a square matrix")
    A = _as_csr(A)
    x = np.array(x, dtype=float, copy=True)
    b = np.asarray(b, dtype=float)
    if x.shape != (A.shape[0],) or b.shape != x.shape:
        raise SmootherError("x and b must conform to A")
    diag = _check_diagonal(A)
    return smooth_inplace(A, x, b, method, iters, omega, diag)

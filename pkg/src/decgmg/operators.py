"""Sparse DEC operators on an embedded complex and its circumcentric dual.

Matrices are returned as ``scipy.sparse.csc_matrix`` with sorted indices.
Conventions: ``d0[e, tgt] = +1``, ``d0[e, src] = -1``; the dual derivative
is ``-d0.T``; ``star1 = |*e| / |e|``; the 0-form Laplacian is
``star0^-1 (-d0.T) star1 d0``, which gives ``+2`` on ``x**2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import DualGeometry, EmbeddedComplex2D, MeshError, build_dual

__all__ = [
    "Cochain",
    "CochainError",
    "d0",
    "d1",
    "dual_d1",
    "hodge_star_0",
    "hodge_star_0_inv",
    "hodge_star_1",
    "laplacian_0",
    "codifferential_1",
    "wedge_01",
    "flat",
    "lie_derivative_0",
    "DECOperators",
    "export_matrix_market",
]


class CochainError(ValueError):
    pass


_SIZES = {
    (0, True): "nv",
    (1, True): "ne",
    (2, True): "nt",
    (0, False): "nt",
    (1, False): "ne",
    (2, False): "nv",
}


@dataclass(frozen=True, eq=False)
class Cochain:
    """Values on the k-simplices (primal) or dual k-cells of ``complex``."""

    values: np.ndarray
    degree: int
    complex: EmbeddedComplex2D
    primal: bool = True

    def __post_init__(self):
        if (self.degree, self.primal) not in _SIZES:
            raise CochainError(f"unsupported degree {self.degree}")
        vals = np.asarray(self.values, dtype=float)
        n = getattr(self.complex, _SIZES[self.degree, self.primal])
        if vals.shape != (n,):
            kind = "primal" if self.primal else "dual"
            raise CochainError(f"{kind} {self.degree}-cochain needs {n} values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def check(self, degree, complex=None, primal=True):
        if self.degree != degree or self.primal != primal:
            kind = "primal" if primal else "dual"
            raise CochainError(f"expected a {kind} {degree}-cochain, got degree {self.degree}")
        if complex is not None and self.complex is not complex:
            raise CochainError("cochain lives on a different complex")
        return self


def _csc(A):
    A = sp.csc_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def d0(c: EmbeddedComplex2D) -> sp.csc_matrix:
    """Exterior derivative on primal 0-forms, ``nE x nV``."""
    ne = c.ne
    rows = np.repeat(np.arange(ne), 2)
    cols = c.edges.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    return _csc(sp.coo_matrix((vals, (rows, cols)), shape=(ne, c.nv)))


def d1(c: EmbeddedComplex2D) -> sp.csc_matrix:
    """Exterior derivative on primal 1-forms, ``nT x nE``.

    The boundary of the triangle ``(v0, v1, v2)`` is ``e0 - e1 + e2``; the
    triangle's orientation sign multiplies the whole row.
    """
    nt = c.nt
    o = c.tri_orientation.astype(float)
    rows = np.repeat(np.arange(nt), 3)
    cols = c.triangles.ravel()
    vals = (o[:, None] * np.array([1.0, -1.0, 1.0])).ravel()
    return _csc(sp.coo_matrix((vals, (rows, cols)), shape=(nt, c.ne)))


def dual_d1(c: EmbeddedComplex2D) -> sp.csc_matrix:
    """Dual derivative taking dual 1-forms to dual 2-forms, ``-d0.T``."""
    return _csc(-d0(c).T)


def hodge_star_1(dual: DualGeometry) -> sp.csc_matrix:
    """Diagonal ``|*e| / |e|``."""
    if np.any(dual.primal_edge_length <= 0):
        raise MeshError("zero primal edge length")
    return _csc(sp.diags(dual.dual_edge_length / dual.primal_edge_length))


def _dual_areas(dual, clamp):
    area = np.asarray(dual.dual_cell_area, dtype=float)
    bad = area <= 0
    if np.any(bad):
        if not clamp:
            raise MeshError(
                f"non-well-centered dual cell at vertices {np.flatnonzero(bad)[:10].tolist()}"
            )
        area = np.where(bad, 1e-14 * dual.tri_area.mean(), area)
    return area


def hodge_star_0(dual: DualGeometry, clamp=False) -> sp.csc_matrix:
    return _csc(sp.diags(_dual_areas(dual, clamp)))


def hodge_star_0_inv(dual: DualGeometry, clamp=False) -> sp.csc_matrix:
    """Diagonal ``1 / |*v|``; nonpositive dual areas raise unless ``clamp``."""
    return _csc(sp.diags(1.0 / _dual_areas(dual, clamp)))


def _stiffness(c, weights):
    """``-d0.T diag(weights) d0`` with the full graph-Laplacian pattern kept."""
    s, t = c.edges[:, 0], c.edges[:, 1]
    diag = -np.bincount(c.edges.ravel(), weights=np.repeat(weights, 2), minlength=c.nv)
    rows = np.concatenate([s, t, np.arange(c.nv)])
    cols = np.concatenate([t, s, np.arange(c.nv)])
    vals = np.concatenate([weights, weights, diag])
    return _csc(sp.coo_matrix((vals, (rows, cols)), shape=(c.nv, c.nv)))


def laplacian_0(dual: DualGeometry, clamp=False) -> sp.csc_matrix:
    """``star0^-1 (-d0.T) star1 d0``; row ``i`` stores ``1 + deg(i)`` entries."""
    c = dual.complex
    w = dual.dual_edge_length / dual.primal_edge_length
    A = _stiffness(c, w)
    return _row_scaled(A, 1.0 / _dual_areas(dual, clamp))


def _row_scaled(A, scale):
    # diag(scale) @ A without dropping stored zeros
    A = sp.csr_matrix(A, copy=True)
    A.data *= np.repeat(scale, np.diff(A.indptr))
    return _csc(A)


def codifferential_1(alpha: Cochain, dual: DualGeometry) -> Cochain:
    """``star0^-1 (-d0.T) star1 alpha``, so that ``codifferential_1(d0 f) == laplacian_0 f``."""
    c = dual.complex
    alpha.check(1, c)
    w = dual.dual_edge_length / dual.primal_edge_length
    flux = w * alpha.values
    out = np.bincount(c.edges[:, 1], weights=-flux, minlength=c.nv)
    out += np.bincount(c.edges[:, 0], weights=flux, minlength=c.nv)
    return Cochain(out / _dual_areas(dual, False), 0, c)


def wedge_01(f: Cochain, alpha: Cochain) -> Cochain:
    """Primal 0-form times primal 1-form, averaging ``f`` over each edge."""
    c = alpha.complex
    f.check(0, c)
    alpha.check(1, c)
    fv = f.values
    avg = 0.5 * (fv[c.edges[:, 0]] + fv[c.edges[:, 1]])
    return Cochain(avg * alpha.values, 1, c)


def flat(V, c: EmbeddedComplex2D) -> Cochain:
    """Midpoint-rule flat of a vertex vector field (or one constant vector).

    Each edge gets the average of its endpoint vectors dotted with the edge
    displacement.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = np.broadcast_to(np.pad(V, (0, 3 - V.size)), (c.nv, 3))
    elif V.shape[1] == 2:
        V = np.column_stack([V, np.zeros(len(V))])
    s, t = c.edges[:, 0], c.edges[:, 1]
    disp = c.positions[t] - c.positions[s]
    vals = np.einsum("ij,ij->i", 0.5 * (V[s] + V[t]), disp)
    return Cochain(vals, 1, c)


def lie_derivative_0(q: Cochain, T: Cochain, dual: DualGeometry) -> Cochain:
    """Lie derivative of the 0-form ``T`` along the flux 1-form ``q``.

    For a 0-form this is the interior product ``i_q dT``, evaluated at each
    vertex as the dual-cell average of the pairing of ``q`` with
    ``star1 d0 T`` over the incident edges, each edge split evenly between
    its endpoints::

        (L_q T)(v) = 1/|*v| * sum_{e > v} 1/2 * q_e * star1_e * (d0 T)_e
    """
    c = dual.complex
    q.check(1, c)
    T.check(0, c)
    return Cochain(DECOperators(c, dual).lie(q.values, T.values), 0, c)


class DECOperators:
    """Assembled operators for one complex, with array-level fast paths."""

    def __init__(self, c: EmbeddedComplex2D, dual: DualGeometry | None = None, clamp=False):
        self.complex = c
        self.dual = dual if dual is not None else build_dual(c)
        self.clamp = clamp
        self.star1_diag = self.dual.dual_edge_length / self.dual.primal_edge_length
        self.area = _dual_areas(self.dual, clamp)

    @cached_property
    def d0(self):
        return d0(self.complex)

    @cached_property
    def d1(self):
        return d1(self.complex)

    @cached_property
    def star1(self):
        return hodge_star_1(self.dual)

    @cached_property
    def star0(self):
        return _csc(sp.diags(self.area))

    @cached_property
    def star0_inv(self):
        return _csc(sp.diags(1.0 / self.area))

    @cached_property
    def stiffness(self):
        """Symmetric ``-d0.T star1 d0`` (negative semidefinite)."""
        return _stiffness(self.complex, self.star1_diag)

    @cached_property
    def laplacian(self):
        return _row_scaled(self.stiffness, 1.0 / self.area)

    @cached_property
    def _abs_d0_t(self):
        return sp.csr_matrix(abs(self.d0).T)

    def grad(self, f):
        return self.d0 @ f

    def codiff(self, alpha):
        return (-(self.d0.T @ (self.star1_diag * alpha))) / self.area

    def wedge01(self, f, alpha):
        e = self.complex.edges
        return 0.5 * (f[e[:, 0]] + f[e[:, 1]]) * alpha

    def flat(self, V):
        return flat(V, self.complex).values

    def lie(self, q, T):
        w = q * self.star1_diag * (self.d0 @ T)
        return 0.5 * (self._abs_d0_t @ w) / self.area


def export_matrix_market(A, path, comment=""):
    """Write a sparse operator in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)

"""Geometric maps between embedded complexes, encoded by global barycentric coordinates.

A map ``f: X -> Y`` is stored as its matrix ``M(f)`` (``nV(Y) x nV(X)``,
CSC): column ``j`` holds the global barycentric coordinates of ``f(x_j)``.
Fields are column vectors throughout, so interpolation is ``M(f).T @ u``
and restriction is the row-normalized ``M(f)`` applied to a fine field.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import EmbeddedComplex2D, MeshDiagnostics
from .operators import Cochain

__all__ = [
    "MapError",
    "GeometricMap",
    "validate_map",
    "identity_map",
    "matrix_of",
    "compose",
    "interpolate",
    "restrict",
    "restriction_matrix",
    "save_map",
    "load_map_matrix",
]

SNAP_TOL = 1e-12


class MapError(ValueError):
    pass


def _snap(M):
    """Zero out near-zero coordinates and renormalize columns to sum to one."""
    M = sp.csc_matrix(M, dtype=float, copy=True)
    M.data[np.abs(M.data) <= SNAP_TOL] = 0.0
    M.eliminate_zeros()
    sums = np.asarray(M.sum(axis=0)).ravel()
    near = np.abs(sums - 1.0) <= 10 * SNAP_TOL
    scale = np.ones_like(sums)
    scale[near] = 1.0 / sums[near]
    M = M @ sp.diags(scale)
    M = sp.csc_matrix(M)
    M.sort_indices()
    return M


class GeometricMap:
    """Simplexwise-affine map ``domain -> codomain`` given on vertices.

    Parameters
    ----------
    domain, codomain : EmbeddedComplex2D
    matrix : sparse matrix, shape ``(codomain.nv, domain.nv)``
        Column ``j`` is the barycentric column of domain vertex ``j``.
    """

    def __init__(self, domain: EmbeddedComplex2D, codomain: EmbeddedComplex2D, matrix):
        M = _snap(matrix)
        if M.shape != (codomain.nv, domain.nv):
            raise MapError(f"map matrix has shape {M.shape}, expected {(codomain.nv, domain.nv)}")
        self.domain = domain
        self.codomain = codomain
        self._matrix = M
        self._matrix.data.setflags(write=False)
        self._diagnostics = None

    @classmethod
    def from_columns(cls, domain, codomain, rows, cols, vals):
        M = sp.coo_matrix((vals, (rows, cols)), shape=(codomain.nv, domain.nv))
        return cls(domain, codomain, M)

    @property
    def matrix(self) -> sp.csc_matrix:
        return self._matrix

    def column(self, j):
        M = self._matrix
        lo, hi = M.indptr[j], M.indptr[j + 1]
        return dict(zip(M.indices[lo:hi].tolist(), M.data[lo:hi].tolist()))

    @property
    def diagnostics(self) -> MeshDiagnostics:
        if self._diagnostics is None:
            self._diagnostics = validate_map(self)
        return self._diagnostics

    def __repr__(self):
        return f"GeometricMap({self.domain.nv} -> {self.codomain.nv} vertices)"


def _simplex_keys(c: EmbeddedComplex2D):
    n = c.nv
    e = np.sort(c.edges, axis=1)
    t = np.sort(c.tri_vertices, axis=1)
    return (
        np.unique(e[:, 0] * n + e[:, 1]),
        np.unique((t[:, 0] * n + t[:, 1]) * n + t[:, 2]),
    )


def _padded_supports(M, width):
    """Rows of each column's support, left-justified in an ``(ncols, width)`` array, -1 padded."""
    counts = np.diff(M.indptr)
    out = np.full((M.shape[1], width), -1, dtype=np.int64)
    if M.nnz:
        col = np.repeat(np.arange(M.shape[1]), counts)
        slot = np.arange(M.nnz) - np.repeat(M.indptr[:-1], counts)
        keep = slot < width
        out[col[keep], slot[keep]] = M.indices[keep]
    return out, counts


def _union_rows(sets):
    """Per-row distinct values (ignoring -1), sorted with -1 padding last, and their counts."""
    s = np.sort(sets, axis=1)
    dup = np.zeros_like(s, dtype=bool)
    dup[:, 1:] = s[:, 1:] == s[:, :-1]
    s = np.where(dup | (s < 0), np.iinfo(np.int64).max, s)
    s = np.sort(s, axis=1)
    counts = (s != np.iinfo(np.int64).max).sum(axis=1)
    s = np.where(s == np.iinfo(np.int64).max, -1, s)
    return s, counts


def _is_simplex(vsets, counts, n, ekeys, tkeys):
    """Whether each sorted vertex set (count <= 3) is a simplex of the codomain."""
    ok = counts == 1
    two = counts == 2
    if np.any(two):
        k = vsets[two, 0] * n + vsets[two, 1]
        ok[two] = np.isin(k, ekeys)
    three = counts == 3
    if np.any(three):
        k = (vsets[three, 0] * n + vsets[three, 1]) * n + vsets[three, 2]
        ok[three] = np.isin(k, tkeys)
    return ok


def validate_map(f: GeometricMap) -> MeshDiagnostics:
    """Check the barycentric and simplex-containment conditions of a map.

    Containment is checked combinatorially: the union of the supports of a
    domain simplex's vertices must be the vertex set of a codomain simplex.
    """
    diag = MeshDiagnostics()
    M = f.matrix
    Y = f.codomain
    n = Y.nv
    owner = np.repeat(np.arange(M.shape[1]), np.diff(M.indptr))
    diag.add("negative coordinate", np.unique(owner[M.data < 0]))
    sums = np.asarray(M.sum(axis=0)).ravel()
    diag.add("column sum != 1", np.flatnonzero(np.abs(sums - 1.0) > 1e-12))
    sup, counts = _padded_supports(M, 3)
    diag.add("more than 3 nonzeros", np.flatnonzero(counts > 3))
    diag.add("empty column", np.flatnonzero(counts == 0))

    ekeys, tkeys = _simplex_keys(Y)
    sorted_sup = np.sort(np.where(sup < 0, np.iinfo(np.int64).max, sup), axis=1)
    sorted_sup = np.where(sorted_sup == np.iinfo(np.int64).max, -1, sorted_sup)
    good = (counts >= 1) & (counts <= 3)
    simplex_ok = np.zeros(len(counts), dtype=bool)
    simplex_ok[good] = _is_simplex(sorted_sup[good], counts[good], n, ekeys, tkeys)
    diag.add("support not a simplex", np.flatnonzero(good & ~simplex_ok))

    X = f.domain
    for name, verts in (("edge", X.edges), ("triangle", X.tri_vertices)):
        if not len(verts):
            continue
        u, cnt = _union_rows(np.concatenate([sup[verts[:, k]] for k in range(verts.shape[1])], axis=1))
        inside = np.zeros(len(verts), dtype=bool)
        small = cnt <= 3
        inside[small] = _is_simplex(u[small, :3], cnt[small], n, ekeys, tkeys)
        diag.add(f"{name} image not contained in a simplex", np.flatnonzero(~inside))
    return diag


def identity_map(c: EmbeddedComplex2D) -> GeometricMap:
    return GeometricMap(c, c, sp.identity(c.nv, format="csc"))


def matrix_of(f: GeometricMap) -> sp.csc_matrix:
    """``M(f)``, the ``nV(codomain) x nV(domain)`` column-stochastic matrix."""
    if not f.diagnostics.is_valid:
        raise MapError(f"invalid geometric map: {f.diagnostics}")
    return f.matrix


def compose(g: GeometricMap, f: GeometricMap) -> GeometricMap:
    """``g o f``, with ``M(g o f) = M(g) M(f)``."""
    if f.codomain is not g.domain:
        raise MapError("maps are not composable: codomain(f) is not domain(g)")
    return GeometricMap(f.domain, g.codomain, g.matrix @ f.matrix)


def _values(field, c, what):
    if isinstance(field, Cochain):
        field.check(0, c)
        return field.values
    arr = np.asarray(field, dtype=float)
    if arr.shape[0] != c.nv:
        raise MapError(f"{what} field has {arr.shape[0]} values, expected {c.nv}")
    return arr


def interpolate(f: GeometricMap, field):
    """Pull a codomain vertex field back to the domain: ``M(f).T @ u``.

    Returns a :class:`Cochain` when given one, otherwise an array.
    """
    u = f.matrix.T @ _values(field, f.codomain, "codomain")
    if isinstance(field, Cochain):
        return Cochain(u, 0, f.domain)
    return u


def restriction_matrix(f: GeometricMap) -> sp.csc_matrix:
    """Row-normalized ``M(f)``, acting on domain (fine) fields as column vectors."""
    M = sp.csr_matrix(f.matrix)
    sums = np.asarray(M.sum(axis=1)).ravel()
    empty = np.flatnonzero(sums == 0)
    if len(empty):
        raise MapError(f"codomain vertex with no fine neighbor: {empty[:10].tolist()}")
    R = sp.csc_matrix(sp.diags(1.0 / sums) @ M)
    R.sort_indices()
    return R


def restrict(f: GeometricMap, field):
    """Push a domain field forward to the codomain by full weighting."""
    u = restriction_matrix(f) @ _values(field, f.domain, "domain")
    if isinstance(field, Cochain):
        return Cochain(u, 0, f.codomain)
    return u


def save_map(f: GeometricMap, path):
    """Write ``M(f)`` as Matrix Market plus a ``.json`` header naming both meshes."""
    path = Path(path)
    scipy.io.mmwrite(str(path), sp.coo_matrix(f.matrix), comment="geometric map matrix")
    header = {
        "domain_digest": f.domain.digest,
        "codomain_digest": f.codomain.digest,
        "domain_vertices": f.domain.nv,
        "codomain_vertices": f.codomain.nv,
        "matrix": path.name,
    }
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=2)


def load_map_matrix(path) -> sp.csc_matrix:
    return sp.csc_matrix(scipy.io.mmread(str(path)))

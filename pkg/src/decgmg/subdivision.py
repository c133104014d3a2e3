"""Uniform binary (1 -> 4) and cubic (1 -> 9) triangle subdivision.

Both schemes split every triangle along the order-``n`` barycentric lattice
(``n = 2`` or ``3``) and return the fine complex together with the geometric
map that sends each fine vertex to its location in the coarse complex.

Fine vertices are numbered coarse vertices first, then edge points by parent
edge (in order of increasing parameter from the edge's source), then face
points by parent triangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .maps import GeometricMap
from .mesh import EmbeddedComplex2D

__all__ = [
    "SubdivisionResult",
    "binary_subdivide",
    "cubic_subdivide",
    "subdivide",
    "subdivision_tower",
    "SCHEMES",
]


@dataclass(frozen=True, eq=False)
class SubdivisionResult:
    """A fine complex, its map onto the coarse one and per-vertex provenance.

    ``provenance[i]`` is ``("vertex", v)``, ``("edge", e, t)`` with ``t`` the
    parameter measured from the edge source, or ``("face", tri, (a, b, c))``
    with barycentric weights on the sorted triangle vertices.
    """

    fine: EmbeddedComplex2D
    map: GeometricMap
    provenance: tuple

    @property
    def coarse(self) -> EmbeddedComplex2D:
        return self.map.codomain


def _lattice(n):
    """Lattice points ``(a1, a2)`` with ``a1 + a2 <= n`` and the ``n**2`` sub-triangles.

    Sub-triangles are listed counterclockwise in the frame where ``a1`` and
    ``a2`` are the coordinates along ``p0 -> p1`` and ``p0 -> p2``.
    """
    pts = [(i, j) for j in range(n + 1) for i in range(n + 1 - j)]
    index = {p: k for k, p in enumerate(pts)}
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
            if i + j <= n - 2:
                tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    return pts, tris


def _lattice_subdivide(c: EmbeddedComplex2D, n: int) -> SubdivisionResult:
    nv, ne, nt = c.nv, c.ne, c.nt
    nf = (n - 1) * (n - 2) // 2
    pts, sub_tris = _lattice(n)
    cyc = c.oriented_triangles()
    pair_edge = {
        (a, b): c.edge_lookup(cyc[:, a], cyc[:, b]) for a, b in ((0, 1), (0, 2), (1, 2))
    }

    def edge_point(a, b, s):
        # fine index of the point s/n of the way from cycle vertex a to b
        e = pair_edge[a, b]
        from_src = c.edges[e, 0] == cyc[:, a]
        slot = np.where(from_src, s - 1, n - s - 1)
        return nv + (n - 1) * e + slot

    lattice_ids = np.empty((nt, len(pts)), dtype=np.int64)
    interior = []
    for k, (a1, a2) in enumerate(pts):
        bary = (n - a1 - a2, a1, a2)
        nz = [i for i in range(3) if bary[i] > 0]
        if len(nz) == 1:
            lattice_ids[:, k] = cyc[:, nz[0]]
        elif len(nz) == 2:
            a, b = nz
            lattice_ids[:, k] = edge_point(a, b, bary[b])
        else:
            lattice_ids[:, k] = nv + (n - 1) * ne + np.arange(nt) * nf + len(interior)
            interior.append((k, bary))

    # children of one parent stay contiguous and inherit its orientation
    fine_tris = lattice_ids[:, np.array(sub_tris)].reshape(-1, 3)

    rows = [np.arange(nv)]
    cols = [np.arange(nv)]
    vals = [np.ones(nv)]
    src, tgt = c.edges[:, 0], c.edges[:, 1]
    for s in range(1, n):
        ids = nv + (n - 1) * np.arange(ne) + (s - 1)
        rows += [src, tgt]
        cols += [ids, ids]
        vals += [np.full(ne, 1 - s / n), np.full(ne, s / n)]
    for k, bary in interior:
        for w, vert in zip(bary, cyc.T):
            rows.append(vert)
            cols.append(lattice_ids[:, k])
            vals.append(np.full(nt, w / n))

    n_fine = nv + (n - 1) * ne + nf * nt
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, n_fine)
    )
    M = sp.csc_matrix(M)
    fine = EmbeddedComplex2D.from_triangles(M.T @ c.positions, fine_tris)

    prov = [("vertex", v) for v in range(nv)]
    prov += [("edge", e, s / n) for e in range(ne) for s in range(1, n)]
    if nf:
        tv = c.tri_vertices
        for t in range(nt):
            where = {v: i for i, v in enumerate(cyc[t].tolist())}
            for _, bary in interior:
                prov.append(("face", t, tuple(bary[where[v]] / n for v in tv[t].tolist())))
    return SubdivisionResult(fine, GeometricMap(fine, c, M), tuple(prov))


def binary_subdivide(c: EmbeddedComplex2D) -> SubdivisionResult:
    """Split each triangle into 4 through its edge midpoints."""
    return _lattice_subdivide(c, 2)


def cubic_subdivide(c: EmbeddedComplex2D) -> SubdivisionResult:
    """Split each triangle into 9 through its edge trisection points and centroid."""
    return _lattice_subdivide(c, 3)


SCHEMES = {"binary": binary_subdivide, "cubic": cubic_subdivide}


def subdivide(c: EmbeddedComplex2D, scheme: str = "binary") -> SubdivisionResult:
    try:
        return SCHEMES[scheme](c)
    except KeyError:
        raise ValueError(f"unknown subdivision scheme {scheme!r}") from None


def subdivision_tower(c: EmbeddedComplex2D, scheme: str = "binary", levels: int = 1) -> list:
    """Repeatedly subdivide ``c``; results are returned finest first.

    Entry ``k`` maps its fine complex onto the complex of entry ``k + 1``;
    the last entry maps onto ``c`` itself.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    results = []
    cur = c
    for _ in range(levels):
        res = subdivide(cur, scheme)
        results.append(res)
        cur = res.fine
    return results[::-1]

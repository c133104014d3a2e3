"""Embedded 2-D simplicial complexes and their circumcentric duals.

A complex stores vertex positions in 3-D, edges as ordered vertex pairs and
triangles as ordered edge triples.  Triangle ``t`` with sorted vertices
``v0 < v1 < v2`` stores its faces as ``e0 = (v1, v2)``, ``e1 = (v0, v2)`` and
``e2 = (v0, v1)``, the usual delta-set face ordering, and carries a separate
orientation sign saying whether the oriented cycle is ``(v0, v1, v2)`` (+1)
or ``(v0, v2, v1)`` (-1).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "DegenerateTriangleError",
    "ObjParseError",
    "EmbeddedComplex2D",
    "DualGeometry",
    "Violation",
    "MeshDiagnostics",
    "validate_complex",
    "circumcenter",
    "build_dual",
    "make_triangulated_grid",
    "make_equilateral_grid",
    "read_obj",
    "write_obj",
    "dump_json",
    "load_json",
]


class MeshError(ValueError):
    """Raised for malformed or geometrically unusable meshes."""


class DegenerateTriangleError(MeshError):
    pass


class ObjParseError(MeshError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"{message} at line {lineno}"
        super().__init__(message)
        self.lineno = lineno


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EmbeddedComplex2D:
    """A 2-dimensional simplicial complex embedded in R^3.

    Parameters
    ----------
    positions : (nV, 3) array_like
        Vertex coordinates.  2-D input is padded with z = 0.
    edges : (nE, 2) array_like of int
        ``(src, tgt)`` vertex indices per edge.
    triangles : (nT, 3) array_like of int
        ``(e0, e1, e2)`` edge indices per triangle.
    tri_orientation : (nT,) array_like of int, optional
        +1 or -1 per triangle, defaults to all +1.

    Instances are immutable; two complexes compare equal only if they are the
    same object, which is what operators and maps use as "home" identity.
    """

    positions: np.ndarray
    edges: np.ndarray
    triangles: np.ndarray
    tri_orientation: np.ndarray = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 2 and pos.shape[1] == 2:
            pos = np.column_stack([pos, np.zeros(len(pos))])
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        orient = self.tri_orientation
        if orient is None:
            orient = np.ones(len(tris), dtype=np.int8)
        object.__setattr__(self, "positions", _readonly(pos, float))
        object.__setattr__(self, "edges", _readonly(edges, np.int64))
        object.__setattr__(self, "triangles", _readonly(tris, np.int64))
        object.__setattr__(self, "tri_orientation", _readonly(orient, np.int8))

    @property
    def nv(self) -> int:
        return len(self.positions)

    @property
    def ne(self) -> int:
        return len(self.edges)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    @property
    def src(self):
        return self.edges[:, 0]

    @property
    def tgt(self):
        return self.edges[:, 1]

    @cached_property
    def tri_vertices(self) -> np.ndarray:
        """(nT, 3) vertices ``(v0, v1, v2)`` read off the face maps."""
        e = self.edges
        t = self.triangles
        out = np.column_stack([e[t[:, 1], 0], e[t[:, 0], 0], e[t[:, 0], 1]])
        out.setflags(write=False)
        return out

    def oriented_triangles(self) -> np.ndarray:
        """Vertex cycles following each triangle's orientation."""
        tv = self.tri_vertices
        flip = self.tri_orientation < 0
        out = tv.copy()
        out[flip, 1], out[flip, 2] = tv[flip, 2], tv[flip, 1]
        return out

    def euler_characteristic(self) -> int:
        return self.nv - self.ne + self.nt

    def vertex_degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.nv)

    @cached_property
    def digest(self) -> str:
        """Content hash of geometry and connectivity."""
        h = hashlib.sha256()
        for a in (self.positions, self.edges, self.triangles, self.tri_orientation):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def bounding_box(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def edge_lookup(self, u, v) -> np.ndarray:
        """Indices of the edges joining ``u`` and ``v`` (either direction), -1 if absent."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        keys, order = self._edge_keys
        q = np.minimum(u, v) * self.nv + np.maximum(u, v)
        if len(keys) == 0:
            return np.full(q.shape, -1, dtype=np.int64)
        pos = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
        return np.where(keys[pos] == q, order[pos], -1)

    @cached_property
    def _edge_keys(self):
        lo = self.edges.min(axis=1)
        hi = self.edges.max(axis=1)
        keys = lo * self.nv + hi
        order = np.argsort(keys, kind="stable")
        return keys[order], order

    @classmethod
    def from_triangles(cls, positions, triangles) -> "EmbeddedComplex2D":
        """Build a complex from oriented vertex triples.

        Edges are the distinct unordered vertex pairs, oriented low-to-high
        and sorted lexicographically.  Orientation signs record whether each
        input cycle is an even permutation of its sorted vertices.
        """
        positions = np.asarray(positions, dtype=float)
        tri = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        nv = len(positions)
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        # product is negative exactly for cyclic rotations of a sorted triple
        parity = (b - a) * (c - b) * (a - c)
        orient = np.where(parity < 0, 1, -1).astype(np.int8)
        s = np.sort(tri, axis=1)
        pairs = np.concatenate([s[:, [1, 2]], s[:, [0, 2]], s[:, [0, 1]]])
        keys = pairs[:, 0] * nv + pairs[:, 1]
        ukeys, inverse = np.unique(keys, return_inverse=True)
        edges = np.column_stack([ukeys // nv, ukeys % nv])
        nt = len(tri)
        tri_edges = inverse.reshape(3, nt).T
        return cls(positions, edges, tri_edges, orient)

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "edges": self.edges.tolist(),
            "triangles": self.triangles.tolist(),
            "tri_orientation": self.tri_orientation.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "EmbeddedComplex2D":
        return cls(d["positions"], d["edges"], d["triangles"], d.get("tri_orientation"))


@dataclass(frozen=True)
class Violation:
    rule: str
    ids: tuple = ()

    def __str__(self):
        shown = ", ".join(map(str, self.ids[:10]))
        more = f" (+{len(self.ids) - 10} more)" if len(self.ids) > 10 else ""
        return f"{self.rule}: [{shown}]{more}"


@dataclass
class MeshDiagnostics:
    violations: list = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def rules(self) -> set:
        return {v.rule for v in self.violations}

    def add(self, rule, ids):
        ids = tuple(int(i) for i in np.atleast_1d(ids))
        if ids:
            self.violations.append(Violation(rule, ids))

    def raise_if_invalid(self):
        if not self.is_valid:
            raise MeshError("; ".join(map(str, self.violations)))

    def __str__(self):
        if self.is_valid:
            return "valid"
        return "\n".join(map(str, self.violations))


def validate_complex(c: EmbeddedComplex2D) -> MeshDiagnostics:
    """Check every structural invariant of an embedded complex.

    Never raises; all problems are collected in the returned diagnostics.
    """
    diag = MeshDiagnostics()
    pos, edges, tris = c.positions, c.edges, c.triangles
    if pos.ndim != 2 or pos.shape[1] != 3:
        diag.add("positions shape", [0])
    if len(c.tri_orientation) != len(tris):
        diag.add("orientation length", [len(c.tri_orientation)])
        return diag
    diag.add("bad orientation", np.flatnonzero(np.abs(c.tri_orientation) != 1))
    if not np.all(np.isfinite(pos)):
        diag.add("non-finite position", np.flatnonzero(~np.isfinite(pos).all(axis=1)))

    nv, ne = len(pos), len(edges)
    bad_e = np.flatnonzero(((edges < 0) | (edges >= nv)).any(axis=1))
    bad_t = np.flatnonzero(((tris < 0) | (tris >= ne)).any(axis=1))
    diag.add("edge vertex index out of range", bad_e)
    diag.add("triangle edge index out of range", bad_t)
    if len(bad_e) or len(bad_t):
        return diag

    diag.add("degenerate edge", np.flatnonzero(edges[:, 0] == edges[:, 1]))

    if ne:
        lo, hi = edges.min(axis=1), edges.max(axis=1)
        keys = lo * max(nv, 1) + hi
        _, first, counts = np.unique(keys, return_index=True, return_counts=True)
        dup_keys = set(keys[first[counts > 1]].tolist())
        diag.add("duplicate edge", [i for i, k in enumerate(keys) if k in dup_keys])

    if len(tris):
        diag.add(
            "repeated face",
            np.flatnonzero(
                (tris[:, 0] == tris[:, 1])
                | (tris[:, 1] == tris[:, 2])
                | (tris[:, 0] == tris[:, 2])
            ),
        )
        e0, e1, e2 = edges[tris[:, 0]], edges[tris[:, 1]], edges[tris[:, 2]]
        ok = (e0[:, 1] == e1[:, 1]) & (e0[:, 0] == e2[:, 1]) & (e1[:, 0] == e2[:, 0])
        diag.add("simplicial identity", np.flatnonzero(~ok))
        tv = np.sort(np.column_stack([e1[:, 0], e0[:, 0], e0[:, 1]]), axis=1)
        rep = (tv[:, 0] == tv[:, 1]) | (tv[:, 1] == tv[:, 2])
        diag.add("repeated vertex in triangle", np.flatnonzero(ok & rep))
        tkeys = (tv[:, 0] * nv + tv[:, 1]) * nv + tv[:, 2]
        _, first, counts = np.unique(tkeys[ok], return_index=True, return_counts=True)
        dup = set(tkeys[ok][first[counts > 1]].tolist())
        diag.add("duplicate triangle", [i for i in range(len(tris)) if ok[i] and tkeys[i] in dup])

    used_e = np.zeros(ne, dtype=bool)
    used_e[tris.ravel()] = True
    diag.add("dangling edge", np.flatnonzero(~used_e))
    used_v = np.zeros(nv, dtype=bool)
    used_v[edges[tris.ravel()].ravel()] = True
    diag.add("dangling vertex", np.flatnonzero(~used_v))
    return diag


def _circumcenters(p0, p1, p2):
    a = p1 - p0
    b = p2 - p0
    n = np.cross(a, b)
    nn = np.einsum("ij,ij->i", n, n)
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    degenerate = nn <= 1e-28 * aa * bb
    num = aa[:, None] * np.cross(b, n) + bb[:, None] * np.cross(n, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        cc = p0 + num / (2.0 * nn[:, None])
    return cc, degenerate


def circumcenter(p0, p1, p2) -> np.ndarray:
    """Point equidistant from three non-collinear points, in their plane."""
    pts = [np.atleast_2d(np.asarray(p, dtype=float)) for p in (p0, p1, p2)]
    pts = [np.pad(p, ((0, 0), (0, 3 - p.shape[1]))) for p in pts]
    cc, degenerate = _circumcenters(*pts)
    if degenerate[0]:
        raise DegenerateTriangleError("degenerate triangle")
    return cc[0]


@dataclass(frozen=True, eq=False)
class DualGeometry:
    """Circumcentric dual of an embedded complex.

    ``dual_edge_length`` and ``dual_cell_area`` are signed circumcentric
    measures; they coincide with the unsigned ones on well-centered meshes.
    """

    complex: EmbeddedComplex2D
    tri_circumcenter: np.ndarray
    edge_midpoint: np.ndarray
    dual_edge_length: np.ndarray
    dual_cell_area: np.ndarray
    primal_edge_length: np.ndarray
    tri_area: np.ndarray

    @property
    def total_area(self) -> float:
        return float(self.tri_area.sum())


def build_dual(c: EmbeddedComplex2D) -> DualGeometry:
    """Circumcenters, dual edge lengths and dual cell areas of ``c``."""
    pos = c.positions
    edges = c.edges
    tv = c.tri_vertices
    p0, p1, p2 = pos[tv[:, 0]], pos[tv[:, 1]], pos[tv[:, 2]]
    cc, degenerate = _circumcenters(p0, p1, p2)
    if np.any(degenerate):
        raise DegenerateTriangleError(
            f"degenerate triangle(s) {np.flatnonzero(degenerate)[:10].tolist()}"
        )

    elen = np.linalg.norm(pos[edges[:, 1]] - pos[edges[:, 0]], axis=1)
    if np.any(elen <= 0):
        raise MeshError(f"zero-length edge(s) {np.flatnonzero(elen <= 0)[:10].tolist()}")
    twice_area = np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
    tri_area = 0.5 * twice_area

    # cot of the angle opposite face k; e_k is opposite vertex v_k
    def cot(o, a, b):
        return np.einsum("ij,ij->i", a - o, b - o) / twice_area

    cots = np.column_stack([cot(p0, p1, p2), cot(p1, p0, p2), cot(p2, p0, p1)])
    t_edges = c.triangles
    lens = elen[t_edges]
    # signed circumcenter-to-midpoint distance inside each triangle
    h = 0.5 * lens * cots

    dual_len = np.bincount(t_edges.ravel(), weights=h.ravel(), minlength=c.ne)
    lh = lens * h
    corner = 0.25 * np.column_stack(
        [lh[:, 1] + lh[:, 2], lh[:, 0] + lh[:, 2], lh[:, 0] + lh[:, 1]]
    )
    dual_area = np.bincount(tv.ravel(), weights=corner.ravel(), minlength=c.nv)
    mid = 0.5 * (pos[edges[:, 0]] + pos[edges[:, 1]])
    return DualGeometry(
        complex=c,
        tri_circumcenter=cc,
        edge_midpoint=mid,
        dual_edge_length=dual_len,
        dual_cell_area=dual_area,
        primal_edge_length=elen,
        tri_area=tri_area,
    )


def make_triangulated_grid(nx, ny, lx=1.0, ly=1.0, origin=(0.0, 0.0)) -> EmbeddedComplex2D:
    """Rectangle of ``nx * ny`` cells, each split along its rising diagonal."""
    if nx < 1 or ny < 1:
        raise MeshError("grid needs at least one cell in each direction")
    if lx <= 0 or ly <= 0:
        raise MeshError("grid extents must be positive")
    xs = origin[0] + lx * np.arange(nx + 1) / nx
    ys = origin[1] + ly * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    pos = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    a = (j * (nx + 1) + i).ravel()
    b, c, d = a + 1, a + nx + 1, a + nx + 2
    tris = np.empty((2 * a.size, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, d])
    tris[1::2] = np.column_stack([a, d, c])
    return EmbeddedComplex2D.from_triangles(pos, tris)


def make_equilateral_grid(rows, cols, side=1.0, origin=(0.0, 0.0)) -> EmbeddedComplex2D:
    """Stack of ``rows`` strips, each made of ``cols`` equilateral triangles.

    Strips alternate between starting with an upward and a downward
    triangle so any ``cols`` tiles a roughly rectangular region.
    ``make_equilateral_grid(4, 8)`` is the 25-vertex, 32-triangle mesh.
    """
    if rows < 1 or cols < 1:
        raise MeshError("equilateral grid needs rows >= 1 and cols >= 1")
    if side <= 0:
        raise MeshError("side must be positive")
    height = side * np.sqrt(3.0) / 2.0
    lines = []
    pos = []
    for j in range(rows + 1):
        count = (cols + 1) // 2 + 1 if j % 2 == 0 else cols // 2 + 1
        offset = 0.0 if j % 2 == 0 else 0.5
        start = len(pos)
        lines.append(list(range(start, start + count)))
        pos.extend(
            (origin[0] + (k + offset) * side, origin[1] + j * height, 0.0) for k in range(count)
        )
    tris = []
    for r in range(rows):
        bot, top = lines[r], lines[r + 1]
        bi = ti = 0
        for t in range(cols):
            up = (t % 2 == 0) if r % 2 == 0 else (t % 2 == 1)
            if up:
                tris.append((bot[bi], bot[bi + 1], top[ti]))
                bi += 1
            else:
                tris.append((bot[bi], top[ti + 1], top[ti]))
                ti += 1
    return EmbeddedComplex2D.from_triangles(np.array(pos), np.array(tris))


_IGNORED_OBJ = {"vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib", "l"}


def read_obj(path) -> EmbeddedComplex2D:
    """Read vertices and triangular faces from a Wavefront OBJ file.

    Face vertex order sets the triangle orientation; edges are synthesized as
    sorted unordered vertex pairs.  No structural validation is done here.
    """
    verts, faces, face_lines = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *rest = line.split()
            if key == "v":
                if len(rest) not in (3, 4):
                    raise ObjParseError("malformed vertex record", lineno)
                try:
                    verts.append([float(x) for x in rest[:3]])
                except ValueError:
                    raise ObjParseError("malformed vertex record", lineno) from None
            elif key == "f":
                if len(rest) != 3:
                    raise ObjParseError("non-triangular face", lineno)
                try:
                    idx = [int(tok.split("/")[0]) for tok in rest]
                except ValueError:
                    raise ObjParseError("malformed face record", lineno) from None
                faces.append(idx)
                face_lines.append(lineno)
            elif key in _IGNORED_OBJ:
                continue
            else:
                raise ObjParseError(f"unsupported record {key!r}", lineno)
    nv = len(verts)
    for idx, lineno in zip(faces, face_lines):
        if any(i < 1 or i > nv for i in idx):
            raise ObjParseError("face index out of range", lineno)
    pos = np.array(verts, dtype=float).reshape(-1, 3)
    tris = np.array(faces, dtype=np.int64).reshape(-1, 3) - 1
    return EmbeddedComplex2D.from_triangles(pos, tris)


def write_obj(c: EmbeddedComplex2D, path, scalars=None):
    """Write ``c`` as OBJ; optional per-vertex ``scalars`` go to a ``.csv`` sidecar."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# {c.nv} vertices, {c.ne} edges, {c.nt} triangles\n")
        for x, y, z in c.positions.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, d in c.oriented_triangles() + 1:
            fh.write(f"f {a} {b} {d}\n")
    if scalars is not None:
        side = path.with_suffix(".csv")
        with open(side, "w") as fh:
            fh.write("vertex,value\n")
            for i, s in enumerate(np.asarray(scalars, dtype=float).tolist()):
                fh.write(f"{i},{s!r}\n")


def dump_json(c: EmbeddedComplex2D, path):
    with open(path, "w") as fh:
        json.dump(c.to_dict(), fh)


def load_json(path) -> EmbeddedComplex2D:
    with open(path) as fh:
        return EmbeddedComplex2D.from_dict(json.load(fh))

"""Conforming 2D triangular meshes with marked boundary edges.

Structured meshes of the unit square and of the unit disk (represented by
its inscribed regular polygon), uniform 1:4 refinement, boundary-node
queries, and a line-oriented text format.  Triangles are counterclockwise;
invariants are enforced at construction time, so every `Mesh` instance in
circulation is valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SteklovLabError

__all__ = [
    "Mesh",
    "MeshError",
    "make_unit_square",
    "make_unit_disk",
    "refine_uniform",
    "boundary_nodes",
    "read_mesh",
    "write_mesh",
    "triangle_areas",
    "euler_characteristic",
]

DEGENERATE_AREA = 1e-14
DUPLICATE_TOL = 1e-12


class MeshError(SteklovLabError):
    """A mesh violates a structural invariant."""


def _as_locked(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Mesh:
    """Triangulation of a polygonal domain.

    Parameters
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices per triangle, counterclockwise.
    boundary_edges : (nbe, 3) int array
        Rows ``(a, b, marker)``; ``(a, b)`` is an edge of exactly one
        triangle and ``marker`` is a small nonnegative integer.

    Instances are immutable (arrays are locked) and safe to share between
    threads after construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        e = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 3)
        issues = mesh_issues(v, t, e)
        if issues:
            head = "; ".join(msg for _, _, msg in issues[:3])
            more = "" if len(issues) <= 3 else f" (+{len(issues) - 3} more)"
            raise MeshError(head + more)
        object.__setattr__(self, "vertices", _as_locked(v))
        object.__setattr__(self, "triangles", _as_locked(t))
        object.__setattr__(self, "boundary_edges", _as_locked(e))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_boundary_edges(self) -> int:
        return self.boundary_edges.shape[0]


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _signed_areas(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * _cross2(p1 - p0, p2 - p0)


def triangle_areas(m: Mesh) -> np.ndarray:
    """Signed (positive) area of every triangle."""
    return _signed_areas(m.vertices, m.triangles)


def _undirected_edges(t: np.ndarray) -> np.ndarray:
    e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return np.sort(e, axis=1)


def euler_characteristic(m: Mesh) -> int:
    """V - E + F with E counted once per undirected edge (1 for a disk)."""
    edges = np.unique(_undirected_edges(m.triangles), axis=0)
    return m.num_vertices - edges.shape[0] + m.num_triangles


def mesh_issues(v: np.ndarray, t: np.ndarray, e: np.ndarray):
    """Collect invariant violations as ``(kind, index, message)`` tuples.

    ``kind`` is one of ``"vertex"``, ``"triangle"``, ``"edge"`` and
    ``index`` points into the corresponding array, which lets file readers
    translate violations back to line numbers.
    """
    issues = []
    nv = v.shape[0]

    if t.size and (t.min() < 0 or t.max() >= nv):
        for i, tri in enumerate(t):
            if tri.min() < 0 or tri.max() >= nv:
                issues.append(("triangle", i, f"triangle {i} has vertex index out of range"))
    if e.size and (e[:, :2].min() < 0 or e[:, :2].max() >= nv):
        for i, ed in enumerate(e):
            if ed[:2].min() < 0 or ed[:2].max() >= nv:
                issues.append(("edge", i, f"boundary edge {i} has vertex index out of range"))
    if issues:
        return issues

    areas = _signed_areas(v, t) if t.size else np.zeros(0)
    for i in np.nonzero(areas <= DEGENERATE_AREA)[0]:
        issues.append(("triangle", int(i), f"triangle {int(i)} has area {areas[i]:.3e} <= {DEGENERATE_AREA:.0e} (degenerate or clockwise)"))

    # duplicate vertices: sort lexicographically, compare within a sliding
    # window (sufficient because duplicates are adjacent after the sort up
    # to DUPLICATE_TOL in the leading coordinate)
    if nv > 1:
        order = np.lexsort((v[:, 1], v[:, 0]))
        sv = v[order]
        for i in range(nv - 1):
            j = i + 1
            while j < nv and sv[j, 0] - sv[i, 0] <= DUPLICATE_TOL:
                if abs(sv[j, 1] - sv[i, 1]) <= DUPLICATE_TOL:
                    a, b = sorted((int(order[i]), int(order[j])))
                    issues.append(("vertex", b, f"vertices {a} and {b} coincide within {DUPLICATE_TOL:.0e}"))
                j += 1

    # edge incidence: boundary edges in exactly one triangle, interior in two
    tri_edges = _undirected_edges(t)
    uniq, counts = (np.unique(tri_edges, axis=0, return_counts=True)
                    if tri_edges.size else (np.zeros((0, 2), np.int64), np.zeros(0, np.int64)))
    count_of = {(int(a), int(b)): int(c) for (a, b), c in zip(uniq, counts)}
    declared = set()
    for i, ed in enumerate(e):
        key = (int(min(ed[0], ed[1])), int(max(ed[0], ed[1])))
        if key in declared:
            issues.append(("edge", i, f"boundary edge {i} is declared twice"))
        declared.add(key)
        c = count_of.get(key, 0)
        if c != 1:
            issues.append(("edge", i, f"boundary edge {i} belongs to {c} triangles, expected 1"))
    for (a, b), c in count_of.items():
        if c == 1 and (a, b) not in declared:
            issues.append(("edge", -1, f"triangle edge ({a},{b}) lies on the boundary but is not declared"))
        elif c > 2:
            issues.append(("edge", -1, f"edge ({a},{b}) belongs to {c} triangles, mesh is non-conforming"))

    # boundary edges partition into closed loops: every endpoint has degree 2
    if e.size:
        deg = np.zeros(nv, dtype=np.int64)
        np.add.at(deg, e[:, 0], 1)
        np.add.at(deg, e[:, 1], 1)
        for node in np.nonzero(deg % 2)[0]:
            issues.append(("edge", -1, f"boundary vertex {int(node)} has odd edge degree {int(deg[node])}, loops are not closed"))

    return issues


def make_unit_square(n: int) -> Mesh:
    """Structured mesh of [0,1]^2 with ``n`` subdivisions per side.

    (n+1)^2 vertices, 2 n^2 triangles (each cell split along its
    bottom-left to top-right diagonal), 4n boundary edges with marker 1.
    """
    if n < 1:
        raise ValueError(f"make_unit_square: n must be >= 1, got {n}")
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            bl, br = vid(ix, iy), vid(ix + 1, iy)
            tl, tr = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            tris.append((bl, br, tr))
            tris.append((bl, tr, tl))

    edges = []
    for ix in range(n):
        edges.append((vid(ix, 0), vid(ix + 1, 0), 1))
        edges.append((vid(ix + 1, n), vid(ix, n), 1))
    for iy in range(n):
        edges.append((vid(n, iy), vid(n, iy + 1), 1))
        edges.append((vid(0, iy + 1), vid(0, iy), 1))

    return Mesh(vertices, np.array(tris), np.array(edges))


def make_unit_disk(sectors: int, rings: int) -> Mesh:
    """Polar-grid mesh of the unit disk's inscribed regular polygon.

    One center vertex, ``rings`` rings of ``sectors`` vertices at radii
    i/rings; a fan of triangles around the center, two triangles per
    quadrilateral in every outer annulus, and ``sectors`` boundary edges
    (marker 1) on the outermost ring.  Total: 1 + sectors*rings vertices
    and sectors*(2*rings - 1) triangles.
    """
    s, r = sectors, rings
    if s < 3:
        raise ValueError(f"make_unit_disk: sectors must be >= 3, got {s}")
    if r < 1:
        raise ValueError(f"make_unit_disk: rings must be >= 1, got {r}")

    angles = 2.0 * np.pi * np.arange(s) / s
    verts = [np.zeros((1, 2))]
    for i in range(1, r + 1):
        rad = i / r
        verts.append(np.column_stack([rad * np.cos(angles), rad * np.sin(angles)]))
    vertices = np.vstack(verts)

    def vid(ring, j):
        # ring 1..r, sector index modulo s
        return 1 + (ring - 1) * s + (j % s)

    tris = []
    for j in range(s):
        tris.append((0, vid(1, j), vid(1, j + 1)))
    for ring in range(1, r):
        for j in range(s):
            a, b = vid(ring, j), vid(ring, j + 1)
            aa, bb = vid(ring + 1, j), vid(ring + 1, j + 1)
            tris.append((a, aa, bb))
            tris.append((a, bb, b))

    edges = [(vid(r, j), vid(r, j + 1), 1) for j in range(s)]
    return Mesh(vertices, np.array(tris), np.array(edges))


def refine_uniform(m: Mesh) -> Mesh:
    """Split every triangle 1:4 through its edge midpoints.

    Boundary markers are inherited by both child edges.  Midpoints of
    boundary edges are chord midpoints: the polygon is the fixed
    computational domain, there is no reprojection onto a curve.
    """
    v = m.vertices
    midpoint_id: dict[tuple[int, int], int] = {}
    new_vertices = [v]
    next_id = m.num_vertices

    def mid(a: int, b: int) -> int:
        nonlocal next_id
        key = (a, b) if a < b else (b, a)
        idx = midpoint_id.get(key)
        if idx is None:
            idx = next_id
            midpoint_id[key] = idx
            new_vertices.append(0.5 * (v[a] + v[b]).reshape(1, 2))
            next_id += 1
        return idx

    tris = []
    for a, b, c in m.triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])

    edges = []
    for a, b, marker in m.boundary_edges:
        ab = mid(int(a), int(b))
        edges.append((a, ab, marker))
        edges.append((ab, b, marker))

    return Mesh(np.vstack(new_vertices), np.array(tris), np.array(edges))


def boundary_nodes(m: Mesh, marker: int | None = None) -> list[int]:
    """Sorted vertex indices incident to boundary edges.

    With ``marker`` given, only edges carrying that marker count; an
    unknown marker yields an empty list.
    """
    e = m.boundary_edges
    if marker is not None:
        e = e[e[:, 2] == marker]
    return sorted(set(e[:, 0].tolist()) | set(e[:, 1].tolist()))


def write_mesh(m: Mesh, path) -> None:
    """Write the line-oriented text format (see :func:`read_mesh`)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{m.num_vertices} {m.num_triangles} {m.num_boundary_edges}\n")
        for x, y in m.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in m.triangles:
            f.write(f"{i} {j} {k}\n")
        for a, b, marker in m.boundary_edges:
            f.write(f"{a} {b} {marker}\n")


def read_mesh(path) -> Mesh:
    """Read the text format, rejecting invalid meshes with line diagnostics.

    Format (``#`` starts a comment, blank lines are ignored)::

        nv nt nbe
        x y          (nv lines)
        i j k        (nt lines, 0-based, counterclockwise)
        a b marker   (nbe lines)
    """
    rows = []  # (line_number, tokens)
    with open(path, "r", encoding="utf-8") as f:
        for ln, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                rows.append((ln, text.split()))

    def fail(ln: int, msg: str):
        raise MeshError(f"{path}: line {ln}: {msg}")

    if not rows:
        raise MeshError(f"{path}: empty mesh file")
    ln0, header = rows[0]
    if len(header) != 3:
        fail(ln0, f"header must be 'nv nt nbe', got {' '.join(header)!r}")
    try:
        nv, nt, nbe = (int(tok) for tok in header)
    except ValueError:
        fail(ln0, f"header must contain three integers, got {' '.join(header)!r}")
    if len(rows) - 1 != nv + nt + nbe:
        fail(ln0, f"expected {nv + nt + nbe} data lines after header, found {len(rows) - 1}")

    def parse_block(block, width, conv, what):
        out = []
        for ln, toks in block:
            if len(toks) != width:
                fail(ln, f"{what} line must have {width} fields, got {len(toks)}")
            try:
                out.append([conv(tok) for tok in toks])
            except ValueError:
                fail(ln, f"malformed {what} line: {' '.join(toks)!r}")
        return out

    vrows = rows[1:1 + nv]
    trows = rows[1 + nv:1 + nv + nt]
    erows = rows[1 + nv + nt:]
    v = np.array(parse_block(vrows, 2, float, "vertex"), dtype=float).reshape(nv, 2)
    t = np.array(parse_block(trows, 3, int, "triangle"), dtype=np.int64).reshape(nt, 3)
    e = np.array(parse_block(erows, 3, int, "boundary edge"), dtype=np.int64).reshape(nbe, 3)

    line_of = {"vertex": [ln for ln, _ in vrows],
               "triangle": [ln for ln, _ in trows],
               "edge": [ln for ln, _ in erows]}
    issues = mesh_issues(v, t, e)
    if issues:
        kind, idx, msg = issues[0]
        where = f"line {line_of[kind][idx]}: " if 0 <= idx < len(line_of[kind]) else ""
        raise MeshError(f"{path}: {where}{msg}")
    return Mesh(v, t, e)

"""P1 finite element assembly of the weak-form Gram matrices and loads.

Degrees of freedom are node-major, component-minor: ``dof(v, a) = v*k + a``
so each node carries a contiguous k-block mirroring the k x k matrix
action of the weights.  Interior integrals use the 3-point edge-midpoint
rule, boundary integrals 2-point Gauss, also for expression coefficients
(a variational crime of optimal order for P1).

Element contributions are accumulated into a coordinate list and
compressed by index-sorted deterministic summation, so assembled values
do not depend on the order elements were visited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import expr as _expr
from .errors import ValidationError
from .mesh import Mesh
from .quadrature import EDGE_T, EDGE_WEIGHTS, TRI_BARY, TRI_WEIGHTS
from .weights import BOUNDARY, INTERIOR, MatrixField

__all__ = [
    "GramPair", "BoundaryNonlinearity",
    "assemble_gram", "assemble_boundary_load", "assemble_boundary_jacobian",
    "boundary_mass", "compress_coo", "write_coo", "read_coo",
]

FD_STEP_BASE = 1e-6

# hat values at the two boundary Gauss points: rows (point), cols (edge node)
_EDGE_HATS = np.column_stack([1.0 - EDGE_T, EDGE_T])


@dataclass(frozen=True)
class GramPair:
    """Assembled Gram matrices of the two inner products.

    ``S`` discretizes the gradient term plus the interior and boundary
    lower-order weights; ``B`` the interior/boundary spectral weights;
    ``B_P`` the boundary part of ``B`` alone.  All are N x N symmetric
    CSR with N = num_vertices * k.
    """

    S: sp.csr_matrix
    B: sp.csr_matrix
    B_P: sp.csr_matrix
    k: int
    num_vertices: int

    @property
    def size(self) -> int:
        return self.num_vertices * self.k

    def dof(self, node: int, component: int) -> int:
        return node * self.k + component


def compress_coo(rows, cols, vals, n: int) -> sp.csr_matrix:
    """Sum duplicate (row, col) triplets in sorted index order.

    The reduction order is fixed by the lexicographic sort, which makes
    assembled matrices bitwise reproducible regardless of how the element
    loop was scheduled.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if rows.size == 0:
        return sp.csr_matrix((n, n))
    # the value is the final sort key so ties within one (row, col) group
    # always reduce in the same order, whatever order elements were visited
    order = np.lexsort((vals, cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    first = np.ones(r.size, dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.nonzero(first)[0]
    sums = np.add.reduceat(v, starts)
    out = sp.csr_matrix((sums, (r[starts], c[starts])), shape=(n, n))
    out.sum_duplicates()
    return out


def _p1_gradients(mesh: Mesh):
    """Constant P1 gradients and areas per triangle."""
    v, t = mesh.vertices, mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    area = 0.5 * ((p1 - p0)[:, 0] * (p2 - p0)[:, 1] - (p1 - p0)[:, 1] * (p2 - p0)[:, 0])
    b = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1)
    c = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    return grads, area


def _field_at_tri_points(f: MatrixField, mesh: Mesh):
    """Field values at the interior rule points, shape (nt, 3, k, k)."""
    v, t = mesh.vertices, mesh.triangles
    p = v[t]  # (nt, 3, 2)
    pts = np.einsum("qi,tid->tqd", TRI_BARY, p)
    return f.values_at(pts.reshape(-1, 2)).reshape(t.shape[0], 3, f.k, f.k)


def _field_at_edge_points(f: MatrixField, mesh: Mesh):
    """Field values at the boundary Gauss points, shape (nbe, 2, k, k)."""
    e = mesh.boundary_edges
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    pts = np.stack([a + t * (b - a) for t in EDGE_T], axis=1)  # (nbe, 2, 2)
    return f.values_at(pts.reshape(-1, 2)).reshape(e.shape[0], 2, f.k, f.k)


def _mass_triplets_interior(mesh: Mesh, f: MatrixField):
    t = mesh.triangles
    _, area = _p1_gradients(mesh)
    vals = _field_at_tri_points(f, mesh)
    w = area[:, None] * TRI_WEIGHTS[None, :]
    loc = np.einsum("tq,tqab,qi,qj->tiajb", w, vals, TRI_BARY, TRI_BARY)
    loc = 0.5 * (loc + loc.transpose(0, 3, 4, 1, 2))  # exact symmetry
    k = f.k
    dof = t[:, :, None] * k + np.arange(k)[None, None, :]  # (nt, 3, k)
    rows = np.broadcast_to(dof[:, :, :, None, None], loc.shape)
    cols = np.broadcast_to(dof[:, None, None, :, :], loc.shape)
    return rows.ravel(), cols.ravel(), loc.ravel()


def _mass_triplets_boundary(mesh: Mesh, f: MatrixField):
    e = mesh.boundary_edges
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    vals = _field_at_edge_points(f, mesh)
    w = lengths[:, None] * EDGE_WEIGHTS[None, :]
    loc = np.einsum("eq,eqab,qi,qj->eiajb", w, vals, _EDGE_HATS, _EDGE_HATS)
    loc = 0.5 * (loc + loc.transpose(0, 3, 4, 1, 2))
    k = f.k
    dof = e[:, :2, None] * k + np.arange(k)[None, None, :]  # (nbe, 2, k)
    rows = np.broadcast_to(dof[:, :, :, None, None], loc.shape)
    cols = np.broadcast_to(dof[:, None, None, :, :], loc.shape)
    return rows.ravel(), cols.ravel(), loc.ravel()


def _gradient_triplets(mesh: Mesh, k: int):
    # the gradient term couples equal components only: (v_i, a) with (v_j, a)
    t = mesh.triangles
    grads, area = _p1_gradients(mesh)
    loc = np.einsum("t,tid,tjd->tij", area, grads, grads)
    loc = 0.5 * (loc + loc.transpose(0, 2, 1))
    nt = t.shape[0]
    comp = np.arange(k)
    shape = (nt, 3, 3, k)
    rows = np.broadcast_to(t[:, :, None, None] * k + comp[None, None, None, :], shape)
    cols = np.broadcast_to(t[:, None, :, None] * k + comp[None, None, None, :], shape)
    vals = np.broadcast_to(loc[:, :, :, None], shape)
    return rows.ravel(), cols.ravel(), vals.ravel()


def _check_support(f: MatrixField, want: str):
    if f.support != want:
        raise ValidationError(f"assemble_gram: {f.name} must be {want}-supported, is {f.support}")


def assemble_gram(mesh: Mesh, a: MatrixField, sigma: MatrixField,
                  m: MatrixField, p: MatrixField) -> GramPair:
    """Assemble the two Gram matrices of the discrete eigensystem.

    ``S[(v,a),(w,b)] = delta_ab int grad(phi_v).grad(phi_w)
    + int a_ab phi_v phi_w + int_bdry sigma_ab phi_v phi_w`` and ``B``
    likewise from the spectral weights, with ``B_P`` the boundary part
    alone.
    """
    ks = {a.k, sigma.k, m.k, p.k}
    if len(ks) != 1:
        raise ValidationError(f"assemble_gram: component counts differ: {sorted(ks)}")
    k = a.k
    _check_support(a, INTERIOR)
    _check_support(sigma, BOUNDARY)
    _check_support(m, INTERIOR)
    _check_support(p, BOUNDARY)

    n = mesh.num_vertices * k
    gr_r, gr_c, gr_v = _gradient_triplets(mesh, k)
    am_r, am_c, am_v = _mass_triplets_interior(mesh, a)
    sm_r, sm_c, sm_v = _mass_triplets_boundary(mesh, sigma)
    s_mat = compress_coo(
        np.concatenate([gr_r, am_r, sm_r]),
        np.concatenate([gr_c, am_c, sm_c]),
        np.concatenate([gr_v, am_v, sm_v]), n)

    mm_r, mm_c, mm_v = _mass_triplets_interior(mesh, m)
    pm_r, pm_c, pm_v = _mass_triplets_boundary(mesh, p)
    b_mat = compress_coo(
        np.concatenate([mm_r, pm_r]),
        np.concatenate([mm_c, pm_c]),
        np.concatenate([mm_v, pm_v]), n)
    bp_mat = compress_coo(pm_r, pm_c, pm_v, n)

    return GramPair(S=s_mat, B=b_mat, B_P=bp_mat, k=k, num_vertices=mesh.num_vertices)


def boundary_mass(mesh: Mesh, k: int) -> sp.csr_matrix:
    """Plain boundary mass matrix (identity weight), used for trace norms."""
    ident = MatrixField.constant("I", k, 1.0, BOUNDARY)
    r, c, v = _mass_triplets_boundary(mesh, ident)
    return compress_coo(r, c, v, mesh.num_vertices * k)


@dataclass(frozen=True)
class BoundaryNonlinearity:
    """The k boundary nonlinearity components g_a(x1, x2, u1..uk).

    Symbolic u-derivatives are precomputed where they exist; entries of
    ``derivatives`` are None where differentiation failed (abs/min/max),
    in which case Jacobian assembly needs the finite-difference fallback.
    """

    k: int
    components: tuple[_expr.Expr, ...]
    derivatives: tuple[tuple[_expr.Expr | None, ...], ...]
    sources: tuple[str, ...]

    @classmethod
    def parse(cls, sources, k: int | None = None) -> "BoundaryNonlinearity":
        srcs = [s if isinstance(s, str) else _expr.pretty(s) for s in sources]
        if k is None:
            k = len(srcs)
        if len(srcs) != k:
            raise ValidationError(f"boundary nonlinearity needs {k} components, got {len(srcs)}")
        comps = tuple(_expr.parse(s, k) for s in srcs)
        derivs = []
        for g in comps:
            row = []
            for b in range(1, k + 1):
                try:
                    row.append(_expr.diff_u(g, b))
                except _expr.NonDifferentiableError:
                    row.append(None)
            derivs.append(tuple(row))
        return cls(k=k, components=comps, derivatives=tuple(derivs), sources=tuple(srcs))

    @property
    def differentiable(self) -> bool:
        return all(d is not None for row in self.derivatives for d in row)

    def value(self, x, u) -> np.ndarray:
        return np.array([_expr.evaluate(g, x=x, u=u) for g in self.components])

    def jacobian_value(self, x, u, fd_fallback: bool) -> np.ndarray:
        """dg_a/du_b at one point, mixing symbolic entries and central FD."""
        out = np.empty((self.k, self.k))
        for a in range(self.k):
            for b in range(self.k):
                d = self.derivatives[a][b]
                if d is not None:
                    out[a, b] = _expr.evaluate(d, x=x, u=u)
                elif fd_fallback:
                    h = FD_STEP_BASE * (1.0 + abs(u[b]))
                    up = np.array(u, dtype=float)
                    um = np.array(u, dtype=float)
                    up[b] += h
                    um[b] -= h
                    gp = _expr.evaluate(self.components[a], x=x, u=up)
                    gm = _expr.evaluate(self.components[a], x=x, u=um)
                    out[a, b] = (gp - gm) / (2.0 * h)
                else:
                    raise _expr.NonDifferentiableError(
                        f"component {a + 1} is not differentiable in u{b + 1} "
                        f"({self.sources[a]!r}) and the finite-difference fallback is disabled")
        return out


def _as_nonlinearity(g, k: int | None) -> BoundaryNonlinearity:
    if isinstance(g, BoundaryNonlinearity):
        return g
    return BoundaryNonlinearity.parse(g, k)


def _edge_states(mesh: Mesh, k: int, u_vec: np.ndarray):
    """Per edge and Gauss point: position, weight, hats, interpolated u."""
    e = mesh.boundary_edges
    va, vb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    lengths = np.linalg.norm(vb - va, axis=1)
    u_nodes = u_vec.reshape(mesh.num_vertices, k)
    for ei in range(e.shape[0]):
        na, nb = int(e[ei, 0]), int(e[ei, 1])
        for q in range(2):
            x = va[ei] + EDGE_T[q] * (vb[ei] - va[ei])
            w = EDGE_WEIGHTS[q] * lengths[ei]
            hats = _EDGE_HATS[q]
            u_loc = hats[0] * u_nodes[na] + hats[1] * u_nodes[nb]
            yield ei, (na, nb), x, w, hats, u_loc


def assemble_boundary_load(mesh: Mesh, g, u_vec, k: int | None = None) -> np.ndarray:
    """Load vector of the boundary nonlinearity at the current iterate.

    Component (v, a) approximates the boundary integral of
    ``g_a(x, U_h(x)) phi_v(x)`` with the P1 interpolant U_h of ``u_vec``.
    """
    gnl = _as_nonlinearity(g, k)
    n = mesh.num_vertices * gnl.k
    u_vec = np.zeros(n) if u_vec is None else np.asarray(u_vec, dtype=float)
    if u_vec.shape != (n,):
        raise ValidationError(f"assemble_boundary_load: expected state of length {n}, got {u_vec.shape}")
    out = np.zeros(n)
    for ei, nodes, x, w, hats, u_loc in _edge_states(mesh, gnl.k, u_vec):
        try:
            gv = gnl.value(x, u_loc)
        except _expr.ExprEvalError as err:
            raise _expr.ExprEvalError(f"boundary edge {ei} at x={tuple(x)}: {err}") from err
        for i, node in enumerate(nodes):
            out[node * gnl.k:(node + 1) * gnl.k] += w * hats[i] * gv
    return out


def assemble_boundary_jacobian(mesh: Mesh, g, u_vec, k: int | None = None,
                               fd_fallback: bool = False) -> sp.csr_matrix:
    """Jacobian of :func:`assemble_boundary_load` with respect to ``u_vec``.

    Couples boundary DOFs only.  Uses symbolic derivatives where they
    exist; non-differentiable components need ``fd_fallback=True`` (central
    differences with step 1e-6*(1+|u|)) and raise otherwise.
    """
    gnl = _as_nonlinearity(g, k)
    n = mesh.num_vertices * gnl.k
    u_vec = np.zeros(n) if u_vec is None else np.asarray(u_vec, dtype=float)
    rows, cols, vals = [], [], []
    for ei, nodes, x, w, hats, u_loc in _edge_states(mesh, gnl.k, u_vec):
        try:
            dg = gnl.jacobian_value(x, u_loc, fd_fallback)
        except _expr.ExprEvalError as err:
            raise _expr.ExprEvalError(f"boundary edge {ei} at x={tuple(x)}: {err}") from err
        for i, ni in enumerate(nodes):
            for j, nj in enumerate(nodes):
                block = w * hats[i] * hats[j] * dg
                for a in range(gnl.k):
                    for b in range(gnl.k):
                        rows.append(ni * gnl.k + a)
                        cols.append(nj * gnl.k + b)
                        vals.append(block[a, b])
    return compress_coo(np.array(rows), np.array(cols), np.array(vals), n)


def write_coo(mat: sp.spmatrix, path) -> None:
    """Export as coordinate text: header ``N nnz`` then ``row col value``."""
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{coo.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            f.write(f"{r} {c} {float(v)!r}\n")


def read_coo(path) -> sp.csr_matrix:
    """Read the coordinate text format written by :func:`write_coo`."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ValidationError(f"{path}: malformed COO header")
        n, nnz = int(header[0]), int(header[1])
        rows, cols, vals = [], [], []
        for ln, line in enumerate(f, start=2):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != 3:
                raise ValidationError(f"{path}: line {ln}: expected 'row col value'")
            rows.append(int(toks[0]))
            cols.append(int(toks[1]))
            vals.append(float(toks[2]))
    if len(vals) != nnz:
        raise ValidationError(f"{path}: header promises {nnz} entries, found {len(vals)}")
    return compress_coo(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                        np.array(vals), n)

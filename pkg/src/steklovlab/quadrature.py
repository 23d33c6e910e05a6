"""Quadrature rules shared by assembly and weight validation.

Interior integrals use the 3-point edge-midpoint rule on triangles (exact
for degree 2, hence exact for products of P1 hat functions); boundary
integrals use 2-point Gauss per edge (exact for degree 3).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "TRI_BARY", "TRI_WEIGHTS", "EDGE_T", "EDGE_WEIGHTS",
    "interior_quadrature", "boundary_quadrature",
]

# barycentric coordinates of the edge-midpoint rule; weights sum to 1
TRI_BARY = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])
TRI_WEIGHTS = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])

# 2-point Gauss on [0, 1]; weights sum to 1
_G = 1.0 / np.sqrt(3.0)
EDGE_T = np.array([0.5 * (1.0 - _G), 0.5 * (1.0 + _G)])
EDGE_WEIGHTS = np.array([0.5, 0.5])


def interior_quadrature(mesh):
    """All interior quadrature points of a mesh.

    Returns ``(points, weights, tri_index)`` with ``points`` of shape
    (3*nt, 2); ``weights`` already include triangle areas.
    """
    v, t = mesh.vertices, mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    areas = 0.5 * ((p1 - p0)[:, 0] * (p2 - p0)[:, 1] - (p1 - p0)[:, 1] * (p2 - p0)[:, 0])
    pts = np.concatenate([
        TRI_BARY[q, 0] * p0 + TRI_BARY[q, 1] * p1 + TRI_BARY[q, 2] * p2
        for q in range(3)
    ])
    w = np.concatenate([TRI_WEIGHTS[q] * areas for q in range(3)])
    idx = np.tile(np.arange(t.shape[0]), 3)
    order = np.argsort(idx, kind="stable")  # triangle-major, point-minor
    return pts[order], w[order], idx[order]


def boundary_quadrature(mesh, marker: int | None = None):
    """All boundary quadrature points, edge-major and Gauss-point-minor.

    Returns ``(points, weights, edge_index)``; weights include edge
    lengths, so ``weights.sum()`` is the polygon perimeter (restricted to
    ``marker`` if given).
    """
    e = mesh.boundary_edges
    if marker is not None:
        e = e[e[:, 2] == marker]
    a = mesh.vertices[e[:, 0]]
    b = mesh.vertices[e[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    pts = np.concatenate([a + EDGE_T[q] * (b - a) for q in range(2)])
    w = np.concatenate([EDGE_WEIGHTS[q] * lengths for q in range(2)])
    idx = np.tile(np.arange(e.shape[0]), 2)
    order = np.argsort(idx, kind="stable")
    return pts[order], w[order], idx[order]

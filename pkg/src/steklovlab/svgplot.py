"""Minimal SVG 1.1 writers: filled triangulations and boundary traces.

Hand-rolled on purpose; the outputs are static figures and the package
carries no plotting dependency.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh

__all__ = ["mesh_svg", "boundary_trace_svg"]

# coarse perceptual ramp, interpolated linearly
_RAMP = np.array([
    (0.267, 0.005, 0.329),
    (0.254, 0.265, 0.530),
    (0.164, 0.471, 0.558),
    (0.135, 0.659, 0.518),
    (0.478, 0.821, 0.318),
    (0.993, 0.906, 0.144),
])


def _color(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    pos = v * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    t = pos - i
    rgb = (1.0 - t) * _RAMP[i] + t * _RAMP[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in rgb)


def _open_svg(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]


def mesh_svg(mesh: Mesh, path, values=None, size: int = 640, title: str = "") -> None:
    """Triangles as filled polygons, colored by mean nodal value.

    ``values`` is one scalar per vertex (or None for a flat fill); the
    boundary is overlaid as a polyline per marker.
    """
    v = mesh.vertices
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    span = max(hi[0] - lo[0], hi[1] - lo[1], 1e-30)
    margin = 0.05 * size

    def pix(p):
        x = margin + (p[0] - lo[0]) / span * (size - 2 * margin)
        y = size - margin - (p[1] - lo[1]) / span * (size - 2 * margin)
        return f"{x:.2f},{y:.2f}"

    lines = _open_svg(size, size)
    if title:
        lines.append(f'<title>{title}</title>')

    if values is not None:
        values = np.asarray(values, dtype=float)
        vmin, vmax = float(values.min()), float(values.max())
        scale = max(vmax - vmin, 1e-300)
        tri_vals = values[mesh.triangles].mean(axis=1)
    for ti, tri in enumerate(mesh.triangles):
        fill = _color((tri_vals[ti] - vmin) / scale) if values is not None else "#d0d7de"
        pts = " ".join(pix(v[i]) for i in tri)
        lines.append(f'<polygon points="{pts}" fill="{fill}" stroke="#444444" stroke-width="0.3"/>')

    for marker in sorted(set(mesh.boundary_edges[:, 2].tolist())):
        for a, b, _ in mesh.boundary_edges[mesh.boundary_edges[:, 2] == marker]:
            lines.append(
                f'<polyline points="{pix(v[a])} {pix(v[b])}" fill="none" '
                f'stroke="#000000" stroke-width="1.2"/>')

    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def boundary_trace_svg(mesh: Mesh, u: np.ndarray, k: int, path,
                       width: int = 800, height: int = 320) -> None:
    """Polyline of each solution component along the boundary arclength.

    Domains with several boundary loops get one polyline segment per loop,
    laid out consecutively along the arclength axis.
    """
    loops = _boundary_loops(mesh)
    u_nodes = np.asarray(u, dtype=float).reshape(mesh.num_vertices, k)

    all_vals = np.concatenate([u_nodes[order] for order, _ in loops])
    vmin = float(all_vals.min())
    vmax = float(all_vals.max())
    vspan = max(vmax - vmin, 1e-300)
    offsets = np.concatenate([[0.0], np.cumsum([arc[-1] for _, arc in loops])])
    total = max(offsets[-1], 1e-300)
    margin = 30.0

    def pix(s, val):
        x = margin + s / total * (width - 2 * margin)
        y = height - margin - (val - vmin) / vspan * (height - 2 * margin)
        return f"{x:.2f},{y:.2f}"

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    lines = _open_svg(width, height)
    lines.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>')
    if vmin <= 0.0 <= vmax:
        zero = pix(0.0, 0.0).split(",")[1]
        lines.append(f'<line x1="{margin}" y1="{zero}" x2="{width - margin}" y2="{zero}" '
                     f'stroke="#bbbbbb" stroke-width="0.8"/>')
    for a in range(k):
        for (order, arclen), offset in zip(loops, offsets):
            series = u_nodes[order][:, a]
            pts = " ".join(pix(offset + s, val) for s, val in zip(arclen, series))
            lines.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{palette[a % len(palette)]}" stroke-width="1.5"/>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _boundary_loops(mesh: Mesh):
    """Closed boundary loops as (node order, cumulative arclength) pairs."""
    succ = {int(a): int(b) for a, b, _ in mesh.boundary_edges}
    remaining = set(succ)
    loops = []
    while remaining:
        start = min(remaining)
        order = [start]
        remaining.discard(start)
        node = succ[start]
        while node != start and node in remaining:
            order.append(node)
            remaining.discard(node)
            node = succ[node]
        order.append(start)  # close the loop
        pts = mesh.vertices[order]
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        loops.append((np.array(order), np.concatenate([[0.0], np.cumsum(seg)])))
    return loops

import xml.dom.minidom

import numpy as np
import pytest

from steklovlab.mesh import Mesh, make_unit_disk, make_unit_square
from steklovlab.svgplot import boundary_trace_svg, mesh_svg


@pytest.fixture
def annulus():
    """3x3-cell square with the center cell removed: two boundary loops."""
    full = make_unit_square(3)

    def vid(ix, iy):
        return iy * 4 + ix

    hole = {(vid(1, 1), vid(2, 1), vid(2, 2)), (vid(1, 1), vid(2, 2), vid(1, 2))}
    tris = [t for t in full.triangles.tolist() if tuple(t) not in hole]
    edges = full.boundary_edges.tolist()
    ring = [vid(1, 1), vid(2, 1), vid(2, 2), vid(1, 2)]
    for a, b in zip(ring, ring[1:] + ring[:1]):
        edges.append((a, b, 2))
    return Mesh(full.vertices, np.array(tris), np.array(edges))


def test_mesh_svg_well_formed(tmp_path):
    mesh = make_unit_disk(12, 2)
    path = tmp_path / "m.svg"
    mesh_svg(mesh, path, values=mesh.vertices[:, 0], title="x1")
    doc = xml.dom.minidom.parse(str(path))
    assert doc.documentElement.tagName == "svg"
    assert len(doc.getElementsByTagName("polygon")) == mesh.num_triangles


def test_mesh_svg_flat_fill(tmp_path):
    path = tmp_path / "flat.svg"
    mesh_svg(make_unit_square(2), path)
    assert "#d0d7de" in path.read_text()


def test_boundary_trace_svg(tmp_path):
    mesh = make_unit_disk(12, 2)
    u = mesh.vertices[:, 0] ** 2 - mesh.vertices[:, 1] ** 2
    path = tmp_path / "trace.svg"
    boundary_trace_svg(mesh, u, 1, path)
    doc = xml.dom.minidom.parse(str(path))
    assert len(doc.getElementsByTagName("polyline")) == 1


def test_boundary_trace_svg_two_components(tmp_path):
    mesh = make_unit_square(2)
    u = np.arange(2 * mesh.num_vertices, dtype=float)
    path = tmp_path / "trace2.svg"
    boundary_trace_svg(mesh, u, 2, path)
    doc = xml.dom.minidom.parse(str(path))
    assert len(doc.getElementsByTagName("polyline")) == 2


def test_annulus_has_two_loops(tmp_path, annulus):
    from steklovlab.svgplot import _boundary_loops
    loops = _boundary_loops(annulus)
    assert len(loops) == 2
    assert {len(order) - 1 for order, _ in loops} == {12, 4}  # outer ring and hole
    path = tmp_path / "annulus.svg"
    boundary_trace_svg(annulus, annulus.vertices[:, 1], 1, path)
    doc = xml.dom.minidom.parse(str(path))
    assert len(doc.getElementsByTagName("polyline")) == 2

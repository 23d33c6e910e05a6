import ast
from pathlib import Path

import numpy as np
import pytest

from steklovlab import oracle


def test_disk_steklov_exact_multiplicities():
    assert np.array_equal(oracle.disk_steklov_exact(5), [0, 1, 1, 2, 2])
    assert np.array_equal(oracle.disk_steklov_exact(5, sigma=1.0), [1, 2, 2, 3, 3])
    assert np.array_equal(oracle.disk_steklov_exact(1), [0.0])
    assert np.array_equal(oracle.disk_steklov_exact(6), [0, 1, 1, 2, 2, 3])


def test_disk_steklov_exact_rejects_zero_modes():
    with pytest.raises(ValueError):
        oracle.disk_steklov_exact(0)


def test_decoupled_union():
    assert np.array_equal(oracle.decoupled_union([1, 3], [2]), [1, 2, 3])
    assert np.array_equal(oracle.decoupled_union([5.0], []), [5.0])
    with pytest.raises(ValueError, match="ascending"):
        oracle.decoupled_union([2, 1], [0])


def test_manufactured_registry_contents():
    ids = oracle.manufactured_ids()
    assert "harmonic-saddle-robin-disk" in ids
    assert "decoupled-saddle-pair" in ids
    with pytest.raises(KeyError, match="unknown"):
        oracle.manufactured_case("no-such-case")


def test_manufactured_cases_self_check():
    # every registered exact solution is harmonic to roundoff
    for ident in oracle.manufactured_ids():
        case = oracle.manufactured_case(ident)
        assert case.self_check() <= 1e-12


def test_manufactured_case_exact_vector():
    from steklovlab.mesh import make_unit_square
    case = oracle.manufactured_case("harmonic-saddle-robin-disk")
    mesh = make_unit_square(1)
    u = case.exact_vector(mesh)
    # x^2 - y^2 at the four corners (0,0), (1,0), (0,1), (1,1)
    assert np.array_equal(u, [0.0, 1.0, -1.0, 0.0])


def test_decoupled_case_components_are_independent():
    case = oracle.manufactured_case("decoupled-saddle-pair")
    g = case.nonlinearity()
    from steklovlab import expr
    # dg_1/du_2 = 0 and dg_2/du_1 = 0: the system is block diagonal
    for a, b in ((0, 1), (1, 0)):
        d = g.derivatives[a][b]
        assert expr.evaluate(d, x=(0.3, 0.4), u=(1.0, 2.0)) == 0.0


def test_edge_normal_data_matches_radial_field_at_midpoints():
    # on an inscribed regular polygon the edge normal is the radial direction
    # of the edge midpoint; compare against the gradient dotted with it
    from steklovlab.mesh import make_unit_disk
    case = oracle.manufactured_case("harmonic-saddle-robin-disk")
    mesh = make_unit_disk(16, 2)
    data = oracle.edge_normal_data(case, mesh)
    assert data.shape == (2 * mesh.num_boundary_edges, 1)
    e = mesh.boundary_edges
    mids = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
    radial = mids / np.linalg.norm(mids, axis=1, keepdims=True)
    for ei in range(e.shape[0]):
        grad_mid = case.exact_gradient[0](mids[ei])
        want = float(grad_mid @ radial[ei])
        got = data[2 * ei:2 * ei + 2, 0].mean()  # Gauss points average to the midpoint value
        assert got == pytest.approx(want, rel=1e-12)


def test_solver_modules_do_not_import_oracle():
    # layering: oracle data reaches the solvers only through tests
    src_dir = Path(oracle.__file__).parent
    for name in ("mesh", "expr", "weights", "quadrature", "assembly",
                 "spectrum", "certify", "solve"):
        tree = ast.parse((src_dir / f"{name}.py").read_text())
        for node in ast.walk(tree):
            if isinstance(node, ast.Import):
                assert not any("oracle" in alias.name for alias in node.names), name
            elif isinstance(node, ast.ImportFrom):
                assert "oracle" not in (node.module or ""), name
                assert not any(alias.name == "oracle" for alias in node.names), name

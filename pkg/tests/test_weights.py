import numpy as np
import pytest

from steklovlab.errors import ValidationError
from steklovlab.mesh import make_unit_square
from steklovlab.weights import (BOUNDARY, INTERIOR, MatrixField, lambda_extremes,
                                spectral_decompose, validate_asmp,
                                validate_mp_integral, validate_nonnegative,
                                validate_psd, validation_points)

PTS = np.array([[0.25, 0.25], [0.5, 0.75], [0.9, 0.1]])


def test_constant_scalar_is_identity_multiple():
    f = MatrixField.constant("A", 2, 3.0, INTERIOR)
    assert np.array_equal(f.value_at((0.1, 0.2)), 3.0 * np.eye(2))


def test_expression_field_evaluates():
    f = MatrixField.from_exprs("A", 1, [["x1 + 2*x2"]], INTERIOR)
    assert f.value_at((1.0, 0.5))[0, 0] == 2.0


def test_weight_entries_reject_solution_variables():
    with pytest.raises(ValidationError, match="solution components"):
        MatrixField.from_exprs("A", 1, [["u1"]], INTERIOR)


def test_nonnegative_identity_passes():
    rep = validate_nonnegative(MatrixField.constant("A", 2, 1.0, INTERIOR), PTS)
    assert rep.passed
    assert rep.details["strictly_positive_somewhere"]


def test_nonnegative_flags_negative_entry():
    f = MatrixField.constant("A", 2, [[1.0, -1.0], [-1.0, 1.0]], INTERIOR)
    rep = validate_nonnegative(f, PTS)
    assert not rep.passed
    assert any("[1][2]" in msg for msg in rep.failures)


def test_nonnegative_zero_passes_with_flag():
    rep = validate_nonnegative(MatrixField.zero("A", 1, INTERIOR), PTS)
    assert rep.passed
    assert not rep.details["strictly_positive_somewhere"]
    assert any("nowhere strictly positive" in n for n in rep.notes)
    strict = validate_nonnegative(MatrixField.zero("A", 1, INTERIOR), PTS, require_strict=True)
    assert not strict.passed


def test_psd_indefinite_fails_with_closed_form_eigenvalue():
    # [[1,2],[2,1]] has eigenvalues 1 +/- 2 = {3, -1}
    f = MatrixField.constant("A", 2, [[1.0, 2.0], [2.0, 1.0]], INTERIOR)
    rep = validate_psd(f, PTS)
    assert not rep.passed
    assert rep.details["worst_eigenvalue"] == pytest.approx(-1.0, abs=1e-12)


def test_psd_identity_positive_definite():
    rep = validate_psd(MatrixField.constant("A", 2, 1.0, INTERIOR), PTS)
    assert rep.passed
    assert rep.details["positive_definite_somewhere"]


def test_psd_rank_one_passes_never_definite():
    # [[1,1],[1,1]] has eigenvalues {2, 0}
    f = MatrixField.constant("A", 2, [[1.0, 1.0], [1.0, 1.0]], INTERIOR)
    rep = validate_psd(f, PTS)
    assert rep.passed
    assert not rep.details["positive_definite_somewhere"]


def test_psd_rejects_asymmetric_input():
    f = MatrixField.constant("A", 2, [[1.0, 0.5], [0.0, 1.0]], INTERIOR)
    with pytest.raises(ValidationError, match="asymmetric"):
        validate_psd(f, PTS)


def test_mp_integral_identity_vs_zero():
    mesh = make_unit_square(2)
    m = MatrixField.constant("M", 2, 1.0, INTERIOR)
    p = MatrixField.zero("P", 2, BOUNDARY)
    rep = validate_mp_integral(m, p, mesh)
    assert not rep.passed  # off-diagonal pairs integrate to zero
    assert len(rep.failures) == 2
    ints = np.array(rep.details["integrals"])
    assert ints[0, 0] == pytest.approx(1.0, abs=1e-12)  # the unit square has measure one


def test_mp_integral_all_ones_passes():
    mesh = make_unit_square(2)
    m = MatrixField.constant("M", 2, [[1.0, 1.0], [1.0, 1.0]], INTERIOR)
    p = MatrixField.zero("P", 2, BOUNDARY)
    assert validate_mp_integral(m, p, mesh).passed


def test_mp_integral_both_zero_fails_everywhere():
    mesh = make_unit_square(2)
    rep = validate_mp_integral(MatrixField.zero("M", 2, INTERIOR),
                               MatrixField.zero("P", 2, BOUNDARY), mesh)
    assert not rep.passed
    assert len(rep.failures) == 4


def test_asmp_clauses():
    mesh = make_unit_square(1)

    def fields(a, s, m, p):
        return (MatrixField.constant("A", 1, a, INTERIOR),
                MatrixField.constant("Sigma", 1, s, BOUNDARY),
                MatrixField.constant("M", 1, m, INTERIOR),
                MatrixField.constant("P", 1, p, BOUNDARY))

    assert validate_asmp(*fields(1, 0, 0, 1), mesh).passed
    assert validate_asmp(*fields(0, 1, 1, 0), mesh).passed  # interchanged combination
    rep = validate_asmp(*fields(0, 0, 0, 0), mesh)
    assert not rep.passed
    assert len(rep.failures) == 2  # both clauses fail


def test_spectral_decompose_diagonal():
    fac = spectral_decompose(np.diag([3.0, 1.0]))
    assert np.allclose(fac.D, [3.0, 1.0])
    assert np.allclose(np.abs(fac.Q), np.eye(2), atol=1e-13)


def test_spectral_decompose_closed_form():
    # [[2,1],[1,2]] has eigenvalues {3, 1}
    fac = spectral_decompose([[2.0, 1.0], [1.0, 2.0]])
    assert fac.D == pytest.approx([3.0, 1.0], abs=1e-12)


def test_spectral_decompose_random_psd_suite():
    rng = np.random.default_rng(42)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        g = rng.standard_normal((k, k))
        mat = g @ g.T  # PSD by construction
        fac = spectral_decompose(mat)
        assert np.abs(fac.Q.T @ fac.Q - np.eye(k)).max() <= 1e-12
        assert np.abs(fac.Q.T @ np.diag(fac.D) @ fac.Q - mat).max() <= 1e-10
        assert fac.D.min() >= -1e-10
        assert (np.diff(fac.D) <= 1e-12).all()  # descending


def test_spectral_decompose_involution():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        d = np.sort(rng.uniform(0.0, 5.0, size=k))[::-1]
        g = rng.standard_normal((k, k))
        q, _ = np.linalg.qr(g)
        mat = q.T @ np.diag(d) @ q
        fac = spectral_decompose(0.5 * (mat + mat.T))
        assert np.abs(fac.D - d).max() <= 1e-10


def test_spectral_decompose_rejects_asymmetric():
    with pytest.raises(ValidationError, match="asymmetric"):
        spectral_decompose([[1.0, 1.0], [0.0, 1.0]])


def test_lambda_extremes_examples():
    x = (0.5, 0.5)
    assert lambda_extremes(MatrixField.constant("P", 2, 1.0, BOUNDARY), x) == \
        pytest.approx((1.0, 1.0))
    lo, hi = lambda_extremes(MatrixField.constant("P", 2, [[1, 1], [1, 1]], BOUNDARY), x)
    assert (lo, hi) == pytest.approx((0.0, 2.0), abs=1e-12)
    assert lambda_extremes(MatrixField.zero("P", 2, BOUNDARY), x) == pytest.approx((0.0, 0.0))


def test_lambda_extremes_rejects_indefinite():
    f = MatrixField.constant("P", 2, [[1.0, 2.0], [2.0, 1.0]], BOUNDARY)
    with pytest.raises(ValidationError, match="semidefinite"):
        lambda_extremes(f, (0.0, 0.0))


def test_lambda_extremes_requires_boundary_support():
    with pytest.raises(ValidationError, match="boundary"):
        lambda_extremes(MatrixField.constant("P", 1, 1.0, INTERIOR), (0, 0))


def test_rayleigh_quotient_sandwich():
    # the eigenvalue extremes bound the Rayleigh quotient for any nonzero v
    rng = np.random.default_rng(11)
    fields = [
        MatrixField.constant("P", 2, [[2.0, 1.0], [1.0, 2.0]], BOUNDARY),
        MatrixField.constant("P", 3, np.diag([0.5, 1.0, 4.0]), BOUNDARY),
        MatrixField.from_exprs("P", 2, [["1 + x1^2", "x1*x2"], ["x1*x2", "1 + x2^2"]], BOUNDARY),
    ]
    for f in fields:
        for x in PTS:
            lo, hi = lambda_extremes(f, x)
            mat = f.value_at(x)
            for _ in range(20):
                v = rng.standard_normal(f.k)
                if np.linalg.norm(v) < 1e-12:
                    continue
                ratio = float(v @ mat @ v) / float(v @ v)
                assert lo - 1e-10 <= ratio <= hi + 1e-10


def test_evaluation_error_carries_entry_and_point_context():
    from steklovlab.expr import ExprEvalError
    f = MatrixField.from_exprs("A", 1, [["1/x1"]], INTERIOR)
    with pytest.raises(ExprEvalError, match=r"A\[1\]\[1\] at x="):
        validate_nonnegative(f, np.array([[0.0, 0.5]]))


def test_validation_points_follow_support():
    mesh = make_unit_square(2)
    interior = validation_points(MatrixField.zero("A", 1, INTERIOR), mesh)
    boundary = validation_points(MatrixField.zero("P", 1, BOUNDARY), mesh)
    assert interior.shape == (3 * mesh.num_triangles, 2)
    assert boundary.shape == (2 * mesh.num_boundary_edges, 2)

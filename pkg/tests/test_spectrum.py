import numpy as np
import pytest

from conftest import steklov_fields
from steklovlab import oracle
from steklovlab.assembly import assemble_gram
from steklovlab.errors import NoSpectrumError
from steklovlab.mesh import make_unit_disk, make_unit_square
from steklovlab.spectrum import (expand, hmp_kernel, parseval_check,
                                 sign_check_first, solve_eigs)
from steklovlab.weights import MatrixField


def test_disk_steklov_first_five(steklov64):
    _, _, sp = steklov64
    exact = oracle.disk_steklov_exact(5)
    assert np.abs(sp.eigenvalues[:5] - exact).max() <= 0.02
    assert sp.shift_used > 0.0  # pure Steklov S is singular, the shift kicked in


def test_disk_robin_first_five(robin64):
    _, _, sp = robin64
    exact = oracle.disk_steklov_exact(5, sigma=1.0)
    assert np.abs(sp.eigenvalues[:5] - exact).max() <= 0.05
    assert sp.shift_used == 0.0  # Robin S is positive definite, no shift needed


def test_eigenvalues_ascending_and_nonnegative(steklov64, robin64):
    for _, _, sp in (steklov64, robin64):
        assert (np.diff(sp.eigenvalues) >= -1e-12).all()
        assert (sp.eigenvalues >= -1e-10).all()


def test_orthonormality_invariants(steklov64, robin64):
    for _, gram, sp in (steklov64, robin64):
        phi = sp.eigenvectors
        b_err = np.abs(phi.T @ (gram.B @ phi) - np.eye(sp.count)).max()
        s_err = np.abs(phi.T @ (gram.S @ phi) - np.diag(sp.eigenvalues)).max()
        assert b_err <= 1e-8
        assert s_err <= 1e-6 * max(1.0, sp.eigenvalues.max())


def test_kernel_split_is_exhaustive(steklov64):
    _, gram, sp = steklov64
    assert sp.kernel_dim + sp.num_finite == gram.size


def test_shift_invariance(disk64):
    gram = assemble_gram(disk64, *steklov_fields())
    mu_a = solve_eigs(gram, count=6, shift=1.0).eigenvalues
    mu_b = solve_eigs(gram, count=6, shift=2.5).eigenvalues
    assert np.abs(mu_a - mu_b).max() <= 1e-8 * max(1.0, np.abs(mu_b).max())


def test_k2_block_diagonal_decoupling():
    # oracle: run the two scalar problems and merge their spectra
    mesh = make_unit_disk(24, 6)
    g_robin = assemble_gram(mesh, *steklov_fields(sigma=1.0, p=1.0))
    g_scaled = assemble_gram(mesh, *steklov_fields(p=2.0))
    mu1 = solve_eigs(g_robin, count=8).eigenvalues
    mu2 = solve_eigs(g_scaled, count=8).eigenvalues
    merged = oracle.decoupled_union(mu1, mu2)[:8]

    g2 = assemble_gram(
        mesh,
        MatrixField.zero("A", 2, "interior"),
        MatrixField.constant("Sigma", 2, [[1.0, 0.0], [0.0, 0.0]], "boundary"),
        MatrixField.zero("M", 2, "interior"),
        MatrixField.constant("P", 2, [[1.0, 0.0], [0.0, 2.0]], "boundary"),
    )
    sp2 = solve_eigs(g2, count=8)
    assert np.abs(sp2.eigenvalues - merged).max() <= 1e-9


def test_monotone_convergence_toward_exact():
    exact = oracle.disk_steklov_exact(5)
    errs = []
    for s, r in ((16, 4), (32, 8), (64, 16)):
        gram = assemble_gram(make_unit_disk(s, r), *steklov_fields())
        sp = solve_eigs(gram, count=5)
        errs.append(np.abs(sp.eigenvalues - exact))
    errs = np.array(errs)
    for n in range(1, 5):  # skip the exactly-zero constant mode
        assert errs[0, n] > errs[1, n] > errs[2, n]
        order = np.log2(errs[1, n] / errs[2, n])
        assert 1.5 <= order <= 2.5


def test_expand_orthonormal_coefficients(robin64):
    _, gram, sp = robin64
    c = expand(sp, gram, sp.eigenvectors[:, 0])
    want = np.zeros(sp.count)
    want[0] = 1.0
    assert np.abs(c - want).max() <= 1e-8
    c2 = expand(sp, gram, 2.0 * sp.eigenvectors[:, 0] + 3.0 * sp.eigenvectors[:, 1])
    assert c2[0] == pytest.approx(2.0, abs=1e-8)
    assert c2[1] == pytest.approx(3.0, abs=1e-8)
    assert np.abs(c2[2:]).max() <= 1e-8


def test_expand_reconstruction_in_b_norm(robin64):
    _, gram, sp = robin64
    rng = np.random.default_rng(23)
    for _ in range(10):
        u = sp.eigenvectors @ rng.standard_normal(sp.count)
        c = expand(sp, gram, u)
        diff = u - sp.eigenvectors @ c
        b_norm = np.sqrt(max(diff @ (gram.B @ diff), 0.0))
        assert b_norm <= 1e-8


def test_parseval_identities(robin64):
    _, gram, sp = robin64
    res_s, res_b = parseval_check(sp, gram, sp.eigenvectors[:, 0])
    assert res_s <= 1e-8 and res_b <= 1e-8
    phi1 = sp.eigenvectors[:, 0]
    assert phi1 @ (gram.S @ phi1) == pytest.approx(sp.eigenvalues[0], rel=1e-10)
    assert parseval_check(sp, gram, np.zeros(gram.size)) == (0.0, 0.0)
    rng = np.random.default_rng(29)
    for _ in range(10):
        u = sp.eigenvectors @ rng.standard_normal(sp.count)
        res_s, res_b = parseval_check(sp, gram, u)
        assert res_s <= 1e-8 and res_b <= 1e-8


def test_hmp_kernel_full_interior_mass():
    mesh = make_unit_square(2)
    gram = assemble_gram(mesh, *steklov_fields(m=1.0, p=0.0))
    _, dim = hmp_kernel(gram)
    assert dim == 0


def test_hmp_kernel_boundary_only():
    # 3x3 grid of nodes: only the center node carries no boundary mass
    mesh = make_unit_square(2)
    for k in (1, 2):
        gram = assemble_gram(mesh, *steklov_fields(k=k, p=1.0))
        basis, dim = hmp_kernel(gram)
        assert dim == k * 1
        assert np.abs(gram.B @ basis).max() <= 1e-12


def test_hmp_kernel_everything():
    mesh = make_unit_square(2)
    gram = assemble_gram(mesh, *steklov_fields(p=0.0))
    basis, dim = hmp_kernel(gram)
    assert dim == gram.size
    assert np.array_equal(basis, np.eye(gram.size))


def test_zero_b_has_no_spectrum():
    mesh = make_unit_square(2)
    gram = assemble_gram(mesh, *steklov_fields(a=1.0, p=0.0))
    with pytest.raises(NoSpectrumError):
        solve_eigs(gram, count=1)


def test_shared_kernel_fails_even_after_shift():
    # P = [[1,-1],[-1,1]] annihilates equal-component constants, which also
    # span the kernel of the shift-free S; no shift can make S + sigma*B
    # definite, and the failure must surface as a numerical error
    from steklovlab.errors import NumericalError
    mesh = make_unit_square(2)
    gram = assemble_gram(
        mesh,
        MatrixField.zero("A", 2, "interior"),
        MatrixField.zero("Sigma", 2, "boundary"),
        MatrixField.zero("M", 2, "interior"),
        MatrixField.constant("P", 2, [[1.0, -1.0], [-1.0, 1.0]], "boundary"),
    )
    with pytest.raises(NumericalError, match="singular"):
        solve_eigs(gram, count=1)


def test_count_beyond_finite_rejected():
    mesh = make_unit_square(1)
    gram = assemble_gram(mesh, *steklov_fields(p=1.0))
    with pytest.raises(ValueError, match="only"):
        solve_eigs(gram, count=gram.size + 1)


def test_sign_check_first_one_signed(robin64):
    mesh, _, sp = robin64
    check = sign_check_first(sp, mesh)
    assert check.verdict == "one-signed"
    assert check.passed


def test_sign_check_detects_sign_change(robin64):
    # swap in the second eigenfunction: on the disk it behaves like cos(theta)
    mesh, gram, sp = robin64
    from steklovlab.spectrum import Spectrum
    fake = Spectrum(
        eigenvalues=np.array([sp.eigenvalues[1], sp.eigenvalues[3]]),
        eigenvectors=sp.eigenvectors[:, [1, 3]],
        kernel_dim=sp.kernel_dim, num_finite=sp.num_finite,
        shift_used=sp.shift_used)
    check = sign_check_first(fake, mesh)
    assert check.verdict == "sign-change"


def test_sign_check_inconclusive_on_cluster(robin64):
    # mu_2 = mu_3 on the disk: the gap tolerance flags the pair as multiple
    mesh, gram, sp = robin64
    from steklovlab.spectrum import Spectrum
    fake = Spectrum(
        eigenvalues=sp.eigenvalues[1:3], eigenvectors=sp.eigenvectors[:, 1:3],
        kernel_dim=sp.kernel_dim, num_finite=sp.num_finite, shift_used=sp.shift_used)
    check = sign_check_first(fake, mesh)
    assert check.verdict == "inconclusive: multiple"


def test_sign_check_two_components():
    # first mode of the decoupled pair is the constant in component 2 only;
    # the near-zero component 1 counts as one-signed
    mesh = make_unit_disk(16, 4)
    gram = assemble_gram(
        mesh,
        MatrixField.zero("A", 2, "interior"),
        MatrixField.constant("Sigma", 2, [[1.0, 0.0], [0.0, 0.0]], "boundary"),
        MatrixField.zero("M", 2, "interior"),
        MatrixField.constant("P", 2, [[1.0, 0.0], [0.0, 2.0]], "boundary"),
    )
    sp = solve_eigs(gram, count=3)
    check = sign_check_first(sp, mesh)
    assert check.verdict == "one-signed"
    assert len(check.per_component) == 2


def test_zero_mode_reported_as_ordinary_eigenvalue(steklov64):
    # the pure Steklov problem keeps its zero eigenvalue with the constant mode
    _, gram, sp = steklov64
    assert abs(sp.eigenvalues[0]) <= 1e-9
    phi0 = sp.eigenvectors[:, 0]
    assert np.abs(phi0 - phi0.mean()).max() <= 1e-7 * abs(phi0.mean())

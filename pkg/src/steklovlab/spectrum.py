"""Discrete generalized eigensolve S u = mu B u with singular-mass deflation.

The weight Gram matrix B is typically singular (boundary-supported mass),
so the pencil is reduced by congruence: factor the (possibly shifted)
left-hand matrix S + sigma*B = L L^T, then eigen-decompose
C = L^{-1} B L^{-T}.  C has the same rank as B, so the reduction is done
on the B-range factor only: with B = Ghat^T Ghat (from the dense
eigen-decomposition of B restricted to its support), the nonzero spectrum
of C equals that of the small matrix W = (L^{-1} Ghat^T)^T (L^{-1} Ghat^T).
Eigenvalues theta of W below the kernel threshold are counted into the
discrete zero-norm subspace of B; the rest map to mu = 1/theta - sigma.

The dense symmetric eigensolves are delegated to LAPACK's Householder
tridiagonalization + implicit-shift iteration via numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import GramPair
from .errors import NoSpectrumError, NumericalError
from .mesh import Mesh

__all__ = ["Spectrum", "solve_eigs", "expand", "parseval_check", "hmp_kernel",
           "sign_check_first", "SignCheck"]

KERNEL_THRESHOLD = 1e-10
B_RANK_TOL = 1e-14
EXPAND_TOL = 1e-8
SIMPLE_GAP_RTOL = 1e-8
SIGN_TOL = 1e-10
AUTO_SHIFT = 1.0
# Cholesky pivot ratio below which the matrix counts as numerically singular
PIVOT_RATIO_TOL = 1e-7


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with B-orthonormal eigenvectors.

    ``kernel_dim`` is the dimension of the discrete zero-norm subspace of
    B (eigenvalue count plus kernel dimension add up to N), ``num_finite``
    the total number of finite eigenvalues the pencil owns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_dim: int
    num_finite: int
    shift_used: float
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        vec = np.asarray(self.eigenvectors, dtype=float)
        ev.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def count(self) -> int:
        return self.eigenvalues.shape[0]


def _try_cholesky(dense: np.ndarray):
    """Lower Cholesky factor, or None when numerically singular."""
    try:
        low = sla.cholesky(dense, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    d = np.diagonal(low)
    if d.min() <= PIVOT_RATIO_TOL * d.max():
        return None
    return low


def _b_range_factor(b_csr, rank_tol: float):
    """Ghat with B = Ghat^T Ghat, restricted to B's support columns.

    Returns (Ghat, support) where Ghat has shape (rank, N).
    """
    coo = b_csr.tocoo()
    mask = coo.data != 0.0
    support = np.unique(np.concatenate([coo.row[mask], coo.col[mask]]))
    if support.size == 0:
        raise NoSpectrumError("the (M,P) Gram matrix vanishes; no eigenproblem")
    bjj = b_csr[support][:, support].toarray()
    omega, v = np.linalg.eigh(bjj)
    omega_max = omega[-1]
    if omega_max <= 0.0:
        raise NoSpectrumError("the (M,P) Gram matrix is not positive semidefinite with positive part")
    keep = omega > rank_tol * omega_max
    g_small = (v[:, keep] * np.sqrt(omega[keep])).T  # (rank, |support|)
    n = b_csr.shape[0]
    ghat = np.zeros((g_small.shape[0], n))
    ghat[:, support] = g_small
    return ghat, support


def solve_eigs(gram: GramPair, count: int, shift="auto",
               kernel_threshold: float = KERNEL_THRESHOLD) -> Spectrum:
    """Lowest ``count`` eigenpairs of the pencil (S, B).

    ``shift='auto'`` factors S directly and falls back to S + B when the
    factorization detects a singular S (the zero-eigenvalue case); an
    explicit nonnegative ``shift`` value is used as given.  Eigenvectors
    are returned B-orthonormal and S-orthogonal, eigenvalues ascending.
    """
    if count < 1:
        raise ValueError(f"solve_eigs: count must be >= 1, got {count}")
    n = gram.size
    s_dense = gram.S.toarray()

    if shift == "auto":
        sigma = 0.0
        low = _try_cholesky(s_dense)
        if low is None:
            sigma = AUTO_SHIFT
            low = _try_cholesky(s_dense + sigma * gram.B.toarray())
    else:
        sigma = float(shift)
        if sigma < 0.0:
            raise ValueError(f"solve_eigs: shift must be nonnegative, got {sigma}")
        shifted = s_dense + sigma * gram.B.toarray() if sigma != 0.0 else s_dense
        low = _try_cholesky(shifted)
    if low is None:
        raise NumericalError(
            "solve_eigs: S + shift*B is numerically singular; the combined "
            "definiteness assumption likely fails for these weights")

    ghat, _ = _b_range_factor(gram.B, B_RANK_TOL)
    y = sla.solve_triangular(low, ghat.T, lower=True, check_finite=False)
    w = y.T @ y
    theta, wvec = np.linalg.eigh(w)
    theta = np.maximum(theta, 0.0)
    theta_max = theta[-1]
    if theta_max <= 0.0:
        raise NoSpectrumError("the (M,P) Gram matrix vanishes on the factor range")

    finite = np.nonzero(theta >= kernel_threshold * theta_max)[0]
    num_finite = finite.size
    kernel_dim = n - num_finite
    if count > num_finite:
        raise ValueError(
            f"solve_eigs: requested {count} eigenpairs but only {num_finite} exist "
            f"(kernel dimension {kernel_dim})")

    picked = finite[::-1][:count]  # descending theta = ascending mu
    mu = 1.0 / theta[picked] - sigma
    coeff = wvec[:, picked] / theta[picked]
    phi = sla.solve_triangular(low, y @ coeff, lower=True, trans="T", check_finite=False)

    # deterministic sign: largest-magnitude entry of each column positive
    lead = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[lead, np.arange(phi.shape[1])])
    signs[signs == 0.0] = 1.0
    phi = phi * signs

    bphi = gram.B @ phi
    sphi = gram.S @ phi
    b_ortho = np.abs(phi.T @ bphi - np.eye(count)).max()
    s_diag = np.abs(phi.T @ sphi - np.diag(mu)).max()
    tolerances = {
        "kernel_threshold": kernel_threshold,
        "b_orthonormality": float(b_ortho),
        "s_diagonalization": float(s_diag),
    }
    return Spectrum(eigenvalues=mu, eigenvectors=phi, kernel_dim=kernel_dim,
                    num_finite=num_finite, shift_used=sigma, tolerances=tolerances)


def expand(sp: Spectrum, gram: GramPair, u: np.ndarray, check: bool = True) -> np.ndarray:
    """Expansion coefficients of ``u`` over the computed eigenvectors.

    Coefficients come from the (M,P) inner product, c_j = phi_j^T B u; for
    positive eigenvalues the dual formula c_j = phi_j^T S u / mu_j must
    agree to 1e-8 (the two equivalent coefficient representations).
    """
    u = np.asarray(u, dtype=float)
    c = sp.eigenvectors.T @ (gram.B @ u)
    positive = sp.eigenvalues > 1e-12 * max(1.0, abs(sp.eigenvalues[-1]))
    if positive.any():
        c_dual = (sp.eigenvectors[:, positive].T @ (gram.S @ u)) / sp.eigenvalues[positive]
        resid = np.abs(c[positive] - c_dual).max() / max(1.0, np.abs(c).max())
        if check and resid > EXPAND_TOL:
            raise NumericalError(
                f"expand: the two coefficient formulas disagree by {resid:.3e} "
                f"(is u inside the positive-norm subspace?)")
    return c


def parseval_check(sp: Spectrum, gram: GramPair, u: np.ndarray) -> tuple[float, float]:
    """Relative residuals of the two discrete Parseval identities.

    Returns ``(|u^T S u - sum mu_j c_j^2|, |u^T B u - sum c_j^2|)`` scaled
    by the quadratic forms (floored at 1), for ``u`` in the span of the
    computed eigenvectors.
    """
    u = np.asarray(u, dtype=float)
    c = sp.eigenvectors.T @ (gram.B @ u)
    s_quad = float(u @ (gram.S @ u))
    b_quad = float(u @ (gram.B @ u))
    res_s = abs(s_quad - float(sp.eigenvalues @ c**2)) / max(1.0, abs(s_quad))
    res_b = abs(b_quad - float(c @ c)) / max(1.0, abs(b_quad))
    return res_s, res_b


def hmp_kernel(gram: GramPair, rank_tol: float = B_RANK_TOL):
    """Orthonormal basis and dimension of the zero-norm subspace {u : u^T B u = 0}.

    Discretely this is the null space of B: unit vectors on nodes carrying
    no weight mass, plus null directions of B restricted to its support.
    """
    n = gram.size
    coo = gram.B.tocoo()
    mask = coo.data != 0.0
    if not mask.any():
        return np.eye(n), n
    support = np.unique(np.concatenate([coo.row[mask], coo.col[mask]]))
    free = np.setdiff1d(np.arange(n), support)
    bjj = gram.B[support][:, support].toarray()
    omega, v = np.linalg.eigh(bjj)
    omega_max = max(omega[-1], 0.0)
    null_cols = v[:, omega <= rank_tol * max(omega_max, 1e-300)]
    dim = free.size + null_cols.shape[1]
    basis = np.zeros((n, dim))
    basis[free, np.arange(free.size)] = 1.0
    basis[np.ix_(support, free.size + np.arange(null_cols.shape[1]))] = null_cols
    return basis, dim


@dataclass(frozen=True)
class SignCheck:
    """Outcome of the first-eigenfunction sign inspection."""

    verdict: str  # "one-signed" | "sign-change" | "inconclusive: multiple"
    per_component: tuple

    @property
    def passed(self) -> bool:
        return self.verdict == "one-signed"


def sign_check_first(sp: Spectrum, mesh: Mesh) -> SignCheck:
    """Check that the first eigenfunction does not change sign.

    Only meaningful when the lowest eigenvalue is numerically simple; a
    gap below 1e-8 relative to mu_2 yields the inconclusive verdict.
    Componentwise one-signedness allows |values| up to 1e-10 times the
    sup norm on the opposite side.
    """
    if sp.count < 2:
        raise ValueError("sign_check_first: need at least two eigenvalues to assess simplicity")
    mu1, mu2 = float(sp.eigenvalues[0]), float(sp.eigenvalues[1])
    k = sp.eigenvectors.shape[0] // mesh.num_vertices
    phi1 = sp.eigenvectors[:, 0].reshape(mesh.num_vertices, k)
    sup = np.abs(phi1).max()
    per = []
    for a in range(k):
        vals = phi1[:, a]
        per.append({
            "component": a + 1,
            "min": float(vals.min()),
            "max": float(vals.max()),
            "one_signed": bool(vals.min() >= -SIGN_TOL * sup or vals.max() <= SIGN_TOL * sup),
        })
    if mu2 - mu1 <= SIMPLE_GAP_RTOL * max(abs(mu2), 1e-300):
        return SignCheck(verdict="inconclusive: multiple", per_component=tuple(per))
    verdict = "one-signed" if all(p["one_signed"] for p in per) else "sign-change"
    return SignCheck(verdict=verdict, per_component=tuple(per))

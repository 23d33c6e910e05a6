"""Nonresonance certificates for a spectral gap.

Certifies the sandwich conditions on pointwise slope bounds alpha, beta
between two consecutive distinct eigenvalues, together with the strict
integral conditions on the adjacent eigenspaces: the Gram matrix of
(alpha - mu_j) over the lower eigenspace and of (mu_{j+1} - beta) over the
upper eigenspace must both be positive definite.  The bounds may touch the
eigenvalues on parts of the boundary and still certify, which is exactly
the nonuniform character of the conditions.

The integral condition is applied to the lower eigenspace with alpha and
to the upper eigenspace with beta (the pairing the a priori estimate
actually uses).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as _expr
from .assembly import BoundaryNonlinearity, GramPair
from .errors import ResonantClusterError, ValidationError
from .mesh import Mesh
from .quadrature import EDGE_T, boundary_quadrature
from .spectrum import Spectrum
from .weights import MatrixField, lambda_extremes

__all__ = ["NonresonanceCertificate", "SlopeEnvelope", "build_alpha_beta",
           "certify", "slope_scan", "boundary_traces"]

MARGIN_TOL = -1e-10
GRAM_EIG_TOL = 1e-12
CLUSTER_RTOL = 1e-8


@dataclass(frozen=True)
class NonresonanceCertificate:
    """Verdict and margins for the gap between eigenvalues j and j+1."""

    j: int
    mu_lower: float
    mu_upper: float
    alpha_desc: str
    beta_desc: str
    margin_alpha_above_lower: float   # min over boundary points of alpha - mu_j
    margin_beta_above_alpha: float    # min of beta - alpha
    margin_upper_above_beta: float    # min of mu_{j+1} - beta
    gram_min_eig_lower: float         # E_j Gram of (alpha - mu_j)
    gram_min_eig_upper: float         # E_{j+1} Gram of (mu_{j+1} - beta)
    cluster_lower: tuple
    cluster_upper: tuple
    passed: bool
    reasons: tuple

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "mu_lower": self.mu_lower,
            "mu_upper": self.mu_upper,
            "alpha": self.alpha_desc,
            "beta": self.beta_desc,
            "margins": {
                "alpha_above_lower": self.margin_alpha_above_lower,
                "beta_above_alpha": self.margin_beta_above_alpha,
                "upper_above_beta": self.margin_upper_above_beta,
            },
            "gram_min_eigenvalues": {
                "lower_eigenspace": self.gram_min_eig_lower,
                "upper_eigenspace": self.gram_min_eig_upper,
            },
            "clusters": {
                "lower": list(self.cluster_lower),
                "upper": list(self.cluster_upper),
            },
            "verdict": "PASS" if self.passed else "FAIL",
            "reasons": list(self.reasons),
        }


def build_alpha_beta(a: float, b: float, pf: MatrixField, mesh: Mesh):
    """Pointwise slope bounds from the boundary weight's eigenvalue range.

    ``alpha(x) = a * lambda_min(P(x))`` and ``beta(x) = b * lambda_max(P(x))``
    sampled at the boundary quadrature points (edge-major order).
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"build_alpha_beta: constants must be positive, got a={a}, b={b}")
    pts, _, _ = boundary_quadrature(mesh)
    alpha = np.empty(pts.shape[0])
    beta = np.empty(pts.shape[0])
    for i, x in enumerate(pts):
        lo, hi = lambda_extremes(pf, x)
        alpha[i] = a * lo
        beta[i] = b * hi
    return alpha, beta


def _sample_bound(bound, pts, k: int, name: str) -> tuple[np.ndarray, str]:
    if isinstance(bound, (int, float, np.floating, np.integer)):
        return np.full(pts.shape[0], float(bound)), repr(float(bound))
    if isinstance(bound, str):
        node = _expr.parse(bound, k)
        if _expr.uses_u(node):
            raise ValidationError(f"{name}: slope bounds must not reference solution components")
        return np.array([_expr.evaluate(node, x=p) for p in pts]), bound
    if isinstance(bound, _expr.Expr):
        return np.array([_expr.evaluate(bound, x=p) for p in pts]), _expr.pretty(bound)
    arr = np.asarray(bound, dtype=float).ravel()
    if arr.shape[0] != pts.shape[0]:
        raise ValidationError(
            f"{name}: sampled bound has {arr.shape[0]} values but the mesh has "
            f"{pts.shape[0]} boundary quadrature points")
    return arr, f"<sampled array of {arr.shape[0]} values>"


def boundary_traces(sp_vectors: np.ndarray, mesh: Mesh, k: int) -> np.ndarray:
    """Eigenvector traces at the boundary quadrature points.

    Returns shape (npts, k, ncols) aligned with
    :func:`steklovlab.quadrature.boundary_quadrature` ordering.
    """
    nv = mesh.num_vertices
    cols = sp_vectors.reshape(nv, k, -1)
    e = mesh.boundary_edges
    va = cols[e[:, 0]]  # (nbe, k, m)
    vb = cols[e[:, 1]]
    out = np.stack([(1.0 - t) * va + t * vb for t in EDGE_T], axis=1)  # (nbe, 2, k, m)
    return out.reshape(-1, k, cols.shape[2])


def _cluster(ev: np.ndarray, idx: int, rtol: float) -> tuple[int, int]:
    """Half-open index range of the eigenvalue cluster containing ev[idx]."""
    mu = ev[idx]
    tol = rtol * max(1.0, abs(mu))
    lo = idx
    while lo > 0 and abs(ev[lo - 1] - mu) <= tol:
        lo -= 1
    hi = idx + 1
    while hi < ev.size and abs(ev[hi] - mu) <= tol:
        hi += 1
    return lo, hi


def certify(sp: Spectrum, gram: GramPair, mesh: Mesh, alpha, beta, j: int,
            cluster_rtol: float = CLUSTER_RTOL) -> NonresonanceCertificate:
    """Certify the nonresonance conditions at the gap (mu_j, mu_{j+1}).

    ``j`` is 1-based into the ascending eigenvalue list.  ``alpha`` and
    ``beta`` may be constants, x-only expression strings, or arrays
    sampled at the boundary quadrature points.  PASS requires the three
    pointwise sandwich margins to be >= -1e-10 and both eigenspace Gram
    matrices to be positive definite (smallest eigenvalue > 1e-12).
    """
    ev = sp.eigenvalues
    if j < 1 or j + 1 > ev.size:
        raise ValueError(f"certify: gap index {j} needs eigenvalues j and j+1, have {ev.size}")
    mu_lo, mu_hi = float(ev[j - 1]), float(ev[j])
    if mu_hi - mu_lo <= cluster_rtol * max(1.0, abs(mu_hi)):
        raise ResonantClusterError(
            f"certify: resonant cluster, mu_{j} = {mu_lo} and mu_{j + 1} = {mu_hi} coincide "
            f"within relative tolerance {cluster_rtol:g}")

    lo_range = _cluster(ev, j - 1, cluster_rtol)
    hi_range = _cluster(ev, j, cluster_rtol)
    if hi_range[1] == ev.size and ev.size < sp.num_finite:
        raise ValueError(
            f"certify: the eigenvalue cluster at mu_{j + 1} may extend past the {ev.size} "
            f"computed eigenvalues; compute more")

    pts, w, _ = boundary_quadrature(mesh)
    alpha_q, alpha_desc = _sample_bound(alpha, pts, gram.k, "alpha")
    beta_q, beta_desc = _sample_bound(beta, pts, gram.k, "beta")

    m_alpha = float((alpha_q - mu_lo).min())
    m_gap = float((beta_q - alpha_q).min())
    m_beta = float((mu_hi - beta_q).min())

    traces = boundary_traces(sp.eigenvectors, mesh, gram.k)
    tr_lo = traces[:, :, lo_range[0]:lo_range[1]]
    tr_hi = traces[:, :, hi_range[0]:hi_range[1]]
    gram_lo = np.einsum("q,q,qkp,qkr->pr", w, alpha_q - mu_lo, tr_lo, tr_lo)
    gram_hi = np.einsum("q,q,qkp,qkr->pr", w, mu_hi - beta_q, tr_hi, tr_hi)
    eig_lo = float(np.linalg.eigvalsh(0.5 * (gram_lo + gram_lo.T)).min())
    eig_hi = float(np.linalg.eigvalsh(0.5 * (gram_hi + gram_hi.T)).min())

    reasons = []
    if m_alpha < MARGIN_TOL:
        reasons.append(f"alpha dips {-m_alpha:.3e} below mu_{j} on the boundary")
    if m_gap < MARGIN_TOL:
        reasons.append(f"beta dips {-m_gap:.3e} below alpha on the boundary")
    if m_beta < MARGIN_TOL:
        reasons.append(f"beta exceeds mu_{j + 1} by {-m_beta:.3e} on the boundary")
    if eig_lo <= GRAM_EIG_TOL:
        reasons.append(
            f"integral condition fails on the lower eigenspace: Gram min eigenvalue {eig_lo:.3e}")
    if eig_hi <= GRAM_EIG_TOL:
        reasons.append(
            f"integral condition fails on the upper eigenspace: Gram min eigenvalue {eig_hi:.3e}")

    return NonresonanceCertificate(
        j=j, mu_lower=mu_lo, mu_upper=mu_hi,
        alpha_desc=alpha_desc, beta_desc=beta_desc,
        margin_alpha_above_lower=m_alpha,
        margin_beta_above_alpha=m_gap,
        margin_upper_above_beta=m_beta,
        gram_min_eig_lower=eig_lo,
        gram_min_eig_upper=eig_hi,
        cluster_lower=lo_range,
        cluster_upper=hi_range,
        passed=not reasons,
        reasons=tuple(reasons),
    )


@dataclass(frozen=True)
class SlopeEnvelope:
    """Empirical slope range of a boundary nonlinearity at finite radii.

    A diagnostic only: finite radii cannot witness the asymptotic lower
    and upper slope limits, so this never certifies anything.
    """

    radii: np.ndarray
    points: np.ndarray
    lo: np.ndarray        # per boundary quadrature point, at the largest radius
    hi: np.ndarray
    trend_lo: np.ndarray  # global min/max per radius
    trend_hi: np.ndarray
    note: str = "empirical finite-radius diagnostic; not a certificate of asymptotic slopes"


def slope_scan(g, mesh: Mesh, radii, directions: int = 8, k: int | None = None,
               seed: int = 0) -> SlopeEnvelope:
    """Scan <g(x, r d), d r>/r^2 over directions and growing radii.

    Directions include the positive and negative coordinate axes plus
    seeded random unit vectors up to ``directions`` total.
    """
    gnl = g if isinstance(g, BoundaryNonlinearity) else BoundaryNonlinearity.parse(g, k)
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or (radii <= 0).any() or (np.diff(radii) <= 0).any():
        raise ValueError("slope_scan: radii must be positive and increasing")

    kk = gnl.k
    dirs = [np.eye(kk)[a] * s for a in range(kk) for s in (1.0, -1.0)]
    rng = np.random.default_rng(seed)
    while len(dirs) < directions:
        d = rng.standard_normal(kk)
        nrm = np.linalg.norm(d)
        if nrm > 1e-8:
            dirs.append(d / nrm)
    dirs = np.array(dirs[:max(directions, len(dirs))])

    pts, _, _ = boundary_quadrature(mesh)
    ratios = np.empty((radii.size, pts.shape[0], dirs.shape[0]))
    for ri, r in enumerate(radii):
        for qi, x in enumerate(pts):
            for di, d in enumerate(dirs):
                u = r * d
                gv = gnl.value(x, u)
                ratios[ri, qi, di] = float(gv @ u) / (r * r)

    return SlopeEnvelope(
        radii=radii,
        points=pts,
        lo=ratios[-1].min(axis=1),
        hi=ratios[-1].max(axis=1),
        trend_lo=ratios.min(axis=(1, 2)),
        trend_hi=ratios.max(axis=(1, 2)),
    )

"""Independent references used by tests and the validate subcommand.

Everything here is derived from closed-form analysis or from iteration
schemes deliberately different from the production solvers:

* exact Steklov/Robin spectra of the unit disk by separation of variables
  (harmonic r^n cos(n t), r^n sin(n t) has normal derivative n u on the
  unit circle, so the eigenvalues are sigma + n with multiplicity two for
  n >= 1 and the constant mode at sigma);
* sorted merges for block-diagonal component decoupling;
* a registry of manufactured solutions with self-checking exact data;
* a damped Picard fixed-point solver as the independent counterpart of
  the Newton continuation.

Nothing in the production modules imports this one; oracle data reaches
the solvers only through test comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import BoundaryNonlinearity, GramPair, assemble_boundary_load
from .errors import DeltaResonanceError, NumericalError
from .mesh import Mesh
from .weights import BOUNDARY, INTERIOR, MatrixField

__all__ = ["OracleCase", "disk_steklov_exact", "decoupled_union",
           "manufactured_case", "manufactured_ids", "damped_picard_solve",
           "edge_normal_data"]

SELF_CHECK_TOL = 1e-12
_FD_H = 0.05  # exact for the quadratic registry solutions, roundoff ~1e-14


def disk_steklov_exact(n_modes: int, sigma: float = 0.0) -> np.ndarray:
    """First ``n_modes`` eigenvalues of du/dn + sigma u = mu u on the unit disk.

    sigma, sigma+1, sigma+1, sigma+2, sigma+2, ... (each positive mode is
    doubled by the cos/sin pair).
    """
    if n_modes < 1:
        raise ValueError(f"disk_steklov_exact: n_modes must be >= 1, got {n_modes}")
    vals = [sigma]
    n = 1
    while len(vals) < n_modes:
        vals.extend([sigma + n, sigma + n])
        n += 1
    return np.array(vals[:n_modes])


def decoupled_union(spec1, spec2) -> np.ndarray:
    """Sorted merge of two ascending eigenvalue lists."""
    a = np.asarray(spec1, dtype=float)
    b = np.asarray(spec2, dtype=float)
    for name, arr in (("spec1", a), ("spec2", b)):
        if arr.size > 1 and (np.diff(arr) < 0).any():
            raise ValueError(f"decoupled_union: {name} is not ascending")
    return np.sort(np.concatenate([a, b]), kind="stable")


@dataclass(frozen=True)
class OracleCase:
    """A manufactured problem with exact solution and analytic boundary data.

    ``exact`` maps a point to the k solution values, ``exact_gradient`` to
    the k gradients; ``g_sources`` are the boundary nonlinearity components
    reproducing the solution at the registered ``delta``.  ``tolerance``
    records the acceptance guidance (dominated by the polygon-versus-disk
    gap, which is absorbed here rather than corrected).
    """

    identifier: str
    k: int
    weight_fields: dict
    g_sources: tuple
    delta: float
    exact: tuple
    exact_gradient: tuple
    tolerance: dict
    notes: str

    def nonlinearity(self) -> BoundaryNonlinearity:
        return BoundaryNonlinearity.parse(self.g_sources, self.k)

    def exact_vector(self, mesh: Mesh) -> np.ndarray:
        """Nodal interpolant of the exact solution."""
        out = np.empty(mesh.num_vertices * self.k)
        for v, xy in enumerate(mesh.vertices):
            for a in range(self.k):
                out[v * self.k + a] = self.exact[a](xy)
        return out

    def self_check(self) -> float:
        """Max |Laplacian| of the exact solution over sample points.

        Uses exact-for-quadratics central second differences; every
        registered solution is harmonic, so this must sit at roundoff.
        """
        rng = np.random.default_rng(20240811)
        worst = 0.0
        for _ in range(25):
            x = rng.uniform(-0.9, 0.9, size=2)
            for w in self.exact:
                lap = (
                    w((x[0] + _FD_H, x[1])) + w((x[0] - _FD_H, x[1]))
                    + w((x[0], x[1] + _FD_H)) + w((x[0], x[1] - _FD_H))
                    - 4.0 * w(x)
                ) / (_FD_H * _FD_H)
                worst = max(worst, abs(lap))
        return worst


def _saddle(x):
    return x[0] * x[0] - x[1] * x[1]


def _saddle_grad(x):
    return np.array([2.0 * x[0], -2.0 * x[1]])


def _cross(x):
    return x[0] * x[1]


def _cross_grad(x):
    return np.array([x[1], x[0]])


# boundary data uses the radial direction x/|x| for the normal derivative,
# which is exact on the circle and agrees with the polygon edge normal at
# edge midpoints; the residual boundary-data gap is part of the documented
# polygon tolerance
_SADDLE_DN = "2*(x1^2 - x2^2)/sqrt(x1^2 + x2^2)"
_CROSS_DN = "2*x1*x2/sqrt(x1^2 + x2^2)"


def _registry() -> dict:
    cases = {}

    delta = 1.5  # midpoint of the first Robin disk gap (1, 2)
    cases["harmonic-saddle-robin-disk"] = OracleCase(
        identifier="harmonic-saddle-robin-disk",
        k=1,
        weight_fields={
            "A": MatrixField.zero("A", 1, INTERIOR),
            "Sigma": MatrixField.constant("Sigma", 1, 1.0, BOUNDARY),
            "M": MatrixField.zero("M", 1, INTERIOR),
            "P": MatrixField.constant("P", 1, 1.0, BOUNDARY),
        },
        g_sources=(f"{_SADDLE_DN} + (x1^2 - x2^2) + {delta}*(u1 - (x1^2 - x2^2))",),
        delta=delta,
        exact=(_saddle,),
        exact_gradient=(_saddle_grad,),
        tolerance={"trace_rel_l2": 2e-2, "mesh": "unit disk, sectors=64, rings=16"},
        notes="harmonic saddle with Robin boundary term; slope at the gap midpoint",
    )

    cases["decoupled-saddle-pair"] = OracleCase(
        identifier="decoupled-saddle-pair",
        k=2,
        weight_fields={
            "A": MatrixField.zero("A", 2, INTERIOR),
            "Sigma": MatrixField.constant("Sigma", 2, 1.0, BOUNDARY),
            "M": MatrixField.zero("M", 2, INTERIOR),
            "P": MatrixField.constant("P", 2, 1.0, BOUNDARY),
        },
        g_sources=(
            f"{_SADDLE_DN} + (x1^2 - x2^2) + {delta}*(u1 - (x1^2 - x2^2))",
            f"{_CROSS_DN} + x1*x2 + {delta}*(u2 - x1*x2)",
        ),
        delta=delta,
        exact=(_saddle, _cross),
        exact_gradient=(_saddle_grad, _cross_grad),
        tolerance={"trace_rel_l2": 2e-2, "mesh": "unit disk, sectors=64, rings=16"},
        notes="two independent scalar manufactured problems in one 2-component system",
    )
    return cases


_CASES = _registry()


def manufactured_ids() -> list[str]:
    return sorted(_CASES)


def manufactured_case(identifier: str) -> OracleCase:
    """Fetch a registered manufactured case by id."""
    try:
        return _CASES[identifier]
    except KeyError:
        raise KeyError(
            f"unknown manufactured case {identifier!r}; known: {manufactured_ids()}") from None


def edge_normal_data(case: OracleCase, mesh: Mesh) -> np.ndarray:
    """Exact du/dn of the exact solution on each polygon edge's Gauss points.

    Uses the true outward edge normal of the counterclockwise boundary,
    shape (n_boundary_points, k) in boundary-quadrature order.  Tests use
    this to separate discretization error from boundary-data error.
    """
    from .quadrature import EDGE_T
    e = mesh.boundary_edges
    a = mesh.vertices[e[:, 0]]
    b = mesh.vertices[e[:, 1]]
    d = b - a
    lengths = np.linalg.norm(d, axis=1)
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    out = np.empty((e.shape[0], 2, case.k))
    for ei in range(e.shape[0]):
        for q, t in enumerate(EDGE_T):
            x = a[ei] + t * d[ei]
            for comp in range(case.k):
                out[ei, q, comp] = float(case.exact_gradient[comp](x) @ normals[ei])
    return out.reshape(-1, case.k)


def damped_picard_solve(gram: GramPair, g, mesh: Mesh, delta: float,
                        damping: float = 0.5, tol: float = 1e-12,
                        maxit: int = 2000) -> np.ndarray:
    """Damped fixed-point iteration U <- (1-w) U + w K(G(U) - delta B_P U).

    The reference counterpart of the Newton continuation: same discrete
    operators, entirely different iteration.  Converges for slopes strictly
    inside the gap around ``delta``; raises after ``maxit`` sweeps.
    """
    gnl = g if isinstance(g, BoundaryNonlinearity) else BoundaryNonlinearity.parse(g, gram.k)
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damped_picard_solve: damping must be in (0, 1], got {damping}")
    lu = spla.splu((gram.S - delta * gram.B_P).tocsc())
    diag = np.abs(lu.U.diagonal())
    if diag.size and diag.min() <= 1e-12 * diag.max():
        raise DeltaResonanceError(f"damped_picard_solve: delta={delta} is resonant")
    u = np.zeros(gram.size)
    for _ in range(maxit):
        rhs = assemble_boundary_load(mesh, gnl, u) - delta * (gram.B_P @ u)
        u_next = (1.0 - damping) * u + damping * lu.solve(rhs)
        step = np.linalg.norm(u_next - u)
        u = u_next
        if step <= tol * (1.0 + np.linalg.norm(u)):
            return u
    raise NumericalError(f"damped_picard_solve: no convergence in {maxit} iterations")

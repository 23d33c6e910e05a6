"""Homotopy continuation for the nonlinear boundary condition.

The continuation interpolates between the linear resolvent problem at
lambda = 0 (whose only solution is zero, since delta lies strictly between
consecutive eigenvalues) and the full nonlinear boundary condition at
lambda = 1.  Each step solves

    R(U) = S U - (1 - lambda) delta B_P U - lambda G(U) = 0

by Newton's method warm-started from the previous step; the energy norm of
every iterate is checked against an a priori cap, whose firing is the
computational shadow of the uniform-bound estimate (and a practical
symptom of resonance or misconfiguration).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (BoundaryNonlinearity, GramPair, assemble_boundary_jacobian,
                       assemble_boundary_load, boundary_mass)
from .errors import DeltaResonanceError, ResonantClusterError
from .mesh import Mesh
from .spectrum import Spectrum

__all__ = ["HomotopyTrace", "StepRecord", "BoundaryNonlinearity",
           "pick_delta", "solve_linear_L", "homotopy_solve", "residual_report"]

GAP_RTOL = 1e-6
DELTA_DISTANCE_RTOL = 1e-8
SINGULAR_PIVOT_RTOL = 1e-12
DEFAULT_STEPS = 10
DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_NEWTON_MAXIT = 25
CAP_FACTOR = 1e6

CONVERGED = "converged"
BOUND_EXCEEDED = "bound-exceeded"
NEWTON_FAILED = "newton-failed"


@dataclass(frozen=True)
class StepRecord:
    lam: float
    newton_iterations: int
    residual: float
    energy_norm: float


@dataclass(frozen=True)
class HomotopyTrace:
    """Per-step record of the continuation and its outcome."""

    steps: tuple
    final_u: np.ndarray
    status: str
    delta: float
    cap: float

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "delta": self.delta,
            "cap": self.cap,
            "steps": [
                {"lambda": s.lam, "newton_iterations": s.newton_iterations,
                 "residual": s.residual, "energy_norm": s.energy_norm}
                for s in self.steps
            ],
        }


def pick_delta(sp_: Spectrum, j: int) -> float:
    """Midpoint of the gap (mu_j, mu_{j+1}), verified to be in the resolvent."""
    ev = sp_.eigenvalues
    if j < 1 or j + 1 > ev.size:
        raise ValueError(f"pick_delta: gap index {j} needs eigenvalues j and j+1, have {ev.size}")
    mu_lo, mu_hi = float(ev[j - 1]), float(ev[j])
    if mu_hi - mu_lo <= GAP_RTOL * max(1.0, abs(mu_hi)):
        raise ResonantClusterError(
            f"pick_delta: resonant cluster, gap ({mu_lo}, {mu_hi}) is closed within "
            f"relative tolerance {GAP_RTOL:g}")
    delta = 0.5 * (mu_lo + mu_hi)
    dist = np.abs(ev - delta).min()
    if dist <= DELTA_DISTANCE_RTOL * abs(mu_hi):
        raise ResonantClusterError(
            f"pick_delta: midpoint {delta} sits within {dist:.3e} of a computed eigenvalue")
    return delta


def _factorize(matrix: sp.spmatrix, context: str):
    """Sparse LU with pivot-based singularity detection."""
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as err:  # SuperLU reports exact singularity this way
        raise DeltaResonanceError(f"{context}: factorization failed: {err}") from err
    diag = np.abs(lu.U.diagonal())
    if diag.size and diag.min() <= SINGULAR_PIVOT_RTOL * diag.max():
        raise DeltaResonanceError(
            f"{context}: matrix is numerically singular "
            f"(pivot ratio {diag.min() / diag.max():.3e})")
    return lu


def solve_linear_L(gram: GramPair, delta: float, rhs: np.ndarray) -> np.ndarray:
    """Apply the inverse of the linear boundary operator matrix S - delta*B_P.

    ``delta`` must lie in the resolvent; a singular factorization raises
    :class:`DeltaResonanceError`.
    """
    rhs = np.asarray(rhs, dtype=float)
    lu = _factorize(gram.S - delta * gram.B_P, f"solve_linear_L(delta={delta})")
    return lu.solve(rhs)


def _energy_norm(gram: GramPair, u: np.ndarray) -> float:
    return float(np.sqrt(max(u @ (gram.S @ u), 0.0)))


def homotopy_solve(gram: GramPair, g, mesh: Mesh, delta: float,
                   steps: int = DEFAULT_STEPS,
                   newton_tol: float = DEFAULT_NEWTON_TOL,
                   newton_maxit: int = DEFAULT_NEWTON_MAXIT,
                   cap: float | None = None) -> HomotopyTrace:
    """Trace the homotopy from the linear problem to the nonlinear one.

    lambda runs over m/steps for m = 0..steps; each step runs Newton on
    the residual ``S U - (1-lambda) delta B_P U - lambda G(U)`` warm-started
    from the previous step, accepting when the residual drops below
    ``newton_tol * (1 + ||U||_S)``.  Every iterate's energy norm is checked
    against ``cap`` (default 1e6 * (1 + ||G(0)||)); exceeding it aborts with
    the bound-exceeded status.
    """
    if steps < 1:
        raise ValueError(f"homotopy_solve: steps must be >= 1, got {steps}")
    gnl = g if isinstance(g, BoundaryNonlinearity) else BoundaryNonlinearity.parse(g, gram.k)
    if gnl.k != gram.k:
        raise ValueError(f"homotopy_solve: nonlinearity has {gnl.k} components, system has {gram.k}")
    n = gram.size
    if cap is None:
        g0 = assemble_boundary_load(mesh, gnl, np.zeros(n))
        cap = CAP_FACTOR * (1.0 + float(np.linalg.norm(g0)))
    if cap <= 0:
        raise ValueError(f"homotopy_solve: cap must be positive, got {cap}")

    u = np.zeros(n)
    records = []
    for m in range(steps + 1):
        lam = m / steps
        linear_part = gram.S - (1.0 - lam) * delta * gram.B_P
        iters = 0
        converged_step = False
        while True:
            load = assemble_boundary_load(mesh, gnl, u)
            residual = linear_part @ u - lam * load
            res_norm = float(np.linalg.norm(residual))
            energy = _energy_norm(gram, u)
            if res_norm <= newton_tol * (1.0 + energy):
                converged_step = True
                break
            if iters >= newton_maxit:
                break
            jac = linear_part - lam * assemble_boundary_jacobian(mesh, gnl, u, fd_fallback=True)
            lu = _factorize(jac, f"homotopy step lambda={lam}")
            u = u + lu.solve(-residual)
            iters += 1
            energy = _energy_norm(gram, u)
            if energy > cap:
                # the offending iterate stays in final_u; recorded steps all
                # respect the cap
                return HomotopyTrace(steps=tuple(records), final_u=u,
                                     status=BOUND_EXCEEDED, delta=delta, cap=cap)
        records.append(StepRecord(lam, iters, res_norm, energy))
        if not converged_step:
            return HomotopyTrace(steps=tuple(records), final_u=u,
                                 status=NEWTON_FAILED, delta=delta, cap=cap)
    return HomotopyTrace(steps=tuple(records), final_u=u,
                         status=CONVERGED, delta=delta, cap=cap)


def residual_report(gram: GramPair, g, mesh: Mesh, u: np.ndarray,
                    lam: float, delta: float) -> dict:
    """Recompute the homotopy residual and the relevant norms of a state."""
    gnl = g if isinstance(g, BoundaryNonlinearity) else BoundaryNonlinearity.parse(g, gram.k)
    u = np.asarray(u, dtype=float)
    load = assemble_boundary_load(mesh, gnl, u)
    residual = gram.S @ u - (1.0 - lam) * delta * (gram.B_P @ u) - lam * load
    trace_gram = boundary_mass(mesh, gram.k)
    return {
        "residual": float(np.linalg.norm(residual)),
        "energy_norm": _energy_norm(gram, u),
        "mp_norm": float(np.sqrt(max(u @ (gram.B @ u), 0.0))),
        "trace_norm": float(np.sqrt(max(u @ (trace_gram @ u), 0.0))),
    }

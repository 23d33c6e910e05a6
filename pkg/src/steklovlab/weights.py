"""Matrix-valued coefficient fields and their hypothesis checks.

The four weights of the eigensystem (two lower-order interior/boundary
matrices and the two spectral-weight matrices) are k x k symmetric fields
whose entries are x-only expressions.  The validators sample hypotheses
(entrywise nonnegativity, pointwise positive semidefiniteness, the joint
mass condition, and the combined definiteness assumption) at the assembly
quadrature points of a target mesh and report sampled verdicts.

Pointwise eigen-decompositions use cyclic Jacobi rotations, following the
convention ``value = Q^T diag(D) Q`` with orthogonal ``Q`` (rows are
eigenvectors) and ``D`` sorted descending.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as _expr
from .errors import ValidationError
from .quadrature import boundary_quadrature, interior_quadrature

__all__ = [
    "MatrixField", "SpectralFactor", "ValidationReport",
    "spectral_decompose", "lambda_extremes",
    "validate_nonnegative", "validate_psd", "validate_mp_integral",
    "validate_asmp", "validation_points",
]

SYMMETRY_TOL = 1e-12
NEGATIVE_ENTRY_TOL = 1e-12
PSD_EIG_TOL = 1e-10
STRICT_POSITIVE_TOL = 1e-12
MP_INTEGRAL_TOL = 1e-12
JACOBI_OFF_TOL = 1e-13

INTERIOR = "interior"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class MatrixField:
    """k x k symmetric matrix field over the interior or the boundary.

    ``entries[i][j]`` is an x-only expression; fields are immutable after
    construction and evaluation is pure.
    """

    name: str
    k: int
    support: str
    entries: tuple[tuple[_expr.Expr, ...], ...]

    def __post_init__(self):
        if self.support not in (INTERIOR, BOUNDARY):
            raise ValueError(f"{self.name}: support must be 'interior' or 'boundary'")
        if len(self.entries) != self.k or any(len(row) != self.k for row in self.entries):
            raise ValueError(f"{self.name}: entries must form a {self.k}x{self.k} grid")
        for row in self.entries:
            for e in row:
                if _expr.uses_u(e):
                    raise ValidationError(f"{self.name}: weight entries must not reference solution components")
        const = None
        if all(isinstance(e, _expr.Num) for row in self.entries for e in row):
            const = np.array([[e.value for e in row] for row in self.entries])
            const.setflags(write=False)
        object.__setattr__(self, "_const", const)

    @classmethod
    def constant(cls, name: str, k: int, values, support: str) -> "MatrixField":
        """Constant field; a scalar means that multiple of the identity."""
        if np.isscalar(values):
            mat = float(values) * np.eye(k)
        else:
            mat = np.asarray(values, dtype=float).reshape(k, k)
        rows = tuple(tuple(_expr.Num(float(x)) for x in row) for row in mat)
        return cls(name, k, support, rows)

    @classmethod
    def from_exprs(cls, name: str, k: int, rows, support: str) -> "MatrixField":
        """Field from a k x k grid of expression strings (or parsed nodes)."""
        parsed = tuple(
            tuple(e if isinstance(e, _expr.Expr) else _expr.parse(str(e), k) for e in row)
            for row in rows
        )
        return cls(name, k, support, parsed)

    @classmethod
    def zero(cls, name: str, k: int, support: str) -> "MatrixField":
        return cls.constant(name, k, 0.0, support)

    @property
    def is_constant(self) -> bool:
        return self._const is not None

    def value_at(self, x) -> np.ndarray:
        """Evaluate the k x k value at a point (errors carry entry context)."""
        if self._const is not None:
            return self._const
        out = np.empty((self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                try:
                    out[i, j] = _expr.evaluate(self.entries[i][j], x=x)
                except _expr.ExprEvalError as err:
                    raise _expr.ExprEvalError(
                        f"{self.name}[{i + 1}][{j + 1}] at x={tuple(x)}: {err}") from err
        return out

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at many points, shape (npts, k, k)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if self._const is not None:
            return np.broadcast_to(self._const, (pts.shape[0], self.k, self.k))
        return np.stack([self.value_at(p) for p in pts])


@dataclass(frozen=True)
class SpectralFactor:
    """Pointwise eigen-decomposition ``value = Q^T diag(D) Q``."""

    Q: np.ndarray
    D: np.ndarray


@dataclass
class ValidationReport:
    """Outcome of one sampled hypothesis check."""

    name: str
    passed: bool
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        parts = [f"{self.name}: {state}"]
        parts += [f"  - {f}" for f in self.failures[:10]]
        if len(self.failures) > 10:
            parts.append(f"  ... {len(self.failures) - 10} more failures")
        parts += [f"  note: {n}" for n in self.notes]
        return "\n".join(parts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "failures": list(self.failures),
            "notes": list(self.notes),
            "details": {k: v for k, v in self.details.items()},
        }


def _check_symmetric(name: str, mat: np.ndarray, x=None) -> None:
    skew = np.abs(mat - mat.T).max() if mat.size else 0.0
    if skew > SYMMETRY_TOL:
        where = f" at x={tuple(np.asarray(x))}" if x is not None else ""
        raise ValidationError(
            f"{name} is asymmetric{where}: max |a_ij - a_ji| = {skew:.3e}"
            f" > {SYMMETRY_TOL:.0e} (asymmetric weights are rejected, not symmetrized)")


def spectral_decompose(mat, off_tol: float = JACOBI_OFF_TOL) -> SpectralFactor:
    """Cyclic Jacobi eigen-decomposition of a symmetric k x k matrix.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``off_tol * max(1, ||mat||_F)``.  Returns ``Q`` (rows are eigenvectors)
    and ``D`` descending, with ``Q^T diag(D) Q`` reconstructing ``mat``.
    """
    a = np.array(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"spectral_decompose: expected a square matrix, got shape {a.shape}")
    _check_symmetric("spectral_decompose input", a)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return SpectralFactor(Q=v, D=a.diagonal().copy())

    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(60):  # far more sweeps than the quadratic convergence needs
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= off_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.25 * off_tol * scale / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    else:
        raise ValidationError("spectral_decompose: Jacobi sweeps did not converge")

    d = a.diagonal().copy()
    order = np.argsort(-d, kind="stable")
    return SpectralFactor(Q=v[:, order].T, D=d[order])


def lambda_extremes(pf: MatrixField, x) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a boundary weight at a point.

    The value must be positive semidefinite within tolerance; the result
    feeds the pointwise bounds built from the Rayleigh quotient.
    """
    if pf.support != BOUNDARY:
        raise ValidationError(f"lambda_extremes: {pf.name} is not boundary-supported")
    mat = pf.value_at(x)
    _check_symmetric(pf.name, mat, x)
    fac = spectral_decompose(mat)
    lo, hi = float(fac.D[-1]), float(fac.D[0])
    if lo < -PSD_EIG_TOL:
        raise ValidationError(
            f"{pf.name} violates positive semidefiniteness at x={tuple(np.asarray(x))}: "
            f"min eigenvalue {lo:.3e}")
    return lo, hi


def validation_points(f: MatrixField, mesh) -> np.ndarray:
    """Default sample points: the assembly quadrature points on f's support."""
    if f.support == INTERIOR:
        pts, _, _ = interior_quadrature(mesh)
    else:
        pts, _, _ = boundary_quadrature(mesh)
    return pts


_SAMPLED_NOTE = "sampled verdict: positivity on a set of positive measure is checked at quadrature points only"


def validate_nonnegative(f: MatrixField, pts, require_strict: bool = False) -> ValidationReport:
    """Entrywise nonnegativity check (cooperative-plus structure).

    PASS needs every sampled entry >= -1e-12.  Fields that are nowhere
    strictly positive are flagged; with ``require_strict`` the flag turns
    into a failure (for hypotheses demanding strict positivity on a set of
    positive measure).
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("validate_nonnegative: needs at least one sample point")
    report = ValidationReport(name=f"nonnegative({f.name})", passed=True)
    strictly_positive = False
    worst = (0.0, None, None)
    for p in pts:
        mat = f.value_at(p)
        for i in range(f.k):
            for j in range(f.k):
                val = mat[i, j]
                if val < -NEGATIVE_ENTRY_TOL:
                    report.failures.append(
                        f"entry [{i + 1}][{j + 1}] = {val:.6g} < 0 at x={tuple(p)}")
                    if val < worst[0]:
                        worst = (val, (i + 1, j + 1), tuple(p))
                if val > STRICT_POSITIVE_TOL:
                    strictly_positive = True
    report.passed = not report.failures
    report.details["strictly_positive_somewhere"] = strictly_positive
    report.details["num_points"] = int(pts.shape[0])
    if worst[1] is not None:
        report.details["worst_entry"] = {"value": worst[0], "entry": worst[1], "point": worst[2]}
    if not strictly_positive:
        report.notes.append("nowhere strictly positive")
        if require_strict:
            report.passed = False
            report.failures.append("no strictly positive sample, hypothesis demands positivity on a set of positive measure")
    report.notes.append(_SAMPLED_NOTE)
    return report


def validate_psd(f: MatrixField, pts) -> ValidationReport:
    """Per-point positive semidefiniteness via the Jacobi decomposition.

    PASS needs the smallest eigenvalue >= -1e-10 at every sample; the
    report carries the worst point and whether some sample is strictly
    positive definite.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("validate_psd: needs at least one sample point")
    report = ValidationReport(name=f"psd({f.name})", passed=True)
    worst_eig, worst_pt = np.inf, None
    pd_somewhere = False
    for p in pts:
        mat = f.value_at(p)
        _check_symmetric(f.name, mat, p)
        fac = spectral_decompose(mat)
        mineig = float(fac.D[-1])
        if mineig < worst_eig:
            worst_eig, worst_pt = mineig, tuple(p)
        if mineig < -PSD_EIG_TOL:
            report.failures.append(f"min eigenvalue {mineig:.6g} at x={tuple(p)}")
        if mineig > STRICT_POSITIVE_TOL:
            pd_somewhere = True
    report.passed = not report.failures
    report.details["worst_eigenvalue"] = worst_eig
    report.details["worst_point"] = worst_pt
    report.details["positive_definite_somewhere"] = pd_somewhere
    report.details["num_points"] = int(pts.shape[0])
    report.notes.append(_SAMPLED_NOTE)
    return report


def validate_mp_integral(mf: MatrixField, pf: MatrixField, mesh) -> ValidationReport:
    """Joint mass condition: every entry pair must carry positive measure.

    For each (i, j) the quadrature approximation of the interior integral
    of m_ij plus the boundary integral of rho_ij must exceed 1e-12.
    """
    if mf.support != INTERIOR:
        raise ValidationError(f"validate_mp_integral: {mf.name} must be interior-supported")
    if pf.support != BOUNDARY:
        raise ValidationError(f"validate_mp_integral: {pf.name} must be boundary-supported")
    if mf.k != pf.k:
        raise ValidationError("validate_mp_integral: component counts differ")

    ipts, iw, _ = interior_quadrature(mesh)
    bpts, bw, _ = boundary_quadrature(mesh)
    mvals = mf.values_at(ipts)
    pvals = pf.values_at(bpts)
    integrals = np.einsum("q,qij->ij", iw, mvals) + np.einsum("q,qij->ij", bw, pvals)

    report = ValidationReport(name=f"mass_pair({mf.name},{pf.name})", passed=True)
    for i in range(mf.k):
        for j in range(mf.k):
            if integrals[i, j] <= MP_INTEGRAL_TOL:
                report.failures.append(
                    f"pair ({i + 1},{j + 1}): interior+boundary integral {integrals[i, j]:.6g} <= 0")
    report.passed = not report.failures
    report.details["integrals"] = integrals.tolist()
    return report


def validate_asmp(a: MatrixField, sigma: MatrixField, m: MatrixField, p: MatrixField,
                  mesh) -> ValidationReport:
    """Combined definiteness assumption on the two weight pairs.

    PASS iff (the interior lower-order matrix OR the boundary lower-order
    matrix is positive definite at some quadrature point) AND (the interior
    spectral weight OR the boundary spectral weight is).
    """
    ks = {a.k, sigma.k, m.k, p.k}
    if len(ks) != 1:
        raise ValidationError(f"validate_asmp: component counts differ: {sorted(ks)}")

    def pd_somewhere(f: MatrixField) -> bool:
        rep = validate_psd(f, validation_points(f, mesh))
        return bool(rep.details["positive_definite_somewhere"])

    flags = {f.name: pd_somewhere(f) for f in (a, sigma, m, p)}
    clause1 = flags[a.name] or flags[sigma.name]
    clause2 = flags[m.name] or flags[p.name]
    report = ValidationReport(name="combined_definiteness", passed=clause1 and clause2)
    report.details["positive_definite_somewhere"] = flags
    if not clause1:
        report.failures.append(
            f"neither {a.name} nor {sigma.name} is positive definite at any quadrature point")
    if not clause2:
        report.failures.append(
            f"neither {m.name} nor {p.name} is positive definite at any quadrature point")
    report.notes.append(_SAMPLED_NOTE)
    return report

import numpy as np
import pytest

from steklovlab import oracle
from steklovlab.assembly import BoundaryNonlinearity, assemble_gram, boundary_mass
from steklovlab.errors import DeltaResonanceError, ResonantClusterError
from steklovlab.solve import homotopy_solve, pick_delta, residual_report, solve_linear_L


@pytest.fixture(scope="module")
def saddle64(disk64):
    """Manufactured harmonic saddle on the s=64, r=16 disk."""
    case = oracle.manufactured_case("harmonic-saddle-robin-disk")
    w = case.weight_fields
    gram = assemble_gram(disk64, w["A"], w["Sigma"], w["M"], w["P"])
    return case, disk64, gram


def test_pick_delta_midpoint(robin64):
    _, _, sp = robin64
    delta = pick_delta(sp, 1)
    assert delta == pytest.approx(0.5 * (sp.eigenvalues[0] + sp.eigenvalues[1]))
    assert 1.0 < delta < 2.1  # midpoint of the first Robin disk gap


def test_pick_delta_rejects_cluster(robin64):
    _, _, sp = robin64
    with pytest.raises(ResonantClusterError):
        pick_delta(sp, 2)  # mu_2 = mu_3


def test_solve_linear_zero_rhs(robin64):
    _, gram, sp = robin64
    u = solve_linear_L(gram, pick_delta(sp, 1), np.zeros(gram.size))
    assert np.abs(u).max() == 0.0


def test_solve_linear_roundtrip(robin64):
    _, gram, sp = robin64
    delta = pick_delta(sp, 1)
    rng = np.random.default_rng(2)
    w = rng.standard_normal(gram.size)
    rhs = gram.S @ w - delta * (gram.B_P @ w)
    u = solve_linear_L(gram, delta, rhs)
    assert np.linalg.norm(u - w) / np.linalg.norm(w) <= 1e-10


def test_solve_linear_at_eigenvalue_is_singular(robin64):
    _, gram, sp = robin64
    with pytest.raises(DeltaResonanceError):
        solve_linear_L(gram, float(sp.eigenvalues[0]), np.ones(gram.size))


def test_homotopy_trivial_when_nemytskii_vanishes(robin64):
    # g = delta*P*U makes the homotopy independent of lambda with solution zero
    mesh, gram, sp = robin64
    delta = pick_delta(sp, 1)
    trace = homotopy_solve(gram, [f"{delta}*u1"], mesh, delta, steps=5)
    assert trace.converged
    assert np.abs(trace.final_u).max() == 0.0
    assert all(s.newton_iterations == 0 for s in trace.steps)


def test_lambda_zero_step_is_trivial(saddle64):
    case, mesh, gram = saddle64
    trace = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta, steps=2)
    first = trace.steps[0]
    assert first.lam == 0.0
    assert first.energy_norm <= 1e-10


def test_manufactured_harmonic_case(saddle64):
    case, mesh, gram = saddle64
    trace = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta)
    assert trace.converged
    assert len(trace.steps) == 11
    for s in trace.steps:
        assert s.residual <= 1e-10 * (1.0 + s.energy_norm)
    exact = case.exact_vector(mesh)
    bm = boundary_mass(mesh, case.k)
    diff = trace.final_u - exact
    rel = np.sqrt(diff @ (bm @ diff)) / np.sqrt(exact @ (bm @ exact))
    assert rel <= case.tolerance["trace_rel_l2"]


def test_newton_matches_picard_oracle(robin64):
    # bounded perturbation of a slope strictly inside the certified gap,
    # plus a bounded x-forcing so the solution is nonzero
    mesh, gram, sp = robin64
    delta = pick_delta(sp, 1)
    gnl = BoundaryNonlinearity.parse([f"{delta}*u1 + atan(u1) + x1"], 1)
    trace = homotopy_solve(gram, gnl, mesh, delta)
    assert trace.converged
    u_newton = trace.final_u
    assert np.sqrt(u_newton @ (gram.S @ u_newton)) > 1.0  # genuinely nonzero
    u_picard = oracle.damped_picard_solve(gram, gnl, mesh, delta)
    diff = u_newton - u_picard
    assert np.sqrt(diff @ (gram.S @ diff)) <= 1e-6


def test_jacobian_consistency(robin64):
    mesh, gram, sp = robin64
    delta = pick_delta(sp, 1)
    gnl = BoundaryNonlinearity.parse([f"{delta}*u1 + atan(u1) + x1"], 1)
    from steklovlab.assembly import assemble_boundary_jacobian, assemble_boundary_load
    lam = 0.7
    rng = np.random.default_rng(13)
    u = rng.standard_normal(gram.size)

    def residual(v):
        return gram.S @ v - (1 - lam) * delta * (gram.B_P @ v) \
            - lam * assemble_boundary_load(mesh, gnl, v)

    jac = gram.S - (1 - lam) * delta * gram.B_P \
        - lam * assemble_boundary_jacobian(mesh, gnl, u)
    eps = 1e-6
    for _ in range(3):
        v = rng.standard_normal(gram.size)
        jv = jac @ v
        fd = (residual(u + eps * v) - residual(u)) / eps
        assert np.linalg.norm(fd - jv) / np.linalg.norm(jv) <= 1e-4


def test_step_count_robustness(saddle64):
    case, mesh, gram = saddle64
    t10 = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta, steps=10)
    t20 = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta, steps=20)
    diff = t10.final_u - t20.final_u
    assert np.sqrt(diff @ (gram.S @ diff)) <= 1e-10 * 10


def test_bound_monitor_fires(saddle64):
    case, mesh, gram = saddle64
    full = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta)
    w_energy = full.steps[-1].energy_norm
    cap = 0.5 * w_energy
    clipped = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta, cap=cap)
    assert clipped.status == "bound-exceeded"
    # recorded steps all respect the cap; the offending iterate is final_u
    assert all(s.energy_norm <= cap for s in clipped.steps)
    assert np.sqrt(clipped.final_u @ (gram.S @ clipped.final_u)) > cap


def test_trace_records_are_consistent(saddle64):
    case, mesh, gram = saddle64
    trace = homotopy_solve(gram, case.nonlinearity(), mesh, case.delta, steps=4)
    lams = [s.lam for s in trace.steps]
    assert lams == [0.0, 0.25, 0.5, 0.75, 1.0]
    d = trace.to_dict()
    assert d["status"] == "converged"
    assert len(d["steps"]) == 5


def test_residual_report(saddle64):
    case, mesh, gram = saddle64
    gnl = case.nonlinearity()
    rep0 = residual_report(gram, ["0"], mesh, np.zeros(gram.size), 1.0, case.delta)
    assert all(v == 0.0 for v in rep0.values())

    trace = homotopy_solve(gram, gnl, mesh, case.delta)
    rep = residual_report(gram, gnl, mesh, trace.final_u, 1.0, case.delta)
    assert rep["residual"] <= 1e-10 * (1.0 + rep["energy_norm"])
    assert rep["energy_norm"] > 0.0

    rng = np.random.default_rng(4)
    u = rng.standard_normal(gram.size)
    rep1 = residual_report(gram, gnl, mesh, u, 0.3, case.delta)
    rep2 = residual_report(gram, gnl, mesh, u, 0.3, case.delta)
    assert rep1 == rep2  # deterministic recomputation


def test_newton_failure_status(robin64):
    # an absurdly tight tolerance with zero iterations allowed cannot converge
    mesh, gram, sp = robin64
    delta = pick_delta(sp, 1)
    gnl = BoundaryNonlinearity.parse([f"{delta}*u1 + atan(u1) + x1"], 1)
    trace = homotopy_solve(gram, gnl, mesh, delta, newton_maxit=0)
    assert trace.status == "newton-failed"


def test_k2_manufactured_decoupled_case(disk64):
    case = oracle.manufactured_case("decoupled-saddle-pair")
    w = case.weight_fields
    gram = assemble_gram(disk64, w["A"], w["Sigma"], w["M"], w["P"])
    trace = homotopy_solve(gram, case.nonlinearity(), disk64, case.delta)
    assert trace.converged
    exact = case.exact_vector(disk64)
    bm = boundary_mass(disk64, case.k)
    diff = trace.final_u - exact
    rel = np.sqrt(diff @ (bm @ diff)) / np.sqrt(exact @ (bm @ exact))
    assert rel <= case.tolerance["trace_rel_l2"]

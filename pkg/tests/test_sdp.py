import numpy as np
import pytest

from qtrack import sdp
from qtrack.channels import random_state
from qtrack.linalg import hermitian_basis


def fhs_problem(rng, d=2, pi1=0.5):
    basis = hermitian_basis(d)
    r1, r2 = random_state(d, rng), random_state(d, rng)
    t1, t2 = random_state(d, rng), random_state(d, rng)
    e0 = -(pi1 * np.kron(r1.mat.T, t1.mat) + (1 - pi1) * np.kron(r2.mat.T, t2.mat))
    cons = [
        (np.kron(basis[a], np.eye(d)), float(d) if a == 0 else 0.0)
        for a in range(d * d)
    ]
    return sdp.SdpStandard(e0, cons)


def test_trivial_standard_problem():
    p = sdp.SdpStandard(-np.diag([1.0, 0.0]), [(np.eye(2), 1.0)])
    sol = sdp.solve(p)
    assert sol.status == "optimal"
    assert abs(sol.primal_value - 1.0) < 1e-8
    assert abs(sol.dual_value - 1.0) < 1e-8
    assert np.abs(sol.z - np.diag([1.0, 0.0])).max() < 1e-6


def test_dualize_single_constraint():
    p = sdp.SdpStandard(-np.diag([1.0, 0.0]), [(np.eye(2), 1.0)])
    dual = sdp.dualize(p)
    assert np.array_equal(dual.c, [-1.0])
    assert np.abs(dual.f0 + np.diag([1.0, 0.0])).max() == 0
    sol = sdp.solve(dual)
    assert abs(sol.x[0] + 1.0) < 1e-7  # nu* = -1, value -b nu = 1
    assert abs(sol.primal_value - 1.0) < 1e-8


def test_empty_constraints_psd_objective():
    # maximize -tr(E0 Z), Z >= 0 with E0 >= 0: optimum 0 at Z = 0
    p = sdp.SdpStandard(np.diag([1.0, 2.0]), [])
    sol = sdp.solve(p)
    assert abs(sol.primal_value) < 1e-7
    # the dual of a constraint-free problem has no variables; it is feasible
    # (value 0) exactly because E0 >= 0
    dual = sdp.dualize(p)
    assert len(dual.c) == 0
    assert np.linalg.eigvalsh(dual.slack([])).min() >= 0


def test_complex_standard_and_certificate():
    rng = np.random.default_rng(0)
    prob = fhs_problem(rng)
    sol = sdp.solve(prob)
    assert sol.status == "optimal"
    report = sdp.verify_certificate(sol.z, sol.nu, prob)
    assert report["pass"]
    assert report["primal_residual"] <= 1e-8
    assert report["dual_slack_min_eig"] >= -1e-9
    assert abs(report["gap"]) <= 1e-8
    assert report["complementary_slackness"] <= 1e-8 * max(np.abs(prob.e0).max(), 1.0) * 10


def test_perturbed_primal_fails_gap_check():
    rng = np.random.default_rng(1)
    prob = fhs_problem(rng)
    sol = sdp.solve(prob)
    # mix the optimal Choi towards the identity channel's: feasible, suboptimal
    d2 = prob.dim
    depol = np.kron(np.eye(2), np.eye(2) / 2)
    z_bad = 0.7 * sol.z + 0.3 * depol
    report = sdp.verify_certificate(z_bad, sol.nu, prob)
    assert report["primal_residual"] <= 1e-9  # still feasible
    assert report["gap"] > 1e-4
    assert not report["pass"]


def test_weak_duality_along_iterates():
    rng = np.random.default_rng(2)
    prob = fhs_problem(rng)
    opts = sdp.SolverOptions(trace_iterates=True)
    sol = sdp.solve(prob, opts)
    # restore feasibility of each iterate by mixing toward a strictly feasible
    # point, then check p <= d + 1e-12
    a_mats = [np.kron(h, np.eye(2)) for h in hermitian_basis(2)]
    b = np.array([2.0, 0, 0, 0])
    feas = np.kron(np.eye(2), np.eye(2) / 2)  # maximally depolarizing Choi
    for x, y, s in sol.iterates[1:]:
        z = sdp._unlift(0.5 * (x + _j_conj(x)))
        resid = np.array([np.trace(e @ z).real for e in a_mats]) - b
        # affine restoration: absorb the residual into the feasible reference
        z_fixed = z - sum(
            r * np.kron(h, np.eye(2)) / (4.0 if i == 0 else 4.0)
            for i, (r, h) in enumerate(zip(resid, hermitian_basis(2)))
        )
        lam = np.linalg.eigvalsh(z_fixed).min()
        if lam < 0:
            t = min(1.0, -lam / (0.25 - lam))
            z_fixed = (1 - t) * z_fixed + t * feas
        pval = -np.trace(prob.e0 @ z_fixed).real
        nu = y
        slack_min = np.linalg.eigvalsh(
            prob.e0 - sum(v * e for v, (e, _) in zip(nu, prob.constraints))
        ).min()
        if slack_min >= -1e-14:  # dual feasible iterate
            dval = -np.array([bi for _, bi in prob.constraints]) @ nu
            assert pval <= dval + 1e-12


def _j_conj(x):
    n = x.shape[0] // 2
    j = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return j @ x @ j.T


def test_solver_deterministic():
    rng = np.random.default_rng(3)
    prob = fhs_problem(rng)
    sol1 = sdp.solve(prob)
    sol2 = sdp.solve(prob)
    assert sol1.primal_value == sol2.primal_value
    assert np.array_equal(sol1.z, sol2.z)
    assert sol1.iterations == sol2.iterations


def test_inequality_form_complex():
    # minimize x s.t. F0 + x F1 >= 0 with complex Hermitian blocks
    y = np.array([[0, -1j], [1j, 0]])
    f0 = np.eye(2) + 0.3 * y
    prob = sdp.SdpInequality([1.0], f0, [np.eye(2)])
    sol = sdp.solve(prob)
    # need 1 + x - 0.3 >= 0 -> x* = -0.7
    assert abs(sol.x[0] + 0.7) < 1e-7
    assert sol.status == "optimal"


def test_infeasible_not_reported_optimal():
    # contradictory equalities: tr(Z) = 1 and tr(Z) = 2
    p = sdp.SdpStandard(np.eye(2), [(np.eye(2), 1.0), (np.eye(2), 2.0)])
    with pytest.raises(sdp.SolverError):
        sol = sdp.solve(p, sdp.SolverOptions(max_iter=60))
        if sol.status == "optimal":  # pragma: no cover - must not happen
            raise AssertionError("infeasible problem reported optimal")
        raise sdp.SolverError(sol.status)


def test_solution_slack_is_psd():
    rng = np.random.default_rng(4)
    prob = fhs_problem(rng)
    dual = sdp.dualize(prob)
    sol = sdp.solve(dual)
    assert sol.status == "optimal"
    assert np.linalg.eigvalsh(dual.slack(sol.x)).min() >= -1e-8
    # inequality optimum equals the primal optimum of the original problem
    primal = sdp.solve(prob)
    assert abs(sol.primal_value - primal.primal_value) < 1e-7

import numpy as np
import pytest

import gausseig as g
from gausseig.eigensolver import distance_init, minimize_rq, random_positive_init
from gausseig.energy import p_norm_gradient, rayleigh_gradient
from gausseig.errors import ZeroField


def test_minimize_matches_linear_oracle(mesh_cache):
    m = mesh_cache("unit_square", 0.15)
    res = minimize_rq(m, g.EnergyParams(2.0, 0.0), distance_init(m),
                      grad_tol=1e-7, max_iters=5000)
    lam_lin, _ = g.linear_p2_eigensolve(m)
    assert res.converged
    assert res.lambda_eps == pytest.approx(lam_lin, rel=1e-8)


def test_minimize_monotone_accepted_iterates(mesh_cache):
    m = mesh_cache("unit_square", 0.2)
    trace = []
    minimize_rq(m, g.EnergyParams(3.0, 1e-2), distance_init(m), grad_tol=1e-7,
                max_iters=3000, on_iterate=lambda it, lam: trace.append(lam))
    assert len(trace) > 5
    assert all(b < a for a, b in zip(trace, trace[1:]))


def test_minimize_never_exceeds_start_value(mesh_cache):
    m = mesh_cache("unit_square", 0.2)
    params = g.EnergyParams(3.0, 1e-3)
    u0 = distance_init(m)
    r0 = g.rayleigh_quotient(u0, params)
    res = minimize_rq(m, params, u0, grad_tol=1e-6, max_iters=2000)
    assert res.lambda_eps <= r0 + 1e-12


def test_minimize_two_seeds_agree(mesh_cache):
    m = mesh_cache("unit_square", 0.15)
    params = g.EnergyParams(3.0, 0.0)
    results = []
    for seed in (0, 1):
        u0 = random_positive_init(m, np.random.default_rng(seed))
        results.append(minimize_rq(m, params, u0, grad_tol=1e-7, max_iters=8000))
    a, b = results
    assert a.converged and b.converged
    assert abs(a.lambda_eps - b.lambda_eps) <= 1e-6 * a.lambda_eps
    sup = np.max(np.abs(a.u.values - b.u.values)) / np.max(np.abs(a.u.values))
    assert sup <= 1e-4


def test_minimize_rejects_zero_start(mesh_cache):
    m = mesh_cache("unit_square", 0.2)
    with pytest.raises(ZeroField):
        minimize_rq(m, g.EnergyParams(2.0, 0.1), g.NodalField.zero(m))


def test_minimize_flags_nonconvergence_without_raising(mesh_cache):
    # hitting max_iters returns the best iterate flagged, not an exception
    m = mesh_cache("unit_square", 0.15)
    res = minimize_rq(m, g.EnergyParams(3.0, 0.0), distance_init(m),
                      grad_tol=1e-12, max_iters=3)
    assert not res.converged
    assert res.iterations == 3
    assert np.isfinite(res.lambda_eps)


def test_solve_raises_on_final_stage_nonconvergence(domain):
    from gausseig.errors import NoConvergence

    cfg = g.SolverConfig(p=3.0, max_iters=2, grad_tol=1e-12)
    with pytest.raises(NoConvergence):
        g.solve_first_eigenpair(domain("unit_square"), cfg, 0.2)


def test_solve_result_invariants(solve_cache):
    res = solve_cache("unit_square", 3.0, 0.12)
    assert res.eigenvalue > 0
    assert g.p_norm_constraint(res.u, res.p) == pytest.approx(1.0, abs=1e-10)
    assert res.u.values.min() >= -1e-12
    assert res.final_eps == pytest.approx(1e-8)
    assert len(res.history) == 8


def test_solve_history_monotone_in_eps(solve_cache):
    for p in (1.5, 3.0):
        res = solve_cache("unit_square", p, 0.15)
        lams = [l for _, l in res.history]
        eps = [e for e, _ in res.history]
        assert all(a > b for a, b in zip(eps, eps[1:]))
        assert all(a >= b - 1e-9 for a, b in zip(lams, lams[1:]))


def test_solve_restart_agreement(solve_cache):
    res = solve_cache("unit_square", 3.0, 0.15, n_restarts=2)
    assert res.restarts_agreeing == 3


def test_hopf_proxy_interior_positivity(solve_cache):
    # strict positivity at every interior node, in particular the first ring
    for p in (1.5, 2.0, 3.0):
        res = solve_cache("unit_square", p, 0.12)
        assert res.u.values[res.u.mesh.interior_mask].min() > 0.0


def test_discrete_weak_form_residual(solve_cache):
    res = solve_cache("unit_square", 2.5, 0.12)
    lam, grad = rayleigh_gradient(res.u, g.EnergyParams(2.5, res.final_eps))
    scale = lam / np.linalg.norm(res.u.values)
    assert np.linalg.norm(grad.values) <= 1e-6 * scale * 1.001
    # same statement componentwise: the Euler-Lagrange residual of each hat
    ge = g.energy_gradient(res.u, g.EnergyParams(2.5, res.final_eps)).values
    gn = p_norm_gradient(res.u, 2.5).values
    assert np.linalg.norm(ge - lam * gn) <= 1e-6 * scale * 1.001


def test_domain_monotonicity(solve_cache):
    for p in (1.5, 2.0, 3.0):
        small = solve_cache("square_origin", p, 0.12)
        big = solve_cache("square2", p, 0.12)
        assert small.eigenvalue > big.eigenvalue


def test_translation_sensitivity():
    # the Gaussian weight is not translation invariant: just require both
    # solves to converge and record distinct values
    near = g.validate([(0, 0), (1, 0), (1, 1), (0, 1)])
    far = g.validate(near.vertices + np.array([3.0, 0.0]))
    cfg = g.SolverConfig(p=2.0)
    r1 = g.solve_first_eigenpair(near, cfg, 0.15)
    r2 = g.solve_first_eigenpair(far, cfg, 0.15)
    assert r1.eigenvalue > 0 and r2.eigenvalue > 0
    assert abs(r1.eigenvalue - r2.eigenvalue) > 1e-3


def test_nested_refinement_monotone_and_cauchy():
    # nested P1 spaces at p=2: the discrete minimum cannot increase under
    # uniform refinement, and the gaps shrink at roughly O(h^2)
    P = g.validate([(0, 0), (1, 0), (1, 1), (0, 1)])
    meshes = [g.triangulate(P, 0.25)]
    for _ in range(2):
        meshes.append(g.refine_uniform(meshes[-1]))
    params = g.EnergyParams(2.0, 1e-9)
    lams = []
    u0 = distance_init(meshes[0])
    for m in meshes:
        if lams:
            u0 = g.warm_start_interpolate(res.u, m)
        res = minimize_rq(m, params, u0, grad_tol=1e-7, max_iters=8000)
        assert res.converged
        lams.append(res.lambda_eps)
    assert lams[1] <= lams[0] + 1e-8
    assert lams[2] <= lams[1] + 1e-8
    drop1 = lams[0] - lams[1]
    drop2 = lams[1] - lams[2]
    assert drop2 <= 0.5 * drop1  # consistent with O(h^2) convergence


def test_warm_start_interpolate_identity(solve_cache):
    res = solve_cache("unit_square", 2.0, 0.15)
    same = g.warm_start_interpolate(res.u, res.u.mesh)
    assert np.allclose(same.values, res.u.values, atol=1e-12)


def test_warm_start_interpolate_constant_interior(mesh_cache):
    fine = mesh_cache("unit_square", 0.1)
    coarse = mesh_cache("unit_square", 0.25)
    vals = np.ones(fine.n_nodes)
    vals[fine.boundary_mask] = 0.0
    moved = g.warm_start_interpolate(g.NodalField(fine, vals), coarse)
    # nodes well inside carry the constant exactly
    deep = coarse.polygon.boundary_distance(coarse.nodes) > 0.2
    assert np.allclose(moved.values[deep], 1.0, atol=1e-12)


def test_warm_start_gives_finite_quotient(solve_cache, mesh_cache):
    res = solve_cache("unit_square", 2.0, 0.15)
    dst = mesh_cache("unit_square", 0.1)
    moved = g.warm_start_interpolate(res.u, dst)
    val = g.rayleigh_quotient(moved, g.EnergyParams(2.0, 0.0))
    assert np.isfinite(val)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        g.SolverConfig(p=1.0)
    with pytest.raises(ValueError):
        g.SolverConfig(p=2.0, eps_schedule=(1e-2, 1e-1))
    with pytest.raises(ValueError):
        g.SolverConfig(p=2.0, grad_tol=0.0)

import math

import numpy as np
import pytest
from scipy import integrate

from admlab.mild import (BallExitError, ContractionError, ParameterError, SolverGrid, c_v,
                         centred_initial_state, choose_parameters, free_trajectory, heat_feedback_system,
                         l_v, picard_iterate, region_functional, wellposedness_constant)
from admlab.spectral import WeightParams, neumann_laplacian

WP = WeightParams(2.0, 0.1)


@pytest.fixture(scope="module")
def sys():
    return heat_feedback_system(16, lip_f=1.0)


@pytest.fixture(scope="module")
def x0(sys):
    return centred_initial_state(sys, np.random.default_rng(7), 0.002)


@pytest.fixture(scope="module")
def params(sys, x0):
    return choose_parameters(sys, x0, WP, tau_max=0.01)


@pytest.fixture(scope="module")
def run(sys, x0, params):
    return picard_iterate(sys, x0, WP, params.rho, params.tau, tol=1e-10, eta=params.eta)


def test_region_functional_closed_form():
    op = neumann_laplacian(8)
    psi = region_functional(op, (0.25, 0.5))
    x = np.linspace(0.25, 0.5, 20001)
    for n in range(8):
        phi = np.ones_like(x) if n == 0 else math.sqrt(2) * np.cos(n * math.pi * x)
        ref = integrate.quad(lambda y: 1.0 if n == 0 else math.sqrt(2) * math.cos(n * math.pi * y), 0.25, 0.5)[0]
        assert psi[n] == pytest.approx(ref, abs=1e-13)
        assert psi[n] == pytest.approx(integrate.simpson(phi, x=x), abs=1e-9)


def test_centred_state(sys, x0):
    assert abs(sys.psi @ x0) < 1e-15
    assert np.linalg.norm(x0) == pytest.approx(0.002)


def test_system_constants(sys):
    lam = sys.op.eigenvalues
    assert sys.C_norm == pytest.approx(math.sqrt(np.sum(sys.c**2 / (1 + lam) ** 2)), rel=1e-14)
    assert sys.L == pytest.approx(np.linalg.norm(sys.psi), rel=1e-14)
    doubled = heat_feedback_system(16, lip_f=2.0)
    assert doubled.L == pytest.approx(2 * sys.L)


def test_grid_integrates_exponential_forcing():
    mu = np.array([0.0, 1.0, 50.0, 4000.0])
    g = SolverGrid(mu, 0.3)
    h = np.cos(3 * g.nodes)
    got = g.convolve(h)
    t = g.nodes[[5, 40, -1]]
    for m in range(len(mu)):
        for i, ti in zip([5, 40, len(g.nodes) - 1], t):
            ref = integrate.quad(lambda s: math.exp(-mu[m] * (ti - s)) * math.cos(3 * s), 0, ti,
                                 epsabs=1e-15, epsrel=1e-13, limit=200)[0]
            assert got[i, m] == pytest.approx(ref, rel=1e-10, abs=1e-15)


def test_free_trajectory_norm_moves_monotonically(sys, x0):
    taus = np.linspace(0, 0.01, 11)
    cv = [c_v(sys, x0, t) for t in taus]
    assert cv[0] == 0 and np.all(np.diff(cv) > 0)
    lv = [l_v(sys, x0, t, WP) for t in taus[1:]]
    assert np.all(np.diff(lv) > 0)


def test_parameters_relation(params):
    assert params.eta == pytest.approx(4 * params.K * params.L * params.C_norm * params.rho)
    assert params.eta <= 0.5 + 1e-12
    assert 0 < params.tau <= 0.01


def test_doubling_lipschitz_halves_radius(sys, x0, params):
    sys2 = heat_feedback_system(16, lip_f=2.0)
    p2 = choose_parameters(sys2, x0, WP, K=params.K, tau_max=0.01)
    assert p2.rho == pytest.approx(params.rho / 2, rel=1e-12)
    assert p2.tau <= params.tau


def test_zero_feedback_converges_in_one_step(x0):
    s0 = heat_feedback_system(16, lip_f=0.0, f=lambda r: 0.0 * np.asarray(r))
    p = choose_parameters(s0, x0, WP, tau_max=0.01)
    r = picard_iterate(s0, x0, WP, p.rho, p.tau, eta=p.eta)
    assert r.converged and r.n_steps == 1
    assert r.residual < 1e-12


def test_linear_feedback_contracts(run, params):
    assert run.converged
    assert run.max_ratio <= params.eta + 0.05
    assert run.residual <= 1e-9
    assert max(run.ball_distances) <= params.rho


def test_iteration_count_bound(run, params):
    d0 = max(run.iterates[0])
    bound = math.ceil(math.log(1e-10 / d0) / math.log(params.eta)) + 1 if d0 > 1e-10 else 1
    assert run.n_steps <= max(bound, 1)


def test_matches_ode_solution(sys, x0, run):
    t_eval = run.tau * np.array([0.1, 0.35, 0.8, 1.0])
    sol = integrate.solve_ivp(sys.rhs, (0, run.tau), x0, args=(x0,), method="DOP853",
                              rtol=1e-13, atol=1e-20, t_eval=t_eval)
    got = run.state_at(t_eval)
    scale = np.linalg.norm(x0)
    assert np.max(np.abs(got - sol.y.T)) < 1e-10 * scale


def test_unique_fixed_point_from_other_start(sys, x0, run, params):
    g = run.grid
    v = free_trajectory(sys, x0, g.nodes)
    other = v + 0.3 * params.rho * np.outer(np.sin(40 * g.nodes / params.tau), np.eye(16)[0]) / 1.1
    r2 = picard_iterate(sys, x0, WP, params.rho, params.tau, eta=params.eta, grid=g, start=other,
                        check_ball=False)
    assert r2.converged
    assert np.max(np.abs(r2.trajectory - run.trajectory)) < 1e-9 * np.linalg.norm(x0)


def test_solution_has_graph_norm_regularity(run, sys):
    z = np.linalg.norm(run.trajectory * sys.z_weights, axis=1)
    assert np.all(np.isfinite(z))


def test_perturbed_input_lower_bound(run, sys, x0, params):
    # x0 + e changes the solution by at least what the free flow does at t = 0
    e = 1e-4 * np.linalg.norm(x0) * np.eye(16)[3]
    x1 = x0 + e
    r = picard_iterate(sys, x1, WP, params.rho, params.tau, eta=params.eta, grid=run.grid)
    assert np.linalg.norm(r.state_at([0.0])[0] - run.state_at([0.0])[0]) >= 0.99 * np.linalg.norm(e)


def test_abort_on_ratio(sys, x0, params, run):
    with pytest.raises(ContractionError):
        picard_iterate(sys, x0, WP, params.rho, params.tau, eta=1e-14, ratio_tol=0.0, grid=run.grid)


def test_abort_on_ball_exit(sys, x0, params, run):
    with pytest.raises(BallExitError):
        picard_iterate(sys, x0, WP, 1e-30, params.tau, eta=params.eta, grid=run.grid)


def test_rejects_non_contraction(sys, x0, params):
    with pytest.raises(ValueError):
        picard_iterate(sys, x0, WP, params.rho, params.tau, eta=1.0)


def test_parameter_error_reports_curves(sys):
    big = centred_initial_state(sys, np.random.default_rng(0), 1e6)
    with pytest.raises(ParameterError) as ei:
        choose_parameters(sys, big, WP, K=5.0, rho_max=1e-9, tau_max=0.01)
    assert len(ei.value.taus) == len(ei.value.c_v) == len(ei.value.l_v) == 25


def test_wellposedness_constant_needs_p2(sys):
    g = SolverGrid(sys.op.mu, 0.01)
    assert 0 < wellposedness_constant(sys, g, WP) < 100
    with pytest.raises(ValueError):
        wellposedness_constant(sys, g, WeightParams(3.0, 0.1))
    with pytest.raises(ValueError):
        region_functional(neumann_laplacian(4), (0.5, 0.25))

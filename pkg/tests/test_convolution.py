import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from admlab.convolution import (as_input, c_tilde, conv_grid, equivalence_ratio, hardy_constant,
                                heat_system, modal_system, model_commutator_indicator, model_system,
                                theta_even, theta_odd, trial_family, unweight_input, volterra,
                                weight_input, weighted_io_apply)
from admlab.signals import PiecewiseExponential
from admlab.spectral import WeightParams, control, neumann_laplacian, observation


@pytest.fixture(scope="module")
def modal():
    return modal_system(neumann_laplacian(), observation(), control())


@pytest.mark.parametrize("weights", [((1, 0), (1, 0)), ((0, 1), (1, 0)), ((1, 2), (0.5, -1))])
def test_heat_kernel_matches_modal_sum(weights):
    sys = heat_system(1.0, *weights)
    ref = modal_system(neumann_laplacian(), observation(*weights[0]), control(*weights[1]))
    t = np.geomspace(1e-3, 20.0, 60)
    assert np.allclose(sys(t), ref(t), rtol=1e-12, atol=1e-13)


def test_theta_functions_continuous_at_switch():
    t = np.array([1 - 1e-12, 1 + 1e-12])
    assert theta_even(t)[0] == pytest.approx(theta_even(t)[1], rel=1e-10)
    assert theta_odd(t)[0] == pytest.approx(theta_odd(t)[1], rel=1e-10)


def test_M_bound_values():
    assert heat_system().M_bound == pytest.approx(0.367918, abs=2e-6)
    assert model_system(2.5).M_bound == pytest.approx(2.5, rel=1e-12)


@pytest.mark.parametrize("alpha, ref", [(-0.2, 0.0910621), (0.25, 0.4388246), (1e-3, 3.297e-6)])
def test_c_tilde_reference_values(alpha, ref):
    assert c_tilde(2.0, alpha).value == pytest.approx(ref, rel=1e-4)


def test_c_tilde_limits():
    assert c_tilde(2.0, 0.0).value == 0.0
    assert c_tilde(2.0, 0.5).divergent
    with pytest.raises(ValueError):
        c_tilde(1.0, 0.1)


@given(st.floats(1.2, 5.0), st.floats(0.01, 0.4))
def test_c_tilde_symmetric_growth(p, a):
    q = p / (p - 1)
    a = min(a, 0.95 / q)
    assert c_tilde(p, a).value > c_tilde(p, a / 2).value > 0


def test_hardy_constant_is_exact_commutator_norm():
    # positive commutator of M/u applied to 1_[0,1]; its L^2 norm over (0, 1] stays below
    # hardy_constant * ||1_[0,1]||_2
    t = np.geomspace(1e-4, 1.0, 50)
    v = model_commutator_indicator(0.25, t)
    assert np.all(v >= 0)
    for a in (-0.2, 0.25):
        h = hardy_constant(2.0, a)
        assert h > math.sqrt(c_tilde(2.0, a).value)


@pytest.mark.parametrize("u", [
    PiecewiseExponential.from_steps([0.0, 0.3, 1.0, 2.5], [1.0, -2.0, 0.5]),
    PiecewiseExponential.single(0.0, 3.0, 1.0, 2.0),
])
def test_volterra_matches_modal_convolution(u):
    op = neumann_laplacian()
    cb = observation().coefficients(op) * control().coefficients(op)
    t = np.array([0.05, 0.3, 0.31, 1.0, 2.0, 3.5])
    ref = u.convolve_modes(op.mu, t) @ cb
    # modes past the cutoff act as u(t-) * sum 2 / (n pi)^2
    n = len(op.mu)
    tail = 2 * (1 / n - 0.5 / n**2 + 1 / (6 * n**3)) / math.pi**2
    ref = ref + as_input(u)(t - 1e-9) * tail
    got = volterra(heat_system(), u, t)
    assert np.allclose(got, ref, rtol=1e-7, atol=1e-9)


def test_volterra_abel_kernel_closed_form():
    from admlab.convolution import ConvolutionSystem
    sys = ConvolutionSystem(lambda d: d**-0.5, -0.5, "abel")
    u = PiecewiseExponential.single(0.0, 10.0)
    t = np.array([0.01, 1.0, 4.0])
    assert np.allclose(volterra(sys, u, t), 2 * np.sqrt(t), rtol=1e-12)


@pytest.mark.parametrize("alpha", [-0.2, 0.25])
def test_conjugation_round_trip(alpha):
    u = PiecewiseExponential.from_steps([0.0, 0.5, 2.0], [1.0, -0.5])
    t = np.array([0.1, 0.7, 1.9, 3.0])
    io = weighted_io_apply(heat_system(), WeightParams(2, alpha), u, t)
    assert np.allclose(io.conjugated, io.direct, rtol=1e-10)
    f = as_input(u)
    back = unweight_input(weight_input(f, alpha), alpha)
    assert np.allclose(back(t), f(t))


def test_volterra_rejects_nonintegrable():
    u = PiecewiseExponential.single(0.0, 1.0)
    with pytest.raises(ValueError):
        volterra(model_system(), u, [1.0])
    with pytest.raises(ValueError):
        volterra(heat_system(), u, [1.0], gamma=1.0)


def test_equivalence_report_at_zero_weight():
    grid, edges = conv_grid(4.0, panels=24)
    trials = trial_family(np.random.default_rng(1), edges, n_random=2)
    rep = equivalence_ratio(heat_system(), 2.0, 0.0, trials, 4.0, grid=grid)
    assert rep.norm_F_alpha == rep.norm_F and rep.commutator_estimate == 0.0 and rep.ratio == 1.0
    with pytest.raises(ValueError):
        equivalence_ratio(heat_system(), 2.0, 0.5, trials, 4.0, grid=grid)


def test_trial_family_is_seeded():
    _, edges = conv_grid(8.0)
    a = trial_family(np.random.default_rng(3), edges)
    b = trial_family(np.random.default_rng(3), edges)
    assert a == b and len(a) == 6 + 2 + 2

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from admlab.signals import PiecewiseExponential, expm1_ratio, power_input, random_steps

piece = st.tuples(st.floats(0.0, 3.0), st.floats(0.05, 2.0), st.floats(-2, 2), st.floats(-3, 3))


def test_expm1_ratio_continuity():
    z = np.array([-1e-13, 0.0, 1e-13, 1e-8, -50.0, 3.0])
    ref = np.array([1.0, 1.0, 1.0, 1 + 5e-9, (math.exp(-50) - 1) / -50, (math.exp(3) - 1) / 3])
    assert np.allclose(expm1_ratio(z), ref, rtol=1e-14)


@given(piece, st.floats(0.0, 200.0), st.floats(0.1, 6.0))
def test_convolution_against_adaptive_quadrature(pc, mu, t):
    s0, L, a, r = pc
    u = PiecewiseExponential.single(s0, L, a, r)
    got = u.convolve_modes([mu], [t])[0, 0]
    lo, hi = min(s0, t), min(s0 + L, t)
    ref = 0.0
    if hi > lo:
        ref, _ = integrate.quad(lambda s: math.exp(-mu * (t - s)) * a * math.exp(-r * (s - s0)), lo, hi,
                                epsabs=1e-14, epsrel=1e-12)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-13)


@given(piece, st.floats(0.01, 50.0))
def test_laplace_against_quadrature(pc, mu):
    s0, L, a, r = pc
    u = PiecewiseExponential.single(s0, L, a, r)
    ref, _ = integrate.quad(lambda s: math.exp(-mu * s) * a * math.exp(-r * (s - s0)), s0, s0 + L,
                            epsabs=1e-15, epsrel=1e-12)
    assert u.laplace_modes(np.array([mu]))[0] == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_reflection_is_involution():
    u = PiecewiseExponential((0.0, 1.0), (0.5, 2.0), (1.0, -2.0), (0.3, -1.0))
    t = np.linspace(0.01, 2.99, 97)
    ur = u.reflected(3.0)
    assert np.allclose(ur(t), u(3.0 - t), rtol=1e-13)
    assert np.allclose(ur.reflected(3.0)(t), u(t), rtol=1e-13)
    with pytest.raises(ValueError):
        u.reflected(2.0)


@given(st.floats(1.0, 4.0), st.floats(-0.3, 1.0), st.floats(0.1, 3.0))
def test_weighted_norm_of_step(p, alpha, L):
    u = PiecewiseExponential.single(0.0, L, 1.0)
    ap = alpha * p
    assert u.weighted_norm(p, alpha) == pytest.approx((L ** (ap + 1) / (ap + 1)) ** (1 / p), rel=1e-10)


def test_weighted_norm_detached_piece_and_inf():
    u = PiecewiseExponential.single(1.0, 1.0, 2.0)
    assert u.weighted_norm(1, 1.0) == pytest.approx(2 * 1.5, rel=1e-12)
    assert u.weighted_norm(math.inf, 0.0) == pytest.approx(2.0)
    assert PiecewiseExponential.single(0.0, 1.0).weighted_norm(2, -0.5) == math.inf


def test_validation():
    with pytest.raises(ValueError):
        PiecewiseExponential((0.0, 0.5), (1.0, 1.0), (1.0, 1.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        PiecewiseExponential((0.0,), (0.0,), (1.0,), (0.0,))
    with pytest.raises(ValueError):
        PiecewiseExponential((0.0,), (1.0,), (1.0, 2.0), (0.0,))


def test_power_input_and_random_steps():
    u = power_input(0.3, 1.0, pieces=30)
    t = np.geomspace(1e-6, 0.99, 50)
    assert np.all(np.abs(u(t) / t**-0.3 - 1) < 0.12)
    v = random_steps(np.random.default_rng(0), 2.0, 10)
    assert v.end == pytest.approx(2.0) and v.starts[0] == 0.0
    w = random_steps(np.random.default_rng(0), 2.0, 10)
    assert v == w
    assert all(a >= 0 for a in random_steps(np.random.default_rng(1), 1.0, positive=True).amplitudes)


def test_scaled_and_shifted():
    u = PiecewiseExponential.single(0.0, 1.0, 1.0, 0.5)
    assert u.scaled(3.0)(np.array([0.5]))[0] == pytest.approx(3 * math.exp(-0.25))
    assert u.shifted(2.0)(np.array([2.5]))[0] == pytest.approx(math.exp(-0.25))

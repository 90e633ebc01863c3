import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import special

from admlab.kernels import (KernelSpec, classify, kernel_apply, kernel_eval, lattice, norm_bruteforce,
                            norm_closed_form)


@pytest.mark.parametrize("spec, bounded, tag", [
    (KernelSpec(-1, -1, 1, 5.0), True, "i"),
    (KernelSpec(0.5, -1, 1, 5.0), False, "i"),
    (KernelSpec(0, 0, 1), True, "ii"),
    (KernelSpec(-0.5, -0.5, 1), False, "ii"),
    (KernelSpec(0.2, 0.2, 2, 1.0), True, "iii"),
    (KernelSpec(0.4, 0.4, 2, 1.0), False, "iii"),
    (KernelSpec(0.25, 0.25, 2), True, "iv"),
    (KernelSpec(0.3, 0.3, 2), False, "iv"),
    (KernelSpec(0.5, 0.2, math.inf, 1.0), True, "iii"),
    (KernelSpec(1.0, 0.0, math.inf, 1.0), False, "iii"),
])
def test_classification_table(spec, bounded, tag):
    c = classify(spec)
    assert (c.bounded, c.tag) == (bounded, tag)


def test_spot_values():
    assert norm_closed_form(KernelSpec(-1, -1, 1, 2.0)) == pytest.approx(1.0, abs=1e-12)
    assert norm_closed_form(KernelSpec(0.25, 0.25, 2)) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert norm_bruteforce(KernelSpec(-1, -1, 1, 2.0)).value == pytest.approx(1.0, abs=1e-9)
    assert norm_bruteforce(KernelSpec(0.25, 0.25, 2)).value == pytest.approx(math.sqrt(math.pi), rel=1e-9)
    assert norm_closed_form(KernelSpec(0.3, 0.3, 2)) == math.inf


def test_p1_norm_is_kernel_maximum():
    # sup over 0 < s < t <= tau of (t - s)^{1/2} s^{1/2} is tau / 2
    spec = KernelSpec(-0.5, -0.5, 1, 3.0)
    assert norm_closed_form(spec) == pytest.approx(1.5, rel=1e-12)
    s = np.linspace(0, 3, 30001)
    assert np.max(kernel_eval(spec, 3.0, s)) == pytest.approx(1.5, rel=1e-8)


def test_kernel_eval_support():
    spec = KernelSpec(0.2, 0.3, 2)
    assert kernel_eval(spec, 1.0, 1.5) == 0.0
    assert kernel_eval(spec, 1.0, 0.0) == 0.0
    assert kernel_eval(spec, 2.0, 1.0) == pytest.approx(1.0)


exps = st.sampled_from([-1.0, -0.5, 0.0, 0.2, 0.45, 0.1, -0.3])


@given(st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0]), exps, exps, st.sampled_from([0.5, 1.0, 2.0, 10.0]))
def test_bruteforce_matches_closed_form(p, a, g, tau):
    spec = KernelSpec(a, g, p, tau)
    assume(classify(spec).bounded)
    c = norm_closed_form(spec)
    b = norm_bruteforce(spec)
    assert abs(b.value - c) / c < 1e-8
    assert not b.diverges


@given(st.floats(-1.0, 0.9), st.floats(-1.0, 0.9), st.floats(0.1, 5.0))
def test_kernel_apply_constant_input(a, g, t):
    spec = KernelSpec(a, g, 2)
    got = kernel_apply(spec, lambda s: np.ones_like(s), [t])[0]
    ref = t ** (1 - a - g) * special.beta(1 - a, 1 - g)
    assert got == pytest.approx(ref, rel=1e-9)


def test_kernel_apply_polynomial_input():
    spec = KernelSpec(0.3, -0.2, 2)
    t = 1.7
    got = kernel_apply(spec, lambda s: s**2, [t])[0]
    ref = t ** (3 - 0.3 + 0.2) * special.beta(3 - 0.3, 1 + 0.2)
    assert got == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        kernel_apply(KernelSpec(1.0, 0.0, 2), np.ones_like, [1.0])


@given(st.sampled_from([1.5, 2.0, 4.0]), st.floats(-0.5, 0.3), st.floats(-0.5, 0.3), st.floats(0.1, 5.0))
def test_norm_monotone_in_horizon(p, a, g, tau):
    s1, s2 = KernelSpec(a, g, p, tau), KernelSpec(a, g, p, 2 * tau)
    assume(classify(s1).bounded and classify(s2).bounded)
    assert norm_closed_form(s1) <= norm_closed_form(s2) * (1 + 1e-12)


@pytest.mark.parametrize("spec", [
    KernelSpec(0.5, -1, 1, 5.0), KernelSpec(-0.5, -0.5, 1), KernelSpec(0.4, 0.4, 2, 1.0),
    KernelSpec(0.3, 0.3, 2), KernelSpec(0.2, 0.2, 2), KernelSpec(0.6, 0.1, 2, 1.0),
])
def test_divergence_flag_on_unbounded_specs(spec):
    assert not classify(spec).bounded
    assert norm_bruteforce(spec).diverges


def test_lattice_size_and_validation():
    assert len(lattice()) == 210
    assert len(lattice(bounded_only=False)) == 4 * 25 * 3
    with pytest.raises(ValueError):
        KernelSpec(0, 0, 0.5)
    with pytest.raises(ValueError):
        KernelSpec(0, 0, 2, tau=0.0)

"""Input-output convolutions ``u -> K * u`` in power-weighted ``L^p`` spaces.

With ``(Phi_alpha f)(t) = t^alpha f(t)`` the weighted operator is conjugate to
``Phi_alpha F Phi_alpha^{-1}``, whose difference to ``F`` is the commutator

    (T f)(t) = int_0^t K(t - s) [(t/s)^alpha - 1] f(s) ds.

If ``|K(t)| <= M / t`` then ``T`` is dominated by a scalar operator with a
kernel homogeneous of degree -1, so boundedness transfers between the
weighted and unweighted settings.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math
from typing import Callable

import numpy as np
from scipy import optimize

from .quadrature import TimeGrid, gauss_legendre, graded_rule, _panel_nodes
from .spectral import (BoundaryOperator, SpectralOperator, WeightParams, dual_exponent,
                       weighted_lp_norm)


# ---------------------------------------------------------------- kernels

def theta_even(t):
    """``sum_{n in Z} exp(-pi^2 n^2 t)``, via its Poisson dual for small ``t``."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 1.0
    ts = t[small]
    m = np.arange(1, 8)[:, None]
    out[small] = (1.0 + 2.0 * np.sum(np.exp(-(m**2) / ts), axis=0)) / np.sqrt(math.pi * ts)
    tl = t[~small]
    n = np.arange(1, 8)[:, None]
    out[~small] = 1.0 + 2.0 * np.sum(np.exp(-(math.pi**2) * n**2 * tl), axis=0)
    return out


def theta_odd(t):
    """``sum_{n in Z} (-1)^n exp(-pi^2 n^2 t)``."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 1.0
    ts = t[small]
    m = np.arange(0, 8)[:, None] + 0.5
    out[small] = 2.0 * np.sum(np.exp(-(m**2) / ts), axis=0) / np.sqrt(math.pi * ts)
    tl = t[~small]
    n = np.arange(1, 8)[:, None]
    out[~small] = 1.0 + 2.0 * np.sum((-1.0) ** n * np.exp(-(math.pi**2) * n**2 * tl), axis=0)
    return out


@dataclass(frozen=True)
class ConvolutionSystem:
    """Scalar convolution kernel with its behaviour at ``t = 0``.

    ``singular_exponent`` is ``e`` in ``K(t) ~ t^e`` near 0 (must exceed -1 for
    ``F`` to be defined; the model kernel ``1/t`` only supports the commutator).
    """

    kernel: Callable[[np.ndarray], np.ndarray]
    singular_exponent: float
    name: str = ""
    m_range: tuple[float, float] = (1e-8, 1e4)

    def __call__(self, t) -> np.ndarray:
        return self.kernel(np.asarray(t, dtype=float))

    @property
    def M_bound(self) -> float:
        """``sup_t t |K(t)|`` over ``m_range``, polished around the grid maximum."""
        t = np.geomspace(*self.m_range, 4001)
        v = t * np.abs(self(t))
        i = int(np.argmax(v))
        lo, hi = math.log(t[max(i - 1, 0)]), math.log(t[min(i + 1, len(t) - 1)])
        r = optimize.minimize_scalar(lambda z: -math.exp(z) * abs(float(self(np.array([math.exp(z)]))[0])),
                                     bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        return float(max(v[i], -r.fun))


def heat_system(shift: float = 1.0, obs_weights=(1.0, 0.0),
                ctrl_weights=(1.0, 0.0)) -> ConvolutionSystem:
    """``K(t) = C T(t) B`` for endpoint observation and control of the Neumann heat equation.

    With ``phi_n(0) phi_n(0) = 2`` and ``phi_n(0) phi_n(1) = 2 (-1)^n`` for
    ``n >= 1`` the eigen-sum collapses to theta functions, which are evaluated
    to full precision at every ``t > 0``.
    """
    w0, w1 = obs_weights
    v0, v1 = ctrl_weights
    even = w0 * v0 + w1 * v1
    odd = w0 * v1 + w1 * v0

    def k(t):
        return np.exp(-shift * t) * (even * theta_even(t) + odd * theta_odd(t))

    exp = -0.5 if even != 0 else 0.0
    return ConvolutionSystem(k, exp, "heat")


def modal_system(op: SpectralOperator, C: BoundaryOperator, B: BoundaryOperator) -> ConvolutionSystem:
    """``K(t) = sum_n c_n b_n exp(-mu_n t)`` straight from a truncated expansion."""
    cb = C.coefficients(op) * B.coefficients(op)
    mu = op.mu

    def k(t):
        t = np.atleast_1d(t)
        return np.exp(-np.outer(t, mu)) @ cb

    return ConvolutionSystem(k, -0.5, op.name or "modal")


def model_system(M: float = 1.0) -> ConvolutionSystem:
    """The extremal kernel ``K(u) = M / u``."""
    return ConvolutionSystem(lambda t: M / t, -1.0, "model")


# ---------------------------------------------------------------- c tilde

@dataclass(frozen=True)
class CTilde:
    value: float
    divergent: bool


def _bracket_ratio(sigma, alpha):
    """``(sigma^{-alpha} - 1) / (sigma - 1)``, with the limit ``-alpha`` at 1."""
    sigma = np.asarray(sigma, dtype=float)
    d = sigma - 1.0
    out = np.full_like(sigma, -alpha)
    nz = np.abs(d) > 1e-14
    sg, dd = sigma[nz], d[nz]
    ls = np.empty_like(sg)
    low = sg < 0.5
    ls[low] = np.log(sg[low])
    ls[~low] = np.log1p(dd[~low])
    out[nz] = np.expm1(-alpha * ls) / dd
    return out


def c_tilde(p: float, alpha: float, *, levels: int = 60) -> CTilde:
    """``int_0^1 |(sigma^{-alpha} - 1) / (sigma - 1)|^{p'} d sigma``."""
    if not 1.0 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    q = dual_exponent(p)
    if alpha * q >= 1.0:
        return CTilde(math.inf, True)
    if alpha == 0:
        return CTilde(0.0, False)
    x, w = graded_rule(0.0, 1.0, levels=levels, order=16, toward="left")
    return CTilde(float(np.sum(w * np.abs(_bracket_ratio(x, alpha)) ** q)), False)


def hardy_constant(p: float, alpha: float, *, levels: int = 60) -> float:
    """Schur/Hardy bound ``int_0^1 |sigma^{-alpha} - 1| / (1 - sigma) sigma^{-1/p} d sigma``.

    This is the exact ``L^p`` norm of the positive scalar commutator with the
    model kernel ``1/u``, a kernel homogeneous of degree -1.
    """
    x, w = graded_rule(0.0, 1.0, levels=levels, order=16, toward="left")
    return float(np.sum(w * np.abs(_bracket_ratio(x, alpha)) * x ** (-1.0 / p)))


# ---------------------------------------------------------------- Volterra quadrature

@dataclass(frozen=True)
class SampledInput:
    """A callable input together with the points where it is not smooth."""

    func: Callable[[np.ndarray], np.ndarray]
    breaks: tuple[float, ...]
    exponent_at_zero: float = 0.0

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))


def as_input(u) -> SampledInput:
    """Wrap a :class:`~admlab.signals.PiecewiseExponential` (or pass a SampledInput through)."""
    if isinstance(u, SampledInput):
        return u
    brk = sorted(set(u.starts) | {s + L for s, L in zip(u.starts, u.lengths)})
    return SampledInput(u, tuple(brk), 0.0)


def weight_input(u: SampledInput, alpha: float) -> SampledInput:
    """``Phi_alpha u``."""
    return SampledInput(lambda s: s**alpha * u(s), u.breaks, u.exponent_at_zero + alpha)


def unweight_input(f: SampledInput, alpha: float) -> SampledInput:
    """``Phi_alpha^{-1} f``."""
    return weight_input(f, -alpha)


@lru_cache(maxsize=None)
def _unit_rule(levels: int, order: int, exponent: float | None) -> tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] graded toward 0; cached because every output time reuses it."""
    if levels == 0:
        return gauss_legendre(order)
    left = exponent if exponent is not None and exponent > -1 else None
    x, w = graded_rule(0.0, 1.0, levels=levels, order=order, left=left, toward="left")
    return x, w


def _subinterval_nodes(a: float, b: float, t: float, left_exp, right_exp,
                       order: int, levels: int):
    """Nodes ``s``, distances ``t - s`` and weights for ``int_a^b``.

    The part graded toward ``s = t`` is generated in the variable ``v = t - s``
    so that distances far below the spacing of floats near ``t`` stay exact.
    """
    h = b - a
    gap = t - b
    if right_exp is not None:
        lv_right = levels
    elif gap < h:
        lv_right = int(np.clip(math.ceil(math.log2(h / max(gap, 1e-300))) + 3, 2, 3 * levels))
    else:
        lv_right = 0
    lv_left = levels if a == 0.0 else 0
    if lv_left and lv_right:
        m = 0.5 * h
        xl, wl = _unit_rule(lv_left, order, left_exp)
        xr, wr = _unit_rule(lv_right, order, right_exp)
        s1 = a + m * xl
        v2 = gap + m * xr
        return (np.concatenate([s1, t - v2]), np.concatenate([t - s1, v2]),
                np.concatenate([m * wl, m * wr]))
    if lv_right:
        xr, wr = _unit_rule(lv_right, order, right_exp)
        v = gap + h * xr
        return t - v, v, h * wr
    x, w = _unit_rule(lv_left, order, left_exp if lv_left else None)
    sx = a + h * x
    return sx, t - sx, h * w


def volterra(sys: ConvolutionSystem, u, t_out, *, gamma: float = 0.0,
             commutator: bool = False, levels: int = 14, order: int = 10) -> np.ndarray:
    """``int_0^t K(t - s) w(t, s) u(s) ds`` at every ``t`` in ``t_out``.

    ``w = (t/s)^gamma`` (conjugated convolution) or ``w = (t/s)^gamma - 1``
    (commutator).  The interval ``[0, t]`` is split at the breakpoints of ``u``;
    pieces touching ``s = 0`` or ``s = t`` get graded panels with Gauss-Jacobi
    end panels for the power singularities, pieces ending just before ``t`` are
    graded toward their right end as deep as the gap requires.
    """
    u = as_input(u)
    t_out = np.atleast_1d(np.asarray(t_out, dtype=float))
    out = np.zeros(len(t_out))
    e_right = sys.singular_exponent + (1.0 if commutator else 0.0)
    if e_right <= -1.0:
        raise ValueError("kernel singularity at s = t is not integrable")
    e_left = u.exponent_at_zero - gamma
    if e_left <= -1.0:
        raise ValueError("integrand singularity at s = 0 is not integrable")
    brk = np.asarray(u.breaks, dtype=float)
    for i, t in enumerate(t_out):
        if t <= 0:
            continue
        pts = np.concatenate([[0.0], brk[(brk > 0) & (brk < t)], [t]])
        parts = [_subinterval_nodes(a, b, t, e_left, e_right if b == t else None, order, levels)
                 for a, b in zip(pts[:-1], pts[1:])]
        x = np.concatenate([q[0] for q in parts])
        d = np.concatenate([q[1] for q in parts])
        w = np.concatenate([q[2] for q in parts])
        lr = np.log(t / x)
        if commutator:
            wt = np.expm1(gamma * lr)
        elif gamma == 0.0:
            wt = 1.0
        else:
            wt = np.exp(gamma * lr)
        out[i] = float(np.sum(w * sys(d) * wt * u(x)))
    return out


def apply_commutator(sys: ConvolutionSystem, alpha: float, f, t_out, **kw) -> np.ndarray:
    """``(T f)(t) = int_0^t K(t - s) [(t/s)^alpha - 1] f(s) ds``."""
    if alpha == 0:
        return np.zeros(len(np.atleast_1d(t_out)))
    return volterra(sys, f, t_out, gamma=alpha, commutator=True, **kw)


@dataclass(frozen=True)
class WeightedIO:
    direct: np.ndarray
    conjugated: np.ndarray


def weighted_io_apply(sys: ConvolutionSystem, wp: WeightParams, u, t_out, **kw) -> WeightedIO:
    """``K * u`` computed directly and through ``Phi_alpha^{-1} (Phi_alpha F Phi_alpha^{-1}) Phi_alpha``."""
    u = as_input(u)
    t_out = np.atleast_1d(np.asarray(t_out, dtype=float))
    direct = volterra(sys, u, t_out, **kw)
    conj = volterra(sys, weight_input(u, wp.alpha), t_out, gamma=wp.alpha, **kw)
    return WeightedIO(direct, t_out**-wp.alpha * conj)


# ---------------------------------------------------------------- norm transfer

def conv_grid(horizon: float, *, panels: int = 40, order: int = 12,
              uniform: int = 16) -> tuple[TimeGrid, np.ndarray]:
    """Output grid whose panel edges contain every breakpoint used by the trial inputs."""
    graded = horizon * 2.0 ** -np.arange(panels - 1, -1, -1.0)
    uni = horizon * np.arange(1, uniform + 1) / uniform
    edges = np.unique(np.concatenate([[0.0], graded, uni]))
    x, w = _panel_nodes(edges, order)
    return TimeGrid(x, w, horizon), edges


def trial_family(rng: np.random.Generator, edges: np.ndarray, *, n_random: int = 6,
                 betas=(0.15, 0.3)) -> list:
    """Seeded random step functions and truncated power laws with breakpoints on ``edges``."""
    from .signals import PiecewiseExponential
    horizon = edges[-1]
    out = []
    for _ in range(n_random):
        k = rng.integers(4, 10)
        cut = np.sort(rng.choice(edges[1:-1], size=k, replace=False))
        e = np.concatenate([[0.0], cut, [horizon]])
        out.append(PiecewiseExponential.from_steps(e, rng.standard_normal(len(e) - 1)))
    small = edges[edges > 0][::2]
    for b in betas:
        e = np.concatenate([[0.0], small[small < horizon], [horizon]])
        mids = np.concatenate([[e[1] / 2], np.sqrt(e[1:-1] * e[2:])])
        out.append(PiecewiseExponential.from_steps(e, mids**-b))
    for a in (horizon / 8, horizon / 2):
        out.append(PiecewiseExponential.from_steps([0.0, a], [1.0]))
    return out


@dataclass(frozen=True)
class EquivalenceReport:
    p: float
    alpha: float
    norm_F: float
    norm_F_alpha: float
    commutator_estimate: float
    pointwise_bound: float
    M_bound: float
    c_tilde: float
    triangle_ok: bool
    ratio: float


def equivalence_ratio(sys: ConvolutionSystem, p: float, alpha: float, trial_inputs,
                      horizon: float, grid: TimeGrid | None = None, **kw) -> EquivalenceReport:
    """Trial-family estimates of ``||F||``, ``||F^alpha||`` and the commutator.

    Each trial ``f`` lives in ``L^p`` and stands for ``u = Phi_alpha^{-1} f`` in
    ``L^p_alpha``; so ``||F^alpha u||_{L^p_alpha} / ||u||_{L^p_alpha}`` is
    ``||Phi_alpha F Phi_alpha^{-1} f||_p / ||f||_p`` and per trial the two
    ratios differ by at most ``||T f||_p / ||f||_p``.
    """
    if not (-1.0 / p < alpha < 1.0 / dual_exponent(p)):
        raise ValueError(f"alpha={alpha} outside (-1/p, 1/p')")
    if grid is None:
        grid, _ = conv_grid(horizon)
    wp0 = WeightParams(p, 0.0, horizon)
    r0, ra, rt = [], [], []
    for f in trial_inputs:
        f = as_input(f)
        nf = weighted_lp_norm(grid, f(grid.nodes), wp0)
        if nf == 0:
            r0.append(0.0), ra.append(0.0), rt.append(0.0)
            continue
        g0 = volterra(sys, f, grid.nodes, **kw)
        r0.append(weighted_lp_norm(grid, g0, wp0) / nf)
        if alpha == 0:
            ra.append(r0[-1])
            rt.append(0.0)
            continue
        ga = volterra(sys, f, grid.nodes, gamma=alpha, **kw)
        gt = apply_commutator(sys, alpha, f, grid.nodes, **kw)
        ra.append(weighted_lp_norm(grid, ga, wp0) / nf)
        rt.append(weighted_lp_norm(grid, gt, wp0) / nf)
    nF, nFa, nT = max(r0), max(ra), max(rt)
    M = sys.M_bound
    ct = c_tilde(p, alpha).value if alpha != 0 else 0.0
    ok = abs(nFa - nF) <= nT * (1 + 1e-6) + 1e-12
    ratio = nFa / nF if nF > 0 else (1.0 if nFa == 0 else math.inf)
    return EquivalenceReport(p, alpha, nF, nFa, nT, ct ** (1.0 / dual_exponent(p)) * M,
                             M, ct, ok, ratio)


def model_commutator_indicator(alpha: float, t, M: float = 1.0, **kw) -> np.ndarray:
    """Positive scalar commutator of the model kernel ``M/u`` applied to ``1_[0,1]``."""
    from .signals import PiecewiseExponential
    f = PiecewiseExponential.from_steps([0.0, 1.0], [1.0])
    sys = model_system(M)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # |(t/s)^alpha - 1| keeps one sign on (0, t), so the absolute value factors out
    return np.abs(volterra(sys, f, t, gamma=alpha, commutator=True, **kw))

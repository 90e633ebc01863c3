"""Power-power Volterra kernels ``k(t, s) = (t - s)^{-gamma} s^{-alpha}`` on ``0 < s < t``.

The induced operator ``L^p(0, tau) -> L^inf(0, tau)`` has norm
``sup_t ||k(t, .)||_{p'}``.  After ``s = t sigma`` the ``sigma`` integral is a
Beta function and the ``t`` dependence a pure power, which gives the closed
form; the brute-force path evaluates the same quantity with graded panels and
never calls the Beta function.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import optimize, special

from .quadrature import graded_edges, graded_rule
from .spectral import dual_exponent


@dataclass(frozen=True)
class KernelSpec:
    alpha: float
    gamma: float
    p: float
    tau: float = math.inf

    def __post_init__(self) -> None:
        if not 1.0 <= self.p <= math.inf:
            raise ValueError("p must lie in [1, inf]")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def p_dual(self) -> float:
        return dual_exponent(self.p)

    @property
    def t_exponent(self) -> float:
        """Power of ``t`` in ``||k(t, .)||_{p'}``."""
        return 1.0 / self.p_dual - self.alpha - self.gamma


@dataclass(frozen=True)
class Classification:
    bounded: bool
    tag: str


def kernel_eval(spec: KernelSpec, t, s):
    """Kernel value, 0 off the open triangle ``0 < s < t``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < t)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(inside, np.abs(t - s) ** -spec.gamma * np.abs(s) ** -spec.alpha, 0.0)
    return float(val) if val.ndim == 0 else val


def classify(spec: KernelSpec, eps: float = 1e-12) -> Classification:
    """Boundedness ``L^p -> L^inf`` together with the regime tag (i)-(iv).

    The tag names the row of the condition table that applies to ``(p, tau)``;
    ``bounded`` says whether that row's conditions hold.
    """
    a, g, p = spec.alpha, spec.gamma, spec.p
    finite = not math.isinf(spec.tau)
    if p == 1:
        if finite:
            return Classification(a <= eps and g <= eps, "i")
        return Classification(abs(a) <= eps and abs(g) <= eps, "ii")
    ip = 0.0 if math.isinf(p) else 1.0 / p
    base = a + ip < 1 - eps and g + ip < 1 - eps
    if finite:
        return Classification(base and a + g + ip <= 1 + eps, "iii")
    return Classification(base and abs(a + g + ip - 1) <= eps, "iv")


def _self_power(a: float) -> float:
    """``a^a`` with the convention ``0^0 = 1``."""
    return 1.0 if a == 0 else a**a


def norm_closed_form(spec: KernelSpec) -> float:
    """Operator norm from the Beta/power formulas; ``inf`` when unbounded."""
    if not classify(spec).bounded:
        return math.inf
    a, g = spec.alpha, spec.gamma
    if spec.p == 1:
        aa, gg = abs(a), abs(g)
        if math.isinf(spec.tau):
            return 1.0
        return _self_power(aa) * _self_power(gg) / _self_power(aa + gg) * spec.tau ** (aa + gg)
    q = spec.p_dual
    b = special.beta(1 - a * q, 1 - g * q) ** (1.0 / q)
    e = spec.t_exponent
    if math.isinf(spec.tau):
        return float(b)
    return float(spec.tau ** max(e, 0.0) * b)


@dataclass(frozen=True)
class BruteForceNorm:
    value: float
    value_refined: float
    rel_change: float
    diverges: bool


def _sigma_lp(spec: KernelSpec, levels: int) -> float:
    """``||(1 - sigma)^{-gamma} sigma^{-alpha}||_{L^{p'}(0,1)}`` by graded quadrature."""
    a, g = spec.alpha, spec.gamma
    if spec.p == 1:
        # sup norm: sample graded nodes into both ends, then polish the interior max.
        # Each half is parametrised by the distance to its own endpoint so that
        # nodes 2^-80 away from sigma = 1 stay distinct from 1.
        d = np.concatenate([graded_edges(0.0, 0.5, levels, 2.0, "left")[1:],
                            np.linspace(0, 0.5, 513)[1:]])
        f = lambda z, zc: zc ** -g * z ** -a
        v = np.concatenate([f(d, 1 - d), f(1 - d, d)])
        best = float(np.max(v))
        if a <= 0 and g <= 0 and a + g < 0:
            # interior maximiser of (1 - z)^{-g} z^{-a}
            r = optimize.minimize_scalar(lambda z: -f(z, 1 - z), bounds=(1e-12, 1 - 1e-12),
                                         method="bounded", options={"xatol": 1e-14})
            best = max(best, -float(r.fun))
        return best
    q = spec.p_dual
    el, er = -a * q, -g * q
    total = 0.0
    # split at 1/2; each half is graded toward its singular end in its own variable
    for near, far in ((el, er), (er, el)):
        x, w = graded_rule(0.0, 0.5, levels=levels, order=10, left=near, toward="left",
                           jacobi_order=16)
        total += float(np.sum(w * x**near * (1 - x) ** far))
    return total ** (1.0 / q)


def _t_grid(spec: KernelSpec, levels: int, n_points: int) -> np.ndarray:
    if math.isinf(spec.tau):
        return np.geomspace(2.0**-levels, 2.0**levels, n_points)
    return spec.tau * np.geomspace(2.0**-levels, 1.0, n_points)


def _bruteforce_at(spec: KernelSpec, levels: int, n_points: int) -> float:
    s = _sigma_lp(spec, levels)
    t = _t_grid(spec, levels, n_points)
    if spec.p == 1:
        e = -spec.alpha - spec.gamma
    else:
        e = spec.t_exponent
    return float(np.max(t**e) * s)


def norm_bruteforce(spec: KernelSpec, *, levels: int = 40, n_points: int = 256,
                    threshold: float = 0.10) -> BruteForceNorm:
    """Graded-quadrature norm, recomputed at doubled resolution for a divergence flag.

    Resolution means both the grading depth of the ``sigma`` panels (which
    controls how close to a non-integrable endpoint the quadrature looks) and
    the range of the ``t`` grid (how close to 0, or to infinity, the supremum
    is searched).
    """
    v1 = _bruteforce_at(spec, levels, n_points)
    v2 = _bruteforce_at(spec, 2 * levels, n_points)
    if not (math.isfinite(v1) and math.isfinite(v2)):
        return BruteForceNorm(v1, v2, math.inf, True)
    rel = abs(v2 - v1) / max(abs(v1), 1e-300)
    return BruteForceNorm(v1, v2, rel, rel > threshold)


def kernel_apply(spec: KernelSpec, f, t, *, levels: int = 40) -> np.ndarray:
    """``(K f)(t) = int_0^t k(t, s) f(s) ds`` for a callable ``f`` on an array of ``t``."""
    a, g = spec.alpha, spec.gamma
    if a >= 1 or g >= 1:
        raise ValueError("kernel is not locally integrable")
    xl, wl = graded_rule(0.0, 0.5, levels=levels, order=10, left=-a, toward="left", jacobi_order=16)
    xr, wr = graded_rule(0.0, 0.5, levels=levels, order=10, left=-g, toward="left", jacobi_order=16)
    left = wl * xl**-a * (1 - xl) ** -g
    right = wr * xr**-g * (1 - xr) ** -a
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([ti ** (1 - a - g) * (np.sum(left * f(ti * xl)) + np.sum(right * f(ti - ti * xr)))
                     for ti in t])


def lattice(ps=(1.0, 1.5, 2.0, 4.0), exps=(-1.0, -0.5, 0.0, 0.2, 0.45),
            taus=(0.5, 1.0, 10.0), bounded_only: bool = True) -> list[KernelSpec]:
    out = []
    for p in ps:
        for a in exps:
            for g in exps:
                for tau in taus:
                    s = KernelSpec(a, g, p, tau)
                    if not bounded_only or classify(s).bounded:
                        out.append(s)
    return out

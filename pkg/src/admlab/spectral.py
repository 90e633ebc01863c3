"""Diagonal realisations of sectorial operators.

A :class:`SpectralOperator` is a nonnegative self-adjoint operator given by its
eigenvalues together with the values of its eigenfunctions at the two ends of
the unit interval.  States are plain coefficient vectors in the eigenbasis
(the Hilbert space instance ``X = L^2(0, 1)``), so the semigroup, resolvents
and fractional powers all act mode by mode.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Literal

import numpy as np
from scipy import integrate

from .quadrature import TimeGrid

N_MAX = 4096


@dataclass(frozen=True)
class SpectralOperator:
    """Nonnegative diagonal operator ``A`` with an explicit shift.

    Attributes:
        eigenvalues: nondecreasing nonnegative eigenvalues ``lambda_n``.
        boundary_values: array of shape ``(N, 2)``; row ``n`` holds
            ``(phi_n(0), phi_n(1))``.
        shift: added to every eigenvalue; ``shift=1`` realises ``Id + A``.
        growth: optional ``(a, d)`` with ``lambda_n ~ a * n**d``, used only for
            truncation tail estimates.
        name: free-form tag (``"neumann"`` for the heat instance).
    """

    eigenvalues: np.ndarray
    boundary_values: np.ndarray
    shift: float = 1.0
    growth: tuple[float, float] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        lam = np.asarray(self.eigenvalues, dtype=float)
        bv = np.asarray(self.boundary_values, dtype=float)
        if lam.ndim != 1 or bv.shape != (len(lam), 2):
            raise ValueError("need eigenvalues of shape (N,) and boundary values of shape (N, 2)")
        if len(lam) > N_MAX:
            raise ValueError(f"at most {N_MAX} modes are supported")
        if np.any(lam < 0) or np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nonnegative and sorted ascending")
        if self.shift < 0:
            raise ValueError("shift must be nonnegative")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "boundary_values", bv)

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def mu(self) -> np.ndarray:
        """Shifted eigenvalues ``lambda_n + shift``."""
        return self.eigenvalues + self.shift

    def truncate(self, n: int) -> SpectralOperator:
        return SpectralOperator(self.eigenvalues[:n], self.boundary_values[:n],
                                self.shift, self.growth, self.name)

    def with_shift(self, shift: float) -> SpectralOperator:
        return SpectralOperator(self.eigenvalues, self.boundary_values, shift,
                                self.growth, self.name)

    def tail_bound(self, g, weight_bound: float) -> float:
        """Integral-comparison estimate of ``sum_{n >= N} w_n^2 g(mu_n)``.

        ``g`` must be nonincreasing in its argument and ``|w_n| <= weight_bound``
        in the tail.  Returns ``nan`` when the operator carries no growth law.
        """
        if self.growth is None:
            return math.nan
        a, d = self.growth
        n0 = self.n_modes - 1
        val, _ = integrate.quad(lambda n: g(a * n**d + self.shift), n0, np.inf, limit=200)
        return weight_bound**2 * val


def neumann_laplacian(n_modes: int = N_MAX, shift: float = 1.0) -> SpectralOperator:
    """``-d^2/dx^2`` on (0, 1) with Neumann conditions, cosine eigenbasis.

    ``phi_0 = 1`` and ``phi_n = sqrt(2) cos(n pi x)``, eigenvalue ``(n pi)^2``.
    """
    n = np.arange(n_modes)
    bv = np.empty((n_modes, 2))
    bv[:, 0] = math.sqrt(2.0)
    bv[:, 1] = math.sqrt(2.0) * (-1.0) ** n
    bv[0] = 1.0
    return SpectralOperator((n * math.pi) ** 2, bv, shift, (math.pi**2, 2.0), "neumann")


def scalar_operator(eigenvalue: float = 0.0, shift: float = 1.0) -> SpectralOperator:
    """One-mode operator whose boundary trace is the identity on the coefficient."""
    return SpectralOperator(np.array([eigenvalue]), np.array([[1.0, 0.0]]), shift, None, "scalar")


@dataclass(frozen=True)
class BoundaryOperator:
    """Endpoint trace (observation) or its adjoint (control).

    ``weights = (w0, w1)`` combine the traces at x=0 and x=1.
    """

    kind: Literal["observation", "control"]
    weights: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self) -> None:
        if self.kind not in ("observation", "control"):
            raise ValueError(f"unknown boundary operator kind {self.kind!r}")
        if self.weights[0] == 0 and self.weights[1] == 0:
            raise ValueError("at least one endpoint weight must be nonzero")

    def coefficients(self, op: SpectralOperator) -> np.ndarray:
        """Per-mode values ``w0 phi_n(0) + w1 phi_n(1)``."""
        return op.boundary_values @ np.asarray(self.weights, dtype=float)

    def weight_bound(self, op: SpectralOperator) -> float:
        return float(np.max(np.abs(self.coefficients(op)[-8:])))


def observation(w0: float = 1.0, w1: float = 0.0) -> BoundaryOperator:
    return BoundaryOperator("observation", (w0, w1))


def control(w0: float = 1.0, w1: float = 0.0) -> BoundaryOperator:
    return BoundaryOperator("control", (w0, w1))


def _coeffs(op: SpectralOperator, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] > op.n_modes:
        raise ValueError(f"vector has {x.shape[-1]} modes, operator only {op.n_modes}")
    if not np.all(np.isfinite(x)):
        raise ValueError("coefficient vector must be finite")
    return x, op.mu[: x.shape[-1]]


def semigroup_apply(op: SpectralOperator, t: float, x) -> np.ndarray:
    """``T(t) x``: multiply mode ``n`` by ``exp(-t mu_n)``."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    x, mu = _coeffs(op, x)
    return np.exp(-t * mu) * x


def resolvent_power_apply(op: SpectralOperator, lam: float, k: int, x) -> np.ndarray:
    """``(lam + A)^{-k} x`` for the shifted operator."""
    if k < 1:
        raise ValueError("resolvent power must be a positive integer")
    x, mu = _coeffs(op, x)
    denom = lam + mu
    if np.any(denom <= 0):
        raise ValueError(f"lambda={lam} lies in the spectrum of -A")
    return x / denom**k


def fractional_power_apply(op: SpectralOperator, theta: float, x) -> np.ndarray:
    """``A^theta x`` for the shifted operator."""
    x, mu = _coeffs(op, x)
    if theta < 0 and np.any(mu == 0):
        raise ValueError("negative power of an operator with a zero eigenvalue")
    if theta == 0:
        return x.copy()
    return mu**theta * x


def boundary_observe(op: SpectralOperator, bop: BoundaryOperator, x) -> float:
    """``C x = w0 x(0) + w1 x(1)`` evaluated from the eigen-expansion."""
    if bop.kind != "observation":
        raise TypeError("boundary_observe needs an observation operator")
    x, _ = _coeffs(op, x)
    return float(bop.coefficients(op)[: x.shape[-1]] @ x)


def control_embed(op: SpectralOperator, bop: BoundaryOperator, u: float) -> np.ndarray:
    """Coefficients of ``B u`` in the eigenbasis.

    The result is an element of the extrapolation space: its l2 norm grows
    without bound with the number of modes, so only smoothed versions of it
    should be measured.
    """
    if bop.kind != "control":
        raise TypeError("control_embed needs a control operator")
    return u * bop.coefficients(op)


@dataclass(frozen=True)
class WeightParams:
    """Exponent ``p``, weight power ``alpha`` and horizon of ``L^p_alpha(0, horizon)``."""

    p: float
    alpha: float
    horizon: float = math.inf

    def __post_init__(self) -> None:
        if not 1.0 <= self.p <= math.inf:
            raise ValueError(f"p must lie in [1, inf], got {self.p}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def p_dual(self) -> float:
        return dual_exponent(self.p)

    def valid_for_observation(self) -> bool:
        return self.alpha > -1.0 / self.p

    def valid_for_control(self) -> bool:
        if self.p == 1:
            return self.alpha <= 0
        return self.alpha < 1.0 / self.p_dual


def dual_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def weighted_lp_norm(grid: TimeGrid, values, wp: WeightParams) -> float:
    """``(int t^{alpha p} |f(t)|^p dt)^{1/p}`` from samples on a quadrature grid.

    ``values`` holds ``f`` at the grid nodes, either scalar (shape ``(n,)``) or
    vector valued (shape ``(n, m)``, the l2 norm is taken over the last axis).
    For ``p = inf`` the grid maximum of ``t^alpha |f(t)|`` is returned; it is a
    lower bound of the essential supremum.  Returns ``inf`` when the weight is
    not integrable at 0 and the signal does not vanish there.
    """
    f = np.asarray(values, dtype=float)
    if f.ndim == 2:
        f = np.linalg.norm(f, axis=1)
    f = np.abs(f)
    if f.shape != grid.nodes.shape:
        raise ValueError("values must be sampled on the grid nodes")
    t = grid.nodes
    mask = t <= wp.horizon
    t, f, w = t[mask], f[mask], grid.weights[mask]
    if math.isinf(wp.p):
        return float(np.max(t**wp.alpha * f))
    ap = wp.alpha * wp.p
    if ap <= -1 and f[0] > 1e-300:
        return math.inf
    return float(np.sum(w * t**ap * f**wp.p) ** (1.0 / wp.p))

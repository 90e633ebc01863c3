"""Piecewise-exponential scalar inputs with closed-form modal responses.

An input is a finite sum of pieces ``a * exp(-r (s - s0))`` supported on
``[s0, s0 + L)``.  Convolution with ``exp(-mu t)`` and the Laplace transform
both reduce to the entire function ``g(z) = expm1(z) / z``, which keeps the
formulas stable when ``mu`` and ``r`` are close or huge.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .quadrature import gauss_legendre, graded_edges, graded_rule


def expm1_ratio(z):
    """``expm1(z) / z`` with the value 1 at ``z = 0``."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-12
    out[nz] = np.expm1(z[nz]) / z[nz]
    small = ~nz
    out[small] = 1.0 + 0.5 * z[small]
    return out


def _exp_overlap(mu, r, length):
    """``int_0^L exp(-mu (L - v)) exp(-r v) dv`` for arrays broadcasting together."""
    lo = np.minimum(mu, r)
    return length * np.exp(-lo * length) * expm1_ratio(-np.abs(mu - r) * length)


@dataclass(frozen=True)
class PiecewiseExponential:
    starts: tuple[float, ...]
    lengths: tuple[float, ...]
    amplitudes: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.starts)
        if not (len(self.lengths) == len(self.amplitudes) == len(self.rates) == n):
            raise ValueError("piece arrays must have equal length")
        s = np.asarray(self.starts, dtype=float)
        L = np.asarray(self.lengths, dtype=float)
        if np.any(s < 0) or np.any(L <= 0):
            raise ValueError("pieces need nonnegative starts and positive lengths")
        if n > 1 and np.any(s[1:] < s[:-1] + L[:-1] - 1e-14):
            raise ValueError("pieces must be sorted and non-overlapping")

    @classmethod
    def single(cls, start: float, length: float, amplitude: float = 1.0,
               rate: float = 0.0) -> PiecewiseExponential:
        return cls((start,), (length,), (amplitude,), (rate,))

    @classmethod
    def from_steps(cls, edges, values) -> PiecewiseExponential:
        """Piecewise-constant input with ``values[i]`` on ``[edges[i], edges[i+1])``."""
        e = np.asarray(edges, dtype=float)
        v = np.asarray(values, dtype=float)
        return cls(tuple(e[:-1]), tuple(np.diff(e)), tuple(v), tuple(np.zeros(len(v))))

    @property
    def end(self) -> float:
        return max(s + L for s, L in zip(self.starts, self.lengths)) if self.starts else 0.0

    def _arrays(self):
        return (np.asarray(self.starts, float), np.asarray(self.lengths, float),
                np.asarray(self.amplitudes, float), np.asarray(self.rates, float))

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        for s0, L, a, r in zip(*self._arrays()):
            inside = (t >= s0) & (t < s0 + L)
            out[inside] += a * np.exp(-r * (t[inside] - s0))
        return out

    def scaled(self, c: float) -> PiecewiseExponential:
        return PiecewiseExponential(self.starts, self.lengths,
                                    tuple(c * a for a in self.amplitudes), self.rates)

    def shifted(self, b: float) -> PiecewiseExponential:
        return PiecewiseExponential(tuple(s + b for s in self.starts), self.lengths,
                                    self.amplitudes, self.rates)

    def reflected(self, tau: float) -> PiecewiseExponential:
        """``u(tau - t)``; needs support inside ``[0, tau]``."""
        if self.end > tau * (1 + 1e-14):
            raise ValueError("support exceeds the reflection horizon")
        pieces = []
        for s0, L, a, r in zip(*self._arrays()):
            # a e^{-r(tau - t - s0)} on t in (tau-s0-L, tau-s0]
            new_start = tau - s0 - L
            if new_start < 1e-13 * tau:
                new_start = 0.0
            pieces.append((new_start, L, a * math.exp(-r * L), -r))
        pieces.sort()
        return PiecewiseExponential(*(tuple(col) for col in zip(*pieces)))

    def weighted_norm(self, p: float, alpha: float, *, levels: int = 48) -> float:
        """``||t^alpha u||_{L^p(0, inf)}`` by quadrature, piece by piece.

        A piece starting at 0 gets graded panels with a Gauss-Jacobi end panel
        absorbing ``t^{alpha p}``; other pieces use plain Gauss-Legendre panels.
        """
        if math.isinf(p):
            t = np.concatenate([np.linspace(s, s + L, 257)[1:-1]
                                for s, L in zip(self.starts, self.lengths)])
            return float(np.max(t**alpha * np.abs(self(t))))
        ap = alpha * p
        total = 0.0
        for s0, L, a, r in zip(*self._arrays()):
            if a == 0:
                continue
            if s0 == 0.0:
                if ap <= -1:
                    return math.inf
                x, w = graded_rule(0.0, L, levels=levels, order=12, left=ap, toward="left")
            else:
                # panels no wider than their distance to 0 keep t^{alpha p} smooth
                lv = min(max(math.ceil(math.log2(L / s0)), 0), 200)
                edges = graded_edges(s0, s0 + L, lv, 2.0, "left") if lv else np.array([s0, s0 + L])
                xg, wg = gauss_legendre(24)
                h = np.diff(edges)[:, None]
                x = (edges[:-1, None] + h * xg).ravel()
                w = (h * wg).ravel()
            vals = np.abs(a) ** p * np.exp(-p * r * (x - s0))
            total += float(np.sum(w * x**ap * vals))
        return total ** (1.0 / p)

    def convolve_modes(self, mu, t) -> np.ndarray:
        """``int_0^t exp(-mu (t - s)) u(s) ds`` for every mode ``mu`` and time ``t``.

        Returns an array of shape ``(len(t), len(mu))``.
        """
        mu = np.asarray(mu, dtype=float)[None, :]
        t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
        out = np.zeros((t.shape[0], mu.shape[1]))
        for s0, L, a, r in zip(*self._arrays()):
            elapsed = t - s0
            active = elapsed[:, 0] > 0
            if not np.any(active):
                continue
            el = elapsed[active]
            covered = np.minimum(el, L)
            after = el - covered
            out[active] += a * np.exp(-mu * after) * _exp_overlap(mu, r, covered)
        return out

    def laplace_modes(self, mu) -> np.ndarray:
        """``int_0^inf exp(-mu t) u(t) dt`` for every mode."""
        mu = np.asarray(mu, dtype=float)
        out = np.zeros_like(mu)
        for s0, L, a, r in zip(*self._arrays()):
            out += a * np.exp(-mu * s0) * L * expm1_ratio(-(mu + r) * L)
        return out

    def sample_times(self, per_piece: int = 64) -> np.ndarray:
        """Piece endpoints plus interior points, sorted."""
        pts = [np.linspace(s, s + L, per_piece + 1) for s, L in zip(self.starts, self.lengths)]
        return np.unique(np.concatenate(pts)) if pts else np.zeros(1)


def power_input(beta: float, horizon: float, *, pieces: int = 40, ratio: float = 2.0,
                floor: float | None = None) -> PiecewiseExponential:
    """Staircase approximation of ``t^{-beta}`` on ``(floor, horizon]``.

    Steps are geometric so the relative error of the staircase is uniform;
    below ``floor`` the input vanishes.
    """
    floor = horizon * ratio**-pieces if floor is None else floor
    edges = np.geomspace(floor, horizon, pieces + 1)
    mids = np.sqrt(edges[:-1] * edges[1:])
    return PiecewiseExponential.from_steps(edges, mids**-beta)


def random_steps(rng: np.random.Generator, horizon: float, n_steps: int = 12,
                 positive: bool = False) -> PiecewiseExponential:
    """Seeded random piecewise-constant input on a random partition of ``[0, horizon]``."""
    cuts = np.sort(rng.uniform(0.0, horizon, n_steps - 1))
    edges = np.concatenate([[0.0], cuts, [horizon]])
    keep = np.diff(edges) > 1e-9 * horizon
    edges = np.concatenate([[0.0], edges[1:][keep]])
    vals = rng.standard_normal(len(edges) - 1)
    if positive:
        vals = np.abs(vals)
    return PiecewiseExponential.from_steps(edges, vals)


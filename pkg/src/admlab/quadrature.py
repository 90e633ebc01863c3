"""Composite Gauss rules on geometrically graded panels.

Every weighted integral in the package goes through these rules.  Panels
shrink geometrically toward a singular endpoint so that power-type
singularities ``t**a`` are resolved with spectral accuracy on each panel; the
terminal panel touching the singularity can optionally use a Gauss-Jacobi rule
that integrates the power factor exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_left(order: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule on [0, 1] exact for ``x**a * poly(x)``, returned with the weight divided out.

    The returned weights act on the *full* integrand ``g(x)``, i.e.
    ``sum(w * g(x)) ~ int_0^1 g(x) dx`` when ``g(x) = x**a * smooth(x)``.
    """
    if a <= -1.0:
        raise ValueError(f"Gauss-Jacobi needs exponent > -1, got {a}")
    y, wy = roots_jacobi(order, 0.0, a)
    x = 0.5 * (y + 1.0)
    # (1+y)^a = (2x)^a and dy = 2 dx
    w = wy * 0.5 ** (a + 1.0)
    return x, w / x**a


def _panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    a = edges[:-1, None]
    h = np.diff(edges)[:, None]
    return (a + h * x).ravel(), (h * w).ravel()


def graded_edges(a: float, b: float, levels: int, ratio: float = 2.0,
                 toward: str = "left") -> np.ndarray:
    """Panel edges on [a, b] refined geometrically toward one or both ends."""
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    L = b - a
    if toward == "both":
        mid = a + 0.5 * L
        left = graded_edges(a, mid, levels, ratio, "left")
        right = graded_edges(mid, b, levels, ratio, "right")
        return np.concatenate([left, right[1:]])
    offsets = L * ratio ** -np.arange(levels, -1, -1.0)
    if toward == "left":
        return np.concatenate([[a], a + offsets])
    if toward == "right":
        return np.concatenate([b - offsets[::-1], [b]])
    raise ValueError(f"unknown grading direction {toward!r}")


def graded_rule(a: float, b: float, *, levels: int = 40, order: int = 8,
                ratio: float = 2.0, left: float | None = None,
                right: float | None = None, toward: str = "both",
                jacobi_order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for ``int_a^b g``, graded into the requested end(s).

    ``left``/``right`` are optional power exponents of the integrand at the
    respective endpoint.  When given (and > -1) the terminal panel uses a
    Gauss-Jacobi rule that integrates the power factor exactly; otherwise the
    terminal panel gets a plain Gauss-Legendre rule, whose value then keeps
    moving under refinement when the singularity is not integrable.
    """
    edges = graded_edges(a, b, levels, ratio, toward)
    nodes, weights = [], []
    x, w = _panel_nodes(edges, order)
    keep = np.ones(len(edges) - 1, dtype=bool)
    first_h, last_h = edges[1] - edges[0], edges[-1] - edges[-2]
    if toward in ("left", "both") and left is not None and left > -1.0:
        keep[0] = False
        xj, wj = gauss_jacobi_left(jacobi_order, float(left))
        nodes.append(a + first_h * xj)
        weights.append(first_h * wj)
    if toward in ("right", "both") and right is not None and right > -1.0:
        keep[-1] = False
        xj, wj = gauss_jacobi_left(jacobi_order, float(right))
        nodes.append(b - last_h * xj)
        weights.append(last_h * wj)
    mask = np.repeat(keep, order)
    nodes.append(x[mask])
    weights.append(w[mask])
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class TimeGrid:
    """Quadrature nodes on a time interval ``[0, horizon]``.

    ``horizon`` may be ``math.inf``; the grid then stops at ``t_max`` and the
    signals handled on it are assumed to have decayed by then.
    """

    nodes: np.ndarray
    weights: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.nodes[0] < 0 or self.nodes[-1] > self.horizon:
            raise ValueError("grid nodes must lie inside [0, horizon]")

    def __len__(self) -> int:
        return len(self.nodes)


def time_grid(horizon: float = math.inf, *, panels: int = 64, order: int = 8,
              ratio: float = 2.0, max_width: float | None = None,
              t_max: float = 60.0, left: float | None = None,
              jacobi_order: int = 12) -> TimeGrid:
    """Composite Gauss-Legendre grid graded geometrically toward ``t = 0``.

    For a finite horizon the ``panels`` panel edges are ``horizon * ratio**-j``.
    For an infinite horizon the graded part covers ``(0, 1]`` and unit-width
    panels continue up to ``t_max``.  Panels wider than ``max_width`` are split
    uniformly.  ``left`` is an optional power exponent of the integrands at
    ``t = 0``; the first panel then uses a Gauss-Jacobi rule absorbing it.
    """
    if math.isinf(horizon):
        graded = ratio ** -np.arange(panels - 1, -1, -1.0)
        tail = np.arange(2.0, math.floor(t_max) + 1.0)
        edges = np.concatenate([[0.0], graded, tail])
    else:
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        edges = np.concatenate([[0.0], horizon * ratio ** -np.arange(panels - 1, -1, -1.0)])
    if max_width is not None:
        pieces = [edges[:1]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            n = max(1, math.ceil((hi - lo) / max_width))
            pieces.append(np.linspace(lo, hi, n + 1)[1:])
        edges = np.concatenate(pieces)
    x, w = _panel_nodes(edges, order)
    if left is not None and left > -1.0 and left != 0.0:
        h = edges[1]
        xj, wj = gauss_jacobi_left(jacobi_order, float(left))
        x = np.concatenate([h * xj, x[order:]])
        w = np.concatenate([h * wj, w[order:]])
    return TimeGrid(x, w, horizon)

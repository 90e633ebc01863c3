"""Haar multiscale norms on [0, 1]: square-function L^q and B^0_{q,p}.

Coefficients are stored sparsely per level as (integer index, value) pairs;
``psi_{j,k}`` is the L^2-normalised Haar function on ``[k 2^-j, (k+1) 2^-j)``.
The square function ``(sum |a|^2 |Q|^{-1} 1_Q)^{1/2}`` is piecewise constant on
the partition generated by the support endpoints, so its L^q norm is a finite
sum evaluated exactly.

Two extremal families probe the embedding ``L^q -> B^0_{q,p}``:

* nested: every dyadic subcube of ``[0, 1/2)`` at levels ``1..N+1`` carries
  ``|Q|^{1/2}``; the levels contribute equally to both norms and the ratio is
  ``(N+1)^{1/p - 1/2}``;
* disjoint: one cube ``[2^-j, 2^{1-j})`` per level with amplitude chosen so each
  level contributes 1 to ``||.||_q^q``; the ratio is ``(N+1)^{1/p - 1/q}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

MAX_LEVEL = 50


@dataclass
class WaveletCoeffs:
    levels: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    base: tuple[int, int] = (0, 0)  # (level, index) of the supporting cube

    def __post_init__(self) -> None:
        clean = {}
        for j, (idx, val) in self.levels.items():
            idx = np.asarray(idx, dtype=np.int64)
            val = np.asarray(val, dtype=float)
            if j < 0 or j > MAX_LEVEL:
                raise ValueError(f"level {j} outside 0..{MAX_LEVEL}")
            if idx.shape != val.shape or idx.ndim != 1:
                raise ValueError("indices and values must be matching 1-d arrays")
            if len(idx) and (idx.min() < 0 or idx.max() >= 2**j):
                raise ValueError(f"index out of range at level {j}")
            if len(np.unique(idx)) != len(idx):
                raise ValueError(f"repeated index at level {j}")
            clean[j] = (idx, val)
        self.levels = clean

    @property
    def depth(self) -> int:
        return max(self.levels, default=0)

    @classmethod
    def dense(cls, arrays) -> WaveletCoeffs:
        """From a list whose entry ``j`` holds all ``2^j`` coefficients of level ``j``."""
        return cls({j: (np.arange(len(a)), np.asarray(a, float)) for j, a in enumerate(arrays)})


def _partition(c: WaveletCoeffs):
    """Breakpoints (as integers at the finest level) and S^2 on each cell."""
    L = c.depth
    starts, ends, weights = [], [], []
    for j, (idx, val) in c.levels.items():
        sc = 2 ** (L - j)
        starts.append(idx * sc)
        ends.append((idx + 1) * sc)
        weights.append(val**2 * 2.0**j)
    if not starts:
        return np.array([0, 2**L]), np.zeros(1), L
    s, e, w = np.concatenate(starts), np.concatenate(ends), np.concatenate(weights)
    bp = np.unique(np.concatenate([[0, 2**L], s, e]))
    diff = np.zeros(len(bp))
    np.add.at(diff, np.searchsorted(bp, s), w)
    np.add.at(diff, np.searchsorted(bp, e), -w)
    return bp, np.cumsum(diff)[:-1], L


def square_function(c: WaveletCoeffs):
    """``(cell edges in [0, 1], square-function value on each cell)``."""
    bp, s2, L = _partition(c)
    return bp / 2.0**L, np.sqrt(np.maximum(s2, 0.0))


def square_function_lq_norm(c: WaveletCoeffs, q: float) -> float:
    if not 1 < q < math.inf:
        raise ValueError("q must lie in (1, inf)")
    bp, s2, L = _partition(c)
    lengths = np.diff(bp) / 2.0**L
    return float(np.sum(lengths * np.maximum(s2, 0.0) ** (q / 2))) ** (1.0 / q)


def level_norms(c: WaveletCoeffs, q: float) -> dict[int, float]:
    """``(sum_k |a_{j,k}|^q)^{1/q} 2^{-j(1/q - 1/2)}`` per level."""
    return {j: float(np.sum(np.abs(v) ** q)) ** (1 / q) * 2.0 ** (-j * (1 / q - 0.5))
            for j, (_, v) in c.levels.items()}


def besov_norm(c: WaveletCoeffs, q: float, p: float) -> float:
    t = np.array(list(level_norms(c, q).values()) or [0.0])
    if math.isinf(p):
        return float(t.max())
    return float(np.sum(t**p)) ** (1.0 / p)


# ---------------------------------------------------------------- families

def region_ii_family(q: float, p: float, N: int) -> WaveletCoeffs:
    """Nested subdivisions of ``[0, 1/2)`` at levels ``1..N+1``, each cube carrying ``|Q|^{1/2}``."""
    if not q < p < 2:
        warnings.warn(f"(q, p) = ({q}, {p}) is outside q < p < 2", stacklevel=2)
    if N + 1 > 24:
        raise ValueError("nested family limited to 24 levels (dense storage)")
    levels = {}
    for j in range(1, N + 2):
        n = 2 ** (j - 1)
        levels[j] = (np.arange(n), np.full(n, 2.0 ** (-j / 2)))
    return WaveletCoeffs(levels, base=(1, 0))


def region_iv_family(q: float, p: float, N: int) -> WaveletCoeffs:
    """One cube ``[2^-j, 2^{1-j})`` at each level ``1..N+1``, each level contributing 1 to ``||.||_q^q``."""
    if not (q > 2 and 2 < p < q):
        warnings.warn(f"(q, p) = ({q}, {p}) is outside 2 < p < q", stacklevel=2)
    if N + 1 > MAX_LEVEL:
        warnings.warn(f"only {MAX_LEVEL} disjoint levels available; N reduced", stacklevel=2)
        N = MAX_LEVEL - 1
    levels = {j: (np.array([1]), np.array([2.0 ** (j * (1 / q - 0.5))])) for j in range(1, N + 2)}
    return WaveletCoeffs(levels, base=(0, 0))


def random_coeffs(rng: np.random.Generator, N: int) -> WaveletCoeffs:
    """Gaussian amplitudes times ``|Q|^{1/2}`` on every cube at levels ``1..N+1``."""
    return WaveletCoeffs({j: (np.arange(2**j), rng.standard_normal(2**j) * 2.0 ** (-j / 2))
                          for j in range(1, N + 2)})


def norm_ratio(c: WaveletCoeffs, q: float, p: float) -> float:
    return besov_norm(c, q, p) / square_function_lq_norm(c, q)


def growth_exponent(Ns, ratios) -> float:
    """Least-squares slope of ``log ratio`` against ``log(N + 1)``."""
    x = np.log(np.asarray(Ns, float) + 1)
    y = np.log(np.asarray(ratios, float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------- scan

EMBEDS, FAILS, INCONCLUSIVE = "EMBEDS", "FAILS", "INCONCLUSIVE"


@dataclass(frozen=True)
class RegionCell:
    q: float
    p: float
    verdict: str
    exponent: float
    exponents: dict
    predicted: bool


def predicate(q: float, p: float) -> bool:
    return p >= max(2.0, q)


def embedding_region_scan(q_grid, p_grid, N: int = 15, growth_threshold: float = 0.02, *,
                          n_random: int = 3, seed: int = 0) -> list[RegionCell]:
    """Verdict per ``(q, p)`` from the growth of the Besov/L^q ratio as ``N + 1`` doubles.

    Each trial source (two families, random draws) yields a fitted exponent
    over ``N + 1 = 2, 4, ..., N + 1``.  A cell FAILS when some exponent reaches
    ``growth_threshold``, EMBEDS when all stay below half of it, and is
    INCONCLUSIVE in between.
    """
    Ns = [2**k - 1 for k in range(1, int(math.log2(N + 1)) + 1)]
    if len(Ns) < 2:
        raise ValueError("need N >= 3 for a growth fit")
    rng = np.random.default_rng(seed)
    draws = {n: [random_coeffs(rng, n) for _ in range(n_random)] for n in Ns}
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nested = {n: region_ii_family(1.5, 1.7, n) for n in Ns}
        for q in q_grid:
            for p in p_grid:
                ex = {
                    "nested": growth_exponent(Ns, [norm_ratio(nested[n], q, p) for n in Ns]),
                    "disjoint": growth_exponent(Ns, [norm_ratio(region_iv_family(q, p, n), q, p) for n in Ns]),
                }
                if n_random:
                    ex["random"] = growth_exponent(
                        Ns, [max(norm_ratio(c, q, p) for c in draws[n]) for n in Ns])
                e = max(ex.values())
                v = FAILS if e >= growth_threshold else EMBEDS if e < growth_threshold / 2 else INCONCLUSIVE
                out.append(RegionCell(q, p, v, e, ex, predicate(q, p)))
    return out

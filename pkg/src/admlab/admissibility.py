"""Weighted admissibility functionals and resolvent scans for diagonal systems.

Observation side: ``x -> C T(.) x`` measured in ``L^p_alpha``.  Control side:
``u -> int_0^t T(t-s) B u(s) ds`` measured in ``X``.  Constants estimated from
trial families are lower bounds; the resolvent scans give the matching
asymptotic verdicts, computed exactly because ``C (lam + A)^{-k}`` is a rank
one functional whose norm is an l2 sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, special

from .quadrature import time_grid
from .signals import PiecewiseExponential
from .spectral import (BoundaryOperator, SpectralOperator, WeightParams,
                       dual_exponent, weighted_lp_norm)

SLOPE_TOL = 0.02
BOUNDED = "bounded"
DIVERGENT_INF = "divergent-at-inf"
DIVERGENT_ZERO = "divergent-at-0"


@dataclass(frozen=True)
class AdmissibilityReport:
    """Lower-bound estimate of an admissibility constant with its witnesses."""

    constant_estimate: float
    horizon: float
    witnesses: list[tuple[str, float]] = field(default_factory=list)
    provenance: str = "trial-max"

    def __post_init__(self) -> None:
        if self.witnesses and self.constant_estimate < max(r for _, r in self.witnesses):
            raise ValueError("constant estimate below a witness ratio")


def _report(ratios: list[tuple[str, float]], horizon: float, provenance: str) -> AdmissibilityReport:
    best = max((r for _, r in ratios), default=0.0)
    return AdmissibilityReport(best, horizon, ratios, provenance)


# ---------------------------------------------------------------- observation

def observation_signal(op: SpectralOperator, C: BoundaryOperator, x, t) -> np.ndarray:
    """``C T(t) x`` on an array of times."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = C.coefficients(op)[:n] * x
    act = np.nonzero(c)[0]
    t = np.asarray(t, dtype=float)
    return np.exp(-np.outer(t, op.mu[act])) @ c[act]


def observation_gram(op: SpectralOperator, C: BoundaryOperator, alpha: float,
                     horizon: float = math.inf, n_modes: int | None = None) -> np.ndarray:
    """Gram matrix ``G_nm = c_n c_m int_0^tau t^{2 alpha} exp(-t (mu_n + mu_m)) dt``.

    ``x^T G x`` is the squared ``L^2_alpha(0, tau)`` norm of ``C T(.) x``; the same
    matrix is ``S S*`` for the full-line dual control map with weight ``-alpha``.
    """
    if 2 * alpha + 1 <= 0:
        raise ValueError("need alpha > -1/2 for a finite Gram matrix")
    n = op.n_modes if n_modes is None else n_modes
    c = C.coefficients(op)[:n]
    s = op.mu[:n, None] + op.mu[None, :n]
    a = 2 * alpha + 1
    with np.errstate(divide="ignore"):
        G = special.gamma(a) * np.outer(c, c) / s**a
    if not math.isinf(horizon):
        G = G * special.gammainc(a, horizon * s)
    return G


def exact_observation_constant_p2(op: SpectralOperator, C: BoundaryOperator, alpha: float,
                                  horizon: float = math.inf, n_modes: int = 512) -> float:
    """Best constant of the truncated ``n_modes`` system for ``p = 2``."""
    G = observation_gram(op, C, alpha, horizon, n_modes)
    if not np.all(np.isfinite(G)):
        return math.inf
    return float(math.sqrt(max(np.linalg.eigvalsh(G)[-1], 0.0)))


def obs_admissibility_constant(op: SpectralOperator, C: BoundaryOperator, wp: WeightParams,
                               trial_states, *, method: str = "quadrature",
                               grid=None) -> AdmissibilityReport:
    """``max_x ||C T(.) x||_{L^p_alpha(0, tau)} / ||x||`` over the trial states.

    ``method="eigen"`` (``p = 2`` only) evaluates the weighted norm exactly
    through the Gram matrix instead of time quadrature.
    """
    if C.kind != "observation":
        raise TypeError("need an observation operator")
    if not wp.valid_for_observation():
        raise ValueError(f"alpha={wp.alpha} is not > -1/p for p={wp.p}")
    if method == "eigen" and wp.p != 2:
        raise ValueError("eigen-sum evaluation needs p = 2")
    if grid is None:
        grid = time_grid(wp.horizon, left=None if math.isinf(wp.p) else wp.alpha * wp.p)
    ratios = []
    for i, x in enumerate(trial_states):
        x = np.asarray(x, dtype=float)
        nx = float(np.linalg.norm(x))
        if nx == 0:
            raise ValueError("trial states must be nonzero")
        act = np.nonzero(x)[0]
        if math.isinf(wp.horizon) and np.any(op.mu[act] == 0) and not math.isinf(wp.p):
            if abs(float(C.coefficients(op)[act][op.mu[act] == 0] @ x[act][op.mu[act] == 0])) > 0:
                ratios.append((f"state[{i}]", math.inf))
                continue
        if method == "eigen":
            m = act.max() + 1
            G = observation_gram(op, C, wp.alpha, wp.horizon, m)
            val = math.sqrt(max(float(x[:m] @ G @ x[:m]), 0.0))
        else:
            val = weighted_lp_norm(grid, observation_signal(op, C, x, grid.nodes), wp)
        ratios.append((f"state[{i}]", val / nx))
    return _report(ratios, wp.horizon, "closed-form" if method == "eigen" else "quadrature")


def default_trial_states(op: SpectralOperator, C: BoundaryOperator, rng: np.random.Generator,
                         n_random: int = 8, n_unit: int = 16) -> list[np.ndarray]:
    """Unit modes, seeded Gaussian combinations and boundary-concentrated states.

    The boundary-concentrated states are partial sums of the trace coefficient
    sequence smoothed once by ``(1 + A)^{-1}``; they approach the worst case for
    endpoint observation as the number of modes grows.
    """
    n = op.n_modes
    out = []
    for j in range(min(n_unit, n)):
        e = np.zeros(n)
        e[j] = 1.0
        out.append(e)
    m = min(64, n)
    for _ in range(n_random):
        x = np.zeros(n)
        x[:m] = rng.standard_normal(m)
        out.append(x)
    c = C.coefficients(op) / (1.0 + op.mu)
    k = 4
    while k <= n:
        x = np.zeros(n)
        x[:k] = c[:k]
        out.append(x)
        k *= 4
    return out


# ---------------------------------------------------------------- control

def _state_norms(op: SpectralOperator, B: BoundaryOperator, u: PiecewiseExponential,
                 t: np.ndarray, chunk: int = 256) -> np.ndarray:
    c = B.coefficients(op)
    out = np.empty(len(t))
    for i in range(0, len(t), chunk):
        y = u.convolve_modes(op.mu, t[i:i + chunk]) * c
        out[i:i + chunk] = np.linalg.norm(y, axis=1)
    return out


def control_state(op: SpectralOperator, B: BoundaryOperator, u: PiecewiseExponential,
                  t: float) -> np.ndarray:
    """Coefficients of ``int_0^t T(t - s) B u(s) ds``."""
    return (u.convolve_modes(op.mu, [t]) * B.coefficients(op))[0]


def control_admissibility_constant(op: SpectralOperator, B: BoundaryOperator, wp: WeightParams,
                                   trial_inputs, *, per_piece: int = 16) -> AdmissibilityReport:
    """``max_u sup_t ||int_0^t T(t-s) B u(s) ds|| / ||u||_{L^p_alpha}`` over the trials.

    The supremum in ``t`` runs over piece endpoints and ``per_piece`` interior
    points of every piece; after the input ends every mode decays, so later
    times cannot do better.
    """
    if B.kind != "control":
        raise TypeError("need a control operator")
    if not wp.valid_for_control():
        raise ValueError(f"alpha={wp.alpha} is not admissible for control with p={wp.p}")
    ratios = []
    for i, u in enumerate(trial_inputs):
        if not u.starts or all(a == 0 for a in u.amplitudes):
            ratios.append((f"input[{i}]", 0.0))
            continue
        if u.end > wp.horizon * (1 + 1e-12):
            raise ValueError("input support exceeds the horizon")
        nu = u.weighted_norm(wp.p, wp.alpha)
        if not math.isfinite(nu):
            raise ValueError(f"input[{i}] is not in L^p_alpha")
        t = u.sample_times(per_piece)
        t = t[t > 0]
        ratios.append((f"input[{i}]", float(np.max(_state_norms(op, B, u, t))) / nu))
    return _report(ratios, wp.horizon, "closed-form")


def dual_control_constant(op: SpectralOperator, B: BoundaryOperator, wp: WeightParams,
                          trial_inputs) -> AdmissibilityReport:
    """``max_u ||int_0^inf T(t) B u(t) dt|| / ||u||_{L^p_{-alpha}(0, inf)}`` over the trials."""
    if B.kind != "control":
        raise TypeError("need a control operator")
    if math.isinf(wp.p):
        raise ValueError("dual condition needs p < inf")
    c = B.coefficients(op)
    ratios = []
    for i, u in enumerate(trial_inputs):
        if not u.starts or all(a == 0 for a in u.amplitudes):
            ratios.append((f"input[{i}]", 0.0))
            continue
        nu = u.weighted_norm(wp.p, -wp.alpha)
        if not math.isfinite(nu):
            raise ValueError(f"input[{i}] is not in L^p_(-alpha)")
        ratios.append((f"input[{i}]", float(np.linalg.norm(c * u.laplace_modes(op.mu))) / nu))
    return _report(ratios, math.inf, "closed-form")


def exact_dual_constant_p2(op: SpectralOperator, B: BoundaryOperator, alpha: float,
                           n_modes: int = 512) -> float:
    """Best dual constant of the truncated system for ``p = 2``."""
    return exact_observation_constant_p2(op, BoundaryOperator("observation", B.weights),
                                         alpha, math.inf, n_modes)


# ---------------------------------------------------------------- scans

@dataclass(frozen=True)
class ScanResult:
    lambda_grid: np.ndarray
    values: np.ndarray
    sup_value: float
    slope_low: float
    slope_high: float
    verdict: str
    tail_rel: float = 0.0
    slope_tol: float = SLOPE_TOL


def default_lambda_grid() -> np.ndarray:
    return np.logspace(-6, 6, 121)


def _fit_slope(lam: np.ndarray, vals: np.ndarray) -> float:
    return float(np.polyfit(np.log10(lam), np.log10(vals), 1)[0])


def _resolvent_functional_norms(op: SpectralOperator, coeff: np.ndarray, lam: np.ndarray,
                                k: int) -> tuple[np.ndarray, float]:
    mu = op.mu
    act = coeff != 0
    c2 = coeff[act] ** 2
    vals = np.empty(len(lam))
    for i, l in enumerate(lam):
        vals[i] = math.sqrt(float(np.sum(c2 / (l + mu[act]) ** (2 * k))))
    tail = 0.0
    if op.growth is not None and np.any(act):
        wb = float(np.max(np.abs(coeff[-8:])))
        for i in (0, len(lam) - 1):
            t = op.tail_bound(lambda m, l=lam[i]: (l + m) ** (-2 * k), wb)
            tail = max(tail, t / max(vals[i] ** 2, 1e-300))
    return vals, tail


def _scan(op, coeff, exponent, k, grid, slope_tol) -> ScanResult:
    lam = default_lambda_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be positive and increasing")
    norms, tail = _resolvent_functional_norms(op, coeff, lam, k)
    vals = lam**exponent * norms
    if not np.any(vals > 0):
        return ScanResult(lam, vals, 0.0, 0.0, 0.0, BOUNDED, 0.0, slope_tol)
    lo = lam <= lam[0] * 10 * (1 + 1e-9)
    hi = lam >= lam[-1] / 10 * (1 - 1e-9)
    s_lo, s_hi = _fit_slope(lam[lo], vals[lo]), _fit_slope(lam[hi], vals[hi])
    if s_hi > slope_tol:
        verdict = DIVERGENT_INF
    elif s_lo < -slope_tol:
        verdict = DIVERGENT_ZERO
    else:
        verdict = BOUNDED
    return ScanResult(lam, vals, float(np.max(vals)), s_lo, s_hi, verdict, tail, slope_tol)


def scan_WC(op: SpectralOperator, C: BoundaryOperator, p: float, alpha: float, k: int = 1,
            grid=None, slope_tol: float = SLOPE_TOL) -> ScanResult:
    """Scan ``lam^{k - alpha - 1/p} ||C (lam + A)^{-k}||`` over a log grid."""
    if C.kind != "observation":
        raise TypeError("need an observation operator")
    if not (-1.0 / p < alpha < k - 1.0 / p):
        raise ValueError(f"alpha={alpha} outside (-1/p, k - 1/p) for p={p}, k={k}")
    return _scan(op, C.coefficients(op), k - alpha - 1.0 / p, k, grid, slope_tol)


def scan_WB(op: SpectralOperator, B: BoundaryOperator | None, p: float, alpha: float, k: int = 1,
            grid=None, slope_tol: float = SLOPE_TOL) -> ScanResult:
    """Scan ``lam^{k + alpha - 1/p'} ||(lam + A)^{-k} B||``; ``B=None`` is the zero operator."""
    pd = dual_exponent(p)
    if not (1.0 / pd - k < alpha < 1.0 / pd):
        raise ValueError(f"alpha={alpha} outside (1/p' - k, 1/p') for p={p}, k={k}")
    if B is None:
        coeff = np.zeros(op.n_modes)
    else:
        if B.kind != "control":
            raise TypeError("need a control operator")
        coeff = B.coefficients(op)
    return _scan(op, coeff, k + alpha - 1.0 / pd, k, grid, slope_tol)


def combined_verdict(wc: ScanResult, wb: ScanResult) -> str:
    """Joint verdict: bounded only when both scans are bounded."""
    for s in (wc, wb):
        if s.verdict != BOUNDED:
            return s.verdict
    return BOUNDED


def predicted_resolvent_slope(alpha: float, p: float, k: int = 1, side: str = "obs",
                              decay: float = 0.75) -> float:
    """High-frequency slope when ``||C (lam + A)^{-k}|| ~ lam^{-(k - 1) - decay}``."""
    if side == "obs":
        e = k - alpha - 1.0 / p
    else:
        e = k + alpha - 1.0 / dual_exponent(p)
    return e - (k - 1) - decay


# ---------------------------------------------------------------- square functions

def lp_star_estimate(op: SpectralOperator, p: float, theta: float, x, *,
                     method: str = "auto") -> float:
    """``(int_0^inf ||(tA)^theta T(t) x||^p dt/t)^{1/p}`` for the shifted operator.

    For ``p = 2`` every mode contributes ``|x_n|^2 Gamma(2 theta) 2^{-2 theta}``
    independent of its eigenvalue; other ``p`` use trapezoidal quadrature in
    ``log t``, which converges geometrically for this analytic integrand.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    x = np.asarray(x, dtype=float)
    act = np.nonzero(x)[0]
    if len(act) == 0:
        return 0.0
    mu = op.mu[act]
    if np.any(mu <= 0):
        raise ValueError("all shifted eigenvalues must be positive")
    if method == "auto":
        method = "exact" if p == 2 else "quadrature"
    if method == "exact":
        if p != 2:
            raise ValueError("closed form needs p = 2")
        return math.sqrt(float(np.sum(x[act] ** 2)) * special.gamma(2 * theta) * 2 ** (-2 * theta))
    lo = -math.log(mu.max()) - 45.0 / (theta * p)
    hi = -math.log(mu.min()) + math.log(80.0 / p + 1.0) + 5.0
    u = np.arange(lo, hi, 0.05)
    s = np.exp(u)[:, None] * mu[None, :]
    vals = np.linalg.norm(s**theta * np.exp(-s) * x[act], axis=1) ** p
    return float(np.trapezoid(vals, u)) ** (1.0 / p)


def interp_norm_k_functional(op: SpectralOperator, theta: float, q: float, x) -> float:
    """Real interpolation norm of ``x`` in ``(X, X_1)_{theta, q}``.

    Uses the quadratic K-functional of the diagonal couple,
    ``K(t, x)^2 = sum |x_n|^2 t^2 mu_n^2 / (1 + t^2 mu_n^2)``.  The integral in
    ``u = log t`` is done by the trapezoidal rule; the integrand is analytic in
    a strip of half-width pi/2, so step 0.2 already gives about 1e-17.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    act = np.nonzero(x)[0]
    if len(act) == 0:
        return 0.0
    mu = op.mu[act]
    if np.any(mu <= 0):
        raise ValueError("all shifted eigenvalues must be positive")
    x2 = x[act] ** 2

    logmu = np.log(mu)

    def f(u):
        u = np.atleast_1d(u)
        # s^2 / (1 + s^2) with s = t mu, written so that huge s cannot overflow
        frac = special.expit(2.0 * (u[:, None] + logmu[None, :]))
        return np.exp(-theta * u) * np.sqrt(frac @ x2)

    if math.isinf(q):
        u = np.arange(-math.log(mu.max()) - 10.0 / (1 - theta),
                      -math.log(mu.min()) + 10.0 / theta, 0.02)
        v = f(u)
        i = int(np.argmax(v))
        res = optimize.minimize_scalar(lambda z: -f(z)[0], bracket=None,
                                       bounds=(u[max(i - 1, 0)], u[min(i + 1, len(u) - 1)]),
                                       method="bounded", options={"xatol": 1e-12})
        return float(max(v[i], -res.fun))
    lo = -math.log(mu.max()) - 42.0 / ((1 - theta) * q)
    hi = -math.log(mu.min()) + 42.0 / (theta * q)
    u = np.arange(lo, hi, 0.2)
    return float(np.sum(f(u) ** q) * 0.2) ** (1.0 / q)


def interp_norm_single_mode(mu: float, theta: float, q: float) -> float:
    """Closed form of ``interp_norm_k_functional`` for a unit vector with eigenvalue ``mu``."""
    if math.isinf(q):
        s = math.sqrt((1 - theta) / theta)
        return mu**theta * s ** (1 - theta) / math.sqrt(1 + s * s)
    b = special.beta(q * (1 - theta) / 2, q * theta / 2)
    return (0.5 * b) ** (1.0 / q) * mu**theta


@dataclass(frozen=True)
class TraceRatioReport:
    theta: float
    blocks: np.ndarray
    ratios: np.ndarray
    sup_ratio: float
    growth: float
    finite: bool


def trace_interp_ratio(op: SpectralOperator, C: BoundaryOperator, theta: float, q: float = 1.0, *,
                       n_top: int = 5, growth_tol: float = SLOPE_TOL) -> TraceRatioReport:
    """``sup |C x| / ||x||_{theta, q}`` over flat dyadic blocks of modes.

    Block ``J`` puts a unit coefficient on modes ``2^J .. 2^{J+1} - 1`` with the
    sign of ``c_n``, which is extremal for ``|C x|`` at fixed ``l^2`` mass on
    the block.  The sup is finite when ``log ratio`` stops growing in
    ``log 2^J`` over the ``n_top`` finest complete blocks.
    """
    if C.kind != "observation":
        raise TypeError("need an observation operator")
    c = C.coefficients(op)
    top = int(math.log2(op.n_modes))
    if top - 1 < n_top:
        raise ValueError("too few modes for a growth fit")
    blocks, ratios = [], []
    for J in range(top):
        lo, hi = 2**J, min(2 ** (J + 1), op.n_modes)
        x = np.zeros(op.n_modes)
        x[lo:hi] = np.sign(c[lo:hi])
        if not np.any(x):
            continue
        blocks.append(J)
        ratios.append(abs(float(c @ x)) / interp_norm_k_functional(op, theta, q, x))
    blocks, ratios = np.array(blocks), np.array(ratios)
    growth = float(np.polyfit(blocks[-n_top:] * math.log(2.0), np.log(ratios[-n_top:]), 1)[0])
    return TraceRatioReport(theta, blocks, ratios, float(ratios.max()), growth, growth <= growth_tol)


def semigroup_interp_gain(op: SpectralOperator, theta: float, t, modes) -> np.ndarray:
    """``t ||T(t) e_n||_Z / ||e_n||_W`` for ``Z = (X, X_1)_{theta,1}``, ``W = (X_{-1}, X)_{theta,inf}``.

    ``W`` is realised through ``A^{-1}``, which maps the couple ``(X_{-1}, X)``
    isometrically onto ``(X, X_1)``.  Returns shape ``(len(t), len(modes))``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((len(t), len(modes)))
    for j, n in enumerate(modes):
        mu = op.mu[n]
        z = interp_norm_single_mode(mu, theta, 1.0)
        w = interp_norm_single_mode(mu, theta, math.inf) / mu
        out[:, j] = t * np.exp(-t * mu) * z / w
    return out


# ---------------------------------------------------------------- counterexample

@dataclass(frozen=True)
class CounterexampleReport:
    ks: np.ndarray
    input_norms: np.ndarray
    lp_norm: float
    sup_outputs: np.ndarray
    ratios: np.ndarray
    endpoint_values: np.ndarray
    growth_exponent: float
    beta: float

    @property
    def grows_like_k_beta(self) -> bool:
        return abs(self.growth_exponent - self.beta) < 0.05 * self.beta + 0.02


def counterexample_alpha_negative(epsilon: float, p: float, beta: float,
                                  k_max: int, ks=None) -> CounterexampleReport:
    """Scalar system ``T(t) = exp(-epsilon t)`` driven by ``u_k = 1_[k,k+1] exp(-epsilon (. - k))``.

    The state at ``k + delta`` is ``delta exp(-epsilon delta)`` for every ``k``
    while ``||u_k||_{L^p_alpha}`` decays like ``k^{-beta}`` with ``alpha = -beta``.
    """
    from .spectral import control as _control, scalar_operator
    if beta <= 0 or math.isinf(p):
        raise ValueError("need beta > 0 and p < inf")
    op = scalar_operator(0.0, epsilon)
    B = _control(1.0, 0.0)
    ks = np.arange(1, k_max + 1) if ks is None else np.asarray(ks)
    norms, sups, ends = [], [], []
    peak = math.exp(-epsilon) if epsilon <= 1.0 else 1.0 / (math.e * epsilon)
    for k in ks:
        u = PiecewiseExponential.single(float(k), 1.0, 1.0, epsilon)
        norms.append(u.weighted_norm(p, -beta))
        delta = np.linspace(0.0, 1.0, 201)[1:]
        y = u.convolve_modes(op.mu, k + delta)[:, 0] * B.coefficients(op)[0]
        sups.append(max(float(np.max(y)), peak))
        ends.append(float(u.convolve_modes(op.mu, [k + 1.0])[0, 0]))
    norms, sups = np.array(norms), np.array(sups)
    ratios = sups / norms
    lk = np.log(ks.astype(float))
    tailpart = ks >= max(2, ks.max() // 4) if len(ks) > 2 else np.ones(len(ks), bool)
    slope = float(np.polyfit(lk[tailpart], np.log(ratios[tailpart]), 1)[0]) if tailpart.sum() > 1 else math.nan
    lp = ((1 - math.exp(-epsilon * p)) / (epsilon * p)) ** (1.0 / p)
    return CounterexampleReport(ks, norms, lp, sups, ratios, np.array(ends), slope, beta)

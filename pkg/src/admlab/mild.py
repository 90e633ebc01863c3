"""Picard iteration for the closed-loop heat equation with distributed-measurement feedback.

The state obeys ``x' + A x = B u`` with ``u = (F(x) - F(x0)) C x`` and
``F(x) y = f(psi(x)) g y``, where ``psi(x)`` integrates the state over a
subinterval.  Mild solutions are fixed points of

    (Gamma x)(t) = T(t) x0 + int_0^t T(t - s) B (F(x(s)) - F(x0)) C x(s) ds

in the norm ``||x||_Sigma = max(sup_t ||x(t)||_X, ||x||_{L^p_alpha(0, tau; Z)})``
with ``Z`` the graph-norm space of ``A``.  Time is discretised with
high-order Gauss-Legendre panels; on each panel the input is the Lagrange
interpolant through the panel nodes and the modal convolution of that
interpolant is integrated exactly up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Callable

import numpy as np
from scipy import optimize

from .quadrature import TimeGrid, gauss_jacobi_left, gauss_legendre, graded_rule
from .spectral import BoundaryOperator, SpectralOperator, WeightParams, weighted_lp_norm


class ParameterError(RuntimeError):
    """No horizon satisfies the ball conditions; carries the measured curves."""

    def __init__(self, msg: str, taus=None, c_v=None, l_v=None):
        super().__init__(msg)
        self.taus, self.c_v, self.l_v = taus, c_v, l_v


class ContractionError(RuntimeError):
    pass


class BallExitError(RuntimeError):
    pass


# ---------------------------------------------------------------- system

def region_functional(op: SpectralOperator, region: tuple[float, float]) -> np.ndarray:
    """``psi_n = int_a^b phi_n`` for the Neumann cosine basis."""
    a, b = region
    if not 0.0 <= a < b <= 1.0:
        raise ValueError("region must be a subinterval of [0, 1]")
    n = np.arange(op.n_modes)
    out = np.empty(op.n_modes)
    out[0] = b - a
    k = n[1:] * math.pi
    out[1:] = math.sqrt(2.0) * (np.sin(k * b) - np.sin(k * a)) / k
    return out


@dataclass(frozen=True)
class FeedbackSystem:
    """Galerkin system on the first ``op.n_modes`` modes.

    ``f`` is the scalar nonlinearity with Lipschitz constant ``lip_f``; ``g`` the
    boundary multiplier; ``region`` the measurement interval.
    """

    op: SpectralOperator
    B: BoundaryOperator
    C: BoundaryOperator
    f: Callable[[np.ndarray], np.ndarray]
    lip_f: float
    g: float = 1.0
    region: tuple[float, float] = (0.25, 0.5)

    def __post_init__(self) -> None:
        if self.lip_f < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if self.B.kind != "control" or self.C.kind != "observation":
            raise TypeError("need a control B and an observation C")

    @property
    def psi(self) -> np.ndarray:
        return region_functional(self.op, self.region)

    @property
    def b(self) -> np.ndarray:
        return self.B.coefficients(self.op)

    @property
    def c(self) -> np.ndarray:
        return self.C.coefficients(self.op)

    @property
    def z_weights(self) -> np.ndarray:
        """Graph norm of ``Z``: ``||x||_Z = ||(1 + lambda_n) x_n||``."""
        return 1.0 + self.op.eigenvalues

    @property
    def L(self) -> float:
        """Lipschitz constant of ``x -> F(x)`` as a map ``X -> B(Y, U)``."""
        return self.lip_f * abs(self.g) * float(np.linalg.norm(self.psi))

    @property
    def C_norm(self) -> float:
        """``||C||_{Z -> Y}``."""
        return float(np.linalg.norm(self.c / self.z_weights))

    def feedback_input(self, x: np.ndarray, x0: np.ndarray) -> np.ndarray:
        """``(F(x(t)) - F(x0)) C x(t)`` at every node; ``x`` has shape ``(n, modes)``."""
        psi = self.psi
        fx = self.f(x @ psi)
        f0 = self.f(np.array([x0 @ psi]))[0]
        return (fx - f0) * self.g * (x @ self.c)

    def rhs(self, t, x, x0):
        """Right-hand side of the modal ODE, used by the independent oracle."""
        u = (self.f(np.array([x @ self.psi]))[0] - self.f(np.array([x0 @ self.psi]))[0]) * self.g * (x @ self.c)
        return -self.op.mu * x + self.b * u


# ---------------------------------------------------------------- discretisation

@lru_cache(maxsize=None)
def _lagrange_tools(order: int):
    x, w = gauss_legendre(order)
    V = np.polynomial.legendre.legvander(2 * x - 1, order - 1)
    return x, w, np.linalg.inv(V)


def _lagrange_matrix(order: int, y: np.ndarray) -> np.ndarray:
    """Values of the panel Lagrange basis at unit points ``y``; shape ``(len(y), order)``."""
    _, _, Vinv = _lagrange_tools(order)
    return np.polynomial.legendre.legvander(2 * np.asarray(y) - 1, order - 1) @ Vinv


class SolverGrid:
    """Panels on ``[0, tau]`` graded toward 0 with width at most ``max_width``.

    Precomputes, for every panel and mode, the exact weights
    ``int_a^{t_j} exp(-mu (t_j - s)) l_i(s) ds`` (``l_i`` the Lagrange basis on
    the panel nodes) and the panel transfer weights up to the panel end.
    """

    def __init__(self, mu: np.ndarray, tau: float, *, order: int = 16, levels: int = 30,
                 max_width: float | None = None, edges: np.ndarray | None = None):
        self.mu = np.asarray(mu, dtype=float)
        self.tau = float(tau)
        self.order = order
        if edges is None:
            if max_width is None:
                max_width = 4.0 / max(float(self.mu.max()), 1e-300)
            graded = tau * 2.0 ** -np.arange(levels, -1, -1.0)
            base = np.concatenate([[0.0], graded])
            pieces = [base[:1]]
            for lo, hi in zip(base[:-1], base[1:]):
                n = max(1, math.ceil((hi - lo) / max_width))
                pieces.append(np.linspace(lo, hi, n + 1)[1:])
            edges = np.concatenate(pieces)
        self.edges = np.asarray(edges, dtype=float)
        x, w, _ = _lagrange_tools(order)
        a = self.edges[:-1, None]
        h = np.diff(self.edges)[:, None]
        self.nodes = (a + h * x).ravel()
        self.weights = (h * w).ravel()
        self.grid = TimeGrid(self.nodes, self.weights, self.tau)
        self._build()

    @property
    def n_panels(self) -> int:
        return len(self.edges) - 1

    def _build(self) -> None:
        order = self.order
        xg, _, _ = _lagrange_tools(order)
        yq, wq = gauss_legendre(48)
        # Lagrange values at x_j * y_q for every node j: shape (order, 48, order)
        Lint = np.stack([_lagrange_matrix(order, xj * yq) for xj in xg])
        Lend = _lagrange_matrix(order, yq)
        mu = self.mu
        hs = np.diff(self.edges)
        P = np.empty((self.n_panels, len(mu), order, order))
        E = np.empty((self.n_panels, len(mu), order))
        for k, h in enumerate(hs):
            # int_0^{h x_j} exp(-mu (h x_j - v)) l_i(v / h) dv, v = h x_j y
            lam = mu[:, None, None] * h * xg[None, :, None] * (1.0 - yq[None, None, :])
            ker = np.exp(-lam) * (h * xg)[None, :, None] * wq[None, None, :]
            P[k] = np.einsum("njq,jqi->nji", ker, Lint)
            kend = np.exp(-mu[:, None] * h * (1.0 - yq[None, :])) * h * wq[None, :]
            E[k] = kend @ Lend
        self.P, self.E = P, E
        self.decay_in = np.exp(-mu[None, :, None] * hs[:, None, None] * xg[None, None, :])
        self.decay_panel = np.exp(-np.outer(hs, mu))

    def convolve(self, h: np.ndarray) -> np.ndarray:
        """``int_0^t exp(-mu (t - s)) h(s) ds`` at every node, for every mode; shape ``(n, modes)``."""
        order = self.order
        h = np.asarray(h, dtype=float).reshape(self.n_panels, order)
        out = np.empty((self.n_panels, order, len(self.mu)))
        state = np.zeros(len(self.mu))
        for k in range(self.n_panels):
            out[k] = (self.decay_in[k] * state[:, None] + self.P[k] @ h[k]).T
            state = self.decay_panel[k] * state + self.E[k] @ h[k]
        return out.reshape(-1, len(self.mu))

    def convolution_matrices(self) -> np.ndarray:
        """Dense matrices ``Q_n`` with ``convolve(h)[:, n] = Q_n @ h``; shape ``(modes, n, n)``."""
        n, order, m = len(self.nodes), self.order, len(self.mu)
        Q = np.zeros((m, n, n))
        state = np.zeros((m, n))
        for k in range(self.n_panels):
            rows = slice(k * order, (k + 1) * order)
            Q[:, rows, :] = self.decay_in[k][:, :, None] * state[:, None, :]
            Q[:, rows, rows] += self.P[k]
            state = self.decay_panel[k][:, None] * state
            state[:, rows] += self.E[k]
        return Q

    def refined(self) -> SolverGrid:
        """Every panel split in two."""
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        e = np.empty(2 * len(self.edges) - 1)
        e[0::2], e[1::2] = self.edges, mids
        return SolverGrid(self.mu, self.tau, order=self.order, edges=e)

    def evaluate(self, values: np.ndarray, t) -> np.ndarray:
        """Panel-wise Lagrange interpolation of nodal values at arbitrary times in ``[0, tau]``."""
        values = np.asarray(values, dtype=float)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vals = values.reshape(self.n_panels, self.order, -1)
        out = np.empty((len(t), vals.shape[2]))
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.n_panels - 1)
        for k in np.unique(idx):
            sel = idx == k
            a, b = self.edges[k], self.edges[k + 1]
            out[sel] = _lagrange_matrix(self.order, (t[sel] - a) / (b - a)) @ vals[k]
        return out.reshape((len(t),) + values.shape[1:])

    def interpolate_to(self, values: np.ndarray, other: SolverGrid) -> np.ndarray:
        return self.evaluate(values, other.nodes)


# ---------------------------------------------------------------- norms

def sigma_norm(sys: FeedbackSystem, grid: SolverGrid, x: np.ndarray, wp: WeightParams) -> tuple[float, float]:
    """``(sup_t ||x(t)||_X, ||x||_{L^p_alpha(Z)})`` on the solver grid."""
    sup = float(np.max(np.linalg.norm(x, axis=1)))
    lp = weighted_lp_norm(grid.grid, x * sys.z_weights, WeightParams(wp.p, wp.alpha, grid.tau))
    return sup, lp


def _smax(pair) -> float:
    return max(pair)


def wellposedness_constant(sys: FeedbackSystem, grid: SolverGrid, wp: WeightParams) -> float:
    """Exact norm of the discrete map ``u -> T * B u`` from ``L^2_alpha`` into the Sigma norm.

    Needs ``p = 2``: the input and output norms are then weighted l2 norms of
    nodal values and both parts reduce to symmetric eigenvalue problems.
    """
    if wp.p != 2:
        raise ValueError("the exact discrete constant needs p = 2; supply K for other p")
    t, w = grid.nodes, grid.weights
    d = np.sqrt(w) * t**wp.alpha
    Q = grid.convolution_matrices() * sys.b[:, None, None] / d[None, None, :]
    # L^2_alpha(Z) part
    S = (sys.z_weights[:, None, None] * d[None, :, None]) * Q
    G = np.einsum("mji,mjk->ik", S, S)
    l2 = math.sqrt(max(np.linalg.eigvalsh(G)[-1], 0.0))
    # sup part: at every node the map is a (modes x n) matrix
    R = np.transpose(Q, (1, 0, 2))
    RR = np.einsum("jmi,jki->jmk", R, R)
    sup = math.sqrt(max(float(np.max(np.linalg.eigvalsh(RR)[:, -1])), 0.0))
    return max(l2, sup)


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class Parameters:
    rho: float
    tau: float
    eta: float
    K: float
    L: float
    C_norm: float


def free_trajectory(sys: FeedbackSystem, x0: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.exp(-np.outer(t, sys.op.mu)) * x0


def c_v(sys: FeedbackSystem, x0: np.ndarray, tau: float) -> float:
    """``sup_{t <= tau} ||T(t) x0 - x0||``; each mode moves monotonically, so it is the value at ``tau``."""
    return float(np.linalg.norm(np.expm1(-tau * sys.op.mu) * x0))


def l_v(sys: FeedbackSystem, x0: np.ndarray, tau: float, wp: WeightParams) -> float:
    """``||T(.) x0||_{L^p_alpha(0, tau; Z)}`` by graded quadrature."""
    ap = wp.alpha * wp.p
    x, w = graded_rule(0.0, tau, levels=40, order=16, left=ap, toward="left")
    vals = np.linalg.norm(free_trajectory(sys, x0, x) * sys.z_weights, axis=1)
    return float(np.sum(w * x**ap * vals**wp.p)) ** (1.0 / wp.p)


def choose_parameters(sys: FeedbackSystem, x0: np.ndarray, wp: WeightParams, *,
                      K: float | None = None, rho_max: float = 1.0, tau_max: float = 0.05,
                      grid: SolverGrid | None = None) -> Parameters:
    """Ball radius from ``eta = 4 K L ||C|| rho <= 1/2``, then the largest admissible horizon.

    ``K`` defaults to the exact discrete constant on ``[0, tau_max]``; it bounds
    the constant of every shorter horizon.
    """
    x0 = np.asarray(x0, dtype=float)
    if K is None:
        if grid is None:
            grid = SolverGrid(sys.op.mu, tau_max)
        K = wellposedness_constant(sys, grid, wp)
    L, Cn = sys.L, sys.C_norm
    if not (math.isfinite(K) and K > 0 and math.isfinite(Cn) and Cn > 0):
        raise ParameterError("K and ||C|| must be finite and positive")
    rho = rho_max if L == 0 else min(rho_max, 0.5 / (4.0 * K * L * Cn))
    eta = 4.0 * K * L * Cn * rho

    def excess(tau):
        return max(c_v(sys, x0, tau), l_v(sys, x0, tau, wp)) - rho

    if excess(tau_max) <= 0:
        tau = tau_max
    else:
        lo = tau_max * 1e-12
        if excess(lo) > 0:
            taus = tau_max * np.logspace(-12, 0, 25)
            raise ParameterError("no horizon keeps T(.)x0 inside the ball", taus,
                                 [c_v(sys, x0, t) for t in taus], [l_v(sys, x0, t, wp) for t in taus])
        tau = optimize.brentq(excess, lo, tau_max, xtol=1e-14 * tau_max, rtol=1e-12)
        tau = tau * (1 - 1e-9)
    return Parameters(rho, tau, eta, K, L, Cn)


# ---------------------------------------------------------------- iteration

@dataclass
class FixedPointRun:
    rho: float
    tau: float
    eta: float
    iterates: list[tuple[float, float]] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    ball_distances: list[float] = field(default_factory=list)
    residual: float = math.nan
    converged: bool = False
    trajectory: np.ndarray | None = None
    grid: SolverGrid | None = None

    @property
    def n_steps(self) -> int:
        return len(self.iterates)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)

    def state_at(self, t) -> np.ndarray:
        return self.grid.evaluate(self.trajectory, t)


def gamma_map(sys: FeedbackSystem, grid: SolverGrid, x: np.ndarray, x0: np.ndarray,
              v: np.ndarray) -> np.ndarray:
    h = sys.feedback_input(x, x0)
    return v + grid.convolve(h) * sys.b


def picard_iterate(sys: FeedbackSystem, x0, wp: WeightParams, rho: float, tau: float,
                   tol: float = 1e-10, max_iter: int = 200, *, eta: float | None = None,
                   grid: SolverGrid | None = None, start: np.ndarray | None = None,
                   ratio_tol: float = 0.05, check_ball: bool = True) -> FixedPointRun:
    """Iterate ``x <- Gamma x`` from ``x = v`` (or ``start``) until successive iterates are ``tol`` close."""
    x0 = np.asarray(x0, dtype=float)
    if grid is None or abs(grid.tau - tau) > 1e-15 * tau:
        grid = SolverGrid(sys.op.mu, tau)
    if eta is None:
        eta = 4.0 * wellposedness_constant(sys, grid, wp) * sys.L * sys.C_norm * rho
    if eta >= 1:
        raise ValueError(f"eta={eta} is not a contraction factor")
    v = free_trajectory(sys, x0, grid.nodes)
    x = v.copy() if start is None else np.asarray(start, dtype=float)
    run = FixedPointRun(rho, tau, eta, grid=grid)
    prev = None
    for _ in range(max_iter):
        nx = gamma_map(sys, grid, x, x0, v)
        pair = sigma_norm(sys, grid, nx - x, wp)
        d = _smax(pair)
        run.iterates.append(pair)
        if prev is not None and prev > 1e-13:
            r = d / prev
            run.ratios.append(r)
            if r > eta + ratio_tol:
                raise ContractionError(f"step ratio {r:.4g} exceeds eta + {ratio_tol} = {eta + ratio_tol:.4g}")
        dist = _smax(sigma_norm(sys, grid, nx - v, wp))
        run.ball_distances.append(dist)
        if check_ball and dist > rho * (1 + 1e-12):
            raise BallExitError(f"iterate left the ball: distance {dist:.4g} > rho {rho:.4g}")
        x, prev = nx, d
        if d < tol:
            run.converged = True
            break
    run.trajectory = x
    run.residual = residual(sys, grid, x, x0, wp)
    return run


def residual(sys: FeedbackSystem, grid: SolverGrid, x: np.ndarray, x0, wp: WeightParams) -> float:
    """``||x - Gamma x||_Sigma`` on the grid with every panel split in two."""
    x0 = np.asarray(x0, dtype=float)
    fine = grid.refined()
    xf = grid.interpolate_to(x, fine)
    v = free_trajectory(sys, x0, fine.nodes)
    return _smax(sigma_norm(sys, fine, xf - gamma_map(sys, fine, xf, x0, v), wp))


def heat_feedback_system(n_modes: int = 16, *, shift: float = 0.0, lip_f: float = 1.0,
                         f: Callable | None = None, g: float = 1.0,
                         region: tuple[float, float] = (0.25, 0.5)) -> FeedbackSystem:
    """Neumann heat equation, boundary control and trace at 0, feedback ``f(psi(x)) g C x``."""
    from .spectral import control, neumann_laplacian, observation
    op = neumann_laplacian(n_modes, shift)
    return FeedbackSystem(op, control(1.0, 0.0), observation(1.0, 0.0),
                          f if f is not None else (lambda r: lip_f * np.asarray(r)),
                          lip_f, g, region)


def centred_initial_state(sys: FeedbackSystem, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random smooth state with ``psi(x0) = 0``."""
    n = sys.op.n_modes
    x = rng.standard_normal(n) / (1.0 + np.arange(n)) ** 2
    psi = sys.psi
    x -= (x @ psi) / (psi @ psi) * psi
    return scale * x / np.linalg.norm(x)

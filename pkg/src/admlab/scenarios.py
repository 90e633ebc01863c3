"""Named experiments: parameter schemas, runners and embedded checks.

Every runner returns a ``Result``: a table (header + rows), the provenance tag
of each numeric column, optional summary values and the list of failed checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Any, Callable

import numpy as np

CLOSED_FORM, QUADRATURE, TRIAL_MAX = "closed-form", "quadrature", "trial-max"
TAGS = (CLOSED_FORM, QUADRATURE, TRIAL_MAX)


class ConfigError(ValueError):
    pass


@dataclass
class Result:
    columns: list[str]
    rows: list[list[Any]]
    provenance: dict[str, str]
    summary: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    tolerance: float = 1e-8

    def check(self, ok: bool, msg: str) -> None:
        if not ok:
            self.failures.append(msg)


@dataclass(frozen=True)
class Kind:
    name: str
    run: Callable[[dict, int | None, float], Result]
    defaults: dict
    randomized: bool
    doc: str


KINDS: dict[str, Kind] = {}


def kind(name: str, defaults: dict, randomized: bool = False):
    def deco(fn):
        KINDS[name] = Kind(name, fn, defaults, randomized, (fn.__doc__ or "").strip())
        return fn
    return deco


def validate(kind_name: str, params: dict, seed) -> dict:
    """Merge defaults and reject unknown keys or wrong types."""
    if kind_name not in KINDS:
        raise ConfigError(f"unknown kind {kind_name!r}; expected one of {sorted(KINDS)}")
    k = KINDS[kind_name]
    unknown = set(params) - set(k.defaults)
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)} for kind {kind_name!r}")
    out = dict(k.defaults)
    for key, val in params.items():
        ref = k.defaults[key]
        if isinstance(ref, bool):
            ok = isinstance(val, bool)
        elif isinstance(ref, (int, float)):
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        elif isinstance(ref, list):
            ok = isinstance(val, list)
        else:
            ok = isinstance(val, type(ref))
        if not ok:
            raise ConfigError(f"parameter {key!r} of kind {kind_name!r} has the wrong type")
        out[key] = val
    if k.randomized and seed is None:
        raise ConfigError(f"kind {kind_name!r} draws random trials and needs a seed")
    return out


# ---------------------------------------------------------------- kinds

@kind("wc-scan", {"p": 2.0, "alpha": 0.0, "k": 1, "n_modes": 4096, "shift": 1.0,
                  "weights": [1.0, 0.0], "slope_tol": 0.02})
def _wc_scan(par, seed, tol_scale):
    """Weiss-type scan of lam^{k-alpha-1/p} ||C (lam+A)^{-k}|| on the heat instance."""
    from .admissibility import predicted_resolvent_slope, scan_WC
    from .spectral import neumann_laplacian, observation
    op = neumann_laplacian(par["n_modes"], par["shift"])
    s = scan_WC(op, observation(*par["weights"]), par["p"], par["alpha"], par["k"],
                slope_tol=par["slope_tol"])
    pred = predicted_resolvent_slope(par["alpha"], par["p"], par["k"], "obs")
    r = Result(["p", "alpha", "k", "slope_low", "slope_high", "predicted_slope_high", "sup_value", "verdict"],
               [[par["p"], par["alpha"], par["k"], s.slope_low, s.slope_high, pred, s.sup_value, s.verdict]],
               {"p": CLOSED_FORM, "alpha": CLOSED_FORM, "k": CLOSED_FORM, "slope_low": QUADRATURE,
                "slope_high": QUADRATURE, "predicted_slope_high": CLOSED_FORM, "sup_value": QUADRATURE},
               tolerance=1e-10)
    r.check(abs(s.slope_high - pred) <= 0.02 * tol_scale,
            f"slope_high {s.slope_high:.5f} vs predicted {pred:.5f}")
    return r


@kind("wb-scan", {"p": 2.0, "alpha": 0.0, "k": 1, "n_modes": 4096, "shift": 1.0,
                  "weights": [1.0, 0.0], "slope_tol": 0.02})
def _wb_scan(par, seed, tol_scale):
    """Weiss-type scan of lam^{k+alpha-1/p'} ||(lam+A)^{-k} B|| on the heat instance."""
    from .admissibility import predicted_resolvent_slope, scan_WB
    from .spectral import control, neumann_laplacian
    op = neumann_laplacian(par["n_modes"], par["shift"])
    s = scan_WB(op, control(*par["weights"]), par["p"], par["alpha"], par["k"],
                slope_tol=par["slope_tol"])
    pred = predicted_resolvent_slope(par["alpha"], par["p"], par["k"], "ctrl")
    r = Result(["p", "alpha", "k", "slope_low", "slope_high", "predicted_slope_high", "sup_value", "verdict"],
               [[par["p"], par["alpha"], par["k"], s.slope_low, s.slope_high, pred, s.sup_value, s.verdict]],
               {"p": CLOSED_FORM, "alpha": CLOSED_FORM, "k": CLOSED_FORM, "slope_low": QUADRATURE,
                "slope_high": QUADRATURE, "predicted_slope_high": CLOSED_FORM, "sup_value": QUADRATURE},
               tolerance=1e-10)
    r.check(abs(s.slope_high - pred) <= 0.02 * tol_scale,
            f"slope_high {s.slope_high:.5f} vs predicted {pred:.5f}")
    return r


@kind("lpstar", {"p": 2.0, "thetas": [0.25, 0.5, 1.0], "n_random": 20, "n_modes": 4096}, randomized=True)
def _lpstar(par, seed, tol_scale):
    """Square-function estimate against its per-mode closed form."""
    from scipy import special
    from .admissibility import lp_star_estimate
    from .spectral import neumann_laplacian
    op = neumann_laplacian(par["n_modes"])
    rng = np.random.default_rng(seed)
    xs = [rng.standard_normal(op.n_modes) / (1 + np.arange(op.n_modes)) for _ in range(par["n_random"])]
    method = "exact" if par["p"] == 2 else "quadrature"
    r = Result(["theta", "trial", "ratio", "closed_form", "rel_err"], [],
               {"theta": CLOSED_FORM, "trial": CLOSED_FORM, "ratio": CLOSED_FORM if method == "exact" else QUADRATURE,
                "closed_form": CLOSED_FORM, "rel_err": QUADRATURE}, tolerance=1e-10)
    for th in par["thetas"]:
        ref = math.sqrt(special.gamma(2 * th) * 2 ** (-2 * th))
        for i, x in enumerate(xs):
            v = lp_star_estimate(op, par["p"], th, x, method=method) / np.linalg.norm(x)
            r.rows.append([th, i, v, ref, abs(v - ref) / ref])
    if par["p"] == 2:
        worst = max(row[4] for row in r.rows)
        r.check(worst < 1e-6 * tol_scale, f"lpstar rel_err {worst:.3g} >= 1e-6")
    return r


@kind("kernel-lattice", {"ps": [1.0, 1.5, 2.0, 4.0], "exps": [-1.0, -0.5, 0.0, 0.2, 0.45],
                         "taus": [0.5, 1.0, 10.0], "levels": 40, "rel_tol": 1e-6})
def _kernel_lattice(par, seed, tol_scale):
    """Closed-form against brute-force norms of power-power Volterra kernels."""
    from .kernels import classify, lattice, norm_bruteforce, norm_closed_form
    r = Result(["p", "alpha", "gamma", "tau", "tag", "norm_closed", "norm_brute", "rel_err"], [],
               {"p": CLOSED_FORM, "alpha": CLOSED_FORM, "gamma": CLOSED_FORM, "tau": CLOSED_FORM,
                "norm_closed": CLOSED_FORM, "norm_brute": QUADRATURE, "rel_err": QUADRATURE},
               tolerance=1e-8)
    for s in lattice(par["ps"], par["exps"], par["taus"]):
        c = norm_closed_form(s)
        b = norm_bruteforce(s, levels=par["levels"]).value
        r.rows.append([s.p, s.alpha, s.gamma, s.tau, classify(s).tag, c, b, abs(c - b) / c])
    for row in r.rows:
        if row[7] >= par["rel_tol"] * tol_scale:
            r.check(False, f"kernel p={row[0]} alpha={row[1]} gamma={row[2]} tau={row[3]}: rel_err {row[7]:.3g}")
            break
    return r


@kind("conv-equivalence", {"p": 2.0, "alphas": [-0.2, 0.0, 0.25], "horizon": 8.0, "n_random": 6,
                           "safety": 1.1}, randomized=True)
def _conv_equivalence(par, seed, tol_scale):
    """Weighted and unweighted input-output norms of the heat boundary system."""
    from .convolution import conv_grid, equivalence_ratio, heat_system, trial_family
    sys = heat_system()
    grid, edges = conv_grid(par["horizon"])
    trials = trial_family(np.random.default_rng(seed), edges, n_random=par["n_random"])
    r = Result(["alpha", "norm_F", "norm_F_alpha", "gap", "commutator_estimate", "bound", "c_tilde", "M_bound"], [],
               {"alpha": CLOSED_FORM, "norm_F": TRIAL_MAX, "norm_F_alpha": TRIAL_MAX, "gap": TRIAL_MAX,
                "commutator_estimate": TRIAL_MAX, "bound": QUADRATURE, "c_tilde": QUADRATURE,
                "M_bound": QUADRATURE}, tolerance=1e-8)
    for a in par["alphas"]:
        rep = equivalence_ratio(sys, par["p"], a, trials, par["horizon"], grid=grid)
        gap = abs(rep.norm_F_alpha - rep.norm_F)
        bound = par["safety"] * rep.pointwise_bound
        r.rows.append([a, rep.norm_F, rep.norm_F_alpha, gap, rep.commutator_estimate, bound, rep.c_tilde, rep.M_bound])
        if a == 0:
            r.check(gap <= 1e-10, f"alpha=0 norms differ by {gap:.3g}")
        else:
            r.check(gap <= bound * tol_scale, f"alpha={a}: gap {gap:.4g} > bound {bound:.4g}")
    return r


@kind("counterexample", {"epsilon": 1.0, "p": 2.0, "beta": 0.5, "ks": [10, 100]})
def _counterexample(par, seed, tol_scale):
    """Scalar system whose output stays fixed while the weighted input norm decays."""
    from .admissibility import counterexample_alpha_negative
    ks = [int(k) for k in par["ks"]]
    rep = counterexample_alpha_negative(par["epsilon"], par["p"], par["beta"], max(ks), ks=ks)
    r = Result(["k", "input_norm", "sup_output", "ratio", "endpoint_value"], [],
               {"k": CLOSED_FORM, "input_norm": QUADRATURE, "sup_output": CLOSED_FORM,
                "ratio": QUADRATURE, "endpoint_value": CLOSED_FORM}, tolerance=1e-8)
    for i, k in enumerate(ks):
        r.rows.append([k, rep.input_norms[i], rep.sup_outputs[i], rep.ratios[i], rep.endpoint_values[i]])
    ref = math.exp(-par["epsilon"])
    for row in r.rows:
        r.check(abs(row[4] - ref) < 1e-10 * tol_scale, f"endpoint value {row[4]!r} != exp(-epsilon)")
    if len(ks) >= 2:
        g = rep.ratios[-1] / rep.ratios[0]
        pred = (ks[-1] / ks[0]) ** par["beta"]
        r.summary["growth"] = g
        r.summary["predicted_growth"] = pred
        r.check(abs(g / pred - 1) <= 0.1 * tol_scale, f"ratio growth {g:.4g} vs {pred:.4g}")
    return r


@kind("picard", {"n_modes": 16, "p": 2.0, "alpha": 0.1, "lip": 1.0, "g": 1.0, "region": [0.25, 0.5],
                 "scale": 0.002, "tol": 1e-10, "max_iter": 100, "tau_max": 0.01, "feedback": "linear"},
      randomized=True)
def _picard(par, seed, tol_scale):
    """Fixed-point iteration for the heat equation with distributed-measurement feedback."""
    from .mild import centred_initial_state, choose_parameters, heat_feedback_system, picard_iterate
    from .spectral import WeightParams
    if par["feedback"] not in ("linear", "zero"):
        raise ConfigError("feedback must be 'linear' or 'zero'")
    linear = par["feedback"] == "linear"
    sys = heat_feedback_system(par["n_modes"], lip_f=par["lip"] if linear else 0.0, g=par["g"],
                               region=tuple(par["region"]),
                               f=None if linear else (lambda r: 0.0 * np.asarray(r)))
    x0 = centred_initial_state(sys, np.random.default_rng(seed), par["scale"])
    wp = WeightParams(par["p"], par["alpha"])
    prm = choose_parameters(sys, x0, wp, tau_max=par["tau_max"])
    run = picard_iterate(sys, x0, wp, prm.rho, prm.tau, par["tol"], par["max_iter"], eta=prm.eta)
    r = Result(["step", "sup_distance", "weighted_distance", "ratio", "eta"], [],
               {"step": CLOSED_FORM, "sup_distance": QUADRATURE, "weighted_distance": QUADRATURE,
                "ratio": QUADRATURE, "eta": QUADRATURE}, tolerance=1e-6)
    for m, (a, b) in enumerate(run.iterates):
        ratio = run.ratios[m - 1] if 0 < m <= len(run.ratios) else float("nan")
        r.rows.append([m + 1, a, b, ratio, prm.eta])
    r.summary.update(rho=prm.rho, tau=prm.tau, eta=prm.eta, K=prm.K, L=prm.L, C_norm=prm.C_norm,
                     residual=run.residual, converged=run.converged, steps=run.n_steps)
    r.check(run.converged, "iteration did not converge")
    r.check(run.max_ratio <= prm.eta + 0.05, f"step ratio {run.max_ratio:.4g} > eta + 0.05")
    r.check(run.residual <= 10 * par["tol"] * tol_scale, f"residual {run.residual:.3g} > 10 tol")
    return r


@kind("besov-region", {"q_grid": [1.2, 1.5, 1.8, 2.2, 2.6, 3.0, 3.5, 4.0, 5.0],
                       "p_grid": [1.2, 1.5, 1.8, 2.2, 2.6, 3.0, 3.5, 4.0, 5.0],
                       "N": 15, "growth_threshold": 0.02, "n_random": 3, "margin": 0.1}, randomized=True)
def _besov_region(par, seed, tol_scale):
    """Embedding region of L^q into B^0_{q,p} from the growth of Haar norm ratios."""
    from .besov import EMBEDS, embedding_region_scan
    cells = embedding_region_scan(par["q_grid"], par["p_grid"], par["N"], par["growth_threshold"],
                                  n_random=par["n_random"], seed=seed)
    r = Result(["q", "p", "verdict", "exponent", "exponent_nested", "exponent_disjoint", "predicted", "checked"], [],
               {"q": CLOSED_FORM, "p": CLOSED_FORM, "exponent": TRIAL_MAX, "exponent_nested": CLOSED_FORM,
                "exponent_disjoint": CLOSED_FORM, "predicted": CLOSED_FORM, "checked": CLOSED_FORM},
               tolerance=1e-8)
    for c in cells:
        checked = abs(c.p - max(2.0, c.q)) >= par["margin"]
        r.rows.append([c.q, c.p, c.verdict, c.exponent, c.exponents["nested"], c.exponents["disjoint"],
                       int(c.predicted), int(checked)])
        if checked:
            r.check((c.verdict == EMBEDS) == c.predicted, f"(q, p) = ({c.q}, {c.p}): {c.verdict}")
    return r

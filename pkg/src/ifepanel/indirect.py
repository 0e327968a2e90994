"""The indirect fixed-effect estimator.

The estimator simulates panels from the fitted model using the estimated
individual effects and fixed pre-drawn shocks, re-runs the fixed-effect
estimation on each simulated panel, and solves the matching equation
between the observed-data estimate and the average simulated-data
estimate.  Matching the two estimates cancels the common incidental-
parameter bias; the price is a variance inflation of (1 + 1/n_paths).

The simulated objective is piecewise constant in theta for discrete
outcomes, so the matching equation is solved derivative-free: a damped
fixed-point iteration started at the observed estimate, with a simplex
search on the squared residual as fallback.  With discrete outcomes the
residual has a resolution floor of order 1/(nT); when it plateaus above
tolerance the best iterate is returned flagged not-converged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .families import Family, NEYMAN_SCOTT, get_family
from .fe import FEFit, FitError, FitOptions, fit_fe
from .panel import PanelData, PanelDataError, with_outcomes
from .shocks import ShockStore


@dataclass(frozen=True)
class SolverOptions:
    tol_match: float = 1e-4
    max_fixed_point: int = 50
    max_simplex_evals: int = 400
    theta_bound: float = 50.0


@dataclass(frozen=True)
class IndirectFit:
    """Matching-equation solution and the base fit it corrects.

    ``residual`` is the Euclidean norm of (observed estimate - average
    simulated estimate) at the returned point; ``trace`` records every
    evaluated iterate with its residual norm.  Standard errors are the
    base fit's scaled by sqrt(1 + 1/n_paths).
    """

    theta: np.ndarray
    n_paths: int
    se: np.ndarray
    residual: float
    converged: bool
    trace: tuple[tuple[tuple[float, ...], float], ...]
    base: FEFit

    def __post_init__(self):
        for attr in ("theta", "se"):
            arr = np.array(getattr(self, attr), float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)


def inflated_standard_errors(se, n_paths: int):
    """Scale standard errors by sqrt(1 + 1/n_paths) (simulation noise)."""
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    return np.asarray(se, float) * np.sqrt(1.0 + 1.0 / n_paths)


def simulate_outcomes(family, theta, alpha, X, v, lag_column=None, dynamic_init=None):
    """Outcome array simulated at (theta, alpha) from uniform shocks ``v``.

    Static models map each shock through the family simulator at the
    linear index.  Dynamic models recurse over periods, substituting the
    simulated lag into the index, with ``dynamic_init`` as the pre-sample
    outcome; the regressors other than the lag are kept as-is.
    """
    family = get_family(family)
    theta = np.asarray(theta, float)
    alpha = np.asarray(alpha, float)
    X = np.asarray(X, float)
    v = np.asarray(v, float)
    shape = X.shape[:2]
    if v.shape != shape:
        raise ValueError(f"shock slice has shape {v.shape}, expected {shape}")
    if alpha.shape != (shape[0],):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({shape[0]},)")

    if family.kind == NEYMAN_SCOTT:
        eta = np.broadcast_to(alpha[:, None], shape)
        return family.simulate_outcome(eta, v, theta_extra=float(theta[0]))

    if lag_column is None:
        eta = X @ theta + alpha[:, None]
        return family.simulate_outcome(eta, v)

    if dynamic_init is None:
        raise PanelDataError("dynamic panel requires dynamic_init (pre-sample outcomes)")
    k = int(lag_column)
    base = X @ theta - X[:, :, k] * theta[k] + alpha[:, None]
    out = np.empty(shape)
    prev = np.asarray(dynamic_init, float)
    for t in range(shape[1]):
        out[:, t] = family.simulate_outcome(base[:, t] + theta[k] * prev, v[:, t])
        prev = out[:, t]
    return out


def simulate_panel(family, theta, alpha_hat, panel: PanelData, shocks: ShockStore,
                   path: int, dynamic_init=None):
    """Simulated outcomes for one shock path (see ``simulate_outcomes``)."""
    if not 0 <= path < shocks.n_paths:
        raise ValueError(f"path {path} out of range for {shocks.n_paths} paths")
    return simulate_outcomes(family, theta, alpha_hat, panel.X, shocks.v[path],
                             panel.lag_column, dynamic_init)


def _simulated_estimates(theta, base: FEFit, shocks: ShockStore, panel: PanelData,
                         family: Family, fit_opts: FitOptions,
                         warm_thetas=None) -> np.ndarray:
    """Per-path fixed-effect estimates on panels simulated at ``theta``.

    ``warm_thetas`` seeds each path's refit (the inner objective is
    concave, so the start point only affects speed, not the optimum);
    defaults to the candidate ``theta`` for every path.
    """
    if shocks.n != panel.n or shocks.T != panel.T:
        raise ValueError(
            f"shock store is ({shocks.n}, {shocks.T}) but panel is ({panel.n}, {panel.T})"
        )
    kept = base.kept
    sub = panel.subset_individuals(kept) if kept.size < panel.n else panel
    alpha = base.alpha[kept]
    vsub = shocks.v[:, kept, :] if kept.size < shocks.n else shocks.v
    dyn0 = sub.X[:, 0, sub.lag_column] if sub.lag_column is not None else None

    estimates = np.empty((shocks.n_paths, theta.shape[0]))
    for h in range(shocks.n_paths):
        start = theta if warm_thetas is None else warm_thetas[h]
        inner = replace(fit_opts, theta_init=start, compute_se=False)
        y_sim = simulate_outcomes(family, theta, alpha, sub.X, vsub[h], sub.lag_column, dyn0)
        sim_panel = with_outcomes(sub, y_sim, dyn0)
        try:
            fit = fit_fe(sim_panel, family, inner)
        except FitError as exc:
            raise FitError(f"simulated path h={h}: {exc}") from exc
        estimates[h] = fit.theta
    return estimates


def average_simulated_estimate(theta, base: FEFit, shocks: ShockStore, panel: PanelData,
                               family, fit_opts: FitOptions | None = None) -> np.ndarray:
    """Average fixed-effect estimate over simulated panels at ``theta``.

    Each path simulates outcomes with the base fit's effects and fixed
    shocks, re-runs ``fit_fe`` on the simulated panel (separation in the
    simulated data handled exactly as on observed data, for that path
    only), and the per-path estimates are averaged in path order.
    Individuals dropped by the base fit are excluded throughout, so the
    observed and simulated estimations use the same cross-section.
    """
    family = get_family(family)
    theta = np.asarray(theta, float)
    fit_opts = fit_opts or FitOptions()
    estimates = _simulated_estimates(theta, base, shocks, panel, family, fit_opts)
    return estimates.mean(axis=0)


def solve_indirect(base: FEFit, shocks: ShockStore, panel: PanelData, family,
                   solver_opts: SolverOptions | None = None,
                   fit_opts: FitOptions | None = None) -> IndirectFit:
    """Solve the matching equation between observed and simulated estimates.

    Damped fixed-point iteration from the observed estimate (the step is
    the current matching residual, halved on residual increase), followed
    by Nelder-Mead on the squared residual norm if the tolerance is not
    reached within the iteration budget.  Iterates are clamped to the
    parameter box.  Never evaluates derivatives of the simulated map,
    which is discontinuous in theta for discrete outcomes.
    """
    family = get_family(family)
    opts = solver_opts or SolverOptions()
    theta_hat = np.asarray(base.theta, float)
    is_ns = family.kind == NEYMAN_SCOTT
    lo_box = 1e-10 if is_ns else -opts.theta_bound
    hi_box = opts.theta_bound

    trace: list[tuple[tuple[float, ...], float]] = []
    inner_opts = fit_opts or FitOptions()
    warm = [None]

    def residual(th):
        ests = _simulated_estimates(th, base, shocks, panel, family, inner_opts, warm[0])
        warm[0] = ests  # next evaluation's refits start at these optima
        r = theta_hat - ests.mean(axis=0)
        rn = float(np.linalg.norm(r))
        trace.append((tuple(float(x) for x in th), rn))
        return r, rn

    theta = theta_hat.copy()
    r, rn = residual(theta)
    best_theta, best_rn = theta.copy(), rn
    lam = 1.0
    stalled = 0
    for _ in range(opts.max_fixed_point):
        if best_rn <= opts.tol_match or stalled >= 8 or lam < 2.0**-10:
            break
        trial = np.clip(theta + lam * r, lo_box, hi_box)
        r_trial, rn_trial = residual(trial)
        if rn_trial < rn:
            theta, r, rn = trial, r_trial, rn_trial
            lam = min(1.0, 2.0 * lam)
        else:
            lam *= 0.5
        if rn < best_rn - 1e-15:
            best_theta, best_rn = theta.copy(), rn
            stalled = 0
        else:
            stalled += 1

    if best_rn > opts.tol_match:
        def objective(th):
            _, rn_th = residual(np.clip(th, lo_box, hi_box))
            return rn_th * rn_th

        scale = 0.02 * (1.0 + np.abs(best_theta))
        simplex = np.vstack([best_theta, best_theta + np.diag(scale)])
        optimize.minimize(
            objective, best_theta, method="Nelder-Mead",
            options={
                "maxfev": opts.max_simplex_evals,
                "xatol": 1e-4,
                "fatol": 1e-12,
                "initial_simplex": simplex,
            },
        )
        for th_tuple, rn_eval in trace:
            if rn_eval < best_rn:
                best_theta = np.array(th_tuple)
                best_rn = rn_eval

    converged = best_rn <= opts.tol_match
    return IndirectFit(
        theta=best_theta,
        n_paths=shocks.n_paths,
        se=inflated_standard_errors(base.se, shocks.n_paths),
        residual=best_rn,
        converged=converged,
        trace=tuple(trace),
        base=base,
    )

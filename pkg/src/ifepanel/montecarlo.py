"""Monte Carlo harness: calibrated and synthetic designs, replication
orchestration, and bias / dispersion / coverage summaries.

Designs come in three kinds.  Calibrated designs freeze the regressors
and treat a fitted model's estimates as the truth, redrawing only the
outcome noise per replication (static or dynamic).  The varying-T design
generates fresh effects and an AR(1)-with-trend regressor each
replication.  Every replication owns derived random streams keyed by
(seed, replication, purpose), and aggregation is order-independent, so
results do not depend on how replications are scheduled.

Replications where an estimator fails outright are dropped and counted;
a result is flagged unreliable when more than 20% of replications fail
for some method.  A matching solver that merely plateaus above its
tolerance still yields a usable estimate and is not counted as a failure.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .families import Family, PROBIT, get_family
from .fe import FEFit, FitError, FitOptions, fit_fe
from .indirect import SolverOptions, simulate_outcomes, solve_indirect
from .jackknife import HALF_PANEL, LEAVE_ONE_OUT, half_panel, leave_one_out
from .panel import PanelData, build_panel
from .shocks import TAG_PANEL, TAG_SHOCKS, draw_shocks, open_uniform, replication_rng, replication_seed

VARYING_T = "varying_T"
CALIBRATED_STATIC = "calibrated_static"
CALIBRATED_DYNAMIC = "calibrated_dynamic"
DESIGN_KINDS = (CALIBRATED_STATIC, CALIBRATED_DYNAMIC, VARYING_T)

METHODS = ("fe", "ife", "hbc", "bc_hn")
Z_95 = 1.96
MAX_FAILURE_SHARE = 0.2


def coverage_interval(estimate: float, se: float) -> tuple[float, float]:
    """Nominal-95% interval, estimate +/- 1.96 se (endpoints inclusive)."""
    if se < 0.0:
        raise ValueError("standard error must be nonnegative")
    return estimate - Z_95 * se, estimate + Z_95 * se


@dataclass(frozen=True)
class Design:
    """One Monte Carlo experiment: truth, data rule, and methods to run."""

    kind: str
    family: Family
    n: int
    T: int
    theta0: np.ndarray
    R: int = 200
    n_paths: int = 10
    seed: int = 0
    methods: tuple[str, ...] = ("fe", "ife")
    alpha0: np.ndarray | None = None
    X: np.ndarray | None = None
    lag_column: int | None = None
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}; expected one of {DESIGN_KINDS}")
        object.__setattr__(self, "family", get_family(self.family))
        theta0 = np.array(self.theta0, float)
        theta0.flags.writeable = False
        object.__setattr__(self, "theta0", theta0)
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; expected subset of {METHODS}")
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.kind == VARYING_T:
            if theta0.shape != (1,):
                raise ValueError("varying_T design has a single coefficient")
            object.__setattr__(self, "column_names", ("x",))
        else:
            if self.X is None or self.alpha0 is None:
                raise ValueError(f"{self.kind} design requires frozen X and alpha0")
            X = np.array(self.X, float)
            X.flags.writeable = False
            alpha0 = np.array(self.alpha0, float)
            alpha0.flags.writeable = False
            object.__setattr__(self, "X", X)
            object.__setattr__(self, "alpha0", alpha0)
            if X.shape != (self.n, self.T, theta0.shape[0]):
                raise ValueError(f"X shape {X.shape} does not match (n, T, p)")
            if alpha0.shape != (self.n,):
                raise ValueError(f"alpha0 shape {alpha0.shape} does not match n={self.n}")
            if self.kind == CALIBRATED_DYNAMIC and self.lag_column is None:
                raise ValueError("calibrated_dynamic design requires lag_column")
            if self.kind == CALIBRATED_STATIC and self.lag_column is not None:
                raise ValueError("calibrated_static design cannot have a lag_column")
            object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def coefficient_names(self) -> tuple[str, ...]:
        if self.column_names:
            return self.column_names
        return tuple(f"x{k + 1}" for k in range(self.theta0.shape[0]))


@dataclass(frozen=True)
class CalibratedTruth:
    """FE estimates taken verbatim as the truth, with the kept panel."""

    theta: np.ndarray
    alpha: np.ndarray
    panel: PanelData
    fit: FEFit


def calibrate(panel: PanelData, family, opts: FitOptions | None = None) -> CalibratedTruth:
    """Fit the model and freeze its estimates as the design truth.

    Individuals dropped by the fit are excluded from the truth set and
    from the returned panel, so the design simulates exactly the
    cross-section that was estimable.
    """
    family = get_family(family)
    fit = fit_fe(panel, family, opts)
    kept = fit.kept
    sub = panel.subset_individuals(kept) if kept.size < panel.n else panel
    return CalibratedTruth(fit.theta, fit.alpha[kept], sub, fit)


def calibrated_design(truth: CalibratedTruth, R: int = 200, n_paths: int = 10,
                      seed: int = 0, methods=("fe", "ife"), family=PROBIT) -> Design:
    """Design that redraws outcomes from a calibrated truth with frozen X."""
    panel = truth.panel
    kind = CALIBRATED_DYNAMIC if panel.lag_column is not None else CALIBRATED_STATIC
    return Design(
        kind=kind, family=get_family(family), n=panel.n, T=panel.T,
        theta0=truth.theta, R=R, n_paths=n_paths, seed=seed, methods=tuple(methods),
        alpha0=truth.alpha, X=panel.X, lag_column=panel.lag_column,
        column_names=panel.column_names,
    )


def ar1_trend_regressor(u: np.ndarray) -> np.ndarray:
    """Regressor recursion x_t = t/10 + x_{t-1}/2 + u_t with x_0 = u_0.

    ``u`` has shape (n, T+1); column 0 seeds the recursion and columns
    1..T drive periods 1..T.  Returns the (n, T) in-sample block.
    """
    n, width = u.shape
    T = width - 1
    x = np.empty((n, T))
    prev = u[:, 0]
    for t in range(1, T + 1):
        prev = t / 10.0 + prev / 2.0 + u[:, t]
        x[:, t - 1] = prev
    return x


def threshold_outcomes(theta0: float, x: np.ndarray, alpha: np.ndarray,
                       eps: np.ndarray) -> np.ndarray:
    """Binary outcomes 1{theta0 * x + alpha - eps >= 0}."""
    return (theta0 * x + alpha[:, None] - eps >= 0.0).astype(float)


def generate_varying_t(design: Design, replication: int) -> PanelData:
    """Fresh varying-T panel: new effects, regressor recursion, outcomes.

    All randomness comes from the (seed, replication) panel stream, drawn
    in a fixed order, so the panel is reproducible and independent across
    replications.
    """
    if design.kind != VARYING_T:
        raise ValueError(f"design kind is {design.kind!r}, not {VARYING_T!r}")
    rng = replication_rng(design.seed, replication, TAG_PANEL)
    n, T = design.n, design.T
    alpha = rng.standard_normal(n)
    u = rng.uniform(-0.5, 0.5, size=(n, T + 1))
    eps = rng.standard_normal((n, T))
    x = ar1_trend_regressor(u)
    y = threshold_outcomes(float(design.theta0[0]), x, alpha, eps)
    return PanelData(y, x[:, :, None], design.coefficient_names)


def simulate_observed(design: Design, replication: int) -> PanelData:
    """The replication's 'observed' dataset under the design's truth."""
    if design.kind == VARYING_T:
        return generate_varying_t(design, replication)
    rng = replication_rng(design.seed, replication, TAG_PANEL)
    v = open_uniform(rng, (design.n, design.T))
    dyn0 = design.X[:, 0, design.lag_column] if design.lag_column is not None else None
    y = simulate_outcomes(design.family, design.theta0, design.alpha0, design.X, v,
                          design.lag_column, dyn0)
    return build_panel(y, design.X, design.coefficient_names, design.lag_column, dyn0)


def synthetic_static_panel(n: int, T: int, seed: int, theta=(1.0, -0.5)) -> PanelData:
    """Seeded static probit panel with AR(1) regressors, for calibration.

    Stands in for application data in examples and tests; regressors are
    stationary AR(1) with unit variance, effects are standard normal.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(90,)))
    theta = np.asarray(theta, float)
    p = theta.shape[0]
    alpha = rng.standard_normal(n)
    x = np.empty((n, T, p))
    x[:, 0] = rng.standard_normal((n, p))
    innov = rng.standard_normal((n, T, p)) * np.sqrt(0.75)
    for t in range(1, T):
        x[:, t] = 0.5 * x[:, t - 1] + innov[:, t]
    eps = rng.standard_normal((n, T))
    y = (x @ theta + alpha[:, None] - eps >= 0.0).astype(float)
    names = tuple(f"x{k + 1}" for k in range(p))
    return PanelData(y, x, names)


def synthetic_dynamic_panel(n: int, T: int, seed: int, theta_lag: float = 0.7,
                            theta_x: float = 1.0) -> PanelData:
    """Seeded dynamic probit panel (lagged outcome plus one AR(1) regressor).

    The pre-sample outcome is generated from the static index and stored
    in the lag column at t=0, mirroring how application data reserve the
    first wave as the initial condition.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(91,)))
    alpha = rng.standard_normal(n)
    x = np.empty((n, T + 1))
    x[:, 0] = rng.standard_normal(n)
    innov = rng.standard_normal((n, T + 1)) * np.sqrt(0.75)
    for t in range(1, T + 1):
        x[:, t] = 0.5 * x[:, t - 1] + innov[:, t]
    eps = rng.standard_normal((n, T + 1))
    y0 = (theta_x * x[:, 0] + alpha - eps[:, 0] >= 0.0).astype(float)
    y = np.empty((n, T))
    prev = y0
    for t in range(T):
        idx = theta_lag * prev + theta_x * x[:, t + 1] + alpha
        y[:, t] = (idx - eps[:, t + 1] >= 0.0).astype(float)
        prev = y[:, t]
    return build_panel(y, np.stack([np.zeros((n, T)), x[:, 1:]], axis=2),
                       ("y_lag", "x"), lag_column=0, dynamic_init=y0)


def _validate_methods(design: Design) -> None:
    if "bc_hn" in design.methods and (design.kind == CALIBRATED_DYNAMIC):
        raise ValueError("bc_hn is not applicable due to dynamics")
    if "bc_hn" in design.methods and design.T < 3:
        raise ValueError(f"bc_hn needs T >= 3, design has T={design.T}")
    if "hbc" in design.methods and design.T < 4:
        raise ValueError(f"hbc needs T >= 4, design has T={design.T}")


def _replicate(design: Design, replication: int):
    """Point estimates and SEs for every method on one replication.

    Returns (replication, {method: (theta, se)}, errors); a method maps
    to None when its estimator failed on this replication.
    """
    errors: list[str] = []
    out: dict[str, tuple[np.ndarray, np.ndarray] | None] = {}
    panel = simulate_observed(design, replication)
    methods = design.methods or ("truth",)
    if methods == ("truth",):
        zero = np.zeros_like(design.theta0)
        return replication, {"truth": (design.theta0.copy(), zero)}, errors

    base: FEFit | None = None
    if {"fe", "ife"} & set(methods):
        try:
            base = fit_fe(panel, design.family)
        except FitError as exc:
            errors.append(f"r={replication} fe: {exc}")
    for method in methods:
        try:
            if method == "fe":
                if base is None:
                    raise FitError("base fit failed")
                out[method] = (base.theta, base.se)
            elif method == "ife":
                if base is None:
                    raise FitError("base fit failed")
                shocks = draw_shocks(
                    replication_seed(design.seed, replication, TAG_SHOCKS),
                    design.n_paths, panel.n, panel.T,
                )
                fit = solve_indirect(base, shocks, panel, design.family)
                out[method] = (fit.theta, fit.se)
            elif method == "hbc":
                jk = half_panel(panel, design.family)
                out[method] = (jk.theta, jk.se)
            elif method == "bc_hn":
                jk = leave_one_out(panel, design.family)
                out[method] = (jk.theta, jk.se)
        except FitError as exc:
            out[method] = None
            errors.append(f"r={replication} {method}: {exc}")
    return replication, out, errors


@dataclass(frozen=True)
class MethodSummary:
    method: str
    coefficients: tuple[str, ...]
    bias: np.ndarray
    stddev: np.ndarray
    coverage: np.ndarray
    r_effective: int

    def __post_init__(self):
        for attr in ("bias", "stddev", "coverage"):
            arr = np.array(getattr(self, attr), float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)


@dataclass(frozen=True)
class MCResult:
    """Per-method relative bias/dispersion (x100) and 95% coverage.

    ``wall_time`` is informational only and excluded from emitted rows so
    outputs stay byte-reproducible.
    """

    design: Design
    summaries: tuple[MethodSummary, ...]
    unreliable: bool
    failures: tuple[str, ...]
    wall_time: float = field(compare=False, default=0.0)


def _summarize(method: str, names, theta0: np.ndarray, estimates: np.ndarray,
               ses: np.ndarray, R: int) -> MethodSummary:
    """Aggregate one method's replication draws, skipping failed rows."""
    ok = np.all(np.isfinite(estimates), axis=1) & np.all(np.isfinite(ses), axis=1)
    r_eff = int(ok.sum())
    if r_eff == 0:
        p = theta0.shape[0]
        nan = np.full(p, np.nan)
        return MethodSummary(method, tuple(names), nan, nan, nan, 0)
    est = estimates[ok]
    se = ses[ok]
    rel = est / theta0
    bias = (rel - 1.0).mean(axis=0) * 100.0
    stddev = rel.std(axis=0, ddof=1) * 100.0 if r_eff > 1 else np.zeros(theta0.shape[0])
    covered = np.abs(est - theta0) <= Z_95 * se
    coverage = covered.mean(axis=0)
    return MethodSummary(method, tuple(names), bias, stddev, coverage, r_eff)


def run_design(design: Design, workers: int = 1) -> MCResult:
    """Run all replications and aggregate per-method summary statistics.

    ``workers`` > 1 distributes replications over processes; results are
    identical to the serial run because each replication's randomness is
    derived from its index and aggregation is order-independent.
    """
    _validate_methods(design)
    start = time.perf_counter()
    methods = design.methods or ("truth",)
    p = design.theta0.shape[0]
    estimates = {m: np.full((design.R, p), np.nan) for m in methods}
    ses = {m: np.full((design.R, p), np.nan) for m in methods}
    failures: list[str] = []

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_star, [(design, r) for r in range(design.R)],
                                    chunksize=max(1, design.R // (4 * workers))))
    else:
        results = [_replicate(design, r) for r in range(design.R)]

    for r, out, errs in results:
        failures.extend(errs)
        for method, payload in out.items():
            if payload is None:
                continue
            est, se = payload
            estimates[method][r] = est
            ses[method][r] = se

    names = design.coefficient_names
    summaries = tuple(
        _summarize(m, names, design.theta0, estimates[m], ses[m], design.R)
        for m in methods
    )
    unreliable = any(s.r_effective < (1.0 - MAX_FAILURE_SHARE) * design.R for s in summaries)
    return MCResult(
        design=design,
        summaries=summaries,
        unreliable=unreliable,
        failures=tuple(failures),
        wall_time=time.perf_counter() - start,
    )


def _replicate_star(args):
    return _replicate(*args)


def result_rows(result: MCResult) -> list[dict]:
    """Flat rows ``method,coefficient,bias,stddev,coverage,R_effective``."""
    rows = []
    for summary in result.summaries:
        for k, name in enumerate(summary.coefficients):
            rows.append({
                "method": summary.method,
                "coefficient": name,
                "bias": float(summary.bias[k]),
                "stddev": float(summary.stddev[k]),
                "coverage": float(summary.coverage[k]),
                "R_effective": summary.r_effective,
            })
    return rows

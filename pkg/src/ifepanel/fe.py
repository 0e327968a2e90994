"""Fixed-effect maximum likelihood with the individual effects profiled out.

Estimation concentrates each individual effect at fixed theta (closed form
for Poisson and the normal-variance family, safeguarded Newton for probit),
then runs Newton ascent on the profiled objective.  The profiled gradient
uses the envelope property: at the inner optimum the derivative of the
concentrated effects drops out, so the gradient is just the average
theta-derivative of the log-density.  The outer Hessian is obtained by
central finite differences of that analytic gradient and also supplies
the standard errors.

Individuals whose likelihood has no interior maximizer (probit rows that
are all 0 or all 1, Poisson rows with zero total count) are excluded from
the fit and reported in ``FEFit.dropped`` rather than clamped to the
boundary; this keeps the profiled Hessian well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .families import Family, NEYMAN_SCOTT, POISSON, PROBIT, get_family
from .panel import PanelData

OUTER_TOL = 1e-8
INNER_TOL = 1e-10
MAX_OUTER_ITER = 200
FD_STEP = 1e-5


class SeparationError(RuntimeError):
    """Per-individual likelihood is monotone in alpha (no interior optimum)."""


class FitError(RuntimeError):
    """Estimation failed; carries the optimizer trace when available."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SingularHessianError(FitError):
    """Profiled Hessian is singular or not negative definite."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


@dataclass(frozen=True)
class FitOptions:
    theta_init: np.ndarray | None = None
    tol: float = OUTER_TOL
    max_iter: int = MAX_OUTER_ITER
    alpha_bound: float = 50.0
    theta_bound: float = 50.0
    compute_se: bool = True


@dataclass(frozen=True)
class FitTrace:
    iterations: int
    grad_norm: float
    converged: bool


@dataclass(frozen=True)
class FEFit:
    """Fixed-effect MLE result.

    ``loglik`` and ``hessian`` are on the per-observation scale (divided
    by the number of observations actually used), so standard errors are
    ``sqrt(diag(inv(-hessian)) / n_obs)``.  ``alpha`` has length n with
    NaN at dropped individuals.
    """

    theta: np.ndarray
    alpha: np.ndarray
    loglik: float
    hessian: np.ndarray | None
    se: np.ndarray | None
    dropped: tuple[int, ...]
    trace: FitTrace
    names: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("theta", "alpha", "hessian", "se"):
            arr = getattr(self, attr)
            if arr is not None:
                arr = np.array(arr, float)
                arr.flags.writeable = False
                object.__setattr__(self, attr, arr)

    @property
    def kept(self) -> np.ndarray:
        mask = np.ones(self.alpha.shape[0], dtype=bool)
        mask[list(self.dropped)] = False
        return np.flatnonzero(mask)


def separated_individuals(panel: PanelData, family: Family) -> np.ndarray:
    """Indices of individuals with no interior alpha maximizer."""
    family = get_family(family)
    if family.kind == PROBIT:
        m = panel.y.mean(axis=1)
        return np.flatnonzero((m == 0.0) | (m == 1.0))
    if family.kind == POISSON:
        return np.flatnonzero(panel.y.sum(axis=1) == 0.0)
    return np.empty(0, dtype=int)


def _concentrate_probit(y, idx, bound, warm=None):
    """Vectorized safeguarded Newton for the per-individual probit effect.

    The per-individual score is strictly decreasing in alpha, so a
    bracket [lo, hi] always contains the root; Newton steps falling
    outside the bracket are replaced by bisection.  Stops when the mean
    score is below INNER_TOL or the bracket collapses at the bound.
    """
    m, T = y.shape
    s = 2.0 * y - 1.0
    alpha = np.zeros(m) if warm is None else np.clip(warm, -bound, bound).copy()
    lo = np.full(m, -bound)
    hi = np.full(m, bound)
    done = np.zeros(m, dtype=bool)
    for _ in range(200):
        z = np.clip(s * (idx + alpha[:, None]), -37.0, 37.0)
        mills = np.exp(-0.5 * z * z - 0.9189385332046727 - special.log_ndtr(z))
        score = (s * mills).sum(axis=1) / T
        curv = -(mills * (z + mills)).sum(axis=1) / T
        newly = np.abs(score) <= INNER_TOL
        done |= newly
        if done.all():
            break
        pos = score > 0.0
        lo = np.where(pos & ~done, alpha, lo)
        hi = np.where(~pos & ~done, alpha, hi)
        step = np.where(curv < 0.0, -score / np.where(curv < 0.0, curv, -1.0), 0.0)
        cand = alpha + step
        outside = (cand <= lo) | (cand >= hi)
        cand = np.where(outside, 0.5 * (lo + hi), cand)
        # bracket pinned at the bound: accept the boundary value
        pinned = (hi - lo) <= 1e-12 * (1.0 + bound)
        done |= pinned
        alpha = np.where(done, alpha, cand)
    else:
        raise FitError("inner effect solve did not converge")
    return alpha


def _concentrate_all(family: Family, y, X, theta, bound, warm=None):
    """Concentrated individual effects for all rows of a kept panel block."""
    if family.kind == NEYMAN_SCOTT:
        return y.mean(axis=1)
    idx = X @ theta
    if family.kind == POISSON:
        denom = np.exp(np.clip(idx, -30.0, 30.0)).sum(axis=1)
        return np.clip(np.log(y.sum(axis=1) / denom), -bound, bound)
    return _concentrate_probit(y, idx, bound, warm)


def _value_and_grad(family: Family, y, X, theta, bound, warm=None):
    """Per-observation profiled value and envelope gradient on kept rows."""
    alpha = _concentrate_all(family, y, X, theta, bound, warm)
    n_obs = y.size
    if family.kind == NEYMAN_SCOTT:
        s2 = float(((y - alpha[:, None]) ** 2).mean())
        th = float(theta[0])
        value = -0.5 * np.log(2.0 * np.pi * th) - s2 / (2.0 * th)
        grad = np.array([-0.5 / th + s2 / (2.0 * th * th)])
        return value, grad, alpha
    eta = X @ theta + alpha[:, None]
    value = float(family.log_density(y, eta, validate=False).sum() / n_obs)
    score, _ = family.score_and_hessian(y, eta, validate=False)
    grad = np.einsum("it,itk->k", score, X) / n_obs
    return value, grad, alpha


def concentrate_alpha(family, y_i, X_i=None, theta=None, alpha_bound: float = 50.0) -> float:
    """Concentrated effect for a single individual's observations.

    Raises SeparationError when the individual's likelihood is monotone
    in alpha (probit all-0/all-1, Poisson zero total count).
    """
    family = get_family(family)
    y_i = np.asarray(y_i, float).reshape(1, -1)
    T = y_i.shape[1]
    if family.kind == NEYMAN_SCOTT:
        return float(y_i.mean())
    if X_i is None:
        X_i = np.zeros((T, 0))
    X_i = np.asarray(X_i, float).reshape(1, T, -1)
    theta = np.zeros(X_i.shape[2]) if theta is None else np.asarray(theta, float)
    if family.kind == PROBIT and y_i.mean() in (0.0, 1.0):
        raise SeparationError("probit individual with constant outcomes")
    if family.kind == POISSON and y_i.sum() == 0.0:
        raise SeparationError("poisson individual with zero total count")
    return float(_concentrate_all(family, y_i, X_i, theta, alpha_bound)[0])


def profiled_loglik(panel: PanelData, family, theta, alpha_bound: float = 50.0):
    """Profiled per-observation log-likelihood and its envelope gradient.

    Separated individuals are excluded, mirroring what ``fit_fe`` does.
    """
    family = get_family(family)
    theta = _check_theta(family, np.asarray(theta, float), panel)
    kept = _kept_rows(panel, family)
    value, grad, _ = _value_and_grad(family, panel.y[kept], panel.X[kept], theta, alpha_bound)
    return value, grad


def _kept_rows(panel: PanelData, family: Family) -> np.ndarray:
    dropped = separated_individuals(panel, family)
    mask = np.ones(panel.n, dtype=bool)
    mask[dropped] = False
    kept = np.flatnonzero(mask)
    if kept.size == 0:
        raise FitError("no estimable individuals")
    return kept


def _check_theta(family: Family, theta: np.ndarray, panel: PanelData) -> np.ndarray:
    if family.kind == NEYMAN_SCOTT:
        if theta.shape != (1,):
            raise ValueError(f"neyman-scott theta must have length 1, got shape {theta.shape}")
        if theta[0] <= 0.0:
            raise ValueError("neyman-scott variance must be positive")
        return theta
    if theta.shape != (panel.p,):
        raise ValueError(f"theta must have length p={panel.p}, got shape {theta.shape}")
    return theta


def _collinear_columns(X, names):
    """Name near-collinear regressor pairs, if any are detectable."""
    p = X.shape[2]
    if p < 2:
        return ()
    flat = X.reshape(-1, p)
    flagged = []
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(flat, rowvar=False)
    for a in range(p):
        for b in range(a + 1, p):
            if abs(corr[a, b]) > 1.0 - 1e-10:
                flagged.extend([names[a] if names else str(a), names[b] if names else str(b)])
    return tuple(dict.fromkeys(flagged))


def _fd_hessian(evaluate, theta, p):
    H = np.empty((p, p))
    for k in range(p):
        h = FD_STEP * (1.0 + abs(theta[k]))
        up = theta.copy()
        up[k] += h
        dn = theta.copy()
        dn[k] -= h
        _, g_up = evaluate(up)
        _, g_dn = evaluate(dn)
        H[:, k] = (g_up - g_dn) / (2.0 * h)
    return 0.5 * (H + H.T)


def fit_fe(panel: PanelData, family, opts: FitOptions | None = None) -> FEFit:
    """Fixed-effect MLE on a balanced panel.

    Newton ascent on the profiled objective from ``opts.theta_init``
    (zeros for index families, 1 for the normal-variance family) until
    the gradient sup-norm is below ``opts.tol`` or ``opts.max_iter`` is
    hit; a final full Newton polish step tightens the optimum well past
    the tolerance.  Raises FitError on non-convergence (with the trace
    attached) and SingularHessianError when the profiled Hessian is not
    negative definite, naming collinear columns when detectable.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    family.validate_outcomes(panel.y)

    dropped = separated_individuals(panel, family)
    mask = np.ones(panel.n, dtype=bool)
    mask[dropped] = False
    kept = np.flatnonzero(mask)
    if kept.size == 0:
        raise FitError("no estimable individuals")
    y = panel.y[kept]
    X = panel.X[kept]
    n_obs = y.size

    is_ns = family.kind == NEYMAN_SCOTT
    p = 1 if is_ns else panel.p
    if p == 0:
        raise FitError("no regressors to estimate")
    if opts.theta_init is not None:
        theta = _check_theta(family, np.asarray(opts.theta_init, float).copy(), panel)
    else:
        theta = np.ones(1) if is_ns else np.zeros(p)
    lo_box = 1e-10 if is_ns else -opts.theta_bound
    hi_box = opts.theta_bound

    warm = [None]

    def evaluate(th):
        value, grad, alpha = _value_and_grad(family, y, X, th, opts.alpha_bound, warm[0])
        warm[0] = alpha
        return value, grad

    names = ("variance",) if is_ns else (panel.column_names or tuple(f"x{k+1}" for k in range(p)))

    value, grad = evaluate(theta)
    grad_norm = float(np.abs(grad).max())
    iterations = 0
    H = None
    converged = grad_norm <= opts.tol
    while not converged and iterations < opts.max_iter:
        iterations += 1
        H = _fd_hessian(evaluate, theta, p)
        try:
            direction = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            cols = _collinear_columns(X, names)
            detail = f" (collinear columns: {', '.join(cols)})" if cols else ""
            raise SingularHessianError(
                f"singular profiled Hessian{detail}",
                cols,
            ) from None
        if float(grad @ direction) <= 0.0:
            direction = grad  # Hessian not yet negative definite: ascend the gradient
        slope = float(grad @ direction)
        step = 1.0
        accepted = False
        while step >= 2.0 ** -40:
            trial = np.clip(theta + step * direction, lo_box, hi_box)
            trial_value, trial_grad = evaluate(trial)
            if trial_value >= value + 1e-4 * step * slope:
                theta, value, grad = trial, trial_value, trial_grad
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise FitError(
                "line search failed on the profiled objective",
                FitTrace(iterations, grad_norm, False),
            )
        grad_norm = float(np.abs(grad).max())
        converged = grad_norm <= opts.tol

    if not converged:
        raise FitError(
            f"no convergence after {iterations} iterations (grad sup-norm {grad_norm:.3e})",
            FitTrace(iterations, grad_norm, False),
        )

    # One full Newton polish step: quadratic convergence puts the iterate
    # within closed-form accuracy of the optimum.  The Hessian from the
    # last iteration is stale by one (tiny) step, which is immaterial for
    # the polish direction.
    if H is None:
        H = _fd_hessian(evaluate, theta, p)
    try:
        polish = np.clip(theta - np.linalg.solve(H, grad), lo_box, hi_box)
        polish_value, polish_grad = evaluate(polish)
        if np.abs(polish_grad).max() <= grad_norm:
            theta, value, grad = polish, polish_value, polish_grad
            grad_norm = float(np.abs(grad).max())
    except np.linalg.LinAlgError:
        pass

    _, _, alpha_kept = _value_and_grad(family, y, X, theta, opts.alpha_bound, warm[0])
    alpha = np.full(panel.n, np.nan)
    alpha[kept] = alpha_kept

    hessian = None
    se = None
    if opts.compute_se:
        hessian = _fd_hessian(evaluate, theta, p)
        eigvals = np.linalg.eigvalsh(hessian)
        if eigvals.max() >= -1e-12 * max(1.0, float(np.abs(eigvals).max())):
            cols = _collinear_columns(X, names)
            detail = f" (collinear columns: {', '.join(cols)})" if cols else ""
            raise SingularHessianError(
                f"profiled Hessian not negative definite at the optimum{detail}",
                cols,
            )
        se = np.sqrt(np.diag(np.linalg.inv(-hessian)) / n_obs)

    return FEFit(
        theta=theta,
        alpha=alpha,
        loglik=value,
        hessian=hessian,
        se=se,
        dropped=tuple(int(i) for i in dropped),
        trace=FitTrace(iterations, grad_norm, True),
        names=names,
    )

"""Closed forms for the normal-variance (Neyman-Scott) model.

With normal outcomes around individual means, the fixed-effect variance
estimate is the within-individual mean squared deviation and shrinks the
truth by exactly (T-1)/T; the matching equation is linear and solvable in
closed form.  These expressions serve as ground truth for the generic
pipeline: the generic estimators must reproduce them on this family.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .shocks import ShockStore, TAG_PANEL, TAG_SHOCKS, draw_shocks, replication_rng, replication_seed

ALPHA_RULES = ("index", "zero")


def within_variance(y) -> float:
    """Within-individual mean squared deviation (the FE variance estimate)."""
    y = np.asarray(y, float)
    if y.ndim != 2:
        raise ValueError(f"panel must be (n, T), got shape {y.shape}")
    if y.shape[1] < 2:
        warnings.warn("degenerate variance estimate: T < 2", stacklevel=2)
        return 0.0
    return float(((y - y.mean(axis=1, keepdims=True)) ** 2).mean())


def shock_dispersion(shocks: ShockStore) -> float:
    """Average within-individual dispersion of the normal shocks.

    This is the slope of the (linear) map from a candidate variance to
    the fixed-effect estimate on data simulated with these shocks; it
    does not depend on the individual effects.
    """
    u = special.ndtri(shocks.v)
    per_path = ((u - u.mean(axis=2, keepdims=True)) ** 2).mean(axis=(1, 2))
    return float(per_path.mean())


def indirect_variance(theta_hat: float, shocks: ShockStore) -> float:
    """Exact matching-equation solution: the FE estimate over the slope."""
    s = shock_dispersion(shocks)
    if s == 0.0:
        raise ValueError("degenerate shocks: zero within-individual dispersion")
    return float(theta_hat) / s


@dataclass(frozen=True)
class VarianceDesign:
    """Replication design for the normal-variance experiment."""

    theta0: float = 2.0
    n: int = 2500
    T: int = 5
    alpha_rule: str = "index"
    R: int = 1000
    n_paths: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.theta0 <= 0.0:
            raise ValueError("theta0 must be positive")
        if self.T < 2:
            raise ValueError("T must be >= 2")
        if self.R < 1 or self.n_paths < 1 or self.n < 1:
            raise ValueError("R, n_paths and n must be >= 1")
        if self.alpha_rule not in ALPHA_RULES:
            raise ValueError(f"alpha_rule must be one of {ALPHA_RULES}")

    def effects(self) -> np.ndarray:
        if self.alpha_rule == "index":
            return np.arange(1, self.n + 1, dtype=float)
        return np.zeros(self.n)


@dataclass(frozen=True)
class VarianceExperiment:
    """Per-replication estimates plus summary statistics and histogram."""

    design: VarianceDesign
    fe: np.ndarray
    ife: np.ndarray

    def __post_init__(self):
        for attr in ("fe", "ife"):
            arr = np.array(getattr(self, attr), float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)

    @property
    def fe_mean(self) -> float:
        return float(self.fe.mean())

    @property
    def ife_mean(self) -> float:
        return float(self.ife.mean())

    @property
    def fe_std(self) -> float:
        return float(self.fe.std(ddof=1)) if self.fe.size > 1 else 0.0

    @property
    def ife_std(self) -> float:
        return float(self.ife.std(ddof=1)) if self.ife.size > 1 else 0.0

    def histogram_rows(self, bins: int = 60):
        """Density histogram rows over the pooled range, plot-ready.

        Returns (estimator, bin_left, bin_right, density) tuples for both
        estimators on a common equal-width grid.
        """
        pooled = np.concatenate([self.fe, self.ife])
        lo, hi = float(pooled.min()), float(pooled.max())
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        rows = []
        for label, values in (("fe", self.fe), ("ife", self.ife)):
            density, _ = np.histogram(values, bins=edges, density=True)
            for b in range(bins):
                rows.append((label, float(edges[b]), float(edges[b + 1]), float(density[b])))
        return rows


def run_variance_experiment(design: VarianceDesign) -> VarianceExperiment:
    """Replicate the variance model: draw, estimate, correct, summarize.

    Each replication owns derived streams for the panel noise and the
    estimation shocks, so results do not depend on execution order.
    """
    alpha0 = design.effects()
    fe_est = np.empty(design.R)
    ife_est = np.empty(design.R)
    sqrt_theta = np.sqrt(design.theta0)
    for r in range(design.R):
        rng = replication_rng(design.seed, r, TAG_PANEL)
        y = alpha0[:, None] + sqrt_theta * rng.standard_normal((design.n, design.T))
        fe_est[r] = within_variance(y)
        shocks = draw_shocks(
            replication_seed(design.seed, r, TAG_SHOCKS), design.n_paths, design.n, design.T
        )
        ife_est[r] = indirect_variance(fe_est[r], shocks)
    return VarianceExperiment(design, fe_est, ife_est)

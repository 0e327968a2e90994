import numpy as np
import pytest

from ifepanel import PanelData


def make_probit_panel(n, T, p=1, theta0=None, seed=0, alpha_scale=1.0):
    """Static probit panel with standard-normal regressors and effects."""
    rng = np.random.default_rng(seed)
    theta0 = np.ones(p) if theta0 is None else np.asarray(theta0, float)
    alpha = alpha_scale * rng.standard_normal(n)
    X = rng.standard_normal((n, T, p))
    eta = X @ theta0 + alpha[:, None]
    y = (eta >= rng.standard_normal((n, T))).astype(float)
    names = tuple(f"x{k + 1}" for k in range(p))
    return PanelData(y, X, names), theta0, alpha


def make_poisson_panel(n, T, p=1, theta0=None, seed=0):
    rng = np.random.default_rng(seed)
    theta0 = np.full(p, 0.5) if theta0 is None else np.asarray(theta0, float)
    alpha = 0.5 * rng.standard_normal(n)
    X = 0.8 * rng.standard_normal((n, T, p))
    lam = np.exp(X @ theta0 + alpha[:, None])
    y = rng.poisson(lam).astype(float)
    names = tuple(f"x{k + 1}" for k in range(p))
    return PanelData(y, X, names), theta0, alpha


def make_ns_panel(n, T, theta0=2.0, seed=0, alpha=None):
    rng = np.random.default_rng(seed)
    if alpha is None:
        alpha = np.arange(1.0, n + 1)
    y = np.asarray(alpha, float)[:, None] + np.sqrt(theta0) * rng.standard_normal((n, T))
    return PanelData(y, np.zeros((n, T, 0)))


@pytest.fixture
def probit_panel():
    panel, theta0, _ = make_probit_panel(n=40, T=8, p=2, theta0=(1.0, -0.5), seed=11)
    return panel, theta0

import numpy as np
import pytest
from scipy import special

from ifepanel import (
    PanelData,
    ShockStore,
    SolverOptions,
    VarianceDesign,
    average_simulated_estimate,
    draw_shocks,
    fit_fe,
    indirect_variance,
    run_variance_experiment,
    solve_indirect,
    within_variance,
)
from ifepanel.neymanscott import shock_dispersion


def test_within_variance_hand_cases():
    assert within_variance(np.array([[1.0, 3.0]])) == pytest.approx(1.0, abs=0)
    assert within_variance(np.full((3, 4), 2.5)) == 0.0
    with pytest.warns(UserWarning, match="T < 2"):
        assert within_variance(np.array([[1.0], [2.0]])) == 0.0


def test_indirect_variance_linear_solution():
    a = np.sqrt(0.8)
    v = special.ndtr(np.array([[[-a, a]]]))
    shocks = ShockStore(0, np.tile(v, (1, 4, 1)))
    assert indirect_variance(1.6, shocks) == pytest.approx(2.0, abs=1e-12)
    unit = ShockStore(0, np.tile(special.ndtr(np.array([[[-1.0, 1.0]]])), (1, 4, 1)))
    assert indirect_variance(1.23, unit) == pytest.approx(1.23, abs=1e-12)


def test_indirect_variance_degenerate_shocks():
    flat = ShockStore(0, np.full((1, 3, 4), 0.5))
    with pytest.raises(ValueError, match="degenerate"):
        indirect_variance(1.0, flat)


def test_oracle_equivalence_over_seeds():
    # the generic profiled fit and matching solver must agree with the
    # closed forms on every draw
    tight = SolverOptions(tol_match=1e-10)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, T = 150, 5
        y = 3.0 * rng.standard_normal(n)[:, None] + np.sqrt(2.0) * rng.standard_normal((n, T))
        panel = PanelData(y, np.zeros((n, T, 0)))
        fit = fit_fe(panel, "neyman-scott")
        assert abs(fit.theta[0] - within_variance(y)) <= 1e-8

        shocks = draw_shocks(10_000 + seed, 2, n, T)
        indirect = solve_indirect(fit, shocks, panel, "neyman-scott", tight)
        assert abs(indirect.theta[0] - indirect_variance(fit.theta[0], shocks)) <= 1e-8


def test_simulated_estimate_ignores_effects():
    # the simulated-data estimator subtracts individual means, so the
    # effects used for simulation cancel out of it
    n, T = 60, 5
    shocks = draw_shocks(5, 2, n, T)
    theta = np.array([1.7])
    rng = np.random.default_rng(44)
    y = np.sqrt(2.0) * rng.standard_normal((n, T))
    index_panel = PanelData(y + np.arange(1.0, n + 1.0)[:, None], np.zeros((n, T, 0)))
    zero_panel = PanelData(y, np.zeros((n, T, 0)))
    a = average_simulated_estimate(theta, fit_fe(index_panel, "neyman-scott"),
                                   shocks, index_panel, "neyman-scott")
    b = average_simulated_estimate(theta, fit_fe(zero_panel, "neyman-scott"),
                                   shocks, zero_panel, "neyman-scott")
    assert a[0] == pytest.approx(b[0], abs=1e-10)
    assert a[0] == pytest.approx(1.7 * shock_dispersion(shocks), rel=1e-9)


def test_experiment_single_replication_passthrough():
    design = VarianceDesign(theta0=2.0, n=30, T=5, R=1, n_paths=1, seed=3)
    result = run_variance_experiment(design)
    assert result.fe.shape == (1,)
    assert result.fe_mean == result.fe[0]
    assert result.ife_mean == result.ife[0]
    assert result.fe_std == 0.0


def test_experiment_histogram_rows():
    design = VarianceDesign(theta0=2.0, n=60, T=5, R=50, n_paths=1, seed=9)
    result = run_variance_experiment(design)
    rows = result.histogram_rows()
    assert len(rows) == 2 * 60
    labels = {row[0] for row in rows}
    assert labels == {"fe", "ife"}
    for label in labels:
        mass = sum((hi - lo) * d for lab, lo, hi, d in rows if lab == label)
        assert mass == pytest.approx(1.0, abs=1e-9)


def test_long_panel_nearly_unbiased():
    design = VarianceDesign(theta0=2.0, n=20, T=200, R=100, n_paths=1, seed=17)
    result = run_variance_experiment(design)
    assert abs(result.fe_mean - 2.0) <= 0.02  # bias is theta0/T = 1%


def test_alpha_rules_do_not_move_estimates():
    base = VarianceDesign(theta0=2.0, n=40, T=5, R=20, n_paths=1, seed=7, alpha_rule="index")
    flat = VarianceDesign(theta0=2.0, n=40, T=5, R=20, n_paths=1, seed=7, alpha_rule="zero")
    a = run_variance_experiment(base)
    b = run_variance_experiment(flat)
    np.testing.assert_allclose(a.fe, b.fe, atol=1e-9)
    np.testing.assert_allclose(a.ife, b.ife, atol=1e-9)


def test_design_validation():
    with pytest.raises(ValueError):
        VarianceDesign(theta0=-1.0)
    with pytest.raises(ValueError):
        VarianceDesign(T=1)
    with pytest.raises(ValueError):
        VarianceDesign(alpha_rule="whatever")

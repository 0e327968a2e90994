import numpy as np
import pytest
from scipy import special, stats

from ifepanel import DomainError, get_family

# High-precision reference values, frozen from an mpmath oracle
# (50-digit normal CDF via mp.ncdf / mills ratio algebra).
LN_PHI_0 = -0.6931471805599453
LN_PHI_1_5 = -0.06914345561222543
MILLS_0 = 0.7978845608028654      # phi(0)/Phi(0)
DMILLS_0 = -0.6366197723675814    # d/de of phi/Phi at 0, i.e. -m(0)^2
NDTRI_030 = -0.5244005127080409


def test_probit_log_density_at_zero():
    fam = get_family("probit")
    assert fam.log_density(1.0, 0.0) == pytest.approx(LN_PHI_0, abs=1e-12)
    assert fam.log_density(0.0, 0.0) == pytest.approx(LN_PHI_0, abs=1e-12)


def test_probit_log_density_oracle_value():
    fam = get_family("probit")
    assert fam.log_density(1.0, 1.5) == pytest.approx(LN_PHI_1_5, abs=1e-9)


def test_poisson_log_density_trivial():
    fam = get_family("poisson")
    assert fam.log_density(0.0, 0.0) == pytest.approx(-1.0, abs=1e-12)


def test_neyman_scott_log_density_matches_normal():
    fam = get_family("neyman-scott")
    got = fam.log_density(1.3, 0.5, theta_extra=2.0)
    want = stats.norm.logpdf(1.3, loc=0.5, scale=np.sqrt(2.0))
    assert got == pytest.approx(want, abs=1e-12)
    with pytest.raises(DomainError):
        fam.log_density(1.0, 0.0)  # variance missing
    with pytest.raises(DomainError):
        fam.log_density(1.0, 0.0, theta_extra=-1.0)


def test_probit_extreme_index_is_clamped_not_inf():
    fam = get_family("probit")
    far = fam.log_density(1.0, -500.0)
    assert np.isfinite(far)
    assert far == pytest.approx(fam.log_density(1.0, -37.0), abs=1e-12)
    assert np.isfinite(fam.log_density(0.0, 500.0))


def test_invalid_outcomes_rejected():
    with pytest.raises(DomainError):
        get_family("probit").log_density(2.0, 0.0)
    with pytest.raises(DomainError):
        get_family("poisson").log_density(-1.0, 0.0)
    with pytest.raises(DomainError):
        get_family("poisson").log_density(1.5, 0.0)
    with pytest.raises(DomainError):
        get_family("nonsense")


def test_score_and_hessian_values():
    probit = get_family("probit")
    s, h = probit.score_and_hessian(1.0, 0.0)
    assert s == pytest.approx(MILLS_0, abs=1e-9)
    assert h == pytest.approx(DMILLS_0, abs=1e-9)
    s0, h0 = probit.score_and_hessian(0.0, 0.0)
    assert s0 == pytest.approx(-MILLS_0, abs=1e-9)
    assert h0 == pytest.approx(DMILLS_0, abs=1e-9)

    poisson = get_family("poisson")
    s, h = poisson.score_and_hessian(3.0, 0.0)
    assert s == pytest.approx(2.0, abs=1e-12)
    assert h == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["probit", "poisson", "neyman-scott"])
def test_score_matches_finite_difference(kind):
    fam = get_family(kind)
    rng = np.random.default_rng(42)
    extra = 1.7 if kind == "neyman-scott" else None
    for _ in range(100):
        if kind == "probit":
            y = float(rng.integers(0, 2))
            eta = float(rng.uniform(-5, 5))
        elif kind == "poisson":
            y = float(rng.integers(0, 10))
            eta = float(rng.uniform(-3, 3))
        else:
            y = float(rng.normal())
            eta = float(rng.uniform(-3, 3))
        h = 1e-6 * (1.0 + abs(eta))
        fd = (fam.log_density(y, eta + h, extra) - fam.log_density(y, eta - h, extra)) / (2 * h)
        score, hess = fam.score_and_hessian(y, eta, extra)
        assert score == pytest.approx(fd, rel=1e-6, abs=1e-9)
        fd2 = (fam.score_and_hessian(y, eta + h, extra)[0]
               - fam.score_and_hessian(y, eta - h, extra)[0]) / (2 * h)
        assert hess == pytest.approx(fd2, rel=1e-5, abs=1e-7)


def test_simulate_probit_quantile_cases():
    fam = get_family("probit")
    # Phi^-1(0.3) = -0.5244 and Phi^-1(0.7) = +0.5244 (quantile oracle)
    assert special.ndtri(0.3) == pytest.approx(NDTRI_030, abs=1e-12)
    assert fam.simulate_outcome(0.0, 0.3) == 1.0
    assert fam.simulate_outcome(0.0, 0.7) == 0.0
    assert fam.simulate_outcome(10.0, 0.5) == 1.0


def test_simulate_poisson_inverse_cdf():
    fam = get_family("poisson")
    # Poisson(2) CDF(0) = e^-2 = 0.1353.. >= 0.05, so the 5% quantile is 0
    assert fam.simulate_outcome(np.log(2.0), 0.05) == 0.0
    # cross-check the sequential inversion against scipy's quantile
    rng = np.random.default_rng(7)
    lam = rng.uniform(0.1, 20.0, size=300)
    v = rng.uniform(1e-6, 1 - 1e-6, size=300)
    got = fam.simulate_outcome(np.log(lam), v)
    want = stats.poisson.ppf(v, lam)
    np.testing.assert_array_equal(got, want)


def test_simulate_neyman_scott():
    fam = get_family("neyman-scott")
    got = fam.simulate_outcome(1.0, 0.5, theta_extra=4.0)
    assert got == pytest.approx(1.0, abs=1e-12)
    got = fam.simulate_outcome(0.0, 0.975, theta_extra=4.0)
    assert got == pytest.approx(2.0 * special.ndtri(0.975), abs=1e-12)


@pytest.mark.parametrize("kind", ["probit", "poisson"])
def test_simulator_monotone_in_index(kind):
    fam = get_family(kind)
    rng = np.random.default_rng(5)
    v = rng.uniform(0.01, 0.99, size=200)
    etas = np.linspace(-3, 3, 25)
    prev = fam.simulate_outcome(np.full(200, etas[0]), v)
    for eta in etas[1:]:
        cur = fam.simulate_outcome(np.full(200, eta), v)
        assert np.all(cur >= prev)
        prev = cur


def test_probit_simulator_calibration():
    fam = get_family("probit")
    rng = np.random.default_rng(123)
    v = rng.uniform(1e-12, 1 - 1e-12, size=10**6)
    eta = 0.5
    share = fam.simulate_outcome(np.full(v.shape, eta), v).mean()
    p = special.ndtr(eta)
    se = np.sqrt(p * (1 - p) / v.size)
    assert abs(share - p) <= 3 * se


def test_shock_domain_checked():
    fam = get_family("probit")
    with pytest.raises(DomainError):
        fam.simulate_outcome(0.0, 0.0)
    with pytest.raises(DomainError):
        fam.simulate_outcome(0.0, 1.0)
    with pytest.raises(DomainError):
        fam.simulate_outcome(0.0, np.array([0.5, 1.2]))

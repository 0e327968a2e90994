"""Outcome families for panels with scalar individual effects.

Each family bundles the conditional log-density of the outcome given the
linear index, its first two derivatives in the index, and an inverse-CDF
simulator driven by uniform shocks.  The simulator is a deterministic,
monotone function of the index for fixed shocks, which is what makes
common-random-number estimation work: once the shocks are drawn, the
simulated panel is a pure function of the parameters.

Families
--------
``probit``
    Binary outcome, ``P(y=1) = Phi(eta)`` with ``eta = x'theta + alpha``.
``poisson``
    Count outcome with rate ``exp(eta)``.
``neyman-scott``
    Normal outcome ``N(alpha, theta)`` with no regressors; the index slot
    carries the individual mean and the scalar parameter is the variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

PROBIT = "probit"
POISSON = "poisson"
NEYMAN_SCOTT = "neyman-scott"
FAMILY_KINDS = (PROBIT, POISSON, NEYMAN_SCOTT)

# Index clamps.  Assumption of interior parameters leaves the tails
# unspecified; the probit clamp keeps log Phi finite, the Poisson clamp
# keeps exp(eta) representable.
PROBIT_INDEX_CLAMP = 37.0
POISSON_INDEX_CLAMP = 30.0

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class DomainError(ValueError):
    """Outcome, shock, or parameter outside the family's domain."""


def _log_phi(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _mills(z):
    # phi(z)/Phi(z), evaluated in log space so the left tail stays finite.
    return np.exp(_log_phi(z) - special.log_ndtr(z))


def _poisson_quantile(lam, v):
    """Smallest k with Poisson(lam) CDF at k >= v, by sequential summation.

    The scan is capped at ``lam + 40*sqrt(lam) + 40``; shocks beyond the
    cap (probability far below float resolution) return the cap itself.
    """
    lam_b, v_b = np.broadcast_arrays(np.asarray(lam, float), np.asarray(v, float))
    out = np.zeros(lam_b.shape)
    pmf = np.exp(-lam_b)
    cdf = pmf.copy()
    pending = cdf < v_b
    lam_max = float(lam_b.max()) if lam_b.size else 0.0
    cap = int(np.ceil(lam_max + 40.0 * np.sqrt(lam_max) + 40.0))
    k = 0
    while pending.any() and k < cap:
        k += 1
        pmf = pmf * lam_b / k
        cdf = cdf + pmf
        out[pending] = k
        pending = cdf < v_b
    return out


@dataclass(frozen=True)
class Family:
    """One of the supported outcome families, dispatching on ``kind``.

    The same instance is used for estimation and simulation so the
    log-density, its derivatives, and the simulator stay consistent.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")

    @property
    def has_index(self) -> bool:
        """Whether the family has a regressor index (false for neyman-scott)."""
        return self.kind != NEYMAN_SCOTT

    def validate_outcomes(self, y) -> None:
        """Raise DomainError if any outcome is outside the family's support."""
        y = np.asarray(y, float)
        if not np.all(np.isfinite(y)):
            raise DomainError("non-finite outcome")
        if self.kind == PROBIT:
            if not np.all((y == 0.0) | (y == 1.0)):
                bad = y[(y != 0.0) & (y != 1.0)].flat[0]
                raise DomainError(f"y={bad:g} outside probit domain {{0, 1}}")
        elif self.kind == POISSON:
            if not np.all((y >= 0.0) & (y == np.floor(y))):
                bad = y[(y < 0.0) | (y != np.floor(y))].flat[0]
                raise DomainError(f"y={bad:g} outside poisson domain {{0, 1, 2, ...}}")

    def log_density(self, y, eta, theta_extra=None, validate=True):
        """Log-density of ``y`` at linear index ``eta`` (vectorized).

        For probit the index is clamped to +/-37 and evaluated through a
        stable log-CDF, so extreme indices return a large negative value
        rather than -inf.  ``theta_extra`` is the variance and is required
        for neyman-scott only.  ``validate=False`` skips the outcome-domain
        check for callers that validated the panel once up front.
        """
        if validate:
            self.validate_outcomes(y)
        y = np.asarray(y, float)
        eta = np.asarray(eta, float)
        if self.kind == PROBIT:
            z = np.clip(eta, -PROBIT_INDEX_CLAMP, PROBIT_INDEX_CLAMP)
            s = 2.0 * y - 1.0
            return special.log_ndtr(s * z)
        if self.kind == POISSON:
            z = np.clip(eta, -POISSON_INDEX_CLAMP, POISSON_INDEX_CLAMP)
            return y * z - np.exp(z) - special.gammaln(y + 1.0)
        theta = self._variance(theta_extra)
        return -0.5 * np.log(2.0 * np.pi * theta) - (y - eta) ** 2 / (2.0 * theta)

    def score_and_hessian(self, y, eta, theta_extra=None, validate=True):
        """First and second derivatives of the log-density in ``eta``."""
        if validate:
            self.validate_outcomes(y)
        y = np.asarray(y, float)
        eta = np.asarray(eta, float)
        if self.kind == PROBIT:
            z = np.clip(eta, -PROBIT_INDEX_CLAMP, PROBIT_INDEX_CLAMP)
            s = 2.0 * y - 1.0
            m = _mills(s * z)
            return s * m, -m * (s * z + m)
        if self.kind == POISSON:
            lam = np.exp(np.clip(eta, -POISSON_INDEX_CLAMP, POISSON_INDEX_CLAMP))
            return y - lam, -lam
        theta = self._variance(theta_extra)
        return (y - eta) / theta, np.broadcast_to(-1.0 / theta, eta.shape).copy()

    def simulate_outcome(self, eta, v, theta_extra=None):
        """Map uniform shocks ``v`` in (0,1) to outcomes at index ``eta``.

        Deterministic in ``(eta, v)`` and monotone nondecreasing in ``eta``
        for fixed ``v``, so raising the index can never lower an outcome.
        """
        eta = np.asarray(eta, float)
        v = np.asarray(v, float)
        if not np.all((v > 0.0) & (v < 1.0)):
            raise DomainError("shock v outside the open interval (0, 1)")
        if self.kind == PROBIT:
            return (eta >= special.ndtri(v)).astype(float)
        if self.kind == POISSON:
            lam = np.exp(np.clip(eta, -POISSON_INDEX_CLAMP, POISSON_INDEX_CLAMP))
            return _poisson_quantile(lam, v)
        theta = self._variance(theta_extra)
        return eta + np.sqrt(theta) * special.ndtri(v)

    def _variance(self, theta_extra) -> float:
        if theta_extra is None:
            raise DomainError("neyman-scott requires the variance via theta_extra")
        theta = float(np.asarray(theta_extra).reshape(()))
        if not theta > 0.0:
            raise DomainError(f"neyman-scott variance must be positive, got {theta}")
        return theta


def get_family(kind) -> Family:
    """Coerce a kind string (or Family) to a Family instance."""
    if isinstance(kind, Family):
        return kind
    return Family(str(kind))

"""Jackknife bias corrections along the time dimension.

Two baselines: the half-panel correction (split the panel in half along
time, combine the half-sample estimates linearly with the full-sample
one) and the leave-one-period-out correction (valid only without lagged
outcomes).  Both remove the leading O(1/T) bias; the half-panel variant
inflates finite-sample dispersion because each subfit uses half the data.

Half-panel standard errors are reported as the full-sample ones: the
dedicated half-panel variance formula lives in external work and is out
of scope, so printed SEs for this method understate the true dispersion
(see README).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fe import FEFit, FitError, FitOptions, fit_fe
from .panel import PanelData

HALF_PANEL = "hbc"
LEAVE_ONE_OUT = "bc_hn"


@dataclass(frozen=True)
class JackknifeFit:
    """Corrected estimate with the constituent subfits retained.

    Subfit order: full-sample fit first, then the split fits (two halves
    for even T; first-split then second-split halves for odd T; the T
    leave-one-out fits in period order for the leave-one-out method).
    ``theta`` is exactly the method's linear combination of the subfit
    estimates, so it can be audited from ``subfits``.
    """

    theta: np.ndarray
    method: str
    subfits: tuple[FEFit, ...]
    se: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("theta", "se"):
            arr = np.array(getattr(self, attr), float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)


def _subfit(panel, family, opts, label) -> FEFit:
    try:
        return fit_fe(panel, family, opts)
    except FitError as exc:
        raise FitError(f"{label}: {exc}", getattr(exc, "trace", None)) from exc


def half_panel(panel: PanelData, family, opts: FitOptions | None = None) -> JackknifeFit:
    """Half-panel correction: 2*full - mean of the half-sample estimates.

    Even T splits at T/2.  Odd T averages the two overlapping splits
    (first ceil(T/2) periods vs the rest, and first floor(T/2) periods
    vs the rest).  Requires T >= 4 so each half keeps at least 2 periods.
    """
    T = panel.T
    if T < 4:
        raise ValueError(f"half-panel correction needs T >= 4 (each half needs >= 2 periods), got T={T}")
    full = _subfit(panel, family, opts, "full sample")
    if T % 2 == 0:
        cuts = [T // 2]
    else:
        cuts = [(T + 1) // 2, T // 2]
    halves: list[FEFit] = []
    split_means = []
    for cut in cuts:
        first = _subfit(panel.period_slice(0, cut), family, opts, f"first half (t<= {cut})")
        second = _subfit(panel.period_slice(cut, T), family, opts, f"second half (t > {cut})")
        halves.extend([first, second])
        split_means.append(0.5 * (first.theta + second.theta))
    theta = 2.0 * full.theta - np.mean(split_means, axis=0)
    return JackknifeFit(theta, HALF_PANEL, (full, *halves), full.se, full.names)


def leave_one_out(panel: PanelData, family, opts: FitOptions | None = None) -> JackknifeFit:
    """Leave-one-period-out correction: T*full - (T-1)*mean of the T subfits.

    Not applicable to dynamic panels (dropping an interior period breaks
    the lag structure); requires T >= 3.
    """
    if panel.lag_column is not None:
        raise ValueError("leave-one-out correction is not applicable due to dynamics")
    T = panel.T
    if T < 3:
        raise ValueError(f"leave-one-out correction needs T >= 3, got T={T}")
    full = _subfit(panel, family, opts, "full sample")
    subs = [
        _subfit(panel.drop_period(t), family, opts, f"leaving out period t={t + 1}")
        for t in range(T)
    ]
    mean_minus = np.mean([fit.theta for fit in subs], axis=0)
    theta = T * full.theta - (T - 1) * mean_minus
    return JackknifeFit(theta, LEAVE_ONE_OUT, (full, *subs), full.se, full.names)

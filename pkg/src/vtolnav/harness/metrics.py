"""Post-processing of logged error series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    n_used: int
    n_skipped: int


def fit_decay(t, e, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line through ``(t, log e)`` inside ``window``.

    Non-positive (or non-finite) samples cannot be logged; they are dropped
    and counted in ``n_skipped``.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if t.shape != e.shape:
        raise ValueError("t and e must have the same shape")
    mask = np.ones(t.shape, dtype=bool)
    if window is not None:
        lo, hi = window
        mask &= (t >= lo) & (t <= hi)
    good = mask & np.isfinite(e) & (e > 0.0)
    n_skipped = int(mask.sum() - good.sum())
    if good.sum() < 2:
        raise ValueError("fewer than two positive samples in the fit window")
    slope, intercept = np.polyfit(t[good], np.log(e[good]), 1)
    return DecayFit(float(slope), float(intercept), int(good.sum()), n_skipped)


def fit_decay_rate(t, e, window: tuple[float, float] | None = None) -> float:
    return fit_decay(t, e, window).slope


def first_time_below(t, e, threshold: float) -> float | None:
    """Earliest time after which ``e`` stays below ``threshold``; None if never."""
    t = np.asarray(t, dtype=float)
    above = np.nonzero(~(np.asarray(e, dtype=float) < threshold))[0]
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return None
    return float(t[above[-1] + 1])

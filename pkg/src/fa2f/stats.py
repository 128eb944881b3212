"""Time-series helpers: autocorrelation, integrated autocorrelation time, summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation function of a 1-d series (FFT, zero padded)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n]
    if acf[0] == 0:
        return np.zeros(n)
    return acf / acf[0]


def integrated_time(x, c: float = 6.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window.

    tau = 1 + 2 sum_{t=1}^{M} rho(t), with the smallest M >= c * tau(M).
    Measured in units of the sampling interval.
    """
    rho = autocorrelation(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    m = np.arange(len(taus))
    ok = m >= c * taus
    M = int(np.argmax(ok)) if ok.any() else len(taus) - 1
    return max(float(taus[M]), 1.0)


@dataclass(frozen=True)
class SeriesSummary:
    mean: float
    stderr: float
    tau_int: float
    n_eff: float


def summarise_series(x, c: float = 6.0) -> SeriesSummary:
    """Mean with an error bar corrected for autocorrelation."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    tau = integrated_time(x, c)
    n_eff = len(x) / tau
    var = float(x.var(ddof=1))
    return SeriesSummary(float(x.mean()), math.sqrt(var / n_eff), tau, n_eff)


@dataclass(frozen=True)
class CensoredSummary:
    """Summary of hitting times where infinite values mean 'not hit before t_max'."""

    n: int
    hit_fraction: float
    censored_mean: float  # mean with censored values replaced by t_max
    mean_hit: float  # mean over hit replicas only
    median: float

    @classmethod
    def of(cls, samples, t_max: float) -> "CensoredSummary":
        s = np.asarray(samples, dtype=float)
        hit = np.isfinite(s)
        cens = np.where(hit, s, t_max)
        return cls(
            len(s),
            float(hit.mean()) if len(s) else math.nan,
            float(cens.mean()) if len(s) else math.nan,
            float(s[hit].mean()) if hit.any() else math.nan,
            float(np.median(s)) if len(s) else math.nan,
        )


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())

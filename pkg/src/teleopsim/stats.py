"""Statistics for comparing interaction logs.

Implements the conditional-moment binning of force against commanded
virtual penetration, Welch's unequal-variance t-test, Cohen's d with a
normal-approximation confidence interval, and the Brown-Forsythe
(median-centered) variance test.

p-values are computed from the regularized incomplete beta function,
evaluated with the Lentz continued fraction to an absolute tolerance of
about 1e-10, so no external statistics package is required at runtime.

All operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateSampleError(ValueError):
    """Raised when a test statistic is undefined for the given samples."""


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: float) -> float:
    """Two-sided tail probability of Student's t."""
    if dof <= 0.0:
        raise ValueError("degrees of freedom must be positive")
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(x, 0.5 * dof, 0.5)


def f_sf(w: float, dof1: float, dof2: float) -> float:
    """Upper tail probability of the F distribution."""
    if dof1 <= 0.0 or dof2 <= 0.0:
        raise ValueError("degrees of freedom must be positive")
    if w <= 0.0:
        return 1.0
    x = dof2 / (dof2 + dof1 * w)
    return regularized_incomplete_beta(x, 0.5 * dof2, 0.5 * dof1)


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float


def welch_t(x, y) -> WelchResult:
    """Welch's unequal-variance t-test, two-sided."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least 2 observations")
    vx = float(np.var(x, ddof=1))
    vy = float(np.var(y, ddof=1))
    sx, sy = vx / nx, vy / ny
    se2 = sx + sy
    if se2 <= 0.0:
        raise DegenerateSampleError("both samples have zero variance")
    t = (float(np.mean(x)) - float(np.mean(y))) / math.sqrt(se2)
    dof = se2 * se2 / (sx * sx / (nx - 1) + sy * sy / (ny - 1))
    return WelchResult(t, dof, t_sf_two_sided(t, dof))


@dataclass(frozen=True)
class CohenResult:
    d: float
    ci_low: float
    ci_high: float


def cohens_d(x, y) -> CohenResult:
    """Pooled-SD effect size with a 95% normal-approximation interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least 2 observations")
    vx = float(np.var(x, ddof=1))
    vy = float(np.var(y, ddof=1))
    pooled = ((nx - 1) * vx + (ny - 1) * vy) / (nx + ny - 2)
    if pooled <= 0.0:
        raise DegenerateSampleError("pooled standard deviation is zero")
    d = (float(np.mean(x)) - float(np.mean(y))) / math.sqrt(pooled)
    se = math.sqrt((nx + ny) / (nx * ny) + d * d / (2.0 * (nx + ny - 2)))
    return CohenResult(d, d - 1.959963984540054 * se, d + 1.959963984540054 * se)


@dataclass(frozen=True)
class LeveneResult:
    w: float
    p: float


def levene_test(x, y) -> LeveneResult:
    """Brown-Forsythe variance test (median-centered absolute deviations)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least 2 observations")
    zx = np.abs(x - np.median(x))
    zy = np.abs(y - np.median(y))
    n = nx + ny
    zbar = (zx.sum() + zy.sum()) / n
    mzx, mzy = float(zx.mean()), float(zy.mean())
    between = nx * (mzx - zbar) ** 2 + ny * (mzy - zbar) ** 2
    within = float(((zx - mzx) ** 2).sum() + ((zy - mzy) ** 2).sum())
    if within <= 0.0:
        if between <= 0.0:
            return LeveneResult(0.0, 1.0)
        raise DegenerateSampleError("zero within-group deviation spread")
    w = (n - 2) * between / within
    return LeveneResult(w, f_sf(w, 1.0, float(n - 2)))


# ---------------------------------------------------------------------------
# conditional binning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinStats:
    """Per-bin conditional moments of a value conditioned on a binned variable.

    Bins are left-closed right-open over [b_min, b_max], except the last
    bin, which also includes b_max. Empty bins have NaN mean and variance;
    single-sample bins have a mean but NaN (undefined) variance.
    """

    b_min: float
    b_max: float
    b_step: float
    centers: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    @property
    def single(self) -> np.ndarray:
        return self.counts == 1


def bin_conditional_stats(conditioning, values, b_min: float, b_max: float, b_step: float) -> BinStats:
    """Conditional mean and unbiased variance of ``values`` per bin of ``conditioning``.

    Samples with conditioning variable outside [b_min, b_max] are ignored.
    """
    if b_step <= 0.0:
        raise ValueError("bin step must be positive")
    if b_max <= b_min:
        raise ValueError("b_max must exceed b_min")
    b = np.asarray(conditioning, dtype=float)
    a = np.asarray(values, dtype=float)
    if b.shape != a.shape:
        raise ValueError("conditioning and values must have the same length")
    nbins = int(round((b_max - b_min) / b_step))
    centers = b_min + (np.arange(nbins) + 0.5) * b_step
    counts = np.zeros(nbins, dtype=int)
    sums = np.zeros(nbins)
    sq = np.zeros(nbins)
    mask = (b >= b_min) & (b <= b_max)
    idx = np.floor((b[mask] - b_min) / b_step).astype(int)
    idx = np.minimum(idx, nbins - 1)  # fold b == b_max into the last bin
    np.add.at(counts, idx, 1)
    np.add.at(sums, idx, a[mask])
    np.add.at(sq, idx, a[mask] ** 2)
    means = np.full(nbins, np.nan)
    variances = np.full(nbins, np.nan)
    nz = counts > 0
    means[nz] = sums[nz] / counts[nz]
    multi = counts > 1
    variances[multi] = np.maximum(
        0.0, (sq[multi] - counts[multi] * means[multi] ** 2) / (counts[multi] - 1)
    )
    return BinStats(b_min, b_max, b_step, centers, counts, means, variances)

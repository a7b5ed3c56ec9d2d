"""Interval estimates and distances between click distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

Z95 = 1.959963984540054


def z_to_confidence(z: float) -> float:
    return math.erf(z / math.sqrt(2.0))


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    low: float
    high: float
    confidence: float
    stderr: float | None = None

    def __post_init__(self):
        if not self.low <= self.point <= self.high:
            raise ValueError(f"interval [{self.low}, {self.high}] does not contain {self.point}")

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def wilson_interval(successes: int, trials: int, z: float = Z95) -> IntervalEstimate:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if not 0 <= successes <= trials:
        raise ValidationError(f"successes must lie in [0, {trials}], got {successes}")
    if z <= 0:
        raise ValidationError("z must be positive")
    n = float(trials)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    low = min(max(0.0, center - half), p)
    high = max(min(1.0, center + half), p)
    return IntervalEstimate(p, low, high, z_to_confidence(z))


def _as_distribution(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{name} is not a probability vector (sum {p.sum():.12g})")
    return p


def tv_distance(p, q) -> float:
    """Total variation distance ``0.5 * sum |p - q|``."""
    p = _as_distribution(p, "p")
    q = _as_distribution(q, "q")
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {len(p)} vs {len(q)}")
    return float(0.5 * np.abs(p - q).sum())


def rate_with_stderr(count: int, T: int, z: float = Z95) -> IntervalEstimate:
    """Clicks per tick with a Poisson standard error ``sqrt(count) / T``."""
    if T < 1:
        raise ValidationError("T must be at least 1")
    point = count / T
    se = math.sqrt(count) / T
    return IntervalEstimate(point, max(0.0, point - z * se), point + z * se, z_to_confidence(z), se)


def multinomial_tv_tolerance(m: int, n: int, z: float = 3.0) -> float:
    """``z * sqrt(m / (4 n))``: bound on the TV fluctuation of an ``m``-cell histogram of ``n`` counts.

    Follows from Cauchy-Schwarz, ``sum |p_hat - p| <= sqrt(m * sum (p_hat - p)^2)``,
    and ``E sum (p_hat - p)^2 <= 1/n``.
    """
    if n < 1:
        return math.inf
    return z * math.sqrt(m / (4.0 * n))


def two_sample_tv_tolerance(m: int, n1: int, n2: int, z: float = Z95) -> float:
    """TV tolerance between two independent ``m``-cell histograms."""
    if n1 < 1 or n2 < 1:
        return math.inf
    return z * math.sqrt(m / 4.0 * (1.0 / n1 + 1.0 / n2))


def proportion_stderr(successes: int, trials: int) -> float:
    if trials < 1:
        return math.inf
    p = successes / trials
    return math.sqrt(p * (1.0 - p) / trials)


def two_proportion_z(c1: int, n1: int, c2: int, n2: int) -> float:
    """Pooled z statistic for ``c1/n1 - c2/n2``; ``inf`` when both are degenerate and differ."""
    p1, p2 = c1 / n1, c2 / n2
    pool = (c1 + c2) / (n1 + n2)
    se = math.sqrt(pool * (1.0 - pool) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0 if p1 == p2 else math.copysign(math.inf, p1 - p2)
    return (p1 - p2) / se

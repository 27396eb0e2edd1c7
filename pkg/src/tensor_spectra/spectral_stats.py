"""Monte Carlo estimators over an ensemble.

Every estimator is a map over contiguous blocks of sample indices followed by
an integer-count (or index-ordered concatenation) reduction, so results are
identical for any number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import (
    EnsembleSpec,
    map_chunks,
    sample_phases,
    spacings,
)
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    density: bool = True

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def values(self) -> np.ndarray:
        """Density estimate count / (total * width); overflow stays in ``total``."""
        return self.counts / (self.total * self.widths)

    @property
    def stderr(self) -> np.ndarray:
        p = self.counts / self.total
        return np.sqrt(p * (1.0 - p) / self.total) / self.widths

    @property
    def overflow(self) -> int:
        return int(self.total - self.counts.sum())


@dataclass(frozen=True)
class EmpiricalCDF:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        if v.size < 1:
            raise InvalidArgumentError("empirical CDF of an empty sample")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n


@dataclass(frozen=True)
class VoidCurve:
    s: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    samples: int


@dataclass(frozen=True)
class PairCorrelation:
    value: float
    stderr: float
    samples: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SecondDifference:
    s: np.ndarray
    density: np.ndarray
    stderr: np.ndarray

    def __iter__(self):
        return iter(zip(self.s.tolist(), self.density.tolist()))


def binomial_stderr(p: np.ndarray, samples: int) -> np.ndarray:
    """Plain binomial SE, reported as 1/samples when p is 0 or 1."""
    p = np.asarray(p, dtype=np.float64)
    se = np.sqrt(p * (1.0 - p) / samples)
    return np.where((p <= 0.0) | (p >= 1.0), 1.0 / samples, se)


def _spacing_chunk(spec: EnsembleSpec, start: int, stop: int) -> np.ndarray:
    alpha = spec.alpha
    out = np.empty((stop - start) * spec.points_per_sample)
    m = spec.points_per_sample
    for k, i in enumerate(range(start, stop)):
        out[k * m:(k + 1) * m] = spacings(sample_phases(spec, i), alpha).spacings
    return out


def pooled_spacings(spec: EnsembleSpec, workers=1) -> np.ndarray:
    """All rescaled spacings of ``spec.samples`` draws, concatenated in index order."""
    return np.concatenate(map_chunks(_spacing_chunk, spec, workers))


def histogram_from_values(values: np.ndarray, bins: int = 40, s_max: float = 4.0) -> Histogram:
    if bins < 1 or not s_max > 0:
        raise InvalidArgumentError("need bins >= 1 and s_max > 0")
    edges = np.linspace(0.0, s_max, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return Histogram(edges, counts.astype(np.int64), int(np.size(values)))


def spacing_histogram(spec: EnsembleSpec, bins: int = 40, s_max: float = 4.0, workers=1) -> Histogram:
    """Density histogram of pooled spacings on [0, s_max]."""
    if bins < 1 or not s_max > 0:
        raise InvalidArgumentError("need bins >= 1 and s_max > 0")
    return histogram_from_values(pooled_spacings(spec, workers), bins, s_max)


def ks_exponential(values) -> float:
    """Sup distance between the empirical CDF and 1 - exp(-s)."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = v.size
    if n == 0:
        raise InvalidArgumentError("KS distance of an empty sample")
    cdf = -np.expm1(-v)
    i = np.arange(1, n + 1)
    upper = np.max(i / n - cdf)
    lower = np.max(cdf - (i - 1) / n)
    return float(min(1.0, max(upper, lower, 0.0)))


def _first_point_chunk(spec: EnsembleSpec, start: int, stop: int) -> np.ndarray:
    alpha = spec.alpha
    return np.array([alpha * sample_phases(spec, i).phases[0] for i in range(start, stop)])


def void_counts(first_points: np.ndarray, s_grid: np.ndarray) -> np.ndarray:
    """Number of configurations whose closed window [0, s] is empty, per s."""
    first = np.sort(first_points)
    return first.size - np.searchsorted(first, s_grid, side="right")


def void_curve(spec: EnsembleSpec, s_grid: Sequence[float], workers=1) -> VoidCurve:
    """Fraction of rescaled configurations with no point in [0, s]."""
    s = np.asarray(s_grid, dtype=np.float64)
    if s.ndim != 1 or s.size < 1 or np.any(s < 0) or np.any(np.diff(s) <= 0):
        raise InvalidArgumentError("s grid must be non-negative and strictly increasing")
    first = np.concatenate(map_chunks(_first_point_chunk, spec, workers))
    empty = void_counts(first, s)
    est = empty / spec.samples
    return VoidCurve(s, est, binomial_stderr(est, spec.samples), spec.samples)


def second_difference_density(curve: VoidCurve, rtol: float = 1e-9) -> SecondDifference:
    """Central second difference of E(0; s) at interior nodes of a uniform grid."""
    s = np.asarray(curve.s, dtype=np.float64)
    if s.size < 3:
        raise InvalidArgumentError("need at least three grid points")
    steps = np.diff(s)
    h = float(steps.mean())
    if not np.allclose(steps, h, rtol=rtol, atol=1e-12):
        raise InvalidArgumentError("second difference needs a uniform grid")
    e = np.asarray(curve.estimate, dtype=np.float64)
    se = np.asarray(curve.stderr, dtype=np.float64)
    dens = (e[:-2] - 2.0 * e[1:-1] + e[2:]) / (h * h)
    err = np.sqrt(se[:-2] ** 2 + 4.0 * se[1:-1] ** 2 + se[2:] ** 2) / (h * h)
    return SecondDifference(s[1:-1], dens, err)


def _pair_chunk(spec: EnsembleSpec, start: int, stop: int, windows) -> np.ndarray:
    (a1, b1), (a2, b2) = windows
    alpha = spec.alpha
    prod = np.empty(stop - start, dtype=np.int64)
    for k, i in enumerate(range(start, stop)):
        pts = alpha * sample_phases(spec, i).phases
        n1 = np.searchsorted(pts, b1, "left") - np.searchsorted(pts, a1, "right")
        n2 = np.searchsorted(pts, b2, "left") - np.searchsorted(pts, a2, "right")
        prod[k] = n1 * n2
    return prod


def pair_correlation_estimate(
    spec: EnsembleSpec, x1: float, x2: float, eps: float = 0.25, workers=1
) -> PairCorrelation:
    """Binned estimate of the rescaled two-point intensity near (x1, x2).

    Mean number of ordered pairs of distinct points with one point in each
    open window ``(x - eps, x + eps)``, divided by ``(2 eps)^2``. This equals
    the window average of the intensity, so its bias is O(eps^2).
    """
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    if abs(x1 - x2) <= 2 * eps:
        raise InvalidArgumentError("windows overlap: need |x1 - x2| > 2 eps")
    windows = ((x1 - eps, x1 + eps), (x2 - eps, x2 + eps))
    prod = np.concatenate(map_chunks(_pair_chunk, spec, workers, windows=windows))
    area = (2.0 * eps) ** 2
    n = prod.size
    mean = float(prod.sum()) / n
    sd = float(np.std(prod, ddof=1)) if n > 1 else 0.0
    return PairCorrelation(mean / area, sd / math.sqrt(n) / area, n)

"""The four sampled point processes and their rescalings.

CUE(N), CPE(N), the tensor spectrum of two independent CUE(N) factors and
the tensor spectrum of M independent CUE(2) factors. Tensor spectra are
formed as phase sums, never as Kronecker products.

Stream layout: sample ``i`` of an ensemble with ``f`` factor matrices draws
factor ``j`` from stream index ``i * f + j``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, InvalidArgumentError
from .matrix_core import (
    TWO_PI,
    PhaseVector,
    _arg_to_phase,
    eigenphases,
    sample_haar,
    stream,
)

MAX_CHAIN = 30


class Kind(str, enum.Enum):
    CUE = "cue"
    CPE = "cpe"
    CUE_TENSOR_CUE = "cue-tensor-cue"
    CUE2_TENSOR = "cue2-tensor"


@dataclass(frozen=True)
class EnsembleSpec:
    kind: Kind
    size: int
    samples: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.samples < 1:
            raise InvalidArgumentError("samples must be >= 1")
        if self.size < 1:
            raise InvalidArgumentError("size parameter must be >= 1")
        if self.kind is Kind.CUE2_TENSOR and self.size > MAX_CHAIN:
            raise CapacityError(f"M={self.size} exceeds the 2^{MAX_CHAIN} point guard")

    @property
    def points_per_sample(self) -> int:
        if self.kind is Kind.CUE_TENSOR_CUE:
            return self.size ** 2
        if self.kind is Kind.CUE2_TENSOR:
            return 2 ** self.size
        return self.size

    @property
    def factors(self) -> int:
        return {Kind.CUE: 1, Kind.CPE: 1, Kind.CUE_TENSOR_CUE: 2}.get(self.kind, self.size)

    @property
    def alpha(self) -> float:
        """Rescaling that gives unit mean spacing."""
        return self.points_per_sample / TWO_PI


@dataclass(frozen=True)
class RescaledPointSet:
    points: np.ndarray
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError("alpha must be positive")
        p = np.asarray(self.points, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True)
class SpacingVector:
    spacings: np.ndarray

    def __len__(self) -> int:
        return int(self.spacings.size)


def sample_cue_phases(n: int, seed: int, index: int) -> PhaseVector:
    return eigenphases(sample_haar(n, seed, index))


def sample_cpe_phases(n: int, seed: int, index: int) -> PhaseVector:
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    u = stream(seed, index).random(n)
    return PhaseVector(np.sort(TWO_PI * u))


def sample_cue2_phase_pair(seed: int, index: int) -> tuple[float, float]:
    """Eigenphases of one Haar 2x2 unitary from the characteristic polynomial."""
    u = sample_haar(2, seed, index).matrix
    tr = u[0, 0] + u[1, 1]
    det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
    root = np.sqrt(tr * tr - 4.0 * det)
    # the larger root avoids cancellation; the other follows from Vieta
    big = 0.5 * (tr + root) if abs(tr + root) >= abs(tr - root) else 0.5 * (tr - root)
    small = det / big
    th = _arg_to_phase(np.array([big, small]))
    lo, hi = sorted(float(t) for t in th)
    return lo, hi


def _sum_mod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = (a[:, None] + b[None, :]).ravel()
    s[s >= TWO_PI] -= TWO_PI
    return s


def tensor_spectrum_pair(theta: PhaseVector, phi: PhaseVector) -> PhaseVector:
    return PhaseVector(np.sort(_sum_mod(theta.phases, phi.phases)))


def tensor_spectrum_chain(pairs: Sequence[tuple[float, float]]) -> PhaseVector:
    """All 2^M sums of one phase from each pair, mod 2pi, by pairwise folding."""
    m = len(pairs)
    if m < 1:
        raise InvalidArgumentError("need at least one phase pair")
    if m > MAX_CHAIN:
        raise CapacityError(f"M={m} exceeds {MAX_CHAIN}")
    acc = PhaseVector(np.sort(np.asarray(pairs[0], dtype=np.float64)))
    for pair in pairs[1:]:
        acc = tensor_spectrum_pair(acc, PhaseVector(np.sort(np.asarray(pair, dtype=np.float64))))
    return acc


def rescale(p: PhaseVector, alpha: float) -> RescaledPointSet:
    if not alpha > 0:
        raise InvalidArgumentError("alpha must be positive")
    return RescaledPointSet(alpha * p.phases, alpha)


def spacings(p: PhaseVector, alpha: float) -> SpacingVector:
    th = np.asarray(p.phases if isinstance(p, PhaseVector) else p, dtype=np.float64)
    if th.size < 1:
        raise InvalidArgumentError("spacings of an empty phase set")
    gaps = np.empty_like(th)
    gaps[0] = th[0] + TWO_PI - th[-1]
    gaps[1:] = np.diff(th)
    return SpacingVector(alpha * gaps)


def count_in_interval(r: RescaledPointSet, a: float, b: float) -> int:
    """Number of points in the closed interval [a, b]."""
    if a > b:
        raise InvalidArgumentError(f"empty interval [{a}, {b}]")
    pts = r.points
    return int(np.searchsorted(pts, b, side="right") - np.searchsorted(pts, a, side="left"))


def sample_phases(spec: EnsembleSpec, index: int) -> PhaseVector:
    """Unrescaled spectrum of sample ``index`` of the ensemble."""
    f = spec.factors
    base = index * f
    if spec.kind is Kind.CUE:
        return sample_cue_phases(spec.size, spec.seed, base)
    if spec.kind is Kind.CPE:
        return sample_cpe_phases(spec.size, spec.seed, base)
    if spec.kind is Kind.CUE_TENSOR_CUE:
        theta = sample_cue_phases(spec.size, spec.seed, base)
        phi = sample_cue_phases(spec.size, spec.seed, base + 1)
        return tensor_spectrum_pair(theta, phi)
    pairs = [sample_cue2_phase_pair(spec.seed, base + j) for j in range(f)]
    return tensor_spectrum_chain(pairs)


def sample_rescaled(spec: EnsembleSpec, index: int) -> RescaledPointSet:
    return rescale(sample_phases(spec, index), spec.alpha)


def iter_samples(spec: EnsembleSpec, start: int = 0, stop: int | None = None):
    stop = spec.samples if stop is None else stop
    for i in range(start, stop):
        yield sample_phases(spec, i)


def resolve_workers(workers: int | str | None = None) -> int:
    """Worker count; the TENSOR_SPECTRA_WORKERS variable overrides the argument."""
    env = os.environ.get("TENSOR_SPECTRA_WORKERS")
    if env:
        workers = env
    if workers in (None, "auto"):
        return os.cpu_count() or 1
    w = int(workers)
    if w < 1:
        raise InvalidArgumentError("workers must be >= 1")
    return w


def chunk_bounds(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    edges = [total * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts)]


def map_chunks(func: Callable, spec: EnsembleSpec, workers: int | str | None = 1, **kwargs) -> list:
    """Run ``func(spec, start, stop, **kwargs)`` over contiguous index chunks.

    Results come back in index order; callers reduce them with an
    order-independent fold, so the merged result never depends on ``workers``.
    """
    w = resolve_workers(workers)
    bounds = chunk_bounds(spec.samples, w)
    job = partial(func, spec, **kwargs)
    if w == 1 or len(bounds) == 1:
        return [job(a, b) for a, b in bounds]
    with ProcessPoolExecutor(max_workers=w) as pool:
        futures = [pool.submit(job, a, b) for a, b in bounds]
        return [f.result() for f in futures]


def dyson_log_density(theta: np.ndarray) -> float:
    """Log of the unnormalised CUE eigenphase density, prod |e^{i a} - e^{i b}|^2."""
    z = np.exp(1j * np.asarray(theta))
    d = np.abs(z[:, None] - z[None, :])
    iu = np.triu_indices(len(z), 1)
    with np.errstate(divide="ignore"):
        return float(2.0 * np.sum(np.log(d[iu])))


def metropolis_cue_phases(
    n: int,
    samples: int,
    seed: int,
    step: float = 0.5,
    burn_in: int = 1000,
    thin: int = 10,
) -> np.ndarray:
    """Independent oracle for CUE(n), n <= 4: Metropolis chain on the Dyson density.

    Single-phase uniform proposals of half-width ``step``; returns a
    ``(samples, n)`` array of sorted phases.
    """
    if not 1 <= n <= 4:
        raise InvalidArgumentError("the Metropolis oracle is limited to N <= 4")
    gen = stream(seed, 0)
    theta = TWO_PI * gen.random(n)
    logp = dyson_log_density(theta)
    out = np.empty((samples, n))
    total = burn_in + samples * thin
    for it in range(total):
        j = int(gen.integers(n))
        prop = theta.copy()
        prop[j] = (prop[j] + gen.uniform(-step, step)) % TWO_PI
        logq = dyson_log_density(prop)
        if math.log(gen.random() + 1e-300) < logq - logp:
            theta, logp = prop, logq
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            out[(it - burn_in) // thin] = np.sort(theta)
    return out


__all__ = [
    "Kind",
    "EnsembleSpec",
    "RescaledPointSet",
    "SpacingVector",
    "sample_cue_phases",
    "sample_cpe_phases",
    "sample_cue2_phase_pair",
    "tensor_spectrum_pair",
    "tensor_spectrum_chain",
    "rescale",
    "spacings",
    "count_in_interval",
    "sample_phases",
    "sample_rescaled",
    "iter_samples",
    "map_chunks",
    "resolve_workers",
    "metropolis_cue_phases",
]

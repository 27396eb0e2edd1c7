"""Dense complex linear algebra for Haar-random unitaries.

Ginibre sampling from counter-based streams, phase-corrected QR, unitarity
certification and eigenphase extraction. A complex matrix is a plain square
``complex128`` ndarray; :class:`UnitaryMatrix` and :class:`PhaseVector` are
immutable wrappers carrying certified invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _eig
from .errors import (
    ConsistencyError,
    DegenerateSampleError,
    InvalidArgumentError,
    InvalidDimensionError,
    NumericalFailureError,
)

TWO_PI = 2.0 * math.pi
UINT64_MASK = (1 << 64) - 1

UNITARITY_TOL = 1e-12
MODULUS_TOL = 1e-8
RANK_TOL = 1e-300
SWEEPS_PER_DIM = 40


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise InvalidDimensionError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class PhaseVector:
    """Sorted eigenphases in [0, 2pi), multiplicities kept."""

    phases: np.ndarray

    def __post_init__(self):
        p = np.array(self.phases, dtype=np.float64).ravel()
        if p.size < 1:
            raise InvalidArgumentError("a PhaseVector needs at least one phase")
        if np.any(p < 0.0) or np.any(p >= TWO_PI) or not np.all(np.isfinite(p)):
            raise InvalidArgumentError("phases must lie in [0, 2pi)")
        if np.any(np.diff(p) < 0.0):
            raise InvalidArgumentError("phases must be sorted non-decreasing")
        object.__setattr__(self, "phases", _frozen(p))

    @classmethod
    def from_unsorted(cls, values) -> "PhaseVector":
        return cls(np.sort(wrap_phases(np.asarray(values, dtype=np.float64))))

    @classmethod
    def _trusted(cls, p: np.ndarray) -> "PhaseVector":
        # p is already sorted, finite and wrapped
        obj = object.__new__(cls)
        object.__setattr__(obj, "phases", _frozen(p))
        return obj

    @property
    def count(self) -> int:
        return int(self.phases.size)

    def __len__(self) -> int:
        return self.count


@dataclass(frozen=True)
class UnitaryMatrix:
    """A square complex matrix with certified ``max|U*U - I| <= 1e-12 sqrt(n)``."""

    matrix: np.ndarray
    defect: float

    def __post_init__(self):
        a = _square(self.matrix).copy()
        defect = unitarity_defect(a)
        if defect > UNITARITY_TOL * math.sqrt(a.shape[0]):
            raise ConsistencyError(f"unitarity defect {defect:.3e} exceeds certification bound")
        object.__setattr__(self, "matrix", _frozen(a))
        object.__setattr__(self, "defect", defect)

    @classmethod
    def certify(cls, a) -> "UnitaryMatrix":
        return cls(a, 0.0)

    @classmethod
    def _from_kernel(cls, a: np.ndarray, defect: float) -> "UnitaryMatrix":
        # the defect was measured by the compiled QR kernel
        if not defect <= UNITARITY_TOL * math.sqrt(a.shape[0]):
            raise ConsistencyError(f"unitarity defect {defect:.3e} exceeds certification bound")
        obj = object.__new__(cls)
        object.__setattr__(obj, "matrix", _frozen(a))
        object.__setattr__(obj, "defect", float(defect))
        return obj

    @classmethod
    def diagonal(cls, angles) -> "UnitaryMatrix":
        return cls.certify(np.diag(np.exp(1j * np.asarray(angles, dtype=np.float64))))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


def wrap_phases(angles: np.ndarray) -> np.ndarray:
    """Map arguments in (-pi, pi] (or any reals) to [0, 2pi); 2pi after rounding becomes 0."""
    out = np.mod(angles, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def _arg_to_phase(values: np.ndarray) -> np.ndarray:
    ang = np.arctan2(values.imag, values.real)
    ang = np.where(ang < 0.0, ang + TWO_PI, ang)
    ang[ang >= TWO_PI] = 0.0
    return ang


def stream(seed: int, index: int, retry: int = 0) -> np.random.Generator:
    """Counter-based generator for sample ``index`` under ``seed``.

    Philox keyed by the seed; the counter's high words hold ``(retry, index)``,
    so any partition of indices across workers yields identical draws.
    """
    if index < 0 or retry < 0:
        raise InvalidArgumentError("index and retry must be non-negative")
    counter = np.array([0, retry & UINT64_MASK, index & UINT64_MASK, index >> 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed) & UINT64_MASK, counter=counter))


def complex_gaussians(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normals by Box-Muller on the uniform stream (E|z|^2 = 1)."""
    u = gen.random((2,) + tuple(np.atleast_1d(shape)))
    radius = np.sqrt(-np.log1p(-u[0]))
    return radius * np.exp(1j * TWO_PI * u[1])


def sample_ginibre(n: int, seed: int, index: int, retry: int = 0) -> np.ndarray:
    """n x n matrix of i.i.d. standard complex Gaussians, deterministic in its arguments."""
    if n < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {n}")
    return complex_gaussians(stream(seed, index, retry), (n, n))


def haar_unitary_from_ginibre(g) -> UnitaryMatrix:
    """Phase-corrected Q factor of ``g``, which is Haar distributed on U(n)."""
    g = _square(g, "Ginibre matrix")
    u, min_diag, defect = _eig.haar_from_ginibre(g)
    if not min_diag >= RANK_TOL:
        raise DegenerateSampleError("rank-deficient Ginibre draw")
    return UnitaryMatrix._from_kernel(u, defect)


def unitarity_defect(a) -> float:
    a = _square(a)
    gram = a.conj().T @ a
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(np.max(np.abs(gram)))


def sample_haar(n: int, seed: int, index: int, max_retries: int = 8) -> UnitaryMatrix:
    """Haar unitary for ``(seed, index)``; degenerate draws are redrawn on sub-streams."""
    for retry in range(max_retries + 1):
        try:
            return haar_unitary_from_ginibre(sample_ginibre(n, seed, index, retry))
        except DegenerateSampleError:
            continue
    raise DegenerateSampleError(f"{max_retries + 1} consecutive degenerate draws at index {index}")


def eigenvalues(u: UnitaryMatrix) -> np.ndarray:
    """Eigenvalues via Hessenberg reduction and Wilkinson-shifted QR."""
    a = u.matrix
    n = a.shape[0]
    if n == 1:
        return a[0].copy()
    if np.count_nonzero(a) == np.count_nonzero(np.diagonal(a)):
        return np.diagonal(a).copy()
    vals, ok = _eig.eigvals(np.ascontiguousarray(a), SWEEPS_PER_DIM * n)
    if not ok:
        raise NumericalFailureError(f"QR iteration did not converge in {SWEEPS_PER_DIM * n} sweeps")
    return vals


def eigenphases(u: UnitaryMatrix) -> PhaseVector:
    if not isinstance(u, UnitaryMatrix):
        u = UnitaryMatrix.certify(u)
    vals = eigenvalues(u)
    drift = np.max(np.abs(np.abs(vals) - 1.0))
    if not drift <= MODULUS_TOL:
        raise ConsistencyError(f"eigenvalue modulus off the unit circle by {drift:.3e}")
    p = _arg_to_phase(vals)
    p.sort()
    return PhaseVector._trusted(p)

"""Analytic side: the CUE sine kernel and quantities built from it.

Joint intensities are determinants of the kernel; gap probabilities follow
from the alternating series of integrated intensities; the two-point
intensity of the rescaled tensor spectrum of two CUE(N) factors is evaluated
by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.stats import qmc

from .errors import InvalidArgumentError
from .matrix_core import TWO_PI

SINGULAR_TOL = 1e-8
NEG_CLAMP = 1e-10
MAX_K = 8


@dataclass(frozen=True)
class KernelContext:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError(f"N must be a positive integer, got {self.N}")


def sine_kernel(ctx: KernelContext, x):
    """S_N(x) = sin(Nx/2) / (2 pi sin(x/2)), with its limit at multiples of 2 pi."""
    n = ctx.N
    x = np.asarray(x, dtype=np.float64)
    # reduce to r = x - 2 pi m first; forming N x / 2 for large |x| loses the
    # small numerator near the singular points
    m = np.rint(x / TWO_PI)
    half = 0.5 * (x - TWO_PI * m)
    sign = np.where(np.mod(m * (n - 1), 2) == 0, 1.0, -1.0)
    den = np.sin(half)
    near = np.abs(den) < SINGULAR_TOL
    safe = np.where(near, 1.0, den)
    # at the singular point itself the value is (N / 2pi) (-1)^{m (N - 1)}
    out = sign * np.where(near, n / TWO_PI, np.sin(n * half) / (TWO_PI * safe))
    return out if out.ndim else float(out)


def rescaled_kernel(ctx: KernelContext, x):
    """Kernel of the unit-density process (N / 2pi) * phases: (2pi/N) S_N(2pi x / N)."""
    x = np.asarray(x, dtype=np.float64)
    out = (TWO_PI / ctx.N) * sine_kernel(ctx, TWO_PI * x / ctx.N)
    return out


def _phase_kernel(ctx: KernelContext, u):
    return (TWO_PI / ctx.N) * np.asarray(sine_kernel(ctx, u))


def det_pivoted(mats) -> np.ndarray:
    """Determinants of a stack of square matrices by partially pivoted elimination."""
    a = np.array(mats, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InvalidArgumentError("det_pivoted needs square matrices")
    batch = a.shape[:-2]
    k = a.shape[-1]
    a = a.reshape(-1, k, k)
    b = a.shape[0]
    rows = np.arange(b)
    det = np.ones(b)
    for j in range(k):
        p = j + np.argmax(np.abs(a[:, j:, j]), axis=1)
        swap = p != j
        if np.any(swap):
            tmp = a[rows, j].copy()
            a[rows, j] = a[rows, p]
            a[rows, p] = tmp
            det[swap] = -det[swap]
        piv = a[:, j, j]
        det *= piv
        if j + 1 < k:
            ok = piv != 0.0
            f = np.zeros((b, k - j - 1))
            f[ok] = a[ok, j + 1:, j] / piv[ok, None]
            a[:, j + 1:, j:] -= f[:, :, None] * a[:, None, j, j:]
    return det.reshape(batch) if batch else det[0]


def kernel_matrices(ctx: KernelContext, points, rescaled: bool = True) -> np.ndarray:
    """Stack of [K(x_s - x_t)] for points of shape (..., k)."""
    pts = np.asarray(points, dtype=np.float64)
    diff = pts[..., :, None] - pts[..., None, :]
    kern = rescaled_kernel if rescaled else sine_kernel
    return np.asarray(kern(ctx, diff))


def cue_intensity(ctx: KernelContext, points, rescaled: bool = False) -> float:
    """k-point joint intensity det[S_N(x_s - x_t)] (or with the rescaled kernel)."""
    pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
    k = pts.shape[-1]
    if not 1 <= k <= MAX_K:
        raise InvalidArgumentError(f"k must be in [1, {MAX_K}], got {k}")
    d = det_pivoted(kernel_matrices(ctx, pts, rescaled))
    d = np.where((d < 0.0) & (d >= -NEG_CLAMP), 0.0, d)
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class IntegralCheck:
    estimate: float
    stderr: float
    method: str


@lru_cache(maxsize=32)
def _gauss_legendre(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


def _tensor_rule(a: float, b: float, dim: int, nodes: int):
    """Tensor Gauss-Legendre points (M, dim) and weights (M,) on [a, b]^dim."""
    x, w = _gauss_legendre(nodes)
    x = 0.5 * (b - a) * x + 0.5 * (b + a)
    w = 0.5 * (b - a) * w
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for wg in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * wg.ravel()
    return pts, wts


def _det_integral_quadrature(ctx, a, b, dim, nodes, rescaled, block=1 << 16) -> float:
    pts, wts = _tensor_rule(a, b, dim, nodes)
    total = 0.0
    for lo in range(0, pts.shape[0], block):
        d = det_pivoted(kernel_matrices(ctx, pts[lo:lo + block], rescaled))
        total += float(np.dot(wts[lo:lo + block], d))
    return total


def _det_integral_qmc(ctx, a, b, dim, points, rescaled, seed, replicates=8):
    """Scrambled Sobol estimate and replicate standard error over [a, b]^dim."""
    m = max(1, int(round(math.log2(max(points // replicates, 2)))))
    vol = (b - a) ** dim
    means = []
    for r in range(replicates):
        sob = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng([seed, dim, r]))
        u = sob.random_base2(m)
        x = a + (b - a) * u
        vals = []
        for lo in range(0, x.shape[0], 1 << 15):
            vals.append(det_pivoted(kernel_matrices(ctx, x[lo:lo + (1 << 15)], rescaled)))
        means.append(vol * float(np.mean(np.concatenate(vals))))
    means = np.array(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(replicates))


def intensity_integral_check(
    ctx: KernelContext,
    k: int,
    mc_samples: int = 10**6,
    seed: int = 0,
    method: str = "mc",
    nodes: int = 64,
) -> IntegralCheck:
    """((N-k)!/N!) times the integral of the k-point intensity over [0, 2pi)^k; target 1.

    ``method="mc"`` uses plain Monte Carlo with ``mc_samples`` uniform tuples;
    ``method="quadrature"`` uses tensor Gauss-Legendre (k <= 3).
    """
    n = ctx.N
    if not 1 <= k <= min(n, 4):
        raise InvalidArgumentError(f"need 1 <= k <= min(N, 4), got k={k}, N={n}")
    prefactor = math.factorial(n - k) / math.factorial(n)
    if k == 1:
        # constant integrand S_N(0) = N / 2pi
        return IntegralCheck(prefactor * TWO_PI * sine_kernel(ctx, 0.0), 0.0, "exact")
    if method == "quadrature":
        if k > 3:
            raise InvalidArgumentError("quadrature route is limited to k <= 3")
        val = _det_integral_quadrature(ctx, 0.0, TWO_PI, k, nodes, rescaled=False)
        coarse = _det_integral_quadrature(ctx, 0.0, TWO_PI, k, max(2, nodes // 2), rescaled=False)
        return IntegralCheck(prefactor * val, prefactor * abs(val - coarse), "quadrature")
    if method != "mc":
        raise InvalidArgumentError(f"unknown method {method!r}")
    gen = np.random.default_rng([seed, n, k])
    vol = TWO_PI ** k
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        m = min(1 << 16, mc_samples - done)
        x = TWO_PI * gen.random((m, k))
        d = det_pivoted(kernel_matrices(ctx, x, rescaled=False))
        total += float(d.sum())
        total_sq += float(np.dot(d, d))
        done += m
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / max(done - 1, 1)
    return IntegralCheck(prefactor * vol * mean, prefactor * vol * math.sqrt(var / done), "mc")


@dataclass(frozen=True)
class SupCheck:
    k: int
    N: int
    max_intensity: float
    bound: float
    max_kernel_ratio: float
    passed: bool


def intensity_sup_check(
    ctx: KernelContext, k: int, trials: int = 10**5, seed: int = 0, kernel_points: int = 10**6
) -> SupCheck:
    """Largest rescaled k-point intensity over random tuples versus k^{k/2}.

    Also records max |S_N(x)| * 2pi / N over ``kernel_points`` random x.
    """
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    gen = np.random.default_rng([seed, ctx.N, k])
    best = -np.inf
    done = 0
    while done < trials:
        m = min(1 << 15, trials - done)
        x = ctx.N * gen.random((m, k))
        d = det_pivoted(kernel_matrices(ctx, x, rescaled=True))
        best = max(best, float(d.max()))
        done += m
    x = gen.uniform(-4.0 * math.pi, 4.0 * math.pi, kernel_points)
    ratio = float(np.max(np.abs(sine_kernel(ctx, x))) * TWO_PI / ctx.N)
    bound = k ** (k / 2)
    return SupCheck(k, ctx.N, best, bound, ratio, best <= bound + 1e-8 and ratio <= 1.0 + 1e-12)


@dataclass(frozen=True)
class VoidSeriesResult:
    s: float
    terms: np.ndarray
    partial_sums: np.ndarray
    errors: np.ndarray
    value: float
    raw_value: float = field(default=math.nan)

    @property
    def error(self) -> float:
        return float(np.sqrt(np.sum(self.errors ** 2)))


def void_series_from_integrals(s: float, integrals, errors=None) -> VoidSeriesResult:
    """1 + sum_l (-1)^l / l! * I_l for integrated intensities I_1, I_2, ..."""
    integrals = np.asarray(integrals, dtype=np.float64)
    errors = np.zeros_like(integrals) if errors is None else np.asarray(errors, dtype=np.float64)
    ell = np.arange(1, integrals.size + 1)
    fact = np.array([math.factorial(int(l)) for l in ell], dtype=np.float64)
    sign = np.where(ell % 2 == 0, 1.0, -1.0)
    terms = sign * integrals / fact
    partial = 1.0 + np.cumsum(terms)
    raw = float(partial[-1]) if partial.size else 1.0
    return VoidSeriesResult(float(s), terms, partial, errors / fact, min(1.0, max(0.0, raw)), raw)


def void_series(
    ctx: KernelContext, s: float, nodes: int = 64, mc_points: int = 10**6, seed: int = 0
) -> VoidSeriesResult:
    """Probability that the rescaled CUE(N) process has no point in [0, s].

    Terms up to order N (intensities of higher order vanish). Orders <= 3 use
    tensor Gauss-Legendre with node-halving error estimates; higher orders use
    replicated scrambled Sobol points.
    """
    n = ctx.N
    if not 0.0 <= s <= n:
        raise InvalidArgumentError(f"s must lie in [0, N={n}], got {s}")
    if s == 0.0:
        return void_series_from_integrals(0.0, np.zeros(n))
    integrals = np.empty(n)
    errors = np.empty(n)
    for ell in range(1, n + 1):
        if ell <= 3:
            fine = _det_integral_quadrature(ctx, 0.0, s, ell, nodes, rescaled=True)
            coarse = _det_integral_quadrature(ctx, 0.0, s, ell, max(2, nodes // 2), rescaled=True)
            integrals[ell - 1], errors[ell - 1] = fine, abs(fine - coarse)
        else:
            integrals[ell - 1], errors[ell - 1] = _det_integral_qmc(
                ctx, 0.0, s, ell, mc_points, rescaled=True, seed=seed
            )
    return void_series_from_integrals(s, integrals, errors)


def _arc_pieces(x: float):
    """[0, x) and [x, 2pi): the y-ranges for which x - y needs no wrap (eta=0) or one (eta=1)."""
    return ((0.0, x), (x, TWO_PI))


def _gl(a: float, b: float, nodes: int):
    x, w = _gauss_legendre(nodes)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def tensor_pair_intensity(
    ctx: KernelContext,
    x1: float,
    x2: float,
    nodes: int | None = None,
    diagonal_weight: float = 2.0,
) -> float:
    """Two-point intensity of the rescaled tensor spectrum of two CUE(N) factors.

    Points are on the scale where the N^2 eigenphases have unit density.
    The sum runs over wrap indicators eta in {0,1}^2: a 2-d term integrating
    the product of the two factors' 2x2 kernel determinants, plus a 1-d term
    on the diagonal y1 = y2 for pairs of tensor eigenphases that share one
    factor eigenphase. Sharing can happen in either factor, hence
    ``diagonal_weight = 2`` per unit length of y.
    """
    n = ctx.N
    if x1 == x2:
        raise InvalidArgumentError("coincident points")
    span = n * n
    if not (0.0 <= x1 < span and 0.0 <= x2 < span):
        raise InvalidArgumentError(f"points must lie in [0, {span})")
    nodes = max(64, 8 * n) if nodes is None else nodes
    xs = np.mod(np.array([x1, x2]) * TWO_PI / span, TWO_PI)
    pieces = [_arc_pieces(float(x)) for x in xs]

    def det2(u):
        k = _phase_kernel(ctx, u)
        one = _phase_kernel(ctx, np.zeros_like(u))
        mats = np.stack([np.stack([one, k], -1), np.stack([k, one], -1)], -2)
        return det_pivoted(mats)

    two_d = 0.0
    one_d = 0.0
    for eta in product((0, 1), repeat=2):
        (a1, b1), (a2, b2) = pieces[0][eta[0]], pieces[1][eta[1]]
        shift = TWO_PI * (eta[0] - eta[1]) + xs[0] - xs[1]
        if b1 > a1 and b2 > a2:
            y1, w1 = _gl(a1, b1, nodes)
            y2, w2 = _gl(a2, b2, nodes)
            d = y1[:, None] - y2[None, :]
            vals = det2(d) * det2(shift - d)
            two_d += float(w1 @ vals @ w2)
        lo, hi = max(a1, a2), min(b1, b2)
        if hi > lo:
            y, w = _gl(lo, hi, nodes)
            # det of the 1x1 block is K(0) = 1; the 2x2 block no longer depends on y
            vals = det2(np.full_like(y, shift))
            one_d += float(w @ vals)
    return two_d / TWO_PI ** 2 + diagonal_weight * one_d / (n * TWO_PI)

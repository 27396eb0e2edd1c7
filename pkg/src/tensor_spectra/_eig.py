"""Compiled kernels for small dense complex matrices.

Phase-corrected Householder QR, unitarity defect, Householder Hessenberg
reduction and Wilkinson-shifted QR iteration (eigenvalues only).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16


@njit(cache=True)
def hessenberg_inplace(a):
    n = a.shape[0]
    for k in range(n - 2):
        m = n - k - 1
        v = np.empty(m, dtype=np.complex128)
        norm2 = 0.0
        for i in range(m):
            v[i] = a[k + 1 + i, k]
            norm2 += v[i].real ** 2 + v[i].imag ** 2
        if norm2 == 0.0:
            continue
        xnorm = np.sqrt(norm2)
        x0 = v[0]
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        alpha = -phase * xnorm
        v[0] = x0 - alpha
        vnorm2 = norm2 - ax0 * ax0 + abs(v[0]) ** 2
        if vnorm2 == 0.0:
            continue
        scale = 2.0 / vnorm2
        # left: rows k+1.. of a <- (I - scale v v^H) a
        for j in range(k, n):
            s = 0.0 + 0.0j
            for i in range(m):
                s += np.conj(v[i]) * a[k + 1 + i, j]
            s *= scale
            for i in range(m):
                a[k + 1 + i, j] -= v[i] * s
        # right: columns k+1.. of a <- a (I - scale v v^H)
        for r in range(n):
            s = 0.0 + 0.0j
            for i in range(m):
                s += a[r, k + 1 + i] * v[i]
            s *= scale
            for i in range(m):
                a[r, k + 1 + i] -= s * np.conj(v[i])
        for i in range(k + 2, n):
            a[i, k] = 0.0


@njit(cache=True)
def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closer to d
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    mu1 = d - b * c / (half + disc) if abs(half + disc) > 0.0 else d
    mu2 = d - b * c / (half - disc) if abs(half - disc) > 0.0 else d
    if abs(mu1 - d) <= abs(mu2 - d):
        return mu1
    return mu2


@njit(cache=True)
def hessenberg_qr_eigvals(h, max_sweeps):
    """Eigenvalues of an upper Hessenberg matrix; returns (values, ok flag)."""
    n = h.shape[0]
    eig = np.empty(n, dtype=np.complex128)
    cs = np.empty(n, dtype=np.complex128)
    ss = np.empty(n, dtype=np.complex128)
    hi = n - 1
    sweeps = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            tst = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if abs(h[lo, lo - 1]) <= _EPS * tst:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        if sweeps >= max_sweeps:
            return eig, False
        sweeps += 1
        since_deflation += 1
        if since_deflation % 11 == 10:
            # exceptional shift breaks rare stagnation cycles
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        for i in range(lo, hi + 1):
            h[i, i] -= mu
        # H - mu I = QR via Givens, restricted to the active block
        for k in range(lo, hi):
            x = h[k, k]
            y = h[k + 1, k]
            r = np.sqrt(abs(x) ** 2 + abs(y) ** 2)
            if r == 0.0:
                c = 1.0 + 0.0j
                s = 0.0 + 0.0j
            else:
                c = x / r
                s = y / r
            cs[k] = c
            ss[k] = s
            for j in range(k, hi + 1):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = np.conj(c) * t1 + np.conj(s) * t2
                h[k + 1, j] = -s * t1 + c * t2
        # RQ
        for k in range(lo, hi):
            c = cs[k]
            s = ss[k]
            top = min(k + 2, hi)
            for i in range(lo, top + 1):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = t1 * c + t2 * s
                h[i, k + 1] = -t1 * np.conj(s) + t2 * np.conj(c)
        for i in range(lo, hi + 1):
            h[i, i] += mu
    return eig, True


@njit(cache=True)
def eigvals(a, max_sweeps):
    h = a.copy()
    hessenberg_inplace(h)
    return hessenberg_qr_eigvals(h, max_sweeps)


@njit(cache=True)
def haar_from_ginibre(g):
    """Householder QR of g; returns (Q diag(R_jj/|R_jj|), min |R_jj|, max|U*U - I|)."""
    n = g.shape[0]
    a = g.copy()
    q = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        q[i, i] = 1.0
    rdiag = np.empty(n, dtype=np.complex128)
    v = np.empty(n, dtype=np.complex128)
    for k in range(n):
        m = n - k
        norm2 = 0.0
        for i in range(m):
            v[i] = a[k + i, k]
            norm2 += v[i].real ** 2 + v[i].imag ** 2
        xnorm = np.sqrt(norm2)
        x0 = v[0]
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        alpha = -phase * xnorm
        rdiag[k] = alpha
        v[0] = x0 - alpha
        vnorm2 = norm2 - ax0 * ax0 + abs(v[0]) ** 2
        if vnorm2 == 0.0:
            continue
        scale = 2.0 / vnorm2
        for j in range(k, n):
            s = 0.0 + 0.0j
            for i in range(m):
                s += np.conj(v[i]) * a[k + i, j]
            s *= scale
            for i in range(m):
                a[k + i, j] -= v[i] * s
        for r in range(n):
            s = 0.0 + 0.0j
            for i in range(m):
                s += q[r, k + i] * v[i]
            s *= scale
            for i in range(m):
                q[r, k + i] -= s * np.conj(v[i])
    min_abs = np.inf
    for k in range(n):
        ad = abs(rdiag[k])
        if ad < min_abs:
            min_abs = ad
        ph = rdiag[k] / ad if ad > 0.0 else 1.0 + 0.0j
        for r in range(n):
            q[r, k] *= ph
    return q, min_abs, defect(q)


@njit(cache=True)
def defect(u):
    n = u.shape[0]
    worst = 0.0
    for i in range(n):
        for j in range(n):
            s = 0.0 + 0.0j
            for r in range(n):
                s += np.conj(u[r, i]) * u[r, j]
            if i == j:
                s -= 1.0
            if abs(s) > worst:
                worst = abs(s)
    return worst

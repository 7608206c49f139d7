"""Compiled inner loops of the Newton power flow."""

import numpy as np
from numba import njit

CONVERGED, MAX_ITER, SINGULAR = 0, 1, 2


@njit(cache=True)
def _mismatch(y, v, s, pvpq, pq, f):
    n = v.shape[0]
    npvpq = pvpq.shape[0]
    mis = np.empty(n, dtype=np.complex128)
    for i in range(n):
        acc = 0j
        for k in range(n):
            acc += y[i, k] * v[k]
        mis[i] = v[i] * np.conj(acc) - s[i]
    norm = 0.0
    for r in range(npvpq):
        f[r] = mis[pvpq[r]].real
        norm = max(norm, abs(f[r]))
    for r in range(pq.shape[0]):
        f[npvpq + r] = mis[pq[r]].imag
        norm = max(norm, abs(f[npvpq + r]))
    return norm


@njit(cache=True)
def _solve_inplace(a, b):
    """Gaussian elimination with partial pivoting; False when singular."""
    m = b.shape[0]
    for c in range(m):
        p = c
        big = abs(a[c, c])
        for r in range(c + 1, m):
            if abs(a[r, c]) > big:
                big = abs(a[r, c])
                p = r
        if big < 1e-14:
            return False
        if p != c:
            for k in range(m):
                tmp = a[c, k]
                a[c, k] = a[p, k]
                a[p, k] = tmp
            tmp = b[c]
            b[c] = b[p]
            b[p] = tmp
        inv = 1.0 / a[c, c]
        for r in range(c + 1, m):
            fac = a[r, c] * inv
            if fac != 0.0:
                for k in range(c + 1, m):
                    a[r, k] -= fac * a[c, k]
                b[r] -= fac * b[c]
    for r in range(m - 1, -1, -1):
        acc = b[r]
        for k in range(r + 1, m):
            acc -= a[r, k] * b[k]
        b[r] = acc / a[r, r]
    return True


@njit(cache=True)
def newton_kernel(y, s, v, pvpq, pq, tol, max_it):
    """Polar Newton iteration on complex voltages ``v`` (updated in place).

    Returns ``(status, iterations, max_mismatch)``.
    """
    n = v.shape[0]
    npvpq = pvpq.shape[0]
    npq = pq.shape[0]
    m = npvpq + npq
    va = np.angle(v)
    vm = np.abs(v)
    f = np.empty(m)
    norm = _mismatch(y, v, s, pvpq, pq, f)
    it = 0
    jac = np.empty((m, m))
    ds_dvm = np.empty((n, n), dtype=np.complex128)
    ds_dva = np.empty((n, n), dtype=np.complex128)
    ibus = np.empty(n, dtype=np.complex128)
    while norm >= tol and it < max_it:
        it += 1
        for i in range(n):
            acc = 0j
            for k in range(n):
                acc += y[i, k] * v[k]
            ibus[i] = acc
        for i in range(n):
            for k in range(n):
                yv = y[i, k] * v[k]
                ds_dvm[i, k] = v[i] * np.conj(yv / vm[k])
                ds_dva[i, k] = -1j * v[i] * np.conj(yv)
            ds_dvm[i, i] += np.conj(ibus[i]) * v[i] / vm[i]
            ds_dva[i, i] += 1j * v[i] * np.conj(ibus[i])
        for r in range(npvpq):
            i = pvpq[r]
            for c in range(npvpq):
                jac[r, c] = ds_dva[i, pvpq[c]].real
            for c in range(npq):
                jac[r, npvpq + c] = ds_dvm[i, pq[c]].real
        for r in range(npq):
            i = pq[r]
            for c in range(npvpq):
                jac[npvpq + r, c] = ds_dva[i, pvpq[c]].imag
            for c in range(npq):
                jac[npvpq + r, npvpq + c] = ds_dvm[i, pq[c]].imag
        dx = -f
        if not _solve_inplace(jac, dx):
            return SINGULAR, it, np.inf
        for r in range(npvpq):
            va[pvpq[r]] += dx[r]
        for r in range(npq):
            vm[pq[r]] += dx[npvpq + r]
        for i in range(n):
            v[i] = vm[i] * np.exp(1j * va[i])
        norm = _mismatch(y, v, s, pvpq, pq, f)
        if not np.isfinite(norm):
            return SINGULAR, it, np.inf
    if norm < tol:
        return CONVERGED, it, norm
    return MAX_ITER, it, norm

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: mixed-radix FFT, structured kernel reflection, walk loops.

Mirrors :mod:`spandt.fft` and :meth:`spandt.kernel.ReflectionPlan.apply_numpy`
step for step, including the flop accounting.
"""

import numpy as np

from libc.string cimport memcpy

cdef double complex CZERO = 0
cdef double SQ2 = 1.4142135623730951
cdef long long CMUL = 6, CADD = 2, RMUL = 2
cdef Py_ssize_t BLUESTEIN_MIN = 64


cdef inline double complex cconj(double complex z) nogil:
    return z.real - 1j * z.imag


cdef class CBlue:
    cdef public Py_ssize_t p, L
    cdef double complex[::1] chirp, kernel, w1, w2
    cdef CPlan sub

    def __init__(self, pyplan, CPlan sub):
        self.p = pyplan.p
        self.L = pyplan.L
        self.chirp = np.ascontiguousarray(pyplan.chirp, dtype=complex)
        self.kernel = np.ascontiguousarray(pyplan.kernel, dtype=complex)
        self.w1 = np.zeros(self.L, dtype=complex)
        self.w2 = np.zeros(self.L, dtype=complex)
        self.sub = sub


cdef class CPlan:
    """Compiled counterpart of :class:`spandt.fft.FFTPlan`."""
    cdef public Py_ssize_t n
    cdef Py_ssize_t[::1] factors
    cdef double complex[::1] table
    cdef dict blue
    cdef double complex[::1] ybuf, zbuf, io1, io2

    def __init__(self, Py_ssize_t n, dict _cache=None):
        from . import fft as pyfft
        plan = pyfft.get_plan(n)
        self.n = n
        self.factors = np.asarray(plan.factors + (1,), dtype=np.intp)
        self.table = np.ascontiguousarray(plan.table, dtype=complex)
        self.blue = {}
        cache = {} if _cache is None else _cache
        for p, bp in plan.bluestein.items():
            if bp.L not in cache:
                cache[bp.L] = CPlan(bp.L, cache)
            self.blue[p] = CBlue(bp, cache[bp.L])
        maxp = max(plan.factors) if plan.factors else 1
        self.ybuf = np.zeros(maxp, dtype=complex)
        self.zbuf = np.zeros(maxp, dtype=complex)
        self.io1 = np.zeros(n, dtype=complex)
        self.io2 = np.zeros(n, dtype=complex)

    def fft(self, x):
        """Forward transform; returns ``(out, flops)``."""
        cdef double complex[::1] xin = np.ascontiguousarray(x, dtype=complex)
        out = np.empty(self.n, dtype=complex)
        cdef double complex[::1] o = out
        cdef long long ops = _fft_rec(self, &xin[0], 1, &o[0], self.n, 0)
        return out, ops

    def ifft(self, x):
        out = np.empty(self.n, dtype=complex)
        cdef double complex[::1] xin = np.ascontiguousarray(x, dtype=complex)
        cdef double complex[::1] o = out
        cdef long long ops = _ifft(self, &xin[0], &o[0])
        return out, ops


cdef long long _prime(CPlan P, double complex* x, Py_ssize_t s, double complex* out,
                      Py_ssize_t p) except -1:
    """``out[q] = sum_r x[r s] exp(-2 pi i r q / p)``."""
    cdef Py_ssize_t r, q, step, j
    cdef double complex acc, x0, x1
    cdef CBlue B
    cdef long long ops = 0
    if p == 2:
        x0 = x[0]
        x1 = x[s]
        out[0] = x0 + x1
        out[1] = x0 - x1
        return 2 * CADD
    if p <= BLUESTEIN_MIN:
        step = P.n // p
        for q in range(p):
            acc = CZERO
            for r in range(p):
                acc = acc + x[r * s] * P.table[((r * q) % p) * step]
            out[q] = acc
        return p * p * CMUL + p * (p - 1) * CADD
    B = P.blue[p]
    for j in range(B.L):
        B.w1[j] = CZERO
    for j in range(p):
        B.w1[j] = x[j * s] * B.chirp[j]
    ops += _fft_rec(B.sub, &B.w1[0], 1, &B.w2[0], B.L, 0)
    for j in range(B.L):
        B.w1[j] = cconj(B.w2[j] * B.kernel[j])
    ops += _fft_rec(B.sub, &B.w1[0], 1, &B.w2[0], B.L, 0)
    for q in range(p):
        out[q] = cconj(B.w2[q]) / B.L * B.chirp[q]
    return ops + 2 * p * CMUL + B.L * CMUL + B.L * RMUL


cdef long long _fft_rec(CPlan P, double complex* x, Py_ssize_t stride, double complex* out,
                        Py_ssize_t n, int level) except -1:
    cdef Py_ssize_t p, m, r, k, q, step
    cdef long long ops = 0
    if n == 1:
        out[0] = x[0]
        return 0
    p = P.factors[level]
    m = n // p
    if m == 1:
        return _prime(P, x, stride, out, p)
    for r in range(p):
        ops += _fft_rec(P, x + r * stride, stride * p, out + r * m, m, level + 1)
    step = P.n // n
    cdef double complex* y = &P.ybuf[0]
    cdef double complex* z = &P.zbuf[0]
    for k in range(m):
        y[0] = out[k]
        for r in range(1, p):
            y[r] = out[r * m + k] * P.table[r * k * step]
        ops += _prime(P, y, 1, z, p)
        for q in range(p):
            out[q * m + k] = z[q]
    return ops + (p - 1) * m * CMUL


cdef long long _ifft(CPlan P, double complex* x, double complex* out) except -1:
    cdef Py_ssize_t j, n = P.n
    cdef double complex* tmp = &P.io1[0]
    for j in range(n):
        tmp[j] = cconj(x[j])
    cdef long long ops = _fft_rec(P, tmp, 1, out, n, 0)
    for j in range(n):
        out[j] = cconj(out[j]) / n
    return ops + n * RMUL


cdef class CKernel:
    """Structured reflection through ker M~ built from a ``ReflectionPlan``."""
    cdef Py_ssize_t n, nred, nt1, ncyc
    cdef Py_ssize_t[::1] red, t1a, t1b, ptr, cf, cb, outside
    cdef double[::1] t1ua, t1ub, cub
    cdef double complex[::1] cuf
    cdef list cplans
    cdef double complex[::1] fin, bin_, fh, bh, cur, acc

    def __init__(self, plan):
        self.n = plan.n
        self.red = np.asarray(plan.red, dtype=np.intp)
        self.t1a = np.asarray(plan.t1_a, dtype=np.intp)
        self.t1b = np.asarray(plan.t1_b, dtype=np.intp)
        self.t1ua = np.ascontiguousarray(plan.t1_ua, dtype=float)
        self.t1ub = np.ascontiguousarray(plan.t1_ub, dtype=float)
        self.ptr = np.asarray(plan.cyc_ptr, dtype=np.intp)
        self.cf = np.asarray(plan.cyc_f, dtype=np.intp)
        self.cb = np.asarray(plan.cyc_b, dtype=np.intp)
        self.cuf = np.ascontiguousarray(plan.cyc_uf, dtype=complex)
        self.cub = np.ascontiguousarray(plan.cyc_ub, dtype=float)
        self.outside = np.asarray(plan.outside, dtype=np.intp)
        self.nred = len(self.red)
        self.nt1 = len(self.t1a)
        self.ncyc = len(self.ptr) - 1
        lens = np.diff(plan.cyc_ptr)
        cache, bcache = {}, {}
        self.cplans = []
        for t in lens:
            t = int(t)
            if t not in cache:
                cache[t] = CPlan(t, bcache)
            self.cplans.append(cache[t])
        maxt = int(lens.max()) if len(lens) else 1
        self.fin = np.zeros(maxt, dtype=complex)
        self.bin_ = np.zeros(maxt, dtype=complex)
        self.fh = np.zeros(maxt, dtype=complex)
        self.bh = np.zeros(maxt, dtype=complex)
        self.cur = np.zeros(self.n, dtype=complex)
        self.acc = np.zeros(self.n, dtype=complex)

    cdef long long _reflect(self, double complex* y) except -1:
        cdef Py_ssize_t i, c, j, t, o, a, b
        cdef double complex va, vb, s2
        cdef long long ops = 0
        cdef CPlan cp
        for i in range(self.nred):
            a = self.red[i]
            va = y[a]
            vb = y[a + 1]
            y[a] = (vb - va) / SQ2
            y[a + 1] = (vb + va) / SQ2
        for i in range(self.nt1):
            a = self.t1a[i]
            b = self.t1b[i]
            va = y[a]
            vb = y[b]
            s2 = 2 * (self.t1ua[i] * va + self.t1ub[i] * vb)
            y[a] = s2 * self.t1ua[i] - va
            y[b] = s2 * self.t1ub[i] - vb
        for c in range(self.ncyc):
            o = self.ptr[c]
            t = self.ptr[c + 1] - o
            cp = <CPlan>self.cplans[c]
            for j in range(t):
                self.fin[j] = y[self.cf[o + j]]
                self.bin_[j] = y[self.cb[o + j]]
            ops += _fft_rec(cp, &self.fin[0], 1, &self.fh[0], t, 0)
            ops += _fft_rec(cp, &self.bin_[0], 1, &self.bh[0], t, 0)
            for j in range(t):
                s2 = 2 * (cconj(self.cuf[o + j]) * self.fh[j] + self.cub[o + j] * self.bh[j])
                self.fh[j] = s2 * self.cuf[o + j] - self.fh[j]
                self.bh[j] = s2 * self.cub[o + j] - self.bh[j]
            ops += _ifft(cp, &self.fh[0], &self.fin[0])
            ops += _ifft(cp, &self.bh[0], &self.bin_[0])
            for j in range(t):
                y[self.cf[o + j]] = self.fin[j]
                y[self.cb[o + j]] = self.bin_[j]
        for i in range(len(self.outside)):
            a = self.outside[i]
            y[a] = -y[a]
        for i in range(self.nred):
            a = self.red[i]
            va = y[a]
            vb = y[a + 1]
            y[a] = (vb - va) / SQ2
            y[a + 1] = (vb + va) / SQ2
        return ops + 16 * self.nred + 16 * self.nt1 + 24 * self.ptr[self.ncyc]

    def reflect(self, double complex[::1] y):
        """Reflect ``y`` in place; returns the flop count."""
        if y.shape[0] != self.n:
            raise ValueError("state has the wrong length")
        return self._reflect(&y[0])

    def walk_average(self, double[::1] sign, psi, Py_ssize_t N, bint adjoint=False):
        """``(1/N) sum_{j<N} U^j psi`` with ``U = diag(sign) R`` (or its inverse).

        Returns ``(average, flops)``; ``N - 1`` applications of ``U``.
        """
        cdef Py_ssize_t i, j, n = self.n
        cdef long long ops = 0
        cdef double complex[::1] p = np.ascontiguousarray(psi, dtype=complex)
        if p.shape[0] != n or sign.shape[0] != n:
            raise ValueError("length mismatch")
        cdef double complex* cur = &self.cur[0]
        cdef double complex* acc = &self.acc[0]
        memcpy(cur, &p[0], n * sizeof(double complex))
        memcpy(acc, &p[0], n * sizeof(double complex))
        for j in range(1, N):
            if adjoint:
                for i in range(n):
                    cur[i] = cur[i] * sign[i]
                ops += self._reflect(cur)
            else:
                ops += self._reflect(cur)
                for i in range(n):
                    cur[i] = cur[i] * sign[i]
            for i in range(n):
                acc[i] = acc[i] + cur[i]
        out = np.empty(n, dtype=complex)
        cdef double complex[::1] o = out
        for i in range(n):
            o[i] = acc[i] / N
        return out, ops

    def walk(self, double[::1] sign, psi, Py_ssize_t steps, bint adjoint=False):
        """``U^steps psi``; returns ``(state, flops)``."""
        cdef Py_ssize_t i, j, n = self.n
        cdef long long ops = 0
        out = np.array(psi, dtype=complex)
        cdef double complex[::1] y = out
        for j in range(steps):
            if adjoint:
                for i in range(n):
                    y[i] = y[i] * sign[i]
                ops += self._reflect(&y[0])
            else:
                ops += self._reflect(&y[0])
                for i in range(n):
                    y[i] = y[i] * sign[i]
        return out, ops

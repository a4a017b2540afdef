"""Mixed-radix discrete Fourier transform with operation counting.

Decimation in time, peeling the smallest prime factor at every level.
Prime butterflies up to :data:`BLUESTEIN_MIN` are direct; larger prime
factors go through Bluestein's chirp convolution on a power-of-two grid,
so every length costs O(n log n).

Conventions follow numpy: ``fft(x)[k] = sum_j x[j] exp(-2 pi i j k / n)`` and
``ifft`` carries the ``1/n``.

Operation counts are real floating point operations: a complex multiply is
6, a complex add 2, a complex-by-real multiply 2.  The compiled core counts
the same way, step for step.
"""

from __future__ import annotations

import functools

import numpy as np

BLUESTEIN_MIN = 64

CMUL, CADD, RMUL = 6, 2, 2


def prime_factors(n):
    """Prime factors of ``n`` in ascending order, with multiplicity."""
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


class Counter:
    __slots__ = ("flops",)

    def __init__(self):
        self.flops = 0

    def add(self, k):
        self.flops += int(k)


class BluesteinPlan:
    """Length-``p`` DFT as a circular convolution of length ``L >= 2p - 1``."""

    def __init__(self, p):
        self.p = p
        self.L = 1 << (2 * p - 2).bit_length()
        j = np.arange(p)
        # j^2 mod 2p keeps the chirp argument small
        self.chirp = np.exp(-1j * np.pi * ((j * j) % (2 * p)) / p)
        b = np.zeros(self.L, dtype=complex)
        b[:p] = np.conj(self.chirp)
        b[self.L - p + 1:] = np.conj(self.chirp[1:])[::-1]
        self.sub = get_plan(self.L)
        self.kernel = _fft(b[None, :], self.sub, Counter())[0]


class FFTPlan:
    """Precomputed factorization and twiddle table for one length."""

    def __init__(self, n):
        if n < 1:
            raise ValueError("transform length must be positive")
        self.n = n
        self.factors = tuple(prime_factors(n))
        j = np.arange(n)
        self.table = np.exp(-2j * np.pi * j / n)
        self.bluestein = {p: BluesteinPlan(p) for p in set(self.factors) if p > BLUESTEIN_MIN}


@functools.lru_cache(maxsize=None)
def get_plan(n):
    return FFTPlan(n)


def _prime_dft(y, p, plan, ops):
    """Length-``p`` DFT along axis -2 of ``y`` (shape ``(B, p, m)``)."""
    batch = y.shape[0] * y.shape[2]
    if p == 2:
        ops.add(2 * CADD * batch)
        return np.stack([y[:, 0] + y[:, 1], y[:, 0] - y[:, 1]], axis=1)
    if p <= BLUESTEIN_MIN:
        step = plan.n // p
        rq = np.outer(np.arange(p), np.arange(p)) % p
        mat = plan.table[(rq * step) % plan.n]
        ops.add((p * p * CMUL + p * (p - 1) * CADD) * batch)
        return np.einsum("rq,brk->bqk", mat, y)
    bp = plan.bluestein[p]
    a = np.zeros((y.shape[0], y.shape[2], bp.L), dtype=complex)
    a[:, :, :p] = np.moveaxis(y, 1, 2) * bp.chirp
    flat = a.reshape(-1, bp.L)
    spec = _fft(flat, bp.sub, ops) * bp.kernel
    conv = np.conj(_fft(np.conj(spec), bp.sub, ops)) / bp.L
    ops.add((2 * p * CMUL + bp.L * CMUL + bp.L * RMUL) * batch)
    out = conv.reshape(y.shape[0], y.shape[2], bp.L)[:, :, :p] * bp.chirp
    return np.moveaxis(out, 2, 1)


def _fft(x, plan, ops, level=0):
    """Forward transform of every row of ``x`` (shape ``(B, n)``)."""
    bsz, n = x.shape
    if n == 1:
        return x.astype(complex, copy=True)
    p = plan.factors[level]
    m = n // p
    if m == 1:
        return _prime_dft(x[:, :, None], p, plan, ops)[:, :, 0]
    sub = np.stack([x[:, r::p] for r in range(p)], axis=1).reshape(bsz * p, m)
    sub = _fft(sub, plan, ops, level + 1).reshape(bsz, p, m)
    step = plan.n // n
    rk = np.outer(np.arange(p), np.arange(m))
    sub = sub * plan.table[(rk * step) % plan.n]
    ops.add((p - 1) * m * CMUL * bsz)
    out = _prime_dft(sub, p, plan, ops)
    return out.reshape(bsz, n)


def fft(x, axis=-1, ops=None):
    """Forward DFT along ``axis``.  ``ops`` (a :class:`Counter`) accumulates flops."""
    x = np.asarray(x, dtype=complex)
    ops = Counter() if ops is None else ops
    moved = np.moveaxis(x, axis, -1)
    shape = moved.shape
    flat = moved.reshape(-1, shape[-1])
    out = _fft(flat, get_plan(shape[-1]), ops).reshape(shape)
    return np.moveaxis(out, -1, axis)


def ifft(x, axis=-1, ops=None):
    x = np.asarray(x, dtype=complex)
    n = x.shape[axis]
    ops = Counter() if ops is None else ops
    out = np.conj(fft(np.conj(x), axis=axis, ops=ops)) / n
    ops.add(x.size * RMUL)
    return out


def fft_flops(n):
    """Flops of one length-``n`` forward transform."""
    ops = Counter()
    fft(np.zeros(n), ops=ops)
    return ops.flops

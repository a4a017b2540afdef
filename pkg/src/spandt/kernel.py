"""Kernel of M~ and the structured reflection ``R = 2 P_ker - I``.

Each red edge column ``e`` and its pseudo-edge column ``e_bar`` are rotated to

    e- = (e_bar - e)/sqrt2      (M~ image: sqrt2 g |head>)
    e+ = (e_bar + e)/sqrt2      (M~ image: sqrt2 g |tail>)

After the rotation every column coordinate lies in exactly one block:

* a 2-dim Type I block (Root or Leaf column with one rotated coordinate),
* a 2t-dim block per black cycle of length ``t`` (its black edges and the
  rotated coordinate tied to each cycle vertex),
* or, for padding stubs only, no block at all (the coordinate is orthogonal
  to the kernel).

The kernel meets each block in a known subspace, so the reflection acts
block by block.  Type I blocks reflect through a single unit vector.  A
cycle block is spanned by ``v_i = (sqrt2/b) b_i + (1/g)(f_{i+1} - f_i)``,
which the DFT diagonalizes: mode ``k`` of the span is the line through
``(mu_k, sqrt2/b)`` with ``mu_k = (exp(-2 pi i k/t) - 1)/g``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import fft as _fft
from ._backend import core as _core
from .fft import CADD, CMUL, RMUL

S2 = np.sqrt(2.0)


class KernelError(ValueError):
    pass


# -- frame rotation ------------------------------------------------------------

def rotate_pairs(y, red_cols):
    """Apply the (self-inverse) e-/e+ rotation in place; ``red_cols`` are the
    red edge positions, each followed by its pseudo-edge."""
    a = y[red_cols].copy()
    b = y[red_cols + 1]
    y[red_cols] = (b - a) / S2
    y[red_cols + 1] = (b + a) / S2
    return y


def frame_matrix(dg):
    """Dense orthogonal change of frame (standard -> rotated); symmetric."""
    R = np.eye(dg.n_cols)
    return rotate_pairs(R, np.asarray(dg.red_col, dtype=np.int64))


def _rot_pos(dg, red_idx, sign):
    """Column position holding ``e-`` (the red slot) or ``e+`` (the pseudo slot)."""
    return dg.red_col[red_idx] + (0 if sign == "-" else 1)


# -- explicit basis --------------------------------------------------------------

@dataclass
class KernelBasis:
    """Structural kernel basis (Type I and Type II vectors) in the standard column frame."""

    type1: np.ndarray            # (cols, m+1); column 0 is the root vector
    type2: list                  # one (cols, t) array per cycle
    rotated_type1: np.ndarray
    rotated_type2: list

    @property
    def count(self):
        return self.type1.shape[1] + sum(b.shape[1] for b in self.type2)

    def all(self):
        return np.hstack([self.type1, *self.type2])


def kernel_basis(dg, alpha, beta, gamma):
    S = dg.n_cols
    t1 = []
    root = np.zeros(S)
    root[0] = -S2 / alpha
    root[_rot_pos(dg, dg.cycles[0].f[0][0], "+")] = 1 / gamma
    t1.append(root)
    for z in dg.tree.leaves:
        v = np.zeros(S)
        v[dg.leaf_col(z)] = S2 / alpha
        v[_rot_pos(dg, dg.red_into(dg.row[("v", z)]), "-")] = 1 / gamma
        t1.append(v)
    rot1 = np.stack(t1, axis=1)
    betas = dg.cycle_betas(beta)
    rot2 = []
    for ci, cyc in enumerate(dg.cycles):
        t = len(cyc)
        if len(cyc.edges) != t or len(cyc.f) != t:
            raise KernelError(f"cycle {ci} is missing a red coordinate")
        fpos = [_rot_pos(dg, i, s) for i, s in cyc.f]
        B = np.zeros((S, t))
        for i, e in enumerate(cyc.edges):
            B[dg.black_col[e], i] = S2 / betas[ci]
            B[fpos[(i + 1) % t], i] += 1 / gamma
            B[fpos[i], i] -= 1 / gamma
        rot2.append(B)
    F = frame_matrix(dg)
    return KernelBasis(F @ rot1, [F @ B for B in rot2], rot1, rot2)


def null_projector(M, tol=1e-10):
    """Orthogonal projector onto ``ker M`` from an SVD (dense oracle)."""
    N = sla.null_space(np.asarray(M.toarray() if hasattr(M, "toarray") else M), rcond=tol)
    return N @ N.T


def span_projector(V):
    Q = sla.orth(V)
    return Q @ Q.T


# -- cycle orthonormalizer ------------------------------------------------------

class CycleOrthonormalizer:
    """Dense reference for one cycle of length ``t``; coordinates ordered
    ``(f_0..f_{t-1}, b_0..b_{t-1})``."""

    def __init__(self, t, beta, gamma):
        if t < 1:
            raise KernelError("cycle length must be positive")
        self.t, self.beta, self.gamma = t, float(beta), float(gamma)
        shift = np.roll(np.eye(t), 1, axis=0)       # (S c)_j = c_{j-1}
        self.Bp = (shift - np.eye(t)) / gamma
        self.L = self.Bp.conj().T @ self.Bp
        k = np.arange(t)
        self.mu = (np.exp(-2j * np.pi * k / t) - 1) / gamma
        self.lam = 2 * (1 - np.cos(2 * np.pi * k / t)) / gamma**2 + 2 / beta**2
        j = np.arange(t)
        # columns phi_k(j) = exp(2 pi i jk/t)/sqrt(t): B' phi_k = mu_k phi_k
        self.F = np.exp(2j * np.pi * np.outer(j, k) / t) / np.sqrt(t)
        c = S2 / beta
        I = np.eye(t)
        self.Q = np.block([[self.Bp, c * I], [c * I, -self.Bp.conj().T]])

    def matrix(self):
        Z = np.zeros((self.t, self.t))
        FF = np.block([[self.F, Z], [Z, self.F]])
        s = np.concatenate([self.lam, self.lam]) ** -0.5
        return self.Q @ FF * s[None, :]

    def reflection(self):
        W = self.matrix()
        d = np.concatenate([np.ones(self.t), -np.ones(self.t)])
        return (W * d) @ W.conj().T

    def apply(self, fb):
        """Reflection through the Type II span in O(t log t)."""
        fb = np.asarray(fb, dtype=complex)
        if fb.shape[0] != 2 * self.t:
            raise KernelError(f"expected {2 * self.t} coordinates, got {fb.shape[0]}")
        uf = self.mu / np.sqrt(self.lam)
        ub = (S2 / self.beta) / np.sqrt(self.lam)
        Fh = _fft.fft(fb[: self.t], axis=0)
        Bh = _fft.fft(fb[self.t:], axis=0)
        s = np.conj(uf) * Fh + ub * Bh
        Fh, Bh = 2 * s * uf - Fh, 2 * s * ub - Bh
        return np.concatenate([_fft.ifft(Fh, axis=0), _fft.ifft(Bh, axis=0)])


def cycle_reflection(cycle_len, beta, gamma, fb):
    return CycleOrthonormalizer(cycle_len, beta, gamma).apply(fb)


# -- structured plan ------------------------------------------------------------

class ReflectionPlan:
    """Flat index arrays for ``R = 2 P_ker - I`` on the column space of M~.

    Order of application: frame rotation, Type I blocks, cycles in canonical
    order, padding stubs, inverse rotation.
    """

    def __init__(self, dg, alpha, beta, gamma):
        self.n = dg.n_cols
        self.alpha, self.gamma = float(alpha), float(gamma)
        self.betas = dg.cycle_betas(beta).copy()
        self.red = np.asarray(dg.red_col, dtype=np.int64)
        a, b, ua, ub = [0], [_rot_pos(dg, dg.cycles[0].f[0][0], "+")], [-S2 / alpha], [1 / gamma]
        for z in dg.tree.leaves:
            a.append(dg.leaf_col(z))
            b.append(_rot_pos(dg, dg.red_into(dg.row[("v", z)]), "-"))
            ua.append(S2 / alpha)
            ub.append(1 / gamma)
        nrm = np.hypot(ua, ub)
        self.t1_a = np.asarray(a, dtype=np.int64)
        self.t1_b = np.asarray(b, dtype=np.int64)
        self.t1_ua = np.asarray(ua) / nrm
        self.t1_ub = np.asarray(ub) / nrm
        ptr, fpos, bpos, uf, ubk = [0], [], [], [], []
        for ci, cyc in enumerate(dg.cycles):
            t = len(cyc)
            fpos += [_rot_pos(dg, i, s) for i, s in cyc.f]
            bpos += [dg.black_col[e] for e in cyc.edges]
            k = np.arange(t)
            mu = (np.exp(-2j * np.pi * k / t) - 1) / gamma
            lam = 2 * (1 - np.cos(2 * np.pi * k / t)) / gamma**2 + 2 / self.betas[ci] ** 2
            uf.append(mu / np.sqrt(lam))
            ubk.append((S2 / self.betas[ci]) / np.sqrt(lam))
            ptr.append(ptr[-1] + t)
        self.cyc_ptr = np.asarray(ptr, dtype=np.int64)
        self.cyc_f = np.asarray(fpos, dtype=np.int64)
        self.cyc_b = np.asarray(bpos, dtype=np.int64)
        self.cyc_uf = np.concatenate(uf)
        self.cyc_ub = np.concatenate(ubk)
        covered = np.zeros(self.n, dtype=bool)
        for arr in (self.t1_a, self.t1_b, self.cyc_f, self.cyc_b):
            if covered[arr].any():
                raise KernelError("blocks overlap")
            covered[arr] = True
        self.outside = np.flatnonzero(~covered).astype(np.int64)
        lens = np.diff(self.cyc_ptr)
        self.groups = []
        for t in sorted(set(lens.tolist())):
            cs = np.flatnonzero(lens == t)
            rows = self.cyc_ptr[cs][:, None] + np.arange(t)[None, :]
            self.groups.append((t, rows))
        self._cplans = None

    # -- numpy path ----------------------------------------------------------
    def apply_numpy(self, y, ops=None):
        """Reflect ``y`` (shape ``(n,)`` or ``(n, k)``); returns a new array."""
        ops = _fft.Counter() if ops is None else ops
        y = np.array(y, dtype=complex)
        k = 1 if y.ndim == 1 else y.shape[1]
        rotate_pairs(y, self.red)
        a, b = y[self.t1_a], y[self.t1_b]
        ua = self.t1_ua if y.ndim == 1 else self.t1_ua[:, None]
        ub = self.t1_ub if y.ndim == 1 else self.t1_ub[:, None]
        s2 = 2 * (ua * a + ub * b)
        y[self.t1_a] = s2 * ua - a
        y[self.t1_b] = s2 * ub - b
        for t, rows in self.groups:
            fi, bi = self.cyc_f[rows], self.cyc_b[rows]
            uf, ubk = self.cyc_uf[rows], self.cyc_ub[rows]
            if y.ndim == 2:
                uf, ubk = uf[..., None], ubk[..., None]
            Fh = _fft.fft(y[fi], axis=1, ops=ops)
            Bh = _fft.fft(y[bi], axis=1, ops=ops)
            s2 = 2 * (np.conj(uf) * Fh + ubk * Bh)
            y[fi] = _fft.ifft(s2 * uf - Fh, axis=1, ops=ops)
            y[bi] = _fft.ifft(s2 * ubk - Bh, axis=1, ops=ops)
        y[self.outside] *= -1
        rotate_pairs(y, self.red)
        nt = len(self.cyc_b)
        ops.add(k * (2 * 8 * len(self.red) + 16 * len(self.t1_a) + 24 * nt))
        return y

    # -- compiled path ---------------------------------------------------------
    def compiled(self):
        """Cached compiled kernel (``spandt._core.CKernel``)."""
        if self._cplans is None:
            if _core is None:
                raise RuntimeError("compiled core not available")
            self._cplans = _core.CKernel(self)
        return self._cplans

    def apply_compiled(self, y, ops=None):
        y = np.array(y, dtype=complex)
        ck = self.compiled()
        cols = [y] if y.ndim == 1 else [np.ascontiguousarray(y[:, i]) for i in range(y.shape[1])]
        flops = 0
        for c in cols:
            flops += ck.reflect(c)
        if ops is not None:
            ops.add(flops)
        return cols[0] if y.ndim == 1 else np.stack(cols, axis=1)

    def apply(self, y, ops=None, backend=None):
        from . import _backend
        name = _backend.resolve(backend)
        if name == "cython":
            return self.apply_compiled(y, ops)
        return self.apply_numpy(y, ops)

    def flops(self, backend=None):
        """Arithmetic operations of one application (same for both backends)."""
        ops = _fft.Counter()
        self.apply(np.zeros(self.n, dtype=complex), ops=ops, backend=backend)
        return ops.flops

    def dense(self, backend=None):
        return self.apply(np.eye(self.n), backend=backend).real


def reflect_kernel(plan, state, backend=None):
    return plan.apply(state, backend=backend)


def type1_reflection(plan, state):
    """Reflection through span(Type I) alone (identity on every other coordinate)."""
    y = np.array(state, dtype=complex)
    rotate_pairs(y, plan.red)
    a, b = y[plan.t1_a], y[plan.t1_b]
    s2 = 2 * (plan.t1_ua * a + plan.t1_ub * b)
    y[plan.t1_a] = s2 * plan.t1_ua - a
    y[plan.t1_b] = s2 * plan.t1_ub - b
    return rotate_pairs(y, plan.red)


def type1_triple(alpha, gamma, leaf=True):
    """Dense 3x3 Type I reflection on the (pseudo, red, Root/Leaf) columns of
    one red edge, built as ``H K D K^T H^T`` with ``D = diag(1, -1, 1)``.

    ``H`` is the e+/e- rotation and ``K`` is the normalized rotation sending
    ``|0>`` to the Type I direction and ``|2>`` to the partner coordinate.
    The partner belongs to another block, so ``D`` leaves it fixed."""
    s = 1 if leaf else -1
    c = np.array([s * S2 / alpha, 1 / gamma])
    c /= np.linalg.norm(c)
    # basis |0>=pseudo, |1>=red, |2>=Root/Leaf; Type I lives on (e-|e+, Root/Leaf)
    H = np.array([[1, 1, 0], [1, -1, 0], [0, 0, S2]]) / S2
    K = np.zeros((3, 3))
    # first column of K in the H-frame is the Type I direction
    K[2, 0], K[1 if leaf else 0, 0] = c[0], c[1]
    K[2, 1], K[1 if leaf else 0, 1] = c[1], -c[0]
    K[0 if leaf else 1, 2] = 1.0
    D = np.diag([1.0, -1.0, 1.0])
    return H @ K @ D @ K.T @ H.T

"""Fused elementwise loops for activations and hidden-layer propagation.

Matrix products stay in numpy; these kernels cover the elementwise work
between them, which otherwise dominates for narrow layers.  Each loop is
compiled once per activation kind, with the kind chosen outside the loop.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def relu_derivs(v):
    if v >= 0.0:
        return v, 1.0, 0.0, 0.0
    return 0.0, 0.0, 0.0, 0.0


@numba.njit(cache=True, inline="always")
def srelu_derivs(v):
    # on [0, 1): s = x(1 - x); zero elsewhere, right limits at the kinks
    if v >= 0.0 and v < 1.0:
        return v * (1.0 - v), 1.0 - 2.0 * v, -2.0, 0.0
    return 0.0, 0.0, 0.0, 0.0


@numba.njit(cache=True, inline="always")
def srelu2_derivs(v):
    if v >= 0.0 and v < 1.0:
        s = v * (1.0 - v)
        ds = 1.0 - 2.0 * v
        return s * s, 2.0 * s * ds, 2.0 * ds * ds - 4.0 * s, -12.0 * ds
    return 0.0, 0.0, 0.0, 0.0


@numba.njit(cache=True, inline="always")
def srelu3_derivs(v):
    if v >= 0.0 and v < 1.0:
        s = v * (1.0 - v)
        ds = 1.0 - 2.0 * v
        return (
            s * s * s,
            3.0 * s * s * ds,
            6.0 * s * ds * ds - 6.0 * s * s,
            6.0 * ds * ds * ds - 36.0 * s * ds,
        )
    return 0.0, 0.0, 0.0, 0.0


@numba.njit(cache=True, inline="always")
def _table_loop(fn, x, order, out):
    for i in range(x.size):
        f = fn(x[i])
        for k in range(order + 1):
            out[k, i] = f[k]


@numba.njit(cache=True, inline="always")
def _forward_loop(fn, a, ja, la, has_la, order, nder, s, jz, lz, q):
    n_pts, width = a.shape
    dim = ja.shape[1]
    shared = ja.shape[0] == 1
    for i in range(n_pts):
        ii = 0 if shared else i
        for j in range(width):
            f = fn(a[i, j])
            s[0, i, j] = f[0]
            if nder >= 1:
                s[1, i, j] = f[1]
            if nder >= 2:
                s[2, i, j] = f[2]
            if nder >= 3:
                s[3, i, j] = f[3]
            if order >= 1:
                qq = 0.0
                for k in range(dim):
                    g = ja[ii, k, j]
                    jz[i, k, j] = f[1] * g
                    qq += g * g
                if order >= 2:
                    q[i, j] = qq
                    lap = f[2] * qq
                    if has_la:
                        lap += f[1] * la[i, j]
                    lz[i, j] = lap


@numba.njit(cache=True)
def activation_table(x, code, order, out):
    """``out[k] = sigma^(k)(x)`` for ``k <= order`` over a flat array."""
    # one branch per kind keeps the dispatch out of the loop
    if code == 0:
        _table_loop(relu_derivs, x, order, out)
    elif code == 1:
        _table_loop(srelu_derivs, x, order, out)
    elif code == 2:
        _table_loop(srelu2_derivs, x, order, out)
    else:
        _table_loop(srelu3_derivs, x, order, out)


@numba.njit(cache=True)
def layer_forward(a, ja, la, has_la, code, order, nder, s, jz, lz, q):
    """Activation of one hidden layer with derivative propagation.

    ``ja`` may have a leading dimension of 1 (shared by all points).
    Fills ``s[k] = sigma^(k)(a)`` for ``k <= nder``, and for ``order >= 1``
    ``jz = s1 * ja``; for ``order >= 2`` ``q = |ja|^2`` and
    ``lz = s2 * q + s1 * la``.
    """
    if code == 0:
        _forward_loop(relu_derivs, a, ja, la, has_la, order, nder, s, jz, lz, q)
    elif code == 1:
        _forward_loop(srelu_derivs, a, ja, la, has_la, order, nder, s, jz, lz, q)
    elif code == 2:
        _forward_loop(srelu2_derivs, a, ja, la, has_la, order, nder, s, jz, lz, q)
    else:
        _forward_loop(srelu3_derivs, a, ja, la, has_la, order, nder, s, jz, lz, q)


@numba.njit(cache=True)
def layer_backward(zbar, jzbar, lzbar, has_j, has_l, s, ja, la, has_la, q, abar, jbar, lbar):
    """Adjoint of :func:`layer_forward` with respect to ``a``, ``ja`` and ``la``."""
    n_pts, width = zbar.shape
    dim = ja.shape[1]
    shared = ja.shape[0] == 1
    for i in range(n_pts):
        ii = 0 if shared else i
        for j in range(width):
            s1 = s[1, i, j]
            acc = zbar[i, j] * s1
            if has_j or has_l:
                s2 = s[2, i, j]
                lb = lzbar[i, j] if has_l else 0.0
                cross = 0.0
                for k in range(dim):
                    g = ja[ii, k, j]
                    jb = 2.0 * lb * s2 * g
                    if has_j:
                        jzb = jzbar[i, k, j]
                        cross += jzb * g
                        jb += jzb * s1
                    jbar[i, k, j] = jb
                acc += s2 * cross
                if has_l:
                    acc += lb * s[3, i, j] * q[i, j]
                    if has_la:
                        acc += lb * s2 * la[i, j]
                    lbar[i, j] = lb * s1
            abar[i, j] = acc


EMPTY2 = np.zeros((1, 1))
EMPTY3 = np.zeros((1, 1, 1))

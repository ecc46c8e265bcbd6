"""Compiled stencil kernels for the weighted 5-point mesh operator.

All loops run in a fixed order on a single thread, so the floating-point
result is a function of the inputs only.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def matvec(x, d, wx, wy, out):
    """``out = d*x + sum_j w_ij (x_i - x_j)``.

    Neighbor differences are formed first so that a nearly uniform ``x``
    with a tiny mass term ``d`` keeps full relative precision.
    """
    h, w = x.shape
    for i in range(h):
        for j in range(w):
            xi = x[i, j]
            s = d[i, j] * xi
            if j > 0:
                s += wx[i, j - 1] * (xi - x[i, j - 1])
            if j < w - 1:
                s += wx[i, j] * (xi - x[i, j + 1])
            if i > 0:
                s += wy[i - 1, j] * (xi - x[i - 1, j])
            if i < h - 1:
                s += wy[i, j] * (xi - x[i + 1, j])
            out[i, j] = s
    return out


@njit(cache=True)
def residual(b, x, d, wx, wy, out):
    matvec(x, d, wx, wy, out)
    h, w = x.shape
    for i in range(h):
        for j in range(w):
            out[i, j] = b[i, j] - out[i, j]
    return out


@njit(cache=True)
def _half_sweep(x, b, diag, wx, wy, color):
    h, w = x.shape
    for i in range(h):
        j0 = (i + color) % 2
        for j in range(j0, w, 2):
            s = b[i, j]
            if j > 0:
                s += wx[i, j - 1] * x[i, j - 1]
            if j < w - 1:
                s += wx[i, j] * x[i, j + 1]
            if i > 0:
                s += wy[i - 1, j] * x[i - 1, j]
            if i < h - 1:
                s += wy[i, j] * x[i + 1, j]
            x[i, j] = s / diag[i, j]


@njit(cache=True)
def rb_sweep(x, b, diag, wx, wy, first_color):
    """Red-black Gauss-Seidel: ``first_color`` nodes, then the other color.

    Red nodes have ``(i + j)`` even.  Nodes of one color only couple to the
    other color, so each half-sweep is order independent.
    """
    _half_sweep(x, b, diag, wx, wy, first_color)
    _half_sweep(x, b, diag, wx, wy, 1 - first_color)


@njit(cache=True)
def restrict(r, out):
    """Sum fine values over 2x2 aggregates (ragged at odd edges)."""
    h, w = r.shape
    out[:, :] = 0.0
    for i in range(h):
        for j in range(w):
            out[i // 2, j // 2] += r[i, j]
    return out


@njit(cache=True)
def prolong_add(ec, x):
    h, w = x.shape
    for i in range(h):
        for j in range(w):
            x[i, j] += ec[i // 2, j // 2]


@njit(cache=True)
def dot(a, b):
    h, w = a.shape
    s = 0.0
    for i in range(h):
        for j in range(w):
            s += a[i, j] * b[i, j]
    return s


def warmup():
    """Compile every kernel on a tiny problem."""
    x = np.zeros((3, 3))
    d = np.ones((3, 3))
    wx = np.ones((3, 2))
    wy = np.ones((2, 3))
    out = np.empty((3, 3))
    matvec(x, d, wx, wy, out)
    residual(x, x, d, wx, wy, out)
    rb_sweep(x, x, d, wx, wy, 0)
    restrict(x, np.empty((2, 2)))
    prolong_add(np.zeros((2, 2)), x)
    dot(x, x)

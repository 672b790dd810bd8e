"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` function for function. Used when the compiled
extension is unavailable or ``PROPEFFECT_PURE_PYTHON`` is set.
"""
import numpy as np

NAME = "python"


def apply_stencil(y, idx, w):
    """Per-point derivative estimate ``sum_j w[i, j] * (y[idx[i, j]] - y[i])``.

    Stencil weights sum to zero, so subtracting ``y[i]`` changes nothing
    mathematically; it makes constant stretches give exact zeros even when
    the float weights do not cancel exactly.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.zeros(idx.shape[0])
    for j in range(idx.shape[1]):
        out += w[:, j] * (y[idx[:, j]] - y)
    return out


def perm_mean_abs_gradient(y, perms, idx, w):
    """Mean absolute stencil derivative of ``y[perm]`` for every row of ``perms``."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    perms = np.asarray(perms, dtype=np.int64)
    yp = y[perms]
    g = np.zeros(perms.shape, dtype=np.float64)
    for j in range(idx.shape[1]):
        g += w[:, j] * (yp[:, idx[:, j]] - yp)
    np.abs(g, out=g)
    # sequential left-to-right sum, same order as the compiled kernel
    acc = np.zeros(perms.shape[0])
    for i in range(g.shape[1]):
        acc += g[:, i]
    return acc / perms.shape[1]

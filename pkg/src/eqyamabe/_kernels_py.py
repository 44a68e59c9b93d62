"""Pure numpy versions of the stencil kernels in ``_kernels.pyx``.

The operator is stored compactly: ``diag`` and the row weight ``w`` as
float arrays and ``arms`` as a uint8 bit mask (bits 0..5 for the -x, +x,
-y, +y, -z, +z neighbours).  A set bit couples the node to that neighbour
with weight ``-w``.  Index -1 along any axis mirrors onto index 1.
"""
import numpy as np


def matvec_dot(diag, w, arms, x, out):
    """``out = A x``; returns ``x . out``."""
    xp = np.pad(x, 1, mode="reflect")
    nb = (
        xp[:-2, 1:-1, 1:-1],
        xp[2:, 1:-1, 1:-1],
        xp[1:-1, :-2, 1:-1],
        xp[1:-1, 2:, 1:-1],
        xp[1:-1, 1:-1, :-2],
        xp[1:-1, 1:-1, 2:],
    )
    acc = np.zeros_like(x)
    for bit, v in enumerate(nb):
        acc += np.where(arms & (1 << bit), v, 0.0)
    np.multiply(diag, x, out=out)
    out -= w * acc
    return float(np.vdot(x, out))


def cg_update(x, r, p, q, dinv, z, alpha):
    """``x += alpha p; r -= alpha q; z = dinv r``; returns ``(r.z, r.r)``."""
    x += alpha * p
    r -= alpha * q
    np.multiply(dinv, r, out=z)
    return float(np.vdot(r, z)), float(np.vdot(r, r))


def xpby(z, p, beta):
    """``p = z + beta p``."""
    p *= beta
    p += z

"""Pure-Python reference versions of the compiled kernels.

Same algorithms, same return values, same iteration order as ``_kernels.pyx``.
Selected automatically when the extension is not built.
"""
import math

import numpy as np


def _small_angle(y, x):
    # half of the angle that rotates (x, y) onto the x axis, keeping the sign of x
    phi = math.atan2(y, x)
    if phi > math.pi / 2:
        phi -= math.pi
    elif phi < -math.pi / 2:
        phi += math.pi
    return 0.5 * phi


def _rot4(c, s, kind):
    # cos(t) I + sin(t) G for one of the six so(4) generators
    q = np.eye(4) * c
    i0, j0, i1, j1, sg = kind
    q[i0, j0] += s
    q[j0, i0] -= s
    q[i1, j1] += sg * s
    q[j1, i1] -= sg * s
    return q


# (plane 1, plane 2, relative sign)
_L1 = (0, 2, 1, 3, -1.0)
_L2 = (0, 3, 1, 2, 1.0)
_R1 = (0, 2, 1, 3, 1.0)
_R2 = (0, 3, 1, 2, -1.0)


def canon4(m):
    """Orthogonal 4x4 Q (det +1) with Q m Q^T = x J (+) y J."""
    a1 = 0.5 * (m[0, 1] + m[2, 3])
    a2 = 0.5 * (m[0, 2] - m[1, 3])
    a3 = 0.5 * (m[0, 3] + m[1, 2])
    b1 = 0.5 * (m[0, 1] - m[2, 3])
    b2 = 0.5 * (m[0, 2] + m[1, 3])
    b3 = 0.5 * (m[0, 3] - m[1, 2])
    q = np.eye(4)
    # self-dual part: kill a2, then a3
    t = _small_angle(a2, a1)
    if t != 0.0:
        q = _rot4(math.cos(t), math.sin(t), _L2) @ q
        a1 = math.hypot(a1, a2) * (1.0 if a1 >= 0 else -1.0)
    t = _small_angle(-a3, a1)
    if t != 0.0:
        q = _rot4(math.cos(t), math.sin(t), _L1) @ q
    # anti-self-dual part: kill b2, then b3
    t = _small_angle(-b2, b1)
    if t != 0.0:
        q = _rot4(math.cos(t), math.sin(t), _R2) @ q
        b1 = math.hypot(b1, b2) * (1.0 if b1 >= 0 else -1.0)
    t = _small_angle(b3, b1)
    if t != 0.0:
        q = _rot4(math.cos(t), math.sin(t), _R1) @ q
    return q


def offblock_norm(a):
    n = a.shape[0] // 2
    s = 0.0
    for p in range(n):
        for r in range(p + 1, n):
            blk = a[2 * p:2 * p + 2, 2 * r:2 * r + 2]
            s += float(np.sum(blk * blk))
    return math.sqrt(2.0 * s)


def skew_jacobi(a, tol=1e-12, max_sweeps=100):
    """Cyclic block Jacobi for a real antisymmetric matrix.

    Returns (x, V, sweeps, residual) with V orthogonal, det V = +1 and
    V a V^T = (+)_r x_r J up to the residual. x_r carries a sign.
    """
    a = np.array(a, dtype=float, copy=True)
    dim = a.shape[0]
    n = dim // 2
    v = np.eye(dim)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    sweeps = 0
    res = offblock_norm(a)
    while res > tol * scale and sweeps < max_sweeps:
        for p in range(n):
            for r in range(p + 1, n):
                idx = [2 * p, 2 * p + 1, 2 * r, 2 * r + 1]
                sub = a[np.ix_(idx, idx)]
                q = canon4(sub)
                a[idx, :] = q @ a[idx, :]
                a[:, idx] = a[:, idx] @ q.T
                v[idx, :] = q @ v[idx, :]
        # restore exact antisymmetry lost to rounding
        a = 0.5 * (a - a.T)
        sweeps += 1
        res = offblock_norm(a)
    x = np.array([a[2 * r, 2 * r + 1] for r in range(n)])
    return x, v, sweeps, res

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_kernels_py`` step for step."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, hypot, fabs, M_PI

cnp.import_array()


cdef inline double _small_angle(double y, double x) nogil:
    cdef double phi = atan2(y, x)
    if phi > M_PI / 2:
        phi -= M_PI
    elif phi < -M_PI / 2:
        phi += M_PI
    return 0.5 * phi


cdef inline void _left_mul(double[:, ::1] q, double t, int i0, int j0, int i1, int j1, double sg) nogil:
    # q <- (cos t I + sin t G) q, G = E(i0,j0) + sg E(i1,j1)
    cdef double c = cos(t), s = sin(t)
    cdef int k
    cdef double r0, r1, r2, r3
    for k in range(4):
        r0 = q[i0, k]
        r1 = q[j0, k]
        r2 = q[i1, k]
        r3 = q[j1, k]
        q[i0, k] = c * r0 + s * r1
        q[j0, k] = c * r1 - s * r0
        q[i1, k] = c * r2 + sg * s * r3
        q[j1, k] = c * r3 - sg * s * r2


cdef void _canon4(double[:, ::1] m, double[:, ::1] q) nogil:
    cdef double a1 = 0.5 * (m[0, 1] + m[2, 3])
    cdef double a2 = 0.5 * (m[0, 2] - m[1, 3])
    cdef double a3 = 0.5 * (m[0, 3] + m[1, 2])
    cdef double b1 = 0.5 * (m[0, 1] - m[2, 3])
    cdef double b2 = 0.5 * (m[0, 2] + m[1, 3])
    cdef double b3 = 0.5 * (m[0, 3] - m[1, 2])
    cdef double t
    cdef int i, j
    for i in range(4):
        for j in range(4):
            q[i, j] = 1.0 if i == j else 0.0
    t = _small_angle(a2, a1)
    if t != 0.0:
        _left_mul(q, t, 0, 3, 1, 2, 1.0)
        a1 = hypot(a1, a2) * (1.0 if a1 >= 0 else -1.0)
    t = _small_angle(-a3, a1)
    if t != 0.0:
        _left_mul(q, t, 0, 2, 1, 3, -1.0)
    t = _small_angle(-b2, b1)
    if t != 0.0:
        _left_mul(q, t, 0, 3, 1, 2, -1.0)
        b1 = hypot(b1, b2) * (1.0 if b1 >= 0 else -1.0)
    t = _small_angle(b3, b1)
    if t != 0.0:
        _left_mul(q, t, 0, 2, 1, 3, 1.0)


cdef double _offblock(double[:, ::1] a, int n) nogil:
    cdef double s = 0.0
    cdef int p, r, i, j
    for p in range(n):
        for r in range(p + 1, n):
            for i in range(2):
                for j in range(2):
                    s += a[2 * p + i, 2 * r + j] * a[2 * p + i, 2 * r + j]
    return sqrt(2.0 * s)


cdef void _rotate(double[:, ::1] a, double[:, ::1] v, double[:, ::1] q, int *idx, int dim, double[:, ::1] tmp) nogil:
    cdef int i, j, k
    cdef double acc
    # rows of a and v
    for k in range(dim):
        for i in range(4):
            acc = 0.0
            for j in range(4):
                acc += q[i, j] * a[idx[j], k]
            tmp[i, k] = acc
        for i in range(4):
            a[idx[i], k] = tmp[i, k]
        for i in range(4):
            acc = 0.0
            for j in range(4):
                acc += q[i, j] * v[idx[j], k]
            tmp[i, k] = acc
        for i in range(4):
            v[idx[i], k] = tmp[i, k]
    # columns of a
    for k in range(dim):
        for i in range(4):
            acc = 0.0
            for j in range(4):
                acc += a[k, idx[j]] * q[i, j]
            tmp[i, k] = acc
        for i in range(4):
            a[k, idx[i]] = tmp[i, k]


def skew_jacobi(a_in, double tol=1e-12, int max_sweeps=100):
    """Cyclic block Jacobi for a real antisymmetric matrix.

    Returns (x, V, sweeps, residual) with V a V^T = (+)_r x_r J.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef int dim = a_arr.shape[0]
    cdef int n = dim // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(dim)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] q = np.empty((4, 4))
    cdef double[:, ::1] sub = np.empty((4, 4))
    cdef double[:, ::1] tmp = np.empty((4, max(dim, 1)))
    cdef int idx[4]
    cdef int p, r, i, j, sweeps = 0
    cdef double scale = 1.0, res, h
    for i in range(dim):
        for j in range(dim):
            if fabs(a[i, j]) > scale:
                scale = fabs(a[i, j])
    res = _offblock(a, n)
    with nogil:
        while res > tol * scale and sweeps < max_sweeps:
            for p in range(n):
                for r in range(p + 1, n):
                    idx[0] = 2 * p
                    idx[1] = 2 * p + 1
                    idx[2] = 2 * r
                    idx[3] = 2 * r + 1
                    for i in range(4):
                        for j in range(4):
                            sub[i, j] = a[idx[i], idx[j]]
                    _canon4(sub, q)
                    _rotate(a, v, q, idx, dim, tmp)
            for i in range(dim):
                for j in range(i, dim):
                    h = 0.5 * (a[i, j] - a[j, i])
                    a[i, j] = h
                    a[j, i] = -h
            sweeps += 1
            res = _offblock(a, n)
    x = np.array([a_arr[2 * r, 2 * r + 1] for r in range(n)])
    return x, v_arr, sweeps, res

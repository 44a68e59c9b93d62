# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels for the grid conjugate-gradient solver.

Same contracts as ``_kernels_py``: diagonal, row weight and a bit mask of
coupled neighbours; index -1 mirrors onto index 1.  Arrays are C-contiguous
cubes and are walked as flat buffers.
"""


def matvec_dot(diag, w, arms, x, out):
    n0, n1, n2 = x.shape
    return _matvec(diag.reshape(-1), w.reshape(-1), arms.reshape(-1), x.reshape(-1), out.reshape(-1), n0, n1, n2)


cdef double _matvec(const double[::1] diag, const double[::1] w, const unsigned char[::1] arms,
                    const double[::1] x, double[::1] out, Py_ssize_t n0, Py_ssize_t n1, Py_ssize_t n2):
    cdef Py_ssize_t i, j, k, idx
    cdef Py_ssize_t sj = n2, si = n1 * n2
    cdef unsigned char a
    cdef double v, s, acc = 0.0
    with nogil:
        for i in range(n0):
            for j in range(n1):
                idx = i * si + j * sj
                for k in range(n2):
                    if diag[idx] == 0.0:
                        out[idx] = 0.0
                        idx += 1
                        continue
                    a = arms[idx]
                    s = 0.0
                    if a & 1:
                        s += x[idx + si] if i == 0 else x[idx - si]
                    if a & 2:
                        s += x[idx + si]
                    if a & 4:
                        s += x[idx + sj] if j == 0 else x[idx - sj]
                    if a & 8:
                        s += x[idx + sj]
                    if a & 16:
                        s += x[idx + 1] if k == 0 else x[idx - 1]
                    if a & 32:
                        s += x[idx + 1]
                    v = diag[idx] * x[idx] - w[idx] * s
                    out[idx] = v
                    acc += v * x[idx]
                    idx += 1
    return acc


def cg_update(x, r, p, q, dinv, z, double alpha):
    return _update(x.reshape(-1), r.reshape(-1), p.reshape(-1), q.reshape(-1), dinv.reshape(-1), z.reshape(-1), alpha)


cdef tuple _update(double[::1] x, double[::1] r, const double[::1] p, const double[::1] q,
                   const double[::1] dinv, double[::1] z, double alpha):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double rv, zv, rz = 0.0, rr = 0.0
    with nogil:
        for i in range(n):
            x[i] += alpha * p[i]
            rv = r[i] - alpha * q[i]
            r[i] = rv
            zv = dinv[i] * rv
            z[i] = zv
            rz += rv * zv
            rr += rv * rv
    return rz, rr


def xpby(z, p, double beta):
    _xpby(z.reshape(-1), p.reshape(-1), beta)


cdef void _xpby(const double[::1] z, double[::1] p, double beta):
    cdef Py_ssize_t i, n = p.shape[0]
    with nogil:
        for i in range(n):
            p[i] = z[i] + beta * p[i]

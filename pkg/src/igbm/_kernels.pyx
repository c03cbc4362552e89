# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops of the simulator and of the density averages.

Both functions mirror :mod:`igbm._kernels_py` argument for argument; the
two must agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport erf, erfc, exp, fabs, sqrt, isfinite, M_PI

cnp.import_array()


def integrate_chunk(double[::1] u, double u0,
                    const long long[::1] indptr, const long long[::1] indices, const double[::1] data,
                    const double[::1] kappa, const double[::1] drift,
                    double sigma, double sigma0, double gamma, double dt,
                    const double[:, ::1] xi, const double[::1] xi0,
                    bint clamp_u0, long long stride, long long phase,
                    const double[:, ::1] patterns,
                    double[::1] out_index, double[::1] out_u0, double[:, ::1] out_overlap):
    """Advance ``u`` (in place) and ``u0`` through ``xi.shape[0]`` Euler steps.

    After local step ``k`` (1-based) a record is written when
    ``stride > 0`` and ``(phase + k) % stride == 0``. Returns
    ``(u0, n_records, bad)`` where ``bad`` is the first non-finite asset
    index or -1.
    """
    cdef Py_ssize_t N = u.shape[0]
    cdef Py_ssize_t n_steps = xi.shape[0]
    cdef Py_ssize_t p = patterns.shape[0]
    cdef Py_ssize_t i, k, mu
    cdef long long jj
    cdef double acc, sdt = sigma * sqrt(dt), s0dt = sqrt(2.0 * gamma * dt), field, tot
    cdef Py_ssize_t n_rec = 0
    cdef double[::1] g = np.empty(N)
    for k in range(n_steps):
        for i in range(N):
            g[i] = erf(u[i])
        field = sigma0 * u0
        for i in range(N):
            acc = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                acc = acc + data[jj] * g[indices[jj]]
            u[i] = u[i] + dt * (-kappa[i] * u[i] + acc + field + drift[i]) + sdt * xi[k, i]
        if not clamp_u0:
            u0 = u0 - dt * gamma * u0 + s0dt * xi0[k]
        for i in range(N):
            if not isfinite(u[i]):
                return u0, n_rec, i
        if stride > 0 and (phase + k + 1) % stride == 0:
            tot = 0.0
            for i in range(N):
                tot = tot + u[i]
            out_index[n_rec] = tot / N
            out_u0[n_rec] = u0
            for mu in range(p):
                tot = 0.0
                for i in range(N):
                    tot = tot + patterns[mu, i] * erf(u[i])
                out_overlap[n_rec, mu] = tot / N
            n_rec += 1
    return u0, n_rec, -1


def gaussian_mixture_pdf(const double[::1] x, const double[::1] means, const double[::1] variances,
                         const double[::1] weights):
    """``sum_k w_k N(x; mean_k, var_k)`` at every ``x``."""
    cdef Py_ssize_t n = x.shape[0], K = means.shape[0], a, k
    cdef double acc, d, e
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double[::1] norm = np.empty(K)
    cdef double[::1] half_inv = np.empty(K)
    for k in range(K):
        norm[k] = weights[k] / sqrt(2.0 * M_PI * variances[k])
        half_inv[k] = 0.5 / variances[k]
    for a in range(n):
        acc = 0.0
        for k in range(K):
            d = x[a] - means[k]
            e = d * d * half_inv[k]
            if e < 745.0:  # exp underflows to zero beyond
                acc = acc + norm[k] * exp(-e)
        o[a] = acc
    return out


cdef double SQRT2 = sqrt(2.0)


cdef inline double _normal_mass(double a, double b) nogil:
    """``Phi(a) - Phi(b)`` for ``a >= b`` without cancellation in either tail."""
    if b > 0.0:
        return 0.5 * (erfc(b / SQRT2) - erfc(a / SQRT2))
    return 0.5 * (erfc(-a / SQRT2) - erfc(-b / SQRT2))


def smeared_mixture_pdf(const double[::1] x, const double[::1] lo, const double[::1] hi,
                        const double[::1] variances, const double[::1] weights):
    """``sum_k w_k`` times the average of ``N(x; s, var_k)`` over ``s`` uniform on ``[lo_k, hi_k]``."""
    cdef Py_ssize_t n = x.shape[0], K = lo.shape[0], a, k
    cdef double acc, d, ta, tb
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double[::1] inv_sd = np.empty(K)
    cdef double[::1] scale = np.empty(K)
    cdef double[::1] mid = np.empty(K)
    cdef char[::1] thin = np.empty(K, dtype=np.int8)
    cdef double sd, width
    for k in range(K):
        sd = sqrt(variances[k])
        width = hi[k] - lo[k]
        inv_sd[k] = 1.0 / sd
        mid[k] = 0.5 * (lo[k] + hi[k])
        thin[k] = width < 1e-6 * sd
        scale[k] = weights[k] / (sd * sqrt(2.0 * M_PI)) if thin[k] else weights[k] / width
    for a in range(n):
        acc = 0.0
        for k in range(K):
            if thin[k]:
                d = (x[a] - mid[k]) * inv_sd[k]
                if d * d < 1490.0:
                    acc = acc + scale[k] * exp(-0.5 * d * d)
            else:
                ta = (x[a] - lo[k]) * inv_sd[k]
                tb = (x[a] - hi[k]) * inv_sd[k]
                if ta > -38.5 and tb < 38.5:  # both tails underflow beyond
                    acc = acc + scale[k] * _normal_mass(ta, tb)
        o[a] = acc
    return out

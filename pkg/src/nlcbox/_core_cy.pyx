# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: single-pass fused loops for the stencil-heavy core.

Signature contract mirrors _core_py; see that module for semantics.
"""

import numpy as np

cimport cython

NAME = "compiled"


cdef void _lap5(const double[:, :, :, ::1] q, double inv_dx2,
                double[:, :, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t i, j, k, c
    cdef double acc, center
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                for c in range(5):
                    center = q[i, j, k, c]
                    acc = 0.0
                    if i > 0:
                        acc += q[i - 1, j, k, c] - center
                    if i < nx - 1:
                        acc += q[i + 1, j, k, c] - center
                    if j > 0:
                        acc += q[i, j - 1, k, c] - center
                    if j < ny - 1:
                        acc += q[i, j + 1, k, c] - center
                    if k > 0:
                        acc += q[i, j, k - 1, c] - center
                    if k < nz - 1:
                        acc += q[i, j, k + 1, c] - center
                    out[i, j, k, c] = acc * inv_dx2


cdef void _lap1(const double[:, :, ::1] u, double inv_dx2,
                double[:, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc, center
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                center = u[i, j, k]
                acc = 0.0
                if i > 0:
                    acc += u[i - 1, j, k] - center
                if i < nx - 1:
                    acc += u[i + 1, j, k] - center
                if j > 0:
                    acc += u[i, j - 1, k] - center
                if j < ny - 1:
                    acc += u[i, j + 1, k] - center
                if k > 0:
                    acc += u[i, j, k - 1] - center
                if k < nz - 1:
                    acc += u[i, j, k + 1] - center
                out[i, j, k] = acc * inv_dx2


def laplacian(q, double dx, out):
    cdef double inv_dx2 = 1.0 / (dx * dx)
    if q.ndim == 4:
        _lap5(q, inv_dx2, out)
    else:
        _lap1(q, inv_dx2, out)


def helmholtz(const double[:, :, ::1] u, const double[:, :, ::1] coef,
              double inv_dt, double dx, double[:, :, ::1] out):
    cdef double inv_dx2 = 1.0 / (dx * dx)
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc, center
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    center = u[i, j, k]
                    acc = 0.0
                    if i > 0:
                        acc += u[i - 1, j, k] - center
                    if i < nx - 1:
                        acc += u[i + 1, j, k] - center
                    if j > 0:
                        acc += u[i, j - 1, k] - center
                    if j < ny - 1:
                        acc += u[i, j + 1, k] - center
                    if k > 0:
                        acc += u[i, j, k - 1] - center
                    if k < nz - 1:
                        acc += u[i, j, k + 1] - center
                    out[i, j, k] = (inv_dt + coef[i, j, k]) * center - acc * inv_dx2


def trq2_field(const double[:, :, :, ::1] q, double[:, :, ::1] out):
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double q1, q2
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    q1 = q[i, j, k, 0]
                    q2 = q[i, j, k, 1]
                    out[i, j, k] = 2.0 * (
                        q1 * q1 + q2 * q2 + q1 * q2
                        + q[i, j, k, 2] * q[i, j, k, 2]
                        + q[i, j, k, 3] * q[i, j, k, 3]
                        + q[i, j, k, 4] * q[i, j, k, 4]
                    )


def metric_dot(const double[:, :, :, ::1] qa, const double[:, :, :, ::1] qb):
    cdef Py_ssize_t nx = qa.shape[0], ny = qa.shape[1], nz = qa.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0
    cdef double a1, a2, b1, b2
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    a1 = qa[i, j, k, 0]
                    a2 = qa[i, j, k, 1]
                    b1 = qb[i, j, k, 0]
                    b2 = qb[i, j, k, 1]
                    acc += 2.0 * (
                        a1 * b1 + a2 * b2
                        + qa[i, j, k, 2] * qb[i, j, k, 2]
                        + qa[i, j, k, 3] * qb[i, j, k, 3]
                        + qa[i, j, k, 4] * qb[i, j, k, 4]
                    ) + a1 * b2 + a2 * b1
    return acc


cdef inline double _bond(const double[:, :, :, ::1] q,
                         Py_ssize_t i0, Py_ssize_t j0, Py_ssize_t k0,
                         Py_ssize_t i1, Py_ssize_t j1, Py_ssize_t k1) noexcept nogil:
    cdef double d1 = q[i1, j1, k1, 0] - q[i0, j0, k0, 0]
    cdef double d2 = q[i1, j1, k1, 1] - q[i0, j0, k0, 1]
    cdef double d3 = q[i1, j1, k1, 2] - q[i0, j0, k0, 2]
    cdef double d4 = q[i1, j1, k1, 3] - q[i0, j0, k0, 3]
    cdef double d5 = q[i1, j1, k1, 4] - q[i0, j0, k0, 4]
    return 2.0 * (d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4 + d5 * d5) + 2.0 * d1 * d2


def elastic_energy(const double[:, :, :, ::1] q, double dx):
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    if i < nx - 1:
                        acc += _bond(q, i, j, k, i + 1, j, k)
                    if j < ny - 1:
                        acc += _bond(q, i, j, k, i, j + 1, k)
                    if k < nz - 1:
                        acc += _bond(q, i, j, k, i, j, k + 1)
    return 0.5 * dx * acc


def bulk_energy(const double[:, :, :, ::1] q, double lam2, double c_a,
                double c_b, double c_shift, double dx):
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0
    cdef double q1, q2, q3, q4, q5, q6, t2, t3
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    q1 = q[i, j, k, 0]
                    q2 = q[i, j, k, 1]
                    q3 = q[i, j, k, 2]
                    q4 = q[i, j, k, 3]
                    q5 = q[i, j, k, 4]
                    q6 = -q1 - q2
                    t2 = 2.0 * (q1 * q1 + q2 * q2 + q1 * q2
                                + q3 * q3 + q4 * q4 + q5 * q5)
                    t3 = 3.0 * (q1 * (q2 * q6 - q5 * q5)
                                - q3 * (q3 * q6 - q5 * q4)
                                + q4 * (q3 * q5 - q2 * q4))
                    acc += c_a * t2 - c_b * t3 + 0.125 * t2 * t2 - c_shift
    return lam2 * dx * dx * dx * acc


def bulk_gradient(const double[:, :, :, ::1] q, double lam2, double a_half,
                  double b_half, double[:, :, :, ::1] out):
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double q1, q2, q3, q4, q5, q6, t2, c_lin, third
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    q1 = q[i, j, k, 0]
                    q2 = q[i, j, k, 1]
                    q3 = q[i, j, k, 2]
                    q4 = q[i, j, k, 3]
                    q5 = q[i, j, k, 4]
                    q6 = -q1 - q2
                    t2 = 2.0 * (q1 * q1 + q2 * q2 + q1 * q2
                                + q3 * q3 + q4 * q4 + q5 * q5)
                    c_lin = a_half + 0.5 * t2
                    third = t2 / 3.0
                    out[i, j, k, 0] = lam2 * (c_lin * q1
                        - b_half * (q1 * q1 + q3 * q3 + q4 * q4 - third))
                    out[i, j, k, 1] = lam2 * (c_lin * q2
                        - b_half * (q3 * q3 + q2 * q2 + q5 * q5 - third))
                    out[i, j, k, 2] = lam2 * (c_lin * q3
                        - b_half * (q1 * q3 + q3 * q2 + q4 * q5))
                    out[i, j, k, 3] = lam2 * (c_lin * q4
                        - b_half * (q1 * q4 + q3 * q5 + q4 * q6))
                    out[i, j, k, 4] = lam2 * (c_lin * q5
                        - b_half * (q3 * q4 + q2 * q5 + q5 * q6))

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the sequential hot loops.

Kept operation-for-operation in step with the reference backend (the scipy
direct-form-II transposed filter and the plain-Python Bloch integrator) so
both produce the same trajectories; the build disables FP contraction for
that reason.
"""

import numpy as np

cimport cython


def ar1_real(x, double a, double y0):
    """y[n] = a*y[n-1] + x[n] with y[-1] = y0, over a float64 array."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] yv = out
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double z1 = a * y0
    cdef double yn
    for i in range(n):
        yn = 1.0 * xv[i] + z1
        z1 = a * yn
        yv[i] = yn
    return out


def ar1_complex(x, double a, double complex y0):
    """Same single-pole recursion for complex128 data (real coefficient)."""
    cdef double complex[::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    out = np.empty(xv.shape[0], dtype=np.complex128)
    cdef double complex[::1] yv = out
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double complex z1 = a * y0
    cdef double complex yn
    for i in range(n):
        yn = 1.0 * xv[i] + z1
        z1 = a * yn
        yv[i] = yn
    return out


def onepole_cascade_real(x, double a, int order):
    """``order`` identical one-pole low-pass stages, zero initial state."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef int stage
    cdef double b0 = 1.0 - a
    cdef double z1, yn
    out = np.array(xv, dtype=np.float64, copy=True)
    cdef double[::1] yv = out
    for stage in range(order):
        z1 = 0.0
        for i in range(n):
            yn = b0 * yv[i] + z1
            z1 = a * yn
            yv[i] = yn
    return out


def onepole_cascade_complex(x, double a, int order):
    cdef double complex[::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef int stage
    cdef double b0 = 1.0 - a
    cdef double complex z1, yn
    out = np.array(xv, dtype=np.complex128, copy=True)
    cdef double complex[::1] yv = out
    for stage in range(order):
        z1 = 0.0
        for i in range(n):
            yn = b0 * yv[i] + z1
            z1 = a * yn
            yv[i] = yn
    return out


cdef inline void _deriv(double qx, double qy, double qz,
                        double wx, double wy, double wz, double gp,
                        double inv_t1, double inv_t2, double p_eq,
                        double* dx, double* dy, double* dz) noexcept nogil:
    dx[0] = (qy * wz - qz * wy) + gp * (1.0 - qx) - qx * inv_t2
    dy[0] = (qz * wx - qx * wz) - gp * qy - qy * inv_t2
    dz[0] = (qx * wy - qy * wx) - gp * qz - (qz - p_eq) * inv_t1


def bloch_rk4(b_half, pump_half, double dt, double gamma_rad,
              double t1, double t2, double p_eq, p_init):
    """Fixed-step RK4 integration of the Bloch equations with relaxation.

    Same contract as the reference backend: field (T) and pumping rate (1/s)
    sampled on the half-step grid of length 2n+1, returns (n+1, 3).
    """
    cdef double[:, ::1] bv = np.ascontiguousarray(b_half, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(pump_half, dtype=np.float64)
    if bv.shape[1] != 3:
        raise ValueError("field array must have shape (2n+1, 3)")
    if bv.shape[0] != gv.shape[0] or bv.shape[0] % 2 != 1:
        raise ValueError("field and pump arrays must share an odd length 2n+1")
    cdef Py_ssize_t n_steps = (bv.shape[0] - 1) // 2
    out = np.empty((n_steps + 1, 3), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double px = p_init[0], py = p_init[1], pz = p_init[2]
    cdef double inv_t1 = 1.0 / t1
    cdef double inv_t2 = 1.0 / t2
    cdef double half_dt = 0.5 * dt
    cdef double sixth_dt = dt / 6.0
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    cdef double wx, wy, wz, gp
    cdef Py_ssize_t i, j0
    ov[0, 0] = px
    ov[0, 1] = py
    ov[0, 2] = pz
    with nogil:
        for i in range(n_steps):
            j0 = 2 * i
            wx = gamma_rad * bv[j0, 0]
            wy = gamma_rad * bv[j0, 1]
            wz = gamma_rad * bv[j0, 2]
            gp = gv[j0]
            _deriv(px, py, pz, wx, wy, wz, gp, inv_t1, inv_t2, p_eq,
                   &k1x, &k1y, &k1z)
            wx = gamma_rad * bv[j0 + 1, 0]
            wy = gamma_rad * bv[j0 + 1, 1]
            wz = gamma_rad * bv[j0 + 1, 2]
            gp = gv[j0 + 1]
            _deriv(px + half_dt * k1x, py + half_dt * k1y, pz + half_dt * k1z,
                   wx, wy, wz, gp, inv_t1, inv_t2, p_eq, &k2x, &k2y, &k2z)
            _deriv(px + half_dt * k2x, py + half_dt * k2y, pz + half_dt * k2z,
                   wx, wy, wz, gp, inv_t1, inv_t2, p_eq, &k3x, &k3y, &k3z)
            wx = gamma_rad * bv[j0 + 2, 0]
            wy = gamma_rad * bv[j0 + 2, 1]
            wz = gamma_rad * bv[j0 + 2, 2]
            gp = gv[j0 + 2]
            _deriv(px + dt * k3x, py + dt * k3y, pz + dt * k3z,
                   wx, wy, wz, gp, inv_t1, inv_t2, p_eq, &k4x, &k4y, &k4z)
            px = px + sixth_dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            py = py + sixth_dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            pz = pz + sixth_dt * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            ov[i + 1, 0] = px
            ov[i + 1, 1] = py
            ov[i + 1, 2] = pz
    return out

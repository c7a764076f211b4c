"""Reference implementations of the sequential hot loops.

These are the fallback backend when the compiled extension is unavailable.
The AR(1) recursions and one-pole cascades delegate to scipy's direct-form-II
transposed filter, whose per-sample arithmetic (multiply, then add) matches
the compiled loops operation for operation; the Bloch integrator is a plain
Python loop written with the same expression order as the compiled one.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter


def ar1_real(x, a, y0):
    """y[n] = a*y[n-1] + x[n] with y[-1] = y0, over a float64 array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y, _ = lfilter([1.0], [1.0, -a], x, zi=np.array([a * y0]))
    return y


def ar1_complex(x, a, y0):
    """Same single-pole recursion for complex128 data (real coefficient)."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    y, _ = lfilter([1.0], [1.0, -a], x, zi=np.array([a * y0], dtype=np.complex128))
    return y


def onepole_cascade_real(x, a, order):
    """``order`` identical one-pole low-pass stages, zero initial state.

    Each stage computes y[n] = (1-a)*x[n] + a*y[n-1].
    """
    y = np.ascontiguousarray(x, dtype=np.float64)
    for _ in range(order):
        y = lfilter([1.0 - a], [1.0, -a], y)
    return y


def onepole_cascade_complex(x, a, order):
    y = np.ascontiguousarray(x, dtype=np.complex128)
    for _ in range(order):
        y = lfilter([1.0 - a], [1.0, -a], y)
    return y


def bloch_rk4(b_half, pump_half, dt, gamma_rad, t1, t2, p_eq, p_init):
    """Fixed-step RK4 integration of the Bloch equations with relaxation.

    dP/dt = gamma_rad (P x B) + pump(t) (x_hat - P) - [Px/T2, Py/T2, (Pz - p_eq)/T1]

    ``b_half``  : (2n+1, 3) magnetic field (T) sampled on the half-step grid
    ``pump_half``: (2n+1,) optical pumping rate (1/s) on the same grid
    Returns a (n+1, 3) polarization history including the initial state.
    """
    b_half = np.ascontiguousarray(b_half, dtype=np.float64)
    pump_half = np.ascontiguousarray(pump_half, dtype=np.float64)
    if b_half.ndim != 2 or b_half.shape[1] != 3:
        raise ValueError("field array must have shape (2n+1, 3)")
    if b_half.shape[0] != pump_half.shape[0] or b_half.shape[0] % 2 != 1:
        raise ValueError("field and pump arrays must share an odd length 2n+1")
    n_steps = (b_half.shape[0] - 1) // 2
    out = np.empty((n_steps + 1, 3), dtype=np.float64)
    px, py, pz = float(p_init[0]), float(p_init[1]), float(p_init[2])
    out[0, 0] = px
    out[0, 1] = py
    out[0, 2] = pz
    inv_t1 = 1.0 / t1
    inv_t2 = 1.0 / t2

    def deriv(qx, qy, qz, j):
        wx = gamma_rad * b_half[j, 0]
        wy = gamma_rad * b_half[j, 1]
        wz = gamma_rad * b_half[j, 2]
        gp = pump_half[j]
        dx = (qy * wz - qz * wy) + gp * (1.0 - qx) - qx * inv_t2
        dy = (qz * wx - qx * wz) - gp * qy - qy * inv_t2
        dz = (qx * wy - qy * wx) - gp * qz - (qz - p_eq) * inv_t1
        return dx, dy, dz

    half_dt = 0.5 * dt
    sixth_dt = dt / 6.0
    for i in range(n_steps):
        j0 = 2 * i
        k1x, k1y, k1z = deriv(px, py, pz, j0)
        k2x, k2y, k2z = deriv(px + half_dt * k1x, py + half_dt * k1y, pz + half_dt * k1z, j0 + 1)
        k3x, k3y, k3z = deriv(px + half_dt * k2x, py + half_dt * k2y, pz + half_dt * k2z, j0 + 1)
        k4x, k4y, k4z = deriv(px + dt * k3x, py + dt * k3y, pz + dt * k3z, j0 + 2)
        px = px + sixth_dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        py = py + sixth_dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        pz = pz + sixth_dt * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        out[i + 1, 0] = px
        out[i + 1, 1] = py
        out[i + 1, 2] = pz
    return out

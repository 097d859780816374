"""Compiled pointwise kernels for the local sub-step."""

import numpy as np
from numba import njit


@njit(cache=True)
def _rk4_sweep(yr, yi, v, pr, pi, alpha, inv_hbar, half_gamma, f0r, f0i, f1r, f1i, f2r, f2i, h):
    # one RK4 step of dy/dt = (-i (alpha|y|^2 + v) / hbar - gamma/2) y + p f(t) for every node;
    # the loop body has no cross-iteration dependence so it vectorizes
    for i in range(yr.size):
        ar = yr[i]
        ai = yi[i]
        vv = v[i]
        ppr = pr[i]
        ppi = pi[i]
        w = (alpha * (ar * ar + ai * ai) + vv) * inv_hbar
        k1r = w * ai - half_gamma * ar + ppr * f0r - ppi * f0i
        k1i = -w * ar - half_gamma * ai + ppr * f0i + ppi * f0r
        br = ar + 0.5 * h * k1r
        bi = ai + 0.5 * h * k1i
        w = (alpha * (br * br + bi * bi) + vv) * inv_hbar
        k2r = w * bi - half_gamma * br + ppr * f1r - ppi * f1i
        k2i = -w * br - half_gamma * bi + ppr * f1i + ppi * f1r
        cr = ar + 0.5 * h * k2r
        ci = ai + 0.5 * h * k2i
        w = (alpha * (cr * cr + ci * ci) + vv) * inv_hbar
        k3r = w * ci - half_gamma * cr + ppr * f1r - ppi * f1i
        k3i = -w * cr - half_gamma * ci + ppr * f1i + ppi * f1r
        dr = ar + h * k3r
        di = ai + h * k3i
        w = (alpha * (dr * dr + di * di) + vv) * inv_hbar
        k4r = w * di - half_gamma * dr + ppr * f2r - ppi * f2i
        k4i = -w * dr - half_gamma * di + ppr * f2i + ppi * f2r
        yr[i] = ar + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        yi[i] = ai + (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)


def pumped_rk4(psi, potential, pump, alpha, gamma, hbar, omega_i, t, dt, substeps):
    """Classical RK4 on i dpsi/dt = (alpha|psi|^2 + V) psi / hbar - i gamma/2 psi + i P / hbar, per node."""
    yr = np.ascontiguousarray(psi.real)
    yi = np.ascontiguousarray(psi.imag)
    pr = np.ascontiguousarray(pump.real)
    pi = np.ascontiguousarray(pump.imag)
    h = dt / substeps
    inv_hbar = 1.0 / hbar
    w = omega_i * inv_hbar
    for sub in range(substeps):
        s = t + sub * h
        f0 = np.exp(-1j * w * s) * inv_hbar
        f1 = np.exp(-1j * w * (s + 0.5 * h)) * inv_hbar
        f2 = np.exp(-1j * w * (s + h)) * inv_hbar
        _rk4_sweep(
            yr, yi, potential, pr, pi, alpha, inv_hbar, 0.5 * gamma,
            f0.real, f0.imag, f1.real, f1.imag, f2.real, f2.imag, h,
        )
    return yr + 1j * yi

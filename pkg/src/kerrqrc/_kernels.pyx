# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrators for the reservoir and the signal generators.

Every routine here has a numpy twin in ``_fallback.py`` with the same
signature; ``kerrqrc.backend`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, tanh, fabs, isfinite

cnp.import_array()


cdef void _rhs(const double complex[:, ::1] rho, double complex[:, ::1] out,
               const double[::1] sq, Py_ssize_t d, double kerr, double kappa,
               double drive, double deph, double pump) noexcept nogil:
    # elementwise form of -i[K N^2 + drive X, rho] + kappa D_a + dephasing + pumping
    cdef Py_ssize_t m, n
    cdef double complex r, comm, acc
    cdef double am
    # rho is Hermitian and the map preserves that: fill the upper triangle, mirror
    for m in range(d):
        am = m + 1.0 if m < d - 1 else 0.0
        for n in range(m, d):
            r = rho[m, n]
            comm = kerr * (m * m - n * n) * r
            if m > 0:
                comm = comm + drive * sq[m] * rho[m - 1, n]
            if m < d - 1:
                comm = comm + drive * sq[m + 1] * rho[m + 1, n]
            if n > 0:
                comm = comm - drive * sq[n] * rho[m, n - 1]
            if n < d - 1:
                comm = comm - drive * sq[n + 1] * rho[m, n + 1]
            acc = -1j * comm
            if kappa != 0.0:
                acc = acc - 0.5 * kappa * (m + n) * r
                if m < d - 1 and n < d - 1:
                    acc = acc + kappa * sq[m + 1] * sq[n + 1] * rho[m + 1, n + 1]
            if deph != 0.0 and m != n:
                acc = acc - deph * r
            if pump != 0.0:
                acc = acc - 0.5 * pump * (am + (n + 1.0 if n < d - 1 else 0.0)) * r
                if m > 0 and n > 0:
                    acc = acc + pump * sq[m] * sq[n] * rho[m - 1, n - 1]
            out[m, n] = acc
            if n != m:
                out[n, m] = acc.conjugate()


def lindblad_rhs(rho, double f_value, double kerr, double kappa, double drive_alpha,
                 double lambda_dephase=0.0, double lambda_pump=0.0):
    cdef double complex[:, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t d = r.shape[0]
    out = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double[::1] sq = np.sqrt(np.arange(d + 1, dtype=np.float64))
    with nogil:
        _rhs(r, o, sq, d, kerr, kappa, drive_alpha * f_value,
             lambda_dephase * lambda_dephase, lambda_pump * lambda_pump)
    return out


def propagate_lindblad(rho0, drive, double kerr, double kappa, double drive_alpha,
                       double dt_step, int substeps, observable,
                       double lambda_dephase=0.0, double lambda_pump=0.0,
                       bint keep_snapshots=False):
    """RK4 over a zero-order-hold drive; returns (readouts, traces, top3, snapshots, rho)."""
    cdef double complex[:, ::1] rho = np.array(rho0, dtype=np.complex128, order="C")
    cdef const double[::1] f = np.ascontiguousarray(drive, dtype=np.float64)
    cdef const double[:, ::1] obs = np.ascontiguousarray(observable, dtype=np.float64)
    cdef Py_ssize_t d = rho.shape[0]
    cdef Py_ssize_t nsteps = f.shape[0]
    cdef Py_ssize_t i, j, m, n, top
    cdef double h = dt_step / substeps
    cdef double deph = lambda_dephase * lambda_dephase
    cdef double pump = lambda_pump * lambda_pump
    cdef double drv, acc_s, acc_t, acc_p

    cdef double[::1] sq = np.sqrt(np.arange(d + 1, dtype=np.float64))
    cdef double complex[:, ::1] k1 = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((d, d), dtype=np.complex128)

    readouts_arr = np.empty(nsteps, dtype=np.float64)
    traces_arr = np.empty(nsteps, dtype=np.float64)
    top3_arr = np.empty(nsteps, dtype=np.float64)
    cdef double[::1] readouts = readouts_arr
    cdef double[::1] traces = traces_arr
    cdef double[::1] top3 = top3_arr
    snaps_arr = np.empty((nsteps if keep_snapshots else 0, d, d), dtype=np.complex128)
    cdef double complex[:, :, ::1] snaps = snaps_arr
    top = d - 3 if d > 3 else 0

    with nogil:
        for i in range(nsteps):
            drv = drive_alpha * f[i]
            for j in range(substeps):
                _rhs(rho, k1, sq, d, kerr, kappa, drv, deph, pump)
                for m in range(d):
                    for n in range(d):
                        tmp[m, n] = rho[m, n] + 0.5 * h * k1[m, n]
                _rhs(tmp, k2, sq, d, kerr, kappa, drv, deph, pump)
                for m in range(d):
                    for n in range(d):
                        tmp[m, n] = rho[m, n] + 0.5 * h * k2[m, n]
                _rhs(tmp, k3, sq, d, kerr, kappa, drv, deph, pump)
                for m in range(d):
                    for n in range(d):
                        tmp[m, n] = rho[m, n] + h * k3[m, n]
                _rhs(tmp, k4, sq, d, kerr, kappa, drv, deph, pump)
                for m in range(d):
                    for n in range(d):
                        rho[m, n] = rho[m, n] + (h / 6.0) * (
                            k1[m, n] + 2.0 * k2[m, n] + 2.0 * k3[m, n] + k4[m, n])
            acc_s = 0.0
            acc_t = 0.0
            acc_p = 0.0
            for m in range(d):
                for n in range(d):
                    acc_s = acc_s + rho[m, n].real * obs[n, m]
                acc_t = acc_t + rho[m, m].real
                if m >= top:
                    acc_p = acc_p + rho[m, m].real
            readouts[i] = acc_s
            traces[i] = acc_t
            top3[i] = acc_p
            if keep_snapshots:
                for m in range(d):
                    for n in range(d):
                        snaps[i, m, n] = rho[m, n]

    return (readouts_arr, traces_arr, top3_arr,
            snaps_arr if keep_snapshots else None, np.asarray(rho))


cdef inline double complex _classical_rhs(double complex a, double kerr, double kappa,
                                          double drv) noexcept nogil:
    cdef double mod2 = a.real * a.real + a.imag * a.imag
    return -1j * kerr * (1.0 + 2.0 * mod2) * a - 0.5 * kappa * a - 1j * drv


def propagate_classical(double complex a0, drive, double kerr, double kappa,
                        double drive_alpha, double dt_step, int substeps):
    """RK4 for the classical Kerr amplitude; returns (readouts, amplitudes)."""
    cdef const double[::1] f = np.ascontiguousarray(drive, dtype=np.float64)
    cdef Py_ssize_t nsteps = f.shape[0]
    cdef Py_ssize_t i, j
    cdef double h = dt_step / substeps
    cdef double drv
    cdef double complex a = a0, k1, k2, k3, k4
    out_arr = np.empty(nsteps, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    with nogil:
        for i in range(nsteps):
            drv = drive_alpha * f[i]
            for j in range(substeps):
                k1 = _classical_rhs(a, kerr, kappa, drv)
                k2 = _classical_rhs(a + 0.5 * h * k1, kerr, kappa, drv)
                k3 = _classical_rhs(a + 0.5 * h * k2, kerr, kappa, drv)
                k4 = _classical_rhs(a + h * k3, kerr, kappa, drv)
                a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[i] = a
    return np.tanh(out_arr.real), out_arr


cdef inline double _mg_rate(double x, double xd, double beta, double gamma,
                            double m) noexcept nogil:
    return beta * xd / (1.0 + xd ** m) - gamma * x


cdef inline double _delayed(double t, const double[::1] xs, const double[::1] dxs,
                            double h, double history) noexcept nogil:
    # cubic Hermite on the stored grid; constant history before t = 0
    cdef Py_ssize_t j
    cdef double s, s2, s3
    if t <= 0.0:
        return history
    j = <Py_ssize_t>(t / h)
    s = t / h - j
    if s == 0.0:
        return xs[j]
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * xs[j] + (s3 - 2 * s2 + s) * h * dxs[j]
            + (-2 * s3 + 3 * s2) * xs[j + 1] + (s3 - s2) * h * dxs[j + 1])


def integrate_mackey_glass(double beta, double gamma, double m, double tau,
                           double history, double h, Py_ssize_t nsteps):
    """Fixed-step RK4 for the delay equation; returns the grid values x[0..nsteps]."""
    xs_arr = np.empty(nsteps + 1, dtype=np.float64)
    dxs_arr = np.zeros(nsteps + 1, dtype=np.float64)
    cdef double[::1] xs = xs_arr
    cdef double[::1] dxs = dxs_arr
    cdef Py_ssize_t i
    cdef double t, x, k1, k2, k3, k4, d0, d1, d2
    xs[0] = history
    with nogil:
        for i in range(nsteps):
            t = i * h
            x = xs[i]
            d0 = _delayed(t - tau, xs, dxs, h, history)
            k1 = _mg_rate(x, d0, beta, gamma, m)
            dxs[i] = k1
            d1 = _delayed(t + 0.5 * h - tau, xs, dxs, h, history)
            d2 = _delayed(t + h - tau, xs, dxs, h, history)
            k2 = _mg_rate(x + 0.5 * h * k1, d1, beta, gamma, m)
            k3 = _mg_rate(x + 0.5 * h * k2, d1, beta, gamma, m)
            k4 = _mg_rate(x + h * k3, d2, beta, gamma, m)
            xs[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return xs_arr


def integrate_rossler(double a, double b, double c, initial, double h,
                      Py_ssize_t substeps, Py_ssize_t nsamples):
    """RK4 for the Rossler flow sampled every ``substeps`` steps.

    Returns (samples of shape (nsamples, 3), index of the first divergent sample or -1).
    """
    out_arr = np.zeros((nsamples, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double x = initial[0], y = initial[1], z = initial[2]
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    cdef double tx, ty, tz
    cdef Py_ssize_t i, j
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(nsamples):
            if i > 0:
                for j in range(substeps):
                    k1x = -y - z
                    k1y = x + a * y
                    k1z = b + z * (x - c)
                    tx = x + 0.5 * h * k1x
                    ty = y + 0.5 * h * k1y
                    tz = z + 0.5 * h * k1z
                    k2x = -ty - tz
                    k2y = tx + a * ty
                    k2z = b + tz * (tx - c)
                    tx = x + 0.5 * h * k2x
                    ty = y + 0.5 * h * k2y
                    tz = z + 0.5 * h * k2z
                    k3x = -ty - tz
                    k3y = tx + a * ty
                    k3z = b + tz * (tx - c)
                    tx = x + h * k3x
                    ty = y + h * k3y
                    tz = z + h * k3z
                    k4x = -ty - tz
                    k4y = tx + a * ty
                    k4z = b + tz * (tx - c)
                    x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                    y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                    z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            out[i, 0] = x
            out[i, 1] = y
            out[i, 2] = z
            if not (isfinite(x) and isfinite(y) and isfinite(z)) or \
                    fabs(x) > 1e6 or fabs(y) > 1e6 or fabs(z) > 1e6:
                bad = i
                break
    return out_arr, bad

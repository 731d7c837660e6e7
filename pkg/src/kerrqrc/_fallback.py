"""Pure numpy versions of the compiled integrators in ``_kernels.pyx``.

Same signatures and return conventions; used when the extension is not
built or when ``KERRQRC_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np


class _RhsCoefficients:
    """Index-dependent factors of the elementwise Lindblad right-hand side."""

    def __init__(self, d):
        idx = np.arange(d, dtype=np.float64)
        self.sq = np.sqrt(np.arange(d + 1, dtype=np.float64))
        self.kerr = (idx[:, None] ** 2 - idx[None, :] ** 2)
        self.loss = 0.5 * (idx[:, None] + idx[None, :])
        self.jump = np.sqrt(idx[1:, None] * idx[None, 1:])  # sqrt(m n), m, n >= 1
        aad = np.where(idx < d - 1, idx + 1.0, 0.0)
        self.gain = 0.5 * (aad[:, None] + aad[None, :])
        self.offdiag = 1.0 - np.eye(d)
        self.d = d


def _rhs(rho, c, kerr, kappa, drive, deph, pump):
    d = c.d
    sq = c.sq
    comm = kerr * c.kerr * rho
    if drive != 0.0:
        xr = np.zeros_like(rho)
        # X rho
        xr[1:, :] += sq[1:d, None] * rho[:-1, :]
        xr[:-1, :] += sq[1:d, None] * rho[1:, :]
        # - rho X
        xr[:, 1:] -= sq[None, 1:d] * rho[:, :-1]
        xr[:, :-1] -= sq[None, 1:d] * rho[:, 1:]
        comm = comm + drive * xr
    out = -1j * comm
    if kappa != 0.0:
        out -= kappa * c.loss * rho
        out[:-1, :-1] += kappa * c.jump * rho[1:, 1:]
    if deph != 0.0:
        out -= deph * c.offdiag * rho
    if pump != 0.0:
        out -= pump * c.gain * rho
        out[1:, 1:] += pump * c.jump * rho[:-1, :-1]
    return out


def lindblad_rhs(rho, f_value, kerr, kappa, drive_alpha, lambda_dephase=0.0, lambda_pump=0.0):
    rho = np.asarray(rho, dtype=np.complex128)
    c = _RhsCoefficients(rho.shape[0])
    return _rhs(rho, c, kerr, kappa, drive_alpha * f_value,
                lambda_dephase ** 2, lambda_pump ** 2)


def propagate_lindblad(rho0, drive, kerr, kappa, drive_alpha, dt_step, substeps, observable,
                       lambda_dephase=0.0, lambda_pump=0.0, keep_snapshots=False):
    rho = np.array(rho0, dtype=np.complex128)
    f = np.asarray(drive, dtype=np.float64)
    obs_t = np.ascontiguousarray(np.asarray(observable, dtype=np.float64).T)
    d = rho.shape[0]
    c = _RhsCoefficients(d)
    h = dt_step / substeps
    deph = lambda_dephase ** 2
    pump = lambda_pump ** 2
    n = f.shape[0]
    readouts = np.empty(n)
    traces = np.empty(n)
    top3 = np.empty(n)
    snaps = np.empty((n, d, d), dtype=np.complex128) if keep_snapshots else None
    top = max(d - 3, 0)
    for i in range(n):
        drv = drive_alpha * f[i]
        for _ in range(substeps):
            k1 = _rhs(rho, c, kerr, kappa, drv, deph, pump)
            k2 = _rhs(rho + 0.5 * h * k1, c, kerr, kappa, drv, deph, pump)
            k3 = _rhs(rho + 0.5 * h * k2, c, kerr, kappa, drv, deph, pump)
            k4 = _rhs(rho + h * k3, c, kerr, kappa, drv, deph, pump)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        diag = rho.real.diagonal()
        readouts[i] = np.sum(rho.real * obs_t)
        traces[i] = diag.sum()
        top3[i] = diag[top:].sum()
        if keep_snapshots:
            snaps[i] = rho
    return readouts, traces, top3, snaps, rho


def _classical_rhs(a, kerr, kappa, drv):
    return -1j * kerr * (1.0 + 2.0 * (a.real * a.real + a.imag * a.imag)) * a - 0.5 * kappa * a - 1j * drv


def propagate_classical(a0, drive, kerr, kappa, drive_alpha, dt_step, substeps):
    f = np.asarray(drive, dtype=np.float64)
    h = dt_step / substeps
    a = complex(a0)
    out = np.empty(f.shape[0], dtype=np.complex128)
    for i in range(f.shape[0]):
        drv = drive_alpha * f[i]
        for _ in range(substeps):
            k1 = _classical_rhs(a, kerr, kappa, drv)
            k2 = _classical_rhs(a + 0.5 * h * k1, kerr, kappa, drv)
            k3 = _classical_rhs(a + 0.5 * h * k2, kerr, kappa, drv)
            k4 = _classical_rhs(a + h * k3, kerr, kappa, drv)
            a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i] = a
    return np.tanh(out.real), out


def _delayed(t, xs, dxs, h, history):
    if t <= 0.0:
        return history
    j = int(t / h)
    s = t / h - j
    if s == 0.0:
        return xs[j]
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * xs[j] + (s3 - 2 * s2 + s) * h * dxs[j]
            + (-2 * s3 + 3 * s2) * xs[j + 1] + (s3 - s2) * h * dxs[j + 1])


def integrate_mackey_glass(beta, gamma, m, tau, history, h, nsteps):
    xs = [0.0] * (nsteps + 1)
    dxs = [0.0] * (nsteps + 1)
    xs[0] = float(history)

    def rate(x, xd):
        return beta * xd / (1.0 + xd ** m) - gamma * x

    for i in range(nsteps):
        t = i * h
        x = xs[i]
        k1 = rate(x, _delayed(t - tau, xs, dxs, h, history))
        dxs[i] = k1
        d1 = _delayed(t + 0.5 * h - tau, xs, dxs, h, history)
        d2 = _delayed(t + h - tau, xs, dxs, h, history)
        k2 = rate(x + 0.5 * h * k1, d1)
        k3 = rate(x + 0.5 * h * k2, d1)
        k4 = rate(x + h * k3, d2)
        xs[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(xs)


def integrate_rossler(a, b, c, initial, h, substeps, nsamples):
    out = np.zeros((nsamples, 3))
    x, y, z = (float(v) for v in initial)

    def flow(x, y, z):
        return -y - z, x + a * y, b + z * (x - c)

    for i in range(nsamples):
        if i > 0:
            for _ in range(substeps):
                k1 = flow(x, y, z)
                k2 = flow(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2])
                k3 = flow(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2])
                k4 = flow(x + h * k3[0], y + h * k3[1], z + h * k3[2])
                x = x + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                y = y + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                z = z + (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        out[i] = (x, y, z)
        if not all(math.isfinite(v) and abs(v) <= 1e6 for v in (x, y, z)):
            return out, i
    return out, -1

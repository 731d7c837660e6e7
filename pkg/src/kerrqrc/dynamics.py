"""Reservoir time evolution: driven Kerr oscillator with photon loss.

Quantum path: Lindblad equation for the truncated density matrix with
Hamiltonian ``K N^2 + drive_alpha f(t) X``, loss ``kappa D_a`` and optional
dephasing / incoherent pumping channels. Classical path: the mean-field
amplitude equation. Both hold each drive sample for one reservoir step of
length ``dt_step`` and integrate it with ``substeps`` RK4 steps.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import backend
from .fock import LEAKAGE_WARN, TruncationWarning, build_ladder
from .signals import DivergenceError, TimeSeries

TRACE_DRIFT_LIMIT = 1e-4


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReservoirParams:
    K: float = 0.05
    kappa: float = 0.1
    drive_alpha: float = 1.2
    dt_step: float = 0.1
    d_t: int = 25
    substeps: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.K) and np.isfinite(self.kappa) and np.isfinite(self.drive_alpha)):
            raise ValueError("reservoir parameters must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not self.dt_step > 0:
            raise ValueError("dt_step must be positive")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if int(self.d_t) != self.d_t or self.d_t < 2:
            raise ValueError("d_t must be an integer >= 2")


@dataclass(frozen=True)
class NoiseConfig:
    lambda_dephase: float = 0.0
    lambda_pump: float = 0.0
    lambda_input: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.lambda_dephase, self.lambda_pump, self.lambda_input) < 0:
            raise ValueError("noise strengths must be non-negative")

    @property
    def is_quiet(self) -> bool:
        return self.lambda_dephase == 0 and self.lambda_pump == 0 and self.lambda_input == 0


NOISELESS = NoiseConfig()


@dataclass
class QuantumTrajectory:
    readouts: np.ndarray
    traces: np.ndarray
    top3_population: np.ndarray
    trace_drift: float
    final_state: np.ndarray
    snapshots: np.ndarray | None = field(default=None, repr=False)


@lru_cache(maxsize=16)
def _tanh_x(d_t: int) -> np.ndarray:
    w, v = np.linalg.eigh(build_ladder(d_t).X.real)
    out = (v * np.tanh(w)) @ v.T
    # parity flips the sign of X, so tanh(X) only links levels of opposite parity
    n = np.arange(d_t)
    out[(n[:, None] + n[None, :]) % 2 == 0] = 0.0
    out = 0.5 * (out + out.T)
    out.setflags(write=False)
    return out


def tanh_position(d_t: int) -> np.ndarray:
    """tanh of the truncated position operator X = a + a^dag (real symmetric)."""
    return _tanh_x(int(d_t))


def _drive_samples(drive, lambda_input, rng_seed, noise_key):
    f = drive.samples if isinstance(drive, TimeSeries) else np.asarray(drive, dtype=np.float64)
    if lambda_input > 0:
        key = [int(rng_seed)] if noise_key is None else [int(rng_seed), int(noise_key)]
        f = f + lambda_input * np.random.default_rng(key).standard_normal(f.size)
    return f


def lindblad_rhs(rho: np.ndarray, f_value: float, params: ReservoirParams,
                 noise: NoiseConfig = NOISELESS) -> np.ndarray:
    """Time derivative of rho for a fixed drive value."""
    return backend.lindblad_rhs(rho, float(f_value), params.K, params.kappa, params.drive_alpha,
                                noise.lambda_dephase, noise.lambda_pump)


def propagate_quantum(rho0: np.ndarray, drive, params: ReservoirParams,
                      noise: NoiseConfig = NOISELESS, keep_snapshots: bool = False,
                      noise_key: int | None = None) -> QuantumTrajectory:
    """Feed ``drive`` into the reservoir one sample per step and record tr(rho tanh X).

    Input white noise (``noise.lambda_input``) is drawn once per step from a
    generator seeded with ``(noise.rng_seed, noise_key)``.
    """
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (params.d_t, params.d_t):
        raise ValueError(f"initial state has shape {rho0.shape}, expected d_t = {params.d_t}")
    f = _drive_samples(drive, noise.lambda_input, noise.rng_seed, noise_key)
    readouts, traces, top3, snaps, final = backend.propagate_lindblad(
        rho0, f, params.K, params.kappa, params.drive_alpha, params.dt_step, int(params.substeps),
        tanh_position(params.d_t), noise.lambda_dephase, noise.lambda_pump, keep_snapshots)
    tr0 = np.trace(rho0).real
    drift = float(np.max(np.abs(traces - tr0))) if traces.size else 0.0
    if not np.isfinite(drift) or drift > TRACE_DRIFT_LIMIT:
        raise IntegrationError(f"trace drift {drift:.3g} exceeds {TRACE_DRIFT_LIMIT:g}; "
                               "use more substeps or a larger d_t")
    if top3.size and top3.max() > LEAKAGE_WARN:
        warnings.warn(f"top-3 Fock population reached {top3.max():.2g} at d_t = {params.d_t}",
                      TruncationWarning, stacklevel=2)
    return QuantumTrajectory(readouts, traces, top3, drift, final, snaps)


def propagate_classical(a0: complex, drive, params: ReservoirParams, lambda_input: float = 0.0,
                        rng_seed: int = 0, noise_key: int | None = None,
                        return_amplitudes: bool = False):
    """Classical Kerr amplitude driven by ``drive``; readout tanh(Re a)."""
    f = _drive_samples(drive, lambda_input, rng_seed, noise_key)
    readouts, amps = backend.propagate_classical(complex(a0), f, params.K, params.kappa,
                                                 params.drive_alpha, params.dt_step,
                                                 int(params.substeps))
    bad = np.flatnonzero(~np.isfinite(amps) | (np.abs(amps) > 1e6))
    if bad.size:
        raise DivergenceError(f"classical amplitude diverged at step {bad[0]}")
    return (readouts, amps) if return_amplitudes else readouts


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    """tr(rho op)."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {op.shape}")
    return complex(np.einsum("ij,ji->", rho, op))


def write_trajectory_csv(path, traj: QuantumTrajectory, dt: float) -> None:
    """``step,t,s,trace,top3_population`` rows; step k ends at t = (k + 1) dt."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "s", "trace", "top3_population"])
        for k, (s, tr, top) in enumerate(zip(traj.readouts, traj.traces, traj.top3_population)):
            w.writerow([k, f"{(k + 1) * dt:.17g}", f"{s:.17g}", f"{tr:.17g}", f"{top:.17g}"])


def write_snapshots(directory, snapshots) -> list:
    """One ``i,j,re,im`` CSV per density matrix; returns the file names."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for k, rho in enumerate(snapshots):
        name = f"rho_step{k:05d}.csv"
        with open(os.path.join(directory, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "re", "im"])
            for (i, j), v in np.ndenumerate(rho):
                w.writerow([i, j, f"{v.real:.17g}", f"{v.imag:.17g}"])
        names.append(name)
    return names

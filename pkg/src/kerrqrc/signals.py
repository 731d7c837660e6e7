"""Drive and target series: Mackey-Glass, Rossler, periodic signals, input noise."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import backend


class InvalidConfigurationError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    dt_sample: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("time series samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("time series contains non-finite samples")
        if not self.dt_sample > 0:
            raise ValueError("dt_sample must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(self.samples.size)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.samples[start:stop], self.dt_sample, self.t0 + start * self.dt_sample)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.times, self.samples):
                w.writerow([f"{t:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(data[:, 1], dt, float(t[0]))


@dataclass(frozen=True)
class MGParams:
    beta: float = 0.2
    gamma: float = 0.1
    m: int = 10
    tau: float = 17.0

    def __post_init__(self):
        if self.beta < 0 or self.gamma <= 0 or self.m <= 0 or self.tau <= 0:
            raise InvalidConfigurationError(f"invalid Mackey-Glass parameters {self}")


@dataclass(frozen=True)
class RosslerParams:
    a: float = 0.2
    b: float = 0.2
    c: float = 5.7


def _substeps(spacing, h):
    if spacing <= 0:
        raise InvalidConfigurationError("sample_spacing must be positive")
    n = max(1, int(round(spacing / h)))
    return n, spacing / n


def mackey_glass(params: MGParams = MGParams(), history_value: float = 1.2,
                 burn_in: float = 1000.0, t_max: float = 1000.0,
                 sample_spacing: float = 1.0, step: float = 0.01) -> TimeSeries:
    """Integrate the Mackey-Glass delay equation and sample it after burn-in.

    Constant history ``x(t <= 0) = history_value``; fixed-step RK4 with cubic
    Hermite interpolation of the delayed state. The integrator step is
    adjusted down so that it divides ``sample_spacing`` exactly. Samples are
    taken at ``burn_in + k * sample_spacing`` for ``0 <= k * sample_spacing <= t_max``
    and the returned series starts at t0 = 0.
    """
    if burn_in < 0:
        raise InvalidConfigurationError("burn_in must be non-negative")
    sub, h = _substeps(sample_spacing, step)
    if h > params.tau:
        raise InvalidConfigurationError(f"integrator step {h} exceeds the delay {params.tau}")
    n_samples = int(np.floor(t_max / sample_spacing + 1e-9)) + 1
    burn_steps = int(round(burn_in / h))
    nsteps = burn_steps + (n_samples - 1) * sub
    xs = backend.integrate_mackey_glass(float(params.beta), float(params.gamma), float(params.m),
                                        float(params.tau), float(history_value), h, nsteps)
    samples = xs[burn_steps::sub][:n_samples]
    if not np.all(np.isfinite(samples)):
        raise DivergenceError("Mackey-Glass integration produced non-finite values")
    return TimeSeries(samples, sample_spacing, 0.0)


def rossler(params: RosslerParams = RosslerParams(), initial=(0.0, 1.0, 0.0),
            t_max: float = 500.0, sample_spacing: float = 0.25,
            step: float = 0.005) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Integrate the Rossler flow with fixed-step RK4; returns the x, y, z series."""
    sub, h = _substeps(sample_spacing, step)
    n_samples = int(np.floor(t_max / sample_spacing + 1e-9)) + 1
    out, bad = backend.integrate_rossler(float(params.a), float(params.b), float(params.c),
                                         np.asarray(initial, dtype=np.float64), h, sub, n_samples)
    if bad >= 0:
        raise DivergenceError(f"Rossler trajectory diverged at t = {bad * sample_spacing:g}")
    return tuple(TimeSeries(out[:, k], sample_spacing, 0.0) for k in range(3))


def periodic_signal(kind: str, period: float, amplitude: float = 1.0, t_max: float = 100.0,
                    sample_spacing: float = 1.0) -> TimeSeries:
    """Sine or sawtooth; the sawtooth ramps from -amplitude up to +amplitude each period."""
    if period <= 0:
        raise InvalidConfigurationError("period must be positive")
    if sample_spacing <= 0:
        raise InvalidConfigurationError("sample_spacing must be positive")
    n = int(np.floor(t_max / sample_spacing + 1e-9)) + 1
    phase = np.arange(n) * sample_spacing / period
    if kind == "sine":
        values = amplitude * np.sin(2 * np.pi * phase)
    elif kind == "sawtooth":
        frac = phase - np.floor(phase)
        values = amplitude * (2.0 * frac - 1.0)
    else:
        raise InvalidConfigurationError(f"unknown periodic signal kind {kind!r}")
    return TimeSeries(values, sample_spacing, 0.0)


def add_white_noise(series: TimeSeries, lambda_prime: float, rng_seed=None) -> TimeSeries:
    """Add ``lambda_prime`` times unit-variance Gaussian white noise."""
    if lambda_prime < 0:
        raise ValueError("noise strength must be non-negative")
    if lambda_prime == 0:
        return TimeSeries(series.samples.copy(), series.dt_sample, series.t0)
    noise = np.random.default_rng(rng_seed).standard_normal(len(series))
    return TimeSeries(series.samples + lambda_prime * noise, series.dt_sample, series.t0)

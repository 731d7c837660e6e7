"""Linear readout training and prediction on top of a reservoir runner."""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dynamics import NOISELESS, NoiseConfig, QuantumTrajectory, ReservoirParams, propagate_classical, propagate_quantum
from .fock import density_matrix
from .signals import DivergenceError, TimeSeries

# noise streams for closed-loop blocks are keyed past any training window index
PREDICTION_KEY_OFFSET = 1 << 32


class InsufficientDataError(ValueError):
    pass


class SingularSystemError(LinAlgError):
    pass


class MetricUndefinedError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    N: int = 200
    M: int = 100
    T: int = 248
    stride: int = 1

    def __post_init__(self):
        if min(self.N, self.M, self.T, self.stride) < 1:
            raise ValueError(f"window sizes must be positive: {self}")

    @property
    def required_length(self) -> int:
        return (self.T - 1) * self.stride + self.N + self.M


@dataclass
class DesignMatrices:
    S: np.ndarray  # N x T reservoir readouts
    G: np.ndarray  # M x T targets
    trace_drift: float = 0.0

    def __post_init__(self):
        if self.S.shape[1] != self.G.shape[1]:
            raise ValueError("S and G need the same number of columns")


@dataclass
class ReadoutMatrix:
    A: np.ndarray
    eta: float
    runner_hash: str = ""

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def M(self) -> int:
        return self.A.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# N={self.N},M={self.M},eta={self.eta!r},runner={self.runner_hash}\n")
            w = csv.writer(fh)
            for row in self.A:
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "ReadoutMatrix":
        with open(path) as fh:
            header = fh.readline().lstrip("#").strip()
        meta = dict(item.split("=", 1) for item in header.split(","))
        A = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if A.shape != (int(meta["M"]), int(meta["N"])):
            raise ValueError("readout matrix shape does not match its header")
        return cls(A, float(meta["eta"]), meta.get("runner", ""))


class QuantumRunner:
    """Resets the oscillator to ``initial_state`` and feeds it one window."""

    def __init__(self, params: ReservoirParams, initial_state, noise: NoiseConfig = NOISELESS):
        self.params = params
        self.noise = noise
        self.rho_init = density_matrix(initial_state)
        self.rho_init.setflags(write=False)
        if self.rho_init.shape != (params.d_t, params.d_t):
            raise ValueError("initial state dimension does not match d_t")

    def run(self, window, key: int = 0, keep_snapshots: bool = False) -> QuantumTrajectory:
        return propagate_quantum(self.rho_init, window, self.params, self.noise,
                                 keep_snapshots=keep_snapshots, noise_key=key)

    def __call__(self, window, key: int = 0) -> np.ndarray:
        return self.run(window, key).readouts

    def describe(self) -> dict:
        return {"kind": "quantum", "params": asdict(self.params), "noise": asdict(self.noise)}

    def config_hash(self) -> str:
        h = hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.rho_init).tobytes())
        return h.hexdigest()[:16]


class ClassicalRunner:
    def __init__(self, params: ReservoirParams, a0: complex = 0.0, lambda_input: float = 0.0,
                 rng_seed: int = 0):
        self.params = params
        self.a0 = complex(a0)
        self.lambda_input = lambda_input
        self.rng_seed = rng_seed

    def __call__(self, window, key: int = 0) -> np.ndarray:
        return propagate_classical(self.a0, window, self.params, self.lambda_input,
                                   self.rng_seed, noise_key=key)

    def describe(self) -> dict:
        return {"kind": "classical", "params": asdict(self.params), "a0": [self.a0.real, self.a0.imag],
                "lambda_input": self.lambda_input, "rng_seed": self.rng_seed}

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode()).hexdigest()[:16]


def _samples(x):
    return x.samples if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)


def build_design_matrices(series, runner, spec: WindowSpec, workers: int = 1) -> DesignMatrices:
    """Column k: reservoir readouts over series[k*stride : k*stride + N] and the next M values."""
    x = _samples(series)
    if x.size < spec.required_length:
        raise InsufficientDataError(f"need at least {spec.required_length} samples for {spec}, "
                                    f"got {x.size}")
    starts = [k * spec.stride for k in range(spec.T)]
    run = getattr(runner, "run", None)

    def column(k):
        window = x[starts[k]:starts[k] + spec.N]
        if run is not None:
            traj = run(window, key=k)
            return traj.readouts, traj.trace_drift
        return runner(window, key=k), 0.0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(spec.T)))
    else:
        cols = [column(k) for k in range(spec.T)]
    S = np.column_stack([c[0] for c in cols])
    G = np.column_stack([x[s + spec.N:s + spec.N + spec.M] for s in starts])
    return DesignMatrices(S, G, max(c[1] for c in cols))


def tikhonov_fit(dm: DesignMatrices, eta: float, runner_hash: str = "") -> ReadoutMatrix:
    """A = G S^T (S S^T + eta I)^{-1} via a Cholesky solve."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    S, G = dm.S, dm.G
    gram = S @ S.T
    if eta > 0:
        gram[np.diag_indices_from(gram)] += eta
    diag = np.diagonal(gram)
    if not np.any(gram - np.diag(diag)):
        # orthogonal reservoir features: the system is diagonal and the solve is a division
        if np.any(diag <= 0):
            raise SingularSystemError("S S^T + eta I is singular; use eta > 0")
        return ReadoutMatrix(G @ S.T / diag, float(eta), runner_hash)
    try:
        factor = cho_factor(gram, lower=True)
    except LinAlgError as exc:
        raise SingularSystemError("S S^T + eta I is singular; use eta > 0") from exc
    if eta == 0 and np.linalg.cond(gram) > 1e14:
        raise SingularSystemError("S S^T is numerically singular; use eta > 0")
    A = cho_solve(factor, S @ G.T).T
    return ReadoutMatrix(A, float(eta), runner_hash)


def predict_closed_loop(readout: ReadoutMatrix, runner, seed_window, horizon: int,
                        feedback: str = "block", dt_sample: float = 1.0,
                        t0: float = 0.0) -> TimeSeries:
    """Autonomous forecast: the model's outputs become the next inputs.

    ``block`` appends all M outputs per pass, ``single`` only the first.
    """
    if feedback not in ("block", "single"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    buf = _samples(seed_window).copy()
    if buf.size != readout.N:
        raise ValueError(f"seed window has {buf.size} values, readout expects N = {readout.N}")
    out = []
    step = 0
    while len(out) < horizon:
        y = readout.A @ runner(buf[-readout.N:], key=PREDICTION_KEY_OFFSET + step)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite prediction at step {len(out)}")
        new = y if feedback == "block" else y[:1]
        new = new[:horizon - len(out)]
        out.extend(new.tolist())
        buf = np.concatenate([buf, new])[-readout.N:]
        step += 1
    return TimeSeries(np.asarray(out, dtype=np.float64), dt_sample, t0)


def nrmse(predicted, truth) -> float:
    """Root-mean-square error over the standard deviation of ``truth``."""
    p = _samples(predicted).ravel()
    t = _samples(truth).ravel()
    if p.size != t.size or t.size < 2:
        raise ValueError("nrmse needs two equal-length series of at least 2 samples")
    sd = np.std(t)
    if sd == 0:
        raise MetricUndefinedError("truth has zero variance")
    return float(np.sqrt(np.mean((p - t) ** 2)) / sd)


def training_error(readout: ReadoutMatrix, dm: DesignMatrices) -> float:
    """Open-loop NRMSE of A S against G over all training windows."""
    return nrmse(readout.A @ dm.S, dm.G)


def delayed_embedding(series, delay: int) -> np.ndarray:
    """Rows (x[n], x[n - delay]) for n = delay .. len - 1."""
    x = _samples(series)
    if not 0 <= delay < x.size:
        raise ValueError(f"delay {delay} must lie in [0, {x.size})")
    return np.column_stack([x[delay:], x[:x.size - delay]])


def write_embedding_csv(path, pairs: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_n", "x_n_minus_delay"])
        for a, b in pairs:
            w.writerow([f"{a:.17g}", f"{b:.17g}"])

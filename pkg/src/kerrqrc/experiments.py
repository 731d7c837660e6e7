"""Reproduction studies: parameter sweep, quantumness vs loss, delay study,
noise robustness and Rossler training.

Every study is deterministic given its configuration; CSV writers use
17 significant digits and a fixed row order so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, backend
from .dynamics import NOISELESS, NoiseConfig, ReservoirParams, propagate_quantum
from .fock import (TruncationWarning, cat_state, coherent_state, density_matrix, fock_state,
                   haar_random_state, mixed_cat, state_hash)
from .phase_space import average_quantumness
from .readout import (MetricUndefinedError, QuantumRunner, ReadoutMatrix, WindowSpec, build_design_matrices,
                      nrmse, predict_closed_loop, tikhonov_fit)
from .signals import MGParams, RosslerParams, TimeSeries, add_white_noise, mackey_glass, periodic_signal, rossler

SWEEP_K = (0.02, 0.05, 0.07, 0.1, 0.12)
SWEEP_KAPPA = (0.02, 0.03, 0.05, 0.1, 0.2, 0.3)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(path, name: str, config: dict, **extra) -> None:
    manifest = {"experiment": name, "version": __version__, "backend": backend.NAME,
                "config": config}
    manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# --------------------------------------------------------------------------- training


@dataclass
class TrainResult:
    readout: ReadoutMatrix
    train_error: float
    test_error: float
    prediction: TimeSeries
    truth: TimeSeries
    seed_window: TimeSeries
    trace_drift: float
    mean_Q: float = float("nan")
    q_curve: np.ndarray | None = field(default=None, repr=False)


def required_series_length(spec: WindowSpec, horizon: int) -> int:
    """Training windows, then an N-sample seed window, then the test horizon."""
    return spec.required_length + spec.N + horizon


def evolution_snapshots(runner: QuantumRunner, window, key: int = 0) -> np.ndarray:
    """Initial state followed by the state after every step of ``window``."""
    traj = runner.run(window, key=key, keep_snapshots=True)
    return np.concatenate([runner.rho_init[None], traj.snapshots])


def final_window_quantumness(series, runner: QuantumRunner, spec: WindowSpec):
    """Mean Q over the evolution of the last training window."""
    x = series.samples if isinstance(series, TimeSeries) else np.asarray(series)
    k = spec.T - 1
    start = k * spec.stride
    return average_quantumness(evolution_snapshots(runner, x[start:start + spec.N], key=k))


def train_and_test(series: TimeSeries, runner, spec: WindowSpec, eta: float, horizon: int = 100,
                   feedback: str = "block", quantumness: bool = False, workers: int = 1) -> TrainResult:
    """Fit on the leading windows, then forecast ``horizon`` samples past a fresh seed window."""
    x = series.samples
    need = required_series_length(spec, horizon)
    if x.size < need:
        raise ValueError(f"series has {x.size} samples, study needs {need}")
    dm = build_design_matrices(series, runner, spec, workers=workers)
    hash_fn = getattr(runner, "config_hash", None)
    readout = tikhonov_fit(dm, eta, hash_fn() if hash_fn else "")
    s0 = spec.required_length
    seed = series.slice(s0, s0 + spec.N)
    truth = series.slice(s0 + spec.N, s0 + spec.N + horizon)
    pred = predict_closed_loop(readout, runner, seed.samples, horizon, feedback,
                               series.dt_sample, truth.t0)
    result = TrainResult(readout, _error(readout.A @ dm.S, dm.G), _error(pred.samples, truth.samples),
                         pred, truth, seed, dm.trace_drift)
    if quantumness:
        result.mean_Q, result.q_curve = final_window_quantumness(series, runner, spec)
    return result


def _error(predicted, truth) -> float:
    # a constant target reproduced exactly counts as a perfect fit
    try:
        return nrmse(predicted, truth)
    except MetricUndefinedError:
        if np.array_equal(predicted, truth):
            return 0.0
        raise


def mg_series(spec: WindowSpec, horizon: int, mg: MGParams = MGParams(), history: float = 1.2,
              burn_in: float = 1000.0) -> TimeSeries:
    n = required_series_length(spec, horizon)
    return mackey_glass(mg, history, burn_in, t_max=float(n - 1), sample_spacing=1.0)


# --------------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class EnsembleState:
    index: int
    dim: int
    seed: int


def haar_ensemble(dims=range(4, 11), per_dim: int = 5, base_seed: int = 0) -> list[EnsembleState]:
    """The random initial states: ``per_dim`` seeds for every support dimension."""
    out = []
    for d in dims:
        for j in range(per_dim):
            out.append(EnsembleState(len(out), int(d), int(base_seed) * 10_000 + 100 * int(d) + j))
    return out


def ensemble_hash(ensemble, d_t: int) -> str:
    """Content hash of the ensemble; states that do not fit in ``d_t`` hash as empty."""
    return state_hash(*[haar_random_state(s.dim, d_t, s.seed) if s.dim <= d_t else np.zeros(0)
                        for s in ensemble])


@dataclass
class SweepGrid:
    K_values: tuple = SWEEP_K
    kappa_values: tuple = SWEEP_KAPPA
    ensemble: list = field(default_factory=haar_ensemble)
    base: ReservoirParams = ReservoirParams()
    spec: WindowSpec = WindowSpec()
    eta: float = 0.01
    horizon: int = 100
    mg: MGParams = MGParams()
    quantumness_only: bool = False

    def __post_init__(self):
        if not self.K_values or not self.kappa_values or not self.ensemble:
            raise ValueError("sweep grid lists must be non-empty")
        seeds = [(s.dim, s.seed) for s in self.ensemble]
        if len(set(seeds)) != len(seeds):
            raise ValueError("ensemble seeds must be distinct")

    def to_dict(self) -> dict:
        return {"K_values": list(self.K_values), "kappa_values": list(self.kappa_values),
                "ensemble": [asdict(s) for s in self.ensemble], "base": asdict(self.base),
                "spec": asdict(self.spec), "eta": self.eta, "horizon": self.horizon,
                "mg": asdict(self.mg), "quantumness_only": self.quantumness_only}


@dataclass
class SweepRecord:
    K: float
    kappa: float
    state_index: int
    state_dim: int
    state_seed: int
    test_error: float
    mean_Q: float
    trace_drift: float
    run_seed: int
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass
class CellSummary:
    K: float
    kappa: float
    best_err: float
    avg_err: float
    worst_err: float
    meanQ: float
    stdQ: float
    best_state: int
    worst_state: int
    failed: int = 0


RECORD_HEADER = ["K", "kappa", "state_index", "state_dim", "state_seed", "test_error", "mean_Q",
                 "trace_drift", "run_seed"]
SUMMARY_HEADER = ["K", "kappa", "best_err", "avg_err", "worst_err", "meanQ", "stdQ",
                  "best_state", "worst_state"]


def _run_cell(K, kappa, state: EnsembleState, grid: SweepGrid, series: TimeSeries) -> SweepRecord:
    params = replace(grid.base, K=K, kappa=kappa)
    run_seed = state.seed
    try:
        psi = haar_random_state(state.dim, params.d_t, state.seed)
        runner = QuantumRunner(params, psi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            if grid.quantumness_only:
                mean_q, _ = final_window_quantumness(series, runner, grid.spec)
                err, drift = float("nan"), 0.0
            else:
                res = train_and_test(series, runner, grid.spec, grid.eta, grid.horizon,
                                     quantumness=True)
                mean_q, err, drift = res.mean_Q, res.test_error, res.trace_drift
        return SweepRecord(K, kappa, state.index, state.dim, state.seed, err, mean_q, drift, run_seed)
    except Exception as exc:  # a failed cell is recorded, not fatal
        return SweepRecord(K, kappa, state.index, state.dim, state.seed, float("nan"), float("nan"),
                           float("nan"), run_seed, error=f"{type(exc).__name__}: {exc}")


def _record_row(r: SweepRecord):
    return [r.K, r.kappa, r.state_index, r.state_dim, r.state_seed, r.test_error, r.mean_Q,
            r.trace_drift, r.run_seed]


def summarize(records) -> list[CellSummary]:
    cells = {}
    for r in records:
        cells.setdefault((r.K, r.kappa), []).append(r)
    out = []
    for (K, kappa), rs in sorted(cells.items()):
        ok = [r for r in rs if not r.failed]
        q = np.array([r.mean_Q for r in ok])
        errs = np.array([r.test_error for r in ok])
        if errs.size and np.all(np.isfinite(errs)):
            best, worst = int(np.argmin(errs)), int(np.argmax(errs))
            summ = CellSummary(K, kappa, float(errs[best]), float(errs.mean()), float(errs[worst]),
                               float(q.mean()), float(q.std()), ok[best].state_index,
                               ok[worst].state_index)
        else:
            nan = float("nan")
            summ = CellSummary(K, kappa, nan, nan, nan, float(q.mean()) if q.size else nan,
                               float(q.std()) if q.size else nan, -1, -1)
        summ.failed = len(rs) - len(ok)
        out.append(summ)
    return out


def run_sweep(grid: SweepGrid, workers: int = 1, out_dir=None):
    """Train every (K, kappa, initial state) combination of ``grid``.

    The same ensemble and drive series are reused in every cell. With
    ``out_dir`` the records stream to ``records.partial.csv`` as they finish;
    the final ``records.csv`` and ``summary.csv`` are sorted by (K, kappa, state).
    """
    series = mg_series(grid.spec, grid.horizon, grid.mg)
    tasks = [(K, kappa, s) for K in grid.K_values for kappa in grid.kappa_values for s in grid.ensemble]
    records = []
    partial = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        partial = open(os.path.join(out_dir, "records.partial.csv"), "w", newline="")
        csv.writer(partial).writerow(RECORD_HEADER + ["error"])

    def done(rec):
        records.append(rec)
        if partial is not None:
            csv.writer(partial).writerow([_fmt(v) for v in _record_row(rec)] + [rec.error])
            partial.flush()

    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_run_cell, K, kappa, s, grid, series) for K, kappa, s in tasks]
                for fut in as_completed(futs):
                    done(fut.result())
        else:
            for K, kappa, s in tasks:
                done(_run_cell(K, kappa, s, grid, series))
    finally:
        if partial is not None:
            partial.close()

    records.sort(key=lambda r: (r.K, r.kappa, r.state_index))
    summaries = summarize(records)
    if out_dir is not None:
        ens_hash = ensemble_hash(grid.ensemble, grid.base.d_t)
        write_csv(os.path.join(out_dir, "records.csv"), RECORD_HEADER, map(_record_row, records))
        write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER,
                  ([c.K, c.kappa, c.best_err, c.avg_err, c.worst_err, c.meanQ, c.stdQ,
                    c.best_state, c.worst_state] for c in summaries))
        write_state_histogram(os.path.join(out_dir, "best_worst_counts.csv"), summaries,
                              len(grid.ensemble))
        write_manifest(os.path.join(out_dir, "manifest.json"), "sweep", grid.to_dict(),
                       ensemble_hash=ens_hash,
                       failed_cells=[asdict(r) for r in records if r.failed])
        os.remove(os.path.join(out_dir, "records.partial.csv"))
    return records, summaries


def write_state_histogram(path, summaries, n_states: int) -> None:
    """How often each state is the best / worst performer across cells."""
    best = np.zeros(n_states, dtype=int)
    worst = np.zeros(n_states, dtype=int)
    for c in summaries:
        if c.best_state >= 0:
            best[c.best_state] += 1
            worst[c.worst_state] += 1
    write_csv(path, ["state_index", "best_count", "worst_count"],
              ([i, int(best[i]), int(worst[i])] for i in range(n_states)))


# --------------------------------------------------------------------------- quantumness vs loss


def named_initial_states(d_t: int, alpha: complex = 1 + 1j) -> dict:
    return {
        "coherent": density_matrix(coherent_state(alpha, d_t)),
        "mix": mixed_cat(alpha, d_t),
        "cat": density_matrix(cat_state(alpha, d_t)),
        "ket6": density_matrix(fock_state(6, d_t)),
    }


def run_quantumness_vs_kappa(kappa_values, params: ReservoirParams = ReservoirParams(),
                             lambda_pump: float = 0.1, steps: int = 200, alpha: complex = 1 + 1j,
                             states=None, drive: TimeSeries | None = None):
    """Mean Q over an MG-driven evolution for each named state and loss rate.

    Returns ``(mean_q, curves)``: ``mean_q[name]`` is an array over
    ``kappa_values``; ``curves[name][i]`` the per-step Q (initial state first).
    """
    states = named_initial_states(params.d_t, alpha) if states is None else states
    f = (drive.samples if drive is not None else
         mackey_glass(t_max=float(steps - 1)).samples)[:steps]
    noise = NoiseConfig(lambda_pump=lambda_pump)
    mean_q, curves = {}, {}
    for name, rho in states.items():
        means, cs = [], []
        for kappa in kappa_values:
            traj = propagate_quantum(rho, f, replace(params, kappa=kappa), noise, keep_snapshots=True)
            m, q = average_quantumness(np.concatenate([rho[None], traj.snapshots]))
            means.append(m)
            cs.append(q)
        mean_q[name] = np.array(means)
        curves[name] = cs
    return mean_q, curves


# --------------------------------------------------------------------------- delay study


def run_tau_study(tau_values=(10.0, 17.0, 40.0), N_values=(110, 200, 400),
                  params: ReservoirParams = ReservoirParams(), initial_state=None,
                  spec: WindowSpec = WindowSpec(), eta: float = 0.01, horizon: int = 100,
                  extra=((40.0, 200),)):
    """Train each delay with its paired input length, plus the ``extra`` (tau, N) pairs.

    Returns rows (tau, N, train_error, test_error).
    """
    if len(tau_values) != len(N_values):
        raise ValueError("tau_values and N_values must be aligned")
    psi = fock_state(6, params.d_t) if initial_state is None else initial_state
    rows = []
    for tau, N in list(zip(tau_values, N_values)) + list(extra):
        s = replace(spec, N=int(N))
        series = mg_series(s, horizon, MGParams(tau=float(tau)))
        res = train_and_test(series, QuantumRunner(params, psi), s, eta, horizon)
        rows.append((float(tau), int(N), res.train_error, res.test_error))
    return rows


# --------------------------------------------------------------------------- noise study


@dataclass
class NoiseReport:
    noisy: TrainResult
    clean: TrainResult

    @property
    def train_ratio(self) -> float:
        return self.noisy.train_error / self.clean.train_error

    @property
    def test_ratio(self) -> float:
        return self.noisy.test_error / self.clean.test_error


def run_noise_study(params: ReservoirParams = ReservoirParams(K=0.05, kappa=0.15, drive_alpha=1.2),
                    noise: NoiseConfig = NoiseConfig(0.05, 0.05, 0.02, 0),
                    initial_state=None, spec: WindowSpec = WindowSpec(), eta: float = 0.01,
                    horizon: int = 100) -> NoiseReport:
    """MG under dephasing, pumping and input noise, paired with the noiseless run."""
    psi = fock_state(6, params.d_t) if initial_state is None else initial_state
    series = mg_series(spec, horizon)
    noisy = train_and_test(series, QuantumRunner(params, psi, noise), spec, eta, horizon)
    clean = train_and_test(series, QuantumRunner(params, psi, NOISELESS), spec, eta, horizon)
    return NoiseReport(noisy, clean)


def run_periodic_noise_study(kind: str = "sawtooth", lambda_primes=(0.0, 0.1, 0.3, 0.6, 1.0),
                             seeds=range(5),
                             params: ReservoirParams = ReservoirParams(K=0.05, kappa=0.05, drive_alpha=0.1),
                             initial_states=None, spec: WindowSpec = WindowSpec(N=60, M=20, T=60),
                             eta: float = 0.01, horizon: int = 40, period: float = 20.0):
    """Periodic target with white noise on the reservoir input only.

    Returns rows (state, lambda_prime, seed, train_error, test_error).
    """
    if initial_states is None:
        initial_states = {"cat": cat_state(1 + 1j, params.d_t), "mix": mixed_cat(1 + 1j, params.d_t)}
    n = required_series_length(spec, horizon)
    series = periodic_signal(kind, period, 1.0, t_max=float(n - 1))
    rows = []
    for name, state in initial_states.items():
        for lam in lambda_primes:
            for seed in seeds:
                runner = QuantumRunner(params, state, NoiseConfig(lambda_input=float(lam), rng_seed=int(seed)))
                res = train_and_test(series, runner, spec, eta, horizon)
                rows.append((name, float(lam), int(seed), res.train_error, res.test_error))
    return rows


# --------------------------------------------------------------------------- Rossler


ROSSLER_PARAMS = ReservoirParams(K=0.01, kappa=0.2, drive_alpha=1.0)


@dataclass
class RosslerReport:
    results: dict  # component -> TrainResult (in scaled units)
    scale: float

    def errors(self) -> dict:
        return {k: (r.train_error, r.test_error) for k, r in self.results.items()}


def run_rossler(rossler_params: RosslerParams = RosslerParams(), params: ReservoirParams = ROSSLER_PARAMS,
                initial_state=None, spec: WindowSpec = WindowSpec(), eta: float = 0.01,
                horizon: int = 100, sample_spacing: float = 0.25, scale: float = 0.1,
                initial=(0.0, 1.0, 0.0), burn_in: float = 100.0, components=("x", "y", "z")):
    """Train each Rossler component on its own reservoir and readout.

    Inputs are multiplied by ``scale`` before driving the oscillator.
    """
    psi = fock_state(6, params.d_t) if initial_state is None else initial_state
    n = required_series_length(spec, horizon)
    skip = int(round(burn_in / sample_spacing))
    xyz = rossler(rossler_params, initial, t_max=(n - 1 + skip) * sample_spacing,
                  sample_spacing=sample_spacing)
    results = {}
    for name, s in zip("xyz", xyz):
        if name not in components:
            continue
        scaled = TimeSeries(s.samples[skip:skip + n] * scale, sample_spacing, 0.0)
        results[name] = train_and_test(scaled, QuantumRunner(params, psi), spec, eta, horizon)
    return RosslerReport(results, scale)

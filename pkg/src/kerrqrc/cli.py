"""Command-line entry point.

Settings resolve as defaults <- config file <- flags. Config files hold
``key = value`` lines with ``#`` comments; a run's ``manifest.json`` is also
accepted as a config, which replays the run exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import warnings
from importlib import resources

import numpy as np

from . import __version__, backend, experiments as ex
from .dynamics import NoiseConfig, ReservoirParams, propagate_quantum, write_snapshots, write_trajectory_csv
from .fock import (DEFAULT_DIM, cat_state, coherent_state, density_matrix, fock_state, haar_random_state,
                   mixed_cat, state_from_csv, validate_density_matrix)
from .phase_space import (PhaseSpaceGrid, lee_jeong_trace, quantumness_Q, wigner, wigner_negativity,
                          write_quantumness_csv)
from .readout import QuantumRunner, WindowSpec, delayed_embedding, write_embedding_csv
from .signals import MGParams, RosslerParams, TimeSeries, add_white_noise, mackey_glass, periodic_signal, rossler


_NUMBER = re.compile(r"[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?")


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _complex(text):
    if isinstance(text, (list, tuple)):
        return complex(text[0], text[1])
    return complex(str(text).replace(" ", "").replace("i", "j"))


# key -> (converter, default, help)
RESERVOIR_KEYS = {
    "K": (float, 0.05, "Kerr nonlinearity"),
    "kappa": (float, 0.1, "photon loss rate"),
    "drive_alpha": (float, 1.2, "input coefficient"),
    "dt_step": (float, 0.1, "reservoir time per input sample"),
    "d_t": (int, DEFAULT_DIM, "Fock truncation"),
    "substeps": (int, 10, "RK4 substeps per reservoir step"),
}
NOISE_KEYS = {
    "lambda_dephase": (float, 0.0, "dephasing strength"),
    "lambda_pump": (float, 0.0, "incoherent pumping strength"),
    "lambda_input": (float, 0.0, "input white-noise strength"),
}
WINDOW_KEYS = {
    "N": (int, 200, "input length"),
    "M": (int, 100, "output length"),
    "T": (int, 248, "number of training windows"),
    "stride": (int, 1, "window stride"),
    "eta": (float, 0.01, "Tikhonov regularization"),
    "horizon": (int, 100, "closed-loop test horizon"),
    "feedback": (str, "block", "closed-loop feedback: block or single"),
}
STATE_KEYS = {
    "initial_state": (str, "fock:6", "fock:n | coherent | cat | mix | haar:d | file:PATH"),
    "alpha": (_complex, 1 + 1j, "coherent amplitude for coherent/cat/mix"),
}
MG_KEYS = {
    "tau": (float, 17.0, "Mackey-Glass delay"),
    "beta": (float, 0.2, "Mackey-Glass beta"),
    "gamma": (float, 0.1, "Mackey-Glass gamma"),
    "mg_m": (int, 10, "Mackey-Glass exponent"),
    "history": (float, 1.2, "constant initial history"),
    "burn_in": (float, 1000.0, "discarded transient"),
}
GRID_KEYS = {
    "grid_min": (float, -7.5, "phase-space grid lower bound"),
    "grid_max": (float, 7.5, "phase-space grid upper bound"),
    "grid_points": (int, 251, "points per phase-space axis (odd)"),
}

COMMANDS = {
    "generate": {
        "series": (str, "mg", "mg | rossler | sine | sawtooth"),
        "t_max": (float, 1000.0, "duration after burn-in"),
        "sample_spacing": (float, 1.0, "sample spacing"),
        **{k: v for k, v in MG_KEYS.items()},
        "rossler_a": (float, 0.2, "Rossler a"),
        "rossler_b": (float, 0.2, "Rossler b"),
        "rossler_c": (float, 5.7, "Rossler c"),
        "rossler_initial": (_floats, (0.0, 1.0, 0.0), "Rossler start x,y,z"),
        "period": (float, 20.0, "periodic signal period"),
        "amplitude": (float, 1.0, "periodic signal amplitude"),
        "lambda_prime": (float, 0.0, "additive white noise"),
    },
    "train": {**RESERVOIR_KEYS, **NOISE_KEYS, **WINDOW_KEYS, **STATE_KEYS, **MG_KEYS,
              "embedding_delay": (int, -1, "delay for the embedding CSV (default: tau)"),
              "dump_snapshots": (_bool, False, "write the first window's density matrices")},
    "quantumness": {**RESERVOIR_KEYS, **NOISE_KEYS, **STATE_KEYS, **GRID_KEYS,
                    "steps": (int, 0, "evolve under the MG drive for this many steps"),
                    "frame_every": (int, 0, "dump a Wigner frame every k steps (0: none)"),
                    "normalize": (_bool, False, "divide the Q curve by its maximum"),
                    "kappa_values": (_floats, (), "run the quantumness-vs-kappa study")},
    "sweep": {**RESERVOIR_KEYS, **WINDOW_KEYS,
              "K_values": (_floats, ex.SWEEP_K, "Kerr values"),
              "kappa_values": (_floats, ex.SWEEP_KAPPA, "loss values"),
              "dims": (_ints, tuple(range(4, 11)), "Haar support dimensions, e.g. 4-10"),
              "per_dim": (int, 5, "random states per dimension"),
              "quantumness_only": (_bool, False, "skip training; mean Q only")},
    "noise-study": {**RESERVOIR_KEYS, **NOISE_KEYS, **WINDOW_KEYS, **STATE_KEYS,
                    "periodic_kind": (str, "", "also run a sine/sawtooth input-noise study "
                                      "(fixed reference settings)"),
                    "lambda_primes": (_floats, (0.0, 0.1, 0.3, 0.6, 1.0), "input-noise levels"),
                    "noise_seeds": (int, 5, "seeds per input-noise level"),
                    "period": (float, 20.0, "periodic signal period")},
    "tau-study": {**RESERVOIR_KEYS, **WINDOW_KEYS, **STATE_KEYS,
                  "tau_values": (_floats, (10.0, 17.0, 40.0), "delays"),
                  "N_values": (_ints, (110, 200, 400), "input length per delay")},
    "rossler-study": {**RESERVOIR_KEYS, **WINDOW_KEYS, **STATE_KEYS,
                      "rossler_a": (float, 0.2, "Rossler a"),
                      "rossler_b": (float, 0.2, "Rossler b"),
                      "rossler_c": (float, 5.7, "Rossler c"),
                      "sample_spacing": (float, 0.25, "sample spacing"),
                      "scale": (float, 0.1, "input scaling"),
                      "burn_in": (float, 100.0, "discarded transient")},
}
# studies whose reference settings differ from the MG training defaults
COMMAND_DEFAULTS = {
    "rossler-study": {"K": 0.01, "kappa": 0.2, "drive_alpha": 1.0},
    "noise-study": {"kappa": 0.15, "lambda_dephase": 0.05, "lambda_pump": 0.05, "lambda_input": 0.02},
}


def shipped_config(name: str) -> str:
    return str(resources.files("kerrqrc") / "configs" / name)


def read_config(path: str) -> dict:
    if not os.path.exists(path) and os.path.exists(shipped_config(path)):
        path = shipped_config(path)
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return dict(data.get("resolved", data))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(command: str, file_values: dict, flag_values: dict) -> dict:
    keys = COMMANDS[command]
    resolved = {k: v[1] for k, v in keys.items()}
    resolved.update(COMMAND_DEFAULTS.get(command, {}))
    for source in (file_values, flag_values):
        for k, v in source.items():
            if k in ("command", "seed", "workers"):
                continue
            if k not in keys:
                raise ConfigError(f"unknown setting {k!r} for {command}")
            try:
                resolved[k] = keys[k][0](v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {k}: {v!r} ({exc})") from None
    return resolved


def _reservoir(cfg) -> ReservoirParams:
    return ReservoirParams(cfg["K"], cfg["kappa"], cfg["drive_alpha"], cfg["dt_step"], cfg["d_t"],
                           cfg["substeps"])


def _noise(cfg, seed) -> NoiseConfig:
    return NoiseConfig(cfg["lambda_dephase"], cfg["lambda_pump"], cfg["lambda_input"], seed)


def _spec(cfg) -> WindowSpec:
    if cfg["feedback"] not in ("block", "single"):
        raise ConfigError("feedback must be block or single")
    return WindowSpec(cfg["N"], cfg["M"], cfg["T"], cfg["stride"])


def _mg(cfg) -> MGParams:
    return MGParams(cfg["beta"], cfg["gamma"], cfg["mg_m"], cfg["tau"])


def _initial_state(cfg, d_t, seed):
    spec = cfg["initial_state"]
    alpha = cfg["alpha"]
    kind, _, arg = spec.partition(":")
    if kind == "fock":
        return density_matrix(fock_state(int(arg or 0), d_t))
    if kind == "vacuum":
        return density_matrix(fock_state(0, d_t))
    if kind == "coherent":
        return density_matrix(coherent_state(alpha, d_t))
    if kind == "cat":
        return density_matrix(cat_state(alpha, d_t))
    if kind == "mix":
        return mixed_cat(alpha, d_t)
    if kind == "haar":
        return density_matrix(haar_random_state(int(arg), d_t, seed))
    if kind == "file":
        psi = state_from_csv(arg)
        if psi.size != d_t:
            raise ConfigError(f"state file has dimension {psi.size}, d_t is {d_t}")
        return validate_density_matrix(density_matrix(psi))
    raise ConfigError(f"unknown initial_state {spec!r}")


def _write_series(path, series: TimeSeries):
    series.to_csv(path)


# --------------------------------------------------------------------------- commands


def cmd_generate(cfg, seed, workers, out):
    kind = cfg["series"]
    written = []
    if kind == "mg":
        s = mackey_glass(_mg(cfg), cfg["history"], cfg["burn_in"], cfg["t_max"], cfg["sample_spacing"])
        series = {"series": s}
    elif kind == "rossler":
        xyz = rossler(RosslerParams(cfg["rossler_a"], cfg["rossler_b"], cfg["rossler_c"]),
                      cfg["rossler_initial"], cfg["t_max"], cfg["sample_spacing"])
        series = dict(zip(("x", "y", "z"), xyz))
    elif kind in ("sine", "sawtooth"):
        series = {"series": periodic_signal(kind, cfg["period"], cfg["amplitude"], cfg["t_max"],
                                            cfg["sample_spacing"])}
    else:
        raise ConfigError(f"unknown series {kind!r}")
    for name, s in series.items():
        if cfg["lambda_prime"] > 0:
            s = add_white_noise(s, cfg["lambda_prime"], seed)
        path = os.path.join(out, f"{name}.csv")
        _write_series(path, s)
        written.append(os.path.basename(path))
    return {"files": written}


def cmd_train(cfg, seed, workers, out):
    params = _reservoir(cfg)
    spec = _spec(cfg)
    runner = QuantumRunner(params, _initial_state(cfg, params.d_t, seed), _noise(cfg, seed))
    series = ex.mg_series(spec, cfg["horizon"], _mg(cfg), cfg["history"], cfg["burn_in"])
    res = ex.train_and_test(series, runner, spec, cfg["eta"], cfg["horizon"], cfg["feedback"],
                            workers=workers)
    res.prediction.to_csv(os.path.join(out, "prediction.csv"))
    res.truth.to_csv(os.path.join(out, "truth.csv"))
    series.to_csv(os.path.join(out, "series.csv"))
    # reservoir trajectory of the first training window
    first = runner.run(series.samples[:spec.N], key=0, keep_snapshots=cfg["dump_snapshots"])
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), first, params.dt_step)
    if cfg["dump_snapshots"]:
        write_snapshots(os.path.join(out, "snapshots"), first.snapshots)
    res.readout.to_csv(os.path.join(out, "readout.csv"))
    delay = cfg["embedding_delay"] if cfg["embedding_delay"] >= 0 else int(round(cfg["tau"]))
    write_embedding_csv(os.path.join(out, "embedding_truth.csv"), delayed_embedding(series, delay))
    # the reservoir's view: seed window continued by the forecast
    joined = np.concatenate([res.seed_window.samples, res.prediction.samples])
    write_embedding_csv(os.path.join(out, "embedding_prediction.csv"), delayed_embedding(joined, delay))
    return {"train_error": res.train_error, "test_error": res.test_error,
            "trace_drift": res.trace_drift, "runner_hash": res.readout.runner_hash}


def cmd_quantumness(cfg, seed, workers, out):
    params = _reservoir(cfg)
    grid = PhaseSpaceGrid(cfg["grid_min"], cfg["grid_max"], cfg["grid_min"], cfg["grid_max"],
                          cfg["grid_points"], cfg["grid_points"])
    if cfg["kappa_values"]:
        mean_q, _ = ex.run_quantumness_vs_kappa(cfg["kappa_values"], params, cfg["lambda_pump"],
                                                steps=cfg["steps"] or 200, alpha=cfg["alpha"])
        ex.write_csv(os.path.join(out, "quantumness_vs_kappa.csv"), ["state", "kappa", "mean_Q"],
                     ([name, k, q] for name, qs in mean_q.items()
                      for k, q in zip(cfg["kappa_values"], qs)))
        return {"mean_Q": {k: v.tolist() for k, v in mean_q.items()}}
    rho = _initial_state(cfg, params.d_t, seed)
    field = wigner(rho, grid)
    field.to_csv(os.path.join(out, "wigner.csv"))
    result = {"I": lee_jeong_trace(rho), "Q": quantumness_Q(rho)}
    try:
        result["negativity"] = wigner_negativity(field)
    except ValueError as exc:
        result["negativity"] = None
        result["negativity_error"] = str(exc)
    if cfg["steps"] > 0:
        drive = mackey_glass(t_max=float(cfg["steps"] - 1)).samples
        traj = propagate_quantum(rho, drive, params, _noise(cfg, seed), keep_snapshots=True)
        snaps = np.concatenate([rho[None], traj.snapshots])
        write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj, params.dt_step)
        write_quantumness_csv(os.path.join(out, "quantumness.csv"), snaps, params.dt_step,
                              normalize=cfg["normalize"])
        if cfg["frame_every"] > 0:
            for k in range(0, snaps.shape[0], cfg["frame_every"]):
                wigner(snaps[k], grid).to_csv(os.path.join(out, f"wigner_step{k:05d}.csv"))
        result["trace_drift"] = traj.trace_drift
    return result


def cmd_sweep(cfg, seed, workers, out):
    grid = ex.SweepGrid(cfg["K_values"], cfg["kappa_values"],
                        ex.haar_ensemble(cfg["dims"], cfg["per_dim"], seed),
                        _reservoir(cfg), _spec(cfg), cfg["eta"], cfg["horizon"],
                        quantumness_only=cfg["quantumness_only"])
    records, summaries = ex.run_sweep(grid, workers=workers, out_dir=out)
    with open(os.path.join(out, "manifest.json")) as fh:
        sweep_manifest = json.load(fh)
    return {"cells": len(summaries), "ensemble_hash": sweep_manifest["ensemble_hash"],
            "failed_cells": sweep_manifest["failed_cells"]}


def cmd_noise_study(cfg, seed, workers, out):
    params = _reservoir(cfg)
    spec = _spec(cfg)
    state = _initial_state(cfg, params.d_t, seed)
    rep = ex.run_noise_study(params, _noise(cfg, seed), state, spec, cfg["eta"], cfg["horizon"])
    ex.write_csv(os.path.join(out, "noise_report.csv"), ["run", "train_error", "test_error"],
                 [["noisy", rep.noisy.train_error, rep.noisy.test_error],
                  ["noiseless", rep.clean.train_error, rep.clean.test_error]])
    rep.noisy.prediction.to_csv(os.path.join(out, "prediction_noisy.csv"))
    result = {"train_ratio": rep.train_ratio, "test_ratio": rep.test_ratio}
    if cfg["periodic_kind"]:
        # the periodic study keeps its own reservoir and window settings
        rows = ex.run_periodic_noise_study(cfg["periodic_kind"], cfg["lambda_primes"],
                                           range(seed, seed + cfg["noise_seeds"]),
                                           eta=cfg["eta"], period=cfg["period"])
        ex.write_csv(os.path.join(out, "periodic_noise.csv"),
                     ["state", "lambda_prime", "seed", "train_error", "test_error"], rows)
    return result


def cmd_tau_study(cfg, seed, workers, out):
    params = _reservoir(cfg)
    rows = ex.run_tau_study(cfg["tau_values"], cfg["N_values"], params,
                            _initial_state(cfg, params.d_t, seed), _spec(cfg), cfg["eta"],
                            cfg["horizon"])
    ex.write_csv(os.path.join(out, "tau_report.csv"), ["tau", "N", "train_error", "test_error"], rows)
    return {"rows": len(rows)}


def cmd_rossler_study(cfg, seed, workers, out):
    params = _reservoir(cfg)
    rep = ex.run_rossler(RosslerParams(cfg["rossler_a"], cfg["rossler_b"], cfg["rossler_c"]), params,
                         _initial_state(cfg, params.d_t, seed), _spec(cfg), cfg["eta"], cfg["horizon"],
                         cfg["sample_spacing"], cfg["scale"], burn_in=cfg["burn_in"])
    ex.write_csv(os.path.join(out, "rossler_report.csv"), ["component", "train_error", "test_error"],
                 ([k, *v] for k, v in rep.errors().items()))
    for name, res in rep.results.items():
        res.readout.to_csv(os.path.join(out, f"readout_{name}.csv"))
    x, y = rep.results["x"], rep.results["y"]
    ex.write_csv(os.path.join(out, "phase_portrait.csv"), ["t", "x", "y", "x_pred", "y_pred"],
                 zip(x.truth.times, x.truth.samples / rep.scale, y.truth.samples / rep.scale,
                     x.prediction.samples / rep.scale, y.prediction.samples / rep.scale))
    return {"errors": rep.errors()}


HANDLERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "quantumness": cmd_quantumness,
    "sweep": cmd_sweep,
    "noise-study": cmd_noise_study,
    "tau-study": cmd_tau_study,
    "rossler-study": cmd_rossler_study,
}


SUMMARIES = {
    "generate": "write a Mackey-Glass, Rossler or periodic series to CSV",
    "train": "fit the readout on Mackey-Glass windows and forecast closed-loop",
    "quantumness": "Wigner function, Lee-Jeong quantumness and its evolution",
    "sweep": "grid over (K, kappa) with a Haar-random initial-state ensemble",
    "noise-study": "training under dephasing, pumping and input noise vs noiseless",
    "tau-study": "training error across Mackey-Glass delays and input lengths",
    "rossler-study": "train one reservoir per Rossler component",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kerrqrc", description="Kerr-oscillator quantum reservoir computing studies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, keys in COMMANDS.items():
        p = sub.add_parser(name, help=SUMMARIES[name], description=SUMMARIES[name])
        p.add_argument("--config", metavar="PATH", help="key = value file or a run manifest")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (default 0)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel workers (default: available CPUs)")
        for key, (_, default, help_) in keys.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=f"{help_} (default: {default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = read_config(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items()
                 if v is not None and k not in ("command", "config", "out", "seed", "workers")}
        cfg = resolve(args.command, file_values, flags)
        seed = args.seed if args.seed is not None else int(file_values.get("seed", 0))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        workers = args.workers or int(file_values.get("workers", 0)) or os.cpu_count() or 1
        os.makedirs(args.out, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = HANDLERS[args.command](cfg, seed, workers, args.out)
        summary = _summarize_warnings(caught)
        for line in summary:
            print(f"kerrqrc: {line}", file=sys.stderr)
        if summary:
            result = {**result, "warnings": summary}
        manifest = {"command": args.command, "version": __version__, "backend": backend.NAME,
                    "resolved": {**cfg, "seed": seed}, "result": result}
        with open(os.path.join(args.out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    except Exception as exc:
        print(f"kerrqrc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def _severity(message: str):
    return [float(v) for v in _NUMBER.findall(message)], message


def _summarize_warnings(caught) -> list:
    """One line per warning category: its worst message and how many others there were.

    The worst message is the one with the largest numbers, so the summary does
    not depend on the order in which parallel workers raised them.
    """
    worst, counts = {}, {}
    for w in caught:
        name = w.category.__name__
        msg = str(w.message)
        if name not in worst or _severity(msg) > _severity(worst[name]):
            worst[name] = msg
        counts[name] = counts.get(name, 0) + 1
    lines = []
    for name, msg in sorted(worst.items()):
        more = counts[name] - 1
        lines.append(f"{name}: {msg}" + (f" (and {more} similar)" if more else ""))
    return lines


def _json_default(obj):
    if isinstance(obj, complex):
        return str(obj)
    if isinstance(obj, tuple):
        return list(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())

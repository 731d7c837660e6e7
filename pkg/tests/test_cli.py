import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from kerrqrc import cli

SMALL_TRAIN = ["--d-t", "10", "--N", "30", "--M", "8", "--T", "20", "--horizon", "12", "--workers", "1"]


def run(tmp_path, *argv, out="out"):
    return cli.main([*argv, "--out", str(tmp_path / out)])


def manifest(path):
    with open(path / "manifest.json") as fh:
        return json.load(fh)


def test_help_and_version(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--help"])
    assert e.value.code == 0
    assert "train" in capsys.readouterr().out
    with pytest.raises(SystemExit) as e:
        cli.main(["sweep", "--help"])
    assert e.value.code == 0
    assert "--kappa-values" in capsys.readouterr().out


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "kerrqrc.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "kerrqrc" in out.stdout


def test_bad_flag_exits_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        run(tmp_path, "train", "--no-such-flag", "1")
    assert e.value.code == 2
    err = capsys.readouterr().err
    assert len(err.strip().splitlines()) == 1 and "unrecognized" in err


@pytest.mark.parametrize("argv, needle", [
    (["train", "--K", "abc"], "invalid value for K"),
    (["train", "--initial-state", "squeezed"], "unknown initial_state"),
    (["train", "--feedback", "both"], "feedback"),
    (["generate", "--series", "lorenz"], "unknown series"),
    (["train", "--seed", "-1"], "unsigned"),
    (["quantumness", "--grid-points", "100"], "odd"),
])
def test_bad_values_exit_1(tmp_path, capsys, argv, needle):
    assert run(tmp_path, *argv) == 1
    err = capsys.readouterr().err
    assert err.startswith(f"kerrqrc {argv[0]}:") and needle in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("# comment\nK = 0.1\nbogus = 3\n")
    assert run(tmp_path, "train", "--config", str(cfg)) == 1
    assert "unknown setting 'bogus'" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("kappa = 0.3  # loss\ndrive-alpha = 0.9\n")
    values = cli.read_config(str(cfg))
    resolved = cli.resolve("train", values, {"kappa": "0.2"})
    assert resolved["kappa"] == 0.2 and resolved["drive_alpha"] == 0.9 and resolved["K"] == 0.05
    assert cli.resolve("rossler-study", {}, {})["K"] == 0.01


def test_converters():
    assert cli._ints("4-6,9") == (4, 5, 6, 9)
    assert cli._floats("0.1, 0.2") == (0.1, 0.2)
    assert cli._complex("1+1i") == 1 + 1j
    assert cli._complex("(1+1j)") == 1 + 1j
    assert cli._bool("yes") is True
    with pytest.raises(ValueError):
        cli._bool("maybe")


@pytest.mark.parametrize("name", ["fig2.cfg", "fig3.cfg", "figS1.cfg", "figS2.cfg", "figS3.cfg",
                                  "figS4.cfg", "table1.cfg", "tableS2.cfg", "tableS2_desk.cfg"])
def test_shipped_configs_resolve(name):
    values = cli.read_config(name)
    assert values
    matches = [c for c in cli.COMMANDS if set(values) <= set(cli.COMMANDS[c])]
    assert matches, f"{name} fits no command"
    cli.resolve(matches[0], values, {})


def test_generate_series(tmp_path):
    assert run(tmp_path, "generate", "--t-max", "50") == 0
    rows = list(csv.reader(open(tmp_path / "out" / "series.csv")))
    assert rows[0] == ["t", "value"] and len(rows) == 52
    assert run(tmp_path, "generate", "--series", "rossler", "--t-max", "5", out="r") == 0
    assert sorted(os.listdir(tmp_path / "r")) == ["manifest.json", "x.csv", "y.csv", "z.csv"]
    assert run(tmp_path, "generate", "--series", "sine", "--lambda-prime", "0.1", "--seed", "3",
               out="s") == 0
    assert manifest(tmp_path / "s")["resolved"]["seed"] == 3


def test_train_outputs(tmp_path):
    assert run(tmp_path, "train", *SMALL_TRAIN, "--dump-snapshots", "true") == 0
    out = tmp_path / "out"
    names = set(os.listdir(out))
    assert {"prediction.csv", "truth.csv", "series.csv", "trajectory.csv", "readout.csv",
            "embedding_truth.csv", "embedding_prediction.csv", "manifest.json", "snapshots"} <= names
    assert len(os.listdir(out / "snapshots")) == 30
    m = manifest(out)
    assert m["command"] == "train" and m["resolved"]["N"] == 30
    assert np.isfinite(m["result"]["test_error"])
    emb = np.loadtxt(out / "embedding_prediction.csv", delimiter=",", skiprows=1)
    assert emb.shape == (30 + 12 - 17, 2)


def test_train_manifest_replay_is_byte_identical(tmp_path):
    assert run(tmp_path, "train", *SMALL_TRAIN, "--initial-state", "haar:5", "--seed", "11",
               "--lambda-input", "0.05", out="a") == 0
    assert run(tmp_path, "train", "--config", str(tmp_path / "a" / "manifest.json"), out="b") == 0
    for name in sorted(os.listdir(tmp_path / "a")):
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_quantumness_outputs(tmp_path):
    argv = ["quantumness", "--d-t", "12", "--initial-state", "cat", "--grid-points", "61",
            "--grid-min", "-6", "--grid-max", "6", "--steps", "10", "--frame-every", "5"]
    assert run(tmp_path, *argv) == 0
    out = tmp_path / "out"
    m = manifest(out)["result"]
    assert m["Q"] > 0 and m["negativity"] > 0
    rows = list(csv.reader(open(out / "quantumness.csv")))
    assert len(rows) == 12 and float(rows[1][1]) == 0
    assert sorted(n for n in os.listdir(out) if n.startswith("wigner_step")) == [
        "wigner_step00000.csv", "wigner_step00005.csv", "wigner_step00010.csv"]
    assert run(tmp_path, "quantumness", "--d-t", "12", "--steps", "10", "--kappa-values", "0.05,0.4",
               out="k") == 0
    rows = list(csv.reader(open(tmp_path / "k" / "quantumness_vs_kappa.csv")))
    assert rows[0] == ["state", "kappa", "mean_Q"] and len(rows) == 9


def test_state_file_input(tmp_path):
    from kerrqrc.fock import fock_state, state_to_csv
    state_to_csv(fock_state(2, 10), tmp_path / "psi.csv")
    assert run(tmp_path, "quantumness", "--d-t", "10", "--initial-state", f"file:{tmp_path / 'psi.csv'}") == 0
    assert manifest(tmp_path / "out")["result"]["I"] == pytest.approx(2)
    assert run(tmp_path, "quantumness", "--d-t", "12", "--initial-state", f"file:{tmp_path / 'psi.csv'}",
               out="bad") == 1


def test_sweep_replay(tmp_path):
    argv = ["sweep", "--d-t", "8", "--N", "30", "--M", "8", "--T", "20", "--horizon", "10",
            "--K-values", "0.05", "--kappa-values", "0.05,0.2", "--dims", "3-4", "--per-dim", "1",
            "--workers", "1"]
    assert run(tmp_path, *argv, out="a") == 0
    m = manifest(tmp_path / "a")
    assert m["result"]["cells"] == 2 and len(m["result"]["ensemble_hash"]) == 16
    assert run(tmp_path, "sweep", "--config", str(tmp_path / "a" / "manifest.json"), "--workers", "2",
               out="b") == 0
    for name in ("records.csv", "summary.csv", "best_worst_counts.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_noise_tau_rossler_small(tmp_path):
    small = ["--d-t", "10", "--N", "30", "--M", "8", "--T", "20", "--horizon", "10"]
    assert run(tmp_path, "noise-study", *small, out="n") == 0
    rows = list(csv.reader(open(tmp_path / "n" / "noise_report.csv")))
    assert [r[0] for r in rows[1:]] == ["noisy", "noiseless"]
    assert run(tmp_path, "tau-study", "--d-t", "10", "--M", "8", "--T", "20", "--horizon", "10",
               "--tau-values", "10", "--N-values", "30", out="t") == 0
    assert len(list(csv.reader(open(tmp_path / "t" / "tau_report.csv")))) == 3
    assert run(tmp_path, "rossler-study", *small, "--burn-in", "10", out="r") == 0
    rows = list(csv.reader(open(tmp_path / "r" / "phase_portrait.csv")))
    assert rows[0] == ["t", "x", "y", "x_pred", "y_pred"] and len(rows) == 11
    assert {"readout_x.csv", "readout_y.csv", "readout_z.csv"} <= set(os.listdir(tmp_path / "r"))


def test_outputs_stay_in_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    os.mkdir("work")
    assert cli.main(["generate", "--t-max", "10", "--out", "work/o"]) == 0
    assert sorted(os.listdir(tmp_path)) == ["work"]
    assert sorted(os.listdir(tmp_path / "work")) == ["o"]


def test_warnings_are_summarized(tmp_path, capsys):
    assert run(tmp_path, "train", "--d-t", "8", "--N", "30", "--M", "8", "--T", "20", "--horizon", "12",
               "--workers", "1") == 0
    err = capsys.readouterr().err.strip().splitlines()
    trunc = [line for line in err if "TruncationWarning" in line]
    assert len(trunc) == 1
    assert manifest(tmp_path / "out")["result"]["warnings"]


def test_warning_summary_ignores_arrival_order():
    class W:
        def __init__(self, msg):
            self.category, self.message = UserWarning, msg

    msgs = ["level reached 0.0063 at d = 20", "level reached 0.3 at d = 20", "level reached 5e-06 at d = 20"]
    a = cli._summarize_warnings([W(m) for m in msgs])
    b = cli._summarize_warnings([W(m) for m in reversed(msgs)])
    assert a == b == ["UserWarning: level reached 0.3 at d = 20 (and 2 similar)"]

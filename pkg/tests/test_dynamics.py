import csv
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest

from kerrqrc import _fallback, backend
from kerrqrc.dynamics import (IntegrationError, NoiseConfig, ReservoirParams, expectation, lindblad_rhs,
                              propagate_classical, propagate_quantum, tanh_position, write_snapshots,
                              write_trajectory_csv)
from kerrqrc.fock import TruncationWarning, build_ladder, coherent_state, density_matrix, fock_state, haar_random_state
from kerrqrc.signals import DivergenceError, mackey_glass

try:
    from kerrqrc import _kernels
except ImportError:
    _kernels = None

BACKENDS = [_fallback] + ([_kernels] if _kernels is not None else [])


def dense_rhs(rho, f, K, kappa, drive_alpha, deph=0.0, pump=0.0):
    """Direct matrix transcription of the master equation."""
    lad = build_ladder(rho.shape[0])
    a, ad, N, X = lad
    H = K * N @ N + drive_alpha * f * X

    def D(L):
        LdL = L.conj().T @ L
        return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)

    out = -1j * (H @ rho - rho @ H) + kappa * D(a)
    for n in range(rho.shape[0]):
        P = np.zeros_like(rho)
        P[n, n] = deph
        out += D(P)
    return out + D(pump * ad)


def random_rho(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("deph,pump", [(0, 0), (0.3, 0), (0, 0.2), (0.05, 0.1)])
def test_rhs_matches_dense_oracle(impl, deph, pump):
    rho = random_rho(9, 1)
    args = (0.37, 0.05, 0.1, 1.2)
    got = impl.lindblad_rhs(rho, *args, deph, pump)
    np.testing.assert_allclose(got, dense_rhs(rho, *args, deph, pump), atol=1e-13)


def test_vacuum_is_stationary():
    params = ReservoirParams(K=0.3, kappa=0.7, d_t=6)
    assert np.array_equal(lindblad_rhs(density_matrix(fock_state(0, 6)), 0.0, params), np.zeros((6, 6)))


def test_dephasing_channel():
    rho = random_rho(7, 2)
    params = ReservoirParams(K=0, kappa=0, drive_alpha=0, d_t=7)
    d = lindblad_rhs(rho, 0.0, params, NoiseConfig(lambda_dephase=0.5))
    assert np.all(np.diagonal(d) == 0)
    off = ~np.eye(7, dtype=bool)
    np.testing.assert_allclose(d[off], -0.25 * rho[off], atol=1e-15)


def test_dephasing_keeps_populations():
    rho = density_matrix(haar_random_state(6, 10, 4))
    params = ReservoirParams(K=0, kappa=0, drive_alpha=0, d_t=10)
    traj = propagate_quantum(rho, np.zeros(50), params, NoiseConfig(lambda_dephase=0.4))
    np.testing.assert_allclose(np.diagonal(traj.final_state), np.diagonal(rho), atol=1e-10)
    assert abs(traj.final_state[0, 1]) < abs(rho[0, 1])


def test_vacuum_readout_is_zero():
    traj = propagate_quantum(density_matrix(fock_state(0, 10)), np.zeros(40), ReservoirParams(d_t=10))
    assert np.all(traj.readouts == 0)


def test_trace_preserved_over_300_steps():
    rho0 = density_matrix(coherent_state(1 + 1j, 20))
    drive = mackey_glass(t_max=299)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        traj = propagate_quantum(rho0, drive, ReservoirParams(d_t=20), keep_snapshots=True)
    assert np.max(np.abs(traj.traces - 1)) < 1e-8
    assert traj.readouts.shape == (300,)
    assert np.all(np.abs(traj.readouts) < 1)
    for rho in traj.snapshots[::25]:
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-7


def test_amplitude_damping_oracle():
    params = ReservoirParams(K=0, kappa=0.1, drive_alpha=0, d_t=20)
    traj = propagate_quantum(density_matrix(coherent_state(1.0, 20)), np.zeros(100), params)
    a_t = expectation(traj.final_state, build_ladder(20).a)
    assert abs(a_t - np.exp(-0.5)) < 1e-6


def test_substep_convergence():
    rho0 = density_matrix(fock_state(6, 15))
    drive = mackey_glass(t_max=199)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        s10 = propagate_quantum(rho0, drive, ReservoirParams(d_t=15)).readouts
        s20 = propagate_quantum(rho0, drive, ReservoirParams(d_t=15, substeps=20)).readouts
    assert np.max(np.abs(s10 - s20)) < 1e-6


@pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")
def test_backends_agree_on_propagation():
    rho0 = density_matrix(haar_random_state(6, 12, 9))
    f = mackey_glass(t_max=59).samples
    obs = tanh_position(12)
    fast = _kernels.propagate_lindblad(rho0, f, 0.05, 0.1, 1.2, 0.1, 10, obs, 0.05, 0.05, True)
    slow = _fallback.propagate_lindblad(rho0, f, 0.05, 0.1, 1.2, 0.1, 10, obs, 0.05, 0.05, True)
    for x, y in zip(fast, slow):
        np.testing.assert_allclose(x, y, atol=1e-12)
    fast = _kernels.propagate_classical(0.3 + 0.1j, f, 0.05, 0.1, 1.2, 0.1, 10)
    slow = _fallback.propagate_classical(0.3 + 0.1j, f, 0.05, 0.1, 1.2, 0.1, 10)
    for x, y in zip(fast, slow):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_pure_python_backend_selected_by_environment():
    env = dict(os.environ, KERRQRC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import kerrqrc; print(kerrqrc.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert backend.NAME in ("cython", "python")


def test_noiseless_runs_are_bit_identical():
    rho0 = density_matrix(fock_state(3, 10))
    f = mackey_glass(t_max=30).samples
    a = propagate_quantum(rho0, f, ReservoirParams(d_t=10))
    b = propagate_quantum(rho0, f, ReservoirParams(d_t=10))
    assert np.array_equal(a.readouts, b.readouts)


def test_input_noise_keyed_by_seed_and_window():
    rho0 = density_matrix(fock_state(3, 10))
    f = mackey_glass(t_max=30).samples
    p = ReservoirParams(d_t=10)
    noise = NoiseConfig(lambda_input=0.1, rng_seed=5)
    a = propagate_quantum(rho0, f, p, noise, noise_key=1).readouts
    assert np.array_equal(a, propagate_quantum(rho0, f, p, noise, noise_key=1).readouts)
    assert not np.array_equal(a, propagate_quantum(rho0, f, p, noise, noise_key=2).readouts)
    assert not np.array_equal(a, propagate_quantum(rho0, f, p).readouts)


def test_blow_up_raises_integration_error():
    params = ReservoirParams(K=5.0, kappa=0.1, drive_alpha=1.2, dt_step=5.0, d_t=20, substeps=1)
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        with pytest.raises(IntegrationError, match="substeps"):
            propagate_quantum(density_matrix(fock_state(6, 20)), np.ones(60), params)


def test_leakage_warning():
    with pytest.warns(TruncationWarning):
        propagate_quantum(density_matrix(fock_state(6, 8)), np.ones(20), ReservoirParams(d_t=8))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        propagate_quantum(density_matrix(fock_state(0, 5)), np.zeros(3), ReservoirParams(d_t=6))


@pytest.mark.parametrize("bad", [dict(kappa=-0.1), dict(dt_step=0), dict(substeps=0), dict(d_t=1),
                                 dict(K=np.inf)])
def test_params_validated(bad):
    with pytest.raises(ValueError):
        ReservoirParams(**bad)


def test_noise_validated():
    with pytest.raises(ValueError):
        NoiseConfig(lambda_pump=-1)


def test_tanh_position_is_spectral():
    T = tanh_position(12)
    X = build_ladder(12).X.real
    assert not T.flags.writeable
    n = np.arange(12)
    assert np.all(T[(n[:, None] + n[None, :]) % 2 == 0] == 0)
    np.testing.assert_allclose(T @ X, X @ T, atol=1e-12)
    w = np.linalg.eigvalsh(T)
    assert np.all(np.abs(w) < 1)


def test_classical_origin_is_fixed():
    assert np.all(propagate_classical(0j, np.zeros(30), ReservoirParams()) == 0)


def test_classical_linear_decay():
    p = ReservoirParams(K=0, kappa=0.2, drive_alpha=1.2)
    _, amps = propagate_classical(1.5 - 0.5j, np.zeros(50), p, return_amplitudes=True)
    t = 0.1 * np.arange(1, 51)
    np.testing.assert_allclose(np.abs(amps), abs(1.5 - 0.5j) * np.exp(-0.1 * t), rtol=1e-10)


def test_classical_fine_step_oracle():
    f = mackey_glass(t_max=299)
    coarse = propagate_classical(0.2j, f, ReservoirParams())
    fine = propagate_classical(0.2j, f, ReservoirParams(substeps=100))
    assert np.max(np.abs(coarse - fine) / np.maximum(np.abs(fine), 1e-3)) < 1e-6


def test_classical_divergence():
    p = ReservoirParams(K=0, kappa=0, drive_alpha=1e6)
    with pytest.raises(DivergenceError):
        propagate_classical(0j, np.ones(20), p)


def test_expectation_examples():
    lad = build_ladder(30)
    assert expectation(density_matrix(fock_state(4, 30)), lad.N) == 4
    alpha = 0.8 - 0.6j
    assert abs(expectation(density_matrix(coherent_state(alpha, 30)), lad.a) - alpha) < 1e-12
    rho = density_matrix(haar_random_state(7, 30, 0))
    assert expectation(rho, np.eye(30)) == pytest.approx(1, abs=1e-14)
    assert abs(expectation(rho, lad.X).imag) < 1e-10
    with pytest.raises(ValueError):
        expectation(rho, np.eye(3))


def test_trajectory_csv_and_snapshots(tmp_path):
    rho0 = density_matrix(fock_state(2, 6))
    traj = propagate_quantum(rho0, np.linspace(0, 1, 5), ReservoirParams(d_t=6), keep_snapshots=True)
    write_trajectory_csv(tmp_path / "traj.csv", traj, 0.1)
    rows = list(csv.reader(open(tmp_path / "traj.csv")))
    assert rows[0] == ["step", "t", "s", "trace", "top3_population"]
    assert len(rows) == 6 and float(rows[1][1]) == pytest.approx(0.1)
    names = write_snapshots(tmp_path / "snaps", traj.snapshots)
    assert len(names) == 5
    data = np.loadtxt(tmp_path / "snaps" / names[-1], delimiter=",", skiprows=1)
    back = np.zeros((6, 6), complex)
    back[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    assert np.array_equal(back, traj.snapshots[-1])

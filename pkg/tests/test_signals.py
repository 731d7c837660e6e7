import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kerrqrc.signals import (DivergenceError, InvalidConfigurationError, MGParams, RosslerParams,
                             TimeSeries, add_white_noise, mackey_glass, periodic_signal, rossler)


def mg_method_of_steps(params, history, t_end):
    """Independent oracle: solve_ivp on successive delay intervals with dense interpolants."""
    tau = params.tau
    pieces = []

    def delayed(t):
        if t <= 0:
            return history
        for a, b, sol in pieces:
            if a <= t <= b:
                return sol(t)[0]
        raise AssertionError("delay lookup outside integrated range")

    def rhs(t, x):
        xd = delayed(t - tau)
        return [params.beta * xd / (1 + xd ** params.m) - params.gamma * x[0]]

    x0, a = history, 0.0
    while a < t_end:
        b = min(a + tau, t_end)
        sol = solve_ivp(rhs, (a, b), [x0], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        pieces.append((a, b, sol.sol))
        x0, a = sol.y[0, -1], b
    return np.array([delayed(t) for t in np.arange(1, int(t_end) + 1)])


def test_mg_fixed_point():
    s = mackey_glass(history_value=1.0, burn_in=100, t_max=200)
    np.testing.assert_allclose(s.samples, 1.0, atol=1e-13)


def test_mg_linear_decay():
    s = mackey_glass(MGParams(beta=0.0, gamma=0.1), history_value=2.0, burn_in=0, t_max=50)
    np.testing.assert_allclose(s.samples, 2 * np.exp(-0.1 * s.times), rtol=1e-9)


def test_mg_matches_method_of_steps_oracle():
    p = MGParams()
    ours = mackey_glass(p, 1.2, burn_in=0, t_max=200).samples[1:]
    ref = mg_method_of_steps(p, 1.2, 200.0)
    assert np.max(np.abs(ours - ref) / np.abs(ref)) < 1e-7


def test_mg_matches_fine_step_reference():
    coarse = mackey_glass(t_max=499).samples
    fine = mackey_glass(t_max=499, step=0.001).samples
    assert coarse.size == 500
    assert np.max(np.abs(coarse - fine) / np.abs(fine)) < 1e-4


def test_mg_step_halving_and_bounds():
    a = mackey_glass(t_max=1000).samples
    b = mackey_glass(t_max=1000, step=0.005).samples
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-5
    assert a.min() > 0 and a.max() < 2


def test_mg_sampling_grid():
    s = mackey_glass(t_max=10, sample_spacing=0.5)
    assert len(s) == 21
    assert s.dt_sample == 0.5 and s.t0 == 0.0


def test_mg_step_larger_than_delay():
    with pytest.raises(InvalidConfigurationError):
        mackey_glass(MGParams(tau=0.5), step=1.0, sample_spacing=1.0)


@pytest.mark.parametrize("bad", [dict(beta=-1), dict(gamma=0), dict(m=0), dict(tau=0)])
def test_mg_params_validated(bad):
    with pytest.raises(InvalidConfigurationError):
        MGParams(**bad)


def test_rossler_z_stays_zero():
    x, y, z = rossler(RosslerParams(0.2, 0.0, 5.7), (1.0, 0.5, 0.0), t_max=100)
    assert np.all(z.samples == 0)


def test_rossler_harmonic_rotation():
    x, y, z = rossler(RosslerParams(0, 0, 0), (1.0, 0.0, 0.0), t_max=20, sample_spacing=0.1)
    t = x.times
    np.testing.assert_allclose(x.samples, np.cos(t), atol=1e-9)
    np.testing.assert_allclose(y.samples, np.sin(t), atol=1e-9)
    assert np.all(z.samples == 0)


def test_rossler_fine_step_oracle_and_bounded():
    p = RosslerParams()
    x, y, z = rossler(p, (0, 1, 0), t_max=500)
    assert np.max(np.abs(x.samples)) < 20

    def flow(t, v):
        return [-v[1] - v[2], v[0] + p.a * v[1], p.b + v[2] * (v[0] - p.c)]

    t = x.times[x.times <= 50]
    ref = solve_ivp(flow, (0, 50), [0, 1, 0], t_eval=t, method="DOP853", rtol=1e-12, atol=1e-12).y
    ours = np.vstack([x.samples[:t.size], y.samples[:t.size], z.samples[:t.size]])
    for k in range(3):
        assert np.max(np.abs(ours[k] - ref[k])) / np.max(np.abs(ref[k])) < 1e-3


def test_rossler_divergence_names_time():
    with pytest.raises(DivergenceError, match="t ="):
        rossler(RosslerParams(0.2, 0.2, -5.7), (0, 1, 0), t_max=200)


def test_sine_quarter_periods():
    s = periodic_signal("sine", period=4, amplitude=1, t_max=8)
    np.testing.assert_allclose(s.samples, [0, 1, 0, -1, 0, 1, 0, -1, 0], atol=1e-15)


def test_sawtooth_ramp():
    s = periodic_signal("sawtooth", period=10, amplitude=2, t_max=20)
    one = s.samples[:10]
    assert np.allclose(np.diff(one), 0.4)
    assert one[0] == -2
    # jump back down at the period boundary
    assert s.samples[10] == -2 and s.samples[9] > 1.5


@pytest.mark.parametrize("kind", ["sine", "sawtooth"])
def test_periodic_amplitude(kind):
    s = periodic_signal(kind, period=8, amplitude=3.5, t_max=64)
    assert np.max(np.abs(s.samples)) == pytest.approx(3.5, abs=1e-12)


def test_periodic_errors():
    with pytest.raises(InvalidConfigurationError):
        periodic_signal("square", 4)
    with pytest.raises(InvalidConfigurationError):
        periodic_signal("sine", 0)


def test_white_noise():
    base = TimeSeries(np.zeros(100_000))
    assert np.array_equal(add_white_noise(base, 0.0, 1).samples, base.samples)
    a = add_white_noise(base, 1.0, 7)
    assert abs(a.samples.var() - 1) < 0.03
    assert np.array_equal(a.samples, add_white_noise(base, 1.0, 7).samples)
    assert not np.array_equal(a.samples, add_white_noise(base, 1.0, 8).samples)


def test_timeseries_csv_round_trip(tmp_path):
    s = mackey_glass(t_max=30, sample_spacing=0.5)
    s.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("t,value\n")
    back = TimeSeries.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.samples, s.samples)
    assert back.dt_sample == 0.5 and back.t0 == 0


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        TimeSeries(np.ones(3), dt_sample=0)
    s = TimeSeries(np.arange(10.0), 0.5, 1.0)
    sub = s.slice(2, 5)
    assert sub.t0 == 2.0 and np.array_equal(sub.samples, [2, 3, 4])

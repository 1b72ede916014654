import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from spinmetro import AcquisitionGrid, PowerLaw, SignalParams, SpinSystem, Strategy, beta_rate
from spinmetro.signal import SignalTrace, add_noise, ideal_classical, ideal_quantum, ideal_trace

GRID = AcquisitionGrid(0.01, 300, 0.4)


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def test_first_sample_is_amplitude():
    tr = ideal_classical(SignalParams(2.5, 0, 3.0), SpinSystem(), GRID)
    assert tr.values[0] == 2.5


def test_zero_frequency_is_real_decay():
    tr = ideal_classical(SignalParams(1.0, 0, 0.0), SpinSystem(t2_star=0.5), GRID)
    assert np.all(tr.values.imag == 0)
    np.testing.assert_allclose(tr.values.real, np.exp(-2.0 * GRID.times), rtol=1e-15)


def test_quantum_reduces_to_classical():
    params = SignalParams(1.3, 0, 7.0)
    grid = AcquisitionGrid(0.01, 100, 0.0)
    q = ideal_quantum(params, SpinSystem(1), grid)
    c = ideal_classical(params, SpinSystem(1), grid)
    np.testing.assert_allclose(q.values, c.values, rtol=0, atol=1e-14)


def test_quantum_without_precession():
    sys = SpinSystem(6, decoherence=PowerLaw(0.5))
    tr = ideal_quantum(SignalParams(1.0, 0, 0.0), sys, GRID)
    env = math.exp(beta_rate(sys) * GRID.t_wait) * np.exp(sys.alpha * GRID.times)
    np.testing.assert_allclose(tr.values, env, rtol=1e-14)


def test_ghz_phase_and_amplitude_k5():
    sys = SpinSystem(5, decoherence=PowerLaw(0.5))
    grid = AcquisitionGrid(0.01, 50, 1.0)
    delta = 2 * math.pi
    tr = ideal_quantum(SignalParams(1.0, 0, delta), sys, grid)
    assert _wrap(cmath.phase(tr.values[0]) - 5 * delta * 1.0) == pytest.approx(0, abs=1e-12)
    assert abs(tr.values[0]) == pytest.approx(math.exp(-(5**0.5)), rel=1e-14)


@given(
    k=st.integers(1, 20),
    p=st.floats(0, 2),
    tw=st.floats(0, 3),
    delta=st.floats(-50, 50),
    t2=st.floats(0.1, 10),
    kind=st.sampled_from(list(Strategy)),
)
def test_envelope_and_phase_laws(k, p, tw, delta, t2, kind):
    sys = SpinSystem(k, t2_star=t2, decoherence=PowerLaw(p))
    grid = AcquisitionGrid(0.01, 64, tw)
    # keep the whole trace clear of floating-point underflow
    assume(beta_rate(sys) * tw + sys.alpha * grid.readout_length > -600)
    tr = ideal_trace(kind, SignalParams(1.0, 0, delta), sys, grid)
    mag = np.abs(tr.values)
    np.testing.assert_allclose(mag / mag[0], np.exp(sys.alpha * grid.times), rtol=1e-12)
    assert np.all(np.diff(mag) <= 0)
    if kind is Strategy.QUANTUM:
        assert _wrap(cmath.phase(tr.values[0]) - k * delta * tw) == pytest.approx(0, abs=1e-9)


def test_noise_identity_at_zero_sigma():
    tr = ideal_classical(SignalParams(1, 0, 1), SpinSystem(), GRID)
    noisy = add_noise(tr, 0.0, 7)
    assert noisy.is_noisy
    np.testing.assert_array_equal(noisy.values, tr.values)


def test_noise_is_deterministic():
    tr = ideal_classical(SignalParams(1, 0, 1), SpinSystem(), GRID)
    a, b = add_noise(tr, 0.05, 99), add_noise(tr, 0.05, 99)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, add_noise(tr, 0.05, 100).values)


def test_noise_variance():
    grid = AcquisitionGrid(1e-3, 100_000)
    tr = ideal_classical(SignalParams(1, 0, 0), SpinSystem(), grid)
    resid = add_noise(tr, 0.05, 2024).values - tr.values
    for part in (resid.real, resid.imag):
        assert np.var(part) == pytest.approx(0.05**2, rel=0.02)
    assert abs(np.corrcoef(resid.real, resid.imag)[0, 1]) < 0.02


def test_noise_rejects_double_application():
    tr = add_noise(ideal_classical(SignalParams(), SpinSystem(), GRID), 0.1, 1)
    with pytest.raises(ValueError):
        add_noise(tr, 0.1, 2)
    with pytest.raises(ValueError):
        add_noise(ideal_classical(SignalParams(), SpinSystem(), GRID), -1.0, 1)


def test_trace_validation():
    with pytest.raises(ValueError):
        SignalTrace([0.0, 1.0, 3.0], [0, 0, 0], "classical")
    with pytest.raises(ValueError):
        SignalTrace([0.0, 0.0], [0, 0], "classical")
    with pytest.raises(ValueError):
        SignalTrace([0.0, 1.0], [0], "classical")
    tr = ideal_classical(SignalParams(), SpinSystem(), GRID)
    with pytest.raises(ValueError):
        tr.values[0] = 3


def test_csv_round_trip(tmp_path):
    sys = SpinSystem(4, decoherence=PowerLaw(0.3))
    tr = add_noise(ideal_quantum(SignalParams(1.0, 0, 3.3), sys, GRID), 0.05, 5)
    text = tr.to_csv(tmp_path / "t.csv", ["provenance line"])
    lines = text.splitlines()
    assert lines[:3] == ["# provenance line", "# kind=quantum", "m,t,re,im"]
    assert len(lines) == 3 + GRID.n_samples
    back = SignalTrace.from_csv(tmp_path / "t.csv", is_noisy=True)
    assert back.kind is Strategy.QUANTUM
    np.testing.assert_array_equal(back.values, tr.values)
    np.testing.assert_array_equal(back.times, tr.times)
    assert SignalTrace.from_csv(text).values.tobytes() == tr.values.tobytes()


def test_csv_digits():
    tr = ideal_classical(SignalParams(1.0, 0, 1 / 3), SpinSystem(), AcquisitionGrid(1 / 7, 3))
    row = tr.to_csv().splitlines()[-1].split(",")
    assert len(row[2].lstrip("-0.").replace("e", "")) >= 15


def test_csv_bad_header():
    with pytest.raises(ValueError):
        SignalTrace.from_csv("m,time,re,im\n0,0,1,0\n1,1,1,0\n")

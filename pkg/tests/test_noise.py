import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipflop.noise import (
    NoiseSpec,
    NoiseTrace,
    central_band,
    ensemble_psd,
    estimate_psd,
    generate_noise,
    loglog_slope,
    write_csv,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, n_samples=7)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, dt=0.0)
    assert NoiseSpec(1.0, dt=2e-12).t0 == 2e-12


def test_zero_amplitude_is_silent():
    tr = generate_noise(NoiseSpec(0.0, 1024))
    assert not np.any(tr.samples)


def test_deterministic_per_seed():
    a = generate_noise(NoiseSpec(3.0, 4096, seed=11))
    b = generate_noise(NoiseSpec(3.0, 4096, seed=11))
    c = generate_noise(NoiseSpec(3.0, 4096, seed=12))
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


@given(st.floats(0.0, 1e3), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_alpha_linearity_is_exact(lam, seed):
    unit = generate_noise(NoiseSpec(1.0, 512, seed=seed))
    scaled = generate_noise(NoiseSpec(lam, 512, seed=seed))
    assert np.array_equal(scaled.samples, lam * unit.samples)
    assert np.array_equal(unit.scaled(lam).samples, scaled.samples)


def test_traces_are_real_and_centred():
    for seed in range(20):
        tr = generate_noise(NoiseSpec(5.0, 2**12, seed=seed))
        assert tr.samples.dtype == np.float64 and np.all(np.isfinite(tr.samples))
        assert len(tr.samples) == 2**12
        rms = np.sqrt(np.mean(tr.samples**2))
        # DC bin is zero, so the sample mean vanishes to rounding
        assert abs(tr.samples.mean()) <= 3 * rms / np.sqrt(2**12)


def test_spectrum_is_hermitian_before_inversion():
    # a full complex inverse transform of the symmetric spectrum has no imaginary part
    from flipflop.noise import _unit_spectrum

    spec = NoiseSpec(1.0, 1024, seed=3)
    half = _unit_spectrum(spec, np.random.default_rng(3))
    full = np.concatenate([half, np.conj(half[-2:0:-1])])
    x = np.fft.ifft(full)
    assert np.abs(x.imag).max() <= 1e-10 * np.sqrt(np.mean(x.real**2))
    assert half[0] == 0 and half[-1].imag == 0


def test_sample_and_hold():
    tr = NoiseTrace(np.arange(4.0), NoiseSpec(1.0, 4, dt=1.0))
    assert list(tr.sample([0.0, 0.5, 1.0, 3.99])) == [0, 0, 1, 3]
    with pytest.raises(ValueError):
        tr.sample(4.0)
    with pytest.raises(ValueError):
        tr.sample(-0.1)


def test_white_noise_is_flat():
    x = np.random.default_rng(0).standard_normal(2**16)
    f, p = estimate_psd(x, n_segments=64, dt=1e-11)
    assert abs(loglog_slope(f, p, central_band(f, 2))) <= 0.1


def test_sinusoid_gives_one_dominant_bin():
    dt, n = 1e-11, 4096
    f0 = 100 / (n * dt)
    x = np.sin(2 * np.pi * f0 * np.arange(n) * dt)
    f, p = estimate_psd(x, dt=dt)
    assert f[np.argmax(p)] == pytest.approx(f0)
    assert np.sort(p)[-2] < 1e-20 * p.max()


def test_psd_has_no_dc_and_validates_segments():
    tr = generate_noise(NoiseSpec(1.0, 1024))
    f, _ = estimate_psd(tr, 4)
    assert f[0] > 0
    with pytest.raises(ValueError):
        estimate_psd(tr, 1024)
    with pytest.raises(ValueError):
        estimate_psd(tr.samples)


def test_psd_slope_minus_one():
    f, p = ensemble_psd(NoiseSpec(100.0, 2**16, 1e-11, seed=0), n_seeds=50)
    assert loglog_slope(f, p, central_band(f, 2)) == pytest.approx(-1.0, abs=0.1)


def test_psd_level_matches_model():
    # orthonormal bins X_k with E|X_k|² = 1/(ω t0) give a one-sided
    # periodogram 2 α² dt E|X_k|²
    spec = NoiseSpec(2.0, 2**14, 1e-11, seed=5)
    f, p = ensemble_psd(spec, n_seeds=200)
    model = 2 * spec.alpha**2 * spec.dt / (2 * np.pi * f * spec.t0)
    lo, hi = central_band(f, 2)
    band = (f >= lo) & (f <= hi)
    assert np.mean(p[band] / model[band]) == pytest.approx(1.0, rel=0.05)


def test_csv_is_bit_stable(tmp_path):
    tr = generate_noise(NoiseSpec(1.0, 64, seed=9))
    tr.to_csv(tmp_path / "a.csv")
    tr.to_csv(tmp_path / "b.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    lines = a.decode().split("\n")
    assert lines[0] == "time_s,value_V_per_m"
    assert "\r" not in a.decode()
    back = np.loadtxt(tmp_path / "a.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 1], tr.samples)
    write_csv(tmp_path / "c.csv", ["k"], [np.array([1, 2])])
    assert (tmp_path / "c.csv").read_text() == "k\n1\n2\n"

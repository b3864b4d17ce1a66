import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bearingleak import dsp


@given(
    n=st.integers(100, 5000),
    window=st.integers(1, 100),
    overlap=st.sampled_from([0.0, 0.25, 0.5, 0.75]),
)
def test_segment_count_and_offsets(n, window, overlap):
    segs = dsp.segment_signal(np.arange(n, dtype=float), 1.0, window, overlap, "a", offset=7)
    hop = max(1, round(window * (1 - overlap)))
    assert len(segs) == (n - window) // hop + 1
    for s in segs:
        assert len(s) == window
        assert s.samples[0] == s.start_sample - 7


def test_segment_rejects_long_window():
    with pytest.raises(ValueError):
        dsp.segment_signal(np.zeros(10), 1.0, 11)


@settings(max_examples=50)
@given(n=st.integers(2, 4096), seed=st.integers(0, 2**32 - 1))
def test_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    spec = dsp.fft_magnitude(dsp.Segment(x, 1000.0))
    assert dsp.one_sided_energy(spec, n) == pytest.approx(np.sum(x**2), rel=1e-9)


def test_fft_bin_width():
    spec = dsp.fft_magnitude(dsp.Segment(np.zeros(2000), 4000.0))
    assert spec.bin_width_hz == 2.0
    assert spec.max_frequency == 2000.0


def test_pure_tone_peak():
    fs, f = 1000.0, 50.0
    t = np.arange(1000) / fs
    spec = dsp.fft_magnitude(dsp.Segment(np.sin(2 * np.pi * f * t), fs))
    assert spec.peak_frequency() == f


def test_bandpass_attenuates_out_of_band():
    fs = 10_000.0
    t = np.arange(10_000) / fs
    x = np.sin(2 * np.pi * 50 * t) + np.sin(2 * np.pi * 2000 * t)
    y = dsp.bandpass(x, fs, 1000, 3000)
    spec = dsp.fft_magnitude(dsp.Segment(y, fs)).magnitudes
    assert spec[50] < 1e-3 * spec[2000]


def test_bandpass_at_nyquist_is_highpass_and_above_rejected():
    x = np.random.default_rng(0).normal(size=2000)
    dsp.bandpass(x, 2000.0, 100, 1000)
    with pytest.raises(ValueError):
        dsp.bandpass(x, 2000.0, 100, 1001)


def test_envelope_recovers_modulation_frequency():
    fs = 12_000.0
    t = np.arange(12_000) / fs
    x = (1 + 0.8 * np.cos(2 * np.pi * 37 * t)) * np.sin(2 * np.pi * 3000 * t)
    spec = dsp.envelope_spectrum(dsp.Segment(x, fs), 1000, 5000)
    assert spec.peak_frequency() == 37.0
    assert spec.kind == "envelope"


def test_synth_impulse_timing_and_validation():
    x = dsp.synth_bearing_signal(10.0, 500.0, 5000.0, 1.0)
    assert x.size == 5000
    onsets = np.nonzero((np.abs(x[1:]) > 0) & (x[:-1] == 0))[0] + 1
    assert onsets[0] <= 1
    with pytest.raises(ValueError):
        dsp.synth_bearing_signal(10.0, 3000.0, 5000.0, 1.0)
    with pytest.raises(ValueError):
        dsp.synth_bearing_signal(10.0, 500.0, 5000.0, 1.0, noise_std=0.1)


def test_random_crop_and_gain_are_seeded():
    x = np.arange(100.0)
    a = dsp.random_crop(x, 10, np.random.default_rng(3))
    b = dsp.random_crop(x, 10, np.random.default_rng(3))
    assert a.start_sample == b.start_sample
    assert np.array_equal(a.samples, x[a.start_sample:a.start_sample + 10])
    g = dsp.random_gain(x, 1.0, 0.0, np.random.default_rng(0))
    assert np.array_equal(g, x)
    with pytest.raises(ValueError):
        dsp.random_gain(x, 1.0, -1.0, np.random.default_rng(0))

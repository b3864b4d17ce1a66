"""Segmentation, spectra, envelope analysis and training-time augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True, eq=False)
class Segment:
    samples: np.ndarray
    sampling_rate_hz: float
    parent_acquisition: str = ""
    start_sample: int = 0

    def __post_init__(self) -> None:
        if self.samples.size == 0:
            raise ValueError("segment must not be empty")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def stop_sample(self) -> int:
        return self.start_sample + self.samples.size


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: np.ndarray
    bin_width_hz: float
    kind: str = "raw_fft"

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.magnitudes.size) * self.bin_width_hz

    @property
    def max_frequency(self) -> float:
        return (self.magnitudes.size - 1) * self.bin_width_hz

    def peak_frequency(self, skip_dc: bool = True) -> float:
        start = 1 if skip_dc else 0
        return float((np.argmax(self.magnitudes[start:]) + start) * self.bin_width_hz)


def segment_signal(
    signal: np.ndarray,
    sampling_rate: float,
    window_len: int,
    overlap: float = 0.0,
    parent: str = "",
    offset: int = 0,
) -> list[Segment]:
    """Tile ``signal`` from sample 0 with windows of ``window_len`` samples.

    The hop is ``round(window_len * (1 - overlap))``; a trailing partial window
    is dropped. ``offset`` is added to ``start_sample`` when ``signal`` is itself
    a slice of a longer parent recording.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    if window_len < 1:
        raise ValueError("window_len must be positive")
    if window_len > signal.size:
        raise ValueError(f"window of {window_len} samples is longer than signal ({signal.size})")
    hop = max(1, int(round(window_len * (1 - overlap))))
    n = (signal.size - window_len) // hop + 1
    return [
        Segment(signal[i * hop : i * hop + window_len], sampling_rate, parent, offset + i * hop)
        for i in range(n)
    ]


def fft_magnitude(segment: Segment) -> Spectrum:
    """One-sided, unnormalised magnitude spectrum ``|rfft(x)|``."""
    x = segment.samples
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    return Spectrum(np.abs(np.fft.rfft(x)), segment.sampling_rate_hz / x.size, "raw_fft")


def one_sided_energy(spectrum: Spectrum, n: int) -> float:
    """Time-domain energy sum(x**2) recovered from a one-sided ``|rfft|`` spectrum of an n-sample input."""
    m2 = spectrum.magnitudes**2
    weights = np.full(m2.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return float(np.dot(weights, m2) / n)


def bandpass(x: np.ndarray, sampling_rate: float, low_hz: float, high_hz: float, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass (forward-backward).

    When ``high_hz`` reaches Nyquist the design degrades to a high-pass at ``low_hz``.
    """
    nyquist = sampling_rate / 2
    if not 0 < low_hz < high_hz:
        raise ValueError(f"need 0 < low < high, got ({low_hz}, {high_hz})")
    if high_hz > nyquist:
        raise ValueError(f"band upper edge {high_hz} Hz exceeds Nyquist ({nyquist} Hz)")
    if high_hz >= nyquist:
        sos = sps.butter(order, low_hz, btype="highpass", fs=sampling_rate, output="sos")
    else:
        sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=sampling_rate, output="sos")
    return sps.sosfiltfilt(sos, x)


def envelope(x: np.ndarray) -> np.ndarray:
    return np.abs(sps.hilbert(x))


def envelope_spectrum(segment: Segment, band_low_hz: float, band_high_hz: float) -> Spectrum:
    """Band-pass, Hilbert envelope, mean removal, one-sided FFT magnitude."""
    fs = segment.sampling_rate_hz
    filtered = bandpass(segment.samples, fs, band_low_hz, band_high_hz)
    env = envelope(filtered)
    env = env - env.mean()
    return Spectrum(np.abs(np.fft.rfft(env)), fs / env.size, "envelope")


def random_crop(
    signal: np.ndarray,
    crop_len: int,
    rng: np.random.Generator,
    sampling_rate: float = 1.0,
    parent: str = "",
) -> Segment:
    signal = np.asarray(signal, dtype=np.float64)
    if crop_len > signal.size:
        raise ValueError(f"crop of {crop_len} samples is longer than signal ({signal.size})")
    start = int(rng.integers(0, signal.size - crop_len + 1))
    return Segment(signal[start : start + crop_len], sampling_rate, parent, start)


def random_gain(signal: np.ndarray, mu: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return float(rng.normal(mu, sigma)) * np.asarray(signal, dtype=np.float64)


# Random Gain sigma defaults by input representation.
GAIN_SIGMA_TIME = 0.7
GAIN_SIGMA_FREQUENCY = 0.3


def synth_bearing_signal(
    fault_freq_hz: float,
    resonance_hz: float,
    sampling_rate: float,
    duration_s: float,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
    damping_ratio: float = 0.05,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Impulse train at ``fault_freq_hz`` exciting a damped resonance, plus white noise.

    Each impact rings as ``amplitude * exp(-zeta*w*t) * sin(w*t)`` with
    ``w = 2*pi*resonance_hz``, evaluated at the exact (sub-sample) impact time.
    """
    if not 0 < fault_freq_hz < resonance_hz < sampling_rate / 2:
        raise ValueError("need 0 < fault_freq < resonance < Nyquist")
    n = int(round(sampling_rate * duration_s))
    t = np.arange(n) / sampling_rate
    omega = 2 * np.pi * resonance_hz
    decay = damping_ratio * omega
    ring = int(np.ceil(8.0 / decay * sampling_rate))  # exp(-8) ~ 3e-4
    x = np.zeros(n)
    for t0 in np.arange(0.0, duration_s, 1.0 / fault_freq_hz):
        i0 = int(np.ceil(t0 * sampling_rate))
        i1 = min(n, i0 + ring)
        if i0 >= n:
            break
        tau = t[i0:i1] - t0
        x[i0:i1] += amplitude * np.exp(-decay * tau) * np.sin(omega * tau)
    if noise_std > 0:
        if rng is None:
            raise ValueError("rng required when noise_std > 0")
        x += rng.normal(0.0, noise_std, n)
    return x

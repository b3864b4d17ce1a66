"""Handcrafted time-domain and envelope-spectrum features per 1-second segment."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from . import dsp
from .datamodel import AcquisitionRecord, BearingGeometry, LabelVector, Manifest

TIME_COLUMNS = ("rms", "peak_to_peak", "kurtosis", "skewness", "crest_factor")
FAULT_FREQUENCY_NAMES = ("bpfo", "bpfi", "bsf", "ftf")
N_HARMONICS = 5
HARMONIC_COLUMNS = tuple(
    f"{name}_{k}x" for name in FAULT_FREQUENCY_NAMES for k in range(1, N_HARMONICS + 1)
)
FEATURE_COLUMNS = TIME_COLUMNS + HARMONIC_COLUMNS

# Column subsets selected by each input representation.
REPRESENTATION_COLUMNS: dict[str, tuple[str, ...]] = {
    "time_features": TIME_COLUMNS,
    "envelope_features": HARMONIC_COLUMNS,
    "frequency_features": HARMONIC_COLUMNS,
    "combined": FEATURE_COLUMNS,
}


class TimeFeatures(NamedTuple):
    rms: float
    peak_to_peak: float
    kurtosis: float
    skewness: float
    crest_factor: float


def time_domain_features(segment: dsp.Segment | np.ndarray) -> TimeFeatures:
    """RMS, peak-to-peak, kurtosis (non-excess), skewness and crest factor (max|x| / rms).

    Kurtosis and skewness are NaN for a zero-variance segment.
    """
    x = segment.samples if isinstance(segment, dsp.Segment) else np.asarray(segment, dtype=np.float64)
    if x.size < 4:
        raise ValueError("segment needs at least 4 samples")
    rms = math.sqrt(float(np.mean(x * x)))
    p2p = float(x.max() - x.min())
    centred = x - x.mean()
    var = float(np.mean(centred**2))
    if p2p == 0 or var == 0:
        kurt = skew = float("nan")
    else:
        kurt = float(np.mean(centred**4) / var**2)
        skew = float(np.mean(centred**3) / var**1.5)
    crest = float(np.max(np.abs(x)) / rms) if rms > 0 else float("nan")
    return TimeFeatures(rms, p2p, kurt, skew, crest)


@dataclass(frozen=True)
class FaultFrequencies:
    bpfo_hz: float
    bpfi_hz: float
    bsf_hz: float
    ftf_hz: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.bpfo_hz, self.bpfi_hz, self.bsf_hz, self.ftf_hz)


def fault_frequencies(geometry: BearingGeometry, shaft_hz: float) -> FaultFrequencies:
    n = geometry.n_rolling_elements
    d, pd = geometry.ball_diameter, geometry.pitch_diameter
    r = d / pd * math.cos(geometry.contact_angle_rad)
    out = FaultFrequencies(
        bpfo_hz=n / 2 * shaft_hz * (1 - r),
        bpfi_hz=n / 2 * shaft_hz * (1 + r),
        bsf_hz=pd / (2 * d) * shaft_hz * (1 - r * r),
        ftf_hz=shaft_hz / 2 * (1 - r),
    )
    if not (out.ftf_hz < shaft_hz < out.bpfo_hz < out.bpfi_hz):
        warnings.warn(
            f"unusual fault-frequency ordering for {geometry}: {out}", RuntimeWarning, stacklevel=2
        )
    return out


class HarmonicMagnitudes(NamedTuple):
    magnitudes: np.ndarray  # (4, n_harmonics), rows follow FAULT_FREQUENCY_NAMES
    out_of_range: np.ndarray  # same shape, bool


def harmonic_magnitudes(
    spectrum: dsp.Spectrum,
    freqs: FaultFrequencies,
    n_harmonics: int = N_HARMONICS,
    tolerance_fraction: float = 0.02,
) -> HarmonicMagnitudes:
    """Peak magnitude within +/- tolerance_fraction * k*f (at least one bin) of every harmonic k*f."""
    mags = spectrum.magnitudes
    if mags.size == 0:
        raise ValueError("empty spectrum")
    bw = spectrum.bin_width_hz
    out = np.zeros((4, n_harmonics))
    flags = np.zeros((4, n_harmonics), dtype=bool)
    for i, f in enumerate(freqs.as_tuple()):
        for k in range(1, n_harmonics + 1):
            target = k * f
            if target > spectrum.max_frequency:
                flags[i, k - 1] = True
                continue
            half = max(tolerance_fraction * target / bw, 1.0)
            lo = max(0, int(math.floor(target / bw - half)))
            hi = min(mags.size - 1, int(math.ceil(target / bw + half)))
            out[i, k - 1] = mags[lo : hi + 1].max()
    return HarmonicMagnitudes(out, flags)


@dataclass(frozen=True)
class FeatureRow:
    time_features: TimeFeatures
    harmonic_magnitudes: tuple[float, ...]
    label: LabelVector
    provenance: tuple[str, int]  # (acquisition_id, segment start sample)

    @property
    def vector(self) -> np.ndarray:
        return np.array(tuple(self.time_features) + tuple(self.harmonic_magnitudes))


def segment_features(
    segment: dsp.Segment,
    freqs: FaultFrequencies,
    band: tuple[float, float],
    harmonic_source: str = "envelope",
    tolerance_fraction: float = 0.02,
) -> np.ndarray:
    """Full FEATURE_COLUMNS vector for one segment."""
    if harmonic_source == "envelope":
        spec = dsp.envelope_spectrum(segment, *band)
    elif harmonic_source == "fft":
        spec = dsp.fft_magnitude(segment)
    else:
        raise ValueError(f"unknown harmonic source {harmonic_source!r}")
    harm = harmonic_magnitudes(spec, freqs, tolerance_fraction=tolerance_fraction)
    return np.concatenate([np.array(time_domain_features(segment)), harm.magnitudes.ravel()])


@dataclass
class FeatureTable:
    """Feature matrix with aligned labels and (acquisition_id, start_sample) provenance."""

    X: np.ndarray
    Y: np.ndarray
    provenance: list[tuple[str, int]]
    columns: tuple[str, ...] = FEATURE_COLUMNS

    def __len__(self) -> int:
        return self.X.shape[0]

    def select(self, columns: Sequence[str]) -> "FeatureTable":
        idx = [self.columns.index(c) for c in columns]
        return FeatureTable(self.X[:, idx], self.Y, self.provenance, tuple(columns))

    def rows(self) -> list[FeatureRow]:
        n_time = len(TIME_COLUMNS)
        return [
            FeatureRow(
                TimeFeatures(*self.X[i, :n_time]),
                tuple(self.X[i, n_time:]),
                LabelVector(tuple(int(b) for b in self.Y[i])),
                self.provenance[i],
            )
            for i in range(len(self))
        ]

    @classmethod
    def empty(cls, n_modes: int, columns: tuple[str, ...] = FEATURE_COLUMNS) -> "FeatureTable":
        return cls(np.zeros((0, len(columns))), np.zeros((0, n_modes), dtype=int), [], columns)

    @classmethod
    def concat(cls, tables: Sequence["FeatureTable"]) -> "FeatureTable":
        return cls(
            np.vstack([t.X for t in tables]),
            np.vstack([t.Y for t in tables]),
            [p for t in tables for p in t.provenance],
            tables[0].columns,
        )


class FeatureExtractionError(RuntimeError):
    def __init__(self, problems: dict[str, str]):
        self.problems = problems
        lines = "; ".join(f"{k}: {v}" for k, v in sorted(problems.items()))
        super().__init__(f"feature extraction failed for {len(problems)} record(s): {lines}")


@dataclass
class FeatureExtractor:
    """Computes and memoises per-segment features of manifest signals.

    Rows are keyed by ``(acquisition_id, start_sample)`` so plans that tile the
    same windows (whole-signal or segment-range plans) share work.
    """

    manifest: Manifest
    band: tuple[float, float]
    window_s: float = 1.0
    harmonic_source: str = "envelope"
    tolerance_fraction: float = 0.02
    loader: Callable[[AcquisitionRecord], np.ndarray] | None = None
    _cache: dict[tuple[str, int], np.ndarray] = field(default_factory=dict, repr=False)
    _signals: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def _signal(self, rec: AcquisitionRecord) -> np.ndarray:
        if rec.acquisition_id not in self._signals:
            load = self.loader or self.manifest.load_signal
            self._signals[rec.acquisition_id] = load(rec)
        return self._signals[rec.acquisition_id]

    def check(self, rec: AcquisitionRecord) -> str | None:
        missing = [name for name in ("geometry", "rpm") if getattr(rec, name) is None]
        return f"missing {', '.join(missing)}" if missing else None

    def window_len(self, rec: AcquisitionRecord) -> int:
        return int(round(self.window_s * rec.sampling_rate_hz))

    def record_rows(
        self, rec: AcquisitionRecord, start: int | None = None, stop: int | None = None
    ) -> FeatureTable:
        """Rows for non-overlapping windows tiling ``[start, stop)`` of one record (whole signal by default)."""
        problem = self.check(rec)
        if problem:
            raise FeatureExtractionError({rec.acquisition_id: problem})
        x = self._signal(rec)
        start = 0 if start is None else start
        stop = x.size if stop is None else min(stop, x.size)
        window = self.window_len(rec)
        if stop - start < window:
            return FeatureTable.empty(len(rec.label))
        freqs = fault_frequencies(rec.geometry, rec.rpm / 60.0)
        segments = dsp.segment_signal(
            x[start:stop], rec.sampling_rate_hz, window, 0.0, rec.acquisition_id, offset=start
        )
        X = []
        for seg in segments:
            key = (rec.acquisition_id, seg.start_sample)
            if key not in self._cache:
                self._cache[key] = segment_features(
                    seg, freqs, self.band, self.harmonic_source, self.tolerance_fraction
                )
            X.append(self._cache[key])
        Y = np.tile(np.array(rec.label.bits, dtype=int), (len(segments), 1))
        return FeatureTable(np.array(X), Y, [(rec.acquisition_id, s.start_sample) for s in segments])

    def augmented_rows(
        self,
        records: Sequence[AcquisitionRecord],
        n_rows: int,
        rng: np.random.Generator,
        gain_sigma: float = dsp.GAIN_SIGMA_TIME,
    ) -> FeatureTable:
        """Random Crop + Random Gain rows drawn uniformly over ``records`` (not cached)."""
        X, Y, prov = [], [], []
        for _ in range(n_rows):
            rec = records[int(rng.integers(len(records)))]
            x = self._signal(rec)
            seg = dsp.random_crop(x, self.window_len(rec), rng, rec.sampling_rate_hz, rec.acquisition_id)
            seg = dsp.Segment(
                dsp.random_gain(seg.samples, 1.0, gain_sigma, rng),
                seg.sampling_rate_hz,
                seg.parent_acquisition,
                seg.start_sample,
            )
            freqs = fault_frequencies(rec.geometry, rec.rpm / 60.0)
            X.append(segment_features(seg, freqs, self.band, self.harmonic_source, self.tolerance_fraction))
            Y.append(rec.label.bits)
            prov.append((rec.acquisition_id, seg.start_sample))
        if not X:
            return FeatureTable.empty(self.manifest.profile.n_modes)
        return FeatureTable(np.array(X), np.array(Y, dtype=int), prov)


@dataclass
class TrainTestTables:
    train: FeatureTable
    test: FeatureTable
    errors: dict[str, str]


def extract_feature_table(
    manifest: Manifest,
    plan,
    band: tuple[float, float],
    extractor: FeatureExtractor | None = None,
    **extractor_kwargs,
) -> TrainTestTables:
    """Segment every plan item into 1 s windows and build train/test tables by plan role.

    Records lacking geometry or rpm are skipped and listed in ``errors``. Only
    per-segment quantities are computed here, so nothing is estimated across
    the train/test boundary.
    """
    ex = extractor or FeatureExtractor(manifest, band, **extractor_kwargs)
    by_id = manifest.by_id()
    errors: dict[str, str] = {}
    sides = {}
    for role, items in (("train", plan.train_items), ("test", plan.test_items)):
        parts = []
        for item in sorted(items, key=lambda it: it.key()):
            rec = by_id.get(item.acquisition_id)
            if rec is None:
                errors[item.acquisition_id] = "unknown acquisition"
                continue
            problem = ex.check(rec)
            if problem:
                errors[rec.acquisition_id] = problem
                continue
            parts.append(ex.record_rows(rec, item.start, item.stop))
        parts = [p for p in parts if len(p)]
        sides[role] = FeatureTable.concat(parts) if parts else FeatureTable.empty(manifest.profile.n_modes)
    return TrainTestTables(sides["train"], sides["test"], errors)


def write_feature_csv(table: FeatureTable, fh, role: str | None = None, header: bool = True,
                      fault_modes: Iterable[str] = ()) -> None:
    """CSV with columns: acquisition_id, start_sample, [role,] feature columns, label_<mode>..."""
    import csv

    modes = list(fault_modes) or [f"mode{i}" for i in range(table.Y.shape[1])]
    writer = csv.writer(fh, lineterminator="\n")
    lead = ["acquisition_id", "start_sample"] + (["role"] if role is not None else [])
    if header:
        writer.writerow(lead + list(table.columns) + [f"label_{m}" for m in modes])
    for i in range(len(table)):
        acq, start = table.provenance[i]
        row = [acq, start] + ([role] if role is not None else [])
        row += [repr(float(v)) for v in table.X[i]] + [int(b) for b in table.Y[i]]
        writer.writerow(row)

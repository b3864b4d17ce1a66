"""Synthetic datasets laid out like the three public benchmarks.

Signals are white noise plus a fault impulse train ringing a resonance. Each
bearing gets its own resonance frequency, noise level and fault strength, so
recordings carry a bearing signature that a model can memorise when the same
bearing shows up on both sides of a split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import (
    CWRU,
    PU,
    UORED,
    AcquisitionRecord,
    BearingGeometry,
    DatasetProfile,
    Manifest,
    Severity,
    write_manifest,
    write_signal,
)
from .features import fault_frequencies

# Which characteristic frequency each fault mode excites.
MODE_FREQUENCY = {"inner": "bpfi", "outer": "bpfo", "ball": "bsf", "cage": "ftf"}

GEOMETRY_6203 = BearingGeometry(8, 6.75, 28.5)
GEOMETRY_6205 = BearingGeometry(9, 7.94, 39.04)
GEOMETRY_6203_FE = BearingGeometry(8, 6.75, 28.5)


@dataclass(frozen=True)
class SignalConfig:
    sampling_rate_hz: float = 24_000.0
    duration_s: float = 10.0
    resonance_hz: float = 3_000.0
    resonance_jitter: float = 0.2  # relative half-width of the per-bearing resonance draw
    noise_sigma_log: float = 0.5  # log-std of the per-bearing noise level
    amplitude_range: tuple[float, float] = (0.15, 1.2)  # per-bearing fault strength, log-uniform
    weak_factor: float = 0.35
    gain_jitter: float = 0.05  # per-recording gain, relative std
    slip: float = 0.01  # relative std of the impact spacing
    damping_ratio: float = 0.05


@dataclass(frozen=True)
class _Bearing:
    resonance_hz: float
    noise_std: float
    amplitude: float


def _draw_bearing(cfg: SignalConfig, rng: np.random.Generator) -> _Bearing:
    lo, hi = cfg.amplitude_range
    return _Bearing(
        resonance_hz=cfg.resonance_hz * (1.0 + rng.uniform(-cfg.resonance_jitter, cfg.resonance_jitter)),
        noise_std=float(np.exp(rng.normal(0.0, cfg.noise_sigma_log))),
        amplitude=float(np.exp(rng.uniform(math.log(lo), math.log(hi)))),
    )


def _impulses(fault_hz: float, b: _Bearing, amplitude: float, cfg: SignalConfig, fs: float,
              duration: float, rng: np.random.Generator) -> np.ndarray:
    n = int(round(fs * duration))
    x = np.zeros(n)
    if amplitude == 0:
        return x
    omega = 2 * np.pi * b.resonance_hz
    decay = cfg.damping_ratio * omega
    ring = int(np.ceil(8.0 / decay * fs))
    tau_full = np.arange(ring) / fs
    t0 = rng.uniform(0, 1.0 / fault_hz)
    while t0 < duration:
        i0 = int(np.ceil(t0 * fs))
        if i0 >= n:
            break
        i1 = min(n, i0 + ring)
        tau = tau_full[: i1 - i0] + (i0 / fs - t0)
        x[i0:i1] += amplitude * np.exp(-decay * tau) * np.sin(omega * tau)
        t0 += (1.0 / fault_hz) * (1.0 + cfg.slip * rng.standard_normal())
    return x


def synth_recording(
    fault_hz: float | None,
    bearing: _Bearing,
    severity_factor: float,
    cfg: SignalConfig,
    rng: np.random.Generator,
    fs: float | None = None,
    duration: float | None = None,
) -> np.ndarray:
    fs = fs or cfg.sampling_rate_hz
    duration = duration or cfg.duration_s
    n = int(round(fs * duration))
    x = bearing.noise_std * rng.standard_normal(n)
    if fault_hz is not None and severity_factor > 0:
        x += _impulses(fault_hz, bearing, bearing.amplitude * severity_factor * 4.0, cfg, fs, duration, rng)
    return x * (1.0 + cfg.gain_jitter * rng.standard_normal())


def _fault_hz(mode: str, geometry: BearingGeometry, rpm: float) -> float:
    return getattr(fault_frequencies(geometry, rpm / 60.0), MODE_FREQUENCY[mode] + "_hz")


class _Writer:
    """Collects records and writes their signals under ``root/signals``."""

    def __init__(self, root: Path | None, profile: DatasetProfile):
        self.root = Path(root) if root is not None else None
        self.profile = profile
        self.records: list[AcquisitionRecord] = []
        if self.root is not None:
            (self.root / "signals").mkdir(parents=True, exist_ok=True)

    def add(self, rec: AcquisitionRecord, make_signal) -> None:
        if self.root is not None:
            write_signal(self.root / rec.signal_ref, make_signal())
        self.records.append(rec)

    def finish(self) -> Manifest:
        manifest = Manifest(self.profile, tuple(self.records), self.root or Path("."))
        if self.root is not None:
            write_manifest(manifest, self.root / "manifest.jsonl")
        return manifest


def build_uored_like(
    root: str | Path | None,
    seed: int = 0,
    cfg: SignalConfig = SignalConfig(),
    bearings_per_mode: int = 5,
    rpm: float = 1_740.0,
) -> Manifest:
    """``bearings_per_mode`` bearings per fault mode, each recorded healthy, weak and strong.

    With ``root=None`` only the records are built (no signal files).
    """
    rng = np.random.default_rng(seed)
    out = _Writer(root, UORED)
    states = ((Severity.NONE, 0.0), (Severity.WEAK, cfg.weak_factor), (Severity.STRONG, 1.0))
    for mode in UORED.fault_modes:
        fault_hz = _fault_hz(mode, GEOMETRY_6203, rpm)
        for k in range(1, bearings_per_mode + 1):
            bid = f"{mode[0].upper()}{k:02d}"
            b = _draw_bearing(cfg, rng)
            for sev, factor in states:
                aid = f"{bid}-{sev.value}"
                sub = np.random.default_rng([seed, len(out.records)])
                out.add(
                    AcquisitionRecord(
                        acquisition_id=aid,
                        bearing_id=bid,
                        label=UORED.label(() if sev is Severity.NONE else (mode,)),
                        condition_id="c0",
                        repetition=0,
                        location="housing",
                        sampling_rate_hz=cfg.sampling_rate_hz,
                        rpm=rpm,
                        duration_s=cfg.duration_s,
                        signal_ref=f"signals/{aid}.f32",
                        severity=sev,
                        geometry=GEOMETRY_6203,
                    ),
                    lambda f=fault_hz if factor else None, b=b, s=factor, r=sub: synth_recording(f, b, s, cfg, r),
                )
    return out.finish()


PU_CONDITIONS = {  # condition id -> rpm
    "N15_M07_F10": 1_500.0,
    "N09_M07_F10": 900.0,
    "N15_M01_F10": 1_500.0,
    "N15_M07_F04": 1_500.0,
}
PU_BEARINGS = {
    "healthy": ("K001", "K002", "K003", "K004", "K005", "K006"),
    "outer": ("KA04", "KA15", "KA16", "KA22", "KA30"),
    "inner": ("KI04", "KI14", "KI16", "KI17", "KI18", "KI21"),
    "inner+outer": ("KB23", "KB24", "KB27"),
}


def build_pu_like(
    root: str | Path | None,
    seed: int = 0,
    cfg: SignalConfig = SignalConfig(sampling_rate_hz=20_000.0, duration_s=1.0),
    repetitions: int = 20,
) -> Manifest:
    """Bearing layout of the naturally-damaged PU set: 4 conditions x ``repetitions`` recordings per bearing."""
    rng = np.random.default_rng(seed)
    out = _Writer(root, PU)
    for cls, ids in PU_BEARINGS.items():
        modes = () if cls == "healthy" else tuple(cls.split("+"))
        for bid in ids:
            b = _draw_bearing(cfg, rng)
            for cond, rpm in PU_CONDITIONS.items():
                freqs = [_fault_hz(m, GEOMETRY_6203, rpm) for m in modes]
                for rep in range(repetitions):
                    aid = f"{cond}_{bid}_{rep + 1}"
                    sub = np.random.default_rng([seed, len(out.records)])

                    def make(freqs=freqs, b=b, r=sub):
                        x = synth_recording(None, b, 0.0, cfg, r)
                        for f in freqs:
                            x += _impulses(f, b, b.amplitude * 4.0, cfg, cfg.sampling_rate_hz, cfg.duration_s, r)
                        return x

                    out.add(
                        AcquisitionRecord(
                            acquisition_id=aid,
                            bearing_id=bid,
                            label=PU.label(modes),
                            condition_id=cond,
                            repetition=rep,
                            location="housing",
                            sampling_rate_hz=cfg.sampling_rate_hz,
                            rpm=rpm,
                            duration_s=cfg.duration_s,
                            signal_ref=f"signals/{aid}.f32",
                            geometry=GEOMETRY_6203,
                        ),
                        make,
                    )
    return out.finish()


CWRU_LOADS = {"0": 1_797.0, "1": 1_772.0, "2": 1_750.0, "3": 1_730.0}
CWRU_GEOMETRY = {"DE": GEOMETRY_6205, "FE": GEOMETRY_6203_FE}
_CWRU_CODES = {"inner": "IR", "outer": "OR", "ball": "B"}


def build_cwru_like(
    root: str | Path | None,
    seed: int = 0,
    cfg: SignalConfig = SignalConfig(sampling_rate_hz=12_000.0, duration_s=2.0),
    sizes: tuple[str, ...] = ("007", "014", "021"),
) -> Manifest:
    """Two co-recorded channels per session: the faulty bearing and the healthy one at the other end.

    One dual-healthy baseline session per load is included as well.
    """
    rng = np.random.default_rng(seed)
    out = _Writer(root, CWRU)
    healthy = {loc: _draw_bearing(cfg, rng) for loc in CWRU.sensor_locations}

    def add(aid, bid, modes, load, loc, session, fault_hz, b, factor):
        sub = np.random.default_rng([seed, len(out.records)])
        out.add(
            AcquisitionRecord(
                acquisition_id=aid,
                bearing_id=bid,
                label=CWRU.label(modes),
                condition_id=f"load{load}",
                repetition=0,
                location=loc,
                sampling_rate_hz=cfg.sampling_rate_hz,
                rpm=CWRU_LOADS[load],
                duration_s=cfg.duration_s,
                signal_ref=f"signals/{aid}.f32",
                geometry=CWRU_GEOMETRY[loc],
                session_id=session,
            ),
            lambda: synth_recording(fault_hz, b, factor, cfg, sub),
        )

    for load in CWRU_LOADS:
        session = f"normal-load{load}"
        for loc in CWRU.sensor_locations:
            add(f"{session}-{loc}", f"healthy-{loc}", (), load, loc, session, None, healthy[loc], 0.0)
    for loc in CWRU.sensor_locations:
        other = next(x for x in CWRU.sensor_locations if x != loc)
        for mode, code in _CWRU_CODES.items():
            for size in sizes:
                bid = f"{code}-{size}-{loc}"
                b = _draw_bearing(cfg, rng)
                for load in CWRU_LOADS:
                    session = f"{bid}-load{load}"
                    fault_hz = _fault_hz(mode, CWRU_GEOMETRY[loc], CWRU_LOADS[load])
                    add(f"{session}-{loc}", bid, (mode,), load, loc, session, fault_hz, b, 1.0)
                    add(f"{session}-{other}", f"healthy-{other}", (), load, other, session, None,
                        healthy[other], 0.0)
    return out.finish()


BUILDERS = {"uored": build_uored_like, "pu": build_pu_like, "cwru": build_cwru_like}

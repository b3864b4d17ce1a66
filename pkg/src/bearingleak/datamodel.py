"""Dataset manifest, label space and bearing provenance records.

A manifest is a JSON-lines file. The first line describes the dataset profile,
every following line is one acquisition::

    {"profile": {"name": "uored", "fault_modes": ["inner", "outer", "ball", "cage"], ...}}
    {"acquisition_id": "B01-healthy", "bearing_id": "B01", "label": [0, 0, 0, 0], ...}

Signal files are headerless little-endian float32 (``.f32``) and are only read
on demand through :meth:`Manifest.load_signal`.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifests."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Severity(str, enum.Enum):
    NONE = "none"
    WEAK = "weak"
    STRONG = "strong"


@dataclass(frozen=True)
class DatasetProfile:
    name: str
    fault_modes: tuple[str, ...]
    sensor_locations: tuple[str, ...] = ("default",)
    health_states_per_bearing: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "fault_modes", tuple(self.fault_modes))
        object.__setattr__(self, "sensor_locations", tuple(self.sensor_locations))
        if not self.fault_modes:
            raise ValueError("fault_modes must not be empty")
        if len(set(self.fault_modes)) != len(self.fault_modes):
            raise ValueError(f"duplicate fault modes in {self.fault_modes}")
        if self.health_states_per_bearing < 1:
            raise ValueError("health_states_per_bearing must be positive")

    @property
    def n_modes(self) -> int:
        return len(self.fault_modes)

    def label(self, modes: Iterable[str] = ()) -> "LabelVector":
        modes = set(modes)
        unknown = modes - set(self.fault_modes)
        if unknown:
            raise ValueError(f"unknown fault mode(s) {sorted(unknown)} for profile {self.name}")
        return LabelVector(tuple(int(m in modes) for m in self.fault_modes))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "fault_modes": list(self.fault_modes),
            "sensor_locations": list(self.sensor_locations),
            "health_states_per_bearing": self.health_states_per_bearing,
        }


UORED = DatasetProfile("uored", ("inner", "outer", "ball", "cage"), ("housing",), 3)
PU = DatasetProfile("pu", ("inner", "outer"), ("housing",), 1)
CWRU = DatasetProfile("cwru", ("inner", "outer", "ball"), ("DE", "FE"), 1)

PROFILES: dict[str, DatasetProfile] = {p.name: p for p in (UORED, PU, CWRU)}

# Envelope band edges (Hz) used for feature extraction per built-in profile.
DEFAULT_BANDS: dict[str, tuple[float, float]] = {
    "uored": (500.0, 10_000.0),
    "pu": (500.0, 10_000.0),
    "cwru": (500.0, 6_000.0),
}


@dataclass(frozen=True)
class LabelVector:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"label bits must be 0/1, got {self.bits}")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    @property
    def is_healthy(self) -> bool:
        return not any(self.bits)

    def modes(self, profile: DatasetProfile) -> frozenset[str]:
        return frozenset(m for m, b in zip(profile.fault_modes, self.bits) if b)


@dataclass(frozen=True)
class BearingGeometry:
    n_rolling_elements: int
    ball_diameter: float
    pitch_diameter: float
    contact_angle_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.n_rolling_elements < 1:
            raise ValueError("n_rolling_elements must be positive")
        if not (0 < self.ball_diameter < self.pitch_diameter):
            raise ValueError("need 0 < ball_diameter < pitch_diameter")
        if not (0 <= self.contact_angle_rad < math.pi / 2):
            raise ValueError("contact_angle_rad must lie in [0, pi/2)")

    def to_dict(self) -> dict:
        return {
            "n_rolling_elements": self.n_rolling_elements,
            "ball_diameter": self.ball_diameter,
            "pitch_diameter": self.pitch_diameter,
            "contact_angle_rad": self.contact_angle_rad,
        }


@dataclass(frozen=True)
class BearingRecord:
    bearing_id: str
    fault_modes_present: frozenset[str] = frozenset()

    @property
    def is_healthy(self) -> bool:
        return not self.fault_modes_present


@dataclass(frozen=True)
class AcquisitionRecord:
    """One recorded vibration signal and its provenance.

    ``session_id`` groups channels recorded synchronously in the same run (the
    CWRU drive-end/fan-end pair); it is ``None`` for single-channel datasets.
    ``severity`` is ``None`` when the dataset has no severity grading.
    """

    acquisition_id: str
    bearing_id: str
    label: LabelVector
    condition_id: str
    repetition: int
    location: str
    sampling_rate_hz: float
    rpm: float | None
    duration_s: float
    signal_ref: str
    severity: Severity | None = None
    geometry: BearingGeometry | None = None
    session_id: str | None = None

    def __post_init__(self) -> None:
        if not self.acquisition_id:
            raise ValueError("acquisition_id must not be empty")
        if not self.bearing_id:
            raise ValueError("bearing_id must not be empty")
        if self.repetition < 0:
            raise ValueError("repetition must be non-negative")
        if self.sampling_rate_hz <= 0 or self.duration_s <= 0:
            raise ValueError("sampling_rate_hz and duration_s must be positive")
        if self.rpm is not None and self.rpm <= 0:
            raise ValueError("rpm must be positive")
        if self.severity is not None:
            if (self.severity is Severity.NONE) != self.label.is_healthy:
                raise ValueError(
                    f"severity={self.severity.value} inconsistent with label {list(self.label.bits)}"
                )

    @property
    def n_samples(self) -> int:
        return int(round(self.sampling_rate_hz * self.duration_s))

    @property
    def condition_key(self) -> tuple[str, str | None]:
        # Severity grades count as distinct conditions of the same bearing.
        return (self.condition_id, self.severity.value if self.severity else None)

    def to_dict(self) -> dict:
        return {
            "acquisition_id": self.acquisition_id,
            "bearing_id": self.bearing_id,
            "label": list(self.label.bits),
            "severity": self.severity.value if self.severity else None,
            "condition_id": self.condition_id,
            "repetition": self.repetition,
            "location": self.location,
            "sampling_rate_hz": self.sampling_rate_hz,
            "rpm": self.rpm,
            "duration_s": self.duration_s,
            "signal_ref": self.signal_ref,
            "geometry": self.geometry.to_dict() if self.geometry else None,
            "session_id": self.session_id,
        }


@dataclass(frozen=True)
class Manifest:
    profile: DatasetProfile
    records: tuple[AcquisitionRecord, ...]
    root: Path = field(default=Path("."))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AcquisitionRecord]:
        return iter(self.records)

    def by_id(self) -> dict[str, AcquisitionRecord]:
        return {r.acquisition_id: r for r in self.records}

    def bearings(self) -> dict[str, BearingRecord]:
        return bearings_of(self.records, self.profile)

    def signal_path(self, record: AcquisitionRecord) -> Path:
        return self.root / record.signal_ref

    def load_signal(self, record: AcquisitionRecord) -> np.ndarray:
        samples = read_signal(self.signal_path(record))
        if abs(samples.size - record.sampling_rate_hz * record.duration_s) > 1:
            raise ManifestError(
                f"{record.acquisition_id}: signal has {samples.size} samples, expected "
                f"{record.sampling_rate_hz * record.duration_s:g} (rate x duration)"
            )
        return samples


def read_signal(path: str | Path) -> np.ndarray:
    return np.fromfile(path, dtype="<f4").astype(np.float64)


def write_signal(path: str | Path, samples: np.ndarray) -> None:
    np.asarray(samples, dtype="<f4").tofile(path)


def bearings_of(
    records: Iterable[AcquisitionRecord], profile: DatasetProfile
) -> dict[str, BearingRecord]:
    modes: dict[str, set[str]] = defaultdict(set)
    for r in records:
        modes[r.bearing_id] |= r.label.modes(profile)
    return {b: BearingRecord(b, frozenset(m)) for b, m in sorted(modes.items())}


def bearing_class(bearing: BearingRecord) -> str:
    """Class name used for per-class bearing counts: the fault mode, 'healthy', or a '+'-joined combination."""
    if bearing.is_healthy:
        return "healthy"
    return "+".join(sorted(bearing.fault_modes_present))


def _profile_from_json(obj) -> DatasetProfile:
    if isinstance(obj, str):
        try:
            return PROFILES[obj]
        except KeyError:
            raise ValueError(f"unknown built-in profile {obj!r}") from None
    return DatasetProfile(
        name=obj["name"],
        fault_modes=tuple(obj["fault_modes"]),
        sensor_locations=tuple(obj.get("sensor_locations", ("default",))),
        health_states_per_bearing=int(obj.get("health_states_per_bearing", 1)),
    )


def _record_from_json(obj: Mapping, profile: DatasetProfile) -> AcquisitionRecord:
    label = obj["label"]
    if isinstance(label, Mapping):
        label = profile.label(m for m, b in label.items() if b)
    elif len(label) and isinstance(label[0], str):
        label = profile.label(label)
    else:
        if len(label) != profile.n_modes:
            raise ValueError(f"label has {len(label)} bits, profile has {profile.n_modes} fault modes")
        label = LabelVector(tuple(label))
    geometry = obj.get("geometry")
    severity = obj.get("severity")
    return AcquisitionRecord(
        acquisition_id=str(obj["acquisition_id"]),
        bearing_id=str(obj["bearing_id"]),
        label=label,
        severity=Severity(severity) if severity is not None else None,
        condition_id=str(obj.get("condition_id", "default")),
        repetition=int(obj.get("repetition", 0)),
        location=str(obj.get("location", profile.sensor_locations[0])),
        sampling_rate_hz=float(obj["sampling_rate_hz"]),
        rpm=float(obj["rpm"]) if obj.get("rpm") is not None else None,
        duration_s=float(obj["duration_s"]),
        signal_ref=str(obj["signal_ref"]),
        geometry=BearingGeometry(**geometry) if geometry else None,
        session_id=obj.get("session_id"),
    )


def parse_manifest(lines: Sequence[str], root: Path = Path(".")) -> Manifest:
    profile: DatasetProfile | None = None
    records: list[AcquisitionRecord] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise ManifestError("each line must be a JSON object", lineno)
        if "profile" in obj:
            if profile is not None or records:
                raise ManifestError("profile line must come first and appear once", lineno)
            try:
                profile = _profile_from_json(obj["profile"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"bad profile: {exc}", lineno) from None
            continue
        if profile is None:
            raise ManifestError("first line must declare the dataset profile", lineno)
        try:
            rec = _record_from_json(obj, profile)
        except KeyError as exc:
            raise ManifestError(f"missing field {exc.args[0]!r}", lineno) from None
        except (TypeError, ValueError) as exc:
            raise ManifestError(str(exc), lineno) from None
        if rec.acquisition_id in seen:
            raise ManifestError(
                f"duplicate acquisition_id {rec.acquisition_id!r} (first on line {seen[rec.acquisition_id]})",
                lineno,
            )
        if rec.location not in profile.sensor_locations:
            raise ManifestError(f"unknown sensor location {rec.location!r}", lineno)
        seen[rec.acquisition_id] = lineno
        records.append(rec)
    if profile is None or not records:
        raise ManifestError("no acquisitions")
    _check_bearing_labels(records, profile)
    return Manifest(profile, tuple(records), root)


def _check_bearing_labels(records: Sequence[AcquisitionRecord], profile: DatasetProfile) -> None:
    # All faulty acquisitions of one bearing carry the same fault label.
    faulty: dict[str, LabelVector] = {}
    for r in records:
        if r.label.is_healthy:
            continue
        prev = faulty.setdefault(r.bearing_id, r.label)
        if prev != r.label:
            raise ManifestError(
                f"bearing {r.bearing_id!r} has conflicting fault labels "
                f"{list(prev.bits)} and {list(r.label.bits)} ({r.acquisition_id})"
            )


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return parse_manifest(lines, root=path.parent)


def dump_manifest(manifest: Manifest) -> str:
    lines = [json.dumps({"profile": manifest.profile.to_dict()}, sort_keys=True)]
    lines += [json.dumps(r.to_dict(), sort_keys=True) for r in manifest.records]
    return "\n".join(lines) + "\n"


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    Path(path).write_text(dump_manifest(manifest), encoding="utf-8")


@dataclass(frozen=True)
class ValidationReport:
    bearing_counts: dict[str, int]
    flagged: tuple[str, ...]
    n_acquisitions: int
    n_bearings: int

    @property
    def ok(self) -> bool:
        return not self.flagged


def validate_dataset(
    records: Iterable[AcquisitionRecord], profile: DatasetProfile, min_bearings: int = 2
) -> ValidationReport:
    """Count physical bearings per class and flag classes too small for a bearing-wise split.

    Fault modes are always reported. 'healthy' (bearings that never show a fault)
    is reported when such bearings exist.
    """
    records = list(records)
    bearings = bearings_of(records, profile)
    counts: Counter[str] = Counter(bearing_class(b) for b in bearings.values())
    report = {m: counts.get(m, 0) for m in profile.fault_modes}
    for cls, n in sorted(counts.items()):
        if cls not in report:
            report[cls] = n
    if "healthy" in report:
        report = {"healthy": report.pop("healthy"), **report}
    flagged = tuple(c for c, n in report.items() if n < min_bearings)
    return ValidationReport(report, flagged, len(records), len(bearings))

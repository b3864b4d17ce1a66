"""Bearing-wise and deliberately leaky train/test plans, plus a leakage auditor.

Plans reference acquisitions (``granularity="acquisition"``) or sample ranges
inside acquisitions (``granularity="segment"``). Generators are pure functions
of (records, seed).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .datamodel import (
    AcquisitionRecord,
    DatasetProfile,
    Severity,
    bearing_class,
    bearings_of,
)

KINDS = ("bearing_wise", "condition_wise", "repetition_wise", "segmentation_level")
FINDINGS = ("segmentation_level", "repetition_wise", "condition_wise", "bearing_wise_clean")

PU_COMBINED_FAULT_BEARINGS = frozenset({"KB23", "KB24", "KB27"})


class SplitError(ValueError):
    pass


class PlanItem(NamedTuple):
    acquisition_id: str
    start: int | None = None
    stop: int | None = None

    @property
    def is_segment(self) -> bool:
        return self.start is not None

    def key(self) -> tuple[str, int, int]:
        return (self.acquisition_id, -1 if self.start is None else self.start,
                -1 if self.stop is None else self.stop)


def sorted_items(items: Iterable[PlanItem]) -> list[PlanItem]:
    return sorted(items, key=PlanItem.key)


@dataclass(frozen=True)
class SplitPlan:
    plan_id: str
    granularity: str
    train_items: frozenset[PlanItem]
    test_items: frozenset[PlanItem]
    declared_kind: str
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_items", frozenset(self.train_items))
        object.__setattr__(self, "test_items", frozenset(self.test_items))
        object.__setattr__(self, "metadata", dict(self.metadata))
        if self.granularity not in ("acquisition", "segment"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.declared_kind not in KINDS:
            raise ValueError(f"unknown plan kind {self.declared_kind!r}")
        if not self.train_items or not self.test_items:
            raise ValueError(f"plan {self.plan_id}: train and test must both be non-empty")
        if self.train_items & self.test_items:
            raise ValueError(f"plan {self.plan_id}: item identifiers overlap between train and test")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for role, items in (("train", self.train_items), ("test", self.test_items)):
            for it in sorted_items(items):
                h.update(f"{role}|{it.acquisition_id}|{it.start}|{it.stop}\n".encode())
        return h.hexdigest()

    def __hash__(self) -> int:
        return hash((self.plan_id, self.content_hash()))


# --------------------------------------------------------------------------- helpers


def _records_by_bearing(records: Iterable[AcquisitionRecord]) -> dict[str, list[AcquisitionRecord]]:
    out: dict[str, list[AcquisitionRecord]] = defaultdict(list)
    for r in records:
        out[r.bearing_id].append(r)
    return out


def _items(records: Iterable[AcquisitionRecord]) -> set[PlanItem]:
    return {PlanItem(r.acquisition_id) for r in records}


def bearing_classes(
    records: Sequence[AcquisitionRecord], profile: DatasetProfile, exclusions: Iterable[str] = ()
) -> dict[str, list[str]]:
    """Sorted bearing ids per class (fault mode or 'healthy')."""
    excluded = set(exclusions)
    classes: dict[str, list[str]] = defaultdict(list)
    for b in bearings_of(records, profile).values():
        if b.bearing_id in excluded:
            continue
        classes[bearing_class(b)].append(b.bearing_id)
    return {c: sorted(ids) for c, ids in sorted(classes.items())}


@dataclass(frozen=True)
class SplitRequest:
    """Per-class bearing counts for a bearing-wise split family.

    ``ratio`` maps class name to ``(n_train, n_test)``. Classes with
    ``n_train + n_test`` smaller than the available bearings leave the rest unused.
    """

    profile: DatasetProfile
    ratio: Mapping[str, tuple[int, int]]
    n_tuning: int = 0
    n_eval: int = 1
    rng_seed: int = 0
    exclusions: frozenset[str] = frozenset()
    kind: str = "bearing_wise"


def _class_options(ids: list[str], n_train: int, n_test: int) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    opts = []
    for train in itertools.combinations(ids, n_train):
        rest = [b for b in ids if b not in train]
        for test in itertools.combinations(rest, n_test):
            opts.append((train, test))
    return opts


def bearing_wise_splits(
    records: Sequence[AcquisitionRecord], request: SplitRequest
) -> tuple[list[SplitPlan], list[SplitPlan]]:
    """Distinct bearing-wise plans drawn without replacement from the full combination space.

    Every acquisition of a selected bearing follows that bearing's side, so
    healthy-state recordings of faulty test bearings become negatives. The
    first ``n_tuning`` draws are tuning plans, the next ``n_eval`` evaluation plans.
    """
    if request.kind != "bearing_wise":
        raise SplitError("bearing_wise_splits only builds bearing_wise plans")
    classes = bearing_classes(records, request.profile, request.exclusions)
    combined = [c for c in classes if "+" in c]
    if combined:
        raise SplitError(f"bearings with combined faults must be excluded first: {combined}")
    missing = set(request.ratio) - set(classes)
    if missing:
        raise SplitError(f"no bearings for class(es) {sorted(missing)}")
    unassigned = set(classes) - set(request.ratio)
    if unassigned:
        raise SplitError(f"no train:test ratio given for class(es) {sorted(unassigned)}")
    names = sorted(request.ratio)
    options = []
    for c in names:
        n_train, n_test = request.ratio[c]
        if n_train < 1 or n_test < 1:
            raise SplitError(f"class {c}: ratio {n_train}:{n_test} leaves a side empty")
        if n_train + n_test > len(classes[c]):
            raise SplitError(
                f"class {c}: ratio {n_train}:{n_test} needs {n_train + n_test} bearings, "
                f"only {len(classes[c])} available"
            )
        options.append(_class_options(classes[c], n_train, n_test))
    space = math.prod(len(o) for o in options)
    total = request.n_tuning + request.n_eval
    if total > space:
        raise SplitError(f"requested {total} distinct plans, only {space} exist")
    rng = np.random.default_rng(request.rng_seed)
    draws = rng.choice(space, size=total, replace=False) if total else np.array([], dtype=int)

    by_bearing = _records_by_bearing(records)
    plans = []
    for i, flat in enumerate(draws.tolist()):
        choice = []
        rem = flat
        for opts in reversed(options):
            rem, idx = divmod(rem, len(opts))
            choice.append(idx)
        choice.reverse()
        train_b, test_b, meta = [], [], {}
        for c, opts, idx in zip(names, options, choice):
            tr, te = opts[idx]
            train_b += tr
            test_b += te
            meta[f"train_{c}"] = ",".join(tr)
            meta[f"test_{c}"] = ",".join(te)
        meta["combination"] = str(flat)
        meta["seed"] = str(request.rng_seed)
        role = "tune" if i < request.n_tuning else "eval"
        idx = i if i < request.n_tuning else i - request.n_tuning
        plans.append(
            SplitPlan(
                plan_id=f"{request.profile.name}-{role}-{idx:04d}",
                granularity="acquisition",
                train_items=_items(r for b in train_b for r in by_bearing[b]),
                test_items=_items(r for b in test_b for r in by_bearing[b]),
                declared_kind="bearing_wise",
                metadata=meta,
            )
        )
    return plans[: request.n_tuning], plans[request.n_tuning :]


def generate_uored_splits(
    records: Sequence[AcquisitionRecord],
    profile: DatasetProfile,
    n_tuning: int = 5,
    n_eval: int = 100,
    seed: int = 0,
    ratio: tuple[int, int] = (3, 2),
) -> tuple[list[SplitPlan], list[SplitPlan]]:
    """3-of-5 training bearings per fault mode; each bearing brings healthy, weak and strong recordings."""
    classes = bearing_classes(records, profile)
    for mode in profile.fault_modes:
        if len(classes.get(mode, [])) != 5:
            raise SplitError(f"UORED layout needs 5 bearings per fault mode, {mode} has {len(classes.get(mode, []))}")
    req = SplitRequest(profile, {m: ratio for m in profile.fault_modes}, n_tuning, n_eval, seed)
    return bearing_wise_splits(records, req)


PU_RATIO = {"healthy": (4, 2), "inner": (4, 2), "outer": (3, 2)}


def generate_pu_splits(
    records: Sequence[AcquisitionRecord],
    profile: DatasetProfile,
    n_tuning: int = 5,
    n_eval: int = 100,
    seed: int = 0,
    exclusions: Iterable[str] = PU_COMBINED_FAULT_BEARINGS,
    ratio: Mapping[str, tuple[int, int]] = PU_RATIO,
) -> tuple[list[SplitPlan], list[SplitPlan]]:
    req = SplitRequest(profile, dict(ratio), n_tuning, n_eval, seed, frozenset(exclusions))
    return bearing_wise_splits(records, req)


# --------------------------------------------------------------------------- CWRU

CWRU_SIZES = ("007", "014", "021")


@dataclass(frozen=True)
class CwruCell:
    """One faulty bearing configuration: fault location, fault type, fault size."""

    location: str
    fault_type: str
    size: str


@dataclass
class _CwruLayout:
    cells: dict[CwruCell, list[AcquisitionRecord]]  # faulty-side records per cell
    healthy: dict[CwruCell, list[AcquisitionRecord]]  # co-recorded healthy-side records per cell
    pairs: list[tuple[str, str]]  # (location, fault_type)
    sizes: tuple[str, ...]
    locations: tuple[str, str]


def cwru_size_of(bearing_id: str) -> str:
    """Fault size token: the last '-'-separated field of a faulty CWRU bearing id (e.g. 'IR-007-DE' -> '007')."""
    for token in bearing_id.replace("_", "-").split("-"):
        if token in CWRU_SIZES or (token.isdigit() and len(token) == 3):
            return token
    raise SplitError(f"cannot read fault size from bearing id {bearing_id!r}")


def _cwru_layout(records: Sequence[AcquisitionRecord], profile: DatasetProfile) -> _CwruLayout:
    locations = tuple(profile.sensor_locations)
    if len(locations) != 2:
        raise SplitError("CWRU layout needs exactly two sensor locations")
    sessions: dict[str, list[AcquisitionRecord]] = defaultdict(list)
    for r in records:
        if r.session_id is None:
            raise SplitError(f"{r.acquisition_id}: CWRU records need a session_id")
        sessions[r.session_id].append(r)
    cells: dict[CwruCell, list[AcquisitionRecord]] = defaultdict(list)
    healthy: dict[CwruCell, list[AcquisitionRecord]] = defaultdict(list)
    for sid, recs in sessions.items():
        faulty = [r for r in recs if not r.label.is_healthy]
        if not faulty:
            continue  # dual-healthy configurations are discarded
        if len(faulty) != 1:
            raise SplitError(f"session {sid} has {len(faulty)} faulty channels, expected 1")
        f = faulty[0]
        modes = sorted(f.label.modes(profile))
        if len(modes) != 1:
            raise SplitError(f"{f.acquisition_id}: expected a single fault mode")
        cell = CwruCell(f.location, modes[0], cwru_size_of(f.bearing_id))
        cells[cell].append(f)
        healthy[cell] += [r for r in recs if r is not f]
    pairs = sorted({(c.location, c.fault_type) for c in cells})
    sizes = tuple(sorted({c.size for c in cells}))
    for loc, ft in pairs:
        for s in sizes:
            if CwruCell(loc, ft, s) not in cells:
                raise SplitError(f"manifest lacks the CWRU cell location={loc} type={ft} size={s}")
    return _CwruLayout(dict(cells), dict(healthy), pairs, sizes, locations)


def _cwru_plans(
    layout: _CwruLayout, test_sizes: Sequence[Sequence[str]], plan_prefix: str, meta: dict[str, str]
) -> list[SplitPlan]:
    """Both healthy-side scenarios for one choice of test sizes per (location, type) pair."""
    test_cells = {
        CwruCell(loc, ft, s) for (loc, ft), sizes in zip(layout.pairs, test_sizes) for s in sizes
    }
    plans = []
    for train_side in (layout.locations[1], layout.locations[0]):
        test_side = layout.locations[0] if train_side == layout.locations[1] else layout.locations[1]
        train, test = set(), set()
        for cell, recs in layout.cells.items():
            target = test if cell in test_cells else train
            target |= _items(recs)
            side = test_side if cell in test_cells else train_side
            # Healthy channels from the other side are dropped, never reassigned.
            target |= _items(r for r in layout.healthy[cell] if r.location == side)
        plans.append(
            SplitPlan(
                plan_id=f"{plan_prefix}-{train_side}",
                granularity="acquisition",
                train_items=train,
                test_items=test,
                declared_kind="bearing_wise",
                metadata={
                    **meta,
                    "healthy_train_side": train_side,
                    "healthy_test_side": test_side,
                    "test_cells": ";".join(
                        f"{c.location}:{c.fault_type}:{c.size}"
                        for c in sorted(test_cells, key=lambda c: (c.location, c.fault_type, c.size))
                    ),
                },
            )
        )
    return plans


def generate_cwru_splits(
    records: Sequence[AcquisitionRecord],
    profile: DatasetProfile,
    n_splits: int = 50,
    seed: int = 0,
    exclude: Iterable[Sequence[str]] = (),
    n_test_sizes: int = 1,
) -> list[SplitPlan]:
    """``n_splits`` distinct size selections, each emitted under both healthy-side scenarios.

    Per (location, type) pair ``n_test_sizes`` fault sizes go to test (1 gives
    the 2:1 scheme, 2 the 1:2 scheme). ``exclude`` lists single-size test
    assignments (one size per pair, in sorted pair order) that must not be
    drawn, e.g. the 3-fold tuning folds.
    """
    layout = _cwru_layout(records, profile)
    if not 1 <= n_test_sizes < len(layout.sizes):
        raise SplitError(f"n_test_sizes must lie in [1, {len(layout.sizes) - 1}]")
    options = list(itertools.combinations(layout.sizes, n_test_sizes))
    n_pairs = len(layout.pairs)
    excluded = {tuple((s,) for s in e) for e in exclude}
    space = [
        flat for flat in range(len(options) ** n_pairs)
        if _unflatten(flat, options, n_pairs) not in excluded
    ]
    if n_splits > len(space):
        raise SplitError(f"requested {n_splits} CWRU splits, only {len(space)} exist")
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(space), size=n_splits, replace=False)
    plans = []
    for i, d in enumerate(draws.tolist()):
        sizes = _unflatten(space[d], options, n_pairs)
        plans += _cwru_plans(layout, sizes, f"cwru-eval-{i:04d}", {"split": str(i), "seed": str(seed)})
    return plans


def _unflatten(flat: int, options: Sequence, n_pairs: int) -> tuple:
    out = []
    for _ in range(n_pairs):
        flat, idx = divmod(flat, len(options))
        out.append(options[idx])
    return tuple(reversed(out))


def cwru_3fold_assignments(records, profile, seed: int = 0) -> list[tuple[str, ...]]:
    """Test-size tuples of the three folds: fold 1 random, folds 2-3 partition the remaining sizes."""
    layout = _cwru_layout(records, profile)
    if len(layout.sizes) != 3:
        raise SplitError("the 3-fold scheme needs exactly three fault sizes")
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[], [], []]
    for _pair in layout.pairs:
        order = rng.permutation(len(layout.sizes))
        for f in range(3):
            folds[f].append(layout.sizes[order[f]])
    return [tuple(f) for f in folds]


def generate_cwru_3fold(records, profile, seed: int = 0) -> list[SplitPlan]:
    layout = _cwru_layout(records, profile)
    plans = []
    for f, sizes in enumerate(cwru_3fold_assignments(records, profile, seed), start=1):
        plans += _cwru_plans(layout, [(s,) for s in sizes], f"cwru-fold{f}", {"fold": str(f), "seed": str(seed)})
    return plans


def protocol_plans(
    records: Sequence[AcquisitionRecord],
    profile: DatasetProfile,
    n_tuning: int,
    n_eval: int,
    seed: int = 0,
    ratio: tuple[int, int] | None = None,
) -> tuple[list[SplitPlan], list[SplitPlan]]:
    """Tuning and evaluation plans following each built-in profile's protocol.

    CWRU uses the 3-fold tuning scheme (``n_tuning`` is ignored) and ``n_eval``
    must be even since each split yields two plans. Other profiles draw
    bearing-wise plans with ``ratio`` applied to every class (default 3:2; PU
    defaults to its fixed per-class ratio).
    """
    if profile.name == "cwru":
        ratio = ratio or (2, 1)
        if ratio not in ((2, 1), (1, 2)):
            raise SplitError(f"CWRU supports the 2:1 and 1:2 size ratios, got {ratio[0]}:{ratio[1]}")
        if n_eval % 2:
            raise SplitError("CWRU evaluation plans come in pairs; n_eval must be even")
        tuning = generate_cwru_3fold(records, profile, seed)
        folds = cwru_3fold_assignments(records, profile, seed)
        exclude = folds if ratio == (2, 1) else ()
        return tuning, generate_cwru_splits(records, profile, n_eval // 2, seed, exclude, n_test_sizes=ratio[1])
    if profile.name == "uored" and ratio in (None, (3, 2)):
        return generate_uored_splits(records, profile, n_tuning, n_eval, seed)
    if profile.name == "pu" and ratio is None:
        return generate_pu_splits(records, profile, n_tuning, n_eval, seed)
    exclusions = PU_COMBINED_FAULT_BEARINGS if profile.name == "pu" else frozenset()
    classes = bearing_classes(records, profile, exclusions)
    ratio = ratio or (3, 2)
    req = SplitRequest(profile, {c: ratio for c in classes}, n_tuning, n_eval, seed, frozenset(exclusions))
    return bearing_wise_splits(records, req)


# --------------------------------------------------------------------------- leaky plans


@dataclass(frozen=True)
class LeakMode:
    """Leaky-plan recipe. ``name`` is one of LEAK_MODES; other fields parametrise it."""

    name: str
    holdout_fraction: float = 0.2
    train_repetitions: int = 15
    test_repetitions: int = 5
    holdout_condition: str | None = None
    train_group: tuple[str, str] | None = None  # (condition_id, size) for CWRU groups
    arrangement: str = "leaky"  # or "control" for CWRU groups
    seed: int = 0


LEAK_MODES = (
    "segmentation",
    "uored_severe_reinsertion",
    "pu_condition_holdout",
    "pu_repetition_holdout",
    "cwru_condition_groups",
)

EXPECTED_FINDING = {
    "segmentation": "segmentation_level",
    "uored_severe_reinsertion": "condition_wise",
    "pu_condition_holdout": "condition_wise",
    "pu_repetition_holdout": "repetition_wise",
    "cwru_condition_groups": "condition_wise",
}


def generate_leaky_plan(
    records: Sequence[AcquisitionRecord],
    base: SplitPlan,
    mode: LeakMode,
    profile: DatasetProfile | None = None,
) -> SplitPlan:
    if mode.name not in LEAK_MODES:
        raise SplitError(f"unknown leak mode {mode.name!r}")
    by_id = {r.acquisition_id: r for r in records}
    fn = {
        "segmentation": _leak_segmentation,
        "uored_severe_reinsertion": _leak_severe_reinsertion,
        "pu_condition_holdout": _leak_condition_holdout,
        "pu_repetition_holdout": _leak_repetition_holdout,
        "cwru_condition_groups": _leak_cwru_groups,
    }[mode.name]
    if mode.name == "cwru_condition_groups":
        if profile is None:
            raise SplitError("cwru_condition_groups needs the dataset profile")
        return fn(records, base, mode, profile)
    return fn(by_id, base, mode)


def _train_records(by_id, base: SplitPlan) -> list[AcquisitionRecord]:
    try:
        return [by_id[it.acquisition_id] for it in sorted_items(base.train_items)]
    except KeyError as exc:
        raise SplitError(f"base plan item {exc.args[0]!r} not in records") from None


def _leak_segmentation(by_id, base: SplitPlan, mode: LeakMode) -> SplitPlan:
    f = mode.holdout_fraction
    if not 0 < f < 1:
        raise SplitError(f"holdout fraction must lie in (0, 1), got {f}")
    train, test = set(), set()
    for it in sorted_items(base.train_items):
        rec = by_id[it.acquisition_id]
        start = it.start or 0
        stop = it.stop if it.stop is not None else rec.n_samples
        cut = start + int(round((stop - start) * (1 - f)))
        train.add(PlanItem(rec.acquisition_id, start, cut))
        test.add(PlanItem(rec.acquisition_id, cut, stop))
    return SplitPlan(
        f"{base.plan_id}-seg{int(round(f * 100)):02d}",
        "segment",
        train,
        test,
        "segmentation_level",
        {**base.metadata, "base_plan": base.plan_id, "holdout_fraction": repr(f)},
    )


def _leak_severe_reinsertion(by_id, base: SplitPlan, mode: LeakMode) -> SplitPlan:
    """Severe recordings of training bearings replace an equal number of severe test recordings per fault mode."""
    rng = np.random.default_rng(mode.seed)
    train_recs = _train_records(by_id, base)
    test_recs = [by_id[it.acquisition_id] for it in sorted_items(base.test_items)]
    severe_train = defaultdict(list)
    severe_test = defaultdict(list)
    for r in train_recs:
        if r.severity is Severity.STRONG:
            severe_train[r.label.bits].append(r)
    for r in test_recs:
        if r.severity is Severity.STRONG:
            severe_test[r.label.bits].append(r)
    if not severe_train:
        raise SplitError("base plan has no severe-fault recordings on the training side")
    train = {PlanItem(r.acquisition_id) for r in train_recs if r.severity is not Severity.STRONG}
    test = {PlanItem(r.acquisition_id) for r in test_recs}
    for label in sorted(severe_train):
        k = min(len(severe_train[label]), len(severe_test[label]))
        if k == 0:
            continue
        moved = rng.choice(len(severe_train[label]), size=k, replace=False)
        displaced = rng.choice(len(severe_test[label]), size=k, replace=False)
        test -= {PlanItem(severe_test[label][i].acquisition_id) for i in displaced}
        test |= {PlanItem(severe_train[label][i].acquisition_id) for i in moved}
    return SplitPlan(
        f"{base.plan_id}-severe",
        "acquisition",
        train,
        test,
        "condition_wise",
        {**base.metadata, "base_plan": base.plan_id, "leak_seed": str(mode.seed)},
    )


def _leak_condition_holdout(by_id, base: SplitPlan, mode: LeakMode) -> SplitPlan:
    recs = _train_records(by_id, base)
    conditions = sorted({r.condition_id for r in recs})
    if len(conditions) < 2:
        raise SplitError("condition holdout needs at least two operating conditions")
    held = mode.holdout_condition
    if held is None:
        held = conditions[int(np.random.default_rng(mode.seed).integers(len(conditions)))]
    elif held not in conditions:
        raise SplitError(f"condition {held!r} not present in the base plan's training bearings")
    train = {PlanItem(r.acquisition_id) for r in recs if r.condition_id != held}
    test = {PlanItem(r.acquisition_id) for r in recs if r.condition_id == held}
    return SplitPlan(
        f"{base.plan_id}-cond-{held}",
        "acquisition",
        train,
        test,
        "condition_wise",
        {**base.metadata, "base_plan": base.plan_id, "holdout_condition": held},
    )


def _leak_repetition_holdout(by_id, base: SplitPlan, mode: LeakMode) -> SplitPlan:
    recs = _train_records(by_id, base)
    groups: dict[tuple, list[AcquisitionRecord]] = defaultdict(list)
    for r in recs:
        groups[(r.bearing_id, r.condition_key, r.location)].append(r)
    need = mode.train_repetitions + mode.test_repetitions
    train, test = set(), set()
    for key, grp in sorted(groups.items(), key=lambda kv: str(kv[0])):
        grp = sorted(grp, key=lambda r: (r.repetition, r.acquisition_id))
        if len(grp) < need:
            raise SplitError(
                f"bearing {key[0]} condition {key[1][0]}: {len(grp)} repetitions, need {need}"
            )
        train |= _items(grp[: mode.train_repetitions])
        test |= _items(grp[mode.train_repetitions : need])
    return SplitPlan(
        f"{base.plan_id}-rep{mode.train_repetitions}-{mode.test_repetitions}",
        "acquisition",
        train,
        test,
        "repetition_wise",
        {**base.metadata, "base_plan": base.plan_id,
         "repetitions": f"{mode.train_repetitions}:{mode.test_repetitions}"},
    )


def cwru_groups(records, profile) -> list[tuple[str, str]]:
    """The (condition_id, size) groups of the CWRU leakage protocol in stable sorted order."""
    layout = _cwru_layout(records, profile)
    conditions = sorted({r.condition_id for recs in layout.cells.values() for r in recs})
    return [(c, s) for s in layout.sizes for c in conditions]


def _leak_cwru_groups(records, base: SplitPlan, mode: LeakMode, profile: DatasetProfile) -> SplitPlan:
    """Train on one (load, size) group; test on same-size other-load groups ('leaky') or other-size groups ('control').

    Healthy channels follow the base plan's healthy-side scenario so the
    healthy bearings never straddle the split.
    """
    layout = _cwru_layout(records, profile)
    groups = cwru_groups(records, profile)
    group = mode.train_group or groups[int(np.random.default_rng(mode.seed).integers(len(groups)))]
    if tuple(group) not in groups:
        raise SplitError(f"unknown CWRU group {group}")
    cond, size = group
    train_side = base.metadata.get("healthy_train_side", layout.locations[1])
    test_side = next(loc for loc in layout.locations if loc != train_side)
    if mode.arrangement == "leaky":
        test_groups = {(c, s) for c, s in groups if s == size and c != cond}
    elif mode.arrangement == "control":
        test_groups = {(c, s) for c, s in groups if s != size}
    else:
        raise SplitError(f"unknown arrangement {mode.arrangement!r}")
    train, test = set(), set()
    for cell, recs in layout.cells.items():
        for r, hrecs in _by_condition(recs, layout.healthy[cell]):
            g = (r.condition_id, cell.size)
            if g == (cond, size):
                train.add(PlanItem(r.acquisition_id))
                train |= _items(h for h in hrecs if h.location == train_side)
            elif g in test_groups:
                test.add(PlanItem(r.acquisition_id))
                test |= _items(h for h in hrecs if h.location == test_side)
    kind = "condition_wise" if mode.arrangement == "leaky" else "bearing_wise"
    return SplitPlan(
        f"{base.plan_id}-group-{cond}-{size}-{mode.arrangement}",
        "acquisition",
        train,
        test,
        kind,
        {**base.metadata, "base_plan": base.plan_id, "train_group": f"{cond}:{size}",
         "arrangement": mode.arrangement,
         "healthy_train_side": train_side, "healthy_test_side": test_side},
    )


def _by_condition(faulty: list[AcquisitionRecord], healthy: list[AcquisitionRecord]):
    for r in sorted(faulty, key=lambda r: r.acquisition_id):
        yield r, [h for h in healthy if h.session_id == r.session_id]


# --------------------------------------------------------------------------- audit


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class AuditFinding:
    kind: str
    witnesses: tuple[tuple[str, ...], ...] = ()

    @property
    def clean(self) -> bool:
        return self.kind == "bearing_wise_clean"


def audit_split(plan: SplitPlan, records: Iterable[AcquisitionRecord]) -> AuditFinding:
    """Classify the most severe leakage in ``plan``.

    Order: segmentation_level (one recording on both sides) > repetition_wise
    (one bearing, same condition and location on both sides) > condition_wise
    (one bearing, different conditions) > bearing_wise_clean. Conditions
    include the severity grade, so weak/strong recordings of a bearing count
    as different conditions.
    """
    by_id = {r.acquisition_id: r for r in records}

    def resolve(items):
        out = []
        for it in sorted_items(items):
            rec = by_id.get(it.acquisition_id)
            if rec is None:
                raise AuditError(f"plan {plan.plan_id}: unknown acquisition {it.acquisition_id!r}")
            if it.is_segment and not (0 <= it.start < it.stop <= rec.n_samples):
                raise AuditError(
                    f"plan {plan.plan_id}: segment {it.start}:{it.stop} outside {rec.acquisition_id} "
                    f"({rec.n_samples} samples)"
                )
            out.append(rec)
        return out

    train, test = resolve(plan.train_items), resolve(plan.test_items)

    shared_acq = sorted({r.acquisition_id for r in train} & {r.acquisition_id for r in test})
    if shared_acq:
        return AuditFinding("segmentation_level", tuple((a,) for a in shared_acq))

    def config_keys(recs):
        return {(r.bearing_id, r.condition_id, r.severity.value if r.severity else "", r.location) for r in recs}

    shared_cfg = sorted(config_keys(train) & config_keys(test))
    if shared_cfg:
        return AuditFinding(
            "repetition_wise",
            tuple((b, c if not s else f"{c}/{s}") for b, c, s, _loc in shared_cfg),
        )
    shared_bearings = sorted({r.bearing_id for r in train} & {r.bearing_id for r in test})
    if shared_bearings:
        return AuditFinding("condition_wise", tuple((b,) for b in shared_bearings))
    return AuditFinding("bearing_wise_clean")


# --------------------------------------------------------------------------- serialisation


def dump_plans(plans: Sequence[SplitPlan], header: Mapping | None = None) -> str:
    """Line-delimited JSON: an optional ``{"snapshot": ...}`` line, then per plan one
    ``role="plan"`` line followed by one line per item."""
    lines = []
    if header is not None:
        lines.append(json.dumps({"snapshot": header}, sort_keys=True))
    for p in plans:
        lines.append(json.dumps(
            {"plan_id": p.plan_id, "kind": p.declared_kind, "role": "plan",
             "granularity": p.granularity, "metadata": dict(sorted(p.metadata.items()))},
            sort_keys=True))
        for role, items in (("train", p.train_items), ("test", p.test_items)):
            for it in sorted_items(items):
                seg = [it.start, it.stop] if it.is_segment else None
                lines.append(json.dumps(
                    {"plan_id": p.plan_id, "kind": p.declared_kind, "role": role,
                     "item_id": it.acquisition_id, "segment": seg},
                    sort_keys=True))
    return "\n".join(lines) + "\n"


def parse_plans(text: str) -> tuple[list[SplitPlan], dict | None]:
    heads: dict[str, dict] = {}
    items: dict[str, dict[str, set]] = defaultdict(lambda: {"train": set(), "test": set()})
    order: list[str] = []
    snapshot = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SplitError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if "snapshot" in obj:
            snapshot = obj["snapshot"]
            continue
        pid = obj["plan_id"]
        if pid not in heads:
            heads[pid] = {"kind": obj["kind"], "granularity": None, "metadata": {}}
            order.append(pid)
        if obj["role"] == "plan":
            heads[pid].update(granularity=obj["granularity"], metadata=obj.get("metadata", {}))
        elif obj["role"] in ("train", "test"):
            seg = obj.get("segment")
            items[pid][obj["role"]].add(PlanItem(obj["item_id"], *(seg or (None, None))))
        else:
            raise SplitError(f"line {lineno}: unknown role {obj['role']!r}")
    plans = []
    for pid in order:
        h = heads[pid]
        gran = h["granularity"] or (
            "segment" if any(it.is_segment for side in items[pid].values() for it in side) else "acquisition")
        plans.append(SplitPlan(pid, gran, items[pid]["train"], items[pid]["test"], h["kind"], h["metadata"]))
    return plans, snapshot

from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from bearingleak import splits
from bearingleak.datamodel import CWRU, PU, UORED, bearings_of, bearing_class


def _bearings(plan, records, side):
    by_id = {r.acquisition_id: r for r in records}
    items = plan.train_items if side == "train" else plan.test_items
    return {by_id[i.acquisition_id].bearing_id for i in items}


def _class_counts(plan, records, profile, side):
    b = bearings_of(records, profile)
    return Counter(bearing_class(b[x]) for x in _bearings(plan, records, side))


def test_uored_protocol(uored_records):
    tune, ev = splits.generate_uored_splits(uored_records.records, UORED, 5, 100, seed=0)
    assert len(tune) == 5 and len(ev) == 100
    assert len({p.content_hash() for p in tune + ev}) == 105
    for p in tune + ev:
        assert _class_counts(p, uored_records.records, UORED, "train") == {m: 3 for m in UORED.fault_modes}
        assert _class_counts(p, uored_records.records, UORED, "test") == {m: 2 for m in UORED.fault_modes}


def test_uored_plans_depend_only_on_seed(uored_records):
    a = splits.generate_uored_splits(uored_records.records, UORED, 5, 10, seed=3)
    b = splits.generate_uored_splits(uored_records.records, UORED, 5, 10, seed=3)
    c = splits.generate_uored_splits(uored_records.records, UORED, 5, 10, seed=4)
    assert [p.content_hash() for p in a[1]] == [p.content_hash() for p in b[1]]
    assert [p.content_hash() for p in a[1]] != [p.content_hash() for p in c[1]]


def test_too_many_plans_rejected(uored_records):
    with pytest.raises(splits.SplitError, match="only 10000"):
        splits.generate_uored_splits(uored_records.records, UORED, 1, 10_000)


def test_pu_protocol(pu_records):
    tune, ev = splits.generate_pu_splits(pu_records.records, PU, 5, 100)
    for p in tune + ev:
        train = _class_counts(p, pu_records.records, PU, "train")
        test = _class_counts(p, pu_records.records, PU, "test")
        assert train == {"healthy": 4, "inner": 4, "outer": 3}
        assert test == {"healthy": 2, "inner": 2, "outer": 2}
        assert train["inner"] + train["outer"] == 7
        assert not _bearings(p, pu_records.records, "train") & splits.PU_COMBINED_FAULT_BEARINGS


def test_pu_combined_bearings_must_be_excluded(pu_records):
    req = splits.SplitRequest(PU, {"healthy": (4, 2), "inner": (4, 2), "outer": (3, 2)})
    with pytest.raises(splits.SplitError, match="combined"):
        splits.bearing_wise_splits(pu_records.records, req)


def test_cwru_protocol(cwru_records):
    plans = splits.generate_cwru_splits(cwru_records.records, CWRU, 50)
    assert len(plans) == 100
    assert len({p.content_hash() for p in plans}) == 100
    for p in plans:
        assert splits.audit_split(p, cwru_records.records).clean
    sides = Counter(p.metadata["healthy_train_side"] for p in plans)
    assert sides == {"DE": 50, "FE": 50}


def test_cwru_three_folds_cover_every_size(cwru_records):
    folds = splits.cwru_3fold_assignments(cwru_records.records, CWRU, seed=2)
    assert len(folds) == 3
    for sizes in zip(*folds):
        assert sorted(sizes) == ["007", "014", "021"]
    plans = splits.generate_cwru_3fold(cwru_records.records, CWRU, seed=2)
    assert len(plans) == 6


def test_cwru_eval_excludes_tuning_folds(cwru_records):
    folds = splits.cwru_3fold_assignments(cwru_records.records, CWRU)
    ev = splits.generate_cwru_splits(cwru_records.records, CWRU, 100, exclude=folds)
    tune = splits.generate_cwru_3fold(cwru_records.records, CWRU)
    assert not {p.content_hash() for p in ev} & {p.content_hash() for p in tune}


def test_protocol_plans_cwru_one_to_two(cwru_records):
    _, ev = splits.protocol_plans(cwru_records.records, CWRU, 0, 10, ratio=(1, 2))
    for p in ev:
        assert len(p.metadata["test_cells"].split(";")) == 12


@pytest.mark.parametrize("mode", ["pu_condition_holdout", "pu_repetition_holdout", "segmentation"])
def test_pu_leaky_modes_audit(pu_records, mode):
    _, ev = splits.generate_pu_splits(pu_records.records, PU, 0, 5)
    for base in ev:
        plan = splits.generate_leaky_plan(pu_records.records, base, splits.LeakMode(mode))
        assert plan.declared_kind == splits.EXPECTED_FINDING[mode]
        assert splits.audit_split(plan, pu_records.records).kind == splits.EXPECTED_FINDING[mode]


def test_repetition_holdout_counts(pu_records):
    _, ev = splits.generate_pu_splits(pu_records.records, PU, 0, 1)
    plan = splits.generate_leaky_plan(pu_records.records, ev[0], splits.LeakMode("pu_repetition_holdout"))
    n_groups = 11 * 4  # training bearings x conditions
    assert len(plan.train_items) == 15 * n_groups
    assert len(plan.test_items) == 5 * n_groups


def test_severe_reinsertion(uored_records):
    _, ev = splits.generate_uored_splits(uored_records.records, UORED, 0, 1)
    plan = splits.generate_leaky_plan(uored_records.records, ev[0], splits.LeakMode("uored_severe_reinsertion"))
    by_id = uored_records.by_id()
    moved = [by_id[i.acquisition_id] for i in plan.test_items
             if by_id[i.acquisition_id].bearing_id in _bearings(ev[0], uored_records.records, "train")]
    assert moved and all(r.severity.value == "strong" for r in moved)
    assert len(plan.test_items) == len(ev[0].test_items)


def test_cwru_control_arrangement_is_clean(cwru_records):
    base = splits.generate_cwru_splits(cwru_records.records, CWRU, 1)[0]
    for group in splits.cwru_groups(cwru_records.records, CWRU):
        leaky = splits.generate_leaky_plan(cwru_records.records, base,
                                           splits.LeakMode("cwru_condition_groups", train_group=group), CWRU)
        control = splits.generate_leaky_plan(
            cwru_records.records, base,
            splits.LeakMode("cwru_condition_groups", train_group=group, arrangement="control"), CWRU)
        assert splits.audit_split(leaky, cwru_records.records).kind == "condition_wise"
        assert splits.audit_split(control, cwru_records.records).clean


def test_audit_precedence_and_witnesses(uored_records):
    _, ev = splits.generate_uored_splits(uored_records.records, UORED, 0, 1)
    seg = splits.generate_leaky_plan(uored_records.records, ev[0], splits.LeakMode("segmentation"))
    f = splits.audit_split(seg, uored_records.records)
    assert f.kind == "segmentation_level"
    shared = {i.acquisition_id for i in seg.train_items} & {i.acquisition_id for i in seg.test_items}
    assert all(w[0] in shared for w in f.witnesses)


def test_audit_unknown_item(uored_records):
    plan = splits.SplitPlan("p", "acquisition", {splits.PlanItem("nope")},
                            {splits.PlanItem(uored_records.records[0].acquisition_id)}, "bearing_wise")
    with pytest.raises(splits.AuditError):
        splits.audit_split(plan, uored_records.records)


def test_plan_validation():
    with pytest.raises(ValueError):
        splits.SplitPlan("p", "acquisition", set(), {splits.PlanItem("a")}, "bearing_wise")
    with pytest.raises(ValueError):
        splits.SplitPlan("p", "acquisition", {splits.PlanItem("a")}, {splits.PlanItem("a")}, "bearing_wise")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
def test_plan_file_roundtrip(uored_records, seed, n):
    tune, ev = splits.generate_uored_splits(uored_records.records, UORED, 1, n, seed)
    plans = tune + [splits.generate_leaky_plan(uored_records.records, ev[0], splits.LeakMode("segmentation"))]
    text = splits.dump_plans(plans, header={"seed": seed})
    back, snap = splits.parse_plans(text)
    assert snap == {"seed": seed}
    assert [p.content_hash() for p in back] == [p.content_hash() for p in plans]
    assert [p.metadata for p in back] == [p.metadata for p in plans]
    assert splits.dump_plans(back, header={"seed": seed}) == text

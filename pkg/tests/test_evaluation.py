
import numpy as np
import pytest
from hypothesis import given, strategies as st

from bearingleak import evaluation as ev
from bearingleak import splits
from bearingleak.models import ModelSpec
from tests import oracles


def test_auroc_examples():
    assert ev.auroc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0
    assert ev.auroc([0.9, 0.3, 0.8, 0.2], [1, 1, 0, 0]) == 0.75
    assert ev.auroc([0.4] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_auroc_single_class():
    with pytest.raises(ev.UndefinedMetricError):
        ev.auroc([0.1, 0.2], [1, 1])


scores_labels = st.integers(2, 30).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6).map(lambda v: v / 6), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda ys: 0 < sum(ys) < len(ys)),
))


@given(scores_labels)
def test_auroc_against_pair_counting(sl):
    s, y = sl
    assert ev.auroc(s, y) == pytest.approx(float(oracles.auroc_pairs(s, y)), abs=1e-12)


@given(scores_labels)
def test_roc_area_matches(sl):
    s, y = sl
    curve = ev.roc_curve(s, y)
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
    xs, ys = zip(*curve.points)
    assert list(xs) == sorted(xs) and list(ys) == sorted(ys)
    assert curve.area() == pytest.approx(ev.auroc(s, y), abs=1e-12)


@given(scores_labels)
def test_flip_complement(sl):
    s, y = sl
    assert ev.auroc(s, y) + ev.auroc(s, [1 - v for v in y]) == pytest.approx(1.0, abs=1e-12)


@given(scores_labels, st.sampled_from([np.exp, np.arctan, lambda v: 3 * v**3 + v]))
def test_monotone_invariance(sl, fn):
    s, y = sl
    assert ev.auroc(fn(np.array(s)), y) == pytest.approx(ev.auroc(s, y), abs=1e-12)


def test_macro_auroc():
    assert ev.macro_auroc([1.0, 1.0, 1.0, 1.0]) == (1.0, 0)
    assert ev.macro_auroc([0.9, 0.7]).value == pytest.approx(0.8)
    m = ev.macro_auroc([0.93, None, 0.87])
    assert m.value == pytest.approx(0.90) and m.n_excluded == 1
    with pytest.raises(ev.UndefinedMetricError):
        ev.macro_auroc([None, float("nan")])


def test_null_model_macro_auroc():
    rng = np.random.default_rng(0)
    vals = []
    for _ in range(100):
        Y = rng.integers(0, 2, size=(200, 4))
        vals.append(ev.macro_auroc(ev.per_mode_auroc(rng.random((200, 4)), Y)).value)
    assert abs(np.mean(vals) - 0.5) < 0.05


@pytest.fixture(scope="module")
def plans(small_uored):
    return splits.generate_uored_splits(small_uored.records, small_uored.profile, 5, 4, seed=0)


@pytest.fixture(scope="module")
def pipeline(small_uored):
    return ev.Pipeline(small_uored, ev.PipelineConfig())


def test_run_cvm_single_point(plans, pipeline):
    spec = ModelSpec("decision_tree", {"max_depth": 2})
    res = ev.run_cvm([spec], plans[0], pipeline)
    assert res.selected == spec
    assert len(res.table) == 5


def test_run_cvm_tie_prefers_simpler(plans, pipeline):
    # Depth 20 and depth 30 grow identical trees, so the tie goes to the shallower one.
    deep = ModelSpec("decision_tree", {"max_depth": 30})
    shallow = ModelSpec("decision_tree", {"max_depth": 20})
    res = ev.run_cvm([deep, shallow], plans[0][:2], pipeline)
    assert res.means[0] == res.means[1]
    assert res.selected == shallow


def test_run_cv_report(plans, pipeline):
    spec = ModelSpec("decision_tree", {"max_depth": 4})
    rep = ev.run_cv(spec, plans[1], pipeline, plans[0])
    assert len(rep.per_run) == 4 and rep.ok
    mean, std, n = rep.aggregate[("decision_tree", "combined")]
    macros = [r.macro for r in rep.per_run]
    assert mean == float(np.mean(macros)) and std == float(np.std(macros)) and n == 4
    assert rep.per_run_csv().startswith("# snapshot: ")


def test_run_cv_rejects_overlap(plans, pipeline):
    with pytest.raises(splits.SplitError):
        ev.run_cv(ModelSpec("decision_tree"), plans[1], pipeline, plans[1][:1])


def test_workers_do_not_change_output(small_uored, plans):
    spec = ModelSpec("logistic_regression", {"epochs": 50})
    one = ev.run_cv(spec, plans[1], ev.Pipeline(small_uored, ev.PipelineConfig(n_workers=1)))
    two = ev.run_cv(spec, plans[1], ev.Pipeline(small_uored, ev.PipelineConfig(n_workers=2)))
    assert one.per_run_csv().splitlines()[1:] == two.per_run_csv().splitlines()[1:]


def test_failed_plan_recorded(small_uored, plans, pipeline):
    bad = splits.SplitPlan("bad", "acquisition", {splits.PlanItem("missing")},
                           {splits.PlanItem(small_uored.records[0].acquisition_id)}, "bearing_wise")
    rep = ev.run_cv(ModelSpec("decision_tree"), [plans[1][0], bad], pipeline)
    assert [p for p, _ in rep.failures] == ["bad"]
    assert len(rep.per_run) == 1 and not rep.ok


def test_diversity_sweep_equalises_training_volume(small_uored):
    spec = ModelSpec("decision_tree", {"max_depth": 4})
    out = ev.diversity_sweep(small_uored, [(1, 4), (4, 1)], spec, ev.PipelineConfig(), n_eval=2)
    budget = {r.n_train for rep in out.values() for r in rep.per_run}
    assert len(budget) == 1  # 3:2 baseline volume everywhere
    with pytest.raises(splits.SplitError):
        ev.diversity_sweep(small_uored, [(5, 0)], spec, ev.PipelineConfig(), n_eval=2)

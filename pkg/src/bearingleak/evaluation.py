"""ROC/AUROC metrics and the double cross-validation (tuning then evaluation) driver."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from . import __version__
from .datamodel import DEFAULT_BANDS, Manifest
from .features import REPRESENTATION_COLUMNS, FeatureExtractor, FeatureTable, extract_feature_table
from .models import ModelSpec, fit, score
from .splits import SplitError, SplitPlan, protocol_plans

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    """AUROC needs at least one positive and one negative label."""


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise UndefinedMetricError("AUROC undefined: labels contain a single class")
    return s, y.astype(bool)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney estimate: P(score_pos > score_neg) with ties counted 1/2."""
    s, y = _check_binary(scores, labels)
    ranks = rankdata(s)  # average ranks for ties
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), from (0, 0) to (1, 1)

    def area(self) -> float:
        """Trapezoidal area under the curve."""
        area = 0.0
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            area += (x1 - x0) * (y0 + y1) / 2.0
        return area


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """ROC points at every distinct score threshold; tied scores form one diagonal step."""
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]  # last index of each tie group
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    pts = [(0.0, 0.0)] + [(f / n_neg, t / n_pos) for f, t in zip(fp.tolist(), tp.tolist())]
    return RocCurve(tuple(pts))


class MacroAuroc(NamedTuple):
    value: float
    n_excluded: int


def macro_auroc(per_mode: Sequence[float | None]) -> MacroAuroc:
    """Mean of defined per-mode AUROCs; ``None``/NaN entries are excluded and counted."""
    if len(per_mode) == 0:
        raise ValueError("need at least one fault mode")
    defined = [v for v in per_mode if v is not None and not math.isnan(v)]
    if not defined:
        raise UndefinedMetricError("AUROC undefined for every fault mode")
    return MacroAuroc(float(sum(defined) / len(defined)), len(per_mode) - len(defined))


def per_mode_auroc(scores: np.ndarray, Y: np.ndarray) -> list[float | None]:
    out: list[float | None] = []
    for m in range(Y.shape[1]):
        try:
            out.append(auroc(scores[:, m], Y[:, m]))
        except UndefinedMetricError:
            out.append(None)
    return out


# --------------------------------------------------------------------------- pipeline


# Shallow-model grids searched by the tuning stage (artifact choices).
GRIDS: dict[str, list[dict[str, Any]]] = {
    "logistic_regression": [
        {"learning_rate": lr, "l2": l2} for lr in (1e-2, 1e-3) for l2 in (0.0, 1e-3)
    ],
    "decision_tree": [
        {"max_depth": d, "min_leaf": m} for d in (4, 8, 16) for m in (1, 5)
    ],
    "random_forest": [
        {"n_trees": 100, "max_depth": d, "feature_subsample": f} for d in (8, 16) for f in (0.5, "sqrt")
    ],
    "linear_svm": [{"c_margin": c} for c in (0.1, 1.0, 10.0)],
}


def default_grid(kind: str, seed: int = 0) -> list[ModelSpec]:
    return [ModelSpec(kind, hp, seed) for hp in GRIDS[kind]]


@dataclass(frozen=True)
class PipelineConfig:
    representation: str = "combined"
    band: tuple[float, float] | None = None  # profile default when None
    window_s: float = 1.0
    tolerance_fraction: float = 0.02
    train_row_budget: int | None = None  # subsample, or pad with Random Crop + Random Gain, to this many rows
    gain_sigma: float = 0.7
    seed: int = 0
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.representation not in REPRESENTATION_COLUMNS:
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.n_workers < 1:
            raise ValueError("n_workers must be positive")

    def resolved_band(self, manifest: Manifest) -> tuple[float, float]:
        if self.band is not None:
            return tuple(self.band)
        return DEFAULT_BANDS.get(manifest.profile.name, (500.0, 10_000.0))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["band"] = list(self.band) if self.band else None
        return d


class Pipeline:
    """Features for plans over one manifest, cached across plans."""

    def __init__(self, manifest: Manifest, config: PipelineConfig, extractor: FeatureExtractor | None = None):
        self.manifest = manifest
        self.config = config
        source = "fft" if config.representation == "frequency_features" else "envelope"
        self.extractor = extractor or FeatureExtractor(
            manifest,
            config.resolved_band(manifest),
            window_s=config.window_s,
            harmonic_source=source,
            tolerance_fraction=config.tolerance_fraction,
        )
        self.columns = REPRESENTATION_COLUMNS[config.representation]

    def tables(self, plan: SplitPlan) -> tuple[FeatureTable, FeatureTable]:
        t = extract_feature_table(self.manifest, plan, self.extractor.band, extractor=self.extractor)
        if t.errors:
            raise RuntimeError(f"plan {plan.plan_id}: feature extraction failed for {sorted(t.errors)}")
        train, test = t.train, t.test
        budget = self.config.train_row_budget
        if budget is not None and len(train) != budget:
            rng = np.random.default_rng([self.config.seed, zlib.crc32(plan.plan_id.encode())])
            if len(train) > budget:
                keep = np.sort(rng.choice(len(train), size=budget, replace=False))
                train = FeatureTable(train.X[keep], train.Y[keep], [train.provenance[i] for i in keep],
                                     train.columns)
            else:
                if plan.granularity != "acquisition":
                    # Crops are drawn from whole recordings, which would reach into test segments.
                    raise ValueError("training-volume padding needs acquisition-level plans")
                by_id = self.manifest.by_id()
                recs = [by_id[a] for a in sorted({p[0] for p in train.provenance})]
                extra = self.extractor.augmented_rows(recs, budget - len(train), rng, self.config.gain_sigma)
                train = FeatureTable.concat([train, extra])
        return train.select(self.columns), test.select(self.columns)


@dataclass(frozen=True)
class RunResult:
    plan_id: str
    model: str
    representation: str
    per_mode: tuple[float | None, ...]
    macro: float
    n_excluded: int
    n_train: int
    n_test: int


def _fit_and_score(spec: ModelSpec, Xtr, Ytr, Xte, Yte) -> tuple[list[float | None], MacroAuroc]:
    model = fit(spec, Xtr, Ytr)
    aurocs = per_mode_auroc(score(model, Xte), Yte)
    return aurocs, macro_auroc(aurocs)


def _job(args):
    spec, Xtr, Ytr, Xte, Yte = args
    try:
        return _fit_and_score(spec, Xtr, Ytr, Xte, Yte), None
    except Exception as exc:  # noqa: BLE001 - reported per plan
        return None, f"{type(exc).__name__}: {exc}"


def _evaluate(spec: ModelSpec, plans: Sequence[SplitPlan], pipeline: Pipeline):
    """(plan, RunResult | None, error | None) per plan, in plan order."""
    jobs, prepared = [], []
    for plan in plans:
        try:
            train, test = pipeline.tables(plan)
        except Exception as exc:  # noqa: BLE001
            prepared.append((plan, None, f"{type(exc).__name__}: {exc}"))
            continue
        prepared.append((plan, (train, test), None))
        jobs.append((spec, train.X, train.Y, test.X, test.Y))
    if pipeline.config.n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=pipeline.config.n_workers) as pool:
            outputs = list(pool.map(_job, jobs))
    else:
        outputs = [_job(j) for j in jobs]
    results = []
    it = iter(outputs)
    for plan, tables, err in prepared:
        if err is not None:
            results.append((plan, None, err))
            continue
        out, err = next(it)
        if err is not None:
            results.append((plan, None, err))
            continue
        aurocs, macro = out
        train, test = tables
        results.append((plan, RunResult(plan.plan_id, spec.kind, pipeline.config.representation,
                                        tuple(aurocs), macro.value, macro.n_excluded,
                                        len(train), len(test)), None))
    return results


@dataclass
class CvmResult:
    selected: ModelSpec
    table: list[dict]  # one row per (grid point, plan)
    means: list[float | None]  # per grid point; None when every plan failed


def run_cvm(grid: Sequence[ModelSpec], tuning_plans: Sequence[SplitPlan], pipeline: Pipeline) -> CvmResult:
    """Pick the grid point with the highest mean tuning-plan Macro AUROC.

    Ties go to the lower ``ModelSpec.complexity()``, then to grid order. Failed
    (grid point, plan) runs are logged and skipped; a grid point that fails on
    every plan is excluded.
    """
    if not grid:
        raise ValueError("empty model grid")
    if not tuning_plans:
        raise ValueError("need at least one tuning plan")
    table, means = [], []
    for gi, spec in enumerate(grid):
        vals = []
        for plan, res, err in _evaluate(spec, tuning_plans, pipeline):
            if err is not None:
                log.warning("grid point %d on %s failed: %s", gi, plan.plan_id, err)
            else:
                vals.append(res.macro)
            table.append({"grid_index": gi, "spec": spec.to_dict(), "plan_id": plan.plan_id,
                          "macro_auroc": res.macro if res else None, "error": err})
        means.append(float(np.mean(vals)) if vals else None)
    candidates = [i for i, m in enumerate(means) if m is not None]
    if not candidates:
        raise RuntimeError("every grid point failed on every tuning plan")
    best = max(candidates, key=lambda i: (means[i], tuple(-c for c in grid[i].complexity()), -i))
    return CvmResult(grid[best], table, means)


def _check_disjoint(eval_plans: Sequence[SplitPlan], tuning_plans: Sequence[SplitPlan]) -> None:
    ids = {p.plan_id for p in tuning_plans}
    hashes = {p.content_hash() for p in tuning_plans}
    for p in eval_plans:
        if p.plan_id in ids or p.content_hash() in hashes:
            raise SplitError(f"evaluation plan {p.plan_id} coincides with a tuning plan")


@dataclass
class ExperimentReport:
    per_run: list[RunResult]
    failures: list[tuple[str, str]]
    config: dict
    fault_modes: tuple[str, ...] = ()

    @property
    def aggregate(self) -> dict[tuple[str, str], tuple[float, float, int]]:
        """(model, representation) -> (mean, population std, completed runs)."""
        groups: dict[tuple[str, str], list[float]] = {}
        for r in self.per_run:
            groups.setdefault((r.model, r.representation), []).append(r.macro)
        return {k: (float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(groups.items())}

    @property
    def ok(self) -> bool:
        return not self.failures

    def _snapshot_line(self) -> str:
        return "# snapshot: " + json.dumps(self.config, sort_keys=True) + "\n"

    def per_run_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self._snapshot_line())
        w = csv.writer(buf, lineterminator="\n")
        modes = list(self.fault_modes)
        if not modes and self.per_run:
            modes = [f"mode{i}" for i in range(len(self.per_run[0].per_mode))]
        w.writerow(["plan_id", "model", "representation", "macro_auroc", "excluded_modes", "n_train", "n_test"]
                   + [f"auroc_{m}" for m in modes])
        for r in self.per_run:
            w.writerow([r.plan_id, r.model, r.representation, repr(r.macro), r.n_excluded, r.n_train, r.n_test]
                       + ["" if v is None else repr(v) for v in r.per_mode])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self._snapshot_line())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "representation", "mean_macro_auroc", "std_macro_auroc", "completed_runs", "failed_runs"])
        for (model, rep), (mean, std, n) in self.aggregate.items():
            w.writerow([model, rep, repr(mean), repr(std), n, len(self.failures)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "tool_version": __version__,
            "config": self.config,
            "aggregate": [
                {"model": m, "representation": rep, "mean": mean, "std": std, "completed_runs": n}
                for (m, rep), (mean, std, n) in self.aggregate.items()
            ],
            "failures": [{"plan_id": p, "error": e} for p, e in self.failures],
        }

    def write(self, out_dir: str | Path, prefix: str = "") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{prefix}per_run.csv", out / f"{prefix}aggregate.csv", out / f"{prefix}summary.json"]
        paths[0].write_text(self.per_run_csv(), encoding="utf-8")
        paths[1].write_text(self.aggregate_csv(), encoding="utf-8")
        paths[2].write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return paths


def run_cv(
    spec: ModelSpec,
    eval_plans: Sequence[SplitPlan],
    pipeline: Pipeline,
    tuning_plans: Sequence[SplitPlan] = (),
    config_snapshot: Mapping | None = None,
) -> ExperimentReport:
    """Fit and score ``spec`` once per evaluation plan; failures are recorded, not raised."""
    _check_disjoint(eval_plans, tuning_plans)
    per_run, failures = [], []
    for plan, res, err in _evaluate(spec, eval_plans, pipeline):
        if err is None:
            per_run.append(res)
        else:
            failures.append((plan.plan_id, err))
    snapshot = dict(config_snapshot or {})
    snapshot.setdefault("tool_version", __version__)
    snapshot.setdefault("model", spec.to_dict())
    snapshot.setdefault("pipeline", pipeline.config.to_dict())
    snapshot.setdefault("fft_window", "rectangular")
    snapshot.setdefault("grids", GRIDS)
    return ExperimentReport(per_run, failures, snapshot, pipeline.manifest.profile.fault_modes)


# --------------------------------------------------------------------------- diversity sweep


def ratio_plans(manifest: Manifest, ratio: tuple[int, int], n_eval: int, seed: int) -> list[SplitPlan]:
    """Evaluation plans with ``ratio`` = (train, test) bearings per class.

    For CWRU the ratio counts fault sizes per (location, type) pair: 2:1 or 1:2.
    """
    n_train, n_test = ratio
    if n_train < 1 or n_test < 1:
        raise SplitError(f"infeasible ratio {n_train}:{n_test}: both sides need bearings")
    return protocol_plans(manifest.records, manifest.profile, 0, n_eval, seed, (n_train, n_test))[1]


def diversity_sweep(
    manifest: Manifest,
    ratios: Sequence[tuple[int, int]],
    spec: ModelSpec,
    config: PipelineConfig,
    n_eval: int = 100,
    seed: int = 0,
    baseline: tuple[int, int] = (3, 2),
) -> dict[tuple[int, int], ExperimentReport]:
    """``run_cv`` per ratio with the training-row budget held at the baseline ratio's volume."""
    plans_by_ratio = {tuple(r): ratio_plans(manifest, tuple(r), n_eval, seed) for r in ratios}
    if manifest.profile.name == "cwru" and baseline == (3, 2):
        baseline = (2, 1)
    base_plan = ratio_plans(manifest, baseline, 2, seed)[0]
    probe = Pipeline(manifest, PipelineConfig(**{**config.to_dict(), "train_row_budget": None,
                                                 "band": config.band}))
    budget = len(probe.tables(base_plan)[0])
    cfg = PipelineConfig(**{**config.to_dict(), "band": config.band, "train_row_budget": budget})
    pipeline = Pipeline(manifest, cfg, extractor=probe.extractor)
    out = {}
    for r, plans in plans_by_ratio.items():
        snap = {"ratio": f"{r[0]}:{r[1]}", "baseline_ratio": f"{baseline[0]}:{baseline[1]}",
                "train_row_budget": budget, "seed": seed}
        out[r] = run_cv(spec, plans, pipeline, config_snapshot=snap)
    return out

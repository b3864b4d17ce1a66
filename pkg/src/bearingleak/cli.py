"""Command-line entry point: ``bearingleak {toy,split,audit,features,run,report}``.

Every artifact starts with the command's config snapshot (a ``# snapshot:``
comment in CSV files, a ``{"snapshot": ...}`` line in plan files, the
``config`` key in JSON summaries). Passing an artifact to ``--config`` replays
the command that produced it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import evaluation as ev
from . import splits, synthetic, toy
from .datamodel import PROFILES, Manifest, ManifestError, load_manifest
from .features import FeatureExtractionError, REPRESENTATION_COLUMNS, write_feature_csv
from .models import MODEL_KINDS, ModelError, ModelSpec

EXIT_OK = 0
EXIT_RUN_FAILURES = 1
EXIT_USAGE = 2
EXIT_CONDITION = 3
EXIT_REPETITION = 4
EXIT_SEGMENTATION = 5
EXIT_MANIFEST = 6
EXIT_SPLIT = 7
EXIT_FEATURES = 8
EXIT_CONFIG = 9
EXIT_TOY = 10

AUDIT_EXIT = {
    "bearing_wise_clean": EXIT_OK,
    "condition_wise": EXIT_CONDITION,
    "repetition_wise": EXIT_REPETITION,
    "segmentation_level": EXIT_SEGMENTATION,
}

EPILOG = """\
exit codes:
  0  success (audit: every plan is bearing_wise_clean)
  1  run finished but at least one plan failed
  2  usage error (bad flag values, empty model grid, infeasible request)
  3  audit: condition_wise leakage found
  4  audit: repetition_wise leakage found
  5  audit: segmentation_level leakage found
  6  manifest could not be read or is inconsistent
  7  split generation or plan file error
  8  feature extraction error
  9  config file error
 10  toy experiment failed
"""

# Arguments that never enter the snapshot: where to write, and the config file itself.
_NOT_SNAPSHOTTED = {"out", "config", "command", "func", "verbose", "input"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _ratio(text: str) -> list[int]:
    try:
        a, b = text.split(":")
        return [int(a), int(b)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TRAIN:TEST, got {text!r}") from None


def _band(text: str) -> list[float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
        return [lo, hi]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW,HIGH in Hz, got {text!r}") from None


# --------------------------------------------------------------------------- config snapshots


def snapshot(args: argparse.Namespace) -> dict:
    values = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_SNAPSHOTTED}
    return {"command": args.command, "tool_version": __version__, "args": values}


def _snapshot_line(snap: dict) -> str:
    return "# snapshot: " + json.dumps(snap, sort_keys=True) + "\n"


def read_config(path: str | Path) -> dict:
    """Config dict from a JSON config file or from any artifact this tool wrote."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG) from None
    first = text.split("\n", 1)[0]
    try:
        if first.startswith("# snapshot: "):
            obj = json.loads(first[len("# snapshot: "):])
        else:
            try:
                obj = json.loads(text)
            except json.JSONDecodeError:
                obj = json.loads(first)
        if "snapshot" in obj:
            obj = obj["snapshot"]
        if "config" in obj and isinstance(obj["config"], dict):
            obj = obj["config"]
    except (json.JSONDecodeError, TypeError) as exc:
        raise CliError(f"config {path} is neither a JSON config nor a tool artifact: {exc}", EXIT_CONFIG) from None
    if not isinstance(obj, dict):
        raise CliError(f"config {path} must hold a JSON object", EXIT_CONFIG)
    return obj


def apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser, config: dict) -> None:
    """Overlay config values on ``args``; values given on the command line lose, with a warning."""
    if "command" in config and config["command"] != args.command:
        raise CliError(f"config was written by '{config['command']}', not '{args.command}'", EXIT_CONFIG)
    values = config.get("args", config)
    known = {k for k in vars(args) if k not in _NOT_SNAPSHOTTED}
    unknown = sorted(set(values) - known - {"command", "tool_version"})
    if unknown:
        raise CliError(f"unknown config key(s) for '{args.command}': {unknown}", EXIT_CONFIG)
    for key in sorted(set(values) & known):
        current, default = getattr(args, key), parser.get_default(key)
        if current != default and current != values[key]:
            warnings.warn(f"--{key.replace('_', '-')}={current!r} overridden by config value {values[key]!r}",
                          stacklevel=2)
        setattr(args, key, values[key])


# --------------------------------------------------------------------------- helpers


def _load(args) -> Manifest:
    """Manifest from --manifest, or the records-only synthetic layout of --profile."""
    if args.manifest:
        try:
            manifest = load_manifest(args.manifest)
        except OSError as exc:
            raise CliError(f"cannot read manifest: {exc}", EXIT_MANIFEST) from None
        except ManifestError as exc:
            raise CliError(f"manifest error: {exc}", EXIT_MANIFEST) from None
        if getattr(args, "profile", None) and manifest.profile.name != args.profile:
            raise CliError(
                f"--profile {args.profile} does not match the manifest's profile {manifest.profile.name}", EXIT_USAGE)
        return manifest
    if not getattr(args, "profile", None):
        raise CliError("give --manifest or --profile", EXIT_USAGE)
    return synthetic.BUILDERS[args.profile](None)


def _read_plans(path: str) -> list[splits.SplitPlan]:
    try:
        plans, _ = splits.parse_plans(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read plans: {exc}", EXIT_SPLIT) from None
    except (splits.SplitError, KeyError, ValueError) as exc:
        raise CliError(f"bad plan file {path}: {exc}", EXIT_SPLIT) from None
    if not plans:
        raise CliError(f"plan file {path} holds no plans", EXIT_SPLIT)
    return plans


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------- commands


def cmd_toy(args) -> int:
    if args.seeds < 1:
        raise CliError("--seeds must be at least 1", EXIT_USAGE)
    try:
        config = toy.ToyConfig(args.n_bearings, args.n_fault_features, args.a_f, args.a_b,
                               args.samples_per_bearing, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    half = config.n_bearings // 2
    bad = [k for k in args.bearings if not 1 <= k <= half]
    if bad or not args.bearings:
        raise CliError(f"--bearings values must lie in [1, {half}], got {args.bearings}", EXIT_USAGE)
    for name in args.models:
        if name not in toy.TOY_MODELS:
            raise CliError(f"unknown toy model {name!r}; choose from {sorted(toy.TOY_MODELS)}", EXIT_USAGE)
    for mode in args.modes:
        if mode not in toy.TEST_MODES:
            raise CliError(f"unknown mode {mode!r}; choose from {toy.TEST_MODES}", EXIT_USAGE)

    snap = snapshot(args)
    snap["toy_models"] = {n: toy.TOY_MODELS[n].to_dict() for n in args.models}
    runs, agg = io.StringIO(), io.StringIO()
    runs.write(_snapshot_line(snap))
    agg.write(_snapshot_line(snap))
    rw = csv.writer(runs, lineterminator="\n")
    aw = csv.writer(agg, lineterminator="\n")
    rw.writerow(["model", "mode", "n_train_bearings", "seed", "accuracy"])
    aw.writerow(["model", "mode", "n_train_bearings", "mean", "std"])
    for name in args.models:
        for mode in args.modes:
            for k in args.bearings:
                try:
                    s = toy.run_toy_experiment(config, k, toy.TOY_MODELS[name], mode, args.seeds)
                except toy.ToyRunError as exc:
                    raise CliError(str(exc), EXIT_TOY) from None
                for i, acc in enumerate(s.accuracies):
                    rw.writerow([name, mode, k, i, repr(acc)])
                aw.writerow([name, mode, k, repr(s.mean), repr(s.std)])
    out = Path(args.out)
    _write(out / "toy_runs.csv", runs.getvalue())
    _write(out / "toy_aggregate.csv", agg.getvalue())
    ceiling = toy.theoretical_max_accuracy(args.a_f, args.n_fault_features)
    print(f"theoretical ceiling: {ceiling:.4f}")
    print(f"wrote {out / 'toy_runs.csv'} and {out / 'toy_aggregate.csv'}")
    return EXIT_OK


def _generate(args, manifest: Manifest) -> tuple[list[splits.SplitPlan], list[splits.SplitPlan]]:
    ratio = tuple(args.ratio) if args.ratio else None
    try:
        tuning, evaluation = splits.protocol_plans(
            manifest.records, manifest.profile, args.tuning, args.eval, args.seed, ratio)
    except splits.SplitError as exc:
        raise CliError(f"split error: {exc}", EXIT_SPLIT) from None
    return tuning, evaluation


def cmd_split(args) -> int:
    manifest = _load(args)
    tuning, evaluation = _generate(args, manifest)
    plans = tuning + evaluation
    if args.kind != "bearing_wise":
        mode = splits.LeakMode(args.kind, holdout_fraction=args.holdout_fraction,
                               arrangement=args.arrangement, seed=args.seed)
        try:
            plans = [splits.generate_leaky_plan(manifest.records, p, mode, manifest.profile) for p in evaluation]
        except splits.SplitError as exc:
            raise CliError(f"split error: {exc}", EXIT_SPLIT) from None
    text = splits.dump_plans(plans, header=snapshot(args))
    if args.out:
        _write(Path(args.out), text)
        print(f"wrote {len(plans)} plans to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_audit(args) -> int:
    manifest = _load(args)
    plans = _read_plans(args.plans)
    worst = EXIT_OK
    for plan in plans:
        try:
            finding = splits.audit_split(plan, manifest.records)
        except splits.AuditError as exc:
            raise CliError(f"audit error in {plan.plan_id}: {exc}", EXIT_SPLIT) from None
        print(f"{plan.plan_id}\t{finding.kind}")
        for w in finding.witnesses[: args.max_witnesses]:
            print("  witness: " + " / ".join(w))
        if len(finding.witnesses) > args.max_witnesses:
            print(f"  ... {len(finding.witnesses) - args.max_witnesses} more")
        worst = max(worst, AUDIT_EXIT[finding.kind])
    return worst


def cmd_features(args) -> int:
    manifest = _load(args)
    plans = _read_plans(args.plans)
    if args.plan_id:
        plans = [p for p in plans if p.plan_id == args.plan_id]
        if not plans:
            raise CliError(f"plan {args.plan_id!r} not in {args.plans}", EXIT_USAGE)
    plan = plans[0]
    cfg = ev.PipelineConfig(representation=args.representation,
                            band=tuple(args.band) if args.band else None, window_s=args.window_s)
    pipeline = ev.Pipeline(manifest, cfg)
    try:
        train, test = pipeline.tables(plan)
    except (RuntimeError, FeatureExtractionError, ManifestError, OSError) as exc:
        raise CliError(f"feature extraction failed: {exc}", EXIT_FEATURES) from None
    buf = io.StringIO()
    buf.write(_snapshot_line(snapshot(args)))
    write_feature_csv(train, buf, role="train", fault_modes=manifest.profile.fault_modes)
    write_feature_csv(test, buf, role="test", header=False, fault_modes=manifest.profile.fault_modes)
    if args.out:
        _write(Path(args.out), buf.getvalue())
        print(f"wrote {len(train)} train and {len(test)} test rows for {plan.plan_id} to {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _grid(args) -> list[ModelSpec]:
    if args.grid is None:
        points = ev.GRIDS[args.model]
    else:
        try:
            points = json.loads(args.grid)
        except json.JSONDecodeError as exc:
            raise CliError(f"--grid is not valid JSON: {exc}", EXIT_USAGE) from None
        if not isinstance(points, list) or not all(isinstance(p, dict) for p in points):
            raise CliError("--grid must be a JSON list of hyperparameter objects", EXIT_USAGE)
    if not points:
        raise CliError("empty model grid", EXIT_USAGE)
    try:
        return [ModelSpec(args.model, hp, args.seed) for hp in points]
    except (ModelError, ValueError) as exc:
        raise CliError(f"bad grid point: {exc}", EXIT_USAGE) from None


def cmd_run(args) -> int:
    grid = _grid(args)
    manifest = _load(args)
    if args.plans:
        evaluation = _read_plans(args.plans)
        tuning = _read_plans(args.tuning_plans) if args.tuning_plans else []
    else:
        tuning, evaluation = _generate(args, manifest)
    cfg = ev.PipelineConfig(representation=args.representation,
                            band=tuple(args.band) if args.band else None,
                            window_s=args.window_s, seed=args.seed, n_workers=args.workers)
    pipeline = ev.Pipeline(manifest, cfg)
    snap = snapshot(args)
    out = Path(args.out)
    if len(grid) == 1 or not tuning:
        selected, table = grid[0], []
        if len(grid) > 1:
            raise CliError("a grid with several points needs tuning plans", EXIT_USAGE)
    else:
        try:
            result = ev.run_cvm(grid, tuning, pipeline)
        except RuntimeError as exc:
            raise CliError(f"tuning failed: {exc}", EXIT_FEATURES) from None
        selected, table = result.selected, result.table
    try:
        report = ev.run_cv(selected, evaluation, pipeline, tuning, config_snapshot=snap)
    except splits.SplitError as exc:
        raise CliError(str(exc), EXIT_SPLIT) from None
    tbuf = io.StringIO()
    tbuf.write(_snapshot_line(snap))
    w = csv.writer(tbuf, lineterminator="\n")
    w.writerow(["grid_index", "hyperparameters", "plan_id", "macro_auroc", "error"])
    for row in table:
        w.writerow([row["grid_index"], json.dumps(row["spec"]["hyperparameters"], sort_keys=True),
                    row["plan_id"], "" if row["macro_auroc"] is None else repr(row["macro_auroc"]),
                    row["error"] or ""])
    _write(out / "tuning.csv", tbuf.getvalue())
    report.write(out)
    for (model, rep), (mean, std, n) in report.aggregate.items():
        print(f"{model} / {rep}: Macro AUROC {mean:.4f} +/- {std:.4f} over {n} plans")
    if report.failures:
        print(f"{len(report.failures)} plan(s) failed; see {out / 'summary.json'}", file=sys.stderr)
        return EXIT_RUN_FAILURES
    return EXIT_OK


def cmd_report(args) -> int:
    """Recompute the aggregate from per_run.csv and check it against aggregate.csv."""
    d = Path(args.input)
    try:
        per_run = [r for r in csv.DictReader(
            line for line in (d / "per_run.csv").read_text(encoding="utf-8").splitlines() if not line.startswith("#"))]
        aggregate = [r for r in csv.DictReader(
            line for line in (d / "aggregate.csv").read_text(encoding="utf-8").splitlines() if not line.startswith("#"))]
    except OSError as exc:
        raise CliError(f"cannot read report: {exc}", EXIT_USAGE) from None
    groups: dict[tuple[str, str], list[float]] = {}
    for r in per_run:
        groups.setdefault((r["model"], r["representation"]), []).append(float(r["macro_auroc"]))
    consistent = True
    print("model,representation,mean_macro_auroc,std_macro_auroc,completed_runs")
    for row in aggregate:
        vals = groups.get((row["model"], row["representation"]), [])
        mean, std = float(np.mean(vals)), float(np.std(vals))
        ok = vals and mean == float(row["mean_macro_auroc"]) and std == float(row["std_macro_auroc"])
        consistent &= bool(ok)
        print(f"{row['model']},{row['representation']},{mean:.4f},{std:.4f},{len(vals)}")
    if not consistent:
        print("aggregate.csv does not match per_run.csv", file=sys.stderr)
        return EXIT_RUN_FAILURES
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="manifest JSONL; without it the synthetic layout of --profile is used")
    p.add_argument("--profile", choices=sorted(PROFILES), help="dataset profile")


def _split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tuning", type=int, default=5, help="number of tuning plans (CWRU always uses 3 folds x 2 sides)")
    p.add_argument("--eval", type=int, default=100, help="number of evaluation plans")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratio", type=_ratio, help="per-class TRAIN:TEST bearing counts (profile default if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bearingleak",
        description="Leakage-aware splits, features and evaluation for bearing fault diagnosis.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON config or an artifact of this tool; its values win over flags")
        p.set_defaults(func=func)
        return p

    p = add("toy", cmd_toy, "synthetic toy experiment: valid vs leakage test modes")
    p.add_argument("--bearings", type=_int_list, default=[1, 2, 4, 8, 16, 24],
                   help="training bearings per class, comma-separated")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--models", type=_str_list, default=sorted(toy.TOY_MODELS))
    p.add_argument("--modes", type=_str_list, default=list(toy.TEST_MODES))
    p.add_argument("--n-bearings", type=int, default=48)
    p.add_argument("--n-fault-features", type=int, default=3)
    p.add_argument("--a-f", type=float, default=1.5)
    p.add_argument("--a-b", type=float, default=8.0)
    p.add_argument("--samples-per-bearing", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="toy_out", help="output directory")

    p = add("split", cmd_split, "generate bearing-wise or deliberately leaky plans")
    _data_args(p)
    _split_args(p)
    p.add_argument("--kind", default="bearing_wise", choices=("bearing_wise",) + splits.LEAK_MODES,
                   help="leak modes are applied to each evaluation plan")
    p.add_argument("--holdout-fraction", type=float, default=0.2)
    p.add_argument("--arrangement", default="leaky", choices=("leaky", "control"))
    p.add_argument("--out", help="plan file (stdout if omitted)")

    p = add("audit", cmd_audit, "classify the leakage of every plan in a plan file")
    _data_args(p)
    p.add_argument("--plans", required=True)
    p.add_argument("--max-witnesses", type=int, default=10)

    p = add("features", cmd_features, "feature table of one plan as CSV")
    _data_args(p)
    p.add_argument("--plans", required=True)
    p.add_argument("--plan-id", help="plan to extract (first plan if omitted)")
    p.add_argument("--representation", default="combined", choices=sorted(REPRESENTATION_COLUMNS))
    p.add_argument("--band", type=_band, help="envelope band LOW,HIGH in Hz")
    p.add_argument("--window-s", type=float, default=1.0)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = add("run", cmd_run, "tune on tuning plans, evaluate on evaluation plans, write the report")
    _data_args(p)
    _split_args(p)
    p.add_argument("--model", default="random_forest", choices=MODEL_KINDS)
    p.add_argument("--grid", help="JSON list of hyperparameter objects (built-in grid if omitted)")
    p.add_argument("--representation", default="combined", choices=sorted(REPRESENTATION_COLUMNS))
    p.add_argument("--band", type=_band)
    p.add_argument("--window-s", type=float, default=1.0)
    p.add_argument("--plans", help="evaluation plan file instead of generated plans")
    p.add_argument("--tuning-plans", help="tuning plan file used with --plans")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="run_out", help="output directory")

    p = add("report", cmd_report, "print and cross-check the aggregate of a run directory")
    p.add_argument("--input", required=True, help="directory written by 'run'")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            apply_config(args, sub, read_config(args.config))
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

"""Macro AUROC under bearing-wise plans vs leaky variants on a synthetic UORED-like dataset.

    python scripts/leakage_delta.py --data /tmp/syn_uored --plans 20
"""

import argparse
from pathlib import Path

from bearingleak import evaluation as ev
from bearingleak import splits, synthetic
from bearingleak.datamodel import load_manifest
from bearingleak.models import ModelSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="results/syn_uored")
    ap.add_argument("--plans", type=int, default=20)
    ap.add_argument("--model", default="random_forest")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    path = Path(args.data) / "manifest.jsonl"
    manifest = load_manifest(path) if path.exists() else synthetic.build_uored_like(args.data, seed=args.seed)
    _, base = splits.generate_uored_splits(manifest.records, manifest.profile, 0, args.plans, args.seed)
    variants = {
        "bearing_wise": base,
        "severe_reinsertion": [splits.generate_leaky_plan(manifest.records, p,
                                                          splits.LeakMode("uored_severe_reinsertion", seed=i))
                               for i, p in enumerate(base)],
        "segmentation": [splits.generate_leaky_plan(manifest.records, p, splits.LeakMode("segmentation"))
                         for p in base],
    }
    spec = ModelSpec(args.model, {}, args.seed)
    print("representation,plans,mean_macro_auroc,std_macro_auroc")
    for rep in ("time_features", "envelope_features", "frequency_features", "combined"):
        pipeline = ev.Pipeline(manifest, ev.PipelineConfig(representation=rep, seed=args.seed))
        for name, plans in variants.items():
            (mean, std, _), = ev.run_cv(spec, plans, pipeline).aggregate.values()
            print(f"{rep},{name},{mean:.4f},{std:.4f}")


if __name__ == "__main__":
    main()

"""Train:test bearing-ratio sweep with training volume held at the 3:2 baseline.

    python scripts/diversity_sweep.py --data results/syn_uored --plans 20
"""

import argparse
from pathlib import Path

from bearingleak import evaluation as ev
from bearingleak import synthetic
from bearingleak.datamodel import load_manifest
from bearingleak.models import ModelSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="results/syn_uored")
    ap.add_argument("--plans", type=int, default=20)
    ap.add_argument("--model", default="random_forest")
    ap.add_argument("--representation", default="combined")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/diversity")
    args = ap.parse_args()

    path = Path(args.data) / "manifest.jsonl"
    manifest = load_manifest(path) if path.exists() else synthetic.build_uored_like(args.data, seed=args.seed)
    ratios = [(2, 1), (1, 2)] if manifest.profile.name == "cwru" else [(1, 4), (2, 3), (3, 2), (4, 1)]
    cfg = ev.PipelineConfig(representation=args.representation, seed=args.seed)
    reports = ev.diversity_sweep(manifest, ratios, ModelSpec(args.model, {}, args.seed), cfg,
                                 n_eval=args.plans, seed=args.seed)
    print("ratio,mean_macro_auroc,std_macro_auroc,plans")
    for (a, b), rep in reports.items():
        rep.write(args.out, prefix=f"ratio_{a}-{b}_")
        (mean, std, n), = rep.aggregate.values()
        print(f"{a}:{b},{mean:.4f},{std:.4f},{n}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Full synthetic experiment: generate the 2-style dataset, train both stages,
evaluate on the test split, and export an interpolation strip.

Mirrors the acceptance-scale setup (200 cases, 64x64, erosion -2 / dilation +2)
and finishes in roughly 8 minutes on a laptop CPU core.
"""

import argparse
import json
import time
from pathlib import Path

from prosona.data import DatasetConfig, GenerationConfig, default_styles, generate_dataset, load_manifest
from prosona.experiments import export_interpolation
from prosona.metrics import evaluate
from prosona.prompt import PersonaModel
from prosona.train import TrainConfig, train_stage1, train_stage2


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workdir", default="runs/synthetic_e2e")
    ap.add_argument("--cases", type=int, default=200)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--stage1-epochs", type=int, default=25)
    ap.add_argument("--stage2-epochs", type=int, default=30)
    args = ap.parse_args()

    work = Path(args.workdir)
    data_dir = work / "data"
    t0 = time.time()

    if not (data_dir / "manifest.json").exists():
        generate_dataset(
            DatasetConfig(
                n_cases=args.cases, seed=args.seed,
                generation=GenerationConfig(height=args.size, width=args.size),
                styles=tuple(default_styles(2)),
            ),
            data_dir,
        )
    print(f"[{time.time()-t0:6.0f}s] dataset ready at {data_dir}")

    s1 = train_stage1(TrainConfig(
        stage=1, data_dir=str(data_dir), out_dir=str(work / "stage1"),
        epochs=args.stage1_epochs, learning_rate=1e-3, batch_size=8,
        k_samples=10, latent_dim=6, base_width=8, seed=0,
    ))
    print(f"[{time.time()-t0:6.0f}s] stage 1 done, best val GED {s1.best_val_ged:.4f}")

    s2 = train_stage2(TrainConfig(
        stage=2, data_dir=str(data_dir), out_dir=str(work / "stage2"),
        stage1_checkpoint=str(s1.best_dir),
        epochs=args.stage2_epochs, learning_rate=1e-2, weight_decay=1e-2,
        batch_size=8, k_samples=10, latent_dim=6, base_width=8, seed=0,
        alpha=1.0, beta=1.0, tau=0.1,
    ))
    print(f"[{time.time()-t0:6.0f}s] stage 2 done, best val GED {s2.best_val_ged:.4f}")

    model = PersonaModel.from_checkpoint(s2.best_dir)
    manifest = load_manifest(data_dir)
    report = evaluate(model, manifest, split="test", k=10, seed=0)
    report.save(work / "report.json")
    print(json.dumps(json.loads(report.to_json())["aggregate"], indent=2))

    case_id = manifest.case_ids("test")[0]
    out = export_interpolation(
        s2.best_dir, data_dir, case_id,
        "conservative mask", "inclusive mask", steps=7, k=10, seed=0, out_dir=work,
    )
    print(f"[{time.time()-t0:6.0f}s] interpolation strip: {out['strip']} areas={out['areas']}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Contrastive-weight ablation: stage-2 retrained per (alpha, beta) cell over
{0, 0.5, 1}^2 against one frozen stage-1 space; emits CSV + heatmap.

Expects a dataset and a stage-1 checkpoint (see run_synthetic_e2e.py).
"""

import argparse

from prosona.experiments import run_ablation
from prosona.train import TrainConfig


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", required=True)
    ap.add_argument("--stage1-checkpoint", required=True)
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--alphas", default="0,0.5,1")
    ap.add_argument("--betas", default="0,0.5,1")
    args = ap.parse_args()

    base = TrainConfig(
        stage=2, data_dir=args.data, out_dir="unused",
        stage1_checkpoint=args.stage1_checkpoint,
        epochs=args.epochs, learning_rate=1e-2, weight_decay=1e-2,
        batch_size=8, k_samples=10, latent_dim=6, base_width=8, seed=0, tau=0.1,
    )
    grid = run_ablation(
        base, args.out,
        alpha_values=[float(v) for v in args.alphas.split(",")],
        beta_values=[float(v) for v in args.betas.split(",")],
    )
    print(grid.results)
    print(f"csv: {grid.csv_path}\nheatmap: {grid.heatmap_path}")


if __name__ == "__main__":
    main()

"""Command-line surface.

Subcommands: datagen | train-stage1 | train-stage2 | eval | ablate |
interpolate | serve. Trainer options resolve as flags > --config YAML file >
dataclass defaults; PROSONA_SEED is the global seed fallback.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import yaml

from .data import DatasetConfig, GenerationConfig, default_styles, generate_dataset
from .errors import ConfigurationError
from .train import TrainConfig


def _env_seed(default: int = 0) -> int:
    return int(os.environ.get("PROSONA_SEED", default))


def _train_config(args: argparse.Namespace, stage: int) -> TrainConfig:
    """defaults <- PROSONA_SEED <- YAML config file <- explicit flags."""
    values = dataclasses.asdict(TrainConfig())
    values["seed"] = _env_seed(values["seed"])
    if args.config:
        loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        unknown = set(loaded) - set(values)
        if unknown:
            raise ConfigurationError(f"unknown config keys in {args.config}: {sorted(unknown)}")
        values.update(loaded)
    flag_map = {
        "data_dir": args.data, "out_dir": args.out, "epochs": args.epochs,
        "learning_rate": args.lr, "batch_size": args.batch_size, "k_samples": args.k,
        "latent_dim": args.latent_dim, "seed": args.seed, "depth": args.depth,
        "base_width": args.base_width, "num_threads": args.threads,
    }
    if stage == 2:
        flag_map.update({
            "stage1_checkpoint": args.stage1_checkpoint, "alpha": args.alpha,
            "beta": args.beta, "tau": args.tau, "embed_dim": args.embed_dim,
            "mlp_hidden": args.mlp_hidden, "trainable_set": args.trainable_set,
            "text_encoder": args.text_encoder,
        })
    values.update({k: v for k, v in flag_map.items() if v is not None})
    values["stage"] = stage
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def _add_train_flags(p: argparse.ArgumentParser, stage: int) -> None:
    p.add_argument("--config", help="YAML file with TrainConfig keys")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--out", help="run output directory")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--k", type=int, help="latent samples per image")
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--depth", type=int)
    p.add_argument("--base-width", type=int)
    p.add_argument("--threads", type=int, help="torch threads; 1 for bit-reproducible runs")
    if stage == 2:
        p.add_argument("--stage1-checkpoint", help="stage-1 checkpoint directory")
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--embed-dim", type=int)
        p.add_argument("--mlp-hidden", type=int)
        p.add_argument("--trainable-set", choices=("stage2_mlp_only", "stage2_full"))
        p.add_argument("--text-encoder", help="fallback | external:<module.py>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prosona")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a synthetic multi-rater dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--annotators", type=int, default=2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--size", type=int, default=128, help="image side in pixels")
    p.add_argument("--jitter", type=float, default=None, help="boundary jitter std (pixels)")
    p.add_argument("--cases-per-family", type=int, default=5)
    p.add_argument("--force", action="store_true")

    for stage in (1, 2):
        p = sub.add_parser(f"train-stage{stage}", help=f"run stage-{stage} training")
        _add_train_flags(p, stage)

    p = sub.add_parser("eval", help="evaluate a stage-2 checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", default="report.json")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("ablate", help="alpha/beta grid of stage-2 runs")
    _add_train_flags(p, 2)
    p.add_argument("--grid-out", required=True)
    p.add_argument("--alphas", default="0,0.5,1")
    p.add_argument("--betas", default="0,0.5,1")

    p = sub.add_parser("interpolate", help="export a prompt-interpolation sweep")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--prompt-a", required=True)
    p.add_argument("--prompt-b", required=True)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--workers", type=int, default=4)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "datagen":
        seed = args.seed if args.seed is not None else _env_seed()
        cfg = DatasetConfig(
            n_cases=args.cases,
            seed=seed,
            cases_per_family=args.cases_per_family,
            generation=GenerationConfig(height=args.size, width=args.size),
            styles=tuple(default_styles(args.annotators, boundary_jitter=args.jitter)),
        )
        manifest = generate_dataset(cfg, args.out, force=args.force)
        print(f"wrote {len(manifest.cases)} cases with {manifest.n_annotators} annotators to {args.out}")

    elif args.command in ("train-stage1", "train-stage2"):
        stage = 1 if args.command.endswith("1") else 2
        cfg = _train_config(args, stage)
        from .train import train_stage1, train_stage2

        result = (train_stage1 if stage == 1 else train_stage2)(cfg)
        print(f"best val GED {result.best_val_ged:.4f}; checkpoints at {result.best_dir} / {result.last_dir}")

    elif args.command == "eval":
        from .data import load_manifest
        from .metrics import evaluate
        from .prompt import PersonaModel

        seed = args.seed if args.seed is not None else _env_seed()
        report = evaluate(
            PersonaModel.from_checkpoint(args.checkpoint),
            load_manifest(args.data),
            split=args.split, k=args.k, seed=seed, threshold=args.threshold,
        )
        report.save(args.out)
        print(
            f"{args.split}: GED {report.ged:.4f} | Dice Soft {report.dice_soft:.2f} | "
            f"Dice Max {report.dice_max:.2f} | Dice Match {report.dice_match:.2f} | "
            f"Mean Dice {report.mean_dice:.2f} -> {args.out}"
        )

    elif args.command == "ablate":
        from .experiments import run_ablation

        cfg = _train_config(args, 2)
        alphas = [float(v) for v in args.alphas.split(",")]
        betas = [float(v) for v in args.betas.split(",")]
        grid = run_ablation(cfg, args.grid_out, alphas, betas)
        print(f"grid written to {grid.csv_path} and {grid.heatmap_path}")

    elif args.command == "interpolate":
        from .experiments import export_interpolation

        seed = args.seed if args.seed is not None else _env_seed()
        out = export_interpolation(
            args.checkpoint, args.data, args.case, args.prompt_a, args.prompt_b,
            steps=args.steps, k=args.k, seed=seed, out_dir=args.out,
        )
        print(f"strip: {out['strip']}; areas: {out['areas']}")

    elif args.command == "serve":
        from .service import serve

        serve(args.checkpoint, args.data, port=args.port, workers=args.workers, host=args.host)

    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Experiment drivers: the contrastive-weight ablation grid and the
prompt-interpolation sweep export."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .checkpoint import SIDECAR_NAME
from .data import load_case, load_manifest
from .prompt import PersonaModel
from .train import SplitArrays, TrainConfig, _prompted_val, train_stage2

DEFAULT_WEIGHTS = (0.0, 0.5, 1.0)


@dataclass
class AblationGrid:
    alpha_values: list[float]
    beta_values: list[float]
    results: np.ndarray  # val GED per (alpha, beta) cell; NaN marks a failed cell
    cells: list[dict] = field(default_factory=list)
    csv_path: Path | None = None
    heatmap_path: Path | None = None


def _cell_name(alpha: float, beta: float) -> str:
    return f"alpha{alpha:g}_beta{beta:g}"


def run_ablation(
    base_cfg: TrainConfig,
    out_dir: str | Path,
    alpha_values=DEFAULT_WEIGHTS,
    beta_values=DEFAULT_WEIGHTS,
) -> AblationGrid:
    """Train (or reuse) one stage-2 checkpoint per (alpha, beta) cell and score
    prompted-prediction GED on the validation split. A failed cell is recorded
    as NaN and the grid continues."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(base_cfg.data_dir)
    val = SplitArrays.load(manifest, "val")
    prompts = [s.prompt_texts[0] for s in manifest.styles]

    grid = AblationGrid(list(alpha_values), list(beta_values),
                        np.full((len(alpha_values), len(beta_values)), np.nan))
    for i, alpha in enumerate(alpha_values):
        for j, beta in enumerate(beta_values):
            cell_dir = out / _cell_name(alpha, beta)
            cfg = dataclasses.replace(base_cfg, alpha=alpha, beta=beta, out_dir=str(cell_dir))
            cell = {"alpha": alpha, "beta": beta, "dir": str(cell_dir)}
            try:
                cached = (cell_dir / "best" / SIDECAR_NAME).exists()
                if not cached:
                    train_stage2(cfg)
                persona = PersonaModel.from_checkpoint(cell_dir / "best")
                ged, match = _prompted_val(persona, val, prompts, cfg.k_samples, cfg.val_seed)
                grid.results[i, j] = ged
                cell.update({"val_ged": ged, "val_dice_match": match, "cached": cached})
            except Exception as exc:  # cell failure must not kill the grid
                cell.update({"error": f"{type(exc).__name__}: {exc}"})
            grid.cells.append(cell)

    grid.csv_path = out / "ablation.csv"
    lines = ["alpha,beta,val_ged"]
    for i, alpha in enumerate(alpha_values):
        for j, beta in enumerate(beta_values):
            lines.append(f"{alpha:g},{beta:g},{grid.results[i, j]:.6f}")
    grid.csv_path.write_text("\n".join(lines) + "\n")
    (out / "ablation.json").write_text(json.dumps(grid.cells, indent=2, sort_keys=True))

    grid.heatmap_path = out / "ablation_heatmap.png"
    fig, ax = plt.subplots(figsize=(4, 3.2))
    im = ax.imshow(grid.results, cmap="viridis_r", origin="lower")
    ax.set_xticks(range(len(beta_values)), [f"{b:g}" for b in beta_values])
    ax.set_yticks(range(len(alpha_values)), [f"{a:g}" for a in alpha_values])
    ax.set_xlabel("beta (similarity contrastive)")
    ax.set_ylabel("alpha (text contrastive)")
    ax.set_title("validation GED")
    for i in range(len(alpha_values)):
        for j in range(len(beta_values)):
            if np.isfinite(grid.results[i, j]):
                ax.text(j, i, f"{grid.results[i, j]:.3f}", ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(grid.heatmap_path, dpi=130)
    plt.close(fig)
    return grid


def export_interpolation(
    checkpoint_dir: str | Path,
    data_dir: str | Path,
    case_id: str,
    prompt_a: str,
    prompt_b: str,
    steps: int = 5,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    out_dir: str | Path = ".",
) -> dict:
    """Render the t-sweep between two prompts for one case: an overlay strip PNG
    plus a (t, mask area) CSV. Latent samples are shared across the sweep."""
    persona = PersonaModel.from_checkpoint(checkpoint_dir)
    manifest = load_manifest(data_dir)
    case = load_case(manifest, case_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ts = np.linspace(0.0, 1.0, steps)
    panels, areas = [], []
    for t in ts:
        prob, _ = persona.interpolate(case.image, prompt_a, prompt_b, float(t), k, seed)
        mask = prob >= threshold
        panels.append(mask)
        areas.append(int(mask.sum()))

    strip_path = out / f"interpolation_{case_id}.png"
    fig, axes = plt.subplots(1, steps, figsize=(2.2 * steps, 2.4))
    for ax, t, mask in zip(np.atleast_1d(axes), ts, panels):
        ax.imshow(case.image, cmap="gray", vmin=0, vmax=1)
        ax.contour(mask, levels=[0.5], colors="red", linewidths=1.2)
        ax.set_title(f"t = {t:.2f}", fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(strip_path, dpi=130)
    plt.close(fig)

    csv_path = out / f"interpolation_{case_id}.csv"
    csv_path.write_text("t,area\n" + "\n".join(f"{t:.6f},{a}" for t, a in zip(ts, areas)) + "\n")
    return {"strip": strip_path, "csv": csv_path, "ts": ts.tolist(), "areas": areas}

"""Checkpoint format: a torch parameter blob plus a JSON sidecar carrying the
architecture hyperparameters, stage tag, seed, and git hash, so any run can be
reconstructed from the directory alone."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .backbone import BackboneConfig, ProbUNet
from .errors import FormatError
from .prompt import ProjectionMlp
from .text import TextEncoder, load_text_encoder
from .utils import file_checksum, git_hash

WEIGHTS_NAME = "model.pt"
SIDECAR_NAME = "checkpoint.json"


@dataclass
class CheckpointBundle:
    backbone: ProbUNet
    mlp: ProjectionMlp | None
    encoder: TextEncoder
    meta: dict

    @property
    def stage(self) -> int:
        return int(self.meta["stage"])


def save_checkpoint(
    out_dir: str | Path,
    backbone: ProbUNet,
    mlp: ProjectionMlp | None,
    stage: int,
    seed: int,
    text_encoder: str = "fallback",
    extra: dict | None = None,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blob = {
        "backbone": backbone.state_dict(),
        "mlp": mlp.state_dict() if mlp is not None else None,
    }
    torch.save(blob, out / WEIGHTS_NAME)
    meta = {
        "stage": stage,
        "seed": seed,
        "git_hash": git_hash(),
        "backbone": dataclasses.asdict(backbone.cfg),
        "mlp": None
        if mlp is None
        else {
            "embed_dim": mlp.embed_dim,
            "hidden": mlp.fc1.out_features,
            "latent_dim": mlp.latent_dim,
        },
        "text_encoder": text_encoder,
        "checkpoint_id": file_checksum(out / WEIGHTS_NAME)[:12],
    }
    if extra:
        meta["extra"] = extra
    (out / SIDECAR_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return out


def load_checkpoint(ckpt_dir: str | Path) -> CheckpointBundle:
    ckpt = Path(ckpt_dir)
    sidecar = ckpt / SIDECAR_NAME
    weights = ckpt / WEIGHTS_NAME
    if not sidecar.exists() or not weights.exists():
        raise FileNotFoundError(f"checkpoint incomplete under {ckpt}: need {WEIGHTS_NAME} and {SIDECAR_NAME}")
    meta = json.loads(sidecar.read_text())
    try:
        backbone = ProbUNet(BackboneConfig(**meta["backbone"]))
        blob = torch.load(weights, map_location="cpu", weights_only=True)
        backbone.load_state_dict(blob["backbone"])
        mlp = None
        if meta.get("mlp") is not None:
            m = meta["mlp"]
            mlp = ProjectionMlp(m["embed_dim"], m["latent_dim"], m["hidden"])
            mlp.load_state_dict(blob["mlp"])
    except (KeyError, RuntimeError, TypeError) as exc:
        raise FormatError(f"malformed checkpoint under {ckpt}: {exc}") from exc
    encoder = load_text_encoder(meta.get("text_encoder", "fallback"),
                                dim=(meta.get("mlp") or {}).get("embed_dim", 64))
    return CheckpointBundle(backbone.eval(), mlp.eval() if mlp else None, encoder, meta)

"""Two-stage training: stage 1 fits the probabilistic backbone, stage 2 fits
the prompt projection MLP against the frozen latent space.

Runs are bit-reproducible under a fixed seed in single-threaded mode: batch
order, annotator choice, and every latent noise draw come from seeded
generators, and logs carry no timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import Tensor

from . import metrics
from .backbone import BackboneConfig, ProbUNet
from .checkpoint import load_checkpoint, save_checkpoint
from .data import DatasetManifest, load_case, load_manifest
from .errors import ConfigurationError, TrainingDivergenceError
from .latent import sample
from .losses import (
    ContrastiveBatch,
    EnsemblePrediction,
    ExpertBounds,
    LossConfig,
    boundary_loss,
    dice_loss,
    kl_divergence,
    sim_contrastive,
    text_contrastive,
)
from .prompt import PersonaModel, ProjectionMlp, encode_text
from .text import load_text_encoder
from .utils import JsonlWriter, derive_seed

TRAINABLE_SETS = ("stage2_mlp_only", "stage2_full")


@dataclass
class TrainConfig:
    stage: int = 1
    data_dir: str = "data"
    out_dir: str = "runs/stage1"
    epochs: int = 100
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    batch_size: int = 8
    k_samples: int = 10  # K latent samples per image
    latent_dim: int = 6  # D
    alpha: float = 1.0
    beta: float = 1.0
    tau: float = 0.1
    dice_smooth: float = 1.0
    seed: int = 0
    stage1_checkpoint: str | None = None
    trainable_set: str = "stage2_mlp_only"
    depth: int = 3
    base_width: int = 16
    embed_dim: int = 64
    mlp_hidden: int = 128
    text_encoder: str = "fallback"
    num_threads: int = 0  # 0 = leave torch's default
    val_seed: int = 1234

    def validate(self) -> None:
        if self.stage not in (1, 2):
            raise ConfigurationError(f"stage must be 1 or 2, got {self.stage}")
        positives = {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "k_samples": self.k_samples,
            "latent_dim": self.latent_dim,
            "tau": self.tau,
            "dice_smooth": self.dice_smooth,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.alpha < 0 or self.beta < 0 or self.weight_decay < 0:
            raise ConfigurationError("alpha, beta, and weight_decay must be >= 0")
        if self.stage == 2 and not self.stage1_checkpoint:
            raise ConfigurationError("stage-2 config must reference a stage-1 checkpoint")
        if self.trainable_set not in TRAINABLE_SETS:
            raise ConfigurationError(f"trainable_set must be one of {TRAINABLE_SETS}")

    def loss_config(self) -> LossConfig:
        return LossConfig(self.alpha, self.beta, self.tau, self.dice_smooth)

    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(depth=self.depth, base_width=self.base_width, latent_dim=self.latent_dim)


@dataclass
class SplitArrays:
    """One dataset split held in memory as both numpy cases and torch tensors."""

    case_ids: list[str]
    images_np: list[np.ndarray]
    masks_np: list[list[np.ndarray]]
    images: Tensor  # (N, 1, H, W)
    masks: Tensor  # (N, A, H, W)

    @staticmethod
    def load(manifest: DatasetManifest, split: str, dtype: torch.dtype = torch.float32) -> "SplitArrays":
        ids = sorted(manifest.case_ids(split))
        if not ids:
            raise ConfigurationError(f"split {split!r} has no cases in {manifest.root}")
        images_np, masks_np = [], []
        for cid in ids:
            case = load_case(manifest, cid)
            images_np.append(case.image)
            masks_np.append(case.masks)
        images = torch.as_tensor(np.stack(images_np), dtype=dtype)[:, None]
        masks = torch.as_tensor(np.stack([np.stack(m) for m in masks_np]), dtype=dtype)
        return SplitArrays(ids, images_np, masks_np, images, masks)

    def __len__(self) -> int:
        return len(self.case_ids)

    @property
    def n_annotators(self) -> int:
        return self.masks.shape[1]


@dataclass
class TrainResult:
    best_dir: Path
    last_dir: Path
    log_path: Path
    history: list[dict] = field(default_factory=list)
    best_val_ged: float = math.inf


def _abort_if_nonfinite(total: Tensor, model: torch.nn.Module, batch_stats: dict, step: int) -> None:
    if bool(torch.isfinite(total)):
        return
    with torch.no_grad():
        pnorm = math.sqrt(sum(float((p**2).sum()) for p in model.parameters()))
    raise TrainingDivergenceError(
        f"non-finite loss at step {step}: batch={batch_stats}, parameter_norm={pnorm:.4g}"
    )


def _prior_sample_ged(
    model: ProbUNet, split: SplitArrays, k: int, seed: int, threshold: float = 0.5
) -> float:
    """Mean GED of K prior-sample predictions per validation case; the stage-1
    model-selection metric. Noise is fixed per case so epochs are comparable."""
    model.eval()
    vals = []
    with torch.no_grad():
        for i in range(len(split)):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            x = split.images[i : i + 1]
            feats, pyr = model.encode(x)
            prior = model.prior_head(feats)
            noise = torch.as_tensor(
                rng.standard_normal((1, k, model.latent_dim)), dtype=x.dtype
            )
            zs = prior.mu[:, None] + prior.sigma[:, None] * noise
            probs = model.decode_ensemble(feats, pyr, zs)[0].numpy()
            preds = [(probs[j] >= threshold).astype(np.uint8) for j in range(k)]
            vals.append(metrics.ged(preds, split.masks_np[i]))
    model.train()
    return float(np.mean(vals))


def train_stage1(cfg: TrainConfig) -> TrainResult:
    """L_seg (posterior sample) + L_KL + L_bound (K prior samples) per step,
    one uniformly chosen annotator mask per image; Adam. Checkpoints the best
    validation-GED model and the last epoch."""
    cfg.validate()
    if cfg.stage != 1:
        raise ConfigurationError("train_stage1 called with a stage-2 config")
    if cfg.num_threads:
        torch.set_num_threads(cfg.num_threads)

    manifest = load_manifest(cfg.data_dir)
    train = SplitArrays.load(manifest, "train")
    val = SplitArrays.load(manifest, "val")

    torch.manual_seed(derive_seed(cfg.seed, 1))
    model = ProbUNet(cfg.backbone_config())
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    loss_cfg = cfg.loss_config()

    order_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    noise_gen = torch.Generator().manual_seed(derive_seed(cfg.seed, 3))

    out = Path(cfg.out_dir)
    log = JsonlWriter(out / "train_log.jsonl")
    result = TrainResult(out / "best", out / "last", log.path)
    n, a = len(train), train.n_annotators
    d = cfg.latent_dim

    step = 0
    for epoch in range(cfg.epochs):
        perm = order_rng.permutation(n)
        ann_choice = order_rng.integers(0, a, size=n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            x = train.images[idx]
            masks_all = train.masks[idx]  # (B, A, H, W)
            target = masks_all[np.arange(len(idx)), ann_choice[start : start + len(idx)]]

            feats, pyr = model.encode(x)
            prior = model.prior_head(feats)
            post = model.posterior_head(x, target)
            z = sample(post, torch.randn((len(idx), d), generator=noise_gen), "posterior_sample")
            pred = model.decode(feats, pyr, z.z).probs

            l_seg = dice_loss(pred, target, loss_cfg.dice_smooth)
            l_kl = kl_divergence(post, prior)
            k_noise = torch.randn((len(idx), cfg.k_samples, d), generator=noise_gen)
            zs = prior.mu[:, None] + prior.sigma[:, None] * k_noise
            ens = EnsemblePrediction(model.decode_ensemble(feats, pyr, zs))
            l_bound = boundary_loss(ens, ExpertBounds.from_masks(masks_all), loss_cfg.dice_smooth)
            total = l_seg + l_kl + l_bound

            stats = {"x_mean": float(x.mean()), "mask_mean": float(target.mean())}
            _abort_if_nonfinite(total, model, stats, step)
            opt.zero_grad()
            total.backward()
            opt.step()
            record = {
                "step": step,
                "l_seg": float(l_seg.detach()),
                "l_kl": float(l_kl.detach()),
                "l_bound": float(l_bound.detach()),
                "total": float(total.detach()),
            }
            log.write(record)
            step += 1

        val_ged = _prior_sample_ged(model, val, cfg.k_samples, cfg.val_seed)
        epoch_rec = {"epoch": epoch, "val_ged": val_ged}
        log.write(epoch_rec)
        result.history.append(epoch_rec)
        if val_ged < result.best_val_ged:
            result.best_val_ged = val_ged
            save_checkpoint(result.best_dir, model, None, 1, cfg.seed,
                            extra={"val_ged": val_ged, "epoch": epoch})

    save_checkpoint(result.last_dir, model, None, 1, cfg.seed,
                    extra={"val_ged": result.history[-1]["val_ged"], "epoch": cfg.epochs - 1})
    return result


@dataclass
class PromptBank:
    """The P training prompts: every style's text variants, plus the positive-pair
    mask M (M_ij = 1 iff prompts i, j describe the same annotator)."""

    texts: list[str]
    annotator_of: np.ndarray  # (P,) annotator index per prompt
    embeddings: Tensor  # (P, d) raw frozen-encoder embeddings
    positives: Tensor  # (P, P)

    @staticmethod
    def build(manifest: DatasetManifest, encoder, dtype: torch.dtype = torch.float32) -> "PromptBank":
        texts, owners = [], []
        for i, style in enumerate(manifest.styles):
            for text in style.prompt_texts:
                texts.append(text)
                owners.append(i)
        owners = np.asarray(owners)
        emb = np.stack([encode_text(t, encoder).e for t in texts])
        positives = torch.as_tensor((owners[:, None] == owners[None, :]).astype(np.float64), dtype=dtype)
        return PromptBank(texts, owners, torch.as_tensor(emb, dtype=dtype), positives)

    @property
    def size(self) -> int:
        return len(self.texts)


def _prompted_val(
    persona: PersonaModel, split: SplitArrays, prompts: list[str], k: int, seed: int
) -> tuple[float, float]:
    """(GED, Dice Match) of the per-annotator prompted predictions on a split."""
    geds, matches = [], []
    for i in range(len(split)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        outs = persona.personalize_many(split.images_np[i], prompts, k, rng)
        preds = [(p >= 0.5).astype(np.uint8) for p, _ in outs]
        geds.append(metrics.ged(preds, split.masks_np[i]))
        matches.append(metrics.dice_match(preds, split.masks_np[i]))
    return float(np.mean(geds)), float(np.mean(matches))


def train_stage2(cfg: TrainConfig) -> TrainResult:
    """Prompt-personalization training over a frozen stage-1 latent space.

    Per image: K shared prior samples; per prompt: project, score, fuse, decode,
    Dice against the prompt's annotator mask; plus the two contrastive terms.
    Only the projection MLP trains unless trainable_set = stage2_full.
    """
    cfg.validate()
    if cfg.stage != 2:
        raise ConfigurationError("train_stage2 called with a stage-1 config")
    if cfg.num_threads:
        torch.set_num_threads(cfg.num_threads)

    manifest = load_manifest(cfg.data_dir)
    train = SplitArrays.load(manifest, "train")
    val = SplitArrays.load(manifest, "val")

    bundle = load_checkpoint(cfg.stage1_checkpoint)
    model = bundle.backbone
    if model.latent_dim != cfg.latent_dim:
        raise ConfigurationError(
            f"stage-1 checkpoint has latent dim {model.latent_dim}, config says {cfg.latent_dim}"
        )
    encoder = load_text_encoder(cfg.text_encoder, dim=cfg.embed_dim)
    bank = PromptBank.build(manifest, encoder)
    if bank.annotator_of.max() + 1 != train.n_annotators:
        raise ConfigurationError(
            f"prompt catalog covers {bank.annotator_of.max() + 1} annotators, "
            f"dataset has {train.n_annotators}"
        )

    torch.manual_seed(derive_seed(cfg.seed, 4))
    mlp = ProjectionMlp(cfg.embed_dim, cfg.latent_dim, cfg.mlp_hidden)
    full = cfg.trainable_set == "stage2_full"
    model.requires_grad_(full)
    model.train() if full else model.eval()
    trainable = list(mlp.parameters()) + (list(model.parameters()) if full else [])
    opt = torch.optim.Adam(trainable, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    loss_cfg = cfg.loss_config()

    order_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 5]))
    noise_gen = torch.Generator().manual_seed(derive_seed(cfg.seed, 6))

    out = Path(cfg.out_dir)
    log = JsonlWriter(out / "train_log.jsonl")
    result = TrainResult(out / "best", out / "last", log.path)
    n, d, k = len(train), cfg.latent_dim, cfg.k_samples
    owner_idx = torch.as_tensor(bank.annotator_of, dtype=torch.long)
    canonical_prompts = [s.prompt_texts[0] for s in manifest.styles]
    contrastive_on = cfg.alpha > 0 or cfg.beta > 0

    def _save(where: Path, tag: dict) -> None:
        save_checkpoint(where, model, mlp, 2, cfg.seed, text_encoder=cfg.text_encoder, extra=tag)

    step = 0
    for epoch in range(cfg.epochs):
        perm = order_rng.permutation(n)
        mlp.train()
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            b = len(idx)
            x = train.images[idx]
            masks_all = train.masks[idx]

            with torch.no_grad() if not full else torch.enable_grad():
                feats, pyr = model.encode(x)
                prior = model.prior_head(feats)
            k_noise = torch.randn((b, k, d), generator=noise_gen)
            zs = (prior.mu[:, None] + prior.sigma[:, None] * k_noise).detach()

            z_proj = mlp(bank.embeddings)  # (P, D)
            scores = torch.einsum("bkd,pd->bpk", zs, z_proj) / math.sqrt(d)
            weights = torch.softmax(scores, dim=-1)
            z_prompt = torch.einsum("bpk,bkd->bpd", weights, zs)
            preds = model.decode_ensemble(feats, pyr, z_prompt)  # (B, P, H, W)
            targets = masks_all[:, owner_idx]

            l_seg = dice_loss(preds, targets, loss_cfg.dice_smooth)
            record = {"step": step, "l_seg": float(l_seg.detach())}
            total = l_seg
            if contrastive_on:
                batches = [
                    ContrastiveBatch.from_raw(bank.embeddings, scores[i], bank.positives, cfg.tau)
                    for i in range(b)
                ]
                l_text = text_contrastive(batches[0])  # E is shared across images
                l_sim = torch.stack([sim_contrastive(cb) for cb in batches]).mean()
                total = l_seg + cfg.alpha * l_text + cfg.beta * l_sim
                record["l_text"] = float(l_text.detach())
                record["l_sim"] = float(l_sim.detach())
            record["total"] = float(total.detach())

            _abort_if_nonfinite(total, mlp, {"x_mean": float(x.mean())}, step)
            opt.zero_grad()
            total.backward()
            opt.step()
            log.write(record)
            step += 1

        persona = PersonaModel(model, mlp, encoder)
        val_ged, val_match = _prompted_val(persona, val, canonical_prompts, k, cfg.val_seed)
        model.train() if full else model.eval()
        epoch_rec = {"epoch": epoch, "val_ged": val_ged, "val_dice_match": val_match}
        log.write(epoch_rec)
        result.history.append(epoch_rec)
        if val_ged < result.best_val_ged:
            result.best_val_ged = val_ged
            _save(result.best_dir, {"val_ged": val_ged, "val_dice_match": val_match, "epoch": epoch})

    _save(result.last_dir, {"val_ged": result.history[-1]["val_ged"],
                            "val_dice_match": result.history[-1]["val_dice_match"],
                            "epoch": cfg.epochs - 1})
    return result

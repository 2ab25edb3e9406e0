"""Training objectives for both stages.

All losses are pure functions of tensors. Shapes follow the convention
(..., H, W) for maps and (..., D) for latent vectors: the trailing axes carry
the instance, any leading axes are batch and are averaged over, so a single
unbatched call reproduces the per-instance formulas exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor

from .errors import ConfigurationError, ValidationError
from .latent import LatentGaussian


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0  # weight of the text-level contrastive term
    beta: float = 1.0  # weight of the similarity-level contrastive term
    tau: float = 0.1
    dice_smooth: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be >= 0")
        if self.tau <= 0:
            raise ValidationError(f"tau must be > 0, got {self.tau}")
        if self.dice_smooth <= 0:
            raise ValidationError("dice_smooth must be > 0")


def dice_loss(pred: Tensor, target: Tensor, smooth: float = 1.0) -> Tensor:
    """1 - (2 sum(pred*target) + eps) / (sum(pred) + sum(target) + eps), per map.

    Sums run over the trailing two axes; leading axes are averaged.
    """
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    num = (pred * target).sum(dim=(-2, -1))
    denom = pred.sum(dim=(-2, -1)) + target.sum(dim=(-2, -1))
    return (1.0 - (2.0 * num + smooth) / (denom + smooth)).mean()


def kl_divergence(q: LatentGaussian, p: LatentGaussian) -> Tensor:
    """Closed-form KL(q || p) for diagonal Gaussians, summed over latent dims."""
    if q.dim != p.dim:
        raise ValidationError(f"latent dims differ: q has {q.dim}, p has {p.dim}")
    if not bool((q.sigma > 0).all()) or not bool((p.sigma > 0).all()):
        raise ValidationError("sigmas must be strictly positive")
    per_dim = (
        torch.log(p.sigma / q.sigma)
        + (q.sigma**2 + (q.mu - p.mu) ** 2) / (2.0 * p.sigma**2)
        - 0.5
    )
    return per_dim.sum(dim=-1).mean()


@dataclass
class EnsemblePrediction:
    """K soft prediction maps for one image, shaped (..., K, H, W)."""

    samples: Tensor

    @property
    def n_samples(self) -> int:
        return self.samples.shape[-3]

    @property
    def p_intersection(self) -> Tensor:
        return self.samples.min(dim=-3).values

    @property
    def p_union(self) -> Tensor:
        return self.samples.max(dim=-3).values


@dataclass
class ExpertBounds:
    """Pixelwise AND / OR of a case's expert masks, shaped (..., H, W)."""

    a_intersection: Tensor
    a_union: Tensor

    @staticmethod
    def from_masks(masks: Tensor) -> "ExpertBounds":
        """masks: (..., A, H, W) binary."""
        return ExpertBounds(masks.min(dim=-3).values, masks.max(dim=-3).values)


def boundary_loss(ens: EnsemblePrediction, bounds: ExpertBounds, smooth: float = 1.0) -> Tensor:
    """Dice(P_intersection, A_intersection) + Dice(P_union, A_union)."""
    if ens.n_samples < 2:
        raise ConfigurationError(f"boundary loss needs K >= 2 samples, got {ens.n_samples}")
    return dice_loss(ens.p_intersection, bounds.a_intersection, smooth) + dice_loss(
        ens.p_union, bounds.a_union, smooth
    )


def stage1_loss(
    pred: Tensor,
    target_mask: Tensor,
    q: LatentGaussian,
    p: LatentGaussian,
    ens: EnsemblePrediction,
    bounds: ExpertBounds,
    cfg: LossConfig,
) -> tuple[Tensor, dict[str, float]]:
    """Unweighted sum of segmentation Dice, KL, and the boundary-diversity term."""
    l_seg = dice_loss(pred, target_mask, cfg.dice_smooth)
    l_kl = kl_divergence(q, p)
    l_bound = boundary_loss(ens, bounds, cfg.dice_smooth)
    total = l_seg + l_kl + l_bound
    breakdown = {
        "l_seg": float(l_seg.detach()),
        "l_kl": float(l_kl.detach()),
        "l_bound": float(l_bound.detach()),
        "total": float(total.detach()),
    }
    return total, breakdown


def _normalize_rows(x: Tensor) -> Tensor:
    return F.normalize(x, p=2.0, dim=-1)


@dataclass
class ContrastiveBatch:
    """Row-normalized prompt embeddings E (P, d), similarity profiles R (P, K),
    positive-pair mask M (P, P), and temperature tau."""

    embeddings: Tensor
    profiles: Tensor
    positives: Tensor
    tau: float

    @staticmethod
    def from_raw(embeddings: Tensor, profiles: Tensor, positives: Tensor, tau: float) -> "ContrastiveBatch":
        return ContrastiveBatch(
            _normalize_rows(embeddings), _normalize_rows(profiles), positives, tau
        )

    def validate(self) -> None:
        n = self.positives.shape[0]
        if self.positives.shape != (n, n):
            raise ValidationError(f"M must be square, got {tuple(self.positives.shape)}")
        if self.embeddings.shape[0] != n or self.profiles.shape[0] != n:
            raise ValidationError("E, R, and M must agree on the number of prompts")
        if self.tau <= 0:
            raise ValidationError(f"tau must be > 0, got {self.tau}")


def _gram_bce(rows: Tensor, positives: Tensor, tau: float) -> Tensor:
    """Mean binary cross-entropy between sigmoid of the scaled Gram matrix and M.

    The scaled Gram matrix is read as logits; BCE-with-logits keeps it stable.
    """
    logits = rows @ rows.transpose(-2, -1) / tau
    return F.binary_cross_entropy_with_logits(logits, positives.to(logits.dtype))


def text_contrastive(batch: ContrastiveBatch) -> Tensor:
    batch.validate()
    return _gram_bce(batch.embeddings, batch.positives, batch.tau)


def sim_contrastive(batch: ContrastiveBatch) -> Tensor:
    batch.validate()
    return _gram_bce(batch.profiles, batch.positives, batch.tau)


def stage2_loss(
    pred_prompt: Tensor,
    target_mask: Tensor,
    batch: ContrastiveBatch,
    cfg: LossConfig,
) -> tuple[Tensor, dict[str, float]]:
    """Dice to the prompt's annotator mask plus weighted contrastive terms."""
    l_seg = dice_loss(pred_prompt, target_mask, cfg.dice_smooth)
    l_text = text_contrastive(batch)
    l_sim = sim_contrastive(batch)
    total = l_seg + cfg.alpha * l_text + cfg.beta * l_sim
    breakdown = {
        "l_seg": float(l_seg.detach()),
        "l_text": float(l_text.detach()),
        "l_sim": float(l_sim.detach()),
        "total": float(total.detach()),
    }
    return total, breakdown

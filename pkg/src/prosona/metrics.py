"""Multi-rater evaluation: generalized energy distance, the four Dice variants,
the majority-vote consensus baseline, and the dataset-level evaluate() driver.

The distance kernel for GED is d(m1, m2) = 1 - IoU(m1, m2) with the
empty-vs-empty convention d = 0. All estimators are written as explicit loops
over sample/annotator pairs; grids are small enough that clarity wins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatasetManifest, load_case
from .errors import ConfigurationError, ValidationError

def _check_pair(m1: np.ndarray, m2: np.ndarray) -> None:
    if m1.shape != m2.shape:
        raise ValidationError(f"mask shapes differ: {m1.shape} vs {m2.shape}")


def iou_distance(m1: np.ndarray, m2: np.ndarray) -> float:
    """1 - |intersection| / |union|; both masks empty -> 0."""
    _check_pair(m1, m2)
    a = m1 > 0
    b = m2 > 0
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(a, b).sum())
    return 1.0 - inter / union


def dice_coefficient(pred: np.ndarray, target: np.ndarray) -> float:
    """2|intersection| / (|pred| + |target|); both empty -> 1."""
    _check_pair(pred, target)
    a = pred > 0
    b = target > 0
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / denom


def soft_dice(prob: np.ndarray, target: np.ndarray) -> float:
    """Dice on the probability map itself: 2 sum(p*t) / (sum p + sum t)."""
    _check_pair(prob, target)
    num = float((prob * target).sum())
    denom = float(prob.sum()) + float(target.sum())
    if denom == 0:
        return 1.0
    return 2.0 * num / denom


def ged(pred_samples: list[np.ndarray], expert_masks: list[np.ndarray]) -> float:
    """Generalized energy distance between prediction and annotation multisets.

    GED^2 = 2/(KA) sum d(pred_k, gt_i) - 1/K^2 sum d(pred, pred') -
    1/A^2 sum d(gt, gt'); the finite-sample estimate is clamped at 0 before the
    square root.
    """
    if not pred_samples or not expert_masks:
        raise ValidationError("ged needs at least one prediction and one expert mask")
    k = len(pred_samples)
    a = len(expert_masks)
    cross = 0.0
    for p in pred_samples:
        for m in expert_masks:
            cross += iou_distance(p, m)
    within_pred = 0.0
    for p in pred_samples:
        for q in pred_samples:
            within_pred += iou_distance(p, q)
    within_gt = 0.0
    for m in expert_masks:
        for n in expert_masks:
            within_gt += iou_distance(m, n)
    ged_sq = 2.0 / (k * a) * cross - within_pred / (k * k) - within_gt / (a * a)
    return math.sqrt(max(ged_sq, 0.0))


def dice_soft(prob_samples: list[np.ndarray], expert_masks: list[np.ndarray]) -> float:
    """Soft Dice averaged over all sample x annotator pairs, in percent."""
    if not prob_samples or not expert_masks:
        raise ValidationError("dice_soft needs at least one sample and one expert mask")
    total = 0.0
    for prob in prob_samples:
        for mask in expert_masks:
            total += soft_dice(prob, mask)
    return 100.0 * total / (len(prob_samples) * len(expert_masks))


def dice_max(pred_samples: list[np.ndarray], expert_masks: list[np.ndarray]) -> float:
    """Best-sample Dice per annotator, averaged over annotators, in percent."""
    if not pred_samples or not expert_masks:
        raise ValidationError("dice_max needs at least one sample and one expert mask")
    total = 0.0
    for mask in expert_masks:
        total += max(dice_coefficient(p, mask) for p in pred_samples)
    return 100.0 * total / len(expert_masks)


def dice_match(prompted_preds: list[np.ndarray], expert_masks: list[np.ndarray]) -> float:
    """Dice of each annotator-prompted prediction against its own annotator."""
    if len(prompted_preds) != len(expert_masks):
        raise ValidationError(
            f"need one prompted prediction per annotator: {len(prompted_preds)} vs {len(expert_masks)}"
        )
    vals = [dice_coefficient(p, m) for p, m in zip(prompted_preds, expert_masks)]
    return 100.0 * sum(vals) / len(vals)


def majority_vote(expert_masks: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Strict-majority consensus mask and the union region it omits."""
    if not expert_masks:
        raise ValidationError("majority_vote needs at least one mask")
    stack = np.stack([m > 0 for m in expert_masks])
    votes = stack.sum(axis=0)
    majority = (votes > len(expert_masks) / 2).astype(np.uint8)
    union = stack.any(axis=0)
    omitted = (union & ~majority.astype(bool)).astype(np.uint8)
    return majority, omitted


@dataclass
class MetricsReport:
    """Aggregate and per-case evaluation results; serializable to report.json."""

    ged: float
    dice_soft: float
    dice_max: float
    dice_match: float
    mean_dice: float
    per_case: list[dict] = field(default_factory=list)
    per_annotator: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "aggregate": {
                "ged": self.ged,
                "dice_soft": self.dice_soft,
                "dice_max": self.dice_max,
                "dice_match": self.dice_match,
                "mean_dice": self.mean_dice,
            },
            "per_case": self.per_case,
            "per_annotator": self.per_annotator,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def evaluate(
    model,
    manifest: DatasetManifest,
    split: str = "test",
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    prompt_variant: int = 0,
) -> MetricsReport:
    """Run sample-based and prompt-personalized prediction over a split.

    `model` needs predict_samples(image, k, rng) -> (K, H, W) probabilities and
    personalize_many(image, texts, k, rng) -> [(prob_map, profile), ...]. Each
    case gets its own seed stream, so results are order-independent and
    deterministic for a fixed seed.
    """
    case_ids = manifest.case_ids(split)
    if not case_ids:
        raise ConfigurationError(f"split {split!r} has no cases")
    styles = manifest.styles
    prompts = [s.prompt_texts[min(prompt_variant, len(s.prompt_texts) - 1)] for s in styles]

    per_case = []
    match_by_annotator = [[] for _ in styles]
    for idx, case_id in enumerate(sorted(case_ids)):
        case = load_case(manifest, case_id)
        sample_rng = np.random.default_rng(np.random.SeedSequence([seed, idx, 0]))
        prompt_rng = np.random.default_rng(np.random.SeedSequence([seed, idx, 1]))

        probs = model.predict_samples(case.image, k, sample_rng)
        prob_list = [probs[i] for i in range(probs.shape[0])]
        bin_list = [(p >= threshold).astype(np.uint8) for p in prob_list]

        personalized = model.personalize_many(case.image, prompts, k, prompt_rng)
        prompted = [(p >= threshold).astype(np.uint8) for p, _ in personalized]

        row = {
            "case_id": case_id,
            "ged": ged(bin_list, case.masks),
            "dice_soft": dice_soft(prob_list, case.masks),
            "dice_max": dice_max(bin_list, case.masks),
            "dice_match": dice_match(prompted, case.masks),
        }
        per_case.append(row)
        for i, (pred_i, mask_i) in enumerate(zip(prompted, case.masks)):
            match_by_annotator[i].append(dice_coefficient(pred_i, mask_i))

    def _mean(key: str) -> float:
        return float(sum(r[key] for r in per_case) / len(per_case))

    per_annotator = [
        {
            "annotator": i + 1,
            "style_name": styles[i].style_name,
            "dice_match": 100.0 * float(np.mean(vals)),
        }
        for i, vals in enumerate(match_by_annotator)
    ]
    mean_dice = float(np.mean([row["dice_match"] for row in per_annotator]))
    return MetricsReport(
        ged=_mean("ged"),
        dice_soft=_mean("dice_soft"),
        dice_max=_mean("dice_max"),
        dice_match=_mean("dice_match"),
        mean_dice=mean_dice,
        per_case=per_case,
        per_annotator=per_annotator,
        config={
            "split": split,
            "k": k,
            "seed": seed,
            "threshold": threshold,
            "prompt_variant": prompt_variant,
            "ged_kernel": "1 - IoU, empty-empty -> 0, GED^2 clamped at 0",
            "dice_soft_definition": "soft Dice averaged over all sample x annotator pairs",
        },
    )

"""Prompt-to-latent machinery: projection MLP, similarity-weighted fusion, and
the personalization / interpolation pipelines over a trained model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn

from .backbone import ProbUNet
from .errors import ValidationError
from .latent import LatentCode, as_tensor
from .text import TextEncoder


@dataclass
class PromptEmbedding:
    e: np.ndarray
    source_text: str
    encoder_id: str

    @property
    def dim(self) -> int:
        return self.e.shape[-1]


def encode_text(text: str, encoder: TextEncoder) -> PromptEmbedding:
    """Embed a prompt with the frozen encoder; deterministic per (text, encoder)."""
    if not isinstance(text, str) or not text.strip():
        raise ValidationError("prompt text must be a nonempty string")
    return PromptEmbedding(np.asarray(encoder.encode(text), dtype=np.float64), text, encoder.encoder_id)


class ProjectionMlp(nn.Module):
    """Two affine layers with a rectifier between; maps text embeddings into the
    latent space. The only trainable parameters of stage 2 by default."""

    def __init__(self, embed_dim: int = 64, latent_dim: int = 6, hidden: int = 128,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.embed_dim = embed_dim
        self.latent_dim = latent_dim
        self.fc1 = nn.Linear(embed_dim, hidden)
        self.fc2 = nn.Linear(hidden, latent_dim)
        self.to(dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.fc1.weight.dtype

    def forward(self, e: Tensor) -> Tensor:
        return self.fc2(torch.relu(self.fc1(e)))


def project(embedding: PromptEmbedding | Tensor, mlp: ProjectionMlp) -> LatentCode:
    """z_proj = MLP(e)."""
    e = embedding.e if isinstance(embedding, PromptEmbedding) else embedding
    e = torch.as_tensor(np.asarray(e)) if not isinstance(e, Tensor) else e
    if e.shape[-1] != mlp.embed_dim:
        raise ValidationError(f"embedding dim {e.shape[-1]} != MLP input dim {mlp.embed_dim}")
    return LatentCode(mlp(e.to(mlp.dtype)), origin="projected")


@dataclass
class SimilarityProfile:
    """Scaled dot products of z_proj against K latent samples and their softmax."""

    scores: Tensor  # (K,)
    weights: Tensor  # (K,), nonnegative, sums to 1
    sample_ids: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.scores.shape[-1]

    def to_lists(self) -> dict[str, list[float]]:
        return {
            "scores": [float(v) for v in self.scores],
            "weights": [float(v) for v in self.weights],
        }


def similarity_profile(
    z_proj: LatentCode | Tensor, samples: Tensor, sample_ids: tuple[str, ...] = ()
) -> SimilarityProfile:
    """scores_k = (z_proj . z_k) / sqrt(D); weights = softmax(scores)."""
    z = as_tensor(z_proj)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValidationError(f"need K >= 1 samples of shape (K, D), got {tuple(samples.shape)}")
    d = samples.shape[-1]
    if z.shape[-1] != d:
        raise ValidationError(f"z_proj dim {z.shape[-1]} != sample dim {d}")
    scores = samples @ z / math.sqrt(d)
    weights = torch.softmax(scores, dim=-1)
    return SimilarityProfile(scores, weights, sample_ids)


def fuse(profile: SimilarityProfile, samples: Tensor) -> LatentCode:
    """z_prompt = sum_k weights_k z_k; stays in the convex hull of the samples."""
    if profile.k != samples.shape[0]:
        raise ValidationError(
            f"profile has {profile.k} weights but {samples.shape[0]} samples were given"
        )
    return LatentCode(profile.weights @ samples, origin="fused")


def _as_rng(rng: int | np.random.Generator) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


class PersonaModel:
    """Inference bundle: trained backbone + projection MLP + frozen text encoder.

    All methods run in eval mode under no_grad and are deterministic for a
    fixed rng seed; latent samples are drawn once per request.
    """

    def __init__(self, backbone: ProbUNet, mlp: ProjectionMlp, encoder: TextEncoder):
        if mlp.latent_dim != backbone.latent_dim:
            raise ValidationError("MLP latent dim does not match backbone latent dim")
        self.backbone = backbone.eval()
        self.mlp = mlp.eval()
        self.encoder = encoder
        self.meta: dict = {}

    @classmethod
    def from_checkpoint(cls, checkpoint_dir) -> "PersonaModel":
        from .checkpoint import load_checkpoint

        bundle = load_checkpoint(checkpoint_dir)
        if bundle.mlp is None:
            raise ValidationError(
                f"checkpoint {checkpoint_dir} is stage {bundle.meta['stage']}; "
                "personalization needs a stage-2 checkpoint"
            )
        model = cls(bundle.backbone, bundle.mlp, bundle.encoder)
        model.meta = bundle.meta
        return model

    @property
    def latent_dim(self) -> int:
        return self.backbone.latent_dim

    def _image_tensor(self, image: np.ndarray) -> Tensor:
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"image must be 2-D (H, W), got shape {arr.shape}")
        return torch.as_tensor(arr, dtype=self.backbone.dtype)[None, None]

    def _draw(self, image: np.ndarray, k: int, rng) -> tuple[Tensor, Tensor, list[Tensor]]:
        """Encode once and draw K prior samples; single code path shared by
        personalize / interpolate / predict_samples so seeds line up."""
        if k < 1:
            raise ValidationError(f"K must be >= 1, got {k}")
        rng = _as_rng(rng)
        x = self._image_tensor(image)
        feats, pyramid = self.backbone.encode(x)
        prior = self.backbone.prior_head(feats)
        noise = torch.as_tensor(
            rng.standard_normal((k, self.latent_dim)), dtype=self.backbone.dtype
        )
        samples = prior.mu + prior.sigma * noise  # (K, D) via broadcast over (1, D)
        return samples, feats, pyramid

    def _decode_fused(self, z_proj: LatentCode, samples, feats, pyramid):
        profile = similarity_profile(z_proj, samples)
        z_prompt = fuse(profile, samples)
        out = self.backbone.decode(feats, pyramid, z_prompt.z[None])
        return out.probs[0].numpy(), profile

    @torch.no_grad()
    def personalize(
        self, image: np.ndarray, prompt_text: str, k: int = 10, rng: int | np.random.Generator = 0
    ) -> tuple[np.ndarray, SimilarityProfile]:
        """encode -> prior -> K samples -> project prompt -> fuse -> decode."""
        samples, feats, pyramid = self._draw(image, k, rng)
        z_proj = project(encode_text(prompt_text, self.encoder), self.mlp)
        return self._decode_fused(z_proj, samples, feats, pyramid)

    @torch.no_grad()
    def personalize_many(
        self, image: np.ndarray, prompt_texts: list[str], k: int = 10,
        rng: int | np.random.Generator = 0,
    ) -> list[tuple[np.ndarray, SimilarityProfile]]:
        """Personalize several prompts against one shared set of latent samples."""
        samples, feats, pyramid = self._draw(image, k, rng)
        out = []
        for text in prompt_texts:
            z_proj = project(encode_text(text, self.encoder), self.mlp)
            out.append(self._decode_fused(z_proj, samples, feats, pyramid))
        return out

    @torch.no_grad()
    def interpolate(
        self, image: np.ndarray, prompt_a: str, prompt_b: str, t: float, k: int = 10,
        rng: int | np.random.Generator = 0,
    ) -> tuple[np.ndarray, SimilarityProfile]:
        """Linear interpolation between the two projected codes; both prompts see
        the same K samples, so t=0 and t=1 reproduce personalize() exactly."""
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"t must lie in [0, 1], got {t}")
        samples, feats, pyramid = self._draw(image, k, rng)
        z_a = project(encode_text(prompt_a, self.encoder), self.mlp)
        z_b = project(encode_text(prompt_b, self.encoder), self.mlp)
        z_t = LatentCode((1.0 - t) * z_a.z + t * z_b.z, origin="interpolated")
        return self._decode_fused(z_t, samples, feats, pyramid)

    @torch.no_grad()
    def predict_samples(
        self, image: np.ndarray, k: int = 10, rng: int | np.random.Generator = 0
    ) -> np.ndarray:
        """Decode K prior samples -> (K, H, W) probability maps."""
        samples, feats, pyramid = self._draw(image, k, rng)
        probs = self.backbone.decode_ensemble(feats, pyramid, samples[None])
        return probs[0].numpy()

"""Probabilistic U-Net: deterministic encoder/decoder with prior and posterior
Gaussian heads and latent-conditioned decoding.

The latent code is injected at the decoder's lowest resolution: broadcast over
the bottleneck grid, channel-concatenated with the bottleneck features, then
decoded through the upsampling path with skip connections.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .errors import ValidationError
from .latent import LatentCode, LatentGaussian, as_tensor

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 1
    depth: int = 3  # downsamplings; latent injection at H / 2**depth
    base_width: int = 16
    latent_dim: int = 6
    sigma_floor: float = 1e-5

    def widths(self) -> list[int]:
        """Channel count per resolution level, full res first; capped at 2x base."""
        return [self.base_width] + [2 * self.base_width] * self.depth


@dataclass
class ProbabilityMap:
    """Sigmoid-activated segmentation map with its raw logits."""

    probs: Tensor  # (..., H, W) in [0, 1]
    logits: Tensor | None = None


def _he_init(module: nn.Module) -> None:
    # zero biases keep narrow blocks from going all-dead at init
    if isinstance(module, nn.Conv2d):
        nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)


class _ConvBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, n_convs: int = 2):
        super().__init__()
        layers: list[nn.Module] = []
        ch = in_ch
        for _ in range(n_convs):
            layers += [nn.Conv2d(ch, out_ch, kernel_size=3, padding=1), nn.ReLU(inplace=True)]
            ch = out_ch
        self.body = nn.Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        return self.body(x)


class _GaussianHead(nn.Module):
    """Two 1x1 convolutional heads on globally pooled features -> (mu, sigma)."""

    def __init__(self, in_ch: int, latent_dim: int, sigma_floor: float):
        super().__init__()
        self.mu_head = nn.Conv2d(in_ch, latent_dim, kernel_size=1)
        self.sigma_head = nn.Conv2d(in_ch, latent_dim, kernel_size=1)
        self.sigma_floor = sigma_floor

    def forward(self, features: Tensor) -> LatentGaussian:
        pooled = features.mean(dim=(2, 3), keepdim=True)
        mu = self.mu_head(pooled)[:, :, 0, 0]
        sigma = F.softplus(self.sigma_head(pooled)[:, :, 0, 0]).clamp_min(self.sigma_floor)
        return LatentGaussian(mu, sigma)


class _PosteriorNet(nn.Module):
    """Lightweight encoder over (image, mask) channels, separate from the prior path."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        widths = cfg.widths()
        blocks = [_ConvBlock(cfg.in_channels + 1, widths[0], n_convs=1)]
        for i in range(cfg.depth):
            blocks.append(_ConvBlock(widths[i], widths[i + 1], n_convs=1))
        self.blocks = nn.ModuleList(blocks)
        self.head = _GaussianHead(widths[-1], cfg.latent_dim, cfg.sigma_floor)

    def forward(self, image: Tensor, mask: Tensor) -> LatentGaussian:
        x = torch.cat([image, mask], dim=1)
        x = self.blocks[0](x)
        for block in self.blocks[1:]:
            x = block(F.max_pool2d(x, 2))
        return self.head(x)


class ProbUNet(nn.Module):
    """Encoder/decoder with per-image Gaussian prior and (image, mask) posterior."""

    def __init__(self, cfg: BackboneConfig | None = None, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg or BackboneConfig()
        widths = self.cfg.widths()

        self.stem = _ConvBlock(self.cfg.in_channels, widths[0])
        self.enc_blocks = nn.ModuleList(
            _ConvBlock(widths[i], widths[i + 1]) for i in range(self.cfg.depth)
        )
        self.prior = _GaussianHead(widths[-1], self.cfg.latent_dim, self.cfg.sigma_floor)
        self.posterior = _PosteriorNet(self.cfg)

        self.inject = _ConvBlock(widths[-1] + self.cfg.latent_dim, widths[-1], n_convs=1)
        # decoder level i consumes the skip at depth-1-i; output width follows the skip
        self.dec_blocks = nn.ModuleList(
            _ConvBlock(widths[i + 1] + widths[i], widths[i])
            for i in reversed(range(self.cfg.depth))
        )
        self.out_conv = nn.Conv2d(widths[0], 1, kernel_size=1)
        self.apply(_he_init)
        self.to(dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.out_conv.weight.dtype

    @property
    def latent_dim(self) -> int:
        return self.cfg.latent_dim

    def _check_image(self, image: Tensor) -> None:
        if image.ndim != 4 or image.shape[1] != self.cfg.in_channels:
            raise ValidationError(
                f"expected image of shape (B, {self.cfg.in_channels}, H, W), got {tuple(image.shape)}"
            )
        factor = 2**self.cfg.depth
        if image.shape[-2] % factor or image.shape[-1] % factor:
            raise ValidationError(
                f"image sides must be divisible by {factor}, got {tuple(image.shape[-2:])}"
            )
        if not bool(torch.isfinite(image).all()):
            raise ValidationError("image contains non-finite values")

    def encode(self, image: Tensor) -> tuple[Tensor, list[Tensor]]:
        """Returns (bottleneck features, skip pyramid ordered full-res first)."""
        self._check_image(image)
        x = self.stem(image)
        pyramid = [x]
        for block in self.enc_blocks:
            x = block(F.max_pool2d(x, 2))
            pyramid.append(x)
        features = pyramid.pop()
        return features, pyramid

    def prior_head(self, features: Tensor) -> LatentGaussian:
        return self.prior(features)

    def posterior_head(self, image: Tensor, mask: Tensor) -> LatentGaussian:
        self._check_image(image)
        if mask.ndim == 3:
            mask = mask[:, None]
        if mask.shape != image.shape:
            raise ValidationError(
                f"mask shape {tuple(mask.shape)} incompatible with image {tuple(image.shape)}"
            )
        if not bool(((mask == 0) | (mask == 1)).all()):
            raise ValidationError("mask values must be binary 0/1")
        return self.posterior(image, mask.to(image.dtype))

    def decode(self, features: Tensor, pyramid: list[Tensor], z: Tensor | LatentCode) -> ProbabilityMap:
        """Broadcast z over the bottleneck grid, concat, and decode with skips."""
        z = as_tensor(z)
        if z.ndim == 1:
            z = z[None]
        if z.shape[-1] != self.cfg.latent_dim:
            raise ValidationError(f"z dim {z.shape[-1]} != latent dim {self.cfg.latent_dim}")
        b, _, h, w = features.shape
        if z.shape[0] != b:
            raise ValidationError(f"z batch {z.shape[0]} != feature batch {b}")
        zmap = z[:, :, None, None].expand(-1, -1, h, w)
        x = self.inject(torch.cat([features, zmap], dim=1))
        for block, skip in zip(self.dec_blocks, reversed(pyramid)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = block(torch.cat([x, skip], dim=1))
        logits = self.out_conv(x)[:, 0]
        return ProbabilityMap(torch.sigmoid(logits), logits)

    def decode_ensemble(self, features: Tensor, pyramid: list[Tensor], zs: Tensor) -> Tensor:
        """Decode K codes per image; zs (B, K, D) -> probs (B, K, H, W)."""
        b, k, _ = zs.shape
        feats_rep = features.repeat_interleave(k, dim=0)
        pyr_rep = [s.repeat_interleave(k, dim=0) for s in pyramid]
        out = self.decode(feats_rep, pyr_rep, zs.reshape(b * k, -1))
        return out.probs.reshape(b, k, *out.probs.shape[-2:])

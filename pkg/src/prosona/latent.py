"""Latent-space primitives: diagonal Gaussians and latent codes."""

from __future__ import annotations

from dataclasses import dataclass

from torch import Tensor

from .errors import ValidationError

# provenance tags for latent codes
ORIGINS = ("prior_sample", "posterior_sample", "projected", "fused", "interpolated")


@dataclass
class LatentGaussian:
    """Diagonal Gaussian N(mu, diag(sigma^2)) over the latent space.

    mu and sigma share shape (..., D); sigma must be strictly positive.
    """

    mu: Tensor
    sigma: Tensor

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ValidationError(
                f"mu shape {tuple(self.mu.shape)} != sigma shape {tuple(self.sigma.shape)}"
            )
        if not bool((self.sigma > 0).all()):
            raise ValidationError("sigma must be strictly positive elementwise")

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]


@dataclass
class LatentCode:
    """A point in the latent space, tagged with how it was produced."""

    z: Tensor
    origin: str = "prior_sample"

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValidationError(f"unknown origin {self.origin!r}; expected one of {ORIGINS}")

    @property
    def dim(self) -> int:
        return self.z.shape[-1]


def sample(g: LatentGaussian, noise: Tensor, origin: str = "prior_sample") -> LatentCode:
    """Reparameterized draw z = mu + sigma * noise; noise is supplied externally."""
    if noise.shape[-1] != g.dim:
        raise ValidationError(f"noise dim {noise.shape[-1]} != latent dim {g.dim}")
    return LatentCode(g.mu + g.sigma * noise, origin=origin)


def as_tensor(code) -> Tensor:
    return code.z if isinstance(code, LatentCode) else code

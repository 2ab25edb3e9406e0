"""Frozen text encoders behind a pluggable interface.

The built-in fallback is a deterministic hashed bag-of-words embedding, so the
whole pipeline runs offline and reproducibly; a CLIP-compatible encoder can be
plugged in via ``external:<module.py>`` exposing ``build_encoder()``.
"""

from __future__ import annotations

import hashlib
import importlib.util
import string
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigurationError, ValidationError

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


@runtime_checkable
class TextEncoder(Protocol):
    encoder_id: str
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


class HashedBowEncoder:
    """Signed-hash bag-of-words: lowercase, strip punctuation, hash each token
    into one of `dim` buckets with a sign bit, accumulate, L2-normalize."""

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.encoder_id = f"hashed-bow-{dim}d"

    @staticmethod
    def _tokenize(text: str) -> list[str]:
        return text.lower().translate(_PUNCT_TABLE).split()

    def encode(self, text: str) -> np.ndarray:
        tokens = self._tokenize(text)
        if not tokens:
            raise ValidationError(f"text {text!r} has no tokens")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "big")
            sign = 1.0 if h & 1 else -1.0
            vec[(h >> 1) % self.dim] += sign
        norm = np.linalg.norm(vec)
        if norm == 0:  # opposite-sign collisions cancelled everything out
            vec[0] = 1.0
            norm = 1.0
        return vec / norm


def load_text_encoder(spec: str = "fallback", dim: int = 64) -> TextEncoder:
    """Resolve a config value `fallback | external:<path>` to an encoder."""
    if spec == "fallback":
        return HashedBowEncoder(dim=dim)
    if spec.startswith("external:"):
        path = Path(spec.split(":", 1)[1])
        if not path.exists():
            raise ConfigurationError(f"external encoder module not found: {path}")
        module_spec = importlib.util.spec_from_file_location(path.stem, path)
        module = importlib.util.module_from_spec(module_spec)
        module_spec.loader.exec_module(module)
        if not hasattr(module, "build_encoder"):
            raise ConfigurationError(f"{path} must define build_encoder() -> TextEncoder")
        encoder = module.build_encoder()
        if not isinstance(encoder, TextEncoder):
            raise ConfigurationError(f"{path}.build_encoder() does not satisfy the encoder protocol")
        return encoder
    raise ConfigurationError(f"unknown text_encoder spec {spec!r}")

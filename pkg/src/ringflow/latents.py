"""Deterministic latent-tensor primitives: seeded noise and latent-space metrics.

A latent is a plain float64 numpy array of shape [T, D] with the frame axis
first; the batched form [B, T, D] appears only transiently inside a pipeline
tick.  Per-frame control curves are float64 arrays of shape [T] and broadcast
along the frame axis.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Latent",
    "Curve",
    "NoiseSource",
    "ShapeMismatchError",
    "content_hash",
    "prompt_id",
    "mse",
    "rms_diff",
    "segment_cosine_similarity",
]

Latent = np.ndarray
Curve = np.ndarray


class ShapeMismatchError(ValueError):
    """Operands do not share the shape an operation requires."""


def _require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a: Latent, b: Latent) -> float:
    """Mean squared element difference between two equally shaped latents."""
    _require_same_shape(a, b)
    d = a - b
    return float(np.mean(d * d))


def rms_diff(a: Latent, b: Latent) -> float:
    """Root-mean-square element difference, sqrt(mse(a, b))."""
    return float(np.sqrt(mse(a, b)))


def segment_cosine_similarity(a: Latent, b: Latent, n_segments: int) -> np.ndarray:
    """Cosine similarity of flattened contiguous frame segments.

    The frame axis is split into ``n_segments`` chunks of equal size, with the
    last chunk absorbing any remainder.  A segment with a zero-norm operand
    scores 0.
    """
    _require_same_shape(a, b)
    frames = a.shape[0]
    if n_segments < 1 or n_segments > frames:
        raise ValueError(f"n_segments must be in [1, {frames}], got {n_segments}")
    base = frames // n_segments
    out = np.zeros(n_segments)
    for i in range(n_segments):
        lo = i * base
        hi = (i + 1) * base if i < n_segments - 1 else frames
        u = a[lo:hi].ravel()
        v = b[lo:hi].ravel()
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            continue
        out[i] = float(np.dot(u, v)) / (nu * nv)
    return out


def _feed(h, part) -> None:
    if isinstance(part, bool):
        part = int(part)
    if isinstance(part, int):
        h.update(b"i" + part.to_bytes(16, "little", signed=True))
    elif isinstance(part, float):
        h.update(b"f" + struct.pack("<d", part))
    elif isinstance(part, str):
        h.update(b"s" + part.encode("utf-8"))
    elif isinstance(part, bytes):
        h.update(b"b" + part)
    elif isinstance(part, np.ndarray):
        h.update(b"a" + str(part.shape).encode() + np.ascontiguousarray(part, dtype=np.float64).tobytes())
    elif part is None:
        h.update(b"n")
    elif isinstance(part, (tuple, list)):
        h.update(b"(")
        for p in part:
            _feed(h, p)
        h.update(b")")
    else:
        raise TypeError(f"unhashable content part: {type(part)!r}")


def content_hash(*parts) -> int:
    """Stable 63-bit content hash over ints, floats, strings, bytes and arrays."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        _feed(h, part)
    return int.from_bytes(h.digest(), "little") & (2**63 - 1)


def prompt_id(text: str) -> int:
    """Map a prompt string to the integer id the toy model conditions on."""
    return content_hash("prompt", text)


@dataclass(frozen=True)
class NoiseSource:
    """Counter-based keyed gaussian noise.

    Every draw is a pure function of (seed, stream, step, tag): the structured
    key is hashed into a Philox key, so the same key always reproduces the same
    tensor and distinct purpose tags can never collide.  ``stream`` carries the
    submission's conditioning hash so held conditioning re-renders identically.
    """

    seed: int
    stream: int = 0

    def _generator(self, step: int, tag: str) -> np.random.Generator:
        h = hashlib.blake2b(digest_size=16)
        h.update(struct.pack("<qq", self.seed, self.step_safe(step)))
        h.update(self.stream.to_bytes(16, "little", signed=True))
        h.update(tag.encode("utf-8"))
        key = int.from_bytes(h.digest(), "little")
        return np.random.Generator(np.random.Philox(key=key))

    @staticmethod
    def step_safe(step: int) -> int:
        if step < 0:
            raise ValueError("noise step index must be >= 0")
        return step

    def normal(self, step: int, tag: str, shape) -> np.ndarray:
        """Standard-normal tensor for the given (step, purpose-tag) key."""
        return self._generator(step, tag).standard_normal(shape)

    def uniform(self, step: int, tag: str, shape) -> np.ndarray:
        """Uniform [0, 1) tensor for the given (step, purpose-tag) key."""
        return self._generator(step, tag).random(shape)

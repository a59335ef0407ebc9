"""Closed-form flow-matching stand-in for the learned decoder.

The model's denoising target x0 is an explicit function of the conditioning:

    x0 = base(prompt) + hint_strength * hint(prompt)
         + timbre_strength * timbre(prompt) + style_offset

where base/hint/timbre are seeded smooth per-frame signals (sums of a few
random harmonics along the frame axis).  The velocity field is the exact
flow-matching field for that target, v = (x_t - x0) / t, optionally plus a
small seeded perturbation emulating imperfect prediction.  Because the target
is analytic, every propagation and gradient experiment has a checkable oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .latents import Curve, Latent, NoiseSource, content_hash

__all__ = ["ConditionSet", "ModelWeights", "ToyFlowModel", "UNCOND_PROMPT"]

UNCOND_PROMPT = 0  # prompt id of the unconditional branch used for guidance

PATTERN_HARMONICS = 4
HINT_SCALE = 0.45
TIMBRE_SCALE = 0.45


@dataclass(frozen=True)
class ConditionSet:
    """One frozen conditioning bundle: what a generation is asked to be.

    ``weight_curve`` is this condition's per-frame weight when several
    conditions are blended; None means uniform weight.
    """

    prompt_hash: int
    hint_strength: float = 0.0
    timbre_strength: float = 0.0
    source: Optional[Latent] = None
    weight_curve: Optional[Curve] = None

    def __post_init__(self):
        if not 0.0 <= self.hint_strength <= 1.0:
            raise ValueError("hint_strength must be in [0, 1]")
        if not 0.0 <= self.timbre_strength <= 1.0:
            raise ValueError("timbre_strength must be in [0, 1]")

    def content_key(self) -> int:
        """Stable hash of the conditioning content; keys the noise streams."""
        return content_hash(
            self.prompt_hash,
            self.hint_strength,
            self.timbre_strength,
            self.source,
            self.weight_curve,
        )

    def with_source(self, source: Optional[Latent]) -> "ConditionSet":
        return replace(self, source=source)


@dataclass
class ModelWeights:
    """Mutable shared weights: a style offset added to every x0 target.

    Mutation bumps ``version``; the pipeline serializes writes against ticks
    so every read within one tick sees exactly one version.
    """

    style_offset: Latent
    version: int = 0

    @classmethod
    def zeros(cls, shape) -> "ModelWeights":
        return cls(style_offset=np.zeros(shape))

    def swap_offset(self, offset: Latent) -> None:
        if offset.shape != self.style_offset.shape:
            raise ValueError(
                f"offset shape {offset.shape} != {self.style_offset.shape}"
            )
        self.style_offset = np.array(offset, dtype=np.float64)
        self.version += 1


class ToyFlowModel:
    """Deterministic velocity oracle over [frames, channels] latents."""

    def __init__(self, frames: int, channels: int, perturbation: float = 0.0):
        self.frames = frames
        self.channels = channels
        self.perturbation = perturbation
        self._patterns: dict = {}

    @property
    def shape(self):
        return (self.frames, self.channels)

    def pattern(self, kind: str, prompt_hash: int) -> Latent:
        """Seeded smooth signal: a few random harmonics along the frame axis."""
        key = (kind, prompt_hash)
        cached = self._patterns.get(key)
        if cached is not None:
            return cached
        rng = NoiseSource(seed=prompt_hash, stream=content_hash("pattern", kind))
        amps = rng.normal(0, "amps", (PATTERN_HARMONICS, self.channels))
        phases = 2.0 * np.pi * rng.uniform(0, "phases", (PATTERN_HARMONICS, self.channels))
        t = (np.arange(self.frames, dtype=np.float64) + 0.5) / self.frames
        out = np.zeros(self.shape)
        for k in range(PATTERN_HARMONICS):
            angle = 2.0 * np.pi * (k + 1) * t[:, None] + phases[k][None, :]
            out += amps[k][None, :] * np.sin(angle)
        out /= np.sqrt(PATTERN_HARMONICS)
        out.setflags(write=False)
        self._patterns[key] = out
        return out

    def x0_of(self, cond: ConditionSet, weights: ModelWeights) -> Latent:
        """The analytic denoising target for one conditioning bundle."""
        x0 = self.pattern("base", cond.prompt_hash).copy()
        if cond.hint_strength != 0.0:
            x0 += cond.hint_strength * HINT_SCALE * self.pattern("hint", cond.prompt_hash)
        if cond.timbre_strength != 0.0:
            x0 += cond.timbre_strength * TIMBRE_SCALE * self.pattern("timbre", cond.prompt_hash)
        x0 += weights.style_offset
        return x0

    def velocity(
        self,
        x_t: Latent,
        t: float,
        cond: ConditionSet,
        weights: ModelWeights,
        rng: NoiseSource,
        step: int,
    ) -> Latent:
        """Exact flow velocity toward x0, x_t = x0 + t * v.

        With ``perturbation`` > 0 a seeded term proportional to t is added, so
        x_t - v * t no longer cancels to x0 exactly (imperfect prediction).
        """
        if t <= 0.0:
            raise ValueError("velocity is undefined at t <= 0")
        v = (x_t - self.x0_of(cond, weights)) / t
        if self.perturbation != 0.0:
            v = v + self.perturbation * t * rng.normal(step, "model", x_t.shape)
        return v

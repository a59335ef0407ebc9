"""Toy convolutional codec with a known finite receptive field.

The decoder is a stack of bias-free dilated 1-D convolutions (kernel 3,
dilations 1/2/4/8 by default, tanh between layers) followed by a per-frame
linear upsampler of ``hop`` samples per frame.  Its one-sided receptive field
is the sum of the dilations: 15 frames for the default stack.  Because every
output sample depends only on latent frames within that radius, decoding an
extended window and trimming the margins reproduces the full decode's interior
bit for bit once the overlap covers the receptive field; windows that cross
the latent's edges are padded with the same zeros the full decode sees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .latents import Latent, NoiseSource

__all__ = ["PcmChunk", "ToyCodec", "measure_receptive_field", "PCM_FULL_SCALE"]

PCM_FULL_SCALE = 32767


def quantize_pcm(samples: np.ndarray) -> np.ndarray:
    """Round-half-away-from-zero to 16-bit, clipped at full scale."""
    scaled = samples * PCM_FULL_SCALE
    rounded = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    return np.clip(rounded, -32768, 32767).astype(np.int16)


@dataclass(frozen=True)
class PcmChunk:
    """A run of 16-bit mono samples aligned to latent frame boundaries."""

    samples: np.ndarray  # int16 [frame_count * hop]
    start_frame: int
    hop: int

    def __post_init__(self):
        if self.samples.dtype != np.int16:
            raise ValueError("PcmChunk samples must be int16")
        if self.samples.shape[0] % self.hop != 0:
            raise ValueError("sample count must be a whole number of frames")

    @property
    def frame_count(self) -> int:
        return self.samples.shape[0] // self.hop

    def header(self) -> dict:
        return {
            "hop": self.hop,
            "start_frame": self.start_frame,
            "frame_count": self.frame_count,
        }

    def to_bytes(self) -> bytes:
        """Raw little-endian 16-bit mono blob."""
        return self.samples.astype("<i2").tobytes()

    def header_json(self) -> str:
        return json.dumps(self.header(), sort_keys=True)


class ToyCodec:
    """Deterministic encoder/decoder pair over [frames, channels] latents."""

    def __init__(
        self,
        channels: int = 8,
        hop: int = 64,
        dilations: tuple = (1, 2, 4, 8),
        seed: int = 7,
    ):
        self.channels = channels
        self.hop = hop
        self.dilations = tuple(dilations)
        self.receptive_field = sum(self.dilations)  # one-sided, in frames
        rng = NoiseSource(seed=seed, stream=0)
        scale = 1.0 / np.sqrt(3 * channels)
        self._kernels = [
            rng.normal(i, "decoder-conv", (3, channels, channels)) * scale
            for i in range(len(self.dilations))
        ]
        self._upsample = rng.normal(0, "decoder-up", (hop, channels)) * (0.5 / np.sqrt(channels))
        self._encode_proj = rng.normal(0, "encoder-proj", (channels, hop)) / np.sqrt(hop)
        self.frames_decoded_last = 0

    # ---------------------------------------------------------------- decode

    def _run_stack(self, latent: Latent, valid: tuple = None) -> np.ndarray:
        """Run the conv stack; ``valid`` marks which rows are real latent frames.

        Each conv zero-pads at the latent's bounds.  When decoding an extended
        window whose margins cross those bounds, activations outside ``valid``
        are pinned back to zero after every layer so deeper layers see exactly
        the context the full decode's padding provides.
        """
        if latent.ndim != 2 or latent.shape[1] != self.channels:
            raise ValueError(f"latent must be [T, {self.channels}]")
        h = np.asarray(latent, dtype=np.float64)
        mask = None
        if valid is not None and (valid[0] > 0 or valid[1] < h.shape[0]):
            mask = np.zeros((h.shape[0], 1))
            mask[valid[0] : valid[1]] = 1.0
        for kernel, dilation in zip(self._kernels, self.dilations):
            h = self._conv(h, kernel, dilation)
            h = np.tanh(h)
            if mask is not None:
                h = h * mask
        return h

    @staticmethod
    def _conv(x: np.ndarray, kernel: np.ndarray, dilation: int) -> np.ndarray:
        # Zero-padded same-length conv; fixed tap order keeps sums bit-stable
        # regardless of where the array was sliced from.
        frames = x.shape[0]
        padded = np.zeros((frames + 2 * dilation, x.shape[1]))
        padded[dilation : dilation + frames] = x
        out = padded[0:frames] @ kernel[0]
        out += padded[dilation : dilation + frames] @ kernel[1]
        out += padded[2 * dilation : 2 * dilation + frames] @ kernel[2]
        return out

    def _render(self, latent: Latent, valid: tuple = None) -> np.ndarray:
        h = self._run_stack(latent, valid)
        self.frames_decoded_last = latent.shape[0]
        return (h @ self._upsample.T).reshape(-1)

    def full_decode(self, latent: Latent) -> PcmChunk:
        """Render the entire latent to 16-bit PCM."""
        return PcmChunk(quantize_pcm(self._render(latent)), start_frame=0, hop=self.hop)

    def windowed_decode(self, latent: Latent, window: tuple, overlap_frames: int) -> PcmChunk:
        """Decode only ``window`` (half-open frame range) with overlap margins.

        The window is extended by ``overlap_frames`` on both sides, decoded,
        and trimmed back.  Margins beyond the latent's bounds are zero frames,
        replicating the context the full decode's padding provides, so with
        overlap >= the receptive field the result matches the corresponding
        region of ``full_decode`` sample for sample.
        """
        start, stop = window
        frames = latent.shape[0]
        if not (0 <= start < stop <= frames):
            raise ValueError(f"window {window} outside [0, {frames})")
        if overlap_frames < 0:
            raise ValueError("overlap_frames must be >= 0")
        lo = start - overlap_frames
        hi = stop + overlap_frames
        extended = np.zeros((hi - lo, latent.shape[1]))
        src_lo = max(lo, 0)
        src_hi = min(hi, frames)
        extended[src_lo - lo : src_hi - lo] = latent[src_lo:src_hi]
        samples = self._render(extended, valid=(src_lo - lo, src_hi - lo))
        trim = overlap_frames * self.hop
        length = (stop - start) * self.hop
        return PcmChunk(
            quantize_pcm(samples[trim : trim + length]),
            start_frame=start,
            hop=self.hop,
        )

    # ---------------------------------------------------------------- encode

    def encode(self, samples: np.ndarray) -> Latent:
        """Project PCM-rate audio down to latent frames (lossy, shape contract only)."""
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] % self.hop != 0:
            raise ValueError("samples must be 1-D and a whole number of frames")
        frames = x.reshape(-1, self.hop)
        return frames @ self._encode_proj.T


def measure_receptive_field(codec: ToyCodec, probe_frames: int = 64) -> int:
    """Empirical one-sided receptive field, in frames.

    Perturbs one latent frame and finds the farthest output sample whose
    16-bit render moves by at least one LSB.
    """
    latent = np.zeros((probe_frames, codec.channels))
    baseline = codec.full_decode(latent).samples
    probe = probe_frames // 2
    perturbed_latent = latent.copy()
    perturbed_latent[probe] = 1.0
    perturbed = codec.full_decode(perturbed_latent).samples
    moved = np.nonzero(perturbed != baseline)[0]
    if moved.size == 0:
        return 0
    sample_frames = moved // codec.hop
    return int(np.max(np.abs(sample_frames - probe)))

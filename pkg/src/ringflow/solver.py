"""Per-step denoising math: ODE/SDE steps, per-frame control curves, guidance.

All seven control curves are per-frame [T] vectors resolved fresh at every
step.  An absent curve is equivalent to its sentinel (all-ones for
multiplicative curves, all-zeros for additive ones), which keeps the hot path
sentinel-free: supplying the sentinel must produce output identical to
supplying nothing.

The SDE step follows the five-line re-noise recipe with per-frame source
blending:

    x0_pred   = x_t - v * t_curr
    noise     = fresh seeded gaussian
    xt_full   = t_next * noise + (1 - t_next) * x0_pred
    xt_source = t_next * noise + (1 - t_next) * source
    x_next    = c * xt_full + (1 - c) * xt_source      # c = sde_denoise_curve

with the x0-target morph applied to x0_pred beforehand when a target is set
and the slot is in the refinement half of its schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .latents import Curve, Latent, NoiseSource, ShapeMismatchError

__all__ = [
    "CURVE_FIELDS",
    "CurveSet",
    "StepState",
    "MissingSourceError",
    "clamp_curve",
    "sentinel",
    "as_curve",
    "guided_velocity",
    "blend_conditions",
    "ode_step",
    "sde_step",
]

# name -> (kind, lo, hi).  Kind fixes the sentinel: "mult" -> ones, "add" -> zeros.
# apg_momentum is additive-kind: coefficient 0 means "no memory", which is the
# off state the sentinel rule requires.
CURVE_FIELDS = {
    "sde_denoise_curve": ("mult", 0.0, 1.0),
    "guidance_curve": ("mult", 0.0, 8.0),
    "velocity_scale": ("mult", 0.0, 4.0),
    "ode_noise_curve": ("add", 0.0, 1.0),
    "apg_momentum": ("add", -1.0, 1.0),
    "cfg_rescale_curve": ("mult", 0.0, 1.0),
    "x0_target_strength": ("mult", 0.0, 1.0),
}

RCFG_MODES = ("off", "full-cfg", "onetime-negative", "self-negative")


class MissingSourceError(ValueError):
    """An SDE step needed source latents (blend curve < 1 somewhere) but had none."""


def sentinel(name: str, frames: int) -> Curve:
    """The no-op curve for a field: ones if multiplicative, zeros if additive."""
    kind = CURVE_FIELDS[name][0]
    return np.ones(frames) if kind == "mult" else np.zeros(frames)


def clamp_curve(name: str, values, frames: int) -> Curve:
    """Coerce a scalar or vector to a clamped per-frame curve of length ``frames``."""
    if name not in CURVE_FIELDS:
        raise KeyError(f"unknown curve field {name!r}")
    _, lo, hi = CURVE_FIELDS[name]
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(frames, float(arr))
    if arr.shape != (frames,):
        raise ShapeMismatchError(f"{name} must have shape ({frames},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.clip(arr, lo, hi)


@dataclass(frozen=True)
class CurveSet:
    """The per-frame controls one solver step reads; every field optional."""

    sde_denoise_curve: Optional[Curve] = None
    guidance_curve: Optional[Curve] = None
    velocity_scale: Optional[Curve] = None
    ode_noise_curve: Optional[Curve] = None
    apg_momentum: Optional[Curve] = None
    cfg_rescale_curve: Optional[Curve] = None
    x0_target_strength: Optional[Curve] = None
    x0_target: Optional[Latent] = None
    guidance_enabled: bool = False
    rcfg_mode: str = "off"

    def __post_init__(self):
        if self.rcfg_mode not in RCFG_MODES:
            raise ValueError(f"rcfg_mode must be one of {RCFG_MODES}")
        if self.x0_target_strength is not None and self.x0_target is None:
            raise ValueError("x0_target_strength requires x0_target")


def make_curves(frames: int, x0_target: Optional[Latent] = None,
                guidance_enabled: bool = False, rcfg_mode: str = "off",
                **named) -> CurveSet:
    """Build a validated CurveSet, accepting scalars as flat curves."""
    clamped = {name: clamp_curve(name, value, frames)
               for name, value in named.items() if value is not None}
    return CurveSet(x0_target=x0_target, guidance_enabled=guidance_enabled,
                    rcfg_mode=rcfg_mode, **clamped)


@dataclass
class StepState:
    """Slot-owned solver scratch: reset at admission, never shared.

    ``momentum`` filters the guidance delta when apg_momentum is active;
    ``residual`` caches the onetime-negative guidance residual;
    ``prev_positive`` is last step's conditional velocity for self-negative.
    """

    steps_total: int
    step: int = 0
    momentum: Optional[Latent] = None
    residual: Optional[Latent] = None
    prev_positive: Optional[Latent] = None

    def in_refinement_half(self) -> bool:
        return self.step >= self.steps_total // 2


def _column(curve: Curve) -> np.ndarray:
    return curve[:, None]


def guided_velocity(
    v_cond: Latent,
    v_uncond: Optional[Latent],
    curves: CurveSet,
    state: StepState,
    step_index: int,
) -> Latent:
    """Classifier-free guidance with per-frame scale and residual variants.

        v = v_uncond + scale(t) * (v_cond - v_uncond)

    rcfg modes avoid the per-step negative pass: onetime-negative caches the
    step-0 residual and reuses it; self-negative uses the previous step's
    conditional velocity as the negative.  An apg_momentum curve low-pass
    filters the guidance delta (m <- beta * m + delta); a cfg_rescale_curve
    blends the per-frame output norm toward the positive-velocity norm.
    """
    frames = v_cond.shape[0]
    mode = curves.rcfg_mode

    if mode in ("off", "full-cfg"):
        if v_uncond is None:
            raise ValueError("guidance requires a negative velocity each step")
        negative = v_uncond
    elif mode == "onetime-negative":
        if state.residual is None:
            if v_uncond is None:
                raise ValueError("onetime-negative needs a negative at step 0")
            state.residual = v_cond - v_uncond
        negative = v_cond - state.residual
    elif mode == "self-negative":
        if state.prev_positive is None:
            if v_uncond is None:
                raise ValueError("self-negative needs a negative at step 0")
            negative = v_uncond
        else:
            negative = state.prev_positive
        state.prev_positive = v_cond.copy()
    else:  # pragma: no cover - rejected at CurveSet construction
        raise ValueError(mode)

    delta = v_cond - negative
    if curves.apg_momentum is not None:
        if state.momentum is None:
            state.momentum = np.zeros_like(v_cond)
        state.momentum = _column(curves.apg_momentum) * state.momentum + delta
        delta = state.momentum

    scale = curves.guidance_curve
    if scale is None:
        scale = sentinel("guidance_curve", frames)
    out = v_cond + _column(scale - 1.0) * delta

    if curves.cfg_rescale_curve is not None:
        norm_out = np.linalg.norm(out, axis=1)
        norm_pos = np.linalg.norm(v_cond, axis=1)
        keep = curves.cfg_rescale_curve
        blended = keep * norm_out + (1.0 - keep) * norm_pos
        factor = np.where(norm_out > 0.0, blended / np.where(norm_out > 0.0, norm_out, 1.0), 1.0)
        out = out * factor[:, None]
    return out


def blend_conditions(velocities: list, weights: list) -> Latent:
    """Per-frame convex combination of condition velocities.

        v = sum(w_i * v_i) / sum(w_i)

    Weights are per-frame curves, nonnegative, with a positive sum at every
    frame.  With a single condition the input is returned unchanged.
    """
    if not velocities:
        raise ValueError("at least one condition velocity required")
    if len(velocities) != len(weights):
        raise ValueError("one weight curve per velocity required")
    if len(velocities) == 1:
        return velocities[0]
    total = np.zeros_like(weights[0])
    acc = np.zeros_like(velocities[0])
    for v, w in zip(velocities, weights):
        if np.any(w < 0.0):
            raise ValueError("condition weights must be nonnegative")
        acc += _column(w) * v
        total += w
    if np.any(total <= 0.0):
        raise ValueError("condition weights sum to zero at some frame")
    return acc / _column(total)


def _morph_target(x0_pred: Latent, curves: CurveSet, state: StepState) -> Latent:
    """Blend the x0 prediction toward the target latent, gated to refinement."""
    if curves.x0_target is None or not state.in_refinement_half():
        return x0_pred
    strength = curves.x0_target_strength
    if strength is None:
        strength = sentinel("x0_target_strength", x0_pred.shape[0])
    alpha = _column(strength)
    return (1.0 - alpha) * x0_pred + alpha * curves.x0_target


def ode_step(
    x_t: Latent,
    v: Latent,
    t_curr: float,
    t_next: float,
    curves: CurveSet,
    rng: NoiseSource,
    state: Optional[StepState] = None,
) -> Latent:
    """Euler step with per-frame velocity scaling and additive noise.

        x_next = x_t + (velocity_scale * v) * (t_next - t_curr) + ode_noise_curve * n

    Sentinel curves reduce this to a plain Euler step.  When an x0 target is
    active (state supplied, refinement half), the step integrates toward the
    morphed x0 instead.
    """
    if t_next >= t_curr:
        raise ValueError(f"timesteps must decrease: {t_curr} -> {t_next}")
    _check_shapes(x_t, v)
    if state is not None and curves.x0_target is not None and state.in_refinement_half():
        x0_pred = x_t - v * t_curr
        v = (x_t - _morph_target(x0_pred, curves, state)) / t_curr
    if curves.velocity_scale is not None:
        v = _column(curves.velocity_scale) * v
    x_next = x_t + v * (t_next - t_curr)
    if curves.ode_noise_curve is not None:
        step = 0 if state is None else state.step
        x_next = x_next + _column(curves.ode_noise_curve) * rng.normal(step, "ode", x_t.shape)
    return x_next


def sde_step(
    x_t: Latent,
    v: Latent,
    t_curr: float,
    t_next: float,
    source: Optional[Latent],
    curves: CurveSet,
    state: StepState,
    rng: NoiseSource,
) -> Latent:
    """SDE re-noise step with per-frame source blending (module docstring).

    curve == 1 everywhere reduces to the standard SDE re-noise; curve == 0
    anchors to the source, and at t_next == 0 lands on it exactly.
    """
    if t_next >= t_curr:
        raise ValueError(f"timesteps must decrease: {t_curr} -> {t_next}")
    _check_shapes(x_t, v)
    x0_pred = x_t - v * t_curr
    x0_pred = _morph_target(x0_pred, curves, state)
    noise = rng.normal(state.step, "sde", x_t.shape)
    xt_full = t_next * noise + (1.0 - t_next) * x0_pred
    curve = curves.sde_denoise_curve
    if source is None:
        if curve is not None and np.any(curve < 1.0):
            raise MissingSourceError("sde_denoise_curve < 1 requires source latents")
        return xt_full
    if source.shape != x_t.shape:
        raise ShapeMismatchError(f"source shape {source.shape} != {x_t.shape}")
    if curve is None:
        curve = sentinel("sde_denoise_curve", x_t.shape[0])
    xt_source = t_next * noise + (1.0 - t_next) * source
    c = _column(curve)
    return c * xt_full + (1.0 - c) * xt_source


def _check_shapes(x_t: Latent, v: Latent) -> None:
    if x_t.shape != v.shape:
        raise ShapeMismatchError(f"latent/velocity shape mismatch: {x_t.shape} vs {v.shape}")

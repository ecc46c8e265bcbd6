"""Synthetic test videos: flashing spot, moving gradient pair, global flicker."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from csdvs.errors import ConfigError
from csdvs.videoio import FrameSequence, frame_timestamps_us

KINDS = ("flashing_spot", "gradient_pair", "flicker")
WAVEFORMS = ("square", "sine")

# per-kind geometry defaults; everything else comes from StimulusSpec
_KIND_DEFAULTS = {
    "flashing_spot": dict(width=128, height=128),
    "gradient_pair": dict(width=320, height=32),
    "flicker": dict(width=128, height=128),
}


@dataclass
class StimulusSpec:
    kind: str
    width: int = 128
    height: int = 128
    duration: float = 1.0
    fps: float = 500.0
    contrast: float = 1.5
    gray: float = 0.4
    # flashing spot
    spot_radius: float = 16.0
    antialias: bool = False
    # gradient pair: (gradual, sharp) raised-cosine full widths
    bump_widths: tuple = (128.0, 8.0)
    speed: float = 320.0
    # flicker
    flicker_hz: float = 10.0
    waveform: str = "square"
    checker_size: int = 8
    checker_dark: float = 0.01
    checker_bright: float = 0.6
    base: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def for_kind(cls, kind, **overrides):
        kind = kind.replace("-", "_")
        if kind not in KINDS:
            raise ConfigError(f"unknown stimulus kind {kind!r}; expected one of {KINDS}")
        params = dict(_KIND_DEFAULTS[kind])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(kind=kind, **params)

    @property
    def n_frames(self):
        return int(round(self.duration * self.fps))

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown stimulus kind {self.kind!r}")
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"frames must be at least 8x8, got {self.width}x{self.height}")
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not self.duration > 0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if not self.contrast > 1:
            raise ConfigError(f"contrast must exceed 1, got {self.contrast}")
        if self.n_frames < 1:
            raise ConfigError("duration * fps yields no frames")
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base")
        d["bump_widths"] = list(self.bump_widths)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "bump_widths" in d:
            d["bump_widths"] = tuple(d["bump_widths"])
        return cls(**d)


def generate(spec: StimulusSpec) -> FrameSequence:
    return {"flashing_spot": generate_flashing_spot,
            "gradient_pair": generate_gradient_pair,
            "flicker": generate_flicker}[spec.kind](spec)


def _check_kind(spec, kind):
    spec.validate()
    if spec.kind != kind:
        raise ConfigError(f"expected a {kind} spec, got {spec.kind}")


def _check_range(frames, what):
    if not (np.all(frames > 0) and np.all(frames <= 1)):
        raise ConfigError(f"{what}: luminance leaves (0, 1]; lower the gray level or contrast")


# --------------------------------------------------------------------------
# flashing spot


def spot_center(spec):
    return (spec.height - 1) / 2.0, (spec.width - 1) / 2.0


def spot_distance(spec):
    """Distance of every pixel center from the spot center."""
    cy, cx = spot_center(spec)
    yy, xx = np.mgrid[:spec.height, :spec.width]
    return np.hypot(yy - cy, xx - cx)


def spot_levels(spec):
    """Spot luminance of the five phases gray, bright, gray, dark, gray."""
    g = spec.gray
    return (g, g * spec.contrast, g, g / spec.contrast, g)


def generate_flashing_spot(spec: StimulusSpec) -> FrameSequence:
    """Spot flashing gray -> bright -> gray -> dark -> gray in equal phases."""
    _check_kind(spec, "flashing_spot")
    if not 0 < spec.spot_radius < min(spec.width, spec.height) / 2:
        raise ConfigError(f"spot radius {spec.spot_radius} must be in (0, min(width, height)/2)")
    if not 0 < spec.gray * spec.contrast <= 1:
        raise ConfigError("gray * contrast must lie in (0, 1]")
    r = spot_distance(spec)
    if spec.antialias:
        cover = np.clip(spec.spot_radius - r + 0.5, 0.0, 1.0)
    else:
        cover = (r < spec.spot_radius).astype(float)
    n = spec.n_frames
    levels = spot_levels(spec)
    frames = np.empty((n, spec.height, spec.width))
    for k in range(n):
        lev = levels[min(5 * k // n, 4)]
        frames[k] = spec.gray + (lev - spec.gray) * cover
    return FrameSequence(frames, frame_timestamps_us(n, spec.fps))


# --------------------------------------------------------------------------
# gradient pair


def raised_cosine(x, width):
    """``0.5 (1 + cos(2 pi x / width))`` on ``|x| < width/2``, else 0."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < width / 2.0, 0.5 * (1.0 + np.cos(2.0 * math.pi * x / width)), 0.0)


def bump_centers(spec, t):
    """Centers (gradual, sharp) in pixels at time ``t`` seconds."""
    w = spec.width
    shift = spec.speed * t
    return ((round(w / 4) + shift) % w, (round(3 * w / 4) + shift) % w)


def periodic_offset(x, center, period):
    return (np.asarray(x, dtype=float) - center + period / 2.0) % period - period / 2.0


def generate_gradient_pair(spec: StimulusSpec) -> FrameSequence:
    """Two vertical raised-cosine bumps of equal peak contrast moving right.

    The left bump is gradual (wide), the right one sharp (narrow).  Both
    wrap around the frame.
    """
    _check_kind(spec, "gradient_pair")
    wg, ws = spec.bump_widths
    if not (wg > 0 and ws > 0):
        raise ConfigError("bump widths must be positive")
    if max(wg, ws) < 4 * min(wg, ws):
        raise ConfigError(f"bump widths {wg}, {ws} must differ by at least 4x")
    W = spec.width
    a, b = bump_centers(spec, 0.0)
    gap = abs(b - a)
    if (wg + ws) / 2.0 > min(gap, W - gap):
        raise ConfigError("bumps overlap at t=0; widen the frame or narrow the bumps")
    g = spec.gray
    if not 0 < g * spec.contrast <= 1:
        raise ConfigError("gray * contrast must lie in (0, 1]")
    x = np.arange(W)
    n = spec.n_frames
    ts = frame_timestamps_us(n, spec.fps)
    frames = np.empty((n, spec.height, W))
    for k in range(n):
        ca, cb = bump_centers(spec, k / spec.fps)
        prof = raised_cosine(periodic_offset(x, ca, W), wg) + raised_cosine(periodic_offset(x, cb, W), ws)
        frames[k] = (g * (1.0 + (spec.contrast - 1.0) * prof))[None, :]
    return FrameSequence(frames, ts)


# --------------------------------------------------------------------------
# flicker


def checker_card(spec):
    """Left half checkerboard (textured), right half uniform gray."""
    yy, xx = np.mgrid[:spec.height, :spec.width]
    s = spec.checker_size
    checker = np.where((xx // s + yy // s) % 2 == 0, spec.checker_bright, spec.checker_dark)
    return np.where(xx < spec.width // 2, checker, spec.gray)


def flicker_gain(spec, t):
    """Global illumination factor in ``[1/contrast, contrast]``."""
    s = math.sin(2.0 * math.pi * spec.flicker_hz * t)
    if spec.waveform == "square":
        s = 1.0 if s >= 0 else -1.0
    return spec.contrast ** s


def generate_flicker(spec: StimulusSpec) -> FrameSequence:
    """``frame(t) = base * m(t)`` for a global flicker waveform ``m``."""
    _check_kind(spec, "flicker")
    if spec.waveform not in WAVEFORMS:
        raise ConfigError(f"waveform must be one of {WAVEFORMS}, got {spec.waveform!r}")
    if not spec.flicker_hz > 0:
        raise ConfigError("flicker frequency must be positive")
    if spec.flicker_hz >= spec.fps / 2:
        raise ConfigError(f"flicker {spec.flicker_hz} Hz aliases at {spec.fps} fps (needs < fps/2)")
    base = checker_card(spec) if spec.base is None else np.asarray(spec.base, dtype=float)
    if base.shape != (spec.height, spec.width):
        raise ConfigError(f"base image shape {base.shape} does not match {spec.height}x{spec.width}")
    if not (np.all(base > 0) and base.max() * spec.contrast <= 1):
        raise ConfigError("base image must lie in (0, 1/contrast]")
    n = spec.n_frames
    gains = np.array([flicker_gain(spec, k / spec.fps) for k in range(n)])
    frames = base[None, :, :] * gains[:, None, None]
    _check_range(frames, "flicker")
    return FrameSequence(frames, frame_timestamps_us(n, spec.fps))

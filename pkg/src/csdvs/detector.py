"""Change detector: thresholds with mismatch, memorized reference, events.

Within a frame interval the difference signal is taken to move linearly
from its previous value to the new one.  In ``ladder`` mode every crossing
of ``ref + theta_on`` (``ref - theta_off``) emits an ON (OFF) event and
moves ``ref`` by exactly one threshold, so a large change produces several
events at their interpolated crossing times.  ``snapshot`` mode emits at
most one event per pixel and interval and resets ``ref`` to the new value.
Crossings use a strict ``>``: landing exactly on the threshold is not an
event.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from csdvs.config import RESET_MODES
from csdvs.errors import ConfigError, DataError
from csdvs.videoio import EVENT_DTYPE, OFF, ON, sort_events


@dataclass
class ThresholdMap:
    on: np.ndarray
    off: np.ndarray
    nominal: float
    sigma: float
    seed: int

    @classmethod
    def sample(cls, shape, theta, sigma, seed):
        """Per-pixel thresholds ~ Normal(theta, sigma), truncated below at theta/4."""
        if not theta > 0:
            raise ConfigError(f"threshold must be positive, got {theta}")
        if not sigma >= 0:
            raise ConfigError(f"threshold sigma must be >= 0, got {sigma}")
        rng = np.random.default_rng(seed)
        on = _truncated_normal(rng, theta, sigma, shape)
        off = _truncated_normal(rng, theta, sigma, shape)
        return cls(on, off, float(theta), float(sigma), int(seed))

    @classmethod
    def uniform(cls, shape, theta_on, theta_off=None):
        theta_off = theta_on if theta_off is None else theta_off
        return cls(np.full(shape, float(theta_on)), np.full(shape, float(theta_off)),
                   float(theta_on), 0.0, 0)


def _truncated_normal(rng, mean, sigma, shape):
    x = rng.normal(mean, sigma, shape) if sigma > 0 else np.full(shape, float(mean))
    floor = mean / 4.0
    bad = x < floor
    while bad.any():
        x[bad] = rng.normal(mean, sigma, int(bad.sum()))
        bad = x < floor
    return x


@dataclass
class DetectorState:
    ref: np.ndarray
    prev_diff: np.ndarray
    prev_t: int


def detector_init(diff, t) -> DetectorState:
    """Memorize the first difference frame so the run starts without a burst."""
    diff = _checked(diff)
    return DetectorState(diff.copy(), diff.copy(), int(t))


def _checked(diff):
    diff = np.asarray(diff, dtype=float)
    if diff.ndim != 2:
        raise DataError(f"difference frame must be 2D, got shape {diff.shape}")
    if not np.all(np.isfinite(diff)):
        y, x = np.argwhere(~np.isfinite(diff))[0]
        raise DataError(f"non-finite difference value at pixel (x={x}, y={y})")
    return diff


def _crossings(ref, d0, d1, th, t0, t1, sign, snapshot):
    """Emit crossings for one polarity; ``ref`` (flat) is updated in place.

    Returns ``(flat_index, t_us)`` arrays in emission order.
    """
    span = d1 - d0
    dt = float(t1 - t0)
    pending = np.flatnonzero(sign * (d1 - ref) > th)
    idx_out, t_out = [], []
    while pending.size:
        level = ref[pending] + sign * th[pending]
        s = span[pending]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(s != 0, (level - d0[pending]) / s, 1.0)
        t_ev = np.floor(t0 + np.clip(frac, 0.0, 1.0) * dt).astype(np.int64)
        idx_out.append(pending)
        t_out.append(t_ev)
        if snapshot:
            ref[pending] = d1[pending]
            break
        ref[pending] = level
        pending = pending[sign * (d1[pending] - ref[pending]) > th[pending]]
    if not idx_out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(idx_out), np.concatenate(t_out)


def _detect_block(ref, d0, d1, th_on, th_off, t0, t1, row0, snapshot):
    w = ref.shape[1]
    ref_f = ref.reshape(-1)  # rows of a C-contiguous array: a view
    parts = []
    for sign, th, pol in ((1.0, th_on, ON), (-1.0, th_off, OFF)):
        idx, ts = _crossings(ref_f, d0.reshape(-1), d1.reshape(-1), th.reshape(-1),
                             t0, t1, sign, snapshot)
        ev = np.empty(len(idx), dtype=EVENT_DTYPE)
        ev["t"] = ts
        ev["x"] = idx % w
        ev["y"] = idx // w + row0
        ev["p"] = pol
        parts.append(ev)
    return np.concatenate(parts)


def detect_frame(state: DetectorState, diff, t, thresholds: ThresholdMap,
                 reset_mode="ladder", workers=1):
    """Process one frame interval ``(state.prev_t, t]``.

    Returns ``(new_state, events)`` with events sorted by
    ``(t, y, x, polarity)``.  ``workers`` splits rows across threads; the
    output does not depend on it.
    """
    if reset_mode not in RESET_MODES:
        raise ConfigError(f"reset_mode must be one of {RESET_MODES}, got {reset_mode!r}")
    diff = _checked(diff)
    t = int(t)
    if t <= state.prev_t:
        raise ConfigError(f"frame time {t} us is not after previous frame time {state.prev_t} us")
    if diff.shape != state.ref.shape:
        raise DataError(f"frame shape {diff.shape} does not match detector shape {state.ref.shape}")
    ref = np.ascontiguousarray(state.ref, dtype=float).copy()
    d0 = np.ascontiguousarray(state.prev_diff)
    d1 = np.ascontiguousarray(diff)
    on = np.ascontiguousarray(thresholds.on)
    off = np.ascontiguousarray(thresholds.off)
    snapshot = reset_mode == "snapshot"
    h = ref.shape[0]
    workers = max(1, min(int(workers), h))
    bounds = np.linspace(0, h, workers + 1).astype(int)
    jobs = [(ref[a:b], d0[a:b], d1[a:b], on[a:b], off[a:b], state.prev_t, t, a, snapshot)
            for a, b in zip(bounds[:-1], bounds[1:])]
    if workers == 1:
        parts = [_detect_block(*jobs[0])]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _detect_block(*job), jobs))
    events = sort_events(np.concatenate(parts))
    return DetectorState(ref, d1.copy(), t), events

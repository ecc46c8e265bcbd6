"""Frames -> log -> photoreceptor -> (surround) -> change detector -> events."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from csdvs.config import SimConfig, worker_count
from csdvs.detector import ThresholdMap, detect_frame, detector_init
from csdvs.errors import ConfigError
from csdvs.photoreceptor import pr_init, pr_step
from csdvs.surround import (MeshParams, SolveInfo, SurroundState, solve_steady_state,
                            step_transient, surround_init)
from csdvs.videoio import EVENT_DTYPE, EventStream, FrameSequence, log_transform, sort_events

logger = logging.getLogger(__name__)


@dataclass
class SimResult:
    stream: EventStream
    mode: str
    frame_times_us: np.ndarray
    per_frame_counts: np.ndarray
    solver_iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    solver_seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))


def run_pipeline(frames: FrameSequence, config: SimConfig, mode=None, workers=None) -> SimResult:
    """Simulate one sensor (``dvs`` or ``csdvs``) on a frame sequence."""
    log_frames = [log_transform(f) for f in frames.frames]
    return simulate_log(log_frames, frames.timestamps_us, config, mode=mode, workers=workers,
                        shape=(frames.height, frames.width))


def simulate_log(log_frames, timestamps_us, config: SimConfig, mode=None, workers=None, shape=None):
    """Same as :func:`run_pipeline` but starting from log-intensity frames."""
    mode = mode or config.mode
    if mode not in ("dvs", "csdvs"):
        raise ConfigError(f"a single run needs mode dvs or csdvs, got {mode!r}")
    workers = worker_count() if workers is None else workers
    ts = np.asarray(timestamps_us, dtype=np.int64)
    n = len(ts)
    if n == 0:
        h, w = shape if shape is not None else (0, 0)
        return SimResult(EventStream(np.zeros(0, EVENT_DTYPE), w, h, 0), mode, ts, np.zeros(0, np.int64))

    first = np.asarray(log_frames[0], dtype=float)
    h, w = first.shape
    thresholds = ThresholdMap.sample((h, w), config.theta, config.theta_sigma, config.seed)
    pr = pr_init(first, config.pr_cutoff_hz, bypass=config.pr_cutoff_hz == 0)

    sur = None
    iters = np.zeros(n, dtype=np.int64)
    secs = np.zeros(n)
    if mode == "csdvs":
        params = MeshParams(config.L, tau=config.tau_us * 1e-6)
        sur = surround_init(pr.v_p, params, tol=config.solver_tol)
        iters[0], secs[0] = sur.last_solve.iterations, sur.last_solve.seconds
        diff = pr.v_p - sur.v_h
    else:
        diff = pr.v_p
    det = detector_init(diff, ts[0])

    counts = np.zeros(n, dtype=np.int64)
    chunks = []
    for k in range(1, n):
        dt = (ts[k] - ts[k - 1]) * 1e-6
        pr = pr_step(pr, log_frames[k], dt)
        if sur is not None:
            if sur.params.quasi_static:
                info = SolveInfo()
                v_h = solve_steady_state(pr.v_p, sur.params, tol=config.solver_tol, x0=sur.v_h, info=info)
                sur = SurroundState(v_h, sur.params, info)
            else:
                sur = step_transient(sur, pr.v_p, dt, tol=config.solver_tol)
            iters[k], secs[k] = sur.last_solve.iterations, sur.last_solve.seconds
            diff = pr.v_p - sur.v_h
        else:
            diff = pr.v_p
        det, ev = detect_frame(det, diff, ts[k], thresholds, config.reset_mode, workers)
        counts[k] = len(ev)
        chunks.append(ev)

    events = sort_events(np.concatenate(chunks)) if chunks else np.zeros(0, EVENT_DTYPE)
    stream = EventStream(events, w, h, int(ts[-1] - ts[0]))
    if mode == "csdvs":
        logger.info("surround solves: mean %.1f iterations, %.3f s total", iters[1:].mean() if n > 1 else 0.0,
                    secs.sum())
    return SimResult(stream, mode, ts, counts, iters, secs)

"""First-order logarithmic photoreceptor (V_p+)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from csdvs.errors import ConfigError, DataError


@dataclass
class PhotoreceptorState:
    v_p: np.ndarray
    cutoff_hz: float
    bypass: bool = False

    @property
    def tau(self) -> float:
        """Time constant ``1/(2 pi f_3dB)`` in seconds."""
        return 1.0 / (2.0 * math.pi * self.cutoff_hz)


def pr_init(first_log_frame, cutoff_hz, bypass=False) -> PhotoreceptorState:
    """Start at steady state with the first log frame.

    ``bypass=True`` makes every step pass its input straight through;
    ``cutoff_hz`` is then ignored.
    """
    v = np.array(first_log_frame, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("non-finite value in the first log frame")
    if not bypass and not (cutoff_hz > 0 and math.isfinite(cutoff_hz)):
        raise ConfigError(f"cutoff must be positive and finite (use bypass instead), got {cutoff_hz}")
    return PhotoreceptorState(v, float(cutoff_hz), bypass)


def pr_step(state: PhotoreceptorState, log_frame, dt) -> PhotoreceptorState:
    """Advance by ``dt`` seconds toward ``log_frame``.

    Exact update for an input held over the step, so any ``dt`` is stable.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    x = np.asarray(log_frame, dtype=float)
    if state.bypass:
        return PhotoreceptorState(x.copy(), state.cutoff_hz, True)
    # x + (v - x) e^(-dt/tau) rather than v + (1 - e^(-dt/tau)) (x - v): the
    # rounded result then never lands on the far side of the target
    decay = math.exp(-dt / state.tau)
    return PhotoreceptorState(x + (state.v_p - x) * decay, state.cutoff_hz)

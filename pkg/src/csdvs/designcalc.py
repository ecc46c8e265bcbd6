"""Surround hardware feasibility: conductance, bias current, time constant.

    G   = 1 / (R L^2)          space constant law inverted
    I_G = U_T G                subthreshold transconductance
    tau = C / G  (= R C L^2)
    f   = 1 / (2 pi tau)

The relations are order-of-magnitude design rules; they are evaluated here
as exact equalities so results are reproducible.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass

from csdvs.errors import ConfigError

THERMAL_VOLTAGE = 0.025
MAX_SWEEP_POINTS = 10 ** 6

COLUMNS = ("R", "C", "L", "U_T", "n_pixels", "G", "I_G", "tau", "f_3dB", "array_bias")


@dataclass(frozen=True)
class DesignPoint:
    R: float
    C: float
    L: float
    U_T: float = THERMAL_VOLTAGE

    def __post_init__(self):
        for name in ("R", "C", "L", "U_T"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class DesignResult:
    G: float
    I_G: float
    tau: float
    f_3dB: float
    array_bias: float
    n_pixels: int


def evaluate(point: DesignPoint, n_pixels=1) -> DesignResult:
    if int(n_pixels) != n_pixels or n_pixels < 1:
        raise ConfigError(f"n_pixels must be a positive integer, got {n_pixels}")
    G = 1.0 / (point.R * point.L ** 2)
    I_G = point.U_T * G
    tau = point.C / G
    return DesignResult(G, I_G, tau, 1.0 / (2.0 * math.pi * tau), n_pixels * I_G, int(n_pixels))


def space_constant_from_bias(R, I_G, U_T=THERMAL_VOLTAGE):
    """``L = sqrt(U_T / (R I_G))``."""
    return math.sqrt(U_T / (R * I_G))


def parse_range(text):
    """``a``, ``a,b,c`` or inclusive ``start:step:stop``."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(s) for s in text.split(":"))
            if not step > 0 or stop < start:
                raise ConfigError(f"bad range {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            if n > MAX_SWEEP_POINTS:
                raise ConfigError(f"range {text!r} has {n} points (max {MAX_SWEEP_POINTS})")
            return [start + i * step for i in range(n)]
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}") from None


def sweep(R, C, L, n_pixels=(1,), U_T=THERMAL_VOLTAGE):
    """Evaluate every combination of the given values.

    Returns a list of ``(DesignPoint, DesignResult)`` in R, C, L, n_pixels
    nesting order.
    """
    axes = [list(R), list(C), list(L), list(n_pixels)]
    total = math.prod(len(a) for a in axes)
    if total == 0:
        raise ConfigError("empty sweep range")
    if total > MAX_SWEEP_POINTS:
        raise ConfigError(f"sweep has {total} points (max {MAX_SWEEP_POINTS})")
    return [(p := DesignPoint(r, c, l, U_T), evaluate(p, int(n)))
            for r, c, l, n in itertools.product(*axes)]


def sweep_csv(rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for point, res in rows:
        d = {**asdict(point), **asdict(res)}
        wr.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in COLUMNS])
    return buf.getvalue()


def format_result(point: DesignPoint, res: DesignResult):
    """Aligned key/value listing of one design point."""
    items = [("R", point.R, "ohm"), ("C", point.C, "F"), ("L", point.L, "px"), ("U_T", point.U_T, "V"),
             ("G", res.G, "S"), ("I_G", res.I_G, "A"), ("tau", res.tau, "s"), ("f_3dB", res.f_3dB, "Hz"),
             ("n_pixels", res.n_pixels, ""), ("array_bias", res.array_bias, "A")]
    return "".join(f"{k:<11s}= {v:.6g} {unit}".rstrip() + "\n" for k, v, unit in items)

"""Event statistics, region masks and DVS-vs-CSDVS comparison reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from csdvs.errors import ConfigError
from csdvs.stimgen import StimulusSpec, bump_centers, periodic_offset, spot_distance
from csdvs.videoio import ON, EventStream


@dataclass
class RegionMask:
    name: str
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if not self.mask.any():
            raise ConfigError(f"region {self.name!r} is empty")

    def contains(self, events):
        return self.mask[events["y"], events["x"]]


# a region is a static mask or a per-event selector (e.g. moving bumps)
Region = RegionMask | Callable


@dataclass
class RunStats:
    total: int
    on: int
    off: int
    duration_us: int
    mean_rate_hz: float
    per_frame_counts: np.ndarray
    per_pixel_count: np.ndarray
    per_region: dict = field(default_factory=dict)


def _rate(total, duration_us):
    return total / (duration_us * 1e-6) if duration_us > 0 else 0.0


def _frame_bins(t, frame_times_us):
    # event at t belongs to the interval [t_{k-1}, t_k) ending at frame k
    return np.searchsorted(np.asarray(frame_times_us, dtype=np.int64), t.astype(np.int64), side="right")


def _region_counts(events, regions):
    out = {}
    for name, reg in (regions or {}).items():
        sel = reg.contains(events) if isinstance(reg, RegionMask) else reg(events)
        out[name] = int(np.count_nonzero(sel))
    return out


def compute_stats(stream: EventStream, frame_times_us=None, regions: Mapping[str, Region] | None = None):
    """Exact event counts of ``stream``.

    Without ``frame_times_us`` all events land in a single frame bin.
    """
    ev = stream.events
    on = int(np.count_nonzero(ev["p"] == ON))
    per_pixel = np.zeros((stream.height, stream.width), dtype=np.int64)
    np.add.at(per_pixel, (ev["y"], ev["x"]), 1)
    if frame_times_us is None:
        per_frame = np.array([len(ev)], dtype=np.int64)
    else:
        n = len(frame_times_us)
        per_frame = np.bincount(np.minimum(_frame_bins(ev["t"], frame_times_us), max(n - 1, 0)),
                                minlength=n).astype(np.int64)
    return RunStats(len(ev), on, len(ev) - on, stream.duration_us, _rate(len(ev), stream.duration_us),
                    per_frame, per_pixel, _region_counts(ev, regions))


class StatsAccumulator:
    """Streaming version of :func:`compute_stats` fed with event chunks."""

    def __init__(self, width, height, duration_us, frame_times_us=None, regions=None):
        self.width, self.height, self.duration_us = width, height, duration_us
        self.frame_times_us = frame_times_us
        self.regions = regions or {}
        self.on = self.off = 0
        self.per_pixel = np.zeros((height, width), dtype=np.int64)
        n = 1 if frame_times_us is None else len(frame_times_us)
        self.per_frame = np.zeros(n, dtype=np.int64)
        self.per_region = {name: 0 for name in self.regions}

    def update(self, events):
        n_on = int(np.count_nonzero(events["p"] == ON))
        self.on += n_on
        self.off += len(events) - n_on
        np.add.at(self.per_pixel, (events["y"], events["x"]), 1)
        if self.frame_times_us is None:
            self.per_frame[0] += len(events)
        else:
            bins = np.minimum(_frame_bins(events["t"], self.frame_times_us), len(self.per_frame) - 1)
            self.per_frame += np.bincount(bins, minlength=len(self.per_frame))
        for name, c in _region_counts(events, self.regions).items():
            self.per_region[name] += c

    def result(self):
        total = self.on + self.off
        return RunStats(total, self.on, self.off, self.duration_us, _rate(total, self.duration_us),
                        self.per_frame.copy(), self.per_pixel.copy(), dict(self.per_region))


def _ratio(a, b):
    if a == 0:
        return 1.0 if b == 0 else math.inf
    return b / a


@dataclass
class ComparisonReport:
    total_a: int
    total_b: int
    ratio: float
    regions: dict  # name -> {"a": count, "b": count, "ratio": b/a}

    @property
    def reduction(self):
        return 1.0 - self.ratio

    def to_dict(self):
        def num(x):
            return None if not math.isfinite(x) else sig6(x)
        return {
            "total_a": self.total_a,
            "total_b": self.total_b,
            "ratio": num(self.ratio),
            "reduction": num(self.reduction),
            "regions": {k: {"a": v["a"], "b": v["b"], "ratio": num(v["ratio"])}
                        for k, v in sorted(self.regions.items())},
        }

    def to_text(self):
        lines = [f"total    a={self.total_a:>10d}  b={self.total_b:>10d}  b/a={self.ratio:.6g}"
                 f"  reduction={self.reduction:.2%}"]
        for name, v in sorted(self.regions.items()):
            lines.append(f"{name:<8s} a={v['a']:>10d}  b={v['b']:>10d}  b/a={v['ratio']:.6g}")
        return "\n".join(lines) + "\n"


def compare_runs(a: RunStats, b: RunStats, masks=()):
    """Ratio ``b/a`` overall and per region.

    ``masks`` are static :class:`RegionMask` objects evaluated on the
    per-pixel counts; region counts already present in both runs'
    ``per_region`` are included as well.
    """
    if a.per_pixel_count.shape != b.per_pixel_count.shape:
        raise ConfigError(f"sensor geometry differs: {a.per_pixel_count.shape} vs {b.per_pixel_count.shape}")
    regions = {}
    for name in sorted(set(a.per_region) & set(b.per_region)):
        ca, cb = a.per_region[name], b.per_region[name]
        regions[name] = {"a": ca, "b": cb, "ratio": _ratio(ca, cb)}
    for m in masks:
        if m.mask.shape != a.per_pixel_count.shape:
            raise ConfigError(f"mask {m.name!r} has shape {m.mask.shape}, sensor is {a.per_pixel_count.shape}")
        ca, cb = int(a.per_pixel_count[m.mask].sum()), int(b.per_pixel_count[m.mask].sum())
        regions[m.name] = {"a": ca, "b": cb, "ratio": _ratio(ca, cb)}
    return ComparisonReport(a.total, b.total, _ratio(a.total, b.total), regions)


def edge_localization(stream: EventStream, edge_mask: RegionMask):
    """Fraction of events inside ``edge_mask`` (NaN for an empty stream)."""
    if len(stream.events) == 0:
        return math.nan
    return float(np.count_nonzero(edge_mask.contains(stream.events))) / len(stream.events)


# --------------------------------------------------------------------------
# regions for the built-in stimuli


def edge_annulus(spec: StimulusSpec, half_width, name="edge"):
    """Pixels within ``half_width`` of the spot edge radius."""
    return RegionMask(name, np.abs(spot_distance(spec) - spec.spot_radius) <= half_width)


def spot_regions(spec: StimulusSpec, L):
    """Edge annulus of width 2L, spot interior and background.

    The interior is the part of the spot inside the annulus and the
    background everything outside it.  ``edge_wide`` is the wider
    ``+/- 2L`` annulus and overlaps the other three.  Regions that come
    out empty for the given geometry are left out.
    """
    r = spot_distance(spec)
    R = spec.spot_radius
    masks = {
        "edge": np.abs(r - R) <= L,
        "edge_wide": np.abs(r - R) <= 2 * L,
        "interior": r < R - L,
        "background": r > R + L,
    }
    return {name: RegionMask(name, m) for name, m in masks.items() if m.any()}


def flicker_regions(spec: StimulusSpec, L, margin=None):
    """Textured half and the uniform half minus a ``margin`` (default 2L) band."""
    m = 2 * L if margin is None else margin
    xx = np.broadcast_to(np.arange(spec.width), (spec.height, spec.width))
    half = spec.width // 2
    return {
        "textured": RegionMask("textured", xx < half),
        "uniform": RegionMask("uniform", xx >= half + m),
    }


def bump_selectors(spec: StimulusSpec):
    """Per-event attribution to the nearer (periodic) bump at event time."""

    def nearest(events):
        t = events["t"].astype(float) * 1e-6
        ca, cb = bump_centers(spec, t)
        x = events["x"].astype(float)
        da = np.abs(periodic_offset(x, ca, spec.width))
        db = np.abs(periodic_offset(x, cb, spec.width))
        return da <= db

    return {"gradual": nearest, "sharp": lambda ev: ~nearest(ev)}


def scenario_regions(spec: StimulusSpec, L):
    if spec.kind == "flashing_spot":
        return spot_regions(spec, L)
    if spec.kind == "flicker":
        return flicker_regions(spec, L)
    return bump_selectors(spec)


# --------------------------------------------------------------------------
# stats.json


def sig6(x):
    return float(f"{x:.6g}")


def stats_document(stats: RunStats, mode, params):
    return {
        "mode": mode,
        "total": stats.total,
        "on": stats.on,
        "off": stats.off,
        "duration_us": int(stats.duration_us),
        "mean_rate_hz": sig6(stats.mean_rate_hz),
        "per_region": {k: int(v) for k, v in sorted(stats.per_region.items())},
        "params": params,
    }


def write_stats(path, stats: RunStats, mode, params):
    with open(path, "w") as fh:
        json.dump(stats_document(stats, mode, params), fh, indent=2, sort_keys=True)
        fh.write("\n")

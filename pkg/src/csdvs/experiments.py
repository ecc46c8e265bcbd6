"""Paired DVS / CSDVS runs on identical input."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from csdvs.analysis import ComparisonReport, RunStats, compare_runs, compute_stats, scenario_regions
from csdvs.config import SimConfig, worker_count
from csdvs.pipeline import SimResult, run_pipeline
from csdvs.stimgen import StimulusSpec, generate
from csdvs.videoio import FrameSequence


@dataclass
class Comparison:
    dvs: SimResult
    csdvs: SimResult
    dvs_stats: RunStats
    csdvs_stats: RunStats
    report: ComparisonReport


def compare_modes(frames: FrameSequence, config: SimConfig, regions=None, workers=None) -> Comparison:
    """Run both sensors with the same seed; with 2+ workers they run concurrently."""
    workers = worker_count() if workers is None else workers
    modes = ("dvs", "csdvs")
    if workers >= 2:
        per_run = max(1, workers // 2)
        with ThreadPoolExecutor(2) as pool:
            results = list(pool.map(lambda m: run_pipeline(frames, config, mode=m, workers=per_run), modes))
    else:
        results = [run_pipeline(frames, config, mode=m, workers=1) for m in modes]
    stats = [compute_stats(r.stream, r.frame_times_us, regions) for r in results]
    return Comparison(results[0], results[1], stats[0], stats[1], compare_runs(stats[0], stats[1]))


def run_scenario(spec: StimulusSpec, config: SimConfig | None = None, workers=None) -> Comparison:
    """Generate a built-in stimulus and compare both sensors on it."""
    config = config or SimConfig()
    frames = generate(spec)
    return compare_modes(frames, config, scenario_regions(spec, config.L), workers=workers)

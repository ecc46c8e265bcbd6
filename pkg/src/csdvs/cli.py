"""Command line: ``csdvs gen | simulate | render | design | compare``.

Exit codes: 0 success, 1 unexpected failure, 2 bad configuration or data,
3 file I/O or format error, 4 surround solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from csdvs import analysis, designcalc
from csdvs.config import MODES, RESET_MODES, SimConfig, format_config, load_config_file, worker_count
from csdvs.errors import ConfigError, CSDVSError, FormatError
from csdvs.experiments import compare_modes
from csdvs.pipeline import run_pipeline
from csdvs.stimgen import KINDS, WAVEFORMS, StimulusSpec, generate
from csdvs.videoio import load_frames, read_events, render_accumulation, save_frames, write_events

logger = logging.getLogger("csdvs")

STIMULUS_FILE = "stimulus.json"
PARAMS_FILE = "params.txt"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3, 4


def _emit(text, quiet=False):
    if not quiet:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# gen


def cmd_gen(args):
    widths = None
    if args.widths is not None:
        try:
            widths = tuple(float(s) for s in args.widths.split(","))
        except ValueError:
            raise ConfigError(f"--widths expects two numbers, got {args.widths!r}") from None
        if len(widths) != 2:
            raise ConfigError(f"--widths expects two numbers, got {args.widths!r}")
    size = args.size
    spec = StimulusSpec.for_kind(
        args.kind,
        width=args.width if args.width is not None else size,
        height=args.height if args.height is not None else size,
        fps=args.fps, duration=args.duration, contrast=args.contrast, gray=args.gray,
        spot_radius=args.radius, antialias=args.antialias or None,
        bump_widths=widths, speed=args.speed,
        flicker_hz=args.freq, waveform=args.waveform,
    )
    frames = generate(spec)
    out = Path(args.out)
    save_frames(frames, out)
    (out / STIMULUS_FILE).write_text(spec.to_json() + "\n")
    sys.stdout.write(f"{len(frames)}\n")
    logger.info("wrote %d %dx%d frames to %s", len(frames), spec.width, spec.height, out)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate

_SIM_FLAGS = {
    "mode": "mode", "L": "L", "tau_us": "tau_us", "theta": "theta", "theta_sigma": "theta_sigma",
    "pr_cutoff_hz": "pr_cutoff_hz", "seed": "seed", "solver_tol": "solver_tol",
    "reset_mode": "reset_mode", "input": "input", "fps": "fps", "out": "output", "format": "event_format",
}


def build_config(args):
    """Defaults, then the ``--config`` file, then explicit flags."""
    values = SimConfig().to_dict()
    if args.config:
        values.update(load_config_file(args.config))
    for flag, key in _SIM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return SimConfig.from_dict(values)


def load_stimulus_spec(frame_dir):
    path = Path(frame_dir) / STIMULUS_FILE
    if not path.is_file():
        return None
    try:
        return StimulusSpec.from_dict(json.loads(path.read_text()))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _regions_for(cfg, frames):
    if cfg.input is None or not Path(cfg.input).is_dir():
        return {}
    spec = load_stimulus_spec(cfg.input)
    if spec is None or (spec.height, spec.width) != (frames.height, frames.width):
        return {}
    return analysis.scenario_regions(spec, cfg.L)


def cmd_simulate(args):
    cfg = build_config(args)
    if cfg.input is None:
        raise ConfigError("no input: pass --input or set input in the config file")
    if cfg.output is None:
        raise ConfigError("no output directory: pass --out or set output in the config file")
    frames = load_frames(cfg.input, cfg.fps)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    regions = _regions_for(cfg, frames)
    workers = worker_count()
    # the output location is not part of the run's identity
    params = {k: v for k, v in cfg.to_dict().items() if k != "output"}
    (out / PARAMS_FILE).write_text(format_config(cfg))

    summary = {"params": params, "runs": {}}
    if cfg.mode == "both":
        cmp = compare_modes(frames, cfg, regions, workers=workers)
        runs = [(cmp.dvs, cmp.dvs_stats), (cmp.csdvs, cmp.csdvs_stats)]
    else:
        res = run_pipeline(frames, cfg, mode=cfg.mode, workers=workers)
        runs = [(res, analysis.compute_stats(res.stream, res.frame_times_us, regions))]
        cmp = None
    for res, stats in runs:
        write_events(res.stream, out / f"{res.mode}.{cfg.event_format}", cfg.event_format)
        analysis.write_stats(out / f"stats_{res.mode}.json", stats, res.mode, params)
        summary["runs"][res.mode] = analysis.stats_document(stats, res.mode, None)
        summary["runs"][res.mode].pop("params")
    if cmp is not None:
        _dump_json(cmp.report.to_dict(), out / "comparison.json")
        (out / "comparison.txt").write_text(cmp.report.to_text())
        summary["comparison"] = cmp.report.to_dict()

    if args.quiet:
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        for mode, doc in summary["runs"].items():
            _emit(f"{mode:<6s} events={doc['total']} on={doc['on']} off={doc['off']}")
        if cmp is not None:
            _emit(cmp.report.to_text())
        _emit(f"outputs in {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# render / compare


def cmd_render(args):
    stream = read_events(args.events, args.width, args.height)
    if stream.width == 0 or stream.height == 0:
        raise ConfigError(f"{args.events}: sensor size unknown; pass --width and --height")
    if args.duration_us is not None:
        stream.duration_us = max(stream.duration_us, int(args.duration_us))
    paths = render_accumulation(stream, args.window_us, args.out)
    _emit(f"{len(paths)}")
    return EXIT_OK


def cmd_compare(args):
    a = read_events(args.a, args.width, args.height)
    b = read_events(args.b, args.width, args.height)
    # CSV files only bound the geometry from below; use the larger of the two
    a.width = b.width = max(a.width, b.width)
    a.height = b.height = max(a.height, b.height)
    regions = {}
    spec = None
    if args.stimulus:
        p = Path(args.stimulus)
        spec = load_stimulus_spec(p if p.is_dir() else p.parent)
    if spec is not None:
        a.width, a.height = b.width, b.height = spec.width, spec.height
        regions = analysis.scenario_regions(spec, args.L)
    sa = analysis.compute_stats(a, regions=regions)
    sb = analysis.compute_stats(b, regions=regions)
    report = analysis.compare_runs(sa, sb)
    if args.out:
        _dump_json(report.to_dict(), args.out)
    if args.quiet:
        sys.stdout.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
    else:
        _emit(report.to_text())
    return EXIT_OK


# --------------------------------------------------------------------------
# design


def _parse_sweeps(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--sweep expects NAME=RANGE, got {item!r}")
        name, rng = item.split("=", 1)
        name = name.strip()
        if name not in ("R", "C", "L", "n_pixels"):
            raise ConfigError(f"cannot sweep {name!r}; choose R, C, L or n_pixels")
        out[name] = designcalc.parse_range(rng)
    return out


def cmd_design(args):
    axes = {"R": designcalc.parse_range(args.R), "C": designcalc.parse_range(args.C),
            "L": designcalc.parse_range(args.L), "n_pixels": designcalc.parse_range(args.n_pixels)}
    axes.update(_parse_sweeps(args.sweep))
    rows = designcalc.sweep(axes["R"], axes["C"], axes["L"], axes["n_pixels"], U_T=args.U_T)
    if len(rows) == 1 and not args.sweep and not args.csv:
        sys.stdout.write(designcalc.format_result(*rows[0]))
    else:
        sys.stdout.write(designcalc.sweep_csv(rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="csdvs", description="Center-surround event camera simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic stimulus video")
    g.add_argument("--kind", required=True, choices=[k.replace("_", "-") for k in KINDS] + list(KINDS))
    g.add_argument("--out", required=True, help="output frame directory")
    g.add_argument("--size", type=int, help="square frame size")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--fps", type=float)
    g.add_argument("--duration", type=float, help="seconds")
    g.add_argument("--contrast", type=float)
    g.add_argument("--gray", type=float)
    g.add_argument("--radius", type=float, help="flashing spot radius, px")
    g.add_argument("--antialias", action="store_true", help="anti-aliased spot edge")
    g.add_argument("--widths", help="gradient bump widths GRADUAL,SHARP in px")
    g.add_argument("--speed", type=float, help="gradient drift, px/s")
    g.add_argument("--freq", type=float, help="flicker frequency, Hz")
    g.add_argument("--waveform", choices=WAVEFORMS)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="run DVS and/or CSDVS on a frame video")
    s.add_argument("--config", help="key = value config file; flags override it")
    s.add_argument("--input", help="frame directory or multi-image PGM file")
    s.add_argument("--fps", type=float)
    s.add_argument("--out", help="output directory")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--L", type=float, help="surround space constant, px")
    s.add_argument("--tau-us", dest="tau_us", type=float, help="surround time constant (0 = quasi-static)")
    s.add_argument("--theta", type=float)
    s.add_argument("--theta-sigma", dest="theta_sigma", type=float)
    s.add_argument("--pr-cutoff-hz", dest="pr_cutoff_hz", type=float, help="0 bypasses the photoreceptor")
    s.add_argument("--seed", type=int)
    s.add_argument("--solver-tol", dest="solver_tol", type=float)
    s.add_argument("--reset-mode", dest="reset_mode", choices=RESET_MODES)
    s.add_argument("--format", choices=("csv", "bin"))
    s.add_argument("--quiet", action="store_true", help="only a JSON summary on stdout")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("render", help="accumulate events into PGM frames")
    r.add_argument("--events", required=True)
    r.add_argument("--window-us", dest="window_us", type=int, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--duration-us", dest="duration_us", type=int, help="render at least this span")
    r.set_defaults(func=cmd_render)

    d = sub.add_parser("design", help="surround bias and time-constant calculator")
    d.add_argument("--R", default="100e3", help="lateral resistance, ohm")
    d.add_argument("--C", default="1e-12", help="node capacitance, F")
    d.add_argument("--L", default="10", help="space constant, px")
    d.add_argument("--U_T", "--ut", dest="U_T", type=float, default=designcalc.THERMAL_VOLTAGE)
    d.add_argument("--n-pixels", dest="n_pixels", default="1")
    d.add_argument("--sweep", action="append", help="NAME=start:step:stop or NAME=a,b,c (CSV output)")
    d.add_argument("--csv", action="store_true", help="CSV even for a single point")
    d.set_defaults(func=cmd_design)

    c = sub.add_parser("compare", help="compare two event files")
    c.add_argument("a", help="reference events (e.g. dvs.csv)")
    c.add_argument("b", help="events to compare (e.g. csdvs.csv)")
    c.add_argument("--stimulus", help="stimulus.json (or its directory) for region breakdown")
    c.add_argument("--L", type=float, default=10.0)
    c.add_argument("--width", type=int)
    c.add_argument("--height", type=int)
    c.add_argument("--out", help="write the report as JSON")
    c.add_argument("--quiet", action="store_true")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    level = logging.DEBUG if args.verbose else (logging.WARNING if quiet else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CSDVSError as exc:
        print(f"csdvs: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"csdvs: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``slicetrack <command> ...``.

Exit codes: 0 success, 1 I/O or parse failure, 2 invalid arguments or
domain error, 3 frame-rate adequacy check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .core import (
    ParseError,
    TrackerConfig,
    read_detections,
    read_trajectories,
    read_truth,
    write_detections,
    write_trajectories,
    write_truth,
)
from .evaluation import evaluate
from .imaging import (
    DEFAULT_CONNECTIVITY,
    DEFAULT_MIN_AREA,
    DEFAULT_THRESHOLD,
    detect_stack,
    read_pgm,
    resolve_frame_pattern,
)
from .matching import FrameRateParams, events_to_jsonl, min_frames_per_second, track
from .simulate import generate, load_config

log = logging.getLogger("slicetrack")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INADEQUATE = 0, 1, 2, 3

AMBIGUITY = {"flag-only": "flag-only", "nn-resolve": "nearest-neighbor-resolve"}

# every default in one place; echoed into the manifest
DEFAULTS = {
    "threshold": DEFAULT_THRESHOLD,
    "connectivity": DEFAULT_CONNECTIVITY,
    "min_area": DEFAULT_MIN_AREA,
    "ambiguity": "nn-resolve",
    "fps": None,
    "radius": None,  # half the tracking threshold
}


class UsageError(Exception):
    pass


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="write the run manifest here instead of stderr")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="slicetrack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    d = add("detect", "PGM frame stack -> detections CSV")
    _add_detect_args(d)
    d.add_argument("--out", type=Path, required=True)

    t = add("track", "detections CSV -> trajectories CSV + occlusion events")
    t.add_argument("--detections", type=Path, required=True)
    _add_track_args(t)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--events", type=Path, help="occlusion events JSONL (default: <out>.events.jsonl)")

    s = add("simulate", "scenario JSON -> detections + ground truth CSVs")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--truth", type=Path, required=True)

    e = add("eval", "score trajectories against ground truth")
    e.add_argument("--trajectories", type=Path, required=True)
    e.add_argument("--truth", type=Path, required=True)
    e.add_argument("--radius", type=_positive, default=DEFAULTS["radius"],
                   help="match radius in pixels (default: half of --max-distance)")
    e.add_argument("--max-distance", type=_positive, help="tracking threshold T used for the run")
    e.add_argument("--out", type=Path, help="report JSON (default: stdout)")

    f = add("fps-check", "minimum frame rate for a speed-density relation")
    f.add_argument("--free-flow-speed", type=_real, required=True)
    f.add_argument("--gradient-b", type=_real, required=True)
    f.add_argument("--fps", type=_real, required=True)

    pl = add("pipeline", "detect + track (+ eval) in one go")
    _add_detect_args(pl)
    _add_track_args(pl)
    pl.add_argument("--out-dir", type=Path, required=True)
    pl.add_argument("--truth", type=Path, help="ground-truth CSV to score against")
    return p


def _add_detect_args(p):
    p.add_argument("--frames", required=True, help="printf-style pattern, e.g. f_%%04d.pgm")
    p.add_argument("--background", type=Path, required=True)
    p.add_argument("--threshold", type=int, default=DEFAULTS["threshold"])
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=DEFAULTS["connectivity"])
    p.add_argument("--min-area", type=int, default=DEFAULTS["min_area"])


def _add_track_args(p):
    p.add_argument("--max-distance", type=_real, required=True, help="threshold T in pixels")
    p.add_argument("--fps", type=_real, default=DEFAULTS["fps"])
    p.add_argument("--ambiguity", choices=sorted(AMBIGUITY), default=DEFAULTS["ambiguity"])


# -- commands ----------------------------------------------------------------


def _detect(args, manifest: dict):
    if not 0 <= args.threshold <= 255:
        raise UsageError(f"--threshold must lie in 0..255, got {args.threshold}")
    if args.min_area < 1:
        raise UsageError("--min-area must be >= 1")
    paths = resolve_frame_pattern(args.frames)
    if not paths:
        raise UsageError(f"no frames match {args.frames!r}")
    if not args.background.is_file():
        raise UsageError(f"background file not found: {args.background}")
    background = read_pgm(args.background)
    frames = [read_pgm(p) for p in paths]
    for p, f in zip(paths, frames):
        if f.pixels.shape != background.pixels.shape:
            raise UsageError(f"{p}: size differs from background")
    slices = detect_stack(frames, background, args.threshold, args.connectivity, args.min_area)
    manifest["parameters"].update(
        frames=args.frames, background=str(args.background), threshold=args.threshold,
        connectivity=args.connectivity, min_area=args.min_area,
    )
    manifest["inputs"] = [str(p) for p in paths]
    manifest["counts"].update(slices=len(slices), points=sum(len(s) for s in slices))
    return slices


def _tracker_config(args) -> TrackerConfig:
    if not args.max_distance > 0:
        raise UsageError(f"--max-distance must be > 0, got {args.max_distance}")
    if args.fps is not None and not args.fps > 0:
        raise UsageError(f"--fps must be > 0, got {args.fps}")
    return TrackerConfig(args.max_distance, args.fps, AMBIGUITY[args.ambiguity])


def _track(slices, config: TrackerConfig, out: Path, events_path: Path, manifest: dict):
    trajectories, events = track(slices, config)
    write_trajectories(trajectories, out)
    events_path.write_text(events_to_jsonl(events), encoding="utf-8")
    manifest["parameters"].update(
        max_distance=config.threshold, fps=config.fps, ambiguity=config.ambiguity_policy,
    )
    manifest["outputs"] += [str(out), str(events_path)]
    manifest["counts"].update(
        slices=len(slices),
        points=sum(len(s) for s in slices),
        trajectories=len(trajectories),
        occlusion_events=len(events),
    )
    return trajectories


def cmd_detect(args, manifest):
    slices = _detect(args, manifest)
    write_detections(slices, args.out)
    manifest["outputs"].append(str(args.out))
    return EXIT_OK


def cmd_track(args, manifest):
    config = _tracker_config(args)
    slices = read_detections(args.detections)
    manifest["inputs"] = [str(args.detections)]
    events = args.events or args.out.with_suffix(".events.jsonl")
    _track(slices, config, args.out, events, manifest)
    return EXIT_OK


def cmd_simulate(args, manifest):
    try:
        config = load_config(args.config)
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise UsageError(f"invalid config {args.config}: {exc}") from None
    detections, truth = generate(config)
    write_detections(detections, args.out)
    write_truth(truth, args.truth)
    manifest["parameters"].update(config.to_dict())
    manifest["inputs"] = [str(args.config)]
    manifest["outputs"] += [str(args.out), str(args.truth)]
    manifest["counts"].update(
        slices=len(detections),
        points=sum(len(s) for s in detections),
        objects=len(truth.ids()),
    )
    return EXIT_OK


def _report(trajectories, truth, radius, out, manifest):
    report = evaluate(trajectories, truth, radius)
    text = json.dumps(report.to_json(), indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
        manifest["outputs"].append(str(out))
    manifest["counts"].update(report.to_json())
    return report


def cmd_eval(args, manifest):
    trajectories = read_trajectories(args.trajectories)
    truth = read_truth(args.truth)
    if args.radius is not None:
        radius = args.radius
    elif args.max_distance is not None:
        radius = args.max_distance / 2
    else:
        raise UsageError("need --radius or --max-distance")
    manifest["parameters"]["radius"] = radius
    manifest["inputs"] = [str(args.trajectories), str(args.truth)]
    manifest["counts"].update(trajectories=len(trajectories), slices=len(truth))
    _report(trajectories, truth, radius, args.out, manifest)
    return EXIT_OK


def cmd_fps_check(args, manifest):
    params = FrameRateParams(args.free_flow_speed, args.gradient_b)
    try:
        minimum = min_frames_per_second(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    adequate = args.fps > minimum
    verdict = "adequate" if adequate else "inadequate"
    print(f"minimum fps: {minimum!r} (must be exceeded)")
    print(f"fps {args.fps!r}: {verdict}")
    manifest["parameters"].update(
        free_flow_speed=args.free_flow_speed, gradient_b=args.gradient_b, fps=args.fps
    )
    manifest["counts"].update(minimum_fps=minimum, adequate=adequate)
    return EXIT_OK if adequate else EXIT_INADEQUATE


def cmd_pipeline(args, manifest):
    config = _tracker_config(args)
    slices = _detect(args, manifest)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    det_path = args.out_dir / "detections.csv"
    write_detections(slices, det_path)
    manifest["outputs"].append(str(det_path))
    trajectories = _track(
        slices, config, args.out_dir / "trajectories.csv", args.out_dir / "events.jsonl", manifest
    )
    if args.truth is not None:
        truth = read_truth(args.truth)
        radius = config.threshold / 2
        manifest["parameters"]["radius"] = radius
        _report(trajectories, truth, radius, args.out_dir / "eval.json", manifest)
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "track": cmd_track,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "fps-check": cmd_fps_check,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    manifest = {
        "tool": "slicetrack",
        "version": __version__,
        "subcommand": args.command,
        "parameters": {},
        "inputs": [],
        "outputs": [],
        "counts": {},
    }
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        print(f"slicetrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"slicetrack {args.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"slicetrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    manifest["wall_time_s"] = time.perf_counter() - start
    log.info("%s finished in %.3f s", args.command, manifest["wall_time_s"])
    text = json.dumps(manifest, indent=2, default=str)
    if args.manifest is not None:
        args.manifest.write_text(text + "\n", encoding="utf-8")
    else:
        print(text, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

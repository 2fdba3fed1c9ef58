"""``tempfade`` command-line interface.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure,
3 a recipe check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import estimator as est
from . import io
from .config import RunConfig, load_run_config
from .errors import ConfigError, TempfadeError
from .ir import analyze_snapshots, simulate_snapshots
from .link import simulate_link
from .recipes import RECIPES, run_recipe

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (YAML)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed-override", type=int, metavar="N",
                        help="replace the scenario seed (bit/noise seeds become N+1, N+2)")
    common.add_argument("--frames-ms", type=float, metavar="F", help="frame length in ms")
    common.add_argument("--bins", type=int, metavar="B", help="histogram bins per frame")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = _Parser(prog="tempfade", description="Temporal fading simulator and analyser.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate a link and write an IQTF trace")
    a = sub.add_parser("analyze-envelope", parents=[common], help="fit the dynamic Rician track")
    a.add_argument("trace", type=Path)
    r = sub.add_parser("analyze-ir", parents=[common],
                       help="track and label impulse-response paths")
    r.add_argument("snapshots", type=Path, nargs="?",
                   help="snapshot CSV (time_s, delay_ns, power_db); default: simulate the scenario")
    rp = sub.add_parser("reproduce", parents=[common], help="run a canned recipe")
    rp.add_argument("--recipe", required=True, choices=sorted(RECIPES))
    return p


def _config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(args.seed_override, args.frames_ms, args.bins, args.out)


def _out_dir(cfg: RunConfig) -> Path:
    d = cfg.output_dir or Path("out")
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"{d}: cannot create output directory: {e.strerror or e}") from e
    return d


def _scene_log(cfg: RunConfig) -> dict:
    sc = cfg.scenario
    return {
        "scenario": {
            "tx_pos": list(sc.tx_pos), "rx_pos": list(sc.rx_pos), "carrier_hz": sc.carrier_hz,
            "seed": sc.seed, "duration_s": sc.duration_s,
            "n_const_scattered": sc.n_const_scattered,
            "n_dyn_scattered_per_object": sc.n_dyn_scattered_per_object,
            "coupling_ratio": sc.coupling_ratio,
            "objects": [{"id": o.id, "kind": o.kind.value,
                         "reflection_coefficient": o.reflection_coefficient,
                         "waypoints": [[t, list(p)] for t, p in o.waypoints]}
                        for o in sc.objects],
        },
        "waveform": dataclasses.asdict(cfg.waveform),
    }


def cmd_simulate(args, say) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    trace, truth = simulate_link(cfg.scenario, cfg.waveform, return_truth=True)
    io.write_trace(out / "trace.iqtf", trace)
    io.write_truth_csv(out / "truth.csv", truth)
    io.write_summary(out / "scene.json", _scene_log(cfg))
    say(f"wrote {len(trace)} samples ({trace.duration_s:g} s) to {out / 'trace.iqtf'}")
    return EXIT_OK


def cmd_analyze_envelope(args, say) -> int:
    cfg = _config(args)
    trace = io.read_trace(args.trace)
    an = cfg.analysis
    tr = est.track(trace, an.frame_s, an.bins)
    stat = est.stationarity_check(trace, an.frame_s, an.bins, an.stationarity_threshold, tr=tr)
    summary = est.summarize(trace, tr, stat)
    out = _out_dir(cfg)
    io.write_envelope_track_csv(out / "track.csv", tr)
    io.write_summary(out / "summary.json", summary)
    say(json.dumps(io._clean(summary), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_analyze_ir(args, say) -> int:
    cfg = _config(args)
    an = cfg.analysis
    out = _out_dir(cfg)
    if args.snapshots is not None:
        snaps = io.read_ir_csv(args.snapshots)
    else:
        snaps = simulate_snapshots(cfg.scenario, an.ir_cadence_s, an.ir_step_s)
        io.write_ir_csv(out / "ir_snapshots.csv", snaps)
    run = analyze_snapshots(snaps, an.ir)
    io.write_path_tracks_csv(out / "ir_tracks.csv", run.tracks)
    for tr in run.tracks:
        say(f"track {tr.track_id:3d}  {tr.label.value:<17} n={len(tr):4d}  "
            f"delay {tr.mean_delay_ns:8.2f} ns (std {tr.delay_std_ns:.2f})  "
            f"power {tr.mean_power_db:7.2f} dB (std {tr.power_std_db:.2f})")
    return EXIT_OK


def cmd_reproduce(args, say) -> int:
    for flag in ("config", "seed_override", "frames_ms", "bins"):
        if getattr(args, flag) is not None:
            raise ConfigError("recipes run fixed configurations", flag)
    rep = run_recipe(args.recipe, args.out)
    say(rep.table())
    return EXIT_OK if rep.passed else EXIT_ACCEPTANCE


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze-envelope": cmd_analyze_envelope,
    "analyze-ir": cmd_analyze_ir,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_VALIDATION
    quiet = args.quiet

    def say(msg):
        if not quiet:
            print(msg)

    try:
        return COMMANDS[args.command](args, say)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TempfadeError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

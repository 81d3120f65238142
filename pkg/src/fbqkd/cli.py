"""Command-line front end.

Commands: skr-vs-distance, qber-vs-time, tomography, fringe, decode,
validate-config. Output files are CSV for series and JSON for summaries,
written into --out. Exit codes: 0 success, 2 configuration error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import LinkConfig, default_link_config, load_config
from .coincidence import write_events_csv
from .errors import ConfigError
from .keyproc import run_summary_json
from .runner import (
    decode_file,
    run_fringe_demo,
    run_qber_vs_time,
    run_skr_vs_distance,
    run_tomography,
)
from .tomography import write_density_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_LENGTHS = (0.0, 2.6, 8.0, 10.6, 26.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbqkd", description=__doc__)
    parser.add_argument("--config", type=Path, default=None, help="link configuration JSON (defaults used if omitted)")
    parser.add_argument("--seed", type=int, default=None, help="override the config root seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--duration", type=float, default=60.0, help="simulated duration per run, seconds")
    locked = parser.add_mutually_exclusive_group()
    locked.add_argument("--locked", dest="locked", action="store_true", default=True)
    locked.add_argument("--unlocked", dest="locked", action="store_false")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("skr-vs-distance", help="key rate over a list of spool lengths")
    p.add_argument("--lengths", type=str, default=",".join(str(v) for v in DEFAULT_LENGTHS))

    p = sub.add_parser("qber-vs-time", help="windowed error rates over time")
    p.add_argument("--window", type=float, default=20.0, help="estimation window, seconds")
    p.add_argument("--temperature", choices=("ou", "ramp"), default="ou")
    p.add_argument("--ramp-rate", type=float, default=0.03, help="ramp rate, C per 600 s")

    p = sub.add_parser("tomography", help="simulate the projector set and reconstruct the state")
    p.add_argument("--shots", type=int, default=10**6, help="shots per projector setting")

    p = sub.add_parser("fringe", help="sample and fit control fringes")
    p.add_argument("--thetas", type=str, default="0.0,1.2,3.14159265")

    p = sub.add_parser("decode", help="offline decode of a timestamp file")
    p.add_argument("stream_file", type=Path)

    sub.add_parser("validate-config", help="check a configuration file and exit")
    return parser


def _load(args) -> LinkConfig:
    link = load_config(args.config) if args.config else default_link_config()
    if args.seed is not None:
        link = replace(link, seed=args.seed)
    return link


def _cmd_skr_vs_distance(args, link: LinkConfig, out: Path) -> None:
    lengths = [float(v) for v in args.lengths.split(",") if v.strip()]
    scan = run_skr_vs_distance(link, lengths, args.duration)
    scan.write_csv(out / "skr_vs_distance.csv")
    scan.write_model_csv(out / "skr_vs_distance_model.csv")
    summary = {
        "lengths_km": lengths,
        "skr_bps": [run.skr_bps for run in scan.runs],
        "eps_z": [run.total_eps_z for run in scan.runs],
        "eps_x": [run.total_eps_x for run in scan.runs],
        "n_sifted": [run.n_sifted for run in scan.runs],
        "model_skr_bps": scan.model_skr_bps,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _cmd_qber_vs_time(args, link: LinkConfig, out: Path) -> None:
    run = run_qber_vs_time(
        link,
        args.duration,
        locked=args.locked,
        window_s=args.window,
        temperature_mode=args.temperature,
        ramp_c_per_600s=args.ramp_rate,
    )
    run.write_timeseries_csv(out / "qber_timeseries.csv")
    if run.lock_trace is not None:
        run.lock_trace.write_csv(out / "lock_trace.csv")
    run_summary_json(
        out / "summary.json",
        fiber_km=run.fiber_km,
        eps_z=run.total_eps_z,
        eps_x=run.total_eps_x,
        se_z=run.total_se_z,
        se_x=run.total_se_x,
        sift_ratio=run.sift_ratio,
        skr_bps=run.skr_bps,
        n_sifted=run.n_sifted,
    )


def _cmd_tomography(args, link: LinkConfig, out: Path) -> None:
    run = run_tomography(link, args.shots)
    write_density_csv(out / "rho.csv", run.rho)
    report = {"shots_per_setting": args.shots, **run.fidelity_report()}
    (out / "tomography.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _cmd_fringe(args, link: LinkConfig, out: Path) -> None:
    thetas = [float(v) for v in args.thetas.split(",") if v.strip()]
    demo = run_fringe_demo(link, thetas)
    demo.write_csv(out / "fringe_samples.csv", out / "fringe_fits.csv")


def _cmd_decode(args, link: LinkConfig, out: Path) -> None:
    events = decode_file(args.stream_file, link)
    write_events_csv(out / "events.csv", events)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        link = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate-config":
        print("configuration OK")
        return EXIT_OK

    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        handler = {
            "skr-vs-distance": _cmd_skr_vs_distance,
            "qber-vs-time": _cmd_qber_vs_time,
            "tomography": _cmd_tomography,
            "fringe": _cmd_fringe,
            "decode": _cmd_decode,
        }[args.command]
        handler(args, link, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"runtime error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

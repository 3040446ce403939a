"""Command line front end.

  gpuiosim run     --config FILE [--set K=V]... [--out CSV]
  gpuiosim sweep   --config FILE --param KEY --values A,B,C [--out CSV]
  gpuiosim preset  NAME [--scale F] [--out DIR] [--set K=V]...
  gpuiosim replay  --trace FILE [--config FILE] [--set K=V]... [--out CSV]

Exit status 0 on success, 2 on configuration or invariant failure.
"""

import argparse
import sys

from gpuiosim.config import load_config
from gpuiosim.experiments import PRESETS, run_config, run_preset, sweep
from gpuiosim.metrics import write_csv
from gpuiosim.simcore import SimError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpuiosim",
                                description="GPU-CPU file I/O stack simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single configuration")
    run.add_argument("--config", default=None)
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", default="results.csv")
    run.add_argument("--label", default="run")

    sw = sub.add_parser("sweep", help="vary one key over a value list")
    sw.add_argument("--config", default=None)
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sw.add_argument("--out", default="sweep.csv")

    pr = sub.add_parser("preset", help="figure-reproduction preset")
    pr.add_argument("name", choices=PRESETS)
    pr.add_argument("--scale", type=float, default=None)
    pr.add_argument("--out", default=".", help="output directory")
    pr.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    rp = sub.add_parser("replay", help="drive the host path from a trace")
    rp.add_argument("--trace", required=True)
    rp.add_argument("--config", default=None)
    rp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    rp.add_argument("--out", default="replay.csv")
    return p


def _summarize(rows) -> None:
    for r in rows:
        if r["seed"] == "mean":
            bw = float(r["io_bandwidth_bps"])
            print(f"{r['label']}: {bw / 1e9:.3f} GB/s mean of {r['rep']} reps")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.set)
            rows = run_config(cfg, args.label)
            write_csv(args.out, rows)
            _summarize(rows)
            print(f"wrote {args.out}")
        elif args.command == "sweep":
            cfg = load_config(args.config, args.set)
            rows = sweep(cfg, args.param, args.values.split(","))
            write_csv(args.out, rows)
            _summarize(rows)
            print(f"wrote {args.out}")
        elif args.command == "preset":
            overrides = list(args.set)
            if args.scale is not None:
                overrides.append(f"workload.scale={args.scale}")
            cfg = load_config(None, overrides)
            path = run_preset(args.name, cfg, args.out)
            print(f"wrote {path}")
        else:
            overrides = list(args.set) + [f"mode.replay_trace={args.trace}"]
            cfg = load_config(args.config, overrides)
            rows = run_config(cfg, "replay")
            write_csv(args.out, rows)
            _summarize(rows)
            print(f"wrote {args.out}")
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

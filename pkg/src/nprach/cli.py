"""Command-line entry point: ``nprach {generate,calibrate,campaign,pattern}``.

Exit status is 0 on success, 1 on a validation error (bad flag, key or
value) and 2 on an I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import Mode, Scenario, calibrate, export, load_scenario, run_campaign
from .hopping import full_pattern
from .numerology import ConfigError, NprachConfig, load_config
from .waveform import default_sequence, dump_iq, generate

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _config(path) -> NprachConfig:
    if path is None or path == "defaults":
        return NprachConfig()
    return load_config(path)


def _scenario(args) -> Scenario:
    if args.scenario:
        scn = load_scenario(args.scenario)
    else:
        scn = Scenario(cfg=_config(args.config))
    if args.trials is not None:
        scn = scn.replace(n_trials=args.trials)
    if args.seed is not None:
        scn = scn.replace(master_seed=args.seed)
    return scn


def cmd_pattern(args) -> int:
    cfg = _config(args.config)
    text = full_pattern(cfg, args.n0).to_text()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"pattern_n0_{args.n0}.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _config(args.config)
    buf = generate(cfg, full_pattern(cfg, args.n0), default_sequence(cfg.preamble_groups))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    iq, header = dump_iq(buf, out / f"preamble_n0_{args.n0}.iq", {**cfg.to_dict(), "n0": args.n0})
    print(f"wrote {iq} ({len(buf)} samples) and {header}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    scn = _scenario(args)
    thr = calibrate(scn, target_fa=args.target_fa, n_trials=args.trials or scn.calibration_trials,
                    seed=scn.master_seed, workers=args.threads)
    record = {
        "threshold": thr,
        "target_fa": args.target_fa if args.target_fa is not None else scn.target_fa,
        "trials": args.trials or scn.calibration_trials,
        "seed": scn.master_seed,
        "preamble_groups": scn.cfg.preamble_groups,
        "n_rx": scn.n_rx,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "threshold.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    print(repr(thr))
    return EXIT_OK


def cmd_campaign(args) -> int:
    if not args.scenario:
        raise ConfigError("campaign needs --scenario")
    scn = _scenario(args)
    thr = scn.threshold
    if thr is None and scn.mode is not Mode.TOA_SWEEP:
        thr = calibrate(scn, target_fa=args.target_fa, workers=args.threads)
    stats = run_campaign(scn, thr, workers=args.threads)
    out = Path(args.out or "results")
    summary, rows = export(stats, out)
    s = stats.summary()
    print(f"trials={s['trials']} detections={s['detections']} misdetections={s['misdetections']} "
          f"false_alarms={s['false_alarms']} threshold={thr!r}")
    print(f"wrote {summary} and {rows}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nprach", description="NB-IoT random access preamble link-level simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, n0=False):
        sp.add_argument("--config", help="config TOML file, or 'defaults'")
        sp.add_argument("--scenario", help="scenario TOML file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--target-fa", type=float, dest="target_fa")
        if n0:
            sp.add_argument("--n0", type=int, default=0, help="starting subcarrier in [0, 12)")

    common(sub.add_parser("generate", help="write a preamble IQ dump"), n0=True)
    common(sub.add_parser("calibrate", help="noise-only detection threshold"))
    common(sub.add_parser("campaign", help="run a Monte Carlo campaign from a scenario file"))
    common(sub.add_parser("pattern", help="print the hopping pattern"), n0=True)
    return p


COMMANDS = {"generate": cmd_generate, "calibrate": cmd_calibrate,
            "campaign": cmd_campaign, "pattern": cmd_pattern}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``nomacsk <train|sweep-r|snr-ber|generalize|illum>``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import harness
from .checkpoint import load_agent
from .errors import ConfigurationError, DomainError, FormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nomacsk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="flat key = value settings file")
        p.add_argument("--seed", type=int, help="global seed (overrides the config file)")
        p.add_argument("--out", type=Path, required=True, help="output CSV path")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one dotted setting; may be repeated")
        p.add_argument("--workers", type=int, help="worker processes for sweeps")
        return p

    train = common(sub.add_parser("train", help="train an agent"))
    train.add_argument("--checkpoint", type=Path, help="checkpoint path (default: OUT with .ckpt)")
    for name, text in [("sweep-r", "compare policies across channel ratios"),
                       ("snr-ber", "BER against SNR at three channel ratios"),
                       ("generalize", "r sweep on widened channel bounds, no retraining")]:
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--agent", type=Path, help="trained agent checkpoint")
        p.add_argument("--policy", help="comma separated subset of sac,grpa,ngdpa,tdma")
        p.add_argument("--paper-scale", action="store_true",
                       help="0.001 r-step, 500 seeds and the full Monte Carlo budget")
    common(sub.add_parser("illum", help="illumination comparison table"))
    return parser


def _config(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    settings = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        settings[key.strip()] = value.strip()
    if args.seed is not None:
        settings["experiment.seed"] = str(args.seed)
    if args.workers is not None:
        settings["experiment.workers"] = str(args.workers)
    if getattr(args, "policy", None):
        settings["sweep.policies"] = args.policy
    cfg = harness.apply_settings(cfg, settings)
    if getattr(args, "paper_scale", False):
        cfg = cfg.paper_scale()
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "train":
            h = harness.run_train(cfg, args.out, args.checkpoint)
            last = h.history[-1]
            print(f"{len(h.history)} episodes, rolling average return {last.rolling_avg_return:.2f}")
        elif args.command == "illum":
            harness.run_illumination(cfg, args.out)
        else:
            agent = None
            if "sac" in cfg.policies:
                if args.agent is None:
                    raise ConfigurationError("policy 'sac' needs --agent <checkpoint>")
                agent = load_agent(args.agent)
            fn = {"sweep-r": harness.run_sweep_r, "snr-ber": harness.run_snr_ber,
                  "generalize": harness.run_generalization}[args.command]
            fn(cfg, agent, args.out)
    except (ConfigurationError, DomainError, FormatError) as exc:
        print(f"nomacsk: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nomacsk: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end.

Verbs: simulate, filter, diagnose, sweep, report.  A run is described either
by a JSON config file (--config) or assembled from the preset flags; explicit
flags override config-file fields.  Exit code is 0 exactly when every
requested diagnostic passes.

    mvfilter diagnose --preset tanh-observation --seed 11 --out runs/demo
    mvfilter sweep --config configs/smoke.json --threads 4
    mvfilter diagnose --criterion 3          # one acceptance criterion
    mvfilter report --out runs/demo
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    load_records,
    records_pass,
    render_report,
    run_experiment,
)
from .presets import preset_names

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvfilter",
        description="particle filters and diagnostics for law-dependent signal models",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, with_criterion=False):
        p.add_argument("--config", type=Path, default=None, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--out", type=Path, default=None, help="output directory for artifacts")
        p.add_argument("--threads", type=int, default=None, help="worker threads for sweeps/ensembles")
        p.add_argument("--preset", choices=preset_names(), default=None, help="model preset name")
        if with_criterion:
            p.add_argument("--criterion", type=int, default=None, choices=range(1, 13),
                           help="run one acceptance criterion instead of the config diagnostics")

    for verb in ("simulate", "filter", "sweep"):
        add_common(sub.add_parser(verb, help=f"run the {verb} pipeline"))
    add_common(sub.add_parser("diagnose", help="run identity diagnostics"), with_criterion=True)

    rep = sub.add_parser("report", help="summarize records.json from a previous run")
    rep.add_argument("--out", type=Path, required=True, help="directory holding records.json")
    return parser


def _assemble_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json_file(args.config)
        d = cfg.to_dict()
    else:
        d = ExperimentConfig().to_dict()
    d["scenario"] = args.verb
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["out_dir"] = str(args.out)
    if args.threads is not None:
        d["threads"] = args.threads
    if args.preset is not None:
        d["preset"] = args.preset
    if args.verb == "sweep" and not d["sweep"]:
        d["sweep"] = {"dt": [1e-2, 5e-3], "n_particles": [1000, 4000]}
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.verb == "report":
        path = Path(args.out) / "records.json"
        if not path.exists():
            print(f"no records.json under {args.out}", file=sys.stderr)
            return 2
        records = load_records(path)
        sys.stdout.write(render_report(records))
        return 0 if records_pass(records) else 1

    if args.verb == "diagnose" and args.criterion is not None:
        from .acceptance import run_criterion

        result = run_criterion(args.criterion, threads=args.threads or 1,
                               out_dir=str(args.out) if args.out else None)
        sys.stdout.write(render_report(result))
        return 0 if records_pass(result) else 1

    cfg = _assemble_config(args)
    records = run_experiment(cfg)
    sys.stdout.write(render_report(records))
    return 0 if records_pass(records) else 1


if __name__ == "__main__":
    raise SystemExit(main())

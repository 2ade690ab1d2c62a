"""Command line front end.

    greenslice run      --config cfg.yaml [--out DIR] [--schemes a,b] [--slots N] [--seed S] [--solver-budget-s T]
    greenslice validate --config cfg.yaml
    greenslice export   --out DIR
    greenslice lpdump   --config cfg.yaml --slot N [--slice 130|129|128] [--out FILE]

Exit codes: 0 ok, 2 config error, 3 solver budget breach.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .constellation import ConfigurationError, build_constellation, propagate
from .linkstate import SLICES
from .milp import build_model, write_lp
from .runner import BudgetBreachError, ConfigError, RunConfig, export_run, load_config, run
from .trafficlab import generate_demands

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    schemes = None
    if getattr(args, "schemes", None):
        schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    return cfg.with_overrides(schemes=schemes, slots=getattr(args, "slots", None),
                              seed=getattr(args, "seed", None),
                              solver_budget_s=getattr(args, "solver_budget_s", None),
                              output_dir=getattr(args, "out", None))


def cmd_run(args) -> int:
    cfg = _config(args)
    total = cfg.scenario.total_slots

    def progress(slot):
        if args.verbose and (slot + 1) % 50 == 0:
            print(f"  slot {slot + 1}/{total}", file=sys.stderr)

    res = run(cfg, progress=progress)
    print(json.dumps(res.summary["headline"], indent=2, sort_keys=True))
    print(f"wrote {res.output_dir}  ({len(res.records)} metric rows, "
          f"{res.audited} audited solutions, {len(res.violations)} violations)")
    for v in res.violations[:10]:
        print(f"VIOLATION {v}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config(args)
    try:
        build_constellation(cfg.shells, cfg.stations, isl_capacity_mbps=cfg.isl_capacity_mbps,
                            ground_capacity_mbps=cfg.ground_capacity_mbps)
    except ConfigurationError as exc:
        raise ConfigError(f"constellation: {exc}", None, args.config or "<defaults>") from None
    print(f"{args.config or '<defaults>'}: ok ({cfg.scenario.name}, {cfg.scenario.total_slots} slots, "
          f"schemes {','.join(cfg.schemes)})")
    return EXIT_OK


def cmd_export(args) -> int:
    if not args.out:
        raise ConfigError("export needs --out pointing at a run directory")
    if not (Path(args.out) / "metrics.csv").exists():
        raise ConfigError(f"{args.out}: no metrics.csv to export from")
    summary = export_run(args.out)
    print(json.dumps(summary["headline"], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_lpdump(args) -> int:
    cfg = _config(argparse.Namespace(config=args.config))
    if not 0 <= args.slot < cfg.scenario.total_slots:
        raise ConfigError(f"--slot must lie in [0, {cfg.scenario.total_slots})")
    c = build_constellation(cfg.shells, cfg.stations, isl_capacity_mbps=cfg.isl_capacity_mbps,
                            ground_capacity_mbps=cfg.ground_capacity_mbps)
    snap = propagate(c, args.slot, cfg.slot_duration_s)
    demands = generate_demands(cfg.scenario, args.slot, c)
    power = cfg.cpu.node_power(snap, "flexalgo", cfg.scenario.base_load_mbps)
    model = build_model(snap, None, demands, SLICES[args.slice].weights, cfg.limits, node_power=power)
    text = write_lp(model)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({model.n_vars} variables)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="greenslice", description="Slice-aware LEO routing simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="execute a scenario for the configured schemes")
    r.add_argument("--config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--schemes", help="comma-separated subset of ospf,srv6,green,flexalgo")
    r.add_argument("--slots", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--solver-budget-s", type=float, dest="solver_budget_s")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="schema-check a config file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("export", help="re-derive CDFs and summary from a run directory")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export)

    d = sub.add_parser("lpdump", help="write one slot's MILP in LP text format")
    d.add_argument("--config")
    d.add_argument("--slot", type=int, default=0)
    d.add_argument("--slice", type=int, choices=sorted(SLICES), default=130)
    d.add_argument("--out")
    d.set_defaults(func=cmd_lpdump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetBreachError as exc:
        print(f"solver budget breach: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())

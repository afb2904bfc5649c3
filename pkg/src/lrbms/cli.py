"""Command-line entry point: validate configs and run the batch studies."""

import argparse
import sys

from .config import ConfigError, validate_config
from .experiments import run_convergence_study, run_enrichment_study, run_greedy


def _add_common(sub):
    sub.add_argument("--config", required=True, help="path to the experiment config file")
    sub.add_argument("--out", default=None, help="output directory (overrides the config)")
    sub.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    sub.add_argument("--threads", type=int, default=1, help="worker threads for patch solves")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lrbms",
        description="Two-level SWIPDG experiments: refinement studies, greedy "
                    "reduction and adaptive online enrichment.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("convergence", "refinement ladder: errors, estimator components, efficiency"),
        ("greedy", "offline phase only: greedy basis generation and export"),
        ("online", "greedy/loaded bases plus adaptive online enrichment"),
        ("validate", "parse a config, resolve defaults, report all errors"),
    ):
        _add_common(subs.add_parser(name, help=desc))
    args = parser.parse_args(argv)

    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: {len(exc.errors)} error(s)", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed

    from pathlib import Path
    base_dir = Path(args.config).parent
    out = args.out

    if args.command == "validate":
        print(cfg.resolved_text(), end="")
        print(f"config_digest = {cfg.digest()}")
        return 0
    if args.command == "convergence":
        rows = run_convergence_study(cfg, out, base_dir)
        for r in rows:
            print(f"|tau_h|={r['n_triangles']:>8}  error={r['error']:.3e}  "
                  f"eta={r['eta']:.3e}  efficiency={r['efficiency']:.2f}")
        return 0
    if args.command == "greedy":
        _, bases, _, log = run_greedy(cfg, out, base_dir)
        print(f"greedy finished ({log.termination}); basis sizes "
              f"{min(b.size for b in bases)}..{max(b.size for b in bases)}")
        return 0
    if args.command == "online":
        _, bases, logs, delta = run_enrichment_study(cfg, out, base_dir, args.threads)
        total = sum(b.size for b in bases)
        print(f"delta_online = {delta:.6e}")
        for i, log in enumerate(logs):
            print(f"parameter {i}: {log.n_steps} enrichment steps ({log.termination})")
        print(f"total basis size = {total}")
        return 0
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())

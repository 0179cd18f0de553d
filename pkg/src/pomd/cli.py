"""Command-line entry point: ``pomd run|sweep|diag|gen-env``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .environments import make_chain_mdp, make_random_mdp
from .harness import ExperimentConfig, run_diagnostics, run_experiment, run_sweep
from .mdp_core import ContractViolation

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _parse_grid(raw: str) -> list[int]:
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad K grid {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pomd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config or manifest")
    p.add_argument("--config", required=True)

    p = sub.add_parser("sweep", help="repeat an experiment over K values and fit the regret slope")
    p.add_argument("--config", required=True)
    p.add_argument("--k-grid", required=True, type=_parse_grid, help="comma-separated K values")

    p = sub.add_parser("diag", help="run with good-event and optimism checks and write a report")
    p.add_argument("--config", required=True)

    p = sub.add_parser("gen-env", help="write a model JSON")
    p.add_argument("--kind", choices=("random", "chain"), required=True)
    p.add_argument("--S", type=int, default=5)
    p.add_argument("--A", type=int, default=3)
    p.add_argument("--H", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--N", type=int, default=5, help="chain length")
    p.add_argument("--slip", type=float, default=0.0)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-env":
            if args.kind == "random":
                model = make_random_mdp(args.S, args.A, args.H, args.seed)
            else:
                model = make_chain_mdp(args.N, args.H, args.slip)
            out = Path(args.out)
            try:
                out.parent.mkdir(parents=True, exist_ok=True)
                model.save(out)
            except OSError as e:
                raise OSError(f"cannot write {out}: {e.strerror}") from e
            print(f"wrote {out}")
            return EXIT_OK

        config = ExperimentConfig.from_file(args.config)
        if args.command == "run":
            res = run_experiment(config)
            print(f"{len(config.seeds)} seed(s), K={config.K}: mean cumulative regret "
                  f"{res.mean_cum_regret[-1]:.6g} -> {res.output}")
        elif args.command == "sweep":
            report = run_sweep(config, args.k_grid)
            print(json.dumps(report))
        else:
            report = run_diagnostics(config)
            print(f"runs with any good-event flag: {report['runs_with_any_flag']}/{len(config.seeds)}; "
                  f"optimism violations on good episodes: {report['optimism_violations_on_good_episodes']}")
    except ContractViolation as e:  # includes ConfigError
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

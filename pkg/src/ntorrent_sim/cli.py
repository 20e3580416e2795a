"""Command line front end.

    sim run          --scenario FILE --seed N --out DIR
    sim five-node    [--p P] [--seed N] --out DIR
    sim random-field --nodes N --seed N --out DIR
    sim sweep        --scenario FILE --p LIST --seeds LIST --out DIR
    sim oracle       --scenario FILE

Single runs write trace.csv, metrics.csv, and positions.csv into the output
directory. Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

from .oracle import OracleUnsupported, reachability_oracle
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    build_five_node,
    build_random_field,
    load_scenario,
    with_p_forward,
)
from .trace import write_metrics_csv, write_positions_csv, write_trace_csv
from .world import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _seed_list(text: str) -> list[int]:
    return [_u64(part) for part in text.split(",") if part]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="simulate torrent dissemination over a named-data ad hoc network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True, metavar="FILE")
    run.add_argument("--seed", type=_u64, default=1, metavar="N")
    run.add_argument("--out", required=True, metavar="DIR")

    five = sub.add_parser("five-node", help="run the static five-node line")
    five.add_argument("--p", type=float, default=1.0, metavar="P",
                      help="pure forwarding probability (default 1.0)")
    five.add_argument("--seed", type=_u64, default=1, metavar="N")
    five.add_argument("--out", required=True, metavar="DIR")

    rand = sub.add_parser("random-field", help="run a mobile random field")
    rand.add_argument("--nodes", type=int, required=True, metavar="N")
    rand.add_argument("--seed", type=_u64, default=1, metavar="N")
    rand.add_argument("--out", required=True, metavar="DIR")

    sweep = sub.add_parser("sweep", help="run a scenario across p values and seeds")
    sweep.add_argument("--scenario", required=True, metavar="FILE")
    sweep.add_argument("--p", type=_float_list, required=True, metavar="P1,P2,...")
    sweep.add_argument("--seeds", type=_seed_list, required=True, metavar="S1,S2,...")
    sweep.add_argument("--out", required=True, metavar="DIR")

    oracle = sub.add_parser("oracle", help="print reachability verdicts for a static scenario")
    oracle.add_argument("--scenario", required=True, metavar="FILE")
    return parser


def _write_run(out_dir: str, cfg: ScenarioConfig, seed: int) -> None:
    trace, metrics = run_scenario(cfg, seed)
    os.makedirs(out_dir, exist_ok=True)
    write_trace_csv(os.path.join(out_dir, "trace.csv"), trace)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
    write_positions_csv(os.path.join(out_dir, "positions.csv"), trace)
    for node_id, lm in metrics.per_leecher.items():
        state = f"completed at {lm.completion_time_us} us" if lm.completed else "incomplete"
        print(f"{node_id} [{lm.torrent}] {state}")
    print(f"transmissions={metrics.total_tx} pieces_delivered={metrics.pieces_delivered}")


def sweep(cfg: ScenarioConfig, p_values: list[float], seeds: list[int]):
    """Completion table across (p, seed); rows are (p, seed, node, torrent,
    completed, completion_time_us or '')."""
    rows = []
    for p_value in p_values:
        varied = with_p_forward(cfg, p_value)
        for seed in seeds:
            _, metrics = run_scenario(varied, seed)
            for node_id, lm in metrics.per_leecher.items():
                rows.append((p_value, seed, node_id, lm.torrent, int(lm.completed),
                             "" if lm.completion_time_us is None else lm.completion_time_us))
    return rows


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            _write_run(args.out, load_scenario(args.scenario), args.seed)
        elif args.command == "five-node":
            _write_run(args.out, build_five_node(p_forward=args.p), args.seed)
        elif args.command == "random-field":
            _write_run(args.out, build_random_field(args.nodes, args.seed), args.seed)
        elif args.command == "sweep":
            rows = sweep(load_scenario(args.scenario), args.p, args.seeds)
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, "sweep.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(("p", "seed", "node", "torrent", "completed",
                                 "completion_time_us"))
                writer.writerows(rows)
            print(f"wrote {len(rows)} rows to {path}")
        elif args.command == "oracle":
            verdicts = reachability_oracle(load_scenario(args.scenario))
            for node_id in sorted(verdicts):
                print(f"{node_id},{'reachable' if verdicts[node_id] else 'unreachable'}")
    except (ScenarioError, OracleUnsupported, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line interface for the ROI exploration simulator.
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

import pandas as pd

from core.errors import SimulationError, SweepAbortedError
from core.experiment_runner import ExperimentHarness, aggregate_sweep
from core.models import SweepKind


def _add_world_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument('--map', dest='map_path', help='scenario file with a fixed ROI')
    source.add_argument('--random', nargs=2, type=int, metavar=('C', 'SEED'), help='random ROI of C cells')
    parser.add_argument('--robots', type=int, help='number of robots')
    parser.add_argument('--speed-ratio', type=float, help='robot speed over ROI speed')
    parser.add_argument('--translation-speed', type=float, help='ROI speed')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='roi-explorer',
                                     description='Multi-robot exploration of translating regions of interest')
    parser.add_argument('--config', default='config.yaml', help='configuration file')
    commands = parser.add_subparsers(dest='command', required=True)

    sweep = commands.add_parser('sweep', help='run a simulation sweep')
    sweep.add_argument('--kind', default='single', choices=[k.value.replace('_', '-') for k in SweepKind])
    sweep.add_argument('--grid', type=float, nargs='+', help='sweep points (configured grid if omitted)')
    sweep.add_argument('--cells', type=int)
    sweep.add_argument('--robots', type=int)
    sweep.add_argument('--speed-ratio', type=float)
    sweep.add_argument('--trials', type=int)
    sweep.add_argument('--seed', type=int, help='master seed')
    sweep.add_argument('--workers', type=int)
    sweep.add_argument('--out', help='per-trial result file')
    sweep.add_argument('--format', choices=['csv', 'json'])

    verify = commands.add_parser('verify', help='run the verification suite')
    verify.add_argument('--tier', default='QUICK', type=str.upper, choices=['QUICK', 'FULL'])
    verify.add_argument('--out')
    verify.add_argument('--format', choices=['csv', 'json'], default='csv')

    explore = commands.add_parser('explore', help='explore one ROI with perfect sensing')
    _add_world_options(explore)
    explore.add_argument('--trajectories', help='write per-robot arrivals to this file')
    explore.add_argument('--out', help='write the run summary as JSON')

    noisy = commands.add_parser('noisy-explore', help='field procedure with a noisy classifier')
    _add_world_options(noisy)
    noisy.add_argument('--seed', type=int, help='classifier seed')
    noisy.add_argument('--resume', help='resume file to continue from and save to')
    noisy.add_argument('--batches', type=int, help='pause after this many event batches')
    noisy.add_argument('--out', help='write the run summary as JSON')

    geometry = commands.add_parser('geometry-check', help='check grid approximation bounds')
    geometry.add_argument('--polygon', help='polygon file; random fat shapes if omitted')
    geometry.add_argument('--shapes', type=int, default=10)
    geometry.add_argument('--seed', type=int, default=0)
    geometry.add_argument('--out')
    geometry.add_argument('--format', choices=['csv', 'json'], default='csv')
    return parser


def _write_summary(summary: Dict[str, Any], path: Optional[str]) -> None:
    text = json.dumps(summary, indent=2, sort_keys=True, default=str)
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    print(text)


def _run_sweep(harness: ExperimentHarness, args: argparse.Namespace) -> bool:
    config = harness.experiment_config(
        args.kind, grid=args.grid, cells=args.cells, robots=args.robots, speed_ratio=args.speed_ratio,
        trials=args.trials, master_seed=args.seed, workers=args.workers, output_format=args.format,
        output_path=args.out)
    table = harness.run_sweep(config)
    path = harness.save_table(table, config.output_path, config.output_format, name=f"sweep_{config.sweep.value}")
    summary = aggregate_sweep(table)
    harness.save_table(summary, path.rsplit('.', 1)[0] + f"_summary.{config.output_format}", config.output_format)
    print(summary.to_string(index=False))
    return True


def _run_verify(harness: ExperimentHarness, args: argparse.Namespace) -> bool:
    report = harness.run_verification(args.tier)
    harness.save_table(report, args.out, args.format, name=f"verify_{args.tier.lower()}")
    print(report.to_string(index=False))
    return bool(report['passed'].all())


def _run_explore(harness: ExperimentHarness, args: argparse.Namespace) -> bool:
    summary = harness.explore_scenario(args.map_path, tuple(args.random) if args.random else None,
                                       args.robots, args.speed_ratio, args.translation_speed, args.trajectories)
    _write_summary(summary, args.out)
    return summary['checks_passed']


def _run_noisy(harness: ExperimentHarness, args: argparse.Namespace) -> bool:
    summary = harness.noisy_explore_scenario(args.map_path, tuple(args.random) if args.random else None,
                                             args.robots, args.speed_ratio, args.translation_speed, args.seed,
                                             args.resume, args.batches)
    _write_summary(summary, args.out)
    return summary['checks_passed']


def _run_geometry(harness: ExperimentHarness, args: argparse.Namespace) -> bool:
    table: pd.DataFrame = harness.geometry_check(args.polygon, args.shapes, args.seed)
    if args.out:
        harness.save_table(table, args.out, args.format)
    print(table.to_string(index=False))
    return bool((table['lemma3_ok'] & table['lemma4_ok']).all())


COMMANDS = {
    'sweep': _run_sweep,
    'verify': _run_verify,
    'explore': _run_explore,
    'noisy-explore': _run_noisy,
    'geometry-check': _run_geometry
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one CLI command.

    Returns:
        0 when every invariant check passed, 1 otherwise
    """
    args = build_parser().parse_args(argv)
    harness = ExperimentHarness(args.config)
    try:
        return 0 if COMMANDS[args.command](harness, args) else 1
    except SweepAbortedError as e:
        print(f"Sweep aborted: {e}", file=sys.stderr)
        return 1
    except (SimulationError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

"""
Command-line interface for the rules-first experiment harness.

Subcommands:
    gen synthetic|lowerbound   write a generated dataset
    train / eval               fit one method on a dataset file / score a saved model
    curve                      test accuracy vs training size
    kappa                      test accuracy vs rule budget
    threshold                  text corpus accuracy vs near-rule threshold
    table1                     sample size needed to reach test error epsilon

A JSON config file (--config) may set any HarnessConfig field; explicit flags win.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import copy
import json
import logging
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from datagen import LowerBoundSpec, gen_lower_bound, gen_synthetic
from rules_first_core import ConfigError, DataError, write_dataset
from rules_first_experiments import (
    DEFAULT_METHODS,
    ExperimentRunner,
    HarnessConfig,
    METHODS,
    run_eval,
    run_train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON file with HarnessConfig fields')
    common.add_argument('--seed', type=int, help='Base random seed')
    common.add_argument('--out', help='Output path')
    common.add_argument('--trials', type=int, help='Repetitions per cell')
    common.add_argument('--m', type=int, nargs='+', help='Training size (a grid for curve)')
    common.add_argument('--k', type=int, nargs='+', help='Rule count (a grid for table1)')
    common.add_argument('--B', type=float, nargs='+', help='Norm bound (a grid for table1)')
    common.add_argument('--C', type=float, help='Inverse penalty strength')
    common.add_argument('--budget', type=int, help='Rule budget (largest budget for kappa)')
    common.add_argument('--method', nargs='+', help=f"Methods: {', '.join(METHODS)}")
    common.add_argument('--jobs', type=int, help='Worker processes for independent cells')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Warnings only')

    parser = argparse.ArgumentParser(
        prog='rules-first',
        description='Rules-first classifiers: generation, training and experiment sweeps'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', help='Generate a dataset')
    generators = gen.add_subparsers(dest='generator', required=True)
    generators.add_parser('synthetic', parents=[common], help='Rules plus Gaussian linear data')
    generators.add_parser('lowerbound', parents=[common], help='Lower-bound support points (d = k + B^2)')

    train = commands.add_parser('train', parents=[common], help='Fit one method and save the model')
    train.add_argument('--data', required=True, help='Dataset file (.csv dense, otherwise sparse text)')

    evaluate = commands.add_parser('eval', parents=[common], help='Accuracy and losses of a saved model')
    evaluate.add_argument('--model', required=True, help='Model JSON written by train')
    evaluate.add_argument('--data', required=True, help='Dataset file')

    commands.add_parser('curve', parents=[common], help='Learning curves on synthetic data')
    commands.add_parser('kappa', parents=[common], help='Rule-budget sweep on synthetic data')

    threshold = commands.add_parser('threshold', parents=[common], help='Near-rule threshold sweep on text')
    threshold.add_argument('--corpus', help='TSV corpus, one `label<TAB>text` per line')
    threshold.add_argument('--thresholds', type=float, nargs='+', help='Score thresholds')

    commands.add_parser('table1', parents=[common], help='Sample size to reach test error epsilon')
    return parser


def apply_cli_overrides(cfg: Dict[str, object], args: argparse.Namespace) -> Dict[str, object]:
    """Copy of the file config with every explicitly given flag applied."""
    out = copy.deepcopy(cfg)
    command = args.command
    synthetic = dict(out.get('synthetic') or {})

    for flag in ('seed', 'trials', 'C', 'jobs'):
        value = getattr(args, flag)
        if value is not None:
            out[flag] = value
    if args.method is not None:
        out['methods'] = list(args.method)

    if args.m is not None:
        if command == 'curve':
            out['m_grid'] = list(args.m)
        else:
            out['m'] = args.m[0]

    if args.k is not None:
        if command == 'table1':
            out['k_grid'] = list(args.k)
        else:
            out['k'] = args.k[0]
            synthetic['k'] = args.k[0]

    if args.B is not None:
        if command == 'table1':
            if any(not b.is_integer() for b in args.B):
                raise ConfigError("table1 needs integer B values")
            out['B_grid'] = [int(b) for b in args.B]
        else:
            out['B'] = args.B[0]

    if args.budget is not None:
        out['budget'] = args.budget
        if command == 'kappa':
            out['kappa_grid'] = list(range(args.budget + 1))

    if getattr(args, 'corpus', None) is not None:
        out['corpus'] = args.corpus
    if getattr(args, 'thresholds', None) is not None:
        out['thresholds'] = list(args.thresholds)

    if synthetic:
        out['synthetic'] = synthetic
    return out


def load_config(args: argparse.Namespace) -> HarnessConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    values = {}
    if args.config:
        try:
            with open(args.config, 'r', encoding='utf-8') as handle:
                values = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Error loading config from {args.config}: {str(e)}")
        if not isinstance(values, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    try:
        return HarnessConfig.model_validate(apply_cli_overrides(values, args))
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def log_progress(name: str, current: int, total: int) -> None:
    logger.info(f"{name}: {current}/{total}")


def _methods(config: HarnessConfig, command: str) -> List[str]:
    return list(config.methods or DEFAULT_METHODS[command])


def _out(args: argparse.Namespace, default: str) -> str:
    return args.out or default


def cmd_gen(args: argparse.Namespace, config: HarnessConfig) -> None:
    if args.generator == 'synthetic':
        data = gen_synthetic(config.synthetic, config.m, seed=config.seed)
        out = _out(args, 'synthetic.txt')
    else:
        if not float(config.B).is_integer():
            raise ConfigError(f"lowerbound needs an integer B, got {config.B}")
        data = gen_lower_bound(LowerBoundSpec(k=config.k, B=int(config.B)))
        out = _out(args, 'lowerbound.txt')
    write_dataset(data, out)
    logger.info(f"Wrote {len(data)} examples of dimension {data.dimension} to {out}")


def cmd_train(args: argparse.Namespace, config: HarnessConfig) -> None:
    method = (config.methods or ('greedy_l2',))[0]
    run_train(args.data, method, config, _out(args, 'model.json'))


def cmd_eval(args: argparse.Namespace, config: HarnessConfig) -> None:
    metrics = run_eval(args.model, args.data, args.out)
    print(metrics.to_string(index=False))


def cmd_curve(args: argparse.Namespace, config: HarnessConfig) -> None:
    runner = ExperimentRunner(config)
    runner.run_learning_curve(config.synthetic, _methods(config, 'curve'), config.m_grid, config.trials,
                              progress_callback=log_progress)
    runner.export_csv(_out(args, 'curve.csv'))


def cmd_kappa(args: argparse.Namespace, config: HarnessConfig) -> None:
    runner = ExperimentRunner(config)
    runner.run_kappa_sweep(config.synthetic, config.kappa_grid, config.m, config.trials,
                           progress_callback=log_progress)
    runner.export_csv(_out(args, 'kappa.csv'))


def cmd_threshold(args: argparse.Namespace, config: HarnessConfig) -> None:
    runner = ExperimentRunner(config)
    runner.run_threshold_sweep(config.corpus, config.thresholds, _methods(config, 'threshold'),
                               trials=config.trials, progress_callback=log_progress)
    runner.export_csv(_out(args, 'threshold.csv'))


def cmd_table1(args: argparse.Namespace, config: HarnessConfig) -> None:
    runner = ExperimentRunner(config)
    runner.run_table1_comparison(config.k_grid, config.B_grid, config.trials, _methods(config, 'table1'),
                                 progress_callback=log_progress)
    runner.export_csv(_out(args, 'table1.csv'))


COMMANDS = {
    'gen': cmd_gen,
    'train': cmd_train,
    'eval': cmd_eval,
    'curve': cmd_curve,
    'kappa': cmd_kappa,
    'threshold': cmd_threshold,
    'table1': cmd_table1,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s')

    try:
        config = load_config(args)
        COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except DataError as e:
        logger.error(str(e))
        return EXIT_DATA
    except ValueError as e:
        logger.error(str(e))
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())

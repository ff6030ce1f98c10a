"""
Command line entry point for secure image delivery analysis.
"""

import argparse
import logging
import sys
from typing import List, Optional

import config
from core.errors import (
    DeliveryModelError, DomainError, InfeasibleConfigurationError, NumericalFailureError,
    UnsupportedParameterError,
)
from handlers.analysis_handler import cmd_min_ls, cmd_qvp, cmd_sweep, cmd_validate
from handlers.training_handler import cmd_gen_dataset, cmd_optimize, cmd_predict, cmd_train
from utils.constants import (
    CONFIG_ERROR_MSG, EXIT_CONFIG_ERROR, EXIT_INFEASIBLE, EXIT_MODEL_ERROR, EXIT_NUMERICAL_FAILURE,
    EXIT_OK, INFEASIBLE_MSG, MODE_CHOICES, MODEL_ERROR_MSG, NUMERICAL_ERROR_MSG, SCENARIO_CHOICES,
    SWEEP_AXES,
)
from utils.run_config import ConfigError, RunConfig, apply_overrides

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="JSON run configuration")
    common.add_argument('--seed', type=int, help="override the configured seed")
    common.add_argument('--out', help="write a CSV table here")
    common.add_argument('--trials', type=int, help="Monte Carlo trials")
    common.add_argument('--scenario', choices=SCENARIO_CHOICES, help="eavesdropper scenario")
    common.add_argument('--mode', choices=MODE_CHOICES, help="eavesdropper placement in simulation")
    common.add_argument('--workers', type=int, help="worker processes")

    parser = argparse.ArgumentParser(prog='secure-delivery', description=__doc__.strip())
    commands = parser.add_subparsers(dest='command', required=True)

    qvp = commands.add_parser('qvp', parents=[common], help="QoSec violation probability")
    qvp.add_argument('--simulate', action='store_true', help="check against Monte Carlo")

    sweep = commands.add_parser('sweep', parents=[common], help="sweep one parameter")
    sweep.add_argument('--axis', choices=SWEEP_AXES, required=True)
    sweep.add_argument('--simulate', action='store_true', help="add Monte Carlo columns")

    commands.add_parser('min-ls', parents=[common], help="smallest secure confidential frame size")
    commands.add_parser('optimize', parents=[common], help="GA search for transmission parameters")

    gen = commands.add_parser('gen-dataset', parents=[common], help="label configurations for training")
    gen.add_argument('--db', help="sqlite file used to checkpoint and resume labelling")

    train = commands.add_parser('train', parents=[common], help="train the parameter predictor")
    train.add_argument('--dataset', help="labelled dataset CSV")
    train.add_argument('--model', help="where to save the model")

    predict = commands.add_parser('predict', parents=[common], help="predict transmission parameters")
    predict.add_argument('--model', help="saved model")

    commands.add_parser('validate', parents=[common], help="analytic vs simulated agreement table")
    return parser


def dispatch(args: argparse.Namespace, run: RunConfig) -> str:
    if args.command == 'qvp':
        return cmd_qvp(run, args.simulate, args.workers)
    if args.command == 'sweep':
        return cmd_sweep(run, args.axis, args.out, args.simulate, args.workers)
    if args.command == 'min-ls':
        return cmd_min_ls(run)
    if args.command == 'optimize':
        return cmd_optimize(run, args.out)
    if args.command == 'gen-dataset':
        return cmd_gen_dataset(run, args.out, args.db, args.workers)
    if args.command == 'train':
        return cmd_train(run, args.dataset, args.model, args.out)
    if args.command == 'predict':
        return cmd_predict(run, args.model, args.out)
    return cmd_validate(run, args.out, args.workers)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code."""
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=getattr(logging, config.LOG_LEVEL, logging.INFO),
    )
    args = build_parser().parse_args(argv)

    try:
        run = RunConfig.load(args.config)
        apply_overrides(run, seed=args.seed, trials=args.trials, scenario=args.scenario, mode=args.mode)
        print(dispatch(args, run))
        return EXIT_OK
    except (ConfigError, DomainError, UnsupportedParameterError) as exc:
        logger.error(CONFIG_ERROR_MSG.format(reason=exc))
        return EXIT_CONFIG_ERROR
    except InfeasibleConfigurationError as exc:
        logger.error(INFEASIBLE_MSG.format(reason=exc))
        return EXIT_INFEASIBLE
    except NumericalFailureError as exc:
        logger.error(NUMERICAL_ERROR_MSG.format(reason=exc))
        return EXIT_NUMERICAL_FAILURE
    except (DeliveryModelError, OSError, KeyError) as exc:
        logger.error(MODEL_ERROR_MSG.format(reason=exc))
        return EXIT_MODEL_ERROR


if __name__ == '__main__':
    sys.exit(main())

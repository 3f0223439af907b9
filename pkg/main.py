"""Command-line entry point for the treatment-effect toolkit."""
import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from config import Config, load_experiment_config
from commands import COMMANDS, EvaluateCommand
from database.db import ResultsDatabase
from utils.constants import EXIT_CONFIG_ERROR, EXIT_FAILURE, EXIT_NUMERICAL_ABORT, EXIT_OK
from utils.errors import (
    CausalToolkitError, ConfigError, ContractError, ConvergenceError, DegenerateDataError, InputError, OptimizerError,
    ParseError, TrainingAbortedError,
)

logger = logging.getLogger(__name__)

# Faults in user-supplied files and data
CONFIG_ERRORS = (ConfigError, ParseError, DegenerateDataError, ContractError, InputError)
NUMERICAL_ERRORS = (TrainingAbortedError, OptimizerError, ConvergenceError)


def setup_logging():
    """Configure the root logger once, from the environment settings."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if Config.LOG_FILE:
        handlers.insert(0, logging.FileHandler(Config.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Targeted VAE and TMLE treatment-effect experiments")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", default=None, help="Experiment JSON file (defaults apply when omitted)")
        sub.add_argument("--seed", type=int, default=None, help="Override the experiment seed")
        sub.add_argument("--jobs", type=int, default=Config.MAX_JOBS, help="Worker processes for replications")
        sub.add_argument("--out", default=None, help="Override the output directory")
        sub.add_argument("--results-db", default=Config.RESULTS_DB_PATH,
                         help="SQLite results store; empty disables recording")
        if name == "evaluate":
            sub.add_argument("--checkpoint", required=True, help="Checkpoint written by train")
    return parser


def exit_code_for(error: Exception) -> int:
    """Map a toolkit error to the process exit code."""
    if isinstance(error, CONFIG_ERRORS):
        return EXIT_CONFIG_ERROR
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL_ABORT
    return EXIT_FAILURE


async def main(argv: Optional[List[str]] = None) -> int:
    """Run one sub-command and return the exit code."""
    args = build_parser().parse_args(argv)

    if not Config.validate():
        logger.error("Configuration validation failed. Check your .env file.")
        return EXIT_CONFIG_ERROR

    try:
        config = load_experiment_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed must be non-negative, got {args.seed}")
            config.seed = args.seed
        if args.out:
            config.output_dir = args.out
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")

        db = None
        if args.results_db:
            db = ResultsDatabase(args.results_db)
            await db.initialize()

        if args.command == "evaluate":
            command = EvaluateCommand(db, args.jobs, checkpoint=args.checkpoint)
        else:
            command = COMMANDS[args.command](db, args.jobs)

        logger.info(f"Running {args.command} (seed {config.seed}, {config.replications} replication(s))")
        report = await command.run(config)
        logger.info(f"{args.command} finished in {report.wall_clock_s:.1f}s; outputs in {config.output_dir}")
        return EXIT_OK
    except CausalToolkitError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    setup_logging()
    sys.exit(asyncio.run(main()))

"""
calabi-lab command line

    calabi-lab verify | cal --hamiltonian NAME | grid | seq | chart-check | fold | shrink

Every LabConfig key is also a flag (`grid_res` -> `--grid-res`); flags beat
the config file, which beats the environment and the defaults.

Exit codes: 0 success, 1 invariant failure or lab error, 2 configuration error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pydantic

from calabi_lab.cli.commands import cal, chart_check, fold, grid, seq, shrink, verify
from calabi_lab.config import LabConfig
from calabi_lab.utils.exceptions import CalabiLabException, ConfigurationError, ValidationError
from calabi_lab.utils.logging import configure_logging, get_logger

logger = get_logger(__name__)

COMMANDS = (verify, cal, grid, seq, chart_check, fold, shrink)

# flags whose name differs from the config key
FLAG_ALIASES = {"lambda_kinds": "--lambda"}


def _config_flags() -> argparse.ArgumentParser:
    """A parent parser with one flag per LabConfig field"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="Flat key = value config file (default: lab.conf if present)")
    for name, field in LabConfig.model_fields.items():
        flag = FLAG_ALIASES.get(name, "--" + name.replace("_", "-"))
        help_text = field.description or f"override {name} (default: {field.default})"
        if field.annotation is bool:
            parser.add_argument(flag, dest=name, action="store_true", default=argparse.SUPPRESS, help=help_text)
        else:
            parser.add_argument(flag, dest=name, default=argparse.SUPPRESS, help=help_text)
    return parser


def build_parser() -> argparse.ArgumentParser:
    flags = _config_flags()
    parser = argparse.ArgumentParser(
        prog="calabi-lab",
        description="Numerical laboratory for the Calabi invariant of compactly supported Hamiltonian diffeomorphisms",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers, [flags])
    return parser


def load_config(args: argparse.Namespace) -> LabConfig:
    """
    Merge defaults, environment, the config file and flags

    Raises:
        ConfigurationError: missing file, unknown key or invalid value
    """
    overrides = {name: value for name, value in vars(args).items() if name in LabConfig.model_fields}
    env_file = args.config or "lab.conf"
    if args.config and not Path(args.config).is_file():
        raise ConfigurationError(f"Config file not found: {args.config}")
    try:
        return LabConfig(_env_file=env_file, **overrides)
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigurationError as e:
        configure_logging()
        logger.error("Configuration error", error=str(e))
        sys.stderr.write(f"configuration error: {e}\n")
        return 2

    configure_logging(config)
    logger.info("Run started", command=args.command, dim=config.dim, environment=config.environment)
    try:
        status = args.handler(args, config)
    except (ValidationError, ConfigurationError) as e:
        logger.warning("Invalid input", command=args.command, error=str(e))
        sys.stderr.write(f"invalid input: {e}\n")
        return 2
    except pydantic.ValidationError as e:
        logger.warning("Invalid input", command=args.command, error=str(e))
        sys.stderr.write(f"invalid input: {e}\n")
        return 2
    except CalabiLabException as e:
        logger.error("Lab error", command=args.command, error_type=type(e).__name__, error=str(e))
        sys.stderr.write(f"error: {e}\n")
        return 1

    logger.info("Run finished", command=args.command, status=status)
    return status


# Run the lab (for development)
if __name__ == "__main__":
    sys.exit(main())

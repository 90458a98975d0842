"""
Командная строка gsa: подкоманды ingest, synth, attack, evaluate, diagnose, trace, sweep.
Результат печатается в stdout одним JSON-объектом; ошибки печатаются как JSON с кодом и exit 2
(ошибка ввода/конфигурации) или 1 (внутренняя ошибка).
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .commands import COMMANDS
from .config import default_output_dir
from .exceptions import ConfigError, GsAttackError
from .services.report_service import dumps, error_payload

from log import RUN_LOG_NAME, get_logger, reset_logging, setup_logging

logger = get_logger("gsattack.cli")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


class ArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора аргументов превращаются в ConfigError вместо sys.exit."""

    def error(self, message):
        raise ConfigError(message, prog=self.prog)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gsa", description="Graph structure poisoning by gradient saliency")
    parser.add_argument("--out", default=None, help="каталог запуска (по умолчанию GSATTACK_OUTPUT_DIR или runs/)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="без прогресс-баров и логов в консоль")
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    sub.required = True
    for command in COMMANDS:
        cmd_parser = sub.add_parser(command.name, help=command.help)
        command.add_arguments(cmd_parser)
        cmd_parser.set_defaults(handler=command.handler)
    return parser


def _print(payload) -> None:
    sys.stdout.write(dumps(payload) + "\n")
    sys.stdout.flush()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        _print(error_payload(e))
        return EXIT_USAGE

    if args.seed < 0:
        _print(error_payload(ConfigError("seed must be non-negative", seed=args.seed)))
        return EXIT_USAGE
    out_dir = Path(args.out) if args.out else default_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(
        level=getattr(logging, args.log_level),
        log_file=RUN_LOG_NAME,
        logs_dir=out_dir,
        console=not args.quiet,
    )
    try:
        logger.info("gsa %s started, out=%s", args.command, out_dir)
        result = args.handler(args, out_dir)
        logger.info("gsa %s finished", args.command)
        _print(result)
        return EXIT_OK
    except GsAttackError as e:
        logger.error("%s: %s", e.code, e.message)
        _print(error_payload(e))
        return EXIT_USAGE
    except ValidationError as e:
        logger.error("invalid configuration: %s", e)
        _print({"error": "config_error", "message": "invalid configuration", "details": json.loads(e.json(include_url=False))})
        return EXIT_USAGE
    except Exception as e:
        logger.exception("unexpected error in gsa %s", args.command)
        _print(error_payload(e))
        return EXIT_INTERNAL
    finally:
        reset_logging()


if __name__ == "__main__":
    sys.exit(main())

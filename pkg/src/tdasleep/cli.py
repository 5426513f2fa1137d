"""Command-line entry point.

    tdasleep extract --data-dir DATA --output-dir OUT [--config run.ini] [--workers 8]
    tdasleep constants --diagram-dir DGMS --output constants.ini
    tdasleep residual-report --diagram-dir DGMS [--format text]
    tdasleep folds --data-dir DATA

Every config key can be given as a flag (``sqi_threshold`` -> ``--sqi-threshold``);
flags win over the config file. Exit codes: 0 success, 2 input error,
3 config error, 4 internal error. Errors are reported on stderr as one JSON
object.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import pipeline
from .config import PipelineConfig
from .errors import ConfigError, InputError

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file with a [pipeline] section")
    for f in fields(PipelineConfig):
        typ = {"float": float, "int": int}.get(f.type, str)
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdasleep", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="feature matrix and run manifest")
    _add_config_flags(p)

    p = sub.add_parser("constants", help="estimate HEPC scales and SP-FAPC domains")
    _add_config_flags(p)
    p.add_argument("--output", required=True, help="constants file to write")

    p = sub.add_parser("residual-report", help="mean approximation residual per source")
    _add_config_flags(p)
    p.add_argument("--format", choices=("csv", "text"), default="csv", dest="report_format")
    p.add_argument("--output", help="write the table here instead of stdout")

    p = sub.add_parser("folds", help="age/sex-stratified subject folds")
    _add_config_flags(p)
    p.add_argument("--output", help="write the table here instead of stdout")
    return parser


def resolve_config(args) -> PipelineConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    if args.config:
        return PipelineConfig.read(args.config, **overrides)
    return PipelineConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})


def _emit(text, output):
    if output:
        pipeline.atomic_write(Path(output), text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = resolve_config(args)
    if args.command == "extract":
        m = pipeline.extract(config)
        print(json.dumps({"rows": m["n_rows"], "output": str(Path(config.output_dir)
                                                              / m["feature_file"])}))
    elif args.command == "constants":
        pipeline.constants(config, args.output)
    elif args.command == "residual-report":
        _emit(pipeline.residual_report(config, args.report_format), args.output)
    elif args.command == "folds":
        _emit(pipeline.folds_table(config), args.output)
    return EXIT_OK


def _fail(code, kind, message) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        return run(argv)
    except _ArgumentError as exc:
        return _fail(EXIT_CONFIG, "ArgumentError", str(exc))
    except InputError as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        return _fail(EXIT_INTERNAL, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())

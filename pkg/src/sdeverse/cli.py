"""Command-line front end.

Four subcommands: `recover` runs the benchmark, `export-stream` writes
training records, `score` compares two sample-set files, and
`validate-spec` checks a system-spec JSON document. Exit codes: 0 on
success, 1 on configuration or input errors, 2 when a recovery run had
more per-system failures than --fail-threshold allows.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import SdeverseError
from .harness import (FORECASTER_IDS, ExperimentConfig, config_from_dict,
                      export_training_stream, run_recovery, score_external)
from .systems import spec_from_json, validate_spec


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract reserves 2
    # for partial failures, so route parse errors through exit code 1
    def error(self, message):
        raise _CliError(message)


_CONFIG_FLAGS = (
    # (flag, config key, type)
    ("--seed", "root_seed", int),
    ("--systems", "n_systems", int),
    ("--level", "level", int),
    ("--features", "n_features", int),
    ("--targets", "n_targets", int),
    ("--history-steps", "n_history_steps", int),
    ("--t-in", "t_in", float),
    ("--horizon", "n_horizon_steps", int),
    ("--t-out", "t_out", float),
    ("--oracle-paths", "n_oracle_paths", int),
    ("--forecast-paths", "n_forecast_paths", int),
    ("--out", "output_dir", str),
    ("--threads", "thread_count", int),
)


def _add_config_flags(parser: _Parser, skip=()) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file of config fields; explicit flags win")
    for flag, key, kind in _CONFIG_FLAGS:
        if flag not in skip:
            parser.add_argument(flag, dest=key, type=kind, default=None)
    parser.add_argument("--forecasters", default=None,
                        help="comma-separated subset of: "
                             + ",".join(FORECASTER_IDS))


def _build_config(args) -> ExperimentConfig:
    doc = {}
    if args.config is not None:
        try:
            with open(args.config) as f:
                doc = json.load(f)
        except OSError as exc:
            raise _CliError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise _CliError(f"config file is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise _CliError("config file must hold a JSON object")
    for _, key, _kind in _CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if args.forecasters is not None:
        doc["forecasters"] = [s.strip() for s in args.forecasters.split(",")
                              if s.strip()]
    return config_from_dict(doc)


def _cmd_recover(args) -> int:
    config = _build_config(args)
    result = run_recovery(config, strict=args.strict)
    print(f"scored {result.n_scored} of {config.n_systems} systems "
          f"({result.n_failed} failed); tables in {result.output_dir}")
    for failure in result.failures:
        print(f"  failed {failure['system_id']} at {failure['stage']}: "
              f"{failure['error_type']}: {failure['message']}", file=sys.stderr)
    if result.n_failed > args.fail_threshold:
        return 2
    return 0


def _cmd_export_stream(args) -> int:
    config = _build_config(args)
    count = export_training_stream(config, args.records, args.sink)
    print(f"wrote {count} records to {args.sink}")
    return 0


def _cmd_score(args) -> int:
    report = score_external(args.forecast, args.oracle, args.targets)
    writer = sys.stdout
    writer.write("horizon,energy,marginal_energy,crps_sum\n")
    for k in range(len(report.per_horizon_energy)):
        writer.write(f"{k + 1},{float(report.per_horizon_energy[k])!r},"
                     f"{float(report.per_horizon_marginal_energy[k])!r},"
                     f"{float(report.per_horizon_crps_sum[k])!r}\n")
    writer.write(f"avg,{float(report.averages[0])!r},"
                 f"{float(report.averages[1])!r},"
                 f"{float(report.averages[2])!r}\n")
    return 0


def _cmd_validate_spec(args) -> int:
    try:
        text = Path(args.spec).read_text()
    except OSError as exc:
        raise _CliError(f"cannot read spec file: {exc}")
    spec = spec_from_json(text)
    violations = validate_spec(spec)
    if violations:
        for v in violations:
            print(v)
        return 1
    print("spec is valid")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sdeverse",
                     description="procedural SDE benchmark tools")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_recover = sub.add_parser("recover", help="run the recovery benchmark")
    _add_config_flags(p_recover)
    p_recover.add_argument("--strict", action="store_true",
                           help="exclude fallback fits from summary aggregates")
    p_recover.add_argument("--fail-threshold", type=int, default=0,
                           help="exit 2 when more systems than this fail")
    p_recover.set_defaults(func=_cmd_recover)

    p_export = sub.add_parser("export-stream", help="write training records")
    _add_config_flags(p_export, skip=("--out",))
    p_export.add_argument("--records", type=int, required=True)
    p_export.add_argument("--out", dest="sink", required=True, metavar="FILE",
                          help="output file for the record stream")
    p_export.set_defaults(func=_cmd_export_stream)

    p_score = sub.add_parser("score", help="score a forecast file")
    p_score.add_argument("--forecast", required=True, metavar="FILE")
    p_score.add_argument("--oracle", required=True, metavar="FILE")
    p_score.add_argument("--targets", type=int, required=True)
    p_score.set_defaults(func=_cmd_score)

    p_validate = sub.add_parser("validate-spec", help="check a spec JSON file")
    p_validate.add_argument("--spec", required=True, metavar="FILE")
    p_validate.set_defaults(func=_cmd_validate_spec)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SdeverseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

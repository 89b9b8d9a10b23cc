"""
Command-line front end: ``qestlab <experiment> [--config PATH] [--key value ...]``.

Exit codes: 0 success, 2 configuration or usage error, 3 precondition
violation, 4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Any

from . import estimation
from .errors import ContractViolation, NumericalFailure, PreconditionError
from .experiments import EXPERIMENTS, Experiment, Key, Table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

DEFAULT_SEED = estimation.DEFAULT_SEED
FORMATS = ("csv", "json")
COMMON_KEYS = ("experiment", "seed", "format", "output")


class ConfigError(ValueError):
    pass


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _coerce(name: str, spec: Key, value: Any) -> Any:
    if value is None:
        if spec.default is None:
            return None
        raise ConfigError(f"{name}: null is not allowed")
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected {spec.type.__name__}, got a boolean")
    if spec.type is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{name}: must be finite")
    elif spec.type is int:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
    elif spec.type is str:
        if not isinstance(value, (str, int)):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        value = str(value)
    if spec.minimum is not None and value < spec.minimum:
        raise ConfigError(f"{name}: must be >= {spec.minimum}, got {value}")
    return value


def _parse_flag(spec: Key):
    def parse(text: str):
        if spec.type is str:
            return text
        try:
            return spec.type(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {spec.type.__name__} value: {text!r}")

    return parse


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a single JSON object")
    for k, v in data.items():
        if isinstance(v, (dict, list)):
            raise ConfigError(f"{k}: config must be flat, got a nested value")
    return data


def resolve_config(exp: Experiment, file_cfg: dict, overrides: dict) -> dict:
    """Merge defaults, file keys and flag overrides, rejecting unknown keys."""
    unknown = sorted(set(file_cfg) - set(exp.keys) - set(COMMON_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys for {exp.name}: {', '.join(unknown)}")
    if file_cfg.get("experiment", exp.name) != exp.name:
        raise ConfigError(
            f"config is for experiment {file_cfg['experiment']!r}, not {exp.name!r}"
        )
    merged = {**file_cfg, **{k: v for k, v in overrides.items() if v is not None}}

    cfg: dict[str, Any] = {"experiment": exp.name}
    for key, spec in exp.keys.items():
        cfg[key] = _coerce(key, spec, merged.get(key, spec.default))

    seed = merged.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    cfg["seed"] = seed
    fmt = merged.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    cfg["format"] = fmt
    return cfg


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalar
        return _jsonable(v.item())
    return v


def render(table: Table, cfg: dict) -> str:
    """Serialize a table. Deterministic: no timestamps, no host details."""
    embedded = {k: v for k, v in cfg.items() if k != "output"}
    if cfg["format"] == "json":
        doc = {
            "config": _jsonable(embedded),
            "summary": _jsonable(table.summary),
            "columns": table.columns,
            "rows": _jsonable(table.rows),
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    out = io.StringIO()
    dump = lambda obj: json.dumps(_jsonable(obj), sort_keys=True, allow_nan=False)
    out.write(f"# config: {dump(embedded)}\n")
    out.write(f"# summary: {dump(table.summary)}\n")
    out.write(",".join(table.columns) + "\n")
    for row in table.rows:
        out.write(",".join(_cell(v.item() if hasattr(v, "item") else v) for v in row) + "\n")
    return out.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qestlab", description="Multi-parameter Hamiltonian estimation experiments."
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for exp in EXPERIMENTS.values():
        p = sub.add_parser(exp.name, help=exp.help, description=exp.help)
        p.add_argument("--config", metavar="PATH", help="flat JSON config; flags override it")
        p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
        p.add_argument("--output", metavar="PATH", help="write here instead of stdout")
        p.add_argument("--format", choices=FORMATS, help="output format (default csv)")
        for key, spec in exp.keys.items():
            default = "unset" if spec.default is None else spec.default
            p.add_argument(
                _flag(key), dest=f"key_{key}", type=_parse_flag(spec), metavar="VALUE",
                help=f"{spec.help} (default {default})",
            )
    return parser


def _check_threads_env() -> None:
    try:
        estimation.worker_count()
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    exp = EXPERIMENTS[args.experiment]
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("key_")}
        overrides.update(seed=args.seed, format=args.format)
        cfg = resolve_config(exp, file_cfg, overrides)
        output = args.output or file_cfg.get("output")
        _check_threads_env()
    except ConfigError as exc:
        print(f"qestlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = exp.run(cfg)
        text = render(table, cfg)
    except (ContractViolation, PreconditionError) as exc:
        print(f"qestlab: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NumericalFailure, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"qestlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if output:
        try:
            with open(output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"qestlab: cannot write {output}: {exc.strerror}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

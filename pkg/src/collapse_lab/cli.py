"""Reproducible batch execution: config parsing, dispatch, report emission.

Config documents are flat `key = value` lines with dotted sections; values
are JSON scalars (or arrays).  Identical configs produce byte-identical
report files regardless of worker count.

Exit codes: 0 success, 2 unknown experiment or config error, 3 numerical
failure, 4 IO failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

from .engine import CollapseParams
from .errors import CollapseLabError, ConfigError, EngineInvariantError, InputError
from .experiments import (
    LHV_MODELS,
    OrderInvarianceConfig,
    SettingsQuartet,
    born_convergence_experiment,
    collapse_trace_experiment,
    conservation_experiment,
    lhv_chsh_run,
    no_signaling_report,
    order_invariance_report,
    quantum_chsh_run,
)
from .foliation import two_measurement_schedule
from .reporting import ExperimentReport, canonical_config_text, canonical_fingerprint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass(frozen=True)
class _KeySpec:
    kind: str  # int | float | str | bool | float_list
    default: object
    choices: tuple | None = None


_OUTPUT_KEYS = {
    "seed": _KeySpec("int", 0),
    "output.path": _KeySpec("str", None),
    "output.format": _KeySpec("str", "json", choices=("json", "csv")),
}

_QUARTET_KEYS = {
    "chsh.a": _KeySpec("float", 0.0),
    "chsh.a_prime": _KeySpec("float", math.pi / 2),
    "chsh.b": _KeySpec("float", math.pi / 4),
    "chsh.b_prime": _KeySpec("float", 3 * math.pi / 4),
}

SCHEMAS: dict[str, dict[str, _KeySpec]] = {
    "born": {
        **_OUTPUT_KEYS,
        "runs": _KeySpec("int", 10000),
        "born.weights": _KeySpec("float_list", [0.1, 0.25, 0.5, 0.75, 0.9]),
        "engine.delta": _KeySpec("float", 0.01),
    },
    "chsh-quantum": {
        **_OUTPUT_KEYS,
        **_QUARTET_KEYS,
        "runs": _KeySpec("int", 100000),
        "chsh.preparation": _KeySpec("str", "tsirelson", choices=("tsirelson", "singlet", "product")),
        "chsh.order": _KeySpec("str", "ab", choices=("ab", "ba")),
        "engine.delta": _KeySpec("float", 0.01),
    },
    "chsh-lhv": {
        **_OUTPUT_KEYS,
        **_QUARTET_KEYS,
        "runs": _KeySpec("int", 100000),
        "lhv.model": _KeySpec("str", "sign-cos", choices=tuple(sorted(LHV_MODELS))),
    },
    "nosignal": {
        **_OUTPUT_KEYS,
        **_QUARTET_KEYS,
        "runs": _KeySpec("int", 100000),
        "chsh.preparation": _KeySpec("str", "tsirelson", choices=("tsirelson", "singlet", "product")),
        "engine.delta": _KeySpec("float", 0.01),
    },
    "order-invariance": {
        **_OUTPUT_KEYS,
        "runs": _KeySpec("int", 10000),
        "order.angle_a": _KeySpec("float", math.pi / 4),
        "order.angle_b": _KeySpec("float", math.pi / 4),
        "order.preparation": _KeySpec("str", "singlet", choices=("tsirelson", "singlet", "product")),
        "engine.delta": _KeySpec("float", 0.01),
    },
    "conservation": {
        **_OUTPUT_KEYS,
        "runs": _KeySpec("int", 10000),
        "conservation.reflectivity": _KeySpec("float", 0.5),
        "conservation.entangled": _KeySpec("bool", True),
        "engine.delta": _KeySpec("float", 0.01),
    },
    "collapse-trace": {
        **_OUTPUT_KEYS,
        "runs": _KeySpec("int", 10),
        "trace.w0": _KeySpec("float", 0.5),
        "engine.delta": _KeySpec("float", 0.01),
    },
}

EXPERIMENT_NAMES = tuple(sorted(SCHEMAS))


@dataclass(frozen=True)
class RunConfig:
    """A fully validated, fully defaulted experiment configuration."""

    experiment: str
    values: dict[str, object]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def runs(self) -> int:
        return self.values["runs"]

    @property
    def output_path(self) -> str | None:
        return self.values["output.path"]

    @property
    def output_format(self) -> str:
        return self.values["output.format"]

    def canonical_mapping(self) -> dict[str, object]:
        return {"experiment": self.experiment, **self.values}

    def canonical_text(self) -> str:
        return canonical_config_text(self.canonical_mapping())

    def fingerprint(self) -> str:
        return canonical_fingerprint(self.canonical_mapping())


def _coerce(key: str, spec: _KeySpec, raw: object) -> object:
    if spec.kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"key {key!r} expects an integer, got {raw!r}", key=key)
        return raw
    if spec.kind == "float":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"key {key!r} expects a number, got {raw!r}", key=key)
        return float(raw)
    if spec.kind == "bool":
        if not isinstance(raw, bool):
            raise ConfigError(f"key {key!r} expects true/false, got {raw!r}", key=key)
        return raw
    if spec.kind == "str":
        if raw is not None and not isinstance(raw, str):
            raise ConfigError(f"key {key!r} expects a string, got {raw!r}", key=key)
        if spec.choices and raw not in spec.choices:
            raise ConfigError(
                f"key {key!r} must be one of {list(spec.choices)}, got {raw!r}", key=key
            )
        return raw
    if spec.kind == "float_list":
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"key {key!r} expects a non-empty list of numbers", key=key)
        out = []
        for item in raw:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"key {key!r} expects numbers, found {item!r}", key=key)
            out.append(float(item))
        return out
    raise ConfigError(f"key {key!r} has unsupported kind {spec.kind!r}", key=key)


def config_from_mapping(mapping: Mapping[str, object]) -> RunConfig:
    """Validate a raw mapping: experiment known, keys known, types right."""
    if "experiment" not in mapping:
        raise ConfigError("missing required key 'experiment'", key="experiment")
    experiment = mapping["experiment"]
    if experiment not in SCHEMAS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {list(EXPERIMENT_NAMES)}",
            key="experiment",
        )
    schema = SCHEMAS[experiment]
    values: dict[str, object] = {}
    for key, raw in mapping.items():
        if key == "experiment":
            continue
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment!r}", key=key)
        values[key] = _coerce(key, schema[key], raw)
    for key, spec in schema.items():
        values.setdefault(key, spec.default)
    return RunConfig(experiment=experiment, values=values)


def parse_config(text: str) -> RunConfig:
    """Parse the documented flat key-value config format."""
    mapping: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=None)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key", key=None)
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key=key)
        try:
            mapping[key] = json.loads(raw_value)
        except json.JSONDecodeError:
            # bare strings are allowed for readability
            mapping[key] = raw_value
    return config_from_mapping(mapping)


def _quartet_from(values: Mapping[str, object]) -> SettingsQuartet:
    return SettingsQuartet(
        a=values["chsh.a"],
        a_prime=values["chsh.a_prime"],
        b=values["chsh.b"],
        b_prime=values["chsh.b_prime"],
    )


def dispatch(config: RunConfig, workers: int | None = None) -> ExperimentReport:
    """Run the configured experiment; identical configs give identical reports."""
    v = config.values
    name = config.experiment
    if name == "born":
        report = born_convergence_experiment(
            weights=v["born.weights"],
            n_runs=config.runs,
            delta=v["engine.delta"],
            seed=config.seed,
            workers=workers,
        )
    elif name == "chsh-quantum":
        report = quantum_chsh_run(
            quartet=_quartet_from(v),
            n_per_pair=config.runs,
            engine_params=CollapseParams(delta=v["engine.delta"]),
            seed=config.seed,
            preparation=v["chsh.preparation"],
            schedule=two_measurement_schedule(v["chsh.order"]),
            workers=workers,
        )
    elif name == "chsh-lhv":
        report = lhv_chsh_run(
            model=LHV_MODELS[v["lhv.model"]](),
            quartet=_quartet_from(v),
            n_per_pair=config.runs,
            seed=config.seed,
            model_name=v["lhv.model"],
        )
    elif name == "nosignal":
        report = no_signaling_report(
            quartet=_quartet_from(v),
            n_per_pair=config.runs,
            engine_params=CollapseParams(delta=v["engine.delta"]),
            seed=config.seed,
            preparation=v["chsh.preparation"],
            workers=workers,
        )
    elif name == "order-invariance":
        report = order_invariance_report(
            OrderInvarianceConfig(
                angle_a=v["order.angle_a"],
                angle_b=v["order.angle_b"],
                preparation=v["order.preparation"],
                delta=v["engine.delta"],
            ),
            n_runs=config.runs,
            seed=config.seed,
            workers=workers,
        )
    elif name == "conservation":
        report = conservation_experiment(
            n_runs=config.runs,
            reflectivity=v["conservation.reflectivity"],
            seed=config.seed,
            entangled=v["conservation.entangled"],
            delta=v["engine.delta"],
            workers=workers,
        )
    elif name == "collapse-trace":
        report = collapse_trace_experiment(
            w0=v["trace.w0"],
            n_runs=config.runs,
            delta=v["engine.delta"],
            seed=config.seed,
        )
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown experiment {name!r}", key="experiment")
    # The emitted fingerprint identifies the full run configuration.
    return replace(report, fingerprint=config.fingerprint())


def emit_report(report: ExperimentReport, fmt: str, path) -> Path:
    """Write the report in the documented byte-stable form."""
    if fmt == "json":
        text = report.to_json_text()
    elif fmt == "csv":
        text = report.to_counts_csv()
    else:
        raise ConfigError(f"unknown output format {fmt!r}", key="output.format")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    return target


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapse-lab",
        description="Stochastic-collapse experiments with reproducible reports.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENT_NAMES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=str, default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--runs", type=int, default=None, help="runs (per weight / setting pair)")
        p.add_argument("--out", type=str, default=None, help="output file path")
        p.add_argument("--format", type=str, default=None, choices=("json", "csv"))
        p.add_argument("--workers", type=int, default=None, help="ensemble worker cap")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        mapping: dict[str, object] = {}
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return EXIT_IO
            file_config = parse_config(text)
            if file_config.experiment != args.experiment:
                raise ConfigError(
                    f"config file names experiment {file_config.experiment!r} but "
                    f"{args.experiment!r} was requested",
                    key="experiment",
                )
            mapping.update(file_config.canonical_mapping())
        mapping["experiment"] = args.experiment
        if args.seed is not None:
            mapping["seed"] = args.seed
        if args.runs is not None:
            mapping["runs"] = args.runs
        if args.out is not None:
            mapping["output.path"] = args.out
        if args.format is not None:
            mapping["output.format"] = args.format
        config = config_from_mapping(mapping)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = dispatch(config, workers=args.workers)
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineInvariantError, InputError, CollapseLabError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    try:
        if config.output_path is None:
            sys.stdout.write(report.to_json_text() if config.output_format == "json" else report.to_counts_csv())
        else:
            emit_report(report, config.output_format, config.output_path)
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

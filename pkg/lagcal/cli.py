#!/usr/bin/env python3
"""
Scenario runner for lagcal.

Loads declarative JSON scenario configs, runs the named verification
scenarios and writes reports plus CSV series for external plotting.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import sympy as sp
from joblib import Parallel, delayed

from .core.lag_mesh import LagMesh, ScalarField, export_scalar_field
from .core.models import AmbientModel, load_model
from .scenarios import SCENARIOS, VERB_DEFAULTS, check_model, expression_variables
from .utils.config import DEFAULTS, SCENARIO_VERBS, merge_tolerances
from .utils.errors import ConfigError, ExpressionError, LagCalError, PreconditionError
from .utils.expressions import parse_expression
from .utils.logging_config import PerformanceLogger, get_logger, log_performance, set_console_level

logger = get_logger("lagcal.cli")

CONFIG_KEYS = (
    "name", "description", "verb", "model", "resolution", "steps", "seed",
    "expressions", "parameters", "tolerances", "output_dir",
)
MANIFEST_KEYS = ("name", "scenarios", "output_dir")
CSV_FLOAT_FORMAT = "%.12e"

_MISSING = object()


def _positive_int(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < 1:
        raise ConfigError(f"'{key}' must be a positive integer, got {value!r}")
    return int(value)


def _plain(value: Any) -> Any:
    """JSON-ready copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _dumps(data: Any) -> str:
    return json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"


@dataclass
class ScenarioConfig:
    """One parsed scenario.

    Explicit ``expressions``/``parameters`` win over the verb defaults; the
    parsed expressions and the tolerance table are built at construction so
    that a bad config fails before any computation.
    """

    name: str
    verb: str
    model: str
    resolution: int
    steps: int
    seed: int = DEFAULTS["seed"]
    expressions: Dict[str, str] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    tolerance_overrides: Dict[str, float] = field(default_factory=dict)
    output_dir: Optional[str] = None
    description: str = ""
    tolerances: Dict[str, float] = field(init=False, repr=False)
    _parsed: Dict[str, sp.Expr] = field(init=False, repr=False, compare=False)
    _ambient: Optional[AmbientModel] = field(init=False, default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.verb not in SCENARIO_VERBS:
            raise ConfigError(f"unknown verb '{self.verb}'", {"verbs": list(SCENARIO_VERBS)})
        self.resolution = _positive_int(self.resolution, "resolution")
        self.steps = _positive_int(self.steps, "steps")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"'seed' must be a non-negative integer, got {self.seed!r}")
        self.tolerances = merge_tolerances(self.tolerance_overrides)

        model = self.ambient
        check_model(self.verb, model)
        variables = expression_variables(model)
        self._parsed = {}
        for key, text in self.all_expressions.items():
            self._parsed[key] = parse_expression(text, variables)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Optional[Path] = None) -> "ScenarioConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("scenario config must be a JSON object")
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}", {"known": list(CONFIG_KEYS)})
        verb = data.get("verb")
        if verb not in SCENARIO_VERBS:
            raise ConfigError(f"unknown verb '{verb}'", {"verbs": list(SCENARIO_VERBS)})
        defaults = VERB_DEFAULTS[verb]

        model = str(data.get("model", defaults["model"]))
        if base_dir is not None and model.endswith(".json") and not Path(model).is_absolute():
            candidate = base_dir / model
            if candidate.is_file():
                model = str(candidate)

        for key in ("expressions", "parameters", "tolerances"):
            if not isinstance(data.get(key, {}), Mapping):
                raise ConfigError(f"'{key}' must be a JSON object")
        expressions = dict(data.get("expressions", {}))
        for key, text in expressions.items():
            if not isinstance(text, (str, int, float)) or isinstance(text, bool):
                raise ExpressionError(str(text), f"expression '{key}' must be a string or number")

        return cls(
            name=str(data.get("name", verb)),
            verb=verb,
            model=model,
            resolution=data.get("resolution", defaults.get("resolution", DEFAULTS["resolution"])),
            steps=data.get("steps", defaults.get("steps", DEFAULTS["flow_steps"])),
            seed=data.get("seed", DEFAULTS["seed"]),
            expressions=expressions,
            parameters=dict(data.get("parameters", {})),
            tolerance_overrides=dict(data.get("tolerances", {})),
            output_dir=data.get("output_dir"),
            description=str(data.get("description", "")),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScenarioConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"scenario config {path} not found")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario config {path} is not valid JSON: {exc}") from None
        config = cls.from_dict(data, base_dir=path.parent)
        logger.debug("loaded scenario %s from %s", config.name, path)
        return config

    def with_overrides(
        self,
        resolution: Optional[int] = None,
        tolerances: Optional[Mapping[str, float]] = None,
        seed: Optional[int] = None,
        output_dir: Optional[Union[str, Path]] = None,
    ) -> "ScenarioConfig":
        """Copy with command-line overrides applied on top of the config values."""
        changes: Dict[str, Any] = {}
        if resolution is not None:
            changes["resolution"] = resolution
        if seed is not None:
            changes["seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        if tolerances:
            changes["tolerance_overrides"] = {**self.tolerance_overrides, **tolerances}
        return replace(self, **changes) if changes else self

    @property
    def ambient(self) -> AmbientModel:
        if self._ambient is None:
            self._ambient = load_model(self.model)
        return self._ambient

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_ambient"] = None
        return state

    @property
    def all_expressions(self) -> Dict[str, Any]:
        return {**VERB_DEFAULTS[self.verb]["expressions"], **self.expressions}

    def has_expression(self, key: str, explicit: bool = False) -> bool:
        if explicit:
            return key in self.expressions
        return key in self._parsed

    def expression(self, key: str) -> sp.Expr:
        try:
            return self._parsed[key]
        except KeyError:
            raise ConfigError(f"scenario '{self.name}' needs expression '{key}'") from None

    def parameter(self, key: str, default: Any = _MISSING) -> Any:
        if key in self.parameters:
            return self.parameters[key]
        verb_defaults = VERB_DEFAULTS[self.verb]["parameters"]
        if key in verb_defaults:
            return verb_defaults[key]
        if default is _MISSING:
            raise ConfigError(f"scenario '{self.name}' needs parameter '{key}'")
        return default

    def to_dict(self) -> Dict[str, Any]:
        """Scenario echo; independent of where outputs are written."""
        return {
            "name": self.name,
            "verb": self.verb,
            "model": self.model,
            "resolution": self.resolution,
            "steps": self.steps,
            "seed": self.seed,
            "expressions": {k: str(v) for k, v in self.all_expressions.items()},
            "parameters": {**VERB_DEFAULTS[self.verb]["parameters"], **self.parameters},
            "tolerances": dict(self.tolerance_overrides),
        }


class ScenarioReport:
    """Values, residual checks and series produced by one scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.values: Dict[str, float] = {}
        self.residuals: Dict[str, float] = {}
        self.checks: Dict[str, Dict[str, Any]] = {}
        self.verdicts: Dict[str, str] = {}
        self.series: Dict[str, pd.DataFrame] = {}
        self.fields: Dict[str, tuple] = {}
        self.timing: Dict[str, float] = {}
        self.error: Optional[str] = None

    def add_value(self, name: str, value: float):
        self.values[name] = float(value)

    def add_check(self, name: str, residual: float, tolerance: str, mode: str = "max"):
        """Compare ``residual`` against the named tolerance.

        ``mode="max"`` passes when residual <= limit, ``mode="min"`` when
        residual >= limit. NaN never passes.
        """
        if name in self.checks:
            raise PreconditionError(f"check '{name}' recorded twice")
        if mode not in ("max", "min"):
            raise PreconditionError(f"unknown check mode '{mode}'")
        if tolerance not in self.config.tolerances:
            raise ConfigError(f"unknown tolerance '{tolerance}'")
        limit = self.config.tolerances[tolerance]
        residual = float(residual)
        passed = residual <= limit if mode == "max" else residual >= limit
        self.residuals[name] = residual
        self.checks[name] = {"tolerance": tolerance, "limit": limit, "mode": mode}
        self.verdicts[name] = "pass" if passed else "fail"

    def add_series(self, name: str, frame: pd.DataFrame):
        self.series[name] = frame

    def add_scalar_field(self, name: str, mesh: LagMesh, values: Union[ScalarField, np.ndarray]):
        self.fields[name] = (mesh, values)

    def fail(self, exc: BaseException):
        self.error = f"{type(exc).__name__}: {exc}"
        self.verdicts["error"] = "fail"

    @property
    def all_passed(self) -> bool:
        return self.error is None and all(v == "pass" for v in self.verdicts.values())

    def values_section(self) -> Dict[str, Any]:
        """The deterministic part of the report."""
        return {
            "scenario": self.config.to_dict(),
            "values": dict(self.values),
            "residuals": dict(self.residuals),
            "checks": {k: dict(v) for k, v in self.checks.items()},
            "verdicts": dict(self.verdicts),
            "passed": self.all_passed,
            "error": self.error,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = self.values_section()
        data["timing"] = dict(self.timing)
        data["series"] = sorted(self.series)
        data["fields"] = sorted(self.fields)
        return _plain(data)

    def write(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "values.json").write_text(_dumps(self.values_section()))
        (directory / "report.json").write_text(_dumps(self.to_dict()))
        for name, frame in self.series.items():
            frame.to_csv(directory / f"{name}.csv", index=False, float_format=CSV_FLOAT_FORMAT)
        for name, (mesh, values) in self.fields.items():
            export_scalar_field(mesh, values, directory / f"{name}.csv", name=name)
        logger.debug("wrote report for %s to %s", self.config.name, directory)
        return directory


def run_scenario(config: ScenarioConfig, write: bool = True) -> ScenarioReport:
    """Run one scenario; failures become an ``error`` verdict, never an exception."""
    report = ScenarioReport(config)
    logger.info(f"▶️ Scenario {config.name} ({config.verb}, model {config.model}, N={config.resolution})")
    with PerformanceLogger(logger, f"scenario.{config.name}", verb=config.verb) as perf:
        try:
            SCENARIOS[config.verb](config, report)
        except Exception as exc:
            logger.exception(f"Scenario {config.name} raised: {exc}")
            report.fail(exc)
    report.timing["seconds"] = perf.duration

    for name, verdict in report.verdicts.items():
        if name in report.checks:
            check = report.checks[name]
            relation = "<=" if check["mode"] == "max" else ">="
            logger.info(f"{'✅' if verdict == 'pass' else '❌'} {config.name}/{name}: "
                        f"{report.residuals[name]:.3e} {relation} {check['limit']:.1e} ({check['tolerance']})")
        else:
            logger.info(f"❌ {config.name}/{name}: {report.error}")

    if write and config.output_dir:
        report.write(config.output_dir)
    logger.log_scenario(report.to_dict())
    return report


def _run_isolated(config: ScenarioConfig) -> Dict[str, Any]:
    return run_scenario(config).to_dict()


@dataclass
class SuiteReport:
    """Aggregate of a manifest run; passes iff every scenario passes."""

    name: str
    reports: List[Dict[str, Any]]
    output_dir: Optional[str] = None

    @property
    def all_passed(self) -> bool:
        return all(r["passed"] for r in self.reports)

    def summary(self) -> pd.DataFrame:
        columns = ["name", "verb", "passed", "checks", "failed", "seconds", "error"]
        rows = [{
            "name": r["scenario"]["name"],
            "verb": r["scenario"]["verb"],
            "passed": r["passed"],
            "checks": len(r["checks"]),
            "failed": sorted(k for k, v in r["verdicts"].items() if v != "pass"),
            "seconds": r["timing"].get("seconds", float("nan")),
            "error": r["error"] or "",
        } for r in self.reports]
        frame = pd.DataFrame(rows, columns=columns)
        frame["failed"] = frame["failed"].map(lambda names: ";".join(names))
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.all_passed,
            "total": len(self.reports),
            "failed": [r["scenario"]["name"] for r in self.reports if not r["passed"]],
            "scenarios": self.reports,
        }

    def write(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.summary().to_csv(directory / "summary.csv", index=False, float_format="%.6f")
        (directory / "suite.json").write_text(_dumps(self.to_dict()))
        return directory


def load_manifest(manifest: Union[str, Path, Mapping, Sequence]) -> tuple:
    """Return (name, configs, output_dir) for a manifest file, object or list."""
    base_dir = None
    if isinstance(manifest, (str, Path)):
        path = Path(manifest)
        if not path.is_file():
            raise ConfigError(f"manifest {path} not found")
        try:
            manifest = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from None
        base_dir = path.parent
        default_name = path.stem
    else:
        default_name = "suite"
    if isinstance(manifest, Sequence) and not isinstance(manifest, str):
        manifest = {"scenarios": list(manifest)}
    if not isinstance(manifest, Mapping):
        raise ConfigError("manifest must be a JSON object or list")
    unknown = sorted(set(manifest) - set(MANIFEST_KEYS))
    if unknown:
        raise ConfigError(f"unknown manifest keys {unknown}", {"known": list(MANIFEST_KEYS)})

    configs = []
    for entry in manifest.get("scenarios", []):
        if isinstance(entry, ScenarioConfig):
            configs.append(entry)
        elif isinstance(entry, Mapping):
            configs.append(ScenarioConfig.from_dict(entry, base_dir=base_dir))
        elif isinstance(entry, (str, Path)):
            entry_path = Path(entry)
            if base_dir is not None and not entry_path.is_absolute():
                entry_path = base_dir / entry_path
            configs.append(ScenarioConfig.from_file(entry_path))
        else:
            raise ConfigError(f"manifest entry {entry!r} is neither a path nor a config object")
    return str(manifest.get("name", default_name)), configs, manifest.get("output_dir")


@log_performance("lagcal.run_suite")
def run_suite(
    manifest: Union[str, Path, Mapping, Sequence],
    parallelism: int = 1,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SuiteReport:
    """Run every scenario of a manifest with at most ``parallelism`` workers.

    Each scenario writes into its own directory, by default
    ``<suite output>/<scenario name>``; two scenarios sharing a directory is
    a config error.
    """
    overrides = dict(overrides or {})
    name, configs, manifest_output = load_manifest(manifest)
    root = Path(overrides.pop("output_dir", None) or manifest_output or Path("output") / name)

    placed = []
    seen: Dict[str, str] = {}
    for config in configs:
        config = config.with_overrides(**overrides)
        if not config.output_dir:
            config = replace(config, output_dir=str(root / config.name))
        key = str(Path(config.output_dir).resolve())
        if key in seen:
            raise ConfigError(f"scenarios '{seen[key]}' and '{config.name}' share output directory {config.output_dir}")
        seen[key] = config.name
        placed.append(config)

    if parallelism < 1:
        raise ConfigError(f"parallelism must be at least 1, got {parallelism}")
    logger.log_system_event("suite_start", name, scenarios=len(placed), parallelism=parallelism)
    logger.info(f"🚀 Suite {name}: {len(placed)} scenarios, parallelism {parallelism}")

    reports = Parallel(n_jobs=parallelism)(delayed(_run_isolated)(config) for config in placed) if placed else []
    suite = SuiteReport(name=name, reports=list(reports), output_dir=str(root))
    suite.write(root)

    passed = sum(r["passed"] for r in suite.reports)
    logger.info(f"📊 Suite {name}: {passed}/{len(suite.reports)} scenarios passed")
    logger.log_system_event("suite_end", name, passed=passed, total=len(suite.reports))
    return suite


def _parse_tolerances(items: Optional[Sequence[str]]) -> Dict[str, float]:
    overrides = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ConfigError(f"tolerance override '{item}' is not NAME=VALUE")
        try:
            overrides[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"tolerance override '{item}' has a non-numeric value") from None
    merge_tolerances(overrides)
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagcal",
        description="Run lagcal verification scenarios from JSON configs",
    )
    parser.add_argument("config", nargs="?", help="Scenario config JSON file")
    parser.add_argument("--manifest", help="Manifest JSON listing scenario configs")
    parser.add_argument("--output-dir", help="Directory for reports and CSV series")
    parser.add_argument("--resolution", type=int, help="Override the mesh resolution N")
    parser.add_argument("--tolerance", action="append", metavar="NAME=VALUE",
                        help="Override a named tolerance (repeatable)")
    parser.add_argument("--seed", type=int, help="Override the random seed")
    parser.add_argument("--parallelism", type=int, default=1, help="Concurrent scenarios in a manifest run")
    parser.add_argument("--verbose", action="store_true", help="Show DEBUG output on the console")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line entry point; returns 0 iff every verdict passes, 2 on bad input."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if bool(args.config) == bool(args.manifest):
        parser.error("give exactly one of a config path or --manifest")
    if args.verbose:
        set_console_level(logging.DEBUG)

    try:
        overrides: Dict[str, Any] = {"tolerances": _parse_tolerances(args.tolerance)}
        if args.resolution is not None:
            overrides["resolution"] = args.resolution
        if args.seed is not None:
            overrides["seed"] = args.seed

        if args.manifest:
            if args.output_dir:
                overrides["output_dir"] = args.output_dir
            suite = run_suite(args.manifest, parallelism=args.parallelism, overrides=overrides)
            for row in suite.summary().itertuples():
                print(f"{'✅' if row.passed else '❌'} {row.name} ({row.verb}): {row.checks} checks, {row.seconds:.2f}s"
                      + (f" failed: {row.failed}" if row.failed else ""))
            print(f"📁 Outputs in {suite.output_dir}")
            return 0 if suite.all_passed else 1

        config = ScenarioConfig.from_file(args.config).with_overrides(**overrides)
        if args.output_dir:
            config = replace(config, output_dir=args.output_dir)
        elif not config.output_dir:
            config = replace(config, output_dir=str(Path("output") / config.name))
        report = run_scenario(config)
    except (ConfigError, ExpressionError) as exc:
        logger.error(f"❌ {exc}")
        return 2
    except LagCalError as exc:
        logger.exception(f"❌ {exc}")
        return 1

    for name, verdict in report.verdicts.items():
        icon = "✅" if verdict == "pass" else "❌"
        print(f"{icon} {name}: {report.residuals.get(name, float('nan')):.3e}")
    if report.error:
        print(f"❌ {report.error}")
    print(f"📁 Outputs in {config.output_dir}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())

"""
Experiment configuration: TOML file with four sections, dotted overrides.

Grammar (every key optional, defaults shown by ``ftdpl validate-config``)::

    [experiment]   T, b, repeats, regret_stride, burn_in, cross_sections,
                   ident_periods, output_dir, master_seed
    [scenario]     D, k, A, v, s0, l0, t0, sensor_first, sensor_last,
                   sensor_count, dt, noise_std, data_seed, test_size,
                   test_seed, box_lower, box_upper, threshold
    [algorithm]    eta, lam, y_max, M, K, normalized_perturbation
    [solver]       population_size, generations, mutation_rate,
                   crossover_rate, restarts, warm_start

``eta``, ``M`` and ``K`` also accept ``"auto"`` (``T**(-2/3)``,
``ceil(T**(2/9))``, ``ceil(log2(T)/9)``). Negative ``data_seed`` and
``test_seed`` derive the seed from ``master_seed``. An override ``key=value``
without a section addresses ``[experiment]``; values are parsed as TOML
literals, falling back to a bare string.
"""

from __future__ import annotations

import sys
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "AlgorithmConfig",
    "SolverConfig",
    "ExperimentConfig",
    "load_config",
    "apply_overrides",
]

SECTIONS = ("experiment", "scenario", "algorithm", "solver")


class ConfigError(ValueError):
    """Invalid configuration file, key or value."""


@dataclass(frozen=True)
class ScenarioConfig:
    D: float = 2430.0
    k: float = 0.0
    A: float = 60.0
    v: float = 80.0
    s0: float = 1_300_000.0
    l0: float = -22106.0
    t0: float = -215.0
    sensor_first: float = -14216.3
    sensor_last: float = 22009.0
    sensor_count: int = 30
    dt: float = 0.8
    noise_std: float = 0.5
    data_seed: int = -1
    test_size: int = 200
    test_seed: int = -1
    box_lower: list = field(default_factory=lambda: [1e5, -4e4, -400.0])
    box_upper: list = field(default_factory=lambda: [3e6, -1.5e4, -150.0])
    threshold: str = "exp"


@dataclass(frozen=True)
class AlgorithmConfig:
    eta: typing.Union[float, str] = "auto"
    lam: float = 100.0
    y_max: float = 100.0
    M: typing.Union[int, str] = 1
    K: typing.Union[int, str] = "auto"
    normalized_perturbation: bool = True


@dataclass(frozen=True)
class SolverConfig:
    population_size: int = 64
    generations: int = 60
    mutation_rate: float = 0.3
    crossover_rate: float = 0.9
    restarts: int = 2
    warm_start: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    T: int = 500
    b: float = 0.2624
    repeats: int = 1
    regret_stride: int = 1
    burn_in: int = 50
    cross_sections: list = field(default_factory=lambda: [300, 350, 400, 450, 500])
    ident_periods: list = field(default_factory=lambda: [10, 30, 450, 500])
    output_dir: str = "results"
    master_seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self, experiment: str | None = None) -> "ExperimentConfig":
        """
        Check cross-field invariants; returns ``self``.

        ``experiment`` ("regret", "oos", "ident", "gen-data") restricts the
        period-list checks to the list that experiment reads; None checks both.
        """
        if self.T < 1:
            raise ConfigError("experiment.T must be >= 1")
        if self.repeats < 1 or self.regret_stride < 1 or self.burn_in < 0:
            raise ConfigError("repeats and regret_stride must be >= 1, burn_in >= 0")
        lists = {None: ("cross_sections", "ident_periods"), "oos": ("cross_sections",), "ident": ("ident_periods",)}
        for key in lists.get(experiment, ()):
            bad = [p for p in getattr(self, key) if not 1 <= p <= self.T]
            if bad:
                raise ConfigError(f"experiment.{key} entries {bad} outside [1, {self.T}]")
        if experiment == "oos" and not self.cross_sections:
            raise ConfigError("experiment.cross_sections must not be empty")
        sc = self.scenario
        if len(sc.box_lower) != 3 or len(sc.box_upper) != 3:
            raise ConfigError("scenario.box_lower and scenario.box_upper need 3 entries (s, l, t)")
        if not all(lo < hi for lo, hi in zip(sc.box_lower, sc.box_upper)):
            raise ConfigError("scenario.box_lower must be below scenario.box_upper")
        if not sc.box_upper[2] < sc.dt:
            raise ConfigError("scenario.box_upper release time must precede the first reading")
        if sc.threshold not in ("exp", "raw"):
            raise ConfigError("scenario.threshold must be 'exp' or 'raw'")
        if sc.noise_std < 0 or sc.test_size < 1:
            raise ConfigError("scenario.noise_std must be >= 0 and test_size >= 1")
        alg = self.algorithm
        for key in ("eta", "M", "K"):
            value = getattr(alg, key)
            if isinstance(value, str) and value != "auto":
                raise ConfigError(f"algorithm.{key} must be a number or 'auto'")
        if self.solver.population_size < 4 or self.solver.generations < 1:
            raise ConfigError("solver.population_size must be >= 4 and generations >= 1")
        return self


_SECTION_TYPES = {
    "scenario": ScenarioConfig,
    "algorithm": AlgorithmConfig,
    "solver": SolverConfig,
}


def _field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls) if f.name not in SECTIONS}


def _coerce(section: str, key: str, value, expected):
    where = f"{section}.{key}"
    options = typing.get_args(expected) or (expected,)
    for opt in options:
        if opt is bool and isinstance(value, bool):
            return value
        if opt is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if opt is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if opt is str and isinstance(value, str):
            return value
        if opt is list and isinstance(value, list):
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                return list(value)
    names = " or ".join(getattr(o, "__name__", str(o)) for o in options)
    raise ConfigError(f"{where}: expected {names}, got {value!r}")


def _merge(cfg: ExperimentConfig, section: str, values: dict) -> ExperimentConfig:
    if section == "experiment":
        types = _field_types(ExperimentConfig)
    elif section in _SECTION_TYPES:
        types = _field_types(_SECTION_TYPES[section])
    else:
        raise ConfigError(f"unknown section [{section}]")
    updates = {}
    for key, value in values.items():
        if key not in types:
            raise ConfigError(f"unknown key {section}.{key}")
        updates[key] = _coerce(section, key, value, types[key])
    if section == "experiment":
        for key in ("cross_sections", "ident_periods"):
            if key in updates and not all(float(p).is_integer() for p in updates[key]):
                raise ConfigError(f"experiment.{key}: expected a list of integers")
            if key in updates:
                updates[key] = [int(p) for p in updates[key]]
        return replace(cfg, **updates)
    return replace(cfg, **{section: replace(getattr(cfg, section), **updates)})


def from_mapping(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig() if base is None else base
    for section, values in data.items():
        if not isinstance(values, dict):
            raise ConfigError(f"top-level key {section!r} must be a [section]")
        cfg = _merge(cfg, section, values)
    return cfg


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a TOML file; keys absent from the file keep their values in ``base``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_mapping(data, base)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``section.key=value`` strings (bare keys address ``[experiment]``)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        section, _, name = key.rpartition(".")
        cfg = _merge(cfg, section or "experiment", {name: _parse_value(text.strip())})
    return cfg

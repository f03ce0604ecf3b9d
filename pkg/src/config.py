from __future__ import annotations

import logging
import math
import os

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from constants import (
    ALPHA_PERCENT, CELL_SIZE_M, CORPUS_MEAN_STEPS, EPSILON, MAX_TRF, NODE_BUDGET_FACTOR, SPACING_MEAN_M,
    SPACING_STD_M, WORKERS_ENV_VAR, Z_THRESHOLD
)
from errors import ConfigError, WorldError
from planner import AlphaPolicy
from utils import Mode, TrfMiddle
from world import MultiplierSet


logger = logging.getLogger(__name__)

ALPHA_UNITS = ("percent", "cells")


@dataclass(frozen=True)
class RunConfig:
    '''
    Everything a run needs. Loaded from a flat key = value file; keys missing
    from the file keep the defaults below
    '''

    road_file: Optional[Path] = None
    poi_file: Optional[Path] = None
    cell_size_m: float = CELL_SIZE_M

    # Without a corpus file a synthetic corpus of random walks is generated
    corpus_file: Optional[Path] = None
    corpus_size: int = 100
    corpus_mean_steps: float = CORPUS_MEAN_STEPS
    corpus_seed: int = 0

    max_trf: float = MAX_TRF
    z_threshold: float = Z_THRESHOLD
    trf_middle: TrfMiddle = TrfMiddle.LITERAL

    starts: int = 2
    seeds: int = 2
    seed: int = 0
    distances: Tuple[float, ...] = (50.0,)
    alpha: float = ALPHA_PERCENT
    alpha_unit: str = "percent"
    epsilon: float = EPSILON
    multipliers: MultiplierSet = field(default_factory=MultiplierSet.uniform)
    modes: Tuple[Mode, ...] = (Mode.ATTRACTION, Mode.FEATURE)
    node_budget_factor: float = NODE_BUDGET_FACTOR

    spacing_mean_m: float = SPACING_MEAN_M
    spacing_std_m: float = SPACING_STD_M

    sweep_distance: float = 50.0
    max_permutations: Optional[int] = None
    max_starts: Optional[int] = None

    log_search: bool = True
    workers: Optional[int] = None
    output_dir: Path = Path("out")

    def __post_init__(self):
        if any(d <= 0 for d in self.distances) or not self.distances:
            raise ConfigError(f"distances must be positive, got {self.distances}")

        if self.sweep_distance <= 0:
            raise ConfigError(f"sweep_distance must be positive, got {self.sweep_distance}")

        for name in ("starts", "seeds", "corpus_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")

        for name in ("max_permutations", "max_starts", "workers"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be at least 1, got {value}")

        if self.alpha_unit not in ALPHA_UNITS:
            raise ConfigError(f"alpha_unit must be one of {', '.join(ALPHA_UNITS)}, got {self.alpha_unit}")

        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")

        if not self.modes:
            raise ConfigError("At least one mode is needed")

        for name in ("road_file", "poi_file", "corpus_file"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name} {value} does not exist")

    def alpha_policy(self, target_distance: float, alpha: float = None) -> AlphaPolicy:
        '''
        Alpha in cells for a target distance. A percentage is taken of the
        target distance
        '''

        alpha = self.alpha if alpha is None else alpha
        if self.alpha_unit == "cells":
            return AlphaPolicy(float(alpha), self.epsilon)

        return AlphaPolicy.from_percent(alpha, target_distance, self.epsilon)

    def node_budget(self, target_distance: float) -> int:
        return max(1, math.ceil(self.node_budget_factor * target_distance))

    def resolve_workers(self, flag: Optional[int] = None) -> int:
        '''
        Worker count: the command-line flag, then the config value, then the
        environment, then a single worker
        '''

        if flag is not None:
            if flag < 1:
                raise ConfigError(f"workers must be at least 1, got {flag}")

            return flag

        if self.workers is not None:
            return self.workers

        env = os.environ.get(WORKERS_ENV_VAR)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got '{env}'")

            if workers < 1:
                raise ConfigError(f"{WORKERS_ENV_VAR} must be at least 1, got {workers}")

            return workers

        return 1


def _int(value: str) -> int:
    return int(value)


def _optional_int(value: str) -> Optional[int]:
    return None if value.lower() in ("", "none", "all") else int(value)


def _float(value: str) -> float:
    return float(value)


def _bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True

    if lowered in ("0", "false", "no", "off"):
        return False

    raise ValueError(f"not a boolean: '{value}'")


def _floats(value: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _multipliers(value: str) -> MultiplierSet:
    try:
        return MultiplierSet.of(_floats(value))
    except WorldError as e:
        raise ValueError(str(e)) from e


def _modes(value: str) -> Tuple[Mode, ...]:
    return tuple(Mode(v.strip().lower()) for v in value.split(",") if v.strip())


def _trf_middle(value: str) -> TrfMiddle:
    return TrfMiddle(value.lower())


_PARSERS = {
    "road_file": Path,
    "poi_file": Path,
    "cell_size_m": _float,
    "corpus_file": Path,
    "corpus_size": _int,
    "corpus_mean_steps": _float,
    "corpus_seed": _int,
    "max_trf": _float,
    "z_threshold": _float,
    "trf_middle": _trf_middle,
    "starts": _int,
    "seeds": _int,
    "seed": _int,
    "distances": _floats,
    "alpha": _float,
    "alpha_unit": str.lower,
    "epsilon": _float,
    "multipliers": _multipliers,
    "modes": _modes,
    "node_budget_factor": _float,
    "spacing_mean_m": _float,
    "spacing_std_m": _float,
    "sweep_distance": _float,
    "max_permutations": _optional_int,
    "max_starts": _optional_int,
    "log_search": _bool,
    "workers": _optional_int,
    "output_dir": Path,
}

_PATH_KEYS = ("road_file", "poi_file", "corpus_file", "output_dir")


def load_config(path) -> RunConfig:
    '''
    Parse a flat key = value config file. Blank lines and # comments are
    ignored; relative paths resolve against the file's directory

    :raise ConfigError naming the offending line
    '''

    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e

    values = {}
    for line_number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue

        key, separator, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not separator:
            raise ConfigError(f"{path}:{line_number}: expected key = value")

        parser = _PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"{path}:{line_number}: unknown key '{key}'")

        try:
            value = parser(raw)
        except ValueError as e:
            raise ConfigError(f"{path}:{line_number}: bad value for {key}: {e}") from e

        if key in _PATH_KEYS and not value.is_absolute():
            value = path.parent / value

        values[key] = value

    return RunConfig(**values)


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    '''
    Copy of the config with the given command-line values applied; None
    leaves a value untouched
    '''

    known = {f.name for f in fields(RunConfig)}
    return replace(config, **{k: v for k, v in overrides.items() if v is not None and k in known})

"""Experiment configuration, read from a single JSON document."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from ..offline import METHODS

PROBLEM_KINDS = ("checkerboard", "hole", "matrices")

_PROBLEM_DEFAULTS = {
    "checkerboard": {"N": 2, "M": 2, "divisions": 32, "a": 20.0},
    "hole": {"divisions": 36, "a": 0.32, "l_max": 0.3},
    "matrices": {"lower": None, "upper": None},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """One offline build plus online evaluation.

    ``problem`` is a dict with a ``kind`` key:

    * ``checkerboard``: ``N``, ``M``, ``divisions``, ``a``
    * ``hole``: ``divisions``, ``a``, ``l_max`` (the swept translation range)
    * ``matrices``: ``path`` to a family directory with ``b.mtx``; optional
      ``lower``/``upper`` bounds (default: the box stored in ``meta.json``)
    """

    problem: dict
    method: str = "ck1"
    order: int = 5
    delta: float | None = 1e-7
    schedule: list | None = None
    sample_count: int = 100
    rng_seed: int = 0
    output_dir: str = "ck_output"
    variant: str = "algorithm"
    workers: int = 1

    def __post_init__(self):
        self.problem = dict(self.problem)
        kind = self.problem.get("kind")
        if kind not in PROBLEM_KINDS:
            raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}, got {kind!r}")
        merged = dict(_PROBLEM_DEFAULTS[kind])
        merged.update(self.problem)
        self.problem = merged
        if kind == "matrices" and "path" not in self.problem:
            raise ConfigError("matrices problem needs a 'path'")
        if kind == "hole" and not 0 <= self.problem["l_max"] < self.problem["a"]:
            raise ConfigError("hole problem needs 0 <= l_max < a")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.order) < 1:
            raise ConfigError("order must be >= 1")
        self.order = int(self.order)
        if int(self.sample_count) < 1:
            raise ConfigError("sample_count must be >= 1")
        self.sample_count = int(self.sample_count)
        if self.schedule is not None:
            self.schedule = [float(d) for d in self.schedule]
            if len(self.schedule) != self.order - 1 or any(d <= 0 for d in self.schedule):
                raise ConfigError(f"schedule needs {self.order - 1} positive tolerances")
        elif self.method != "exact":
            if self.delta is None or not float(self.delta) > 0:
                raise ConfigError("delta must be > 0")
            self.delta = float(self.delta)
        if self.variant not in ("algorithm", "definition"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def kind(self) -> str:
        return self.problem["kind"]

    def cutoffs(self):
        """Per-step tolerances, or ``None`` for the exact builder."""
        if self.method == "exact":
            return None
        if self.schedule is not None:
            return list(self.schedule)
        return [self.delta] * (self.order - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "problem" not in data:
            raise ConfigError("config needs a 'problem' section")
        return cls(**data)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)

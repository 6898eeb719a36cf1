"""Experiment configuration: one JSON document, overridable from the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .. import noise
from ..errors import ConfigurationError
from ..qcore import SensingField
from ..rng import MASK64
from ..verify import TestParams

COMMANDS = ("curves", "simulate", "verify")
SWEEP_VARIABLES = ("epsilon", "M", "N", "s_tilde")


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigurationError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        vals = tuple(self.values)
        if not vals:
            raise ConfigurationError("sweep values are empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigurationError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)


@dataclass
class ExperimentConfig:
    command: str = "curves"
    params: dict = dataclasses.field(default_factory=lambda: {"epsilon": 1.0, "delta": 1.0, "Delta": 0.0})
    field: dict = dataclasses.field(default_factory=lambda: {"omega": 0.05, "t": 1.0})
    M: int = 100
    trials: int = 1
    noise: dict = dataclasses.field(default_factory=lambda: {"kind": "identity"})
    seed: int = 0
    output_path: str | None = None
    sweep: Sweep | None = None
    fig: int | None = None
    engine: str = "batch"
    abort_policy: str = "skip"
    time_budget: float = 3600.0
    options: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"command must be one of {COMMANDS}")
        if isinstance(self.sweep, dict):
            self.sweep = Sweep(self.sweep.get("variable"), tuple(self.sweep.get("values", ())))
        if not 0 <= int(self.seed) <= MASK64 or int(self.seed) != self.seed:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        self.seed = int(self.seed)
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError("M must be a positive integer")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigurationError("trials must be a positive integer")
        if self.engine not in ("rounds", "batch"):
            raise ConfigurationError("engine must be 'rounds' or 'batch'")
        if self.abort_policy not in ("skip", "retry", "halt"):
            raise ConfigurationError("abort_policy must be skip, retry or halt")

    # typed views
    def test_params(self) -> TestParams:
        try:
            return TestParams(**self.params)
        except TypeError as exc:
            raise ConfigurationError(f"bad params block: {exc}") from None

    def sensing_field(self) -> SensingField:
        try:
            return SensingField(**self.field)
        except TypeError as exc:
            raise ConfigurationError(f"bad field block: {exc}") from None

    def schedule(self) -> noise.NoiseSchedule:
        """Noise schedule; ``"period": "tolerated"`` resolves against the test params."""
        desc = dict(self.noise)
        if desc.get("period") == "tolerated":
            p = self.test_params()
            desc["period"] = noise.tolerated_period(p.k, p.Delta)
        return noise.schedule_from_json(desc)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        if self.sweep is not None:
            d["sweep"] = {"variable": self.sweep.variable, "values": list(self.sweep.values)}
        return d

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with the non-``None`` keyword values replaced."""
        d = {k: v for k, v in kw.items() if v is not None}
        unknown = set(d) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        return dataclasses.replace(self, **d)


def config_from_dict(d: dict) -> ExperimentConfig:
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
    return ExperimentConfig(**d)


def load_config(path) -> ExperimentConfig:
    try:
        with open(Path(path), encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    return config_from_dict(d)

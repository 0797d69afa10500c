"""Self-describing experiment configuration (schema ``grbm-config/1``)."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .domain import ReflectionData
from .errors import GRBMError
from .potential import Potential
from .potential import from_dict as potential_from_dict
from .sde import SimConfig

SCHEMA = "grbm-config/1"
_TOP_KEYS = {"schema", "name", "data", "potential", "sim", "options"}


class ConfigError(GRBMError):
    """The configuration document is malformed."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    data: ReflectionData
    potential: dict
    sim: SimConfig
    options: dict = field(default_factory=dict)

    @property
    def U(self) -> Potential:
        return potential_from_dict(self.potential)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "name": self.name,
            "data": self.data.to_dict(),
            "potential": {"name": self.potential["name"], "params": dict(self.potential.get("params", {}))},
            "sim": self.sim.to_dict(),
            "options": copy.deepcopy(self.options),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        sim = SimConfig.from_dict({**self.sim.to_dict(), "seed": int(seed)})
        return ExperimentConfig(self.name, self.data, self.potential, sim, self.options)

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        if doc.get("schema") != SCHEMA:
            raise ConfigError(f"schema must be {SCHEMA!r}, got {doc.get('schema')!r}")
        for key in ("data", "potential", "sim"):
            if key not in doc:
                raise ConfigError(f"missing key {key!r}")
        if "seed" not in doc["sim"]:
            raise ConfigError("sim.seed is mandatory")
        try:
            data = ReflectionData.from_dict(doc["data"])
            potential = {"name": doc["potential"]["name"], "params": dict(doc["potential"].get("params", {}))}
            potential_from_dict(potential)
            sim = SimConfig.from_dict(doc["sim"])
        except GRBMError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return cls(str(doc.get("name", "")), data, potential, sim, copy.deepcopy(doc.get("options", {})))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_json(text)

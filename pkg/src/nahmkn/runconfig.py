"""Run configuration: JSON schema, flag overrides, deterministic hashing."""

import hashlib
import json
from dataclasses import dataclass, field

import jsonschema

_COMMAND_SECTIONS = [
    "reduced_flow", "gauge_fix", "psi", "psi_inv", "potential", "moment",
    "verify_identities", "kn_classify", "counterexample", "growth_scan",
    "properness_scan", "dominate_scan", "report",
]

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nahmkn run configuration (v1)",
    "type": "object",
    "properties": {
        "n": {"type": "integer", "enum": [2, 3]},
        "step": {"type": "number", "exclusiveMinimum": 0.0, "maximum": 0.0625},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "blowup_threshold": {"type": "number", "exclusiveMinimum": 0.0},
        **{name: {"type": "object"} for name in _COMMAND_SECTIONS},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "n": 2,
    "step": 1.0 / 1024.0,
    "seed": 42,
    "samples": 100,
    "out": "out",
    "blowup_threshold": 1.0e6,
}


class ConfigError(ValueError):
    """Configuration violates the schema."""


@dataclass(frozen=True)
class RunConfig:
    n: int
    step: float
    seed: int
    samples: int
    out: str
    blowup_threshold: float
    sections: dict = field(default_factory=dict)

    @staticmethod
    def load(path=None, overrides=None):
        raw = {}
        if path is not None:
            with open(path) as fh:
                raw = json.load(fh)
        for key, val in (overrides or {}).items():
            if val is not None:
                raw[key] = val
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(str(exc))
        merged = dict(DEFAULTS)
        sections = {}
        for key, val in raw.items():
            if key in _COMMAND_SECTIONS:
                sections[key] = val
            else:
                merged[key] = val
        return RunConfig(sections=sections, **merged)

    def section(self, command):
        return dict(self.sections.get(command.replace("-", "_"), {}))

    def canonical(self):
        payload = {
            "n": self.n,
            "step": self.step,
            "seed": self.seed,
            "samples": self.samples,
            "out": self.out,
            "blowup_threshold": self.blowup_threshold,
            "sections": self.sections,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

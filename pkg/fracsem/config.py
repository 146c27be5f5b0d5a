"""Run configuration: a single JSON/YAML document validated into frozen pydantic records"""
import math
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .fields import FIXTURES, load_field, make_fixture
from .numerics import QuadratureSpec
from .utils import load_document

COMMANDS = ("apply", "invert", "extend", "limits", "regularity", "verify", "selftest")


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    L: float = 12.0
    M: int = 256

    @field_validator("L")
    @classmethod
    def positive_box(cls, value):
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("L must be positive and finite")
        return value

    @field_validator("M")
    @classmethod
    def power_of_two(cls, value):
        if value < 16 or value & (value - 1):
            raise ValueError("M must be a power of two >= 16")
        return value

    def as_tuple(self):
        return (self.L, self.M)


class FixtureSpec(BaseModel):
    """A builtin fixture by name (with its parameters) or a saved field file"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Optional[str] = None
    path: Optional[str] = None
    params: Dict[str, Any] = {}

    @model_validator(mode="after")
    def one_source(self):
        if (self.name is None) == (self.path is None):
            raise ValueError("exactly one of name or path must be given")
        if self.name is not None and self.name not in FIXTURES:
            raise ValueError(f"unknown fixture {self.name!r}, expected one of {sorted(FIXTURES)}")
        return self

    @property
    def label(self):
        return self.name or self.path

    def build(self, n):
        """AnalyticField for builtin fixtures, GridField for saved files"""
        if self.path is not None:
            return load_field(self.path)
        return make_fixture(self.name, n=n, **self.params)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Literal["apply", "invert", "extend", "limits", "regularity", "verify", "selftest"]
    fixture: FixtureSpec = FixtureSpec(name="gaussian")
    fixtures: List[FixtureSpec] = []
    s: float = 0.5
    n: int = 1
    grid: GridSpec = GridSpec()
    quadrature: QuadratureSpec = QuadratureSpec()
    output_format: Literal["csv", "json"] = "csv"
    seed: int = 0
    routes: List[Literal["spectral", "semigroup", "pointwise"]] = ["spectral", "semigroup", "pointwise"]
    probes: List[List[float]] = [[0.0]]
    project_mean: bool = False
    extension_route: Literal["semigroup_dirichlet", "subordination", "semigroup_frac", "poisson_kernel"] = (
        "semigroup_dirichlet"
    )
    y_nodes: Optional[List[float]] = None
    direction: Literal["s_to_1", "s_to_0"] = "s_to_1"
    s_sequence: List[float] = [0.9, 0.99, 0.999]
    alpha: float = 0.5
    k: int = 1
    mode: Literal["holder_forward", "schauder_inverse", "schauder_bounded"] = "holder_forward"

    @field_validator("s")
    @classmethod
    def positive_order(cls, value):
        if not value > 0:
            raise ValueError("s must be positive")
        return value

    @field_validator("n")
    @classmethod
    def supported_dimension(cls, value):
        if value not in (1, 2, 3):
            raise ValueError("n must be 1, 2 or 3")
        return value

    @field_validator("seed")
    @classmethod
    def unsigned_64(cls, value):
        if not 0 <= value < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return value

    @field_validator("k")
    @classmethod
    def positive_k(cls, value):
        if value < 1:
            raise ValueError("k must be >= 1")
        return value

    @model_validator(mode="after")
    def probes_match_dimension(self):
        if any(len(p) != self.n for p in self.probes):
            raise ValueError(f"every probe must have n={self.n} coordinates")
        return self

    @classmethod
    def from_document(cls, document, command=None):
        """Validates a parsed document; validation failures become ConfigError with the field path"""
        if not isinstance(document, dict):
            raise ConfigError("config document must be a mapping")
        if command is not None:
            if document.get("command", command) != command:
                raise ConfigError(f"document is for {document['command']!r}, not {command!r}", "command")
            document = dict(document, command=command)
        try:
            return cls.model_validate(document)
        except ValidationError as err:
            first = err.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or None
            raise ConfigError(first["msg"], field) from err

    @classmethod
    def load(cls, path=None, command=None):
        try:
            document = load_document(path)
        except (OSError, ValueError, yaml.YAMLError) as err:
            raise ConfigError(f"cannot read config: {err}") from err
        return cls.from_document(document or {}, command)

    def to_document(self):
        return self.model_dump(mode="json")

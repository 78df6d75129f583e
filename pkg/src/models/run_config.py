"""
Run configuration for the command-line front end.

A run is described by one key-value file with `__`-separated sections
(`MODEL__D=2`, `EXPERIMENT__EPSILONS=[0.3,0.1]`) or by a JSON document with
the same schema. Only the file and explicit keyword arguments are read;
the process environment is ignored so a config fully determines a run.
"""

import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from ..config import settings
from ..errors import ConfigError
from .kinetic_models import KineticRule, ModelSpec


def _finite(values, what: str):
    if any(not math.isfinite(x) for x in values):
        raise ValueError(f'{what} must be finite')
    return values


class ModelSection(BaseModel):

    model_config = ConfigDict(extra='forbid')

    d: int = Field(..., ge=2, description="Number of lattice sites")
    kinetic: KineticRule = Field(KineticRule.LAPLACIAN, description="laplacian or none")
    phi: List[float] = Field(..., description="Pair potential by torus distance 0..floor(d/2)")
    epsilon: float = Field(1.0, gt=0.0, description="Scaling parameter of verification runs")

    def to_spec(self) -> ModelSpec:
        return ModelSpec(d=self.d, kinetic=self.kinetic, phi=tuple(self.phi), epsilon=self.epsilon)

    @model_validator(mode='after')
    def validate_spec(self):
        self.to_spec()
        return self


class InitialKind(str, Enum):

    PURE = "pure"
    DIAGONAL = "diagonal"
    RANDOM = "random"
    MATRIX = "matrix"


class InitialSection(BaseModel):
    """
    One-particle initial state f_1^0.

    pure:     `vector` as (re, im) pairs, normalized
    diagonal: `weights` on the sites
    random:   seeded positive Hermitian scaled to `trace_norm`
    matrix:   `entries` as row-major (re, im) pairs
    """

    model_config = ConfigDict(extra='forbid')

    kind: InitialKind = InitialKind.RANDOM
    vector: Optional[List[Tuple[float, float]]] = None
    weights: Optional[List[float]] = None
    entries: Optional[List[Tuple[float, float]]] = None
    trace_norm: float = Field(1.0, gt=0.0, description="Target trace norm of random states")

    @model_validator(mode='after')
    def validate_payload(self):
        required = {
            InitialKind.PURE: 'vector',
            InitialKind.DIAGONAL: 'weights',
            InitialKind.MATRIX: 'entries',
        }.get(self.kind)
        if required and getattr(self, required) is None:
            raise ValueError(f"initial kind '{self.kind.value}' needs '{required}'")
        for name in ('vector', 'entries'):
            pairs = getattr(self, name)
            if pairs is not None:
                _finite([x for pair in pairs for x in pair], f'initial {name}')
        if self.weights is not None:
            _finite(self.weights, 'initial weights')
        return self

    def expected_size(self, d: int) -> Optional[int]:
        if self.kind == InitialKind.PURE:
            return len(self.vector) if self.vector is not None else None
        if self.kind == InitialKind.DIAGONAL:
            return len(self.weights) if self.weights is not None else None
        if self.kind == InitialKind.MATRIX:
            return math.isqrt(len(self.entries)) if self.entries is not None else None
        return d


class CorrelationPreset(str, Enum):

    IDENTITY = "identity"
    JASTROW = "jastrow"
    DIAGONAL = "diagonal"


class CorrelationSection(BaseModel):

    model_config = ConfigDict(extra='forbid')

    preset: CorrelationPreset = CorrelationPreset.JASTROW
    gamma: float = Field(0.5, description="Coincidence weight of the jastrow preset")
    entries: Optional[Dict[int, List[float]]] = Field(
        None, description="Diagonal of g_k per particle count k for the diagonal preset"
    )

    @field_validator('gamma')
    @classmethod
    def validate_gamma(cls, v):
        if not math.isfinite(v):
            raise ValueError('gamma must be finite')
        return v

    @model_validator(mode='after')
    def validate_entries(self):
        if self.preset == CorrelationPreset.DIAGONAL:
            if not self.entries:
                raise ValueError("correlation preset 'diagonal' needs 'entries'")
            for values in self.entries.values():
                _finite(values, 'correlation entries')
        return self


class SweepKind(str, Enum):

    THEOREM1 = "theorem1"
    THEOREM2 = "theorem2"
    CORRELATION_PROPAGATION = "correlation_propagation"


class ExperimentSection(BaseModel):

    model_config = ConfigDict(extra='forbid')

    sweeps: List[SweepKind] = Field(default_factory=lambda: [SweepKind.THEOREM1])
    epsilons: Optional[List[float]] = Field(None, description="Strictly decreasing ε values")
    times: Optional[List[float]] = Field(None, description="Absolute sweep times")
    t0_fractions: Optional[List[float]] = Field(None, description="Sweep times as fractions of t0")
    max_order: int = Field(2, ge=0, description="Truncation N of both series")
    functional_order: int = Field(1, ge=0, description="Truncation of the marginal functionals")
    quad_nodes: int = Field(default_factory=lambda: settings.QUAD_NODES, ge=8)
    verify_time: float = Field(0.5, ge=0.0, description="Time argument of the invariant suites")
    t_end: float = Field(1.0, ge=0.0, description="End time of evolve trajectories")
    dt: float = Field(0.01, gt=0.0, description="Step of evolve trajectories")
    record_every: int = Field(10, ge=1, description="Write every k-th step to trajectory.csv")
    hartree_method: str = Field("rk4", description="rk4 or split_step")

    @field_validator('epsilons')
    @classmethod
    def validate_epsilons(cls, v):
        if v is None:
            return v
        _finite(v, 'epsilon values')
        if any(e <= 0.0 for e in v):
            raise ValueError('epsilon values must be positive')
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError('epsilon values must be strictly decreasing')
        return v

    @field_validator('times', 't0_fractions')
    @classmethod
    def validate_times(cls, v):
        if v is None:
            return v
        _finite(v, 'sweep times')
        if any(t < 0.0 for t in v):
            raise ValueError('sweep times must be non-negative')
        return v

    @field_validator('hartree_method')
    @classmethod
    def validate_method(cls, v):
        if v not in ('rk4', 'split_step'):
            raise ValueError(f"hartree_method must be 'rk4' or 'split_step', got '{v}'")
        return v

    def resolved_times(self, t0: float) -> List[float]:
        if self.times is not None:
            return list(self.times)
        if self.t0_fractions is not None:
            if not math.isfinite(t0):
                raise ConfigError("t0_fractions need an interacting model with finite t0")
            return [fraction * t0 for fraction in self.t0_fractions]
        raise ConfigError("experiment needs 'times' or 't0_fractions'")


class RunConfig(BaseSettings):

    model_config = SettingsConfigDict(
        env_nested_delimiter='__',
        env_file_encoding='utf-8',
        case_sensitive=False,
        extra='forbid'
    )

    model: ModelSection
    initial: InitialSection = Field(default_factory=InitialSection)
    correlations: Optional[CorrelationSection] = None
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    output_dir: str = Field("results", description="Directory for records.csv, trajectory.csv, summary.txt")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Seed of random initial states")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    @model_validator(mode='after')
    def validate_dimensions(self):
        size = self.initial.expected_size(self.model.d)
        if size is not None and size != self.model.d:
            raise ValueError(f"initial state has dimension {size}, model has d={self.model.d}")
        if self.initial.kind == InitialKind.MATRIX and len(self.initial.entries) != self.model.d ** 2:
            raise ValueError(f"initial matrix needs {self.model.d ** 2} entries")
        if self.correlations is not None and self.correlations.entries:
            for k, values in self.correlations.entries.items():
                if len(values) != self.model.d ** k:
                    raise ValueError(f"correlation entries for k={k} need {self.model.d ** k} values")
        return self

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON of everything except the output location."""
        payload = self.model_dump(mode='json', exclude={'output_dir'})
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_run_config(path: Path) -> RunConfig:
    """Read a `.json` document or a dotenv-style key-value file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix.lower() == '.json':
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(payload, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return RunConfig(**payload)
    return RunConfig(_env_file=path)

import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import settings
from .operators import CorrelationFamily, DensityOp


class KineticRule(str, Enum):

    LAPLACIAN = "laplacian"
    NONE = "none"


class CumulantVariant(str, Enum):

    GROUP = "group"
    SCATTERING = "scattering"
    CORRELATED = "correlated"


class CorrelationConvention(str, Enum):

    PHYSICAL = "physical"
    PRINTED = "printed"


class DissectionReading(str, Enum):

    INTERVAL = "interval"
    SET_PARTITION = "set_partition"


class ConvergenceRole(str, Enum):

    INITIAL = "initial"
    STATE = "state"
    FUNCTIONAL = "functional"


class ModelSpec(BaseModel):

    model_config = ConfigDict(frozen=True)

    d: int = Field(
        ...,
        ge=2,
        description="Number of lattice sites (local Hilbert-space dimension)"
    )
    kinetic: KineticRule = Field(
        KineticRule.LAPLACIAN,
        description="One-particle kinetic operator: periodic -1/2 Laplacian or none"
    )
    phi: Tuple[float, ...] = Field(
        ...,
        description="Pair potential indexed by torus distance 0..floor(d/2)"
    )
    epsilon: float = Field(
        1.0,
        gt=0.0,
        description="Mean-field scaling parameter"
    )

    @field_validator('phi')
    @classmethod
    def validate_phi(cls, v):
        if not all(math.isfinite(x) for x in v):
            raise ValueError('phi entries must be finite')
        return tuple(float(x) for x in v)

    @model_validator(mode='after')
    def validate_phi_length(self):
        if len(self.phi) != self.d // 2 + 1:
            raise ValueError(f'phi needs {self.d // 2 + 1} entries for d={self.d}, got {len(self.phi)}')
        return self

    @property
    def is_free(self) -> bool:
        return all(x == 0.0 for x in self.phi)

    @property
    def phi_norm(self) -> float:
        """Operator norm of the two-particle multiplication operator Φ."""
        return max(abs(x) for x in self.phi)

    def with_epsilon(self, epsilon: float) -> "ModelSpec":
        return ModelSpec(d=self.d, kinetic=self.kinetic, phi=self.phi, epsilon=epsilon)

    def without_interaction(self) -> "ModelSpec":
        return ModelSpec(d=self.d, kinetic=self.kinetic, phi=(0.0,) * len(self.phi), epsilon=self.epsilon)


class CumulantRequest(BaseModel):

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    order: int = Field(..., ge=0, description="n: number of extra particles")
    cluster_size: int = Field(..., ge=1, description="s: size of the cluster Y")
    t: float = Field(..., description="Time argument")
    variant: CumulantVariant = CumulantVariant.GROUP
    correlations: Optional[CorrelationFamily] = None
    convention: CorrelationConvention = CorrelationConvention.PHYSICAL

    @property
    def particles(self) -> int:
        return self.cluster_size + self.order


class SeriesTruncation(BaseModel):

    max_order: int = Field(..., ge=0, description="Highest retained series order N")


class TermDiagnostic(BaseModel):

    order: int
    norm: float
    cumulative_norm: float
    passed: bool = Field(True, description="Whether the convergence condition held for the input")


class ConvergenceReport(BaseModel):

    role: ConvergenceRole
    s: Optional[int] = None
    threshold: float
    measured: float
    passed: bool


class ResidualReport(BaseModel):

    module: str
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


class SweepRecord(BaseModel):

    epsilon: float = Field(..., gt=0.0)
    t: float
    metric: str
    value: float = Field(..., ge=0.0)
    tail_floor: float = Field(..., ge=0.0)
    order: int
    tail_norm: float = Field(0.0, ge=0.0, description="Norm of the highest retained limit-series term")

    @field_validator('value', 'tail_floor')
    @classmethod
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError('sweep values must be finite')
        return v

    @property
    def above_floor(self) -> bool:
        return self.value > settings.TAIL_FLOOR_FACTOR * self.tail_floor


class RateFit(BaseModel):

    metric: str
    t: float
    slope: float
    intercept: float
    used: int


class SweepPlan(BaseModel):

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ModelSpec
    initial: DensityOp = Field(..., description="epsilon-free one-particle initial state f_1^0")
    epsilons: List[float] = Field(..., min_length=1)
    times: List[float] = Field(..., min_length=1)
    max_order: int = Field(2, ge=0)
    functional_order: int = Field(1, ge=0)
    quad_nodes: int = Field(default_factory=lambda: settings.QUAD_NODES, ge=8)
    correlations: Optional[CorrelationFamily] = None
    force: bool = False

    @field_validator('epsilons')
    @classmethod
    def validate_epsilons(cls, v):
        if any(e <= 0.0 for e in v):
            raise ValueError('epsilon values must be positive')
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError('epsilon values must be strictly decreasing')
        return v

    @field_validator('times')
    @classmethod
    def validate_times(cls, v):
        if any(t < 0.0 or not math.isfinite(t) for t in v):
            raise ValueError('sweep times must be finite and non-negative')
        return v


class GeneratedVariant(str, Enum):

    PLAIN = "plain"
    CORRELATED = "correlated"


class SweepAssessment(BaseModel):

    metric: str
    t: float
    exact: bool = Field(..., description="All distances indistinguishable from zero")
    monotone: bool
    slope: Optional[float] = None
    passed: bool
    note: str = ""

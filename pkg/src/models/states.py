from dataclasses import dataclass, field
from typing import List

import numpy as np

from .kinetic_models import TermDiagnostic
from .operators import DensityOp


@dataclass(frozen=True)
class KineticState:
    """One-particle marginal F_1(t) of the kinetic equation with provenance."""

    F1: DensityOp
    t: float
    order: int
    epsilon: float
    correlated: bool = False
    terms: List[TermDiagnostic] = field(default_factory=list)


@dataclass(frozen=True)
class VlasovState:

    f1: DensityOp
    t: float


@dataclass(frozen=True, eq=False)
class WaveFunction:

    psi: np.ndarray
    t: float

    def __post_init__(self) -> None:
        psi = np.array(self.psi, dtype=complex, copy=True).reshape(-1)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def density(self) -> DensityOp:
        return DensityOp.from_vector(self.psi, d=self.psi.size)

"""
Operator containers on tensor-product spaces H_n = (C^d)^{⊗n}.

Particle 1 is the slowest-varying multi-index. Every container freezes its
numpy payload after construction so instances can be shared across threads.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional

import numpy as np

from ..config import settings
from ..errors import CapacityError, ConfigError, DimensionError, SymmetryError


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DensityOp:
    """Square complex matrix on H_n with particle count and local dimension."""

    n: int
    d: int
    data: np.ndarray
    symmetric: bool = False
    state: bool = False

    def __post_init__(self) -> None:
        if self.d < 2:
            raise DimensionError(f"local dimension must be >= 2, got {self.d}")
        if self.n < 0:
            raise DimensionError(f"particle count must be >= 0, got {self.n}")
        rows = self.d ** self.n
        data = _frozen(self.data)
        if data.shape != (rows, rows):
            raise DimensionError(
                f"expected a {rows}x{rows} matrix for n={self.n}, d={self.d}, got {data.shape}"
            )
        object.__setattr__(self, "data", data)
        if self.state:
            if not np.all(np.isfinite(data)):
                raise SymmetryError("state has non-finite entries")
            defect = self.hermitian_defect()
            if defect > settings.STATE_HERMITIAN_TOL:
                raise SymmetryError(f"state is not Hermitian (defect {defect:.3e})")
        if self.symmetric and self.n > 1:
            tensor = data.reshape((self.d,) * (2 * self.n))
            for perm in itertools.permutations(range(self.n)):
                axes = list(perm) + [self.n + p for p in perm]
                if not np.allclose(tensor.transpose(axes), tensor, atol=settings.HERMITIAN_TOL, rtol=0.0):
                    raise SymmetryError(f"operator is not invariant under particle permutation {perm}")

    @property
    def rows(self) -> int:
        return self.d ** self.n

    @classmethod
    def identity(cls, d: int, n: int) -> "DensityOp":
        return cls(n=n, d=d, data=np.eye(d ** n))

    @classmethod
    def zeros(cls, d: int, n: int) -> "DensityOp":
        return cls(n=n, d=d, data=np.zeros((d ** n, d ** n)))

    @classmethod
    def from_vector(cls, psi: np.ndarray, d: int, n: int = 1) -> "DensityOp":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        if psi.size != d ** n:
            raise DimensionError(f"vector of length {psi.size} does not live on H_{n} with d={d}")
        return cls(n=n, d=d, data=np.outer(psi, psi.conj()))

    def with_data(self, data: np.ndarray) -> "DensityOp":
        return DensityOp(n=self.n, d=self.d, data=data)

    def dagger(self) -> "DensityOp":
        return self.with_data(self.data.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermitian_defect(self) -> float:
        if self.data.size == 0:
            return 0.0
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def _check_compatible(self, other: "DensityOp") -> None:
        if (self.n, self.d) != (other.n, other.d):
            raise DimensionError(
                f"operands live on different spaces: (n={self.n}, d={self.d}) vs (n={other.n}, d={other.d})"
            )

    def __add__(self, other: "DensityOp") -> "DensityOp":
        self._check_compatible(other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "DensityOp") -> "DensityOp":
        self._check_compatible(other)
        return self.with_data(self.data - other.data)

    def __neg__(self) -> "DensityOp":
        return self.with_data(-self.data)

    def __mul__(self, scalar: complex) -> "DensityOp":
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__

    def to_snapshot(self) -> Dict:
        """Header {n, d} plus (re, im) pairs in row-major order."""
        flat = self.data.reshape(-1)
        return {
            "n": self.n,
            "d": self.d,
            "entries": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_snapshot(cls, snapshot: Mapping) -> "DensityOp":
        n, d = int(snapshot["n"]), int(snapshot["d"])
        pairs = np.asarray(snapshot["entries"], dtype=float)
        rows = d ** n
        if pairs.shape != (rows * rows, 2):
            raise DimensionError(f"snapshot carries {pairs.shape[0]} entries, expected {rows * rows}")
        data = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(rows, rows)
        return cls(n=n, d=d, data=data)


@dataclass(frozen=True, eq=False)
class SuperOp:
    """Linear map on operators over H_n, applied in factored form."""

    n: int
    d: int
    action: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, f: DensityOp) -> DensityOp:
        if (f.n, f.d) != (self.n, self.d):
            raise DimensionError(
                f"{self.label or 'superoperator'} acts on n={self.n}, d={self.d}; got n={f.n}, d={f.d}"
            )
        return f.with_data(self.action(f.data))

    def compose(self, inner: "SuperOp") -> "SuperOp":
        """self ∘ inner: inner is applied first."""
        if (inner.n, inner.d) != (self.n, self.d):
            raise DimensionError("cannot compose superoperators on different spaces")
        outer_action, inner_action = self.action, inner.action
        return SuperOp(self.n, self.d, lambda x: outer_action(inner_action(x)),
                       label=f"{self.label}∘{inner.label}")

    def __add__(self, other: "SuperOp") -> "SuperOp":
        a, b = self.action, other.action
        return SuperOp(self.n, self.d, lambda x: a(x) + b(x), label=f"{self.label}+{other.label}")

    def __sub__(self, other: "SuperOp") -> "SuperOp":
        a, b = self.action, other.action
        return SuperOp(self.n, self.d, lambda x: a(x) - b(x), label=f"{self.label}-{other.label}")

    def scaled(self, factor: complex) -> "SuperOp":
        a = self.action
        return SuperOp(self.n, self.d, lambda x: factor * a(x), label=f"{factor}*{self.label}")

    def dense(self, max_rows: Optional[int] = None) -> np.ndarray:
        """Matrix of the map on row-major vectorized operators."""
        rows = self.d ** self.n
        cap = max_rows or settings.MAX_ROWS
        if rows * rows > cap:
            raise CapacityError(f"dense superoperator needs {rows * rows} rows, cap is {cap}")
        columns = []
        for a in range(rows):
            for b in range(rows):
                unit = np.zeros((rows, rows), dtype=complex)
                unit[a, b] = 1.0
                columns.append(self.action(unit).reshape(-1))
        return np.stack(columns, axis=1)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, n: int, d: int, label: str = "dense") -> "SuperOp":
        rows = d ** n
        matrix = _frozen(matrix)
        if matrix.shape != (rows * rows, rows * rows):
            raise DimensionError(f"dense superoperator must be {rows * rows} square, got {matrix.shape}")
        return cls(n, d, lambda x: (matrix @ x.reshape(-1)).reshape(rows, rows), label=label)


@dataclass(frozen=True, eq=False)
class HamiltonianOp:
    """H_n together with its spectral decomposition H = V diag(λ) V†."""

    n: int
    d: int
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def propagator(self, t: float) -> np.ndarray:
        """e^{-itH_n}."""
        phases = np.exp(-1j * t * self.eigenvalues)
        return (self.eigenvectors * phases) @ self.eigenvectors.conj().T


@dataclass(frozen=True, eq=False)
class CorrelationFamily:
    """
    Bounded operators g_k on H_k describing initial correlations.

    g_1 defaults to the identity. Higher k come from the explicit table or,
    for presets, from a generator evaluated on demand.
    """

    d: int
    operators: Mapping[int, np.ndarray] = field(default_factory=dict)
    generator: Optional[Callable[[int], np.ndarray]] = None
    label: str = "explicit"
    _cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        frozen = {}
        for k, op in self.operators.items():
            k = int(k)
            op = _frozen(op)
            if k < 1 or op.shape != (self.d ** k, self.d ** k):
                raise DimensionError(f"g_{k} must be {self.d ** k} square, got {op.shape}")
            if not np.all(np.isfinite(op)):
                raise ConfigError(f"g_{k} has non-finite entries")
            frozen[k] = op
        object.__setattr__(self, "operators", frozen)

    def on(self, k: int) -> np.ndarray:
        if k in self.operators:
            return self.operators[k]
        if k in self._cache:
            return self._cache[k]
        if k == 1:
            op = _frozen(np.eye(self.d))
        elif self.generator is not None:
            op = _frozen(self.generator(k))
        else:
            raise ConfigError(f"correlation family '{self.label}' declares no g_{k}")
        self._cache[k] = op
        return op

    def operator_norm(self, k: int) -> float:
        return float(np.linalg.norm(self.on(k), 2))

    def norms(self, ks: Iterable[int]) -> Dict[int, float]:
        return {k: self.operator_norm(k) for k in ks}

    @classmethod
    def identity(cls, d: int) -> "CorrelationFamily":
        return cls(d=d, generator=lambda k: np.eye(d ** k), label="identity")

    @classmethod
    def jastrow(cls, d: int, gamma: float) -> "CorrelationFamily":
        """Diagonal g_k = ∏_{i<j} (1 + γ δ(q_i, q_j)), defined for every k."""
        if not math.isfinite(gamma):
            raise ConfigError("jastrow gamma must be finite")

        def build(k: int) -> np.ndarray:
            digits = np.indices((d,) * k).reshape(k, -1)
            weights = np.ones(d ** k)
            for i, j in itertools.combinations(range(k), 2):
                weights = weights * (1.0 + gamma * (digits[i] == digits[j]))
            return np.diag(weights)

        return cls(d=d, generator=build, label=f"jastrow(gamma={gamma})")

    @classmethod
    def diagonal(cls, d: int, entries: Mapping[int, Iterable[float]]) -> "CorrelationFamily":
        ops = {}
        for k, values in entries.items():
            values = np.asarray(list(values), dtype=float)
            if values.size != d ** int(k):
                raise DimensionError(f"g_{k} diagonal needs {d ** int(k)} entries, got {values.size}")
            ops[int(k)] = np.diag(values)
        return cls(d=d, operators=ops, label="diagonal")

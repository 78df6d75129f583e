import itertools
import logging
import threading
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import settings
from ..errors import DimensionError
from ..models.kinetic_models import KineticRule, ModelSpec
from ..models.operators import DensityOp, HamiltonianOp
from . import tensor_core

logger = logging.getLogger(__name__)


def kinetic_matrix(spec: ModelSpec) -> np.ndarray:
    """One-particle K: -1/2 of the periodic discrete Laplacian, or zero."""
    d = spec.d
    if spec.kinetic == KineticRule.NONE:
        return np.zeros((d, d), dtype=complex)
    shift = np.roll(np.eye(d), 1, axis=1)
    laplacian = shift + shift.T - 2.0 * np.eye(d)
    return (-0.5 * laplacian).astype(complex)


def distance_kernel(spec: ModelSpec) -> np.ndarray:
    """φ(dist(q, q')) as a d x d real matrix on the distance torus."""
    q = np.arange(spec.d)
    gap = np.abs(q[:, None] - q[None, :])
    dist = np.minimum(gap, spec.d - gap)
    return np.asarray(spec.phi)[dist]


@lru_cache(maxsize=256)
def pair_potential_diagonal(spec: ModelSpec, n: int, i: int, j: int) -> np.ndarray:
    """Diagonal of Φ(i, j) on H_n, 0-based sites."""
    digits = np.indices((spec.d,) * n).reshape(n, -1)
    diag = distance_kernel(spec)[digits[i], digits[j]]
    diag.setflags(write=False)
    return diag


def interaction_diagonal(spec: ModelSpec, n: int) -> np.ndarray:
    """Diagonal of Σ_{i<j} Φ(i, j) on H_n."""
    total = np.zeros(spec.d ** n)
    for i, j in itertools.combinations(range(n), 2):
        total = total + pair_potential_diagonal(spec, n, i, j)
    return total


@lru_cache(maxsize=64)
def _spectral(spec: ModelSpec, n: int) -> HamiltonianOp:
    d = spec.d
    k = kinetic_matrix(spec)
    h = np.zeros((d ** n, d ** n), dtype=complex)
    for i in range(n):
        h = h + np.kron(np.kron(np.eye(d ** i), k), np.eye(d ** (n - i - 1)))
    if n > 1:
        h = h + spec.epsilon * np.diag(interaction_diagonal(spec, n))
    eigenvalues, eigenvectors = tensor_core.hermitian_eig(h)
    for array in (h, eigenvalues, eigenvectors):
        array.setflags(write=False)
    logger.debug(f"[MODEL] Spectral decomposition cached: n={n}, d={d}, eps={spec.epsilon}")
    return HamiltonianOp(n=n, d=d, matrix=h, eigenvalues=eigenvalues, eigenvectors=eigenvectors)


class LatticeModel:
    """
    Hamiltonians H_n = Σ K(i) + ε Σ_{i<j} Φ(i,j) and the groups they generate.

    Spectral decompositions are shared process-wide per (ModelSpec, n); the ModelSpec
    carries ε, so a sweep over ε gets one entry per value. Propagators are
    memoized per instance under a lock.
    """

    def __init__(self, spec: ModelSpec, max_rows: Optional[int] = None) -> None:
        self.spec = spec
        self.max_rows = max_rows or settings.MAX_ROWS
        self.kinetic = kinetic_matrix(spec)
        self.kernel = distance_kernel(spec)
        self._free_eigenvalues, self._free_eigenvectors = tensor_core.hermitian_eig(self.kinetic)
        self._lock = threading.Lock()
        self._unitaries: Dict[Tuple[str, int, float], np.ndarray] = {}
        logger.info(f"[MODEL] LatticeModel initialized: d={spec.d}, eps={spec.epsilon}, phi={list(spec.phi)}")

    @property
    def d(self) -> int:
        return self.spec.d

    def with_epsilon(self, epsilon: float) -> "LatticeModel":
        return LatticeModel(self.spec.with_epsilon(epsilon), max_rows=self.max_rows)

    def build_hamiltonian(self, n: int) -> HamiltonianOp:
        if n < 1:
            raise DimensionError(f"particle count must be >= 1, got {n}")
        tensor_core.check_capacity(self.d, n, self.max_rows)
        return _spectral(self.spec, n)

    def _memo(self, key: Tuple[str, int, float], build) -> np.ndarray:
        with self._lock:
            cached = self._unitaries.get(key)
        if cached is not None:
            return cached
        value = build()
        value.setflags(write=False)
        with self._lock:
            return self._unitaries.setdefault(key, value)

    def free_unitary(self, t: float) -> np.ndarray:
        """e^{-itK}: 𝒢_1(-t) conjugates by this matrix."""
        phases = np.exp(-1j * t * self._free_eigenvalues)
        return (self._free_eigenvectors * phases) @ self._free_eigenvectors.conj().T

    def group_unitary(self, n: int, t: float) -> np.ndarray:
        """e^{-itH_n}: 𝒢_n(-t) conjugates by this matrix."""
        if n == 1 or self.spec.is_free:
            return self._memo(("group", n, float(t)), lambda: tensor_core.product_unitary(self.free_unitary(t), n))
        return self._memo(("group", n, float(t)), lambda: self.build_hamiltonian(n).propagator(t))

    def scattering_unitary(self, n: int, t: float) -> np.ndarray:
        """e^{-itH_n} (e^{itK})^{⊗n}: Ĝ_n(t) conjugates by this matrix."""
        def build():
            backward = tensor_core.product_unitary(self.free_unitary(-t), n)
            return self.group_unitary(n, t) @ backward
        return self._memo(("scattering", n, float(t)), build)

    def _check(self, h: HamiltonianOp, f: DensityOp) -> None:
        if (f.n, f.d) != (h.n, h.d):
            raise DimensionError(f"operator on n={f.n}, d={f.d} does not match H_{h.n} with d={h.d}")

    def evolve(self, h: HamiltonianOp, t: float, f: DensityOp) -> DensityOp:
        """𝒢_n(-t) f = e^{-itH} f e^{itH}."""
        self._check(h, f)
        if t == 0.0:
            return f
        u = h.propagator(t)
        return f.with_data(u @ f.data @ u.conj().T)

    def liouvillian(self, h: HamiltonianOp, f: DensityOp) -> DensityOp:
        """-𝒩_n f = -i[H_n, f]."""
        self._check(h, f)
        return f.with_data(-1j * (h.matrix @ f.data - f.data @ h.matrix))

    def interaction_liouvillian(self, pair: Sequence[int], f: DensityOp) -> DensityOp:
        """-𝒩_int(i, j) f = -i[Φ(i, j), f] for 1-based i < j; no ε factor."""
        i, j = pair
        if not 1 <= i < j <= f.n:
            raise DimensionError(f"pair {pair} is not an ordered pair of particles in 1..{f.n}")
        if f.d != self.d:
            raise DimensionError(f"operator has d={f.d}, model has d={self.d}")
        return f.with_data(self.interaction_commutator(f.data, f.n, i - 1, j - 1))

    def interaction_commutator(self, data: np.ndarray, n: int, i: int, j: int) -> np.ndarray:
        """Raw -i[Φ(i, j), data] with 0-based sites."""
        diag = pair_potential_diagonal(self.spec, n, i, j)
        return -1j * (diag[:, None] * data - data * diag[None, :])

    def free_evolve_sites(self, data: np.ndarray, n: int, sites: Sequence[int], t: float) -> np.ndarray:
        """∏_{i in sites} 𝒢_1(-t, i) on a raw matrix (0-based sites)."""
        if t == 0.0 or not sites:
            return data
        u = tensor_core.product_unitary(self.free_unitary(t), len(sites))
        return tensor_core.conjugate_local(data, u, sorted(sites), self.d, n)

    def scattering_op(self, n: int, t: float, f: DensityOp) -> DensityOp:
        """Ĝ_n(t) f: free backward conjugation first, then 𝒢_n(-t)."""
        if (f.n, f.d) != (n, self.d):
            raise DimensionError(f"operator on n={f.n}, d={f.d} does not match n={n}, d={self.d}")
        tensor_core.check_capacity(self.d, n, self.max_rows)
        w = self.scattering_unitary(n, t)
        return f.with_data(w @ f.data @ w.conj().T)

"""
Dense linear algebra over tensor-product spaces.

Public functions take and return DensityOp values; the `*_local` helpers work
on raw (d^n, d^n) arrays and are what the series engines call in their inner
loops. Sites are 0-based in the raw helpers and 1-based in the public API.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from ..config import settings
from ..errors import CapacityError, DimensionError, SymmetryError
from ..models.operators import DensityOp

logger = logging.getLogger(__name__)

Operand = Union[DensityOp, np.ndarray]


def check_capacity(d: int, n: int, max_rows: Optional[int] = None) -> None:
    cap = max_rows or settings.MAX_ROWS
    if d ** n > cap:
        raise CapacityError(f"d^n = {d}^{n} = {d ** n} exceeds the row cap {cap}")


def kron(a: DensityOp, b: DensityOp) -> DensityOp:
    if a.d != b.d:
        raise DimensionError(f"local dimensions differ: {a.d} vs {b.d}")
    check_capacity(a.d, a.n + b.n)
    return DensityOp(n=a.n + b.n, d=a.d, data=np.kron(a.data, b.data))


def kron_all(ops: Sequence[DensityOp]) -> DensityOp:
    if not ops:
        raise DimensionError("empty tensor product")
    out = ops[0]
    for op in ops[1:]:
        out = kron(out, op)
    return out


def kron_power(data: np.ndarray, k: int) -> np.ndarray:
    """data^{⊗k} for a raw matrix (k = 0 gives the 1x1 identity)."""
    out = np.eye(1, dtype=complex)
    for _ in range(k):
        out = np.kron(out, data)
    return out


def trace_out(data: np.ndarray, d: int, n: int, keep: int) -> np.ndarray:
    """Tr_{keep+1..n} on a raw matrix."""
    if keep == n:
        return data
    head, tail = d ** keep, d ** (n - keep)
    return np.einsum("aibi->ab", data.reshape(head, tail, head, tail))


def partial_trace(f: DensityOp, keep: int) -> DensityOp:
    """Trace out particles keep+1..n, keeping the first `keep` particles."""
    if not 0 <= keep <= f.n:
        raise DimensionError(f"cannot keep {keep} of {f.n} particles")
    return DensityOp(n=keep, d=f.d, data=trace_out(f.data, f.d, f.n, keep))


def trace_norm(f: Operand) -> float:
    data = f.data if isinstance(f, DensityOp) else np.asarray(f)
    if data.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(data, compute_uv=False)))


def hermitian_eig(h: Operand, require_hermitian: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    data = h.data if isinstance(h, DensityOp) else np.asarray(h, dtype=complex)
    defect = float(np.max(np.abs(data - data.conj().T))) if data.size else 0.0
    if defect > settings.HERMITIAN_TOL:
        if require_hermitian:
            raise SymmetryError(f"matrix is not Hermitian (defect {defect:.3e})")
        logger.warning(f"[TENSOR] Symmetrizing matrix with Hermitian defect {defect:.3e}")
    eigenvalues, eigenvectors = linalg.eigh(0.5 * (data + data.conj().T))
    return eigenvalues, eigenvectors


def permute_particles(f: DensityOp, perm: Sequence[int]) -> DensityOp:
    """
    Relabel particles: new particle k is old particle perm[k-1].

    The swap (2, 1) maps a⊗b to b⊗a.
    """
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(1, f.n + 1)):
        raise DimensionError(f"{perm} is not a permutation of 1..{f.n}")
    if f.n <= 1:
        return f
    axes = [p - 1 for p in perm]
    tensor = f.data.reshape((f.d,) * (2 * f.n)).transpose(axes + [f.n + a for a in axes])
    return f.with_data(tensor.reshape(f.rows, f.rows))


def inverse_permutation(perm: Sequence[int]) -> Tuple[int, ...]:
    inverse = [0] * len(perm)
    for k, p in enumerate(perm, start=1):
        inverse[p - 1] = k
    return tuple(inverse)


def _split_sites(data: np.ndarray, sites: Sequence[int], d: int, n: int) -> Tuple[np.ndarray, List[int]]:
    rest = [k for k in range(n) if k not in sites]
    order = list(sites) + rest
    k = len(sites)
    tensor = data.reshape((d,) * (2 * n)).transpose(order + [n + j for j in order])
    return tensor.reshape(d ** k, d ** (n - k), d ** k, d ** (n - k)), order


def _merge_sites(block: np.ndarray, order: List[int], d: int, n: int) -> np.ndarray:
    inverse = list(np.argsort(order))
    tensor = block.reshape((d,) * (2 * n)).transpose(inverse + [n + j for j in inverse])
    return tensor.reshape(d ** n, d ** n)


def _is_leading(sites: Sequence[int]) -> bool:
    return list(sites) == list(range(len(sites)))


def conjugate_local(data: np.ndarray, u: np.ndarray, sites: Sequence[int], d: int, n: int) -> np.ndarray:
    """(U on `sites`) · data · (U on `sites`)†."""
    k = len(sites)
    if k == 0:
        return data
    if _is_leading(sites):
        embedded = np.kron(u, np.eye(d ** (n - k))) if k < n else u
        return embedded @ data @ embedded.conj().T
    block, order = _split_sites(data, sites, d, n)
    block = np.einsum("ab,bxcy,dc->axdy", u, block, u.conj(), optimize=True)
    return _merge_sites(block, order, d, n)


def left_multiply_local(data: np.ndarray, op: np.ndarray, sites: Sequence[int], d: int, n: int) -> np.ndarray:
    k = len(sites)
    if k == 0:
        return data
    if _is_leading(sites):
        embedded = np.kron(op, np.eye(d ** (n - k))) if k < n else op
        return embedded @ data
    block, order = _split_sites(data, sites, d, n)
    block = np.einsum("ab,bxcy->axcy", op, block, optimize=True)
    return _merge_sites(block, order, d, n)


def product_unitary(u: np.ndarray, k: int) -> np.ndarray:
    """U^{⊗k} acting on k particles."""
    return kron_power(u, k)


def random_hermitian(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    rows = d ** n
    z = rng.standard_normal((rows, rows)) + 1j * rng.standard_normal((rows, rows))
    return 0.5 * (z + z.conj().T)


def random_unitary(rows: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((rows, rows)) + 1j * rng.standard_normal((rows, rows))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def seeded_density(d: int, seed: int, trace_norm_target: float, n: int = 1) -> DensityOp:
    """
    Positive Hermitian operator from seeded Gaussian entries.

    Recipe: H = (Z + Z†)/2 with complex Gaussian Z, shifted by (|λ_min| + 1/d)·I
    so it is positive definite, then scaled to the requested trace norm.
    """
    rng = np.random.default_rng(seed)
    h = random_hermitian(d, n, rng)
    smallest = float(np.linalg.eigvalsh(h)[0])
    h = h + (abs(smallest) + 1.0 / d) * np.eye(d ** n)
    h = h * (trace_norm_target / float(np.trace(h).real))
    h = 0.5 * (h + h.conj().T)
    return DensityOp(n=n, d=d, data=h, state=True)


def product_state(f: DensityOp, k: int) -> np.ndarray:
    """Raw f^{⊗k}."""
    check_capacity(f.d, f.n * k)
    return kron_power(f.data, k)


def largest_eigenvalue(f: DensityOp) -> float:
    return float(np.linalg.eigvalsh(0.5 * (f.data + f.data.conj().T))[-1])


def smallest_eigenvalue(f: DensityOp) -> float:
    return float(np.linalg.eigvalsh(0.5 * (f.data + f.data.conj().T))[0])

"""
Mean-field limit dynamics: the quantum Vlasov equation, its Duhamel
iteration series, the modified equation with initial correlations, and the
Hartree reduction for pure states.

The limit equations carry no ε: only φ and K of the model are used.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import solve_ivp

from ..config import settings
from ..errors import CapacityError, ConfigError, DimensionError, NormalizationError
from ..models.kinetic_models import TermDiagnostic
from ..models.operators import CorrelationFamily, DensityOp
from ..models.states import VlasovState, WaveFunction
from . import tensor_core, time_ordered
from .lattice_model import LatticeModel

logger = logging.getLogger(__name__)

HARTREE_METHODS = ("rk4", "split_step")
MIN_QUAD_NODES = 8


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_count(t_end: float, dt: float) -> int:
    if dt <= 0.0:
        raise DimensionError(f"time step must be positive, got {dt}")
    return max(int(round(abs(t_end) / dt)), 1) if t_end != 0.0 else 0


def two_site_cubic_reference(c: float, psi_0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """
    Independent reference for the on-site two-site problem
        i a' = a - b + c|a|^2 a,   i b' = b - a + c|b|^2 b,
    integrated with an adaptive Runge-Kutta method. Returns shape (len(times), 2).
    """
    def rhs(_t, y):
        a, b = y[0] + 1j * y[1], y[2] + 1j * y[3]
        da = -1j * (a - b + c * abs(a) ** 2 * a)
        db = -1j * (b - a + c * abs(b) ** 2 * b)
        return [da.real, da.imag, db.real, db.imag]

    psi_0 = np.asarray(psi_0, dtype=complex)
    y0 = [psi_0[0].real, psi_0[0].imag, psi_0[1].real, psi_0[1].imag]
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(rhs, (0.0, float(times[-1])), y0, t_eval=times, method="DOP853", rtol=1e-12, atol=1e-12)
    return np.stack([sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]], axis=1)


class VlasovSolver:

    def __init__(self, model: LatticeModel) -> None:
        self.model = model
        self.spec = model.spec
        logger.info(f"[VLASOV] VlasovSolver initialized: d={self.spec.d}, |phi|={self.spec.phi_norm}")

    @property
    def d(self) -> int:
        return self.model.d

    def _check(self, f1: DensityOp) -> None:
        if (f1.n, f1.d) != (1, self.d):
            raise DimensionError(f"expected a one-particle operator with d={self.d}, got n={f1.n}, d={f1.d}")

    def t0_bound(self, f1_0: DensityOp) -> float:
        """(2 ‖Φ‖ ‖f_1^0‖₁)^{-1}; +inf when φ ≡ 0."""
        phi_norm = self.spec.phi_norm
        norm = tensor_core.trace_norm(f1_0)
        if phi_norm == 0.0 or norm == 0.0:
            return math.inf
        return 1.0 / (2.0 * phi_norm * norm)

    def mean_field_potential(self, density: np.ndarray) -> np.ndarray:
        """V(q) = Σ_q' φ(q - q') ρ(q')."""
        return self.model.kernel @ density

    def mean_field_energy(self, f1: DensityOp) -> float:
        """Re Tr(K f) + 1/2 Σ φ(q - q') f(q,q) f(q',q')."""
        self._check(f1)
        density = np.real(np.diag(f1.data))
        kinetic = float(np.real(np.trace(self.model.kinetic @ f1.data)))
        return kinetic + 0.5 * float(density @ self.model.kernel @ density)

    def _pair_term(self, data: np.ndarray, t: float, corr: Optional[CorrelationFamily]) -> np.ndarray:
        if corr is None:
            v = self.mean_field_potential(np.diag(data))
            return -1j * (v[:, None] * data - data * v[None, :])
        pair = np.kron(data, data)
        pair = self.model.free_evolve_sites(pair, 2, (0, 1), -t)
        pair = corr.on(2) @ pair
        pair = self.model.free_evolve_sites(pair, 2, (0, 1), t)
        return tensor_core.trace_out(self.model.interaction_commutator(pair, 2, 0, 1), self.d, 2, 1)

    def _rhs_raw(self, t: float, data: np.ndarray, corr: Optional[CorrelationFamily]) -> np.ndarray:
        k = self.model.kinetic
        return -1j * (k @ data - data @ k) + self._pair_term(data, t, corr)

    def vlasov_rhs(self, f1: DensityOp, t: float = 0.0, corr: Optional[CorrelationFamily] = None) -> DensityOp:
        """-i[K, f] + Tr_2(-i[Φ(1,2), f⊗f]); with corr the pair operator is ∏𝒢_1(-t) g_2 ∏𝒢_1(t) f⊗f."""
        self._check(f1)
        return f1.with_data(self._rhs_raw(t, f1.data, corr))

    def integrate_vlasov(
        self,
        f1_0: DensityOp,
        t_end: float,
        dt: float,
        corr: Optional[CorrelationFamily] = None,
    ) -> List[VlasovState]:
        self._check(f1_0)
        t0 = self.t0_bound(f1_0)
        if t_end >= t0:
            logger.warning(f"[VLASOV] t_end={t_end} is beyond the series horizon t0={t0:.4f}")
        steps = _step_count(t_end, dt)
        h = t_end / steps if steps else 0.0
        data = f1_0.data
        trajectory = [VlasovState(f1=f1_0, t=0.0)]
        warned = False
        for step in range(steps):
            t = step * h
            data = rk4_step(lambda tau, y: self._rhs_raw(tau, y, corr), t, data, h)
            state = f1_0.with_data(data)
            if not warned and tensor_core.smallest_eigenvalue(state) < settings.POSITIVITY_FLOOR:
                logger.warning(f"[VLASOV] Positivity floor crossed at t={t + h:.4f}")
                warned = True
            trajectory.append(VlasovState(f1=state, t=(step + 1) * h))
        return trajectory

    def duhamel_terms(
        self,
        f1_0: DensityOp,
        t: float,
        order: int,
        quad_nodes: Optional[int] = None,
        corr: Optional[CorrelationFamily] = None,
    ) -> List[np.ndarray]:
        """n-th iterated Duhamel term of the Vlasov series, n = 0..order."""
        self._check(f1_0)
        if order > settings.MAX_SERIES_ORDER:
            raise CapacityError(f"limit series order {order} exceeds the cap {settings.MAX_SERIES_ORDER}")
        nodes = quad_nodes or settings.QUAD_NODES
        if nodes < MIN_QUAD_NODES:
            raise ConfigError(f"quad_nodes must be >= {MIN_QUAD_NODES}, got {nodes}")
        terms = []
        for n in range(order + 1):
            sites = 1 + n
            data = tensor_core.product_state(f1_0, sites)
            if corr is not None:
                data = corr.on(sites) @ data
            integral = time_ordered.chain_integral(self.model, data, 1, n, t, nodes)
            terms.append(tensor_core.trace_out(integral, self.d, sites, 1))
        return terms

    def duhamel_report(self, f1_0: DensityOp, t: float, terms: List[np.ndarray]) -> List[TermDiagnostic]:
        """Per-order norms; `passed` marks terms below the geometric bound (t/t0)^n ‖f‖₁."""
        norm = tensor_core.trace_norm(f1_0)
        t0 = self.t0_bound(f1_0)
        rows, cumulative = [], 0.0
        for n, term in enumerate(terms):
            value = tensor_core.trace_norm(term)
            cumulative += value
            bound = norm * (abs(t) / t0) ** n if math.isfinite(t0) else (norm if n == 0 else 0.0)
            rows.append(TermDiagnostic(order=n, norm=value, cumulative_norm=cumulative, passed=value <= bound + 1e-12))
        return rows

    def duhamel_series(
        self,
        f1_0: DensityOp,
        t: float,
        order: int,
        quad_nodes: Optional[int] = None,
        corr: Optional[CorrelationFamily] = None,
    ) -> DensityOp:
        t0 = self.t0_bound(f1_0)
        if abs(t) >= t0:
            logger.warning(f"[VLASOV] t={t} is beyond the series horizon t0={t0:.4f}")
        terms = self.duhamel_terms(f1_0, t, order, quad_nodes, corr)
        logger.debug(f"[VLASOV] Duhamel term norms at t={t}: {[tensor_core.trace_norm(x) for x in terms]}")
        return f1_0.with_data(sum(terms[1:], terms[0]))

    def hartree_rhs(self, psi: np.ndarray) -> np.ndarray:
        """-i (K ψ + (φ * |ψ|²) ψ)."""
        v = self.mean_field_potential(np.abs(psi) ** 2)
        return -1j * (self.model.kinetic @ psi + v * psi)

    def hartree_energy(self, psi: np.ndarray) -> float:
        density = np.abs(psi) ** 2
        kinetic = float(np.real(np.vdot(psi, self.model.kinetic @ psi)))
        return kinetic + 0.5 * float(density @ self.model.kernel @ density)

    def hartree_evolve(
        self,
        psi_0: WaveFunction,
        t_end: float,
        dt: float,
        method: str = "rk4",
    ) -> List[WaveFunction]:
        if psi_0.psi.size != self.d:
            raise DimensionError(f"wave function has {psi_0.psi.size} components, model has d={self.d}")
        if abs(psi_0.norm - 1.0) > 1e-12:
            raise NormalizationError(f"initial wave function has norm {psi_0.norm:.15f}")
        if method not in HARTREE_METHODS:
            raise DimensionError(f"unknown Hartree method '{method}', expected one of {HARTREE_METHODS}")
        steps = _step_count(t_end, dt)
        h = t_end / steps if steps else 0.0
        free = self.model.free_unitary(h)
        psi = np.asarray(psi_0.psi, dtype=complex)
        trajectory = [psi_0]
        for step in range(steps):
            if method == "rk4":
                psi = rk4_step(lambda _t, y: self.hartree_rhs(y), step * h, psi, h)
            else:
                half = np.exp(-0.5j * h * self.mean_field_potential(np.abs(psi) ** 2))
                psi = free @ (half * psi)
                psi = np.exp(-0.5j * h * self.mean_field_potential(np.abs(psi) ** 2)) * psi
            trajectory.append(WaveFunction(psi=psi, t=psi_0.t + (step + 1) * h))
        logger.debug(
            f"[VLASOV] Hartree {method}: {steps} steps, norm drift {abs(trajectory[-1].norm - 1.0):.2e}"
        )
        return trajectory

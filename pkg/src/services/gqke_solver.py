import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..config import settings
from ..errors import CapacityError, ConfigError, DimensionError
from ..models.clusters import ClusteredSet
from ..models.kinetic_models import (
    ConvergenceReport,
    ConvergenceRole,
    CorrelationConvention,
    CumulantVariant,
    GeneratedVariant,
    ResidualReport,
    SeriesTruncation,
    TermDiagnostic,
)
from ..models.operators import CorrelationFamily, DensityOp
from ..models.states import KineticState
from . import tensor_core
from .cumulant_engine import CumulantEngine

logger = logging.getLogger(__name__)

INITIAL_RADIUS = math.exp(-10) / (1.0 + math.exp(-9))
STATE_RADIUS = math.exp(-8)


def functional_radius(s: int) -> float:
    return math.exp(-(3 * s + 2))


class GQKESolver:
    """
    Solution series, collision integral and marginal functionals of the
    generalized quantum kinetic equation for one lattice model.
    """

    def __init__(self, engine: CumulantEngine) -> None:
        self.engine = engine
        self.model = engine.model
        logger.info(f"[GQKE] GQKESolver initialized: eps={self.model.spec.epsilon}")

    @property
    def d(self) -> int:
        return self.model.d

    def convergence_report(self, F: DensityOp, role: ConvergenceRole, s: Optional[int] = None) -> ConvergenceReport:
        role = ConvergenceRole(role)
        if role == ConvergenceRole.INITIAL:
            threshold = INITIAL_RADIUS
        elif role == ConvergenceRole.STATE:
            threshold = STATE_RADIUS
        else:
            if s is None:
                raise ConfigError("functional convergence report needs the particle count s")
            threshold = functional_radius(s)
        measured = tensor_core.trace_norm(F)
        return ConvergenceReport(role=role, s=s, threshold=threshold, measured=measured, passed=measured < threshold)

    def _warn_radius(self, F: DensityOp, role: ConvergenceRole, s: Optional[int] = None) -> ConvergenceReport:
        report = self.convergence_report(F, role, s)
        if not report.passed:
            logger.warning(
                f"[GQKE] {role.value} norm {report.measured:.3e} is outside the convergence radius "
                f"{report.threshold:.3e}; series results are empirical"
            )
        return report

    def _check_input(self, F: DensityOp) -> None:
        if (F.n, F.d) != (1, self.d):
            raise DimensionError(f"expected a one-particle operator with d={self.d}, got n={F.n}, d={F.d}")

    @staticmethod
    def _check_order(order: int, cap: int, what: str) -> None:
        if order > cap:
            raise CapacityError(f"{what} truncation order {order} exceeds the cap {cap}")

    # ------------------------------------------------------------------
    # series from initial data
    # ------------------------------------------------------------------

    def marginal_terms(
        self, F1_0: DensityOp, s: int, t: float, max_order: int, correlations: Optional[CorrelationFamily] = None
    ) -> List[np.ndarray]:
        """(1/n!) Tr_{s+1..s+n} 𝔄_{1+n}(t,{Y},X∖Y) g_{s+n} ∏F_1^0, for n = 0..max_order."""
        self._check_input(F1_0)
        terms = []
        for n in range(max_order + 1):
            sites = s + n
            tensor_core.check_capacity(self.d, sites, self.model.max_rows)
            data = tensor_core.product_state(F1_0, sites)
            if correlations is not None:
                data = correlations.on(sites) @ data
            term = self.engine.apply_cumulant(data, sites, ClusteredSet.standard(s, n), t, CumulantVariant.GROUP)
            terms.append(tensor_core.trace_out(term, self.d, sites, s) / math.factorial(n))
        return terms

    def _diagnostics(self, terms: List[np.ndarray], passed: bool) -> List[TermDiagnostic]:
        rows, cumulative = [], 0.0
        for n, term in enumerate(terms):
            norm = tensor_core.trace_norm(term)
            cumulative += norm
            rows.append(TermDiagnostic(order=n, norm=norm, cumulative_norm=cumulative, passed=passed))
        return rows

    def marginal_series(
        self,
        F1_0: DensityOp,
        s: int,
        t: float,
        trunc: SeriesTruncation,
        correlations: Optional[CorrelationFamily] = None,
    ) -> Tuple[DensityOp, List[TermDiagnostic]]:
        """s-particle marginal F_s(t) evolved directly from product initial data."""
        if s < 1:
            raise DimensionError(f"particle count must be >= 1, got {s}")
        self._check_order(trunc.max_order, settings.MAX_SERIES_ORDER, "series")
        report = self._warn_radius(F1_0, ConvergenceRole.INITIAL)
        terms = self.marginal_terms(F1_0, s, t, trunc.max_order, correlations)
        value = DensityOp(n=s, d=self.d, data=sum(terms[1:], terms[0]))
        return value, self._diagnostics(terms, report.passed)

    def solution_series(
        self,
        F1_0: DensityOp,
        t: float,
        trunc: SeriesTruncation,
        corr: Optional[CorrelationFamily] = None,
    ) -> KineticState:
        value, terms = self.marginal_series(F1_0, 1, t, trunc, corr)
        logger.debug(f"[GQKE] Solution series at t={t}: N={trunc.max_order}, term norms={[r.norm for r in terms]}")
        return KineticState(
            F1=value,
            t=t,
            order=trunc.max_order,
            epsilon=self.model.spec.epsilon,
            correlated=corr is not None,
            terms=terms,
        )

    # ------------------------------------------------------------------
    # functionals of the state
    # ------------------------------------------------------------------

    def _functional_raw(
        self,
        s: int,
        F1: np.ndarray,
        t: float,
        max_order: int,
        theta: bool = False,
        correlations: Optional[CorrelationFamily] = None,
    ) -> np.ndarray:
        variant = GeneratedVariant.CORRELATED if correlations is not None else GeneratedVariant.PLAIN
        acc = np.zeros((self.d ** s, self.d ** s), dtype=complex)
        for n in range(max_order + 1):
            sites = s + n
            data = tensor_core.kron_power(F1, sites)
            term = self.engine.apply_generated(
                data, s, n, t, variant, theta, correlations, CorrelationConvention.PHYSICAL, self.engine.reading
            )
            acc = acc + tensor_core.trace_out(term, self.d, sites, s) / math.factorial(n)
        return acc

    def _check_functional(self, s: int, state: KineticState, trunc: SeriesTruncation) -> None:
        if s < 2:
            raise DimensionError(f"functionals are defined for s >= 2, got {s}")
        self._check_input(state.F1)
        if s + trunc.max_order > settings.MAX_FUNCTIONAL_PARTICLES:
            raise CapacityError(
                f"s + N = {s + trunc.max_order} exceeds the cap {settings.MAX_FUNCTIONAL_PARTICLES}"
            )
        tensor_core.check_capacity(self.d, s + trunc.max_order, self.model.max_rows)
        self._warn_radius(state.F1, ConvergenceRole.FUNCTIONAL, s)

    def marginal_functional(
        self,
        s: int,
        state: KineticState,
        trunc: SeriesTruncation,
        corr: Optional[CorrelationFamily] = None,
    ) -> DensityOp:
        """F_s(t, Y | F_1(t)) = Σ (1/n!) Tr_{s+1..s+n} 𝔙_{1+n}(t,{Y},X∖Y) ∏F_1(t,i)."""
        self._check_functional(s, state, trunc)
        data = self._functional_raw(s, state.F1.data, state.t, trunc.max_order, False, corr)
        return DensityOp(n=s, d=self.d, data=data)

    def correlation_functional(self, s: int, state: KineticState, trunc: SeriesTruncation) -> DensityOp:
        """G_s(t, Y | F_1(t)): generated evolution with the declusterized cluster θ({Y})."""
        self._check_functional(s, state, trunc)
        data = self._functional_raw(s, state.F1.data, state.t, trunc.max_order, True, None)
        return DensityOp(n=s, d=self.d, data=data)

    def collision_integral(
        self,
        state: KineticState,
        trunc: SeriesTruncation,
        corr: Optional[CorrelationFamily] = None,
    ) -> DensityOp:
        """ε Tr_2 (-𝒩_int(1,2)) Σ (1/n!) Tr_{3..n+2} 𝔙_{1+n}(t,{1,2},3..n+2) ∏F_1(t,i)."""
        self._check_input(state.F1)
        self._check_order(trunc.max_order, settings.MAX_COLLISION_ORDER, "collision integral")
        self._warn_radius(state.F1, ConvergenceRole.STATE)
        pair = self._functional_raw(2, state.F1.data, state.t, trunc.max_order, False, corr)
        commutator = self.model.interaction_commutator(pair, 2, 0, 1)
        data = self.model.spec.epsilon * tensor_core.trace_out(commutator, self.d, 2, 1)
        return DensityOp(n=1, d=self.d, data=data)

    def gqke_rhs(
        self,
        state: KineticState,
        trunc: SeriesTruncation,
        corr: Optional[CorrelationFamily] = None,
    ) -> DensityOp:
        """-𝒩_1 F_1(t) + collision integral."""
        h1 = self.model.build_hamiltonian(1)
        return self.model.liouvillian(h1, state.F1) + self.collision_integral(state, trunc, corr)

    def cluster_decomposition_residual(self, state: KineticState, trunc: SeriesTruncation) -> float:
        """‖F_2 - (G_2 + F_1⊗F_1)‖₁."""
        f2 = self.marginal_functional(2, state, trunc)
        g2 = self.correlation_functional(2, state, trunc)
        product = tensor_core.kron(state.F1, state.F1)
        return tensor_core.trace_norm(f2 - g2 - product)

    # ------------------------------------------------------------------
    # oracles
    # ------------------------------------------------------------------

    def consistency_residual(
        self,
        F1_0: DensityOp,
        t: float,
        trunc: SeriesTruncation,
        corr: Optional[CorrelationFamily] = None,
        tolerance: float = 1e-3,
        step: Optional[float] = None,
    ) -> ResidualReport:
        """Relative ‖d/dt F_1(t) - (-𝒩_1 F_1 + collision)‖₁ with a central difference."""
        h = step or settings.FD_STEP
        forward = self.solution_series(F1_0, t + h, trunc, corr).F1
        backward = self.solution_series(F1_0, t - h, trunc, corr).F1
        derivative = (forward - backward) * (1.0 / (2.0 * h))
        state = self.solution_series(F1_0, t, trunc, corr)
        rhs = self.gqke_rhs(state, trunc, corr)
        scale = max(tensor_core.trace_norm(derivative), np.finfo(float).tiny)
        measured = tensor_core.trace_norm(derivative - rhs) / scale
        label = "correlated_consistency" if corr is not None else "gqke_consistency"
        return ResidualReport(
            module="gqke-solver",
            name=f"{label}[N={trunc.max_order}]",
            measured=measured,
            tolerance=tolerance,
            passed=measured <= tolerance,
            detail=f"t={t}, h={h}, |dF/dt|={scale:.3e}",
        )

    def graded_functional_residual(
        self,
        F1_0: DensityOp,
        s: int,
        t: float,
        degree: int,
        corr: Optional[CorrelationFamily] = None,
        tolerance: float = 1e-9,
    ) -> ResidualReport:
        """
        Compare the degree-(s+K) components of F_s(t) from initial data and
        of F_s(t | F_1(t)), K = degree.

        Both sides are polynomials in a scaling λ of F_1^0; the functional side
        is sampled on M > its total degree roots of unity and the component is
        read off with an FFT. The residual is relative to ‖F_1^0‖₁^{s+K} when
        the direct component is smaller, so a vanishing component (φ ≡ 0)
        is compared at the scale of the data.
        """
        if s + degree > settings.MAX_FUNCTIONAL_PARTICLES:
            raise CapacityError(f"s + K = {s + degree} exceeds the cap {settings.MAX_FUNCTIONAL_PARTICLES}")
        direct = self.marginal_terms(F1_0, s, t, degree, corr)[degree]
        series = self.marginal_terms(F1_0, 1, t, degree, corr)
        samples = (s + degree) * (1 + degree) + 1
        values = []
        for j in range(samples):
            lam = np.exp(2j * np.pi * j / samples)
            F1 = sum(lam ** (1 + m) * term for m, term in enumerate(series))
            values.append(self._functional_raw(s, F1, t, degree, False, corr))
        component = (np.fft.fft(np.stack(values), axis=0) / samples)[s + degree]
        reference = tensor_core.trace_norm(F1_0) ** (s + degree)
        scale = max(tensor_core.trace_norm(direct), reference, np.finfo(float).tiny)
        measured = tensor_core.trace_norm(component - direct) / scale
        return ResidualReport(
            module="gqke-solver",
            name=f"graded_functional[s={s},K={degree},{self.engine.reading.value}]",
            measured=measured,
            tolerance=tolerance,
            passed=measured <= tolerance,
            detail=f"t={t}, samples={samples}",
        )

"""
Invariant suites run by `qkinetic verify`.

Each suite returns ResidualReport rows; a failed row names the module, the
identity that broke, the measured value and its tolerance.
"""

import logging
import math
from typing import List, Optional

import numpy as np

from ..config import settings
from ..models.kinetic_models import (
    CumulantRequest,
    DissectionReading,
    ModelSpec,
    ResidualReport,
    SeriesTruncation,
)
from ..models.operators import CorrelationFamily, DensityOp
from . import tensor_core
from .cumulant_engine import CumulantEngine
from .gqke_solver import GQKESolver
from .lattice_model import LatticeModel
from .meanfield_lab import MeanFieldLab, loglog_slope
from .vlasov_solver import VlasovSolver

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-10
CONSISTENCY_NORM = 0.1
CONSISTENCY_TIME = 0.5


def _report(module: str, name: str, measured: float, tolerance: float = EXACT_TOL, detail: str = "") -> ResidualReport:
    return ResidualReport(module=module, name=name, measured=measured, tolerance=tolerance,
                          passed=measured <= tolerance, detail=detail)


class VerificationSuite:
    """Runs the operator, cumulant, lemma, kinetic-equation and Vlasov invariants for one model."""

    def __init__(
        self,
        spec: ModelSpec,
        initial: DensityOp,
        t: float = CONSISTENCY_TIME,
        correlations: Optional[CorrelationFamily] = None,
        threads: int = 1,
    ) -> None:
        self.spec = spec
        self.initial = initial
        self.t = t
        self.correlations = correlations
        self.model = LatticeModel(spec)
        self.engine = CumulantEngine(self.model)
        self.lab = MeanFieldLab(spec, threads=threads)
        logger.info(f"[LAB] VerificationSuite initialized: d={spec.d}, t={t}")

    @property
    def pair(self) -> DensityOp:
        return tensor_core.kron(self.initial, self.initial)

    def tensor_reports(self) -> List[ResidualReport]:
        f = self.initial
        other = tensor_core.seeded_density(self.spec.d, seed=7, trace_norm_target=1.0)
        traced = tensor_core.partial_trace(tensor_core.kron(f, other), 1)
        swapped = tensor_core.permute_particles(tensor_core.kron(f, other), (2, 1))
        reports = [
            _report("tensor-core", "partial_trace_of_product",
                    tensor_core.trace_norm(traced - f * complex(other.trace()))),
            _report("tensor-core", "swap_of_product",
                    tensor_core.trace_norm(swapped - tensor_core.kron(other, f))),
        ]
        if tensor_core.smallest_eigenvalue(f) >= 0.0:
            reports.append(_report("tensor-core", "trace_norm_of_state",
                                   abs(tensor_core.trace_norm(f) - float(f.trace().real))))
        return reports

    def lattice_reports(self) -> List[ResidualReport]:
        f = self.pair
        h = self.model.build_hamiltonian(2)
        evolved = self.model.evolve(h, self.t, f)
        split = self.model.evolve(h, 0.3 * self.t, self.model.evolve(h, 0.7 * self.t, f))
        times = (1e-2, 1e-3, 1e-4)
        generator = self.model.liouvillian(h, f)
        errors = [tensor_core.trace_norm((self.model.evolve(h, tau, f) - f) * (1.0 / tau) - generator) for tau in times]
        usable = [(tau, e) for tau, e in zip(times, errors) if e > 1e-12]
        slope = loglog_slope(*zip(*usable))[0] if len(usable) >= 2 else 1.0
        return [
            _report("lattice-model", "evolution_isometry",
                    abs(tensor_core.trace_norm(evolved) - tensor_core.trace_norm(f))),
            _report("lattice-model", "group_law", tensor_core.trace_norm(split - evolved)),
            ResidualReport(module="lattice-model", name="generator_slope", measured=slope, tolerance=0.9,
                           passed=slope >= 0.9, detail="finite-difference error against -N_2 f"),
        ]

    def cumulant_reports(self) -> List[ResidualReport]:
        d, t = self.spec.d, self.t
        f3 = DensityOp(n=3, d=d, data=tensor_core.product_state(self.initial, 3))
        reports = []

        rebuilt = self.engine.reconstruct_group(1, 2, t, f3)
        direct = self.model.evolve(self.model.build_hamiltonian(3), t, f3)
        reports.append(_report("cumulant-engine", "group_reconstruction[s=1,n=2]",
                                tensor_core.trace_norm(rebuilt - direct)))

        req = CumulantRequest(order=1, cluster_size=2, t=t)
        second = self.engine.group_cumulant(req, f3)
        outer = np.kron(self.model.group_unitary(2, t), self.model.free_unitary(t))
        explicit = direct.data - outer @ f3.data @ outer.conj().T
        reports.append(_report("cumulant-engine", "second_order_group_cumulant",
                                tensor_core.trace_norm(second.data - explicit)))

        pair = self.pair
        theta = self.engine.generated_evolution(0, 2, t, pair, theta=True)
        reports.append(_report("cumulant-engine", "declusterized_first_generated",
                                tensor_core.trace_norm(theta - (self.model.scattering_op(2, t, pair) - pair))))

        scattering = self.engine.scattering_cumulant(req, f3).data
        w2 = self.model.scattering_unitary(2, t)
        attached = sum(
            (tensor_core.conjugate_local(f3.data, w2, [i, 2], d, 3) - f3.data for i in range(2)),
            np.zeros_like(f3.data),
        )
        attached = tensor_core.conjugate_local(attached, self.model.scattering_unitary(2, t), [0, 1], d, 3)
        generated = self.engine.generated_evolution(1, 2, t, f3).data
        reports.append(_report("cumulant-engine", "second_generated_evolution",
                                tensor_core.trace_norm(generated - (scattering - attached))))

        interval = self.engine.generated_evolution(2, 1, t, f3, reading=DissectionReading.INTERVAL)
        partition = self.engine.generated_evolution(2, 1, t, f3, reading=DissectionReading.SET_PARTITION)
        reports.append(_report("cluster-combinatorics", "dissection_readings_agree[n=2]",
                                tensor_core.trace_norm(interval - partition)))

        dense_req = CumulantRequest(order=1, cluster_size=1, t=t)
        superop = self.engine.cumulant_superop(dense_req)
        factored = self.engine.group_cumulant(dense_req, pair).data
        dense = (superop.dense() @ pair.data.reshape(-1)).reshape(pair.data.shape)
        reports.append(_report("cumulant-engine", "dense_superoperator", tensor_core.trace_norm(dense - factored)))

        for n in (1, 2):
            f = DensityOp(n=1 + n, d=d, data=tensor_core.product_state(self.initial, 1 + n))
            reports.append(self.lab.generator_check(1, n, f))
        return reports

    def lemma_reports(self) -> List[ResidualReport]:
        t, pair = self.t, self.pair
        reports = self.lab.lemma1_check(2, t, pair)
        reports += self.lab.lemma2_check(1, 1, t, pair)
        f3 = DensityOp(n=3, d=self.spec.d, data=tensor_core.product_state(self.initial, 3))
        reports += self.lab.scattering_duhamel_check(2, t, f3)
        reports += self.lab.generated_limit_check(1, t, pair)
        if self.correlations is not None:
            reports += self.lab.generated_limit_check(1, t, pair, correlations=self.correlations)
        return reports

    def gqke_reports(self) -> List[ResidualReport]:
        """Central-difference consistency inside the convergence region, plus the graded referee."""
        solver = GQKESolver(CumulantEngine(self.model.with_epsilon(1.0)))
        F0 = self.initial * (CONSISTENCY_NORM / tensor_core.trace_norm(self.initial))
        t = CONSISTENCY_TIME
        first = solver.consistency_residual(F0, t, SeriesTruncation(max_order=1), tolerance=math.inf)
        second = solver.consistency_residual(F0, t, SeriesTruncation(max_order=2))
        reports = [first, second]
        if not self.spec.is_free:
            reports.append(ResidualReport(
                module="gqke-solver", name="gqke_consistency_order_gain", measured=second.measured / first.measured,
                tolerance=1.0, passed=second.measured < first.measured, detail="residual ratio N=2 over N=1",
            ))
        if self.correlations is not None:
            reports.append(solver.consistency_residual(F0, t, SeriesTruncation(max_order=2), self.correlations))
        for degree in (1, 2, 3):
            reports.append(solver.graded_functional_residual(F0, 2, t, degree))
        return reports

    def vlasov_reports(self) -> List[ResidualReport]:
        vlasov = VlasovSolver(self.model)
        f = self.initial
        t0 = vlasov.t0_bound(f)
        t = 0.5 * t0 if math.isfinite(t0) else self.t
        trajectory = vlasov.integrate_vlasov(f, t, dt=t / 200)
        drift = max(abs(complex(state.f1.trace()) - complex(f.trace())) for state in trajectory)
        terms = vlasov.duhamel_terms(f, t, settings.MAX_SERIES_ORDER)
        series = sum(terms[1:-1], terms[0])
        gap = tensor_core.trace_norm(series - trajectory[-1].f1.data)
        bound = 4.0 * tensor_core.trace_norm(terms[-1]) + 1e-9
        return [
            _report("vlasov-solver", "trace_drift", drift),
            _report("vlasov-solver", f"duhamel_vs_rk4[N={len(terms) - 2}]", gap, bound,
                    detail=f"t={t:.4f}, next-term bound"),
        ]

    def run(self) -> List[ResidualReport]:
        reports: List[ResidualReport] = []
        for suite in (self.tensor_reports, self.lattice_reports, self.cumulant_reports,
                      self.lemma_reports, self.gqke_reports, self.vlasov_reports):
            rows = suite()
            failed = [r.name for r in rows if not r.passed]
            if failed:
                logger.warning(f"[LAB] {suite.__name__}: {len(failed)} failed: {failed}")
            reports.extend(rows)
        logger.info(f"[LAB] Verification finished: {sum(r.passed for r in reports)}/{len(reports)} passed")
        return reports

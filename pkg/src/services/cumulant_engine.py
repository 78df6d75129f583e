"""
Cumulants of evolution groups and the generated evolution operators.

Everything is applied in factored form: a cumulant is a signed sum over
partitions, and each partition term is a sequence of local conjugations on
disjoint site blocks.
"""

import logging
from typing import Optional

import numpy as np

from ..config import settings
from ..errors import CapacityError, ConfigError, DimensionError
from ..models.clusters import CLUSTER, ClusteredSet
from ..models.kinetic_models import (
    CorrelationConvention,
    CumulantRequest,
    CumulantVariant,
    DissectionReading,
    GeneratedVariant,
)
from ..models.operators import CorrelationFamily, DensityOp, SuperOp
from . import cluster_combinatorics, tensor_core
from .lattice_model import LatticeModel

logger = logging.getLogger(__name__)


class CumulantEngine:

    def __init__(self, model: LatticeModel, reading: Optional[str] = None) -> None:
        self.model = model
        self.reading = DissectionReading(reading or settings.DISSECTION_READING)
        logger.info(f"[CUMULANT] CumulantEngine initialized: d={model.d}, reading={self.reading.value}")

    @property
    def d(self) -> int:
        return self.model.d

    # ------------------------------------------------------------------
    # raw kernels on (d^n, d^n) arrays
    # ------------------------------------------------------------------

    def _apply_block(self, data: np.ndarray, n_sites: int, labels, t: float, variant: CumulantVariant) -> np.ndarray:
        size = len(labels)
        sites = [label - 1 for label in labels]
        if variant == CumulantVariant.SCATTERING:
            if size == 1:
                return data
            u = self.model.scattering_unitary(size, t)
        else:
            u = self.model.group_unitary(size, t)
        return tensor_core.conjugate_local(data, u, sites, self.d, n_sites)

    def _partition_sum(
        self, data: np.ndarray, n_sites: int, ground: ClusteredSet, t: float, variant: CumulantVariant
    ) -> np.ndarray:
        acc = np.zeros_like(data, dtype=complex)
        for partition in cluster_combinatorics.enumerate_partitions(ground):
            coefficient = cluster_combinatorics.cumulant_coefficient(partition)
            term = data
            for labels in partition.labels(ground):
                term = self._apply_block(term, n_sites, labels, t, variant)
            acc = acc + coefficient * term
        return acc

    def _correlated(
        self,
        data: np.ndarray,
        n_sites: int,
        ground: ClusteredSet,
        t: float,
        correlations: CorrelationFamily,
        convention: CorrelationConvention,
    ) -> np.ndarray:
        # physical: 𝔄(t) g ∏𝒢_1(t);  printed: 𝔄(-t) g ∏𝒢_1(-t)
        tau = t if convention == CorrelationConvention.PHYSICAL else -t
        labels = ground.theta()
        sites = [label - 1 for label in labels]
        out = self.model.free_evolve_sites(data, n_sites, sites, -tau)
        out = tensor_core.left_multiply_local(out, correlations.on(len(labels)), sites, self.d, n_sites)
        return self._partition_sum(out, n_sites, ground, tau, CumulantVariant.GROUP)

    def apply_cumulant(
        self,
        data: np.ndarray,
        n_sites: int,
        ground: ClusteredSet,
        t: float,
        variant: CumulantVariant,
        correlations: Optional[CorrelationFamily] = None,
        convention: CorrelationConvention = CorrelationConvention.PHYSICAL,
    ) -> np.ndarray:
        if variant == CumulantVariant.CORRELATED:
            if correlations is None:
                raise ConfigError("correlated scattering cumulants need a CorrelationFamily")
            return self._correlated(data, n_sites, ground, t, correlations, convention)
        return self._partition_sum(data, n_sites, ground, t, variant)

    def _attach(
        self,
        data: np.ndarray,
        n_sites: int,
        z,
        attach_range: int,
        t: float,
        variant: CumulantVariant,
        correlations: Optional[CorrelationFamily],
        convention: CorrelationConvention,
        reading: DissectionReading,
    ) -> np.ndarray:
        acc = np.zeros_like(data, dtype=complex)
        for dissection in cluster_combinatorics.enumerate_dissections(z, attach_range, attach_range, reading):
            term = data
            for block, anchor in zip(dissection.blocks, dissection.attachments):
                ground = ClusteredSet(cluster=(anchor,), extras=block)
                term = self.apply_cumulant(term, n_sites, ground, t, variant, correlations, convention)
            acc = acc + dissection.weight * term
        return acc

    def apply_generated(
        self,
        data: np.ndarray,
        s: int,
        n: int,
        t: float,
        variant: GeneratedVariant,
        theta: bool,
        correlations: Optional[CorrelationFamily],
        convention: CorrelationConvention,
        reading: DissectionReading,
    ) -> np.ndarray:
        n_sites = s + n
        kind = CumulantVariant.CORRELATED if variant == GeneratedVariant.CORRELATED else CumulantVariant.SCATTERING
        acc = np.zeros_like(data, dtype=complex)
        for composition in cluster_combinatorics.enumerate_compositions(n):
            term = data
            remaining = n_sites
            # S_1 is applied first, the leading cumulant last
            for part in composition.parts:
                z = tuple(range(remaining - part + 1, remaining + 1))
                remaining -= part
                term = self._attach(term, n_sites, z, remaining, t, kind, correlations, convention, reading)
            lead = ClusteredSet(cluster=tuple(range(1, s + 1)), extras=tuple(range(s + 1, remaining + 1)))
            if theta:
                lead = lead.declusterized()
            term = self.apply_cumulant(term, n_sites, lead, t, kind, correlations, convention)
            acc = acc + (composition.sign * composition.factor) * term
        return acc

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def _validate(self, s: int, n: int, f: Optional[DensityOp]) -> None:
        if s < 1:
            raise DimensionError(f"cluster size must be >= 1, got {s}")
        if n > settings.MAX_ENUMERATION:
            raise CapacityError(f"order n={n} exceeds the enumeration cap {settings.MAX_ENUMERATION}")
        tensor_core.check_capacity(self.d, s + n, self.model.max_rows)
        if f is not None and (f.n, f.d) != (s + n, self.d):
            raise DimensionError(f"expected an operator on n={s + n}, d={self.d}; got n={f.n}, d={f.d}")

    def _check_request(self, req: CumulantRequest, f: Optional[DensityOp]) -> None:
        self._validate(req.cluster_size, req.order, f)
        if req.variant == CumulantVariant.CORRELATED and req.correlations is None:
            raise ConfigError("correlated scattering cumulants need a CorrelationFamily")

    # ------------------------------------------------------------------
    # public operations
    # ------------------------------------------------------------------

    def cumulant(self, req: CumulantRequest, f: DensityOp) -> DensityOp:
        self._check_request(req, f)
        ground = ClusteredSet.standard(req.cluster_size, req.order)
        data = self.apply_cumulant(f.data, req.particles, ground, req.t, req.variant, req.correlations, req.convention)
        return f.with_data(data)

    def group_cumulant(self, req: CumulantRequest, f: DensityOp) -> DensityOp:
        """𝔄_{1+n}(t, {Y}, X∖Y) f."""
        return self.cumulant(req.model_copy(update={"variant": CumulantVariant.GROUP}), f)

    def scattering_cumulant(self, req: CumulantRequest, f: DensityOp) -> DensityOp:
        """𝔄̂_{1+n}(t, {Y}, X∖Y) f: the partition sum over scattering operators."""
        return self.cumulant(req.model_copy(update={"variant": CumulantVariant.SCATTERING}), f)

    def correlated_scattering_cumulant(self, req: CumulantRequest, f: DensityOp) -> DensityOp:
        """𝔄̆_{1+n}(t, {Y}, X∖Y) f."""
        return self.cumulant(req.model_copy(update={"variant": CumulantVariant.CORRELATED}), f)

    def generated_evolution(
        self,
        n: int,
        s: int,
        t: float,
        f: DensityOp,
        variant: GeneratedVariant = GeneratedVariant.PLAIN,
        theta: bool = False,
        correlations: Optional[CorrelationFamily] = None,
        convention: CorrelationConvention = CorrelationConvention.PHYSICAL,
        reading: Optional[DissectionReading] = None,
    ) -> DensityOp:
        """
        𝔙_{1+n}(t, {Y}, X∖Y) f (or 𝔊_{1+n} for the correlated variant).

        Σ_k (-1)^k Σ_{n_1..n_k} n!/(n - Σn_j)! · leading cumulant ∘ S_k ∘ ... ∘ S_1,
        where S_j sums over dissections of Z_j with injective attachments.
        theta=True uses the declusterized cluster θ({Y}) in the leading cumulant.
        """
        variant = GeneratedVariant(variant)
        self._validate(s, n, f)
        if variant == GeneratedVariant.CORRELATED and correlations is None:
            raise ConfigError("correlated generated evolution needs a CorrelationFamily")
        data = self.apply_generated(
            f.data, s, n, t, variant, theta, correlations, convention, DissectionReading(reading or self.reading)
        )
        return f.with_data(data)

    def reconstruct_group(self, s: int, n: int, t: float, f: DensityOp) -> DensityOp:
        """Σ_P ∏_blocks 𝔄_{|block|}(t, block) f, which equals 𝒢_{s+n}(-t) f."""
        self._validate(s, n, f)
        ground = ClusteredSet.standard(s, n)
        acc = np.zeros_like(f.data, dtype=complex)
        for partition in cluster_combinatorics.enumerate_partitions(ground):
            term = f.data
            for block in partition.blocks:
                if partition.contains_cluster(block):
                    sub = ClusteredSet(cluster=ground.cluster, extras=tuple(e for e in block if e != CLUSTER))
                else:
                    sub = ClusteredSet(cluster=block[:1], extras=block[1:])
                term = self._partition_sum(term, s + n, sub, t, CumulantVariant.GROUP)
            acc = acc + term
        return f.with_data(acc)

    def cumulant_superop(self, req: CumulantRequest) -> SuperOp:
        self._check_request(req, None)
        ground = ClusteredSet.standard(req.cluster_size, req.order)

        def action(data: np.ndarray) -> np.ndarray:
            return self.apply_cumulant(data, req.particles, ground, req.t, req.variant, req.correlations, req.convention)

        return SuperOp(req.particles, self.d, action, label=f"{req.variant.value}[{req.order}]")

    def generated_superop(
        self,
        n: int,
        s: int,
        t: float,
        variant: GeneratedVariant = GeneratedVariant.PLAIN,
        theta: bool = False,
        correlations: Optional[CorrelationFamily] = None,
    ) -> SuperOp:
        self._validate(s, n, None)
        reading = self.reading

        def action(data: np.ndarray) -> np.ndarray:
            return self.apply_generated(
                data, s, n, t, GeneratedVariant(variant), theta, correlations, CorrelationConvention.PHYSICAL, reading
            )

        return SuperOp(s + n, self.d, action, label=f"V[{n}]")

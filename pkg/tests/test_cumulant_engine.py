import numpy as np
import pytest

from src.errors import CapacityError, ConfigError, DimensionError
from src.models.kinetic_models import (
    CorrelationConvention,
    CumulantRequest,
    CumulantVariant,
    DissectionReading,
    GeneratedVariant,
    ModelSpec,
)
from src.models.clusters import ClusteredSet
from src.models.operators import CorrelationFamily, DensityOp
from src.services import tensor_core
from src.services.cumulant_engine import CumulantEngine
from src.services.lattice_model import LatticeModel

spec = ModelSpec(d=2, phi=(1.0, 0.25), epsilon=1.0)
model = LatticeModel(spec)
engine = CumulantEngine(model)
f1 = tensor_core.seeded_density(2, seed=1, trace_norm_target=1.0)
pair = DensityOp(n=2, d=2, data=tensor_core.product_state(f1, 2))
triple = DensityOp(n=3, d=2, data=tensor_core.product_state(f1, 3))
t = 0.4


def _close(a, b, tol=1e-10):
    return tensor_core.trace_norm(a - b) <= tol


def test_first_group_cumulant_is_group_evolution():
    req = CumulantRequest(order=0, cluster_size=2, t=t)

    result = engine.group_cumulant(req, pair)

    assert _close(result, model.evolve(model.build_hamiltonian(2), t, pair))


def test_second_group_cumulant_explicit():
    req = CumulantRequest(order=1, cluster_size=1, t=t)
    free = np.kron(model.free_unitary(t), model.free_unitary(t))
    full = model.group_unitary(2, t)

    result = engine.group_cumulant(req, pair)

    expected = full @ pair.data @ full.conj().T - free @ pair.data @ free.conj().T
    assert np.allclose(result.data, expected, atol=1e-12)


def test_cumulants_reconstruct_group():
    rebuilt = engine.reconstruct_group(1, 2, t, triple)

    assert _close(rebuilt, model.evolve(model.build_hamiltonian(3), t, triple))


def test_scattering_cumulant_of_one_particle_cluster_pair():
    req = CumulantRequest(order=1, cluster_size=1, t=t)

    result = engine.scattering_cumulant(req, pair)

    assert _close(result, model.scattering_op(2, t, pair) - pair)


def test_correlated_cumulant_with_identity_matches_scattering():
    identity = CorrelationFamily.identity(2)
    req = CumulantRequest(order=1, cluster_size=2, t=t, correlations=identity)

    correlated = engine.correlated_scattering_cumulant(req, triple)
    scattering = engine.scattering_cumulant(req, triple)

    assert _close(correlated, scattering)


def test_printed_convention_reverses_time():
    identity = CorrelationFamily.identity(2)
    printed = CumulantRequest(order=1, cluster_size=1, t=t, correlations=identity,
                              convention=CorrelationConvention.PRINTED)
    backward = CumulantRequest(order=1, cluster_size=1, t=-t)

    assert _close(engine.correlated_scattering_cumulant(printed, pair), engine.scattering_cumulant(backward, pair))


def test_jastrow_correlations_change_the_cumulant():
    jastrow = CorrelationFamily.jastrow(2, 0.5)
    req = CumulantRequest(order=0, cluster_size=2, t=t, correlations=jastrow)

    correlated = engine.correlated_scattering_cumulant(req, pair)
    plain = engine.scattering_cumulant(req, pair)

    assert tensor_core.trace_norm(correlated - plain) > 1e-3


def test_correlated_cumulant_requires_family():
    req = CumulantRequest(order=1, cluster_size=1, t=t)

    with pytest.raises(ConfigError):
        engine.correlated_scattering_cumulant(req, pair)


def test_correlated_generated_evolution_requires_family():
    with pytest.raises(ConfigError):
        engine.generated_evolution(1, 1, t, pair, variant=GeneratedVariant.CORRELATED)


def test_first_generated_evolution_is_scattering_operator():
    result = engine.generated_evolution(0, 2, t, pair)

    assert _close(result, model.scattering_op(2, t, pair))


def test_declusterized_first_generated_evolution():
    result = engine.generated_evolution(0, 2, t, pair, theta=True)

    assert _close(result, model.scattering_op(2, t, pair) - pair)


def test_second_generated_evolution_of_single_particle_cluster_vanishes():
    result = engine.generated_evolution(1, 1, t, pair)

    assert tensor_core.trace_norm(result) <= 1e-12


def test_generated_evolution_vanishes_without_interaction():
    free_model = LatticeModel(ModelSpec(d=2, phi=(0.0, 0.0)))
    free_engine = CumulantEngine(free_model)

    result = free_engine.generated_evolution(1, 2, t, triple)

    assert tensor_core.trace_norm(result) <= 1e-12


def test_dissection_readings_agree_at_second_order():
    interval = engine.generated_evolution(2, 1, t, triple, reading=DissectionReading.INTERVAL)
    partition = engine.generated_evolution(2, 1, t, triple, reading=DissectionReading.SET_PARTITION)

    assert _close(interval, partition)


def test_generated_superop_matches_direct_application():
    superop = engine.generated_superop(1, 2, t)

    assert _close(superop(triple), engine.generated_evolution(1, 2, t, triple))


def test_dense_cumulant_superop_matches_factored_action():
    req = CumulantRequest(order=1, cluster_size=1, t=t)
    dense = engine.cumulant_superop(req).dense()

    applied = (dense @ pair.data.reshape(-1)).reshape(4, 4)

    assert np.allclose(applied, engine.group_cumulant(req, pair).data, atol=1e-12)


def test_apply_cumulant_on_raw_arrays():
    ground = ClusteredSet.standard(1, 1)

    raw = engine.apply_cumulant(pair.data, 2, ground, t, CumulantVariant.SCATTERING)

    assert np.allclose(raw, (model.scattering_op(2, t, pair) - pair).data, atol=1e-12)


def test_operand_shape_is_checked():
    with pytest.raises(DimensionError):
        engine.generated_evolution(1, 1, t, triple)


def test_order_cap_is_enforced():
    with pytest.raises(CapacityError):
        engine.generated_evolution(7, 1, t, pair)


def test_cluster_must_be_nonempty():
    with pytest.raises(DimensionError):
        engine.generated_evolution(1, 0, t, pair)

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import DimensionError
from src.models.kinetic_models import KineticRule, ModelSpec
from src.models.operators import DensityOp
from src.services import tensor_core
from src.services.lattice_model import LatticeModel, distance_kernel, kinetic_matrix

spec = ModelSpec(d=2, phi=(1.0, 0.25), epsilon=0.5)
model = LatticeModel(spec)
f = tensor_core.seeded_density(2, seed=4, trace_norm_target=1.0)
pair = tensor_core.kron(f, tensor_core.seeded_density(2, seed=9, trace_norm_target=1.0))


def test_kinetic_matrix_two_sites():
    assert np.allclose(kinetic_matrix(spec), [[1.0, -1.0], [-1.0, 1.0]])


def test_kinetic_rule_none_gives_zero():
    free = ModelSpec(d=3, kinetic=KineticRule.NONE, phi=(0.0, 0.0))

    assert not np.any(kinetic_matrix(free))


def test_distance_kernel_uses_torus_distance():
    kernel = distance_kernel(ModelSpec(d=4, phi=(3.0, 2.0, 1.0)))

    assert kernel[0, 0] == 3.0
    assert kernel[0, 1] == 2.0
    assert kernel[0, 2] == 1.0
    assert kernel[0, 3] == 2.0


def test_model_spec_rejects_wrong_phi_length():
    with pytest.raises(ValidationError):
        ModelSpec(d=4, phi=(1.0, 0.5))


def test_model_spec_rejects_non_positive_epsilon():
    with pytest.raises(ValidationError):
        ModelSpec(d=2, phi=(1.0, 0.0), epsilon=0.0)


def test_model_spec_rejects_non_finite_phi():
    with pytest.raises(ValidationError):
        ModelSpec(d=2, phi=(float("nan"), 0.0))


def test_hamiltonian_is_hermitian_with_interaction_on_diagonal():
    h = model.build_hamiltonian(2)
    free = np.kron(kinetic_matrix(spec), np.eye(2)) + np.kron(np.eye(2), kinetic_matrix(spec))
    interaction = np.diag(h.matrix - free)

    assert np.allclose(h.matrix, h.matrix.conj().T)
    assert np.allclose(interaction, 0.5 * np.array([1.0, 0.25, 0.25, 1.0]))


def test_build_hamiltonian_rejects_zero_particles():
    with pytest.raises(DimensionError):
        model.build_hamiltonian(0)


def test_evolution_preserves_trace_norm():
    evolved = model.evolve(model.build_hamiltonian(2), 0.7, pair)

    assert tensor_core.trace_norm(evolved) == pytest.approx(tensor_core.trace_norm(pair), abs=1e-12)


def test_evolution_group_law():
    h = model.build_hamiltonian(2)

    twice = model.evolve(h, 0.3, model.evolve(h, 0.4, pair))
    once = model.evolve(h, 0.7, pair)

    assert tensor_core.trace_norm(twice - once) <= 1e-12


def test_evolution_at_zero_time_is_identity():
    h = model.build_hamiltonian(2)

    assert model.evolve(h, 0.0, pair) is pair


def test_liouvillian_matches_finite_difference():
    h = model.build_hamiltonian(2)
    tau = 1e-5

    difference = (model.evolve(h, tau, pair) - model.evolve(h, -tau, pair)) * (0.5 / tau)

    assert tensor_core.trace_norm(difference - model.liouvillian(h, pair)) <= 1e-8


def test_interaction_liouvillian_rejects_bad_pair():
    with pytest.raises(DimensionError):
        model.interaction_liouvillian((2, 1), pair)


def test_interaction_liouvillian_has_no_epsilon():
    commutator = model.interaction_liouvillian((1, 2), pair)
    diag = np.array([1.0, 0.25, 0.25, 1.0])
    expected = -1j * (np.diag(diag) @ pair.data - pair.data @ np.diag(diag))

    assert np.allclose(commutator.data, expected)


def test_free_group_is_product_of_one_particle_groups():
    free = LatticeModel(spec.without_interaction())

    assert np.allclose(free.group_unitary(2, 0.8), np.kron(free.free_unitary(0.8), free.free_unitary(0.8)))


def test_scattering_operator_is_identity_without_interaction():
    free = LatticeModel(spec.without_interaction())

    scattered = free.scattering_op(2, 1.3, pair)

    assert tensor_core.trace_norm(scattered - pair) <= 1e-13


def test_scattering_operator_composes_backward_free_flow():
    t = 0.6
    scattered = model.scattering_op(2, t, pair).data
    backward = model.free_evolve_sites(pair.data, 2, (0, 1), -t)
    expected = model.evolve(model.build_hamiltonian(2), t, DensityOp(n=2, d=2, data=backward)).data

    assert np.allclose(scattered, expected, atol=1e-13)


def test_free_evolve_sites_only_moves_selected_sites():
    t = 0.9
    moved = model.free_evolve_sites(pair.data, 2, (1,), t)
    u = np.kron(np.eye(2), model.free_unitary(t))

    assert np.allclose(moved, u @ pair.data @ u.conj().T, atol=1e-14)


def test_with_epsilon_changes_only_interaction_strength():
    other = model.with_epsilon(0.1)

    assert other.spec.epsilon == 0.1
    assert other.spec.phi == spec.phi


def test_evolution_preserves_positivity():
    evolved = model.evolve(model.build_hamiltonian(2), 1.3, pair)

    assert tensor_core.smallest_eigenvalue(evolved) >= -1e-10


def test_hamiltonian_is_permutation_symmetric():
    h = DensityOp(n=3, d=2, data=model.build_hamiltonian(3).matrix)

    for perm in [(2, 1, 3), (3, 1, 2), (1, 3, 2)]:
        assert np.allclose(tensor_core.permute_particles(h, perm).data, h.data, atol=1e-14)

import numpy as np
import pytest

from src.matcore import inner, partial_trace, random_density
from src.protocol import (
    A_DIM,
    SIGNALS,
    TABLES,
    SourceModel,
    a_index,
    bob_povm,
    build_gz_maps,
    build_observables,
    entangled_source,
    reduced_source,
    simulated_state,
    validate_full_g,
)
from src.solver import objective


# ---------------------------------------------------------------------------
# Test 1: Signal states and Bob's POVM
# ---------------------------------------------------------------------------

def test_signal_overlaps():
    """Distinct signals overlap by -1/2; each dual is orthogonal to its own signal."""
    for j in range(3):
        assert SIGNALS.overlap(j, j) == pytest.approx(1.0)
        assert SIGNALS.dual_overlap(j, j) == pytest.approx(0.0, abs=1e-15)
        for k in range(3):
            if k != j:
                assert SIGNALS.overlap(j, k) == pytest.approx(-0.5)


@pytest.mark.parametrize("model", list(SourceModel))
def test_bob_povm_is_complete(model):
    """POVM elements are positive and sum to the identity on Bob's space."""
    povm = bob_povm(model)
    assert len(povm) == model.n_outcomes
    assert np.allclose(sum(povm), np.eye(model.b_dim), atol=1e-12)
    for element in povm:
        assert np.linalg.eigvalsh(element)[0] > -1e-12


def test_announcement_tables():
    """Each trit has two conclusive outcomes and the error outcome is one of them."""
    for r in range(3):
        assert len(TABLES.conclusive(r)) == 2
        for b in range(2):
            assert TABLES.error_outcome(r, b) in TABLES.conclusive(r)
            assert TABLES.g[(TABLES.error_outcome(r, b), r)] != b


# ---------------------------------------------------------------------------
# Test 2: Entangled source and observables
# ---------------------------------------------------------------------------

def test_reduced_source_is_a_state():
    """rho_A has unit trace and uniform diagonal 1/6."""
    rho_a = reduced_source()
    assert np.trace(rho_a).real == pytest.approx(1.0)
    assert np.allclose(np.diag(rho_a).real, 1.0 / 6.0)


def test_theta_orientation():
    """theta for (r, b) = (0, 0) against (0, 1) is <psi_1|psi_0>/6 = -1/12."""
    obs = build_observables(SourceModel.SINGLE_PHOTON)
    assert len(obs.theta) == 36
    assert obs.theta[(0, 0, 0, 1)] == pytest.approx(-1.0 / 12.0, abs=1e-12)
    assert obs.theta[(0, 0, 0, 0)] == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_theta_values_match_source_for_both_models():
    """Tr(Theta ⊗ I rho_AA') equals the tabulated theta in both source models."""
    for model in SourceModel:
        obs = build_observables(model)
        rho = entangled_source(model)
        for key, value in obs.theta.items():
            assert inner(obs.lifted_theta(key), rho) == pytest.approx(value, abs=1e-12)


def test_observables_on_simulated_state_sum_to_one():
    """The nine Q_j ⊗ P_k exhaust the joint probability."""
    obs = build_observables(SourceModel.SINGLE_PHOTON)
    rho = simulated_state(SourceModel.SINGLE_PHOTON, 0.1)
    total = sum(inner(op, rho) for op in obs.O.values())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_simulated_state_keeps_alice_marginal():
    """Depolarizing Bob's side leaves rho_A untouched."""
    model = SourceModel.SQUASHED_COHERENT
    rho = simulated_state(model, 0.3)
    assert np.allclose(partial_trace(rho, [A_DIM, model.b_dim], keep=[0]), reduced_source(), atol=1e-12)


# ---------------------------------------------------------------------------
# Test 3: Post-selection and key map
# ---------------------------------------------------------------------------

def test_full_g_matches_simplified():
    """The announcement-register construction agrees with the simplified Kraus map."""
    for seed in range(3):
        rho = random_density(12, np.random.default_rng(seed))
        assert validate_full_g(rho) < 1e-10


def test_pass_probability_at_zero_noise():
    """Tr G(rho) is the sifting probability 1/2 for the noiseless state."""
    maps = build_gz_maps(SourceModel.SINGLE_PHOTON)
    g_rho = maps.G.apply(simulated_state(SourceModel.SINGLE_PHOTON, 0.0))
    assert np.trace(g_rho).real == pytest.approx(0.5, abs=1e-12)


def test_key_map_keyed_on_alice_bit():
    """A state with Alice's register in |r=1, b=1> puts all key weight on R = 1."""
    maps = build_gz_maps(SourceModel.SINGLE_PHOTON)
    alice = np.zeros((A_DIM, A_DIM))
    alice[a_index(1, 1), a_index(1, 1)] = 1.0
    rho = np.kron(alice, np.eye(2) / 2)
    g_rho = maps.G.apply(rho)
    r0 = partial_trace(g_rho, maps.output_dims, keep=[0])
    assert r0[0, 0].real == pytest.approx(0.0, abs=1e-12)
    assert r0[1, 1].real > 0


@pytest.mark.parametrize("model", list(SourceModel))
def test_objective_invariant_under_b_compression(model):
    """Dropping Bob's register after the measurement does not change f."""
    rho = simulated_state(model, 0.05)
    full = objective(rho, build_gz_maps(model, compress_b=False))
    compressed = objective(rho, build_gz_maps(model, compress_b=True))
    assert compressed == pytest.approx(full, abs=1e-9)


def test_objective_at_zero_noise():
    """Perfect correlations with pass probability 1/2 give f = 1/2."""
    model = SourceModel.SINGLE_PHOTON
    f = objective(simulated_state(model, 0.0), build_gz_maps(model))
    assert f == pytest.approx(0.5, abs=0.01)


def test_objective_zero_without_passing_events():
    """Bob's vacuum flag never passes sifting, so G(rho) = 0 and f = 0."""
    model = SourceModel.SQUASHED_COHERENT
    alice = np.zeros((A_DIM, A_DIM))
    alice[a_index(0, 0), a_index(0, 0)] = 1.0
    vacuum = np.diag([1.0, 0.0, 0.0])
    rho = np.kron(alice, vacuum)
    maps = build_gz_maps(model)
    assert np.allclose(maps.G.apply(rho), 0.0)
    assert objective(rho, maps) == pytest.approx(0.0, abs=1e-12)

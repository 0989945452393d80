import itertools

import numpy as np
import pytest

from src.errors import SquashingFailure
from src.squashing import (
    KNOWN_WITNESSES,
    build_choi,
    build_fmpn,
    build_mode_basis,
    certificate_record,
    closed_form_blocks,
    closed_form_gram,
    disc_lower_bound,
    gershgorin_certificate,
    gershgorin_f,
    gershgorin_threshold,
    min_eigenvalue,
    reconstruct_and_check,
    remap_witness,
    search_witness,
    span_projector,
    verify_range,
)


# ---------------------------------------------------------------------------
# Test 1: Click states
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("N", range(1, 11))
def test_gram_matches_closed_form(N):
    """Fock-space overlaps give [[1, a, a], [a, 1, b], [a, b, 1]], a = 2^-N, b = (-1/2)^N."""
    basis = build_mode_basis(N)
    assert np.allclose(basis.gram, closed_form_gram(N), atol=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3, 6])
def test_fmpn_sums_to_span_projector(N):
    """Single-click elements with folded multi-clicks exhaust the click subspace."""
    basis = build_mode_basis(N)
    assert np.allclose(sum(build_fmpn(N, basis)), span_projector(basis), atol=1e-12)


def test_one_photon_elements_are_qubit_povm():
    """N = 1 gives back (2/3)|psi_bar_k><psi_bar_k| with no multi-click part."""
    from src.protocol import SIGNALS

    for f, dual in zip(build_fmpn(1), SIGNALS.duals):
        assert np.allclose(f, 2.0 / 3.0 * np.outer(dual, dual.conj()).real, atol=1e-12)


def test_mode_basis_rejects_zero_photons():
    with pytest.raises(ValueError):
        build_mode_basis(0)


# ---------------------------------------------------------------------------
# Test 2: Block matrices
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("N", range(2, 11))
def test_fock_blocks_match_closed_form(N):
    """Blocks built from Fock vectors agree with the a, b, t formulas."""
    fock, closed = build_choi(N), closed_form_blocks(N)
    for name in ("M1", "Mx", "Mz"):
        assert np.allclose(getattr(fock, name), getattr(closed, name), atol=1e-12), name


def test_assembled_matrix_is_symmetric():
    blocks = build_choi(4, KNOWN_WITNESSES[4])
    assert np.allclose(blocks.assembled, blocks.assembled.T)


def test_phase_conventions_preserve_spectrum():
    """All eight sign patterns at N = 3 give the same minimum eigenvalue once x is remapped."""
    x = KNOWN_WITNESSES[3]
    reference = min_eigenvalue(build_choi(3, x))
    for signs in itertools.product((1, -1), repeat=3):
        value = min_eigenvalue(build_choi(3, remap_witness(x, signs), signs))
        assert value == pytest.approx(reference, abs=1e-12), signs


# ---------------------------------------------------------------------------
# Test 3: Witnesses for small N
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_listed_witnesses_are_positive(N):
    """The tabulated x makes the block matrix positive definite."""
    assert min_eigenvalue(build_choi(N, KNOWN_WITNESSES[N])) > 0


@pytest.mark.parametrize("N, too_high", [(2, 0.536), (3, 0.713), (4, 0.889), (5, 0.930)])
def test_witness_eigenvalue_below_diagonal_bound(N, too_high):
    """0 < lambda_min <= (M1 + Mz)[0, 0] = 1 - 2 (2/3)^N (1 - a^2), a = 2^-N.

    The bound rules out minimum eigenvalues as large as ``too_high``.
    """
    a = 2.0 ** -N
    diagonal_bound = 1.0 - 2.0 * (2.0 / 3.0) ** N * (1.0 - a * a)
    blocks = build_choi(N, KNOWN_WITNESSES[N])
    assert blocks.assembled[0, 0] == pytest.approx(diagonal_bound, abs=1e-12)
    value = min_eigenvalue(blocks)
    assert 0.0 < value <= diagonal_bound
    assert diagonal_bound < too_high


@pytest.mark.parametrize("N", [2, 3])
def test_search_never_worse_than_seed(N):
    seed = KNOWN_WITNESSES[N]
    x, value = search_witness(N, seed)
    assert value >= min_eigenvalue(build_choi(N, seed)) - 1e-12
    assert value == pytest.approx(min_eigenvalue(build_choi(N, x)), abs=1e-12)


def test_search_needs_two_photons():
    with pytest.raises(ValueError):
        search_witness(1)


# ---------------------------------------------------------------------------
# Test 4: Gershgorin certificate
# ---------------------------------------------------------------------------

def test_f_of_six():
    """f(6) = 1 - 0.0313 - 0.3277 - 0.0308."""
    assert gershgorin_f(6) == pytest.approx(0.610, abs=1e-3)


def test_f_negative_for_two_photons():
    assert gershgorin_f(2) < 0


def test_f_positive_and_increasing_beyond_five():
    values = [gershgorin_f(N) for N in range(6, 101)]
    assert all(v > 0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))


def test_threshold_is_at_most_six():
    assert gershgorin_threshold() <= 6


def test_threshold_failure_when_range_too_small():
    with pytest.raises(SquashingFailure):
        gershgorin_threshold(n_max=3)


@pytest.mark.parametrize("N", [6, 10, 20, 40])
def test_disc_bound_dominates_f(N):
    """The actual leftmost disc point is never below the analytic f(N)."""
    cert = gershgorin_certificate(N)
    assert cert.positive
    assert cert.disc_lower_bound >= cert.f_of_n - 1e-12
    assert min_eigenvalue(closed_form_blocks(N)) >= cert.disc_lower_bound - 1e-12


def test_disc_lower_bound_of_diagonal():
    """Without off-diagonal entries the bound is the smallest diagonal entry."""
    assert disc_lower_bound(np.diag([3.0, 1.5, 2.0])) == pytest.approx(1.5)


# ---------------------------------------------------------------------------
# Test 5: Range verification and reconstruction
# ---------------------------------------------------------------------------

def test_verify_small_range():
    """N = 1..5: identity then witness verdicts, all positive."""
    verdicts = verify_range(5)
    assert [v.N for v in verdicts] == [1, 2, 3, 4, 5]
    assert verdicts[0].method == "identity"
    assert all(v.method == "witness-x" for v in verdicts[1:])
    assert all(v.positive for v in verdicts)


def test_verify_up_to_forty():
    """Direct eigenvalues and the Gershgorin certificate agree for N = 6..40."""
    verdicts = verify_range(40)
    for N in range(6, 41):
        methods = {v.method: v for v in verdicts if v.N == N}
        assert set(methods) == {"direct-eig", "gershgorin"}
        assert methods["direct-eig"].positive and methods["gershgorin"].positive


def test_gershgorin_only_beyond_forty():
    verdicts = [v for v in verify_range(45) if v.N > 40]
    assert {v.method for v in verdicts} == {"gershgorin"}


def test_verify_range_rejects_zero():
    with pytest.raises(ValueError):
        verify_range(0)


@pytest.mark.parametrize("N", [1, 2, 3, 6])
def test_reconstructed_map_reproduces_statistics(N):
    """Lambda built from the Choi matrix turns the qubit POVM into the N-photon one."""
    x = KNOWN_WITNESSES.get(N, (0.0, 0.0, 0.0))
    assert reconstruct_and_check(N, x, samples=50) < 1e-8


def test_reconstruction_rejects_non_positive_choi():
    """A huge antisymmetric part destroys positivity."""
    with pytest.raises(SquashingFailure):
        reconstruct_and_check(3, (5.0, 5.0, 5.0))


def test_certificate_record_fields():
    record = certificate_record(verify_range(2)[1])
    assert record["N"] == 2
    assert record["method"] == "witness-x"
    assert record["positive"] is True
    assert len(record["witness"]) == 3
    assert record["version"]

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import (
    DimensionError,
    GramSingularError,
    NegativeSpectrumError,
    NotHermitianError,
    SupportError,
)
from src.matcore import (
    KrausChannel,
    basis_projectors,
    check_density,
    check_hermitian,
    gram_schmidt,
    hermitian_eigensystem,
    inner,
    matrix_log2,
    partial_trace,
    pinching,
    projector,
    random_density,
    random_hermitian,
    relative_entropy,
    tensor_product,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Test 1: Validation
# ---------------------------------------------------------------------------

def test_check_hermitian_rejects_non_hermitian():
    """An operator with an asymmetric off-diagonal entry is rejected."""
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_check_hermitian_rejects_non_square():
    """Rectangular input is a dimension error, not a Hermiticity error."""
    with pytest.raises(DimensionError):
        check_hermitian(np.zeros((2, 3)))


def test_check_density_rejects_negative_spectrum():
    """diag(1.5, -0.5) has unit trace but is not positive."""
    with pytest.raises(NegativeSpectrumError) as exc:
        check_density(np.diag([1.5, -0.5]))
    assert exc.value.context["min_eig"] == pytest.approx(-0.5)


def test_check_density_accepts_subnormalized_with_target():
    """Sub-normalized states pass when the trace target says so."""
    rho = np.diag([0.2, 0.1])
    assert check_density(rho, trace_target=0.3) is not None


# ---------------------------------------------------------------------------
# Test 2: Composite systems
# ---------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds)
def test_partial_trace_of_product_state(seed):
    """Tr_B(rho ⊗ sigma) = rho and Tr_A(rho ⊗ sigma) = sigma."""
    rng = _rng(seed)
    rho, sigma = random_density(2, rng), random_density(3, rng)
    joint = tensor_product(rho, sigma)
    assert np.allclose(partial_trace(joint, [2, 3], keep=[0]), rho, atol=1e-12)
    assert np.allclose(partial_trace(joint, [2, 3], keep=[1]), sigma, atol=1e-12)


def test_partial_trace_keeps_middle_factor():
    """Three factors, keep the middle one."""
    a, b, c = np.diag([1.0, 0.0]), np.diag([0.25, 0.75]), np.eye(2) / 2
    out = partial_trace(tensor_product(a, b, c), [2, 2, 2], keep=[1])
    assert np.allclose(out, b)


def test_partial_trace_dimension_mismatch():
    """Subsystem dimensions must multiply to the operator dimension."""
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6), [2, 2], keep=[0])


# ---------------------------------------------------------------------------
# Test 3: Relative entropy
# ---------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=5))
def test_relative_entropy_non_negative(seed, dim):
    """D(rho || sigma) >= 0, with equality at rho = sigma."""
    rng = _rng(seed)
    rho, sigma = random_density(dim, rng), random_density(dim, rng)
    assert relative_entropy(rho, sigma) >= 0.0
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)


def test_relative_entropy_against_diagonal_value():
    """Commuting states reduce to the classical KL divergence in bits."""
    rho, sigma = np.diag([0.5, 0.5]), np.diag([0.25, 0.75])
    expected = 0.5 * np.log2(0.5 / 0.25) + 0.5 * np.log2(0.5 / 0.75)
    assert relative_entropy(rho, sigma) == pytest.approx(expected, abs=1e-12)


def test_relative_entropy_support_violation():
    """rho = |0><0| against sigma = |1><1| has no finite divergence."""
    with pytest.raises(SupportError):
        relative_entropy(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def test_relative_entropy_on_common_support():
    """A rank-deficient rho inside the support of a rank-deficient sigma is fine."""
    rho = np.diag([1.0, 0.0, 0.0])
    sigma = np.diag([0.5, 0.5, 0.0])
    assert relative_entropy(rho, sigma) == pytest.approx(1.0, abs=1e-12)


def test_matrix_log2_of_identity_multiple():
    """log2(4 I) = 2 I."""
    assert np.allclose(matrix_log2(4 * np.eye(3)), 2 * np.eye(3))


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([0.25, 0.5, 0.75]))
def test_relative_entropy_is_jointly_convex(seed, lam):
    """D of the mixtures is at most the mixture of the D values, on 4-dim states."""
    rng = _rng(seed)
    rho1, rho2, sigma1, sigma2 = (random_density(4, rng) for _ in range(4))
    mixed = relative_entropy(lam * rho1 + (1 - lam) * rho2, lam * sigma1 + (1 - lam) * sigma2)
    separate = lam * relative_entropy(rho1, sigma1) + (1 - lam) * relative_entropy(rho2, sigma2)
    assert mixed <= separate + 1e-9


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=12))
def test_eigensystem_reconstructs_the_operator(seed, dim):
    a = random_hermitian(dim, _rng(seed))
    evals, evecs = hermitian_eigensystem(a)
    assert np.all(np.diff(evals) >= 0)
    assert np.allclose(evecs.conj().T @ evecs, np.eye(dim), atol=1e-12)
    assert np.max(np.abs((evecs * evals) @ evecs.conj().T - a)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(min_value=0.1, max_value=1.0))
def test_matrix_log2_inverts_exp2(seed, radius):
    """log2(2^A) = A for Hermitian A with spectrum inside [-3, 3]."""
    a = random_hermitian(4, _rng(seed))
    a *= 3.0 * radius / np.max(np.abs(np.linalg.eigvalsh(a)))
    evals, evecs = np.linalg.eigh(a)
    exp2 = (evecs * 2.0 ** evals) @ evecs.conj().T
    assert np.allclose(matrix_log2(exp2), a, atol=1e-10)


# ---------------------------------------------------------------------------
# Test 4: Kraus channels
# ---------------------------------------------------------------------------

def test_kraus_channel_rejects_trace_increasing():
    """2·I increases the trace and cannot be a channel."""
    with pytest.raises(DimensionError):
        KrausChannel((2 * np.eye(2),))


def test_pinching_is_dephasing():
    """Pinching by the computational basis keeps exactly the diagonal."""
    rho = random_density(4, _rng(7))
    out = pinching(basis_projectors(4)).apply(rho)
    assert np.allclose(out, np.diag(np.diag(rho)))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_adjoint_duality(seed):
    """<A, Phi(rho)> = <Phi^dag(A), rho> for a random two-element channel."""
    rng = _rng(seed)
    k0 = np.diag([1.0, np.sqrt(0.5)])
    k1 = np.array([[0.0, np.sqrt(0.5)], [0.0, 0.0]])
    ch = KrausChannel((k0, k1), trace_preserving=True)
    rho, a = random_density(2, rng), random_hermitian(2, rng)
    assert inner(a, ch.apply(rho)) == pytest.approx(inner(ch.adjoint(a), rho), abs=1e-12)


# ---------------------------------------------------------------------------
# Test 5: Gram-Schmidt
# ---------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds)
def test_gram_schmidt_reconstructs_input(seed):
    """Columns of basis @ r give back the input; basis is orthonormal; r has positive diagonal."""
    rng = _rng(seed)
    vectors = [rng.normal(size=4) + 1j * rng.normal(size=4) for _ in range(3)]
    basis, r = gram_schmidt(vectors)
    assert np.allclose(basis.conj().T @ basis, np.eye(3), atol=1e-10)
    assert np.allclose(basis @ r, np.column_stack(vectors), atol=1e-10)
    assert np.allclose(np.tril(r, -1), 0)
    assert np.all(np.real(np.diag(r)) > 0)


def test_gram_schmidt_dependent_vectors():
    """A repeated vector makes the Gram determinant vanish."""
    v = np.array([1.0, 0.0])
    with pytest.raises(GramSingularError):
        gram_schmidt([v, 2 * v])


def test_projector_is_rank_one():
    """|v><v| for a unit vector is idempotent."""
    p = projector(np.array([1.0, 1.0j]) / np.sqrt(2))
    assert np.allclose(p @ p, p)

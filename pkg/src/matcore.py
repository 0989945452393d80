"""Dense Hermitian linear algebra and quantum-information primitives.

Operators are plain complex ``numpy`` arrays. ``HermitianOperator`` and
``DensityOperator`` are aliases documenting intent; ``check_hermitian`` and
``check_density`` enforce the invariants where a caller needs them.

Composite systems use Kronecker ordering with the left factor slowest,
everywhere in the package.
"""
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.errors import (
    DimensionError,
    GramSingularError,
    NegativeSpectrumError,
    NotHermitianError,
    SupportError,
)

logger = logging.getLogger(__name__)

HermitianOperator = np.ndarray
DensityOperator = np.ndarray

HERMITIAN_ATOL = 1e-12
SPECTRAL_FLOOR = 1e-12
NEGATIVE_EIG_TOL = 1e-8


# ── Validation ──────────────────────────────────────────────────────────────

def as_operator(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError("operator must be a non-empty square matrix", {"shape": a.shape})
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def check_hermitian(a, atol: float = HERMITIAN_ATOL) -> HermitianOperator:
    a = as_operator(a)
    deviation = float(np.max(np.abs(a - a.conj().T)))
    if deviation > atol:
        raise NotHermitianError("operator is not Hermitian", {"deviation": deviation, "atol": atol})
    return a


def check_density(rho, trace_target: float = 1.0, eig_tol: float = 1e-10,
                  trace_tol: float = 1e-10) -> DensityOperator:
    """Validate a (possibly sub-normalized) density operator and return it."""
    rho = check_hermitian(rho, atol=max(HERMITIAN_ATOL, eig_tol))
    min_eig = float(linalg.eigvalsh(symmetrize(rho))[0])
    if min_eig < -eig_tol:
        raise NegativeSpectrumError("density operator has a negative eigenvalue",
                                    {"min_eig": min_eig, "tol": eig_tol})
    trace = float(np.real(np.trace(rho)))
    if abs(trace - trace_target) > trace_tol:
        raise DimensionError("density operator trace differs from its target",
                             {"trace": trace, "target": trace_target})
    return rho


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product Re Tr(a† b)."""
    return float(np.real(np.vdot(a, b)))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


# ── Kraus channels ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class KrausChannel:
    """A completely positive map given by Kraus operators of shape (dim_out, dim_in)."""

    kraus: Tuple[np.ndarray, ...]
    trace_preserving: bool = False
    tolerance: float = 1e-10

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise DimensionError("a channel needs at least one Kraus operator")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1 or ops[0].ndim != 2:
            raise DimensionError("Kraus operators must share one 2-D shape", {"shapes": sorted(shapes)})
        object.__setattr__(self, "kraus", ops)

        completeness = sum(k.conj().T @ k for k in ops)
        eigs = linalg.eigvalsh(symmetrize(completeness))
        if self.trace_preserving:
            deviation = float(np.max(np.abs(completeness - np.eye(self.dim_in))))
            if deviation > self.tolerance:
                raise DimensionError("Kraus operators are not trace preserving", {"deviation": deviation})
        elif eigs[-1] > 1 + self.tolerance:
            raise DimensionError("Kraus operators are not trace non-increasing", {"max_eig": float(eigs[-1])})

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim_in, self.dim_in):
            raise DimensionError("channel input has the wrong dimension",
                                 {"expected": self.dim_in, "got": rho.shape})
        out = sum(k @ rho @ k.conj().T for k in self.kraus)
        return symmetrize(out)

    def adjoint(self, a: np.ndarray) -> np.ndarray:
        if a.shape != (self.dim_out, self.dim_out):
            raise DimensionError("adjoint input has the wrong dimension",
                                 {"expected": self.dim_out, "got": a.shape})
        out = sum(k.conj().T @ a @ k for k in self.kraus)
        return symmetrize(out)

    def completeness(self) -> np.ndarray:
        return symmetrize(sum(k.conj().T @ k for k in self.kraus))


def apply_kraus(ch: KrausChannel, rho: np.ndarray) -> HermitianOperator:
    return ch.apply(np.asarray(rho, dtype=complex))


def adjoint_apply(ch: KrausChannel, a: np.ndarray) -> HermitianOperator:
    return ch.adjoint(np.asarray(a, dtype=complex))


def pinching(projectors: Sequence[np.ndarray]) -> KrausChannel:
    return KrausChannel(tuple(projectors), trace_preserving=True)


# ── Composite systems ───────────────────────────────────────────────────────

def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product; the leftmost factor is the slowest index."""
    if not ops:
        raise DimensionError("tensor_product needs at least one factor")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def partial_trace(a: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem of ``a`` whose index is not in ``keep``."""
    a = as_operator(a)
    dims = [int(d) for d in dims]
    keep = sorted(set(keep))
    total = int(np.prod(dims))
    if total != a.shape[0]:
        raise DimensionError("subsystem dimensions do not match the operator",
                             {"dims": dims, "dim": a.shape[0]})
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError("kept subsystem index out of range", {"keep": keep, "n": len(dims)})

    n = len(dims)
    tensor = a.reshape(dims + dims)
    for axis in sorted(set(range(n)) - set(keep), reverse=True):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + n)
        n -= 1
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tensor.reshape(kept, kept)


# ── Spectral functions ──────────────────────────────────────────────────────

def hermitian_eigensystem(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and the unitary of eigenvectors (columns)."""
    a = symmetrize(as_operator(a))
    return linalg.eigh(a)


def matrix_log2(a: np.ndarray, floor: float = SPECTRAL_FLOOR) -> HermitianOperator:
    evals, evecs = hermitian_eigensystem(a)
    if evals[0] < -NEGATIVE_EIG_TOL:
        raise NegativeSpectrumError("matrix logarithm of an operator with negative spectrum",
                                    {"min_eig": float(evals[0])})
    logs = np.log2(np.maximum(evals, floor))
    return symmetrize((evecs * logs) @ evecs.conj().T)


def relative_entropy(rho: np.ndarray, sigma: np.ndarray, floor: float = SPECTRAL_FLOOR,
                     support_tol: float = NEGATIVE_EIG_TOL) -> float:
    """D(rho || sigma) in bits, evaluated on the numerical supports.

    Eigenvalues at or below ``floor`` count as zero. Weight of ``rho`` on the
    kernel of ``sigma`` above ``support_tol`` is a support violation.
    """
    r_vals, _ = hermitian_eigensystem(rho)
    s_vals, s_vecs = hermitian_eigensystem(sigma)
    for name, vals in (("rho", r_vals), ("sigma", s_vals)):
        if vals[0] < -NEGATIVE_EIG_TOL:
            raise NegativeSpectrumError(f"{name} has negative spectrum", {"min_eig": float(vals[0])})

    r_pos = r_vals[r_vals > floor]
    entropy_term = float(np.sum(r_pos * np.log2(r_pos)))

    # diagonal of rho in the eigenbasis of sigma
    weights = np.real(np.einsum("ij,ik,kj->j", s_vecs.conj(), symmetrize(as_operator(rho)), s_vecs))
    kernel = s_vals <= floor
    leaked = float(np.sum(weights[kernel]))
    if leaked > support_tol:
        raise SupportError("rho has weight outside the support of sigma",
                           {"weight": leaked, "floor": floor})
    cross_term = float(np.sum(weights[~kernel] * np.log2(s_vals[~kernel])))
    return max(entropy_term - cross_term, 0.0)


# ── Gram-Schmidt ────────────────────────────────────────────────────────────

def gram_schmidt(vectors: Sequence[np.ndarray], det_tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormalize ``vectors`` in input order.

    Returns ``(basis, r)`` with the orthonormal vectors as the columns of
    ``basis`` and ``r`` upper triangular with positive diagonal, so that the
    input vectors are the columns of ``basis @ r``.
    """
    v = np.column_stack([np.asarray(x, dtype=complex).reshape(-1) for x in vectors])
    gram = v.conj().T @ v
    det = float(np.real(linalg.det(gram)))
    if det <= det_tol:
        raise GramSingularError("vectors are numerically dependent", {"gram_det": det})

    n = v.shape[1]
    basis = np.zeros_like(v)
    r = np.zeros((n, n), dtype=complex)
    for k in range(n):
        w = v[:, k].copy()
        for i in range(k):
            r[i, k] = np.vdot(basis[:, i], w)
            w = w - r[i, k] * basis[:, i]
        r[k, k] = np.linalg.norm(w)
        basis[:, k] = w / r[k, k]
    return basis, r


# ── Random instances (tests and statistical checks) ─────────────────────────

def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * symmetrize(g)


def random_density(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Ginibre-distributed density operator of the requested rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return symmetrize(rho / np.real(np.trace(rho)))


def basis_projectors(dim: int) -> List[np.ndarray]:
    return [projector(ket(i, dim)) for i in range(dim)]

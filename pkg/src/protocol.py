"""The three-state protocol: signal states, Bob's POVM, the entangled source,
the constraint observables and the post-selection / key-map channels.

Register conventions
--------------------
A  = A1 (trit r) ⊗ A2 (bit b), basis index 2r + b, dimension 6.
B  = Bob's qubit (single-photon model) or vacuum flag ⊕ qubit (squashed
     model, index 0 is the vacuum flag).
G output is R ⊗ A ⊗ B ⊗ B̄, or R ⊗ A ⊗ B̄ when the B register is compressed.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import DimensionError
from src.matcore import (
    KrausChannel,
    check_density,
    ket,
    partial_trace,
    pinching,
    projector,
    symmetrize,
    tensor_product,
)

logger = logging.getLogger(__name__)

N_SIGNALS = 3
A_DIM = 6
R_DIM = 2
PASS, FAIL = 0, 1


class SourceModel(str, Enum):
    SINGLE_PHOTON = "single-photon"
    SQUASHED_COHERENT = "squashed-coherent"

    @property
    def b_dim(self) -> int:
        return 2 if self is SourceModel.SINGLE_PHOTON else 3

    @property
    def n_outcomes(self) -> int:
        return 3 if self is SourceModel.SINGLE_PHOTON else 4


def a_index(r: int, b: int) -> int:
    return 2 * r + b


# ── Signal states ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SignalSet:
    states: np.ndarray   # row j is |psi_j>
    duals: np.ndarray    # row k is |psi_bar_k>, orthogonal to |psi_k>
    priors: np.ndarray   # 1/6 per (r, b), indexed by 2r + b

    @property
    def povm(self) -> List[np.ndarray]:
        """Bob's qubit POVM P_k = (2/3)|psi_bar_k><psi_bar_k|."""
        return [2.0 / 3.0 * projector(d) for d in self.duals]

    def overlap(self, j: int, k: int) -> float:
        """<psi_j|psi_k>, real in this convention."""
        return float(np.real(np.vdot(self.states[j], self.states[k])))

    def dual_overlap(self, j: int, k: int) -> float:
        """<psi_j|psi_bar_k>."""
        return float(np.real(np.vdot(self.states[j], self.duals[k])))


def build_signal_set() -> SignalSet:
    angles = 2 * np.pi * np.arange(N_SIGNALS) / 3
    states = np.stack([np.cos(angles), -np.sin(angles)], axis=1).astype(complex)
    duals = np.stack([np.sin(angles), np.cos(angles)], axis=1).astype(complex)
    priors = np.full(A_DIM, 1.0 / 6.0)
    return SignalSet(states=states, duals=duals, priors=priors)


# ── Announcement tables ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class ProtocolTables:
    """f(r, b) -> signal index and g(p, r) -> key bit, None when inconclusive."""

    f: Dict[Tuple[int, int], int]
    g: Dict[Tuple[int, int], Optional[int]]

    def conclusive(self, r: int) -> Tuple[int, ...]:
        """Bob's conclusive outcomes for Alice's trit r, in Kraus order."""
        return tuple(p for p in ((r, (r + 1) % 3, (r + 2) % 3)) if self.g[(p, r)] is not None)

    def error_outcome(self, r: int, b: int) -> int:
        """The conclusive outcome on which Bob's bit disagrees with b."""
        return self.f[(r, b)]


def build_tables() -> ProtocolTables:
    f = {(r, b): (r + b) % 3 for r in range(3) for b in range(2)}
    g = {
        (0, 0): 1, (1, 0): 0, (2, 0): None,
        (0, 1): None, (1, 1): 1, (2, 1): 0,
        (0, 2): 0, (1, 2): None, (2, 2): 1,
    }
    return ProtocolTables(f=f, g=g)


TABLES = build_tables()
SIGNALS = build_signal_set()


def embed_b(vector: np.ndarray, model: SourceModel) -> np.ndarray:
    """Place a qubit vector into Bob's space (after the vacuum flag if squashed)."""
    if model is SourceModel.SINGLE_PHOTON:
        return np.asarray(vector, dtype=complex)
    return np.concatenate([[0.0], vector]).astype(complex)


def bob_povm(model: SourceModel) -> List[np.ndarray]:
    """P_k for k = 0, 1, 2 and, in the squashed model, the no-click element P'_3."""
    elements = [2.0 / 3.0 * projector(embed_b(d, model)) for d in SIGNALS.duals]
    if model is SourceModel.SQUASHED_COHERENT:
        elements.append(symmetrize(np.eye(3) - sum(elements)))
    return elements


# ── Entangled source ────────────────────────────────────────────────────────

def source_vector(model: SourceModel) -> np.ndarray:
    psi = np.zeros(A_DIM * model.b_dim, dtype=complex)
    for (r, b), j in TABLES.f.items():
        psi += np.sqrt(1.0 / 6.0) * np.kron(ket(a_index(r, b), A_DIM), embed_b(SIGNALS.states[j], model))
    return psi


def entangled_source(model: SourceModel) -> np.ndarray:
    """rho_AA' = |Psi><Psi| with |Psi> = sum_{r,b} sqrt(1/6)|r,b>|psi_f(r,b)>."""
    return projector(source_vector(model))


def reduced_source(model: SourceModel = SourceModel.SINGLE_PHOTON) -> np.ndarray:
    return partial_trace(entangled_source(model), [A_DIM, model.b_dim], keep=[0])


def simulated_state(model: SourceModel, p: float) -> np.ndarray:
    """(I ⊗ E_p)(rho_AA') for the depolarizing channel E_p(s) = (1-p)s + p Tr(s) I/2."""
    if not 0.0 <= p <= 1.0:
        raise DimensionError("depolarizing parameter outside [0, 1]", {"p": p})
    rho = entangled_source(model)
    qubit_identity = np.eye(2) / 2
    if model is SourceModel.SQUASHED_COHERENT:
        qubit_identity = np.pad(qubit_identity, ((1, 0), (1, 0)))
    mixed = np.kron(partial_trace(rho, [A_DIM, model.b_dim], keep=[0]), qubit_identity)
    return symmetrize((1 - p) * rho + p * mixed)


# ── Constraint observables ──────────────────────────────────────────────────

ThetaKey = Tuple[int, int, int, int]


@dataclass(frozen=True)
class ObservableSet:
    model: SourceModel
    Q: Tuple[np.ndarray, ...]                          # Alice's signal projectors on A
    povm: Tuple[np.ndarray, ...]                       # Bob's POVM on B
    O: Dict[Tuple[int, int], np.ndarray]               # Q_j ⊗ P_k
    Theta: Dict[ThetaKey, np.ndarray]                  # on A only
    theta: Dict[ThetaKey, float]

    @property
    def dim(self) -> int:
        return A_DIM * self.model.b_dim

    def lifted_theta(self, key: ThetaKey) -> np.ndarray:
        return np.kron(self.Theta[key], np.eye(self.model.b_dim))


def theta_operator(r: int, b: int, r2: int, b2: int) -> np.ndarray:
    u, v = ket(a_index(r, b), A_DIM), ket(a_index(r2, b2), A_DIM)
    if a_index(r2, b2) >= a_index(r, b):
        return (np.outer(u, v.conj()) + np.outer(v, u.conj())) / 2
    return 1j * (np.outer(v, u.conj()) - np.outer(u, v.conj())) / 2


def signal_projectors() -> Tuple[np.ndarray, ...]:
    Q = [np.zeros((A_DIM, A_DIM), dtype=complex) for _ in range(N_SIGNALS)]
    for (r, b), j in TABLES.f.items():
        Q[j] += projector(ket(a_index(r, b), A_DIM))
    return tuple(Q)


def build_observables(model: SourceModel) -> ObservableSet:
    Q = signal_projectors()
    povm = tuple(bob_povm(model))
    O = {(j, k): np.kron(Q[j], povm[k]) for j in range(N_SIGNALS) for k in range(len(povm))}

    rho_a = reduced_source(SourceModel.SINGLE_PHOTON)
    Theta: Dict[ThetaKey, np.ndarray] = {}
    theta: Dict[ThetaKey, float] = {}
    for r in range(3):
        for b in range(2):
            for r2 in range(3):
                for b2 in range(2):
                    key = (r, b, r2, b2)
                    Theta[key] = theta_operator(*key)
                    theta[key] = float(np.real(np.trace(Theta[key] @ rho_a)))
    return ObservableSet(model=model, Q=Q, povm=povm, O=O, Theta=Theta, theta=theta)


# ── Post-selection and key map ──────────────────────────────────────────────

@dataclass(frozen=True)
class GZMaps:
    model: SourceModel
    G: KrausChannel
    Z: KrausChannel
    output_dims: Tuple[int, ...]
    compressed: bool = False

    @property
    def dim_in(self) -> int:
        return self.G.dim_in


def _alice_branch(r: int) -> np.ndarray:
    """sum_b |b>_R ⊗ |r,b><r,b|_A, an operator A -> R ⊗ A."""
    return sum(
        np.kron(ket(b, R_DIM).reshape(-1, 1), projector(ket(a_index(r, b), A_DIM)))
        for b in range(2)
    )


def _bob_branch(r: int, model: SourceModel, compress_b: bool) -> np.ndarray:
    """sum_p sqrt(2/3)|psi_bar_p><psi_bar_p| ⊗ |p>, an operator B -> B ⊗ B̄."""
    out = None
    for p in TABLES.conclusive(r):
        dual = embed_b(SIGNALS.duals[p], model)
        flag = ket(p, N_SIGNALS).reshape(-1, 1)
        if compress_b:
            term = np.sqrt(2.0 / 3.0) * np.kron(flag, dual.conj().reshape(1, -1))
        else:
            term = np.sqrt(2.0 / 3.0) * np.kron(projector(dual), flag)
        out = term if out is None else out + term
    return out


def build_gz_maps(model: SourceModel, compress_b: bool = False) -> GZMaps:
    kraus = tuple(np.kron(_alice_branch(r), _bob_branch(r, model, compress_b)) for r in range(3))
    G = KrausChannel(kraus)

    if compress_b:
        output_dims = (R_DIM, A_DIM, N_SIGNALS)
    else:
        output_dims = (R_DIM, A_DIM, model.b_dim, N_SIGNALS)
    rest = int(np.prod(output_dims[1:]))
    Z = pinching([np.kron(projector(ket(i, R_DIM)), np.eye(rest)) for i in range(R_DIM)])
    logger.debug(f"Built G/Z for {model.value}: {G.dim_in} -> {G.dim_out} (compressed={compress_b})")
    return GZMaps(model=model, G=G, Z=Z, output_dims=output_dims, compressed=compress_b)


# ── Full announcement-register construction ─────────────────────────────────

def _full_g_parts():
    """K^A_r, K^B_s, the pass projector and the key isometry V."""
    b_dim = 2
    wr = [sum(projector(ket(a_index(r, b), A_DIM)) for b in range(2)) for r in range(3)]

    # A ⊗ B -> A ⊗ Ã ⊗ Ā ⊗ B
    kraus_a = [
        tensor_product(wr[r], ket(r, 3).reshape(-1, 1), ket(r, 3).reshape(-1, 1), np.eye(b_dim))
        for r in range(3)
    ]

    # A ⊗ Ã ⊗ Ā ⊗ B -> A ⊗ Ã ⊗ Ā ⊗ B ⊗ B̃ ⊗ B̄
    kraus_b = []
    for s in (PASS, FAIL):
        op = 0
        for r in range(3):
            for p in range(3):
                outcome = PASS if TABLES.g[(p, r)] is not None else FAIL
                if outcome != s:
                    continue
                sqrt_pp = np.sqrt(2.0 / 3.0) * projector(SIGNALS.duals[p])
                op = op + tensor_product(
                    np.eye(A_DIM), projector(ket(r, 3)), np.eye(3), sqrt_pp,
                    ket(s, 2).reshape(-1, 1), ket(p, 3).reshape(-1, 1),
                )
        kraus_b.append(op)

    pass_projector = tensor_product(np.eye(A_DIM * 3 * 3 * b_dim), projector(ket(PASS, 2)), np.eye(3))

    # A -> R ⊗ A, keyed on Alice's bit
    v = sum(
        np.kron(ket(b, R_DIM).reshape(-1, 1), projector(ket(a_index(r, b), A_DIM)))
        for r in range(3) for b in range(2)
    )
    return kraus_a, kraus_b, pass_projector, v


def full_g(rho: np.ndarray) -> np.ndarray:
    """G(rho) built from the announcement registers, with Ã, Ā, B̃ traced out.

    The output is ordered R ⊗ A ⊗ B ⊗ B̄ like the simplified map.
    """
    kraus_a, kraus_b, pass_projector, v = _full_g_parts()
    after_a = sum(k @ rho @ k.conj().T for k in kraus_a)
    after_b = sum(k @ after_a @ k.conj().T for k in kraus_b)
    passed = pass_projector @ after_b @ pass_projector
    # V acts on A only, so it commutes with tracing out Ã, Ā, B̃
    reduced = partial_trace(passed, [A_DIM, 3, 3, 2, 2, 3], keep=[0, 3, 5])
    lift = np.kron(v, np.eye(2 * 3))
    return symmetrize(lift @ reduced @ lift.conj().T)


def validate_full_g(rho: np.ndarray) -> float:
    """Max-norm discrepancy between the full and simplified single-photon G."""
    rho = check_density(rho, eig_tol=1e-9, trace_tol=1e-9)
    if rho.shape != (A_DIM * 2, A_DIM * 2):
        raise DimensionError("full G is defined for the 12-dim single-photon model",
                             {"dim": rho.shape[0]})
    simplified = build_gz_maps(SourceModel.SINGLE_PHOTON).G.apply(rho)
    discrepancy = float(np.max(np.abs(full_g(rho) - simplified)))
    logger.debug(f"Full-G discrepancy: {discrepancy:.3e}")
    return discrepancy

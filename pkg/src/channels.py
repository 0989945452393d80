"""Simulated experimental statistics.

Depolarizing channel statistics for the single-photon model, and loss plus
dark-count threshold-detector statistics for the weak-coherent source.
Detector D_{k+1} corresponds to outcome k = 0, 1, 2; a click pattern
b1 b2 b3 is encoded as the integer 4*b1 + 2*b2 + b3.
"""
import itertools
import logging
import math
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from src.errors import SiftingError, StochasticMatrixError
from src.models import ChannelStats, DepolarizingParams, DetectorScenario
from src.protocol import (
    N_SIGNALS,
    SIGNALS,
    TABLES,
    SourceModel,
    a_index,
    build_observables,
    simulated_state,
)

logger = logging.getLogger(__name__)

NO_CLICK = 0b000
NO_CLICK_OUTCOME = 3
# column order of the post-processing matrix: single, double, triple clicks
PATTERN_ORDER = (0b100, 0b010, 0b001, 0b110, 0b101, 0b011, 0b111)


def pattern_bits(pattern: int) -> Tuple[int, int, int]:
    return (pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1


def single_click(k: int) -> int:
    return 1 << (2 - k)


# ── Depolarizing channel ────────────────────────────────────────────────────

def depolarizing_closed_form(p: float) -> Tuple[float, float]:
    return 0.5 + p / 6, 2 * p / (3 + p)


def simulate_depolarizing(p: float) -> ChannelStats:
    """Born-rule statistics o_{j,k} and exact sifting by enumeration over (r, b, k)."""
    p = DepolarizingParams(p=p).p
    model = SourceModel.SINGLE_PHOTON
    rho = simulated_state(model, p)
    obs = build_observables(model)
    stats = {key: float(np.real(np.trace(op @ rho))) for key, op in obs.O.items()}

    pass_prob, err_prob = 0.0, 0.0
    for r in range(3):
        for b in range(2):
            row = np.zeros((6, 6))
            row[a_index(r, b), a_index(r, b)] = 1.0
            for k in range(3):
                bob_bit = TABLES.g[(k, r)]
                if bob_bit is None:
                    continue
                prob = float(np.real(np.trace(np.kron(row, obs.povm[k]) @ rho)))
                pass_prob += prob
                if bob_bit != b:
                    err_prob += prob
    e_bit = err_prob / pass_prob
    logger.debug(f"Depolarizing p={p}: p_pass={pass_prob:.6f}, e_bit={e_bit:.6f}")
    return ChannelStats(single_photon=stats, p_pass=pass_prob, e_bit=e_bit)


# ── Loss and threshold detectors ────────────────────────────────────────────

def eta_from_distance(distance_km: float, loss_db_per_km: float = 0.2) -> float:
    if distance_km < 0:
        raise ValueError(f"distance {distance_km} km is negative")
    return 10 ** (-loss_db_per_km * distance_km / 10)


def routing_probability(j: int, k: int) -> float:
    """Probability that a photon in |psi_j> reaches detector k: (2/3)|<psi_j|psi_bar_k>|^2."""
    return 2.0 / 3.0 * SIGNALS.dual_overlap(j, k) ** 2


def detector_intensity(j: int, k: int, sc: DetectorScenario) -> float:
    return sc.eta * sc.mu * routing_probability(j, k)


def click_probability(j: int, k: int, sc: DetectorScenario) -> float:
    return 1.0 - math.exp(-detector_intensity(j, k, sc)) * (1.0 - sc.dark_count)


def click_pattern_stats(j: int, sc: DetectorScenario) -> Dict[int, float]:
    """Probability of each of the 8 click patterns, no-click included."""
    clicks = [click_probability(j, k, sc) for k in range(3)]
    stats = {}
    for pattern in range(8):
        prob = 1.0
        for bit, p in zip(pattern_bits(pattern), clicks):
            prob *= (2 * bit - 1) * p + (1 - bit)
        stats[pattern] = prob
    return stats


def stochastic_matrix() -> np.ndarray:
    """Single clicks keep their outcome; multi-clicks are split 1/3 each."""
    return np.hstack([np.eye(3), np.full((3, 4), 1.0 / 3.0)])


def full_outcome_stats(pattern_stats: Dict[int, float],
                       matrix: Optional[np.ndarray] = None) -> Dict[int, float]:
    """o_k = sum over clicking patterns of P[k, pattern] * o_B(pattern), k = 0, 1, 2."""
    matrix = stochastic_matrix() if matrix is None else np.asarray(matrix, dtype=float)
    if matrix.shape != (3, len(PATTERN_ORDER)):
        raise StochasticMatrixError("post-processing matrix must be 3 x 7", {"shape": matrix.shape})
    column_sums = matrix.sum(axis=0)
    if np.any(matrix < 0) or np.max(np.abs(column_sums - 1.0)) > 1e-12:
        raise StochasticMatrixError("post-processing matrix is not column stochastic",
                                    {"column_sums": column_sums.round(12).tolist()})
    vector = np.array([pattern_stats.get(pattern, 0.0) for pattern in PATTERN_ORDER])
    return {k: float(v) for k, v in enumerate(matrix @ vector)}


def simulate_coherent(sc: DetectorScenario, intensities: Iterable[float]) -> ChannelStats:
    """Pattern and full-measurement statistics for every intensity."""
    coherent, full = {}, {}
    for mu in intensities:
        scenario = sc.model_copy(update={"mu": float(mu)})
        for j in range(N_SIGNALS):
            patterns = click_pattern_stats(j, scenario)
            for pattern, prob in patterns.items():
                coherent[(j, pattern, float(mu))] = prob
            for k, prob in full_outcome_stats(patterns).items():
                full[(j, k, float(mu))] = prob
            full[(j, NO_CLICK_OUTCOME, float(mu))] = patterns[NO_CLICK]
    return ChannelStats(coherent=coherent, full=full)


# ── Sifting ─────────────────────────────────────────────────────────────────

def sift_bounds_coherent(stats: ChannelStats, mu1: float) -> Tuple[float, float]:
    """(p_pass^L, e_bit^U) at the signal intensity from single-click and error-detector events.

    Each (r, b) contributes its conditional conclusive single clicks with
    weight 1/6; the error estimate counts every pattern in which the error
    detector of the sent signal fired.
    """
    mu1 = float(mu1)
    try:
        p_pass = sum(
            stats.coherent[(TABLES.f[(r, b)], single_click(p), mu1)] / 6.0
            for r in range(3) for b in range(2) for p in TABLES.conclusive(r)
        )
        errors = sum(
            stats.coherent[(j, pattern, mu1)] / 3.0
            for j in range(N_SIGNALS) for pattern in range(8) if pattern_bits(pattern)[j]
        )
    except KeyError as e:
        raise SiftingError("click-pattern statistics missing at the signal intensity",
                           {"missing": e.args[0], "mu1": mu1}) from e
    if p_pass <= 0.0:
        raise SiftingError("lower bound on the pass probability is zero", {"mu1": mu1})
    return p_pass, errors / p_pass


def exact_sift_coherent(stats: ChannelStats, mu1: float) -> Tuple[float, float]:
    """Pass probability and error rate of the full measurement by enumeration."""
    mu1 = float(mu1)
    pass_prob, err_prob = 0.0, 0.0
    for r in range(3):
        for b in range(2):
            j = TABLES.f[(r, b)]
            for k in TABLES.conclusive(r):
                prob = stats.full[(j, k, mu1)] / 6.0
                pass_prob += prob
                if TABLES.g[(k, r)] != b:
                    err_prob += prob
    if pass_prob <= 0.0:
        raise SiftingError("pass probability is zero", {"mu1": mu1})
    return pass_prob, err_prob / pass_prob


# ── Photon-number resolved model ────────────────────────────────────────────

def photon_number_stats(j: int, n: int, sc: DetectorScenario) -> Dict[int, float]:
    """Click-pattern distribution of an n-photon pulse in signal state j.

    Every photon survives with probability eta and is routed to detector k
    with probability (2/3)|<psi_j|psi_bar_k>|^2; dark counts are OR-ed in
    independently per detector.
    """
    routes = [routing_probability(j, k) for k in range(3)]
    optical = {}
    for pattern in range(8):
        clicked = [k for k, bit in enumerate(pattern_bits(pattern)) if bit]
        prob = 0.0
        for size in range(len(clicked) + 1):
            for subset in itertools.combinations(clicked, size):
                reach = 1.0 - sc.eta + sc.eta * sum(routes[k] for k in subset)
                prob += (-1) ** (len(clicked) - size) * reach ** n
        optical[pattern] = max(prob, 0.0)

    pd = sc.dark_count
    final = {}
    for pattern in range(8):
        total = 0.0
        for source, prob in optical.items():
            if source & ~pattern:
                continue
            extra = bin(pattern & ~source).count("1")
            silent = 3 - bin(pattern).count("1")
            total += prob * pd ** extra * (1 - pd) ** silent
        final[pattern] = total
    return final


def photon_number_full_stats(j: int, n: int, sc: DetectorScenario) -> Dict[int, float]:
    """Full-measurement outcomes k = 0..3 for an n-photon pulse."""
    patterns = photon_number_stats(j, n, sc)
    full = full_outcome_stats(patterns)
    full[NO_CLICK_OUTCOME] = patterns[NO_CLICK]
    return full


def single_photon_yields(sc: DetectorScenario) -> Dict[Tuple[int, int], float]:
    return {
        (j, k): prob
        for j in range(N_SIGNALS)
        for k, prob in photon_number_full_stats(j, 1, sc).items()
    }

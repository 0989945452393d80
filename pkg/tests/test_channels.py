import numpy as np
import pytest

from src.channels import (
    NO_CLICK,
    NO_CLICK_OUTCOME,
    click_pattern_stats,
    depolarizing_closed_form,
    eta_from_distance,
    exact_sift_coherent,
    full_outcome_stats,
    photon_number_full_stats,
    photon_number_stats,
    routing_probability,
    sift_bounds_coherent,
    simulate_coherent,
    simulate_depolarizing,
    single_click,
    stochastic_matrix,
)
from src.decoy import poisson_weight
from src.errors import SiftingError, StochasticMatrixError
from src.models import ChannelStats, DetectorScenario


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _scenario(mu=0.5, distance_km=20.0, dark_count=1e-6) -> DetectorScenario:
    return DetectorScenario(mu=mu, distance_km=distance_km, dark_count=dark_count)


# ---------------------------------------------------------------------------
# Test 1: Depolarizing channel
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.05, 0.10, 0.15, 0.20, 0.25])
def test_depolarizing_matches_closed_form(p):
    """Enumerated sifting reproduces p_pass = 1/2 + p/6 and e = 2p/(3+p)."""
    stats = simulate_depolarizing(p)
    p_pass, e_bit = depolarizing_closed_form(p)
    assert stats.p_pass == pytest.approx(p_pass, abs=1e-12)
    assert stats.e_bit == pytest.approx(e_bit, abs=1e-12)


def test_depolarizing_error_rate_at_018():
    """e(0.18) = 0.113 to three decimals."""
    assert simulate_depolarizing(0.18).e_bit == pytest.approx(0.113, abs=1e-3)


def test_depolarizing_joint_probabilities():
    """o_{j,k} sums to one and o_{j,j} vanishes without noise."""
    stats = simulate_depolarizing(0.0)
    assert sum(stats.single_photon.values()) == pytest.approx(1.0, abs=1e-12)
    for j in range(3):
        assert stats.single_photon[(j, j)] == pytest.approx(0.0, abs=1e-12)


def test_depolarizing_rejects_out_of_range():
    """p must be a probability."""
    with pytest.raises(ValueError):
        simulate_depolarizing(1.5)


# ---------------------------------------------------------------------------
# Test 2: Loss and click patterns
# ---------------------------------------------------------------------------

def test_eta_from_distance():
    """0.2 dB/km over 50 km is 10 dB, i.e. eta = 0.1."""
    assert eta_from_distance(50.0) == pytest.approx(0.1)
    assert DetectorScenario(distance_km=50.0).eta == pytest.approx(0.1)


def test_routing_probabilities_sum_to_one():
    """A photon always reaches some detector, never the error detector of its own signal."""
    for j in range(3):
        assert sum(routing_probability(j, k) for k in range(3)) == pytest.approx(1.0)
        assert routing_probability(j, j) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("distance_km", [0.0, 50.0, 150.0])
def test_click_patterns_are_a_distribution(distance_km):
    """All eight patterns sum to one for every signal."""
    sc = _scenario(distance_km=distance_km)
    for j in range(3):
        assert sum(click_pattern_stats(j, sc).values()) == pytest.approx(1.0, abs=1e-12)


def test_no_click_probability_without_darks():
    """P(000) = exp(-eta mu) when dark counts are off."""
    sc = _scenario(mu=0.3, distance_km=10.0, dark_count=0.0)
    assert click_pattern_stats(0, sc)[NO_CLICK] == pytest.approx(np.exp(-sc.eta * 0.3))


# ---------------------------------------------------------------------------
# Test 3: Post-processing matrix
# ---------------------------------------------------------------------------

def test_stochastic_matrix_columns():
    """Every column of the default matrix sums to one."""
    assert np.allclose(stochastic_matrix().sum(axis=0), 1.0)


def test_single_clicks_map_to_themselves():
    """Only single clicks present: the outcomes equal the pattern statistics."""
    patterns = {single_click(0): 0.2, single_click(1): 0.3, single_click(2): 0.1}
    assert full_outcome_stats(patterns) == pytest.approx({0: 0.2, 1: 0.3, 2: 0.1})


def test_triple_clicks_split_uniformly():
    """Mass m on 111 becomes m/3 per outcome."""
    assert full_outcome_stats({0b111: 0.6}) == pytest.approx({0: 0.2, 1: 0.2, 2: 0.2})


def test_outcomes_conserve_click_mass():
    """sum_k o_k = 1 - P(000)."""
    patterns = click_pattern_stats(1, _scenario())
    full = full_outcome_stats(patterns)
    assert sum(full.values()) == pytest.approx(1.0 - patterns[NO_CLICK], abs=1e-12)


def test_non_stochastic_matrix_rejected():
    """A column summing to two is not a valid post-processing."""
    bad = stochastic_matrix()
    bad[0, 0] = 2.0
    with pytest.raises(StochasticMatrixError):
        full_outcome_stats({single_click(0): 1.0}, bad)


# ---------------------------------------------------------------------------
# Test 4: Photon-number oracle
# ---------------------------------------------------------------------------

def test_single_photon_without_darks():
    """One photon clicks detector k with probability eta * routing."""
    sc = _scenario(distance_km=30.0, dark_count=0.0)
    stats = photon_number_stats(2, 1, sc)
    for k in range(3):
        assert stats[single_click(k)] == pytest.approx(sc.eta * routing_probability(2, k), abs=1e-12)
    assert stats[NO_CLICK] == pytest.approx(1.0 - sc.eta)


def test_photon_number_full_stats_is_distribution():
    """Outcomes 0..3 of an n-photon pulse sum to one."""
    full = photon_number_full_stats(0, 4, _scenario())
    assert set(full) == {0, 1, 2, NO_CLICK_OUTCOME}
    assert sum(full.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_poisson_mixture_matches_coherent(j):
    """sum_n p_mu(n) o_{j,pattern,n} reproduces the coherent-state click statistics."""
    sc = _scenario(mu=0.8, distance_km=5.0, dark_count=1e-3)
    coherent = click_pattern_stats(j, sc)
    mixture = {pattern: 0.0 for pattern in range(8)}
    for n in range(41):
        weight = poisson_weight(sc.mu, n)
        for pattern, prob in photon_number_stats(j, n, sc).items():
            mixture[pattern] += weight * prob
    for pattern in range(8):
        assert mixture[pattern] == pytest.approx(coherent[pattern], abs=1e-8)


# ---------------------------------------------------------------------------
# Test 5: Sifting bounds
# ---------------------------------------------------------------------------

def test_pass_lower_bound_below_exact():
    """p_pass^L never exceeds the enumerated pass probability."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        mu = float(rng.uniform(0.01, 1.0))
        sc = _scenario(mu=mu, distance_km=float(rng.uniform(0, 200)), dark_count=float(rng.uniform(0, 1e-3)))
        stats = simulate_coherent(sc, [mu])
        p_pass_lower, _ = sift_bounds_coherent(stats, mu)
        p_pass_exact, _ = exact_sift_coherent(stats, mu)
        assert p_pass_lower <= p_pass_exact + 1e-15


def test_error_bound_vanishes_for_weak_pulses():
    """No darks, no loss: the error detector only fires through multi-photon terms."""
    mu = 1e-4
    stats = simulate_coherent(DetectorScenario(mu=mu, eta=1.0, dark_count=0.0), [mu])
    _, e_upper = sift_bounds_coherent(stats, mu)
    assert e_upper < 1e-3


def test_sifting_without_single_clicks():
    """All mass on the no-click pattern leaves nothing to sift."""
    mu = 0.5
    coherent = {(j, pattern, mu): (1.0 if pattern == NO_CLICK else 0.0) for j in range(3) for pattern in range(8)}
    with pytest.raises(SiftingError):
        sift_bounds_coherent(ChannelStats(coherent=coherent), mu)


def test_sifting_at_unknown_intensity():
    """Asking for an intensity that was never simulated is a sifting error."""
    stats = simulate_coherent(_scenario(), [0.5])
    with pytest.raises(SiftingError):
        sift_bounds_coherent(stats, 0.25)

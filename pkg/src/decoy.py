"""Decoy-state estimation of single-photon statistics.

For every (j, k) the single-photon yield o_{j,k,1} is bracketed by a pair of
small linear programs over the photon-number yields o_{j,k,n}, n <= cutoff.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln

from src.channels import simulate_coherent
from src.errors import AnalysisError, InfeasibleError
from src.models import DecoyScenario, DetectorScenario, YieldBounds

logger = logging.getLogger(__name__)

# LP optima are widened by this much before they are reported
LP_PADDING = 1e-9

_STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


def poisson_weight(mu: float, n: int) -> float:
    """mu^n e^-mu / n!, evaluated in log space."""
    if mu < 0 or n < 0:
        raise ValueError(f"poisson_weight needs mu >= 0 and n >= 0, got mu={mu}, n={n}")
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return float(np.exp(n * np.log(mu) - mu - gammaln(n + 1)))


@dataclass(frozen=True)
class LPResult:
    optimum: float
    solution: Optional[np.ndarray]
    status: str


def lp_solve(objective: Sequence[float],
             a_ub: Optional[np.ndarray] = None, b_ub: Optional[np.ndarray] = None,
             a_eq: Optional[np.ndarray] = None, b_eq: Optional[np.ndarray] = None,
             bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]] = None,
             maximize: bool = False) -> LPResult:
    """Dense LP behind a small contract: optimum, solution and a status string.

    Infeasible and unbounded problems are reported through ``status`` with a
    NaN optimum; no exception escapes from the backend.
    """
    c = np.asarray(objective, dtype=float)
    sign = -1.0 if maximize else 1.0
    if bounds is None:
        bounds = [(0, None)] * len(c)
    res = linprog(sign * c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    status = _STATUS.get(res.status, "error")
    if status != "optimal":
        logger.debug(f"LP finished with status {status}: {res.message}")
        return LPResult(optimum=float("nan"), solution=None, status=status)
    return LPResult(optimum=float(sign * res.fun), solution=np.asarray(res.x), status=status)


def _decoy_constraints(weights: np.ndarray, observed: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stack sum_n p(n) y_n <= o and sum_n p(n) y_n >= o - tail for every intensity."""
    tails = 1.0 - weights.sum(axis=1)
    a_ub = np.vstack([weights, -weights])
    b_ub = np.concatenate([observed, -(observed - tails)])
    return a_ub, b_ub


def _bracket(weights: np.ndarray, observed: np.ndarray) -> Tuple[LPResult, LPResult]:
    a_ub, b_ub = _decoy_constraints(weights, observed)
    target = np.zeros(weights.shape[1])
    target[1] = 1.0
    box = [(0.0, 1.0)] * weights.shape[1]
    low = lp_solve(target, a_ub, b_ub, bounds=box)
    high = lp_solve(target, a_ub, b_ub, bounds=box, maximize=True)
    return low, high


def decoy_bounds(sc: DecoyScenario) -> YieldBounds:
    """Lower and upper single-photon yields for every observed (j, k)."""
    if len(sc.intensities) < 1:
        raise AnalysisError("decoy estimation needs at least one intensity")
    intensities = sorted(float(mu) for mu in sc.intensities)
    weights = np.array([[poisson_weight(mu, n) for n in range(sc.cutoff + 1)] for mu in intensities])
    pairs = sorted({(j, k) for (j, k, _) in sc.observed})

    lower: Dict[Tuple[int, int], float] = {}
    upper: Dict[Tuple[int, int], float] = {}
    for j, k in pairs:
        observed = []
        for mu in intensities:
            value = _lookup(sc.observed, j, k, mu)
            if not (0.0 <= value <= 1.0):
                raise InfeasibleError("observed statistic is not a probability",
                                      {"j": j, "k": k, "mu": mu, "value": value})
            observed.append(value)
        observed = np.array(observed)

        low, high = _bracket(weights, observed)
        if low.status != "optimal" or high.status != "optimal":
            mu = _violating_intensity(weights, observed, intensities)
            raise InfeasibleError("decoy statistics are inconsistent",
                                  {"j": j, "k": k, "mu": mu, "status": low.status})
        if low.optimum < -LP_PADDING or high.optimum > 1.0 + LP_PADDING or low.optimum > high.optimum + LP_PADDING:
            logger.warning(f"Decoy bounds for (j, k) = ({j}, {k}) clipped: "
                           f"LP gave [{low.optimum:.3e}, {high.optimum:.3e}]")
        lo = min(max(low.optimum - LP_PADDING, 0.0), 1.0)
        hi = min(max(high.optimum + LP_PADDING, 0.0), 1.0)
        lower[(j, k)], upper[(j, k)] = min(lo, hi), hi

    bounds = YieldBounds(lower=lower, upper=upper)
    logger.debug(f"Decoy bounds over {len(intensities)} intensities, max width {bounds.max_width:.3e}")
    return bounds


def _lookup(observed: Dict[Tuple[int, int, float], float], j: int, k: int, mu: float) -> float:
    for (jj, kk, m), value in observed.items():
        if jj == j and kk == k and np.isclose(m, mu, rtol=1e-12, atol=0.0):
            return value
    raise AnalysisError("missing observation", {"j": j, "k": k, "mu": mu})


def _violating_intensity(weights: np.ndarray, observed: np.ndarray, intensities: List[float]) -> Optional[float]:
    """The first intensity whose removal makes the LP feasible."""
    for i, mu in enumerate(intensities):
        keep = [m for m in range(len(intensities)) if m != i]
        if not keep:
            return mu
        low, _ = _bracket(weights[keep], observed[keep])
        if low.status == "optimal":
            return mu
    return None


def decoy_scenario_from_stats(full: Dict[Tuple[int, int, float], float], intensities: Sequence[float],
                              cutoff: int = 10) -> DecoyScenario:
    observed = {key: value for key, value in full.items() if any(np.isclose(key[2], mu) for mu in intensities)}
    return DecoyScenario(intensities=list(intensities), cutoff=cutoff, observed=observed)


def simulated_decoy_scenario(sc: DetectorScenario, intensities: Sequence[float], cutoff: int = 10) -> DecoyScenario:
    stats = simulate_coherent(sc, intensities)
    return decoy_scenario_from_stats(stats.full, intensities, cutoff)

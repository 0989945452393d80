"""Key-rate assembly, intensity optimization and parameter sweeps.

Single-photon:  K = f_min^L - p_pass * ec * h(e_bit)
Coherent:       K = p_mu1(1) * f_min^L(S_1) - p_pass^U * ec * h(e_bit^U)

Both are clamped at zero, and both use the certified lower bound on f_min,
never the Frank-Wolfe upper bound.
"""
import logging
import math
from functools import lru_cache
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.channels import exact_sift_coherent, sift_bounds_coherent, simulate_coherent, simulate_depolarizing
from src.decoy import decoy_bounds, decoy_scenario_from_stats, poisson_weight
from src.errors import AnalysisError, CertificateError, InfeasibleError, SquashingFailure
from src.models import (
    ChannelStats,
    DetectorScenario,
    KeyRatePoint,
    SolverConfig,
    SolverReport,
    SweepSpec,
    YieldBounds,
)
from src.protocol import GZMaps, ObservableSet, SourceModel, build_gz_maps, build_observables, simulated_state
from src.solver import ConstraintSet, solve

logger = logging.getLogger(__name__)

SIGNAL_PRIOR = 1.0 / 3.0


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs a probability, got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


@lru_cache(maxsize=None)
def _maps(model: SourceModel, compress_b: bool) -> GZMaps:
    return build_gz_maps(model, compress_b=compress_b)


@lru_cache(maxsize=None)
def _observables(model: SourceModel) -> ObservableSet:
    return build_observables(model)


# --- CONSTRAINT SETS ---

def _theta_equalities(obs: ObservableSet):
    return [(obs.lifted_theta(key), value) for key, value in obs.theta.items()]


def single_photon_constraints(obs: ObservableSet, stats: ChannelStats) -> ConstraintSet:
    """Unit trace, the nine O_{j,k} equalities, then the 36 Theta equalities."""
    equalities = [(obs.O[key], value) for key, value in sorted(stats.single_photon.items())]
    return ConstraintSet.build(obs.dim, equalities + _theta_equalities(obs))


def coherent_constraints(obs: ObservableSet, bounds: YieldBounds) -> ConstraintSet:
    """Unit trace, the Theta equalities and O'_{j,k} intervals from the decoy yields.

    Decoy yields are conditional on the signal, the O' observables carry the
    signal projector, so every interval is scaled by the prior 1/3.
    """
    intervals = [
        (obs.O[key], SIGNAL_PRIOR * lo, SIGNAL_PRIOR * bounds.upper[key])
        for key, lo in sorted(bounds.lower.items())
    ]
    return ConstraintSet.build(obs.dim, _theta_equalities(obs), intervals)


# --- KEY RATES ---

def _require_solved(report: SolverReport, context: dict) -> None:
    if report.status == "infeasible":
        raise InfeasibleError("key-rate optimization is infeasible", context)


def keyrate_single(p: float, spec: Optional[SweepSpec] = None,
                   cfg: Optional[SolverConfig] = None) -> KeyRatePoint:
    """Certified key rate of the single-photon protocol under depolarizing noise p."""
    spec = spec or SweepSpec()
    cfg = cfg or SolverConfig()
    model = SourceModel.SINGLE_PHOTON
    stats = simulate_depolarizing(p)
    cs = single_photon_constraints(_observables(model), stats)
    report = solve(cs, _maps(model, cfg.compress_b), cfg, hint=simulated_state(model, p))
    _require_solved(report, {"p": p})

    leak = stats.p_pass * spec.ec_efficiency * binary_entropy(stats.e_bit)
    unclamped = report.lower_bound - leak
    _check_safety(unclamped, report.upper_bound - leak, {"p": p})
    logger.info(f"p={p:.4f}: K={max(unclamped, 0.0):.6f} (f_min >= {report.lower_bound:.6f}, leak {leak:.6f})")
    return KeyRatePoint(
        parameter=p, key_rate=max(unclamped, 0.0), unclamped=unclamped,
        f_min_lower=report.lower_bound, f_upper=report.upper_bound,
        p_pass=stats.p_pass, e_bit=stats.e_bit, leak=leak, diagnostics=report,
    )


def scenario_at_distance(distance_km: float, detector: DetectorScenario) -> DetectorScenario:
    fields = detector.model_dump()
    fields.update(distance_km=distance_km, eta=None)
    return DetectorScenario(**fields)


def keyrate_coherent(distance_km: float, intensities: Sequence[float], spec: Optional[SweepSpec] = None,
                     cfg: Optional[SolverConfig] = None) -> KeyRatePoint:
    """Certified key rate of the decoy-state weak-coherent protocol at a distance.

    ``intensities`` is (mu1, mu2, mu3) with mu1 the signal intensity.
    """
    spec = spec or SweepSpec(source_model="squashed-coherent")
    cfg = cfg or SolverConfig()
    mu1, mu2, mu3 = (float(mu) for mu in intensities)
    if not (mu1 > mu2 > mu3 > 0):
        raise AnalysisError("intensities must satisfy mu1 > mu2 > mu3 > 0", {"mu1": mu1, "mu2": mu2, "mu3": mu3})
    context = {"distance_km": distance_km, "mu1": mu1, "mu2": mu2}

    detector = scenario_at_distance(distance_km, spec.detector)
    stats = simulate_coherent(detector, (mu1, mu2, mu3))
    bounds = decoy_bounds(decoy_scenario_from_stats(stats.full, (mu1, mu2, mu3), spec.cutoff))

    model = SourceModel.SQUASHED_COHERENT
    cs = coherent_constraints(_observables(model), bounds)
    report = solve(cs, _maps(model, cfg.compress_b), cfg)
    _require_solved(report, context)

    p_pass_lower, e_bit_upper = sift_bounds_coherent(stats, mu1)
    p_pass_upper, _ = exact_sift_coherent(stats, mu1)
    single_fraction = poisson_weight(mu1, 1)
    leak = p_pass_upper * spec.ec_efficiency * binary_entropy(min(e_bit_upper, 1.0))
    unclamped = single_fraction * report.lower_bound - leak
    _check_safety(unclamped, single_fraction * report.upper_bound - leak, context)

    logger.debug(f"L={distance_km} km, mu=({mu1:.4g}, {mu2:.4g}): K={unclamped:.4e}, "
                 f"e_U={e_bit_upper:.4f}, decoy width {bounds.max_width:.2e}")
    return KeyRatePoint(
        parameter=distance_km, key_rate=max(unclamped, 0.0), unclamped=unclamped,
        f_min_lower=report.lower_bound, f_upper=report.upper_bound,
        p_pass=p_pass_lower, e_bit=e_bit_upper, leak=leak, diagnostics=report,
        eta=detector.eta, mu1=mu1, mu2=mu2, mu3=mu3, yield_width_max=bounds.max_width,
    )


def _check_safety(lower_assembled: float, upper_assembled: float, context: dict) -> None:
    if lower_assembled > upper_assembled + 1e-9:
        raise CertificateError("key rate exceeds its own upper estimate",
                               {**context, "lower": lower_assembled, "upper": upper_assembled})


def optimize_intensities(distance_km: float, spec: Optional[SweepSpec] = None,
                         cfg: Optional[SolverConfig] = None) -> Tuple[float, float, KeyRatePoint]:
    """Grid search over (mu1, mu2) at fixed mu3; ties go to the smaller mu1, then mu2."""
    spec = spec or SweepSpec(source_model="squashed-coherent")
    best: Optional[KeyRatePoint] = None
    last_error: Optional[AnalysisError] = None
    for mu1, mu2 in sorted(spec.intensity_grid()):
        try:
            point = keyrate_coherent(distance_km, (mu1, mu2, spec.mu3), spec, cfg)
        except CertificateError as e:
            logger.warning(f"Uncertified mu=({mu1:.4g}, {mu2:.4g}) at {distance_km} km: {e}")
            last_error = e
            continue
        except AnalysisError as e:
            logger.debug(f"Skipping mu=({mu1:.4g}, {mu2:.4g}) at {distance_km} km: {e}")
            last_error = e
            continue
        if best is None or point.key_rate > best.key_rate:
            best = point
    if best is None and isinstance(last_error, CertificateError):
        raise last_error
    if best is None:
        raise InfeasibleError("no intensity pair produced a key rate",
                              {"distance_km": distance_km, "last_error": str(last_error)})
    logger.info(f"L={distance_km} km: K={best.key_rate:.4e} at mu1={best.mu1:.4g}, mu2={best.mu2:.4g}")
    return best.mu1, best.mu2, best


# --- SWEEPS ---

def _failed_point(parameter: float, error: Exception) -> KeyRatePoint:
    nan = float("nan")
    kind = "certification" if isinstance(error, (CertificateError, SquashingFailure)) else "computation"
    return KeyRatePoint(parameter=parameter, key_rate=0.0, unclamped=0.0, f_min_lower=nan, f_upper=nan,
                        p_pass=nan, e_bit=nan, leak=0.0, failed=True, failure_kind=kind, error=str(error))


def evaluate_point(task: Tuple[float, SweepSpec, SolverConfig]) -> KeyRatePoint:
    """One sweep point; failures become flagged zero-rate rows."""
    parameter, spec, cfg = task
    try:
        if spec.source_model == SourceModel.SINGLE_PHOTON.value:
            return keyrate_single(parameter, spec, cfg)
        return optimize_intensities(parameter, spec, cfg)[2]
    except AnalysisError as e:
        logger.error(f"Sweep point {parameter} failed: {e}")
        return _failed_point(parameter, e)


def sweep(spec: SweepSpec, jobs: int = 1, cfg: Optional[SolverConfig] = None) -> List[KeyRatePoint]:
    """Evaluate every grid parameter; output order follows the grid."""
    cfg = cfg or SolverConfig()
    tasks = [(value, spec, cfg) for value in spec.parameter_values()]
    if not tasks:
        return []
    logger.info(f"Sweeping {len(tasks)} {spec.source_model} points with {jobs} worker(s)")
    if jobs <= 1 or len(tasks) == 1:
        return [evaluate_point(task) for task in tasks]
    with Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(evaluate_point, tasks)


def find_threshold(points: Sequence[KeyRatePoint]) -> Optional[float]:
    """Parameter where the unclamped key rate first turns non-positive, linearly interpolated."""
    usable = [pt for pt in points if not pt.failed]
    for left, right in zip(usable, usable[1:]):
        if left.unclamped > 0 >= right.unclamped:
            slope = right.unclamped - left.unclamped
            fraction = left.unclamped / -slope if slope else 0.0
            return float(left.parameter + fraction * (right.parameter - left.parameter))
    return None


def grid_summary(points: Sequence[KeyRatePoint]) -> dict:
    rates = np.array([pt.key_rate for pt in points]) if points else np.zeros(0)
    return {
        "points": len(points),
        "failed": sum(pt.failed for pt in points),
        "max_key_rate": float(rates.max()) if rates.size else 0.0,
        "threshold": find_threshold(points),
    }

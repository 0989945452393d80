"""Pydantic schemas for configuration, channel statistics, solver reports and verdicts."""
import logging
import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12


def _check_probabilities(values: Dict, name: str) -> Dict:
    for key, value in values.items():
        if not (-PROB_TOL <= value <= 1 + PROB_TOL):
            raise ValueError(f"{name}[{key}] = {value} is not a probability")
    return values


# --- CHANNEL SCHEMAS ---

class DepolarizingParams(BaseModel):
    p: float = Field(ge=0.0, le=1.0)


class DetectorScenario(BaseModel):
    """Source intensity, channel transmittance and threshold-detector noise.

    When ``eta`` is omitted it is derived from ``distance_km`` and
    ``loss_db_per_km`` as 10^(-loss * L / 10).
    """
    model_config = ConfigDict(extra="forbid")

    mu: float = Field(default=0.5, ge=0.0)
    eta: Optional[float] = None
    dark_count: float = Field(default=1e-6, ge=0.0, lt=1.0)
    loss_db_per_km: float = 0.2
    distance_km: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _derive_eta(self):
        if self.eta is None:
            self.eta = 10 ** (-self.loss_db_per_km * self.distance_km / 10)
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta = {self.eta} must lie in (0, 1]")
        return self


class ChannelStats(BaseModel):
    """Simulated or observed statistics.

    ``single_photon`` holds joint probabilities o_{j,k} (signal prior 1/3
    included). ``coherent`` (keyed (j, pattern, mu), pattern = 4b1 + 2b2 + b3)
    and ``full`` (keyed (j, k, mu), k = 3 is no-click) are conditional on the
    signal j.
    """
    single_photon: Dict[Tuple[int, int], float] = Field(default_factory=dict)
    coherent: Dict[Tuple[int, int, float], float] = Field(default_factory=dict)
    full: Dict[Tuple[int, int, float], float] = Field(default_factory=dict)
    p_pass: Optional[float] = None
    e_bit: Optional[float] = None

    @field_validator("single_photon", "coherent", "full")
    @classmethod
    def _probabilities(cls, v, info):
        return _check_probabilities(v, info.field_name)

    @model_validator(mode="after")
    def _patterns_normalized(self):
        totals: Dict[Tuple[int, float], float] = {}
        for (j, _, mu), value in self.coherent.items():
            totals[(j, mu)] = totals.get((j, mu), 0.0) + value
        for key, total in totals.items():
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"click patterns for (j, mu) = {key} sum to {total}")
        return self

    @property
    def intensities(self) -> List[float]:
        return sorted({mu for (_, _, mu) in self.full})


# --- DECOY SCHEMAS ---

class DecoyScenario(BaseModel):
    intensities: List[float]
    cutoff: int = Field(default=10, ge=1)
    observed: Dict[Tuple[int, int, float], float] = Field(default_factory=dict)

    @field_validator("intensities")
    @classmethod
    def _distinct_positive(cls, v):
        if any(mu <= 0 for mu in v):
            raise ValueError("intensities must be strictly positive")
        if len(set(v)) != len(v):
            raise ValueError("intensities must be pairwise distinct")
        return v


class YieldBounds(BaseModel):
    lower: Dict[Tuple[int, int], float]
    upper: Dict[Tuple[int, int], float]

    @model_validator(mode="after")
    def _ordered(self):
        for key, lo in self.lower.items():
            hi = self.upper[key]
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"yield bounds for {key} are not ordered: [{lo}, {hi}]")
        return self

    @property
    def max_width(self) -> float:
        return max((self.upper[k] - self.lower[k] for k in self.lower), default=0.0)


# --- SOLVER SCHEMAS ---

class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iterations: int = Field(default=300, ge=1)
    fw_gap_tol: float = Field(default=1e-6, gt=0.0)
    spectral_floor: float = Field(default=1e-12, gt=0.0)
    line_search: Literal["exact", "diminishing"] = "exact"
    golden_evaluations: int = Field(default=50, ge=4)
    sdp_solver: str = "CLARABEL"
    feasibility_tol: float = Field(default=1e-8, gt=0.0)
    dual_margin: float = Field(default=1e-9, gt=0.0)
    compress_b: bool = False

    @field_validator("sdp_solver")
    @classmethod
    def _upper(cls, v: str) -> str:
        return v.strip().upper()


class SolverReport(BaseModel):
    upper_bound: float
    lower_bound: float
    gap: float
    iterations: int
    status: Literal["converged", "iteration-limit", "infeasible"]
    fw_gap: Optional[float] = None
    dual_shift: float = 0.0

    @model_validator(mode="after")
    def _weak_duality(self):
        if self.status != "infeasible" and self.lower_bound > self.upper_bound + 1e-9:
            raise ValueError(
                f"lower bound {self.lower_bound} exceeds upper bound {self.upper_bound}"
            )
        return self


# --- KEY-RATE SCHEMAS ---

class SweepSpec(BaseModel):
    """A parameter grid plus everything a key-rate point needs."""
    model_config = ConfigDict(extra="forbid")

    start: float = 0.0
    stop: float = 0.25
    step: float = Field(default=0.01, gt=0.0)
    source_model: Literal["single-photon", "squashed-coherent"] = "single-photon"
    detector: DetectorScenario = Field(default_factory=DetectorScenario)
    ec_efficiency: float = Field(default=1.0, ge=1.0)
    mu_min: float = Field(default=0.002, gt=0.001)
    mu_max: float = Field(default=1.0, le=1.0)
    mu3: float = 0.001
    intensity_points: int = Field(default=10, ge=1)
    cutoff: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _intensity_range(self):
        if self.mu_min > self.mu_max:
            raise ValueError(f"mu_min {self.mu_min} exceeds mu_max {self.mu_max}")
        return self

    def parameter_values(self) -> List[float]:
        """Grid start, start + step, ... up to and including stop."""
        if self.stop < self.start:
            return []
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]

    def intensity_grid(self) -> List[Tuple[float, float]]:
        """(mu1, mu2) pairs, log-spaced, with mu3 < mu2 < mu1."""
        if self.intensity_points == 1:
            return [(self.mu_max, self.mu_min)] if self.mu_min < self.mu_max else [(self.mu_max, self.mu_max / 2)]
        pairs = []
        for mu1 in np.geomspace(self.mu_min, self.mu_max, self.intensity_points):
            if mu1 <= self.mu_min:
                continue
            for mu2 in np.geomspace(self.mu_min, mu1, self.intensity_points + 1)[:-1]:
                pairs.append((float(mu1), float(mu2)))
        return pairs


class KeyRatePoint(BaseModel):
    parameter: float
    key_rate: float = Field(ge=0.0)
    unclamped: float
    f_min_lower: float
    f_upper: float
    p_pass: float
    e_bit: float
    leak: float = Field(ge=0.0)
    diagnostics: Optional[SolverReport] = None
    eta: Optional[float] = None
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    mu3: Optional[float] = None
    yield_width_max: Optional[float] = None
    failed: bool = False
    failure_kind: Optional[Literal["computation", "certification"]] = None
    error: str = ""

    @model_validator(mode="after")
    def _clamped(self):
        if abs(self.key_rate - max(0.0, self.unclamped)) > 1e-15:
            raise ValueError("key_rate must equal max(0, unclamped)")
        return self


# --- SQUASHING SCHEMAS ---

class SquashVerdict(BaseModel):
    N: int = Field(ge=1)
    method: Literal["identity", "witness-x", "gershgorin", "direct-eig"]
    witness: Optional[Tuple[float, float, float]] = None
    min_eig_or_bound: float
    positive: bool

    @model_validator(mode="after")
    def _positive_iff(self):
        if self.positive != (self.min_eig_or_bound > 0):
            raise ValueError("positive must equal (min_eig_or_bound > 0)")
        return self


class GershgorinCertificate(BaseModel):
    N: int = Field(ge=2)
    centers: Tuple[float, float, float, float, float, float]
    radius_bound_1: float
    radius_bound_2: float
    delta_x_norm: float
    delta_z_norm: float
    f_of_n: float
    disc_lower_bound: Optional[float] = None

    @property
    def positive(self) -> bool:
        return self.f_of_n > 0

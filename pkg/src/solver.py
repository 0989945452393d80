"""Two-step key-rate optimizer.

Step one minimizes f(rho) = D(G(rho) || Z(G(rho))) over the constrained
density operators with Frank-Wolfe; the linear subproblems are small SDPs
handed to cvxpy. Step two turns the FW iterate into a certified lower bound
through an explicitly solved dual whose feasibility is re-checked with
numpy before the bound is used.
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from src.errors import CertificateError, DimensionError, InfeasibleError
from src.matcore import check_hermitian, inner, matrix_log2, relative_entropy, symmetrize
from src.models import SolverConfig, SolverReport

if TYPE_CHECKING:
    from src.protocol import GZMaps

logger = logging.getLogger(__name__)

DEPENDENCE_TOL = 1e-9
CONSISTENCY_TOL = 1e-8
PRIMAL_EIG_TOL = 1e-9
# largest primal-minus-dual value accepted from a certified linear SDP
SDP_GAP_TOL = 1e-7
# eigenvalue cut defining the support of an anchor state, loosest last
SUPPORT_TOLS = (1e-7, 1e-6, 1e-5)

_OPTIMAL = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}
_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE, cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE}


# ── Constraint sets ─────────────────────────────────────────────────────────

Equality = Tuple[np.ndarray, float]
Interval = Tuple[np.ndarray, float, float]


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear constraints Tr(G rho) = g and lo <= Tr(W rho) <= hi on a dim x dim state.

    The first equality is always the unit trace. Instances hash by identity
    so the compiled SDPs can be cached per constraint set.
    """
    dim: int
    equalities: Tuple[Equality, ...]
    intervals: Tuple[Interval, ...] = ()

    def __post_init__(self):
        eqs = tuple((check_hermitian(op), float(g)) for op, g in self.equalities)
        ivs = tuple((check_hermitian(op), float(lo), float(hi)) for op, lo, hi in self.intervals)
        for op in [e[0] for e in eqs] + [i[0] for i in ivs]:
            if op.shape != (self.dim, self.dim):
                raise DimensionError("constraint observable has the wrong dimension",
                                     {"expected": self.dim, "got": op.shape})
        for n, (_, lo, hi) in enumerate(ivs):
            if lo > hi:
                raise InfeasibleError("interval constraint with lo > hi", {"index": n, "lo": lo, "hi": hi})
        if not eqs or not np.allclose(eqs[0][0], np.eye(self.dim)) or abs(eqs[0][1] - 1.0) > 1e-12:
            raise DimensionError("the first equality must be the unit trace")
        object.__setattr__(self, "equalities", eqs)
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def build(cls, dim: int, equalities=(), intervals=()) -> "ConstraintSet":
        """Prepend Tr(rho) = 1 to the given constraints."""
        trace = (np.eye(dim, dtype=complex), 1.0)
        return cls(dim=dim, equalities=(trace, *equalities), intervals=tuple(intervals))

    @property
    def n_equalities(self) -> int:
        return len(self.equalities)

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    def residual(self, rho: np.ndarray) -> float:
        """Largest violation of any equality or interval by rho."""
        worst = 0.0
        for op, g in self.equalities:
            worst = max(worst, abs(inner(op, rho) - g))
        for op, lo, hi in self.intervals:
            value = inner(op, rho)
            worst = max(worst, lo - value, value - hi)
        return worst

    def is_feasible(self, rho: np.ndarray, tol: float = 1e-8) -> bool:
        if rho.shape != (self.dim, self.dim):
            return False
        min_eig = linalg.eigvalsh(symmetrize(rho))[0]
        return min_eig > -PRIMAL_EIG_TOL and self.residual(rho) < tol

    def reduced(self) -> "ConstraintSet":
        """Drop equalities that are linear combinations of earlier ones.

        A dependent equality whose target disagrees with the combination of
        the kept targets makes the set empty and raises InfeasibleError.
        The result is computed once per instance.
        """
        return self._reduced

    @cached_property
    def _reduced(self) -> "ConstraintSet":
        kept = [self.equalities[0]]
        basis = [_vectorize(self.equalities[0][0])]
        for op, g in self.equalities[1:]:
            v = _vectorize(op)
            matrix = np.column_stack(basis)
            coeffs, *_ = np.linalg.lstsq(matrix, v, rcond=None)
            if np.linalg.norm(matrix @ coeffs - v) > DEPENDENCE_TOL * max(np.linalg.norm(v), 1.0):
                kept.append((op, g))
                basis.append(v)
                continue
            implied = float(coeffs @ np.array([t for _, t in kept]))
            if abs(implied - g) > CONSISTENCY_TOL:
                raise InfeasibleError("dependent equality contradicts the others",
                                      {"target": g, "implied": round(implied, 12)})
        if len(kept) < len(self.equalities):
            logger.debug(f"Reduced equalities {len(self.equalities)} -> {len(kept)}")
        return ConstraintSet(dim=self.dim, equalities=tuple(kept), intervals=self.intervals)


def _vectorize(op: np.ndarray) -> np.ndarray:
    # Tr(A rho) for Hermitian A, rho is the real dot product of these vectors
    return np.concatenate([op.real.ravel(), op.imag.ravel()])


# ── Objective ───────────────────────────────────────────────────────────────

def objective(rho: np.ndarray, maps: "GZMaps", floor: float = 1e-12) -> float:
    """D(G(rho) || Z(G(rho))) in bits."""
    g_rho = maps.G.apply(rho)
    return relative_entropy(g_rho, maps.Z.apply(g_rho), floor=floor)


def gradient(rho: np.ndarray, maps: "GZMaps", floor: float = 1e-12) -> np.ndarray:
    """G^dag(log2 G(rho)) - G^dag(log2 Z(G(rho)))."""
    g_rho = maps.G.apply(rho)
    grad = maps.G.adjoint(matrix_log2(g_rho, floor)) - maps.G.adjoint(matrix_log2(maps.Z.apply(g_rho), floor))
    return symmetrize(grad)


# ── Linear SDP subproblem ───────────────────────────────────────────────────

def _hs(op: np.ndarray, x) -> cp.Expression:
    """Re Tr(op^dag X) as an affine cvxpy expression."""
    return cp.sum(cp.multiply(np.real(op), cp.real(x))) + cp.sum(cp.multiply(np.imag(op), cp.imag(x)))


def _solver_options(name: str) -> dict:
    if name == "CLARABEL":
        return {"tol_feas": 1e-9, "tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9}
    if name == "SCS":
        return {"eps": 1e-9, "max_iters": 200000}
    return {}


class _PrimalSDP:
    """min <C, X> s.t. X >= 0 and the constraint set, compiled once per set."""

    def __init__(self, cs: ConstraintSet):
        d = cs.dim
        self.c_re = cp.Parameter((d, d))
        self.c_im = cp.Parameter((d, d))
        self.x = cp.Variable((d, d), hermitian=True)
        constraints = [self.x >> 0]
        constraints += [_hs(op, self.x) == g for op, g in cs.equalities]
        for op, lo, hi in cs.intervals:
            constraints += [_hs(op, self.x) >= lo, _hs(op, self.x) <= hi]
        objective_expr = cp.sum(cp.multiply(self.c_re, cp.real(self.x))) \
            + cp.sum(cp.multiply(self.c_im, cp.imag(self.x)))
        self.problem = cp.Problem(cp.Minimize(objective_expr), constraints)


class _DualSDP:
    """max g.y + lo.z - hi.w  s.t.  C - sum y_i G_i - sum (z_j - w_j) W_j >= 0, z, w >= 0."""

    def __init__(self, cs: ConstraintSet):
        d, m, n = cs.dim, cs.n_equalities, cs.n_intervals
        self.c_re = cp.Parameter((d, d))
        self.c_im = cp.Parameter((d, d))
        self.y = cp.Variable(m)
        self.z = cp.Variable(n, nonneg=True) if n else None
        self.w = cp.Variable(n, nonneg=True) if n else None
        slack = cp.Variable((d, d), hermitian=True)

        combo = sum(self.y[i] * op for i, (op, _) in enumerate(cs.equalities))
        value = np.array([g for _, g in cs.equalities]) @ self.y
        if n:
            combo = combo + sum((self.z[j] - self.w[j]) * op for j, (op, _, _) in enumerate(cs.intervals))
            value = value + np.array([lo for _, lo, _ in cs.intervals]) @ self.z \
                - np.array([hi for _, _, hi in cs.intervals]) @ self.w
        constraints = [slack == self.c_re + 1j * self.c_im - combo, slack >> 0]
        self.problem = cp.Problem(cp.Maximize(value), constraints)


@lru_cache(maxsize=16)
def _primal(cs: ConstraintSet) -> _PrimalSDP:
    return _PrimalSDP(cs)


@lru_cache(maxsize=16)
def _dual(cs: ConstraintSet) -> _DualSDP:
    return _DualSDP(cs)


def _backends(solver: str) -> Tuple[str, ...]:
    """The configured backend first, SCS as the fallback."""
    return tuple(dict.fromkeys([solver, "SCS"]))


def _run(problem: cp.Problem, name: str) -> str:
    try:
        problem.solve(solver=name, **_solver_options(name))
        return problem.status
    except cp.error.SolverError as e:
        logger.warning(f"SDP backend {name} failed: {e}")
        return "solver_error"


@dataclass(frozen=True)
class DualPoint:
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    value: float
    min_slack_eig: float
    shift: float


def _slack(c: np.ndarray, cs: ConstraintSet, y: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = c.astype(complex).copy()
    for coeff, (op, _) in zip(y, cs.equalities):
        out -= coeff * op
    for zj, wj, (op, _, _) in zip(z, w, cs.intervals):
        out -= (zj - wj) * op
    return symmetrize(out)


def _dual_value(cs: ConstraintSet, y: np.ndarray, z: np.ndarray, w: np.ndarray) -> float:
    value = float(np.dot(y, [g for _, g in cs.equalities]))
    value += float(np.dot(z, [lo for _, lo, _ in cs.intervals]))
    value -= float(np.dot(w, [hi for _, _, hi in cs.intervals]))
    return value


def dual_point(c: np.ndarray, cs: ConstraintSet, cfg: Optional[SolverConfig] = None) -> DualPoint:
    """A verified dual-feasible point for min <C, X> over the constraint set.

    The numerical dual solution is repaired by clipping the interval
    multipliers to be non-negative and shifting the unit-trace multiplier
    until the slack has minimum eigenvalue ``dual_margin``. If the backend
    fails the trivial point (y_0 = lambda_min(C), everything else zero) is
    used, so a certified value always comes back.
    """
    cfg = cfg or SolverConfig()
    c = check_hermitian(c)
    m, n = cs.n_equalities, cs.n_intervals
    dual = _dual(cs)
    dual.c_re.value = np.real(c)
    dual.c_im.value = np.imag(c)
    for name in _backends(cfg.sdp_solver):
        status = _run(dual.problem, name)
        if status in _OPTIMAL and dual.y.value is not None:
            break

    y, z, w = np.zeros(m), np.zeros(n), np.zeros(n)
    if status in _OPTIMAL and dual.y.value is not None:
        y = np.asarray(dual.y.value, dtype=float).copy()
        if n:
            z = np.clip(np.asarray(dual.z.value, dtype=float), 0.0, None)
            w = np.clip(np.asarray(dual.w.value, dtype=float), 0.0, None)
    else:
        logger.warning(f"Dual SDP returned status {status}; using the trivial dual point")

    min_eig = float(linalg.eigvalsh(_slack(c, cs, y, z, w))[0])
    shift = 0.0
    if min_eig < cfg.dual_margin:
        shift = min_eig - cfg.dual_margin
        y[0] += shift
        if abs(shift) > 1e-9:
            logger.warning(f"Dual point repaired: trace multiplier shifted by {shift:.3e}")

    verified = float(linalg.eigvalsh(_slack(c, cs, y, z, w))[0])
    value = _dual_value(cs, y, z, w)
    if not np.isfinite(value) or not np.all(np.isfinite(y)) or verified < cfg.dual_margin / 2:
        raise CertificateError("dual point failed the eigenvalue check",
                               {"min_slack_eig": verified, "value": value})
    return DualPoint(y=y, z=z, w=w, value=value, min_slack_eig=verified, shift=shift)


def linear_sdp_minimize(c: np.ndarray, cs: ConstraintSet, cfg: Optional[SolverConfig] = None,
                        certify: bool = True) -> Tuple[Optional[np.ndarray], Optional[DualPoint], str]:
    """argmin <C, sigma> over the constraint set.

    Returns (sigma, dual point, status). A backend answer is accepted when
    its raw solution violates the constraints by less than
    ``feasibility_tol``, has minimum eigenvalue above -PRIMAL_EIG_TOL and,
    with ``certify=True``, sits within SDP_GAP_TOL of the verified dual
    value. Otherwise the next backend is tried. If none passes, a certified
    call raises CertificateError and an uncertified one returns the first
    solution with status ``inaccurate``. Status ``infeasible`` means no
    backend produced a solution.
    """
    cfg = cfg or SolverConfig()
    c = check_hermitian(c)
    if c.shape != (cs.dim, cs.dim):
        raise DimensionError("cost operator has the wrong dimension", {"expected": cs.dim, "got": c.shape})

    primal = _primal(cs)
    primal.c_re.value = np.real(c)
    primal.c_im.value = np.imag(c)
    rejected = []
    for name in _backends(cfg.sdp_solver):
        status = _run(primal.problem, name)
        if status in _INFEASIBLE:
            logger.debug(f"Linear SDP status from {name}: {status}")
            return None, None, "infeasible"
        if status not in _OPTIMAL or primal.x.value is None:
            continue

        raw = symmetrize(np.asarray(primal.x.value, dtype=complex))
        evals, evecs = linalg.eigh(raw)
        sigma = symmetrize((evecs * np.maximum(evals, 0.0)) @ evecs.conj().T)
        check = {"backend": name, "residual": cs.residual(raw), "min_eig": float(evals[0])}
        if check["residual"] >= cfg.feasibility_tol or check["min_eig"] <= -PRIMAL_EIG_TOL:
            logger.warning(f"Linear SDP from {name} rejected: residual {check['residual']:.2e}, "
                           f"min eigenvalue {check['min_eig']:.2e}")
            rejected.append((sigma, check))
            continue
        if not certify:
            return sigma, None, "optimal"

        dual = dual_point(c, cs, cfg.model_copy(update={"sdp_solver": name}))
        check["gap"] = inner(c, raw) - dual.value
        if check["gap"] < SDP_GAP_TOL:
            return sigma, dual, "optimal"
        logger.warning(f"Linear SDP from {name} rejected: primal-dual gap {check['gap']:.2e}")
        rejected.append((sigma, check))

    if not rejected:
        return None, None, "infeasible"
    if certify:
        raise CertificateError("no SDP backend met the accuracy checks", rejected[0][1])
    return rejected[0][0], None, "inaccurate"


# ── Frank-Wolfe ─────────────────────────────────────────────────────────────

def feasible_init(cs: ConstraintSet, hint: Optional[np.ndarray] = None,
                  cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """The hint if it satisfies the constraints, otherwise a feasibility-SDP solution.

    The SDP solution is snapped onto the constraints with FeasibleRegion,
    so the returned state is feasible up to round-off.
    """
    cfg = cfg or SolverConfig()
    if hint is not None and cs.is_feasible(np.asarray(hint, dtype=complex), cfg.feasibility_tol):
        return symmetrize(np.asarray(hint, dtype=complex))
    if hint is not None:
        logger.debug("Starting hint violates the constraints; solving for a feasible point")

    reduced = cs.reduced()
    sigma, _, _ = linear_sdp_minimize(np.zeros((cs.dim, cs.dim)), reduced, cfg, certify=False)
    if sigma is None:
        raise InfeasibleError("constraint set is empty", {"dim": cs.dim, "equalities": cs.n_equalities})
    return FeasibleRegion.around(sigma, cs, cfg).anchor_state


# ── Exact feasibility ───────────────────────────────────────────────────────

def _unvectorize(v: np.ndarray, dim: int) -> np.ndarray:
    n = dim * dim
    return v[:n].reshape(dim, dim) + 1j * v[n:].reshape(dim, dim)


def _affine_project(x: np.ndarray, rows: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Closest Hermitian x' (Frobenius norm) with rows . vec(x') = targets."""
    if rows.size == 0:
        return x
    excess = rows @ _vectorize(x) - targets
    delta, *_ = np.linalg.lstsq(rows, excess, rcond=None)
    return symmetrize(x - _unvectorize(delta, x.shape[0]))


@dataclass(frozen=True, eq=False)
class FeasibleRegion:
    """Maps nearly feasible states to exactly feasible ones.

    Work happens on the support of an anchor state: a state is compressed to
    that support, projected onto the equalities, then mixed with the anchor
    just enough to be positive semidefinite and inside every interval. The
    anchor itself satisfies every constraint to round-off and is positive
    definite on the support.
    """
    basis: np.ndarray
    rows: np.ndarray
    targets: np.ndarray
    interval_ops: Tuple[np.ndarray, ...]
    lows: np.ndarray
    highs: np.ndarray
    anchor: np.ndarray
    anchor_min_eig: float

    @classmethod
    def around(cls, seed: np.ndarray, cs: ConstraintSet, cfg: Optional[SolverConfig] = None) -> "FeasibleRegion":
        """Anchor the region at a repaired copy of seed.

        Intervals the projected seed still violates are pinned to their
        midpoints. Raises InfeasibleError when no support cut gives a
        positive definite anchor satisfying every constraint.
        """
        cfg = cfg or SolverConfig()
        reduced = cs.reduced()
        evals, evecs = linalg.eigh(symmetrize(np.asarray(seed, dtype=complex)))
        for cut in SUPPORT_TOLS:
            basis = evecs[:, evals > cut]
            if basis.shape[1] == 0:
                continue
            region = cls._compressed(basis, reduced, seed)
            if region is not None and cs.residual(region.anchor_state) < cfg.feasibility_tol:
                logger.debug(f"Feasible region of rank {basis.shape[1]} at support cut {cut:.0e}, "
                             f"anchor min eigenvalue {region.anchor_min_eig:.3e}")
                return region
        raise InfeasibleError("no exactly feasible anchor near the starting state",
                              {"dim": cs.dim, "seed_min_eig": float(evals[0])})

    @classmethod
    def _compressed(cls, basis: np.ndarray, reduced: ConstraintSet, seed: np.ndarray) -> Optional["FeasibleRegion"]:
        def compress(op: np.ndarray) -> np.ndarray:
            return symmetrize(basis.conj().T @ op @ basis)

        rows = np.array([_vectorize(compress(op)) for op, _ in reduced.equalities])
        targets = np.array([g for _, g in reduced.equalities])
        interval_ops = tuple(compress(op) for op, _, _ in reduced.intervals)
        lows = np.array([lo for _, lo, _ in reduced.intervals])
        highs = np.array([hi for _, _, hi in reduced.intervals])

        anchor = compress(seed)
        pinned = {}
        for _ in range(len(interval_ops) + 1):
            pin_rows = [_vectorize(interval_ops[i]) for i in pinned]
            anchor = _affine_project(anchor, np.array([*rows, *pin_rows]), np.array([*targets, *pinned.values()]))
            values = [inner(op, anchor) for op in interval_ops]
            violated = [i for i, v in enumerate(values) if not lows[i] <= v <= highs[i] and i not in pinned]
            if not violated:
                break
            for i in violated:
                pinned[i] = 0.5 * (lows[i] + highs[i])

        values = np.array([inner(op, anchor) for op in interval_ops])
        min_eig = float(linalg.eigvalsh(anchor)[0])
        if min_eig <= 0.0 or np.any(values < lows - 1e-12) or np.any(values > highs + 1e-12):
            return None
        return cls(basis=basis, rows=rows, targets=targets, interval_ops=interval_ops,
                   lows=lows, highs=highs, anchor=anchor, anchor_min_eig=min_eig)

    @property
    def anchor_state(self) -> np.ndarray:
        return self._lift(self.anchor)

    def _lift(self, x: np.ndarray) -> np.ndarray:
        return symmetrize(self.basis @ x @ self.basis.conj().T)

    def _mixing_weight(self, x: np.ndarray) -> float:
        """Smallest t with (1 - t) x + t anchor feasible, by Weyl's inequality and linearity."""
        t = 0.0
        min_eig = float(linalg.eigvalsh(x)[0])
        if min_eig < 0.0:
            t = -min_eig / (self.anchor_min_eig - min_eig)
        for op, lo, hi in zip(self.interval_ops, self.lows, self.highs):
            v, a = inner(op, x), inner(op, self.anchor)
            if v < lo:
                t = max(t, (lo - v) / (a - v))
            elif v > hi:
                t = max(t, (v - hi) / (v - a))
        # nudge past the boundary so round-off cannot leave a negative eigenvalue
        return min(t * (1.0 + 1e-9) + 1e-15 if t > 0.0 else 0.0, 1.0)

    def project(self, rho: np.ndarray) -> np.ndarray:
        """A feasible state close to rho; the anchor when rho is far off."""
        x = _affine_project(symmetrize(self.basis.conj().T @ rho @ self.basis), self.rows, self.targets)
        t = self._mixing_weight(x)
        return self._lift((1.0 - t) * x + t * self.anchor)


def _line_search(rho: np.ndarray, direction: np.ndarray, f_rho: float, maps: "GZMaps",
                 cfg: SolverConfig, iteration: int) -> Tuple[float, float]:
    """Step size in [0, 1] and the objective there; never increases f."""
    def f_along(step: float) -> float:
        return objective(rho + step * direction, maps, cfg.spectral_floor)

    if cfg.line_search == "exact":
        res = minimize_scalar(f_along, bounds=(0.0, 1.0), method="bounded",
                              options={"maxiter": cfg.golden_evaluations, "xatol": 1e-10})
        if res.fun <= f_rho + 1e-12:
            return float(res.x), float(res.fun)
    step = 2.0 / (iteration + 2)
    value = f_along(step)
    if value <= f_rho + 1e-12:
        return step, value
    return 0.0, f_rho


def fw_minimize(cs: ConstraintSet, maps: "GZMaps", cfg: Optional[SolverConfig] = None,
                start: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, int, float, str]:
    """Frank-Wolfe on f over the constraint set.

    Returns (rho*, f(rho*), iterations, final FW gap, status). Every iterate
    and every linear-subproblem solution is passed through a FeasibleRegion
    anchored at the starting state, so rho* is feasible up to round-off and
    f(rho*) is an upper bound on the constrained minimum.
    """
    cfg = cfg or SolverConfig()
    if maps.dim_in != cs.dim:
        raise DimensionError("G input dimension does not match the constraints",
                             {"maps": maps.dim_in, "constraints": cs.dim})
    region = FeasibleRegion.around(feasible_init(cs, start, cfg), cs, cfg)
    rho = region.anchor_state
    reduced = cs.reduced()
    f_rho = objective(rho, maps, cfg.spectral_floor)
    fw_gap = float("inf")

    for t in range(cfg.max_iterations):
        grad = gradient(rho, maps, cfg.spectral_floor)
        sigma, _, _ = linear_sdp_minimize(grad, reduced, cfg, certify=False)
        if sigma is None:
            logger.warning(f"Linear subproblem infeasible at iteration {t}")
            return rho, f_rho, t, fw_gap, "infeasible"
        sigma = region.project(sigma)

        direction = sigma - rho
        fw_gap = -inner(grad, direction)
        logger.debug(f"FW iter {t}: f={f_rho:.9f}, gap={fw_gap:.3e}")
        if fw_gap < cfg.fw_gap_tol:
            return rho, f_rho, t, fw_gap, "converged"

        step, f_next = _line_search(rho, direction, f_rho, maps, cfg, t)
        if step == 0.0:
            logger.warning(f"No descent along the FW direction at iteration {t} (gap {fw_gap:.3e})")
            return rho, f_rho, t + 1, fw_gap, "iteration-limit"
        rho = symmetrize(rho + step * direction)
        f_rho = f_next

    return rho, f_rho, cfg.max_iterations, fw_gap, "iteration-limit"


# ── Certification ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Certificate:
    lower_bound: float
    linearization: float
    dual: DualPoint


def certify(rho_star: np.ndarray, cs: ConstraintSet, maps: "GZMaps",
            cfg: Optional[SolverConfig] = None) -> Certificate:
    cfg = cfg or SolverConfig()
    reduced = cs.reduced()
    grad = gradient(rho_star, maps, cfg.spectral_floor)
    dual = dual_point(grad, reduced, cfg)
    f_star = objective(rho_star, maps, cfg.spectral_floor)
    linearization = f_star - inner(rho_star, grad)
    return Certificate(lower_bound=linearization + dual.value, linearization=linearization, dual=dual)


def certified_lower_bound(rho_star: np.ndarray, cs: ConstraintSet, maps: "GZMaps",
                          cfg: Optional[SolverConfig] = None) -> float:
    """f(rho*) - <rho*, W> + (verified dual value of min <W, sigma>), W = grad f(rho*)."""
    return certify(rho_star, cs, maps, cfg).lower_bound


def solve(cs: ConstraintSet, maps: "GZMaps", cfg: Optional[SolverConfig] = None,
          hint: Optional[np.ndarray] = None) -> SolverReport:
    """Upper bound by Frank-Wolfe, then a certified lower bound at the FW iterate."""
    cfg = cfg or SolverConfig()
    try:
        rho, upper, iterations, fw_gap, status = fw_minimize(cs, maps, cfg, hint)
    except InfeasibleError as e:
        logger.warning(f"Solver: {e}")
        return SolverReport(upper_bound=float("nan"), lower_bound=float("nan"), gap=float("nan"),
                            iterations=0, status="infeasible")
    if status == "infeasible":
        return SolverReport(upper_bound=upper, lower_bound=float("nan"), gap=float("nan"),
                            iterations=iterations, status="infeasible", fw_gap=fw_gap)

    cert = certify(rho, cs, maps, cfg)
    lower = cert.lower_bound
    if lower > upper + cfg.feasibility_tol:
        raise CertificateError("certified lower bound exceeds the FW upper bound",
                               {"lower": lower, "upper": upper})
    # rho* is feasible to round-off, so any excess is float error
    lower = min(lower, upper)
    logger.info(f"Solver {status} after {iterations} iterations: "
                f"upper={upper:.6f}, lower={lower:.6f}")
    return SolverReport(upper_bound=upper, lower_bound=lower, gap=upper - lower,
                        iterations=iterations, status=status, fw_gap=fw_gap, dual_shift=cert.dual.shift)

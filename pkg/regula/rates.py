"""
Rates of asymptotic regularity and end-to-end certification.

``phi`` is the uniform bound theta(ceil(b^2/eps^2)). ``certify`` runs the
iteration out to (at least) that index and records whether the residual has
dropped below eps, together with the hypothesis checks and the inequality
oracles from ``regula.verify``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from regula import hilbert_core as hc
from regula.errors import PreconditionError, ScheduleError
from regula.hilbert_core import Vector
from regula.iteration import empirical_index, run_mann
from regula.operators import BallSampler, Operator, approx_fixed_point, residual
from regula.schedules import DivergenceRate, StepSchedule, robust_ceil, theta_constant, verify_theta
from regula.verify import (
    CheckOutcome,
    ToleranceRules,
    check_afp_telescoping,
    check_delta_claim,
    check_fixed_point_descent,
    check_monotone,
    check_step_reconstruction,
    check_step_sampled,
    check_strictness,
    load_tolerances,
    run_guarded,
)

logger = logging.getLogger(__name__)

DELTA_PROBES = (1e-2, 1e-4, 1e-6)
LARGE_PHI = 1_000_000
VERIFICATION_PREFIX = 10_000
PROBE_BUDGET = 10_000
SAMPLED_Y = 16


def _require_positive(eps: float, b: float) -> None:
    if not (eps > 0 and b > 0):
        raise PreconditionError(f"eps and b must be positive, got eps={eps!r}, b={b!r}.")


def phi(eps: float, b: float, rate: DivergenceRate) -> int:
    """theta(ceil(b^2 / eps^2)), with the ceiling snapped to nearby integers."""
    _require_positive(eps, b)
    return rate(robust_ceil(b * b / (eps * eps)))


def phi_krasnoselskii(eps: float, b: float, lam: float, kappa: float) -> int:
    """ceil(1/((lambda-kappa)(1-lambda))) * ceil(b^2/eps^2) for a constant step."""
    _require_positive(eps, b)
    if not (0.0 <= kappa < lam < 1.0):
        raise PreconditionError(f"need 0 <= kappa < lambda < 1, got lambda={lam!r}, kappa={kappa!r}.")
    return phi(eps, b, theta_constant(lam, kappa))


@dataclass
class ScalingReport:
    ok: bool
    phi_eps: int
    phi_half_eps: int
    ratio: float


def quadratic_scaling_check(b: float, lam: float, kappa: float, eps: float) -> ScalingReport:
    """Halving eps multiplies the constant-step bound by exactly 4.

    Requires b^2/eps^2 to be a positive integer so neither ceiling rounds.
    """
    _require_positive(eps, b)
    q = b * b / (eps * eps)
    nearest = round(q)
    if nearest < 1 or abs(q - nearest) > 1e-9 * max(1.0, q):
        raise PreconditionError(f"b^2/eps^2 must be a positive integer, got {q!r}.")
    whole = phi_krasnoselskii(eps, b, lam, kappa)
    half = phi_krasnoselskii(eps / 2.0, b, lam, kappa)
    return ScalingReport(half == 4 * whole, whole, half, half / whole)


@dataclass
class CertificationReport:
    phi: int
    eps: float
    b: float
    empirical_idx: Optional[int]
    bound_holds: bool
    tightness: Optional[float]
    checks: List[CheckOutcome] = field(default_factory=list)
    hypotheses: List[CheckOutcome] = field(default_factory=list)
    bound_holds_at_phi: bool = True
    near_boundary_indices: List[int] = field(default_factory=list)
    horizon: int = 0
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def hypothesis_verified(self) -> bool:
        return all(h.ok for h in self.hypotheses)

    @property
    def checks_ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi": self.phi,
            "eps": self.eps,
            "b": self.b,
            "empirical_idx": self.empirical_idx,
            "bound_holds": self.bound_holds,
            "bound_holds_at_phi": self.bound_holds_at_phi,
            "tightness": self.tightness,
            "horizon": self.horizon,
            "near_boundary_indices": list(self.near_boundary_indices),
            "hypothesis_verified": self.hypothesis_verified,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "checks": [c.to_dict() for c in self.checks],
            "provenance": dict(self.provenance),
        }


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------

def _residual_hypothesis(r0: float, b: float) -> CheckOutcome:
    ok = b >= r0
    return CheckOutcome("hypothesis:residual_bound", ok, max(r0 - b, 0.0), 0.0,
                        {"residual_x0": r0, "b": b},
                        "" if ok else f"||x0-Tx0||={r0!r} exceeds b={b!r}")


def _afp_hypothesis(T: Operator, x0: Vector, b: float):
    """Probes Fix_delta(T, x0, b) for each delta; returns (outcome, best y or None)."""
    if b >= T.domain.diameter:
        y = approx_fixed_point(T, x0, b, DELTA_PROBES[-1], PROBE_BUDGET)
        return (CheckOutcome("hypothesis:approximate_fixed_points", True, 0.0, 0.0,
                             {"discharged_by": "bounded domain", "diameter": T.domain.diameter},
                             f"b >= diameter of {T.domain.describe()}"), y)

    failed, best = [], None
    for delta in DELTA_PROBES:
        y = approx_fixed_point(T, x0, b, delta, PROBE_BUDGET)
        if y is None:
            failed.append(delta)
        else:
            best = y
    ok = not failed
    detail = "" if ok else f"no point found for delta in {failed}"
    if not ok:
        logger.warning("approximate fixed point hypothesis unverified for %s: %s", T.name, detail)
    return (CheckOutcome("hypothesis:approximate_fixed_points", ok, float(len(failed)), 0.0,
                         {"deltas": list(DELTA_PROBES), "failed": failed}, detail), best)


def _rate_hypothesis(s: StepSchedule, rate: DivergenceRate, target: int,
                     rules: ToleranceRules) -> CheckOutcome:
    name = "hypothesis:rate_of_divergence"
    try:
        report = verify_theta(s, rate, target, rules.theta_tol)
    except ScheduleError as e:
        return CheckOutcome(name, False, 0.0, rules.theta_tol, None, str(e))
    ok = report.ok and report.nondecreasing
    detail = report.detail or ("" if report.nondecreasing else "theta is not nondecreasing")
    return CheckOutcome(name, ok, report.shortfall, rules.theta_tol,
                        {"first_failure": report.first_failure, "n_max": target}, detail)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def certify(T: Operator, s: StepSchedule, rate: DivergenceRate, x0: Vector, b: float, eps: float,
            horizon_extra: int = 0, rules: Optional[ToleranceRules] = None,
            n_samples: int = 1_000, sampler: Optional[BallSampler] = None) -> CertificationReport:
    """Checks that r_n < eps for every n in [phi, phi + horizon_extra].

    Hypothesis failures are reported, never raised: the trace is still run and
    the bound is still tested against it.
    """
    _require_positive(eps, b)
    if horizon_extra < 0:
        raise PreconditionError(f"horizon_extra must be >= 0, got {horizon_extra}.")
    rules = rules or load_tolerances()
    sampler = sampler or BallSampler.for_operator(T)
    x0 = hc.as_vector(x0)
    r0 = residual(T, x0)

    target = robust_ceil(b * b / (eps * eps))
    bound = rate(target)
    if bound > LARGE_PHI and horizon_extra:
        logger.warning("phi=%d exceeds %d; checking n=phi only (horizon_extra %d -> 0)",
                       bound, LARGE_PHI, horizon_extra)
        horizon_extra = 0
    N = bound + horizon_extra

    afp_outcome, y = _afp_hypothesis(T, x0, b)
    hypotheses = [
        _residual_hypothesis(r0, b),
        afp_outcome,
        _rate_hypothesis(s, rate, target, rules),
    ]

    keep_points = N <= VERIFICATION_PREFIX
    trace = run_mann(T, s, x0, N, keep_points=keep_points)
    prefix = trace if keep_points else run_mann(T, s, x0, VERIFICATION_PREFIX, keep_points=True)

    r = trace.residuals
    bound_holds = bool(np.all(r[bound:] < eps))
    at_phi = bool(r[bound] < eps)
    if bound_holds != at_phi:
        logger.warning("residuals not monotone past phi for %s", T.name)
    idx = empirical_index(trace, eps)
    tightness = idx / bound if idx is not None and bound > 0 else None
    near = np.flatnonzero(np.abs(r - eps) < rules.boundary_abs).tolist()

    rng = np.random.default_rng(sampler.seed)
    ys = [hc.as_vector(v) for v in sampler.points(SAMPLED_Y, rng)]
    if y is not None:
        ys.insert(0, y)

    def delta_claim():
        if b < r0:
            raise PreconditionError(f"b={b!r} < ||x0-Tx0||={r0!r}")
        return check_delta_claim(trace, bound, b, rules)

    def telescoping():
        if y is None:
            raise PreconditionError("no approximate fixed point within b of x0")
        return check_afp_telescoping(prefix, y, prefix.N - 1, max(b, r0, hc.distance(x0, y)), rules)

    def descent():
        if T.known_fixed_point is None:
            return CheckOutcome("check_fixed_point_descent", True, 0.0, rules.defect_rel,
                                None, "skipped: no known fixed point")
        return check_fixed_point_descent(prefix, T.known_fixed_point, rules)

    checks = [
        run_guarded("check_monotone_residuals", lambda: check_monotone(trace, rules)),
        run_guarded("check_delta_claim", delta_claim),
        run_guarded("check_strict", lambda: check_strictness(T, T.kappa, sampler, n_samples, rules)),
        run_guarded("check_lemma_step", lambda: check_step_sampled(prefix, ys, rules)),
        run_guarded("check_fixed_point_descent", descent),
        run_guarded("check_afp_telescoping", telescoping),
        run_guarded("step_reconstruction", lambda: check_step_reconstruction(prefix)),
    ]

    report = CertificationReport(
        phi=bound,
        eps=eps,
        b=b,
        empirical_idx=idx,
        bound_holds=bound_holds,
        tightness=tightness,
        checks=checks,
        hypotheses=hypotheses,
        bound_holds_at_phi=at_phi,
        near_boundary_indices=near,
        horizon=N,
        provenance={
            "operator": T.name,
            "operator_spec": T.spec.to_dict() if T.spec is not None else None,
            "kappa": T.kappa,
            "domain": T.domain.describe(),
            "schedule": s.label,
            "schedule_spec": s.to_spec().to_dict(),
            "theta": rate.description,
            "theta_source": rate.source.value,
            "x0": x0.tolist(),
            "seed": sampler.seed,
            "verification_prefix": prefix.N,
            "stationary_from": trace.stationary_from,
            "cycle_period": trace.cycle_period,
            "tolerances": rules.version,
        },
    )
    logger.info("certify %s / %s: phi=%d idx=%s bound_holds=%s hypotheses=%s",
                T.name, s.label, bound, idx, bound_holds, report.hypothesis_verified)
    return report


def certify_many(jobs: Sequence[Mapping[str, Any]], max_workers: int = 4) -> List[CertificationReport]:
    """Runs ``certify(**job)`` for each job; results come back in input order."""
    if max_workers <= 1 or len(jobs) <= 1:
        return [certify(**job) for job in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda job: certify(**job), jobs))

"""
Numerical oracles for the inequalities behind the asymptotic-regularity bound.

Scalar checks (``check_lemma_tzy``, ``check_lemma_step``, ``check_afp_step_bound``)
return the signed defect LHS - RHS. Everything else returns a ``CheckOutcome``
whose ``worst_defect`` is the largest defect divided by its scale, so
``ok == (worst_defect <= tolerance)``.
"""

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from regula import hilbert_core as hc
from regula.errors import PreconditionError
from regula.hilbert_core import Vector
from regula.iteration import IterationTrace, check_monotone_residuals, delta_sum, run_mann
from regula.operators import BallSampler, Operator, approx_fixed_point, check_strict, evaluate, residual
from regula.schedules import DivergenceRate, StepSchedule, robust_ceil, theta_computed, theta_constant, verify_theta

logger = logging.getLogger(__name__)

SUITE_HORIZON = 2_000
MAX_SAMPLED_Y = 256


# ---------------------------------------------------------------------------
# Tolerance rulesets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToleranceRules:
    version: str = "default"
    identity_rel: float = 1e-10
    abs_floor: float = 1e-12
    defect_rel: float = 1e-9
    nonexpansive_rel: float = 1e-10
    monotone_abs: float = 1e-10
    delta_rel: float = 1e-8
    theta_tol: float = 1e-9
    boundary_abs: float = 1e-12
    agreement_abs: float = 1e-12


def load_tolerances(version: str = "default") -> ToleranceRules:
    """Loads a tolerance ruleset from data/tolerances.json."""
    base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    data_path = os.path.join(base_path, "data", "tolerances.json")

    try:
        with open(data_path, "r") as f:
            all_rules = json.load(f)
    except FileNotFoundError:
        logger.warning("tolerances.json not found at %s; using built-in defaults", data_path)
        return ToleranceRules()

    if version not in all_rules:
        logger.warning("Unknown tolerance ruleset '%s'; falling back to 'default'", version)
        version = "default"

    rules = {k: v for k, v in all_rules[version].items() if k != "description"}
    return ToleranceRules(version=version, **rules)


# ---------------------------------------------------------------------------
# Outcome record
# ---------------------------------------------------------------------------

@dataclass
class CheckOutcome:
    name: str
    ok: bool
    worst_defect: float
    tolerance: float
    witness: Any = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _outcome(name: str, ratios: np.ndarray, tolerance: float,
             witness_of: Callable[[int], Any], detail: str = "") -> CheckOutcome:
    if ratios.size == 0:
        return CheckOutcome(name, True, 0.0, tolerance, None, detail or "no samples")
    i = int(np.argmax(ratios))
    worst = float(ratios[i])
    ok = worst <= tolerance
    if not ok:
        logger.debug("%s failed: worst defect %.3e > %.1e", name, worst, tolerance)
    return CheckOutcome(name, ok, worst, tolerance, witness_of(i), detail)


def _failed_precondition(name: str, tolerance: float, message: str) -> CheckOutcome:
    return CheckOutcome(name, False, 0.0, tolerance, None, f"precondition: {message}")


def run_guarded(name: str, check: Callable[[], Any]) -> Any:
    """Runs a check, turning a PreconditionError into a failed outcome."""
    try:
        return check()
    except PreconditionError as e:
        return _failed_precondition(name, 0.0, str(e))


def _sq(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


# ---------------------------------------------------------------------------
# Scalar defects
# ---------------------------------------------------------------------------

def check_lemma_tzy(T: Operator, kappa: float, z: Vector, y: Vector) -> float:
    """||Tz-y||^2 - (||z-y||^2 + k||z-Tz||^2 + (k+1)||y-Ty||^2 + 2||z-Ty|| ||y-Ty||)."""
    tz, ty = evaluate(T, z), evaluate(T, y)
    ry = hc.distance(y, ty)
    rhs = (hc.squared_distance(z, y) + kappa * hc.squared_distance(z, tz)
           + (kappa + 1.0) * ry * ry + 2.0 * hc.distance(z, ty) * ry)
    return hc.squared_distance(tz, y) - rhs


def _require_step_index(trace: IterationTrace, n: int) -> None:
    if not 0 <= n < trace.N:
        raise PreconditionError(f"n={n} must satisfy 0 <= n < N={trace.N}.")


def check_lemma_step(T: Operator, s: StepSchedule, trace: IterationTrace, y: Vector, n: int) -> float:
    """||x_{n+1}-y||^2 - (||x_n-y||^2 - a_n r_n^2 + 2||y-Ty||(||x_n-y|| + 2||y-Ty||))."""
    _require_step_index(trace, n)
    xn, xn1 = trace.point(n), trace.point(n + 1)
    ry = residual(T, y)
    rn = trace.residuals[n]
    rhs = (hc.squared_distance(xn, y) - s.weight_at(n) * rn * rn
           + 2.0 * ry * (hc.distance(xn, y) + 2.0 * ry))
    return hc.squared_distance(xn1, y) - rhs


def _check_afp_hypotheses(trace: IterationTrace, y: Vector, b: float) -> None:
    need = max(trace.residuals[0], hc.distance(trace.point(0), y))
    if b < need:
        raise PreconditionError(f"b={b!r} must be >= max(||x0-Tx0||, ||x0-y||)={need!r}.")


def check_afp_step_bound(T: Operator, s: StepSchedule, trace: IterationTrace, y: Vector,
                         n: int, b: float, c: float) -> float:
    """||x_{n+1}-y||^2 - (||x_n-y||^2 - a_n r_n^2 + 2((n+1)b + 2c)||y-Ty||), for c >= ||y-Ty||."""
    _require_step_index(trace, n)
    _check_afp_hypotheses(trace, y, b)
    ry = residual(T, y)
    if c < ry:
        raise PreconditionError(f"c={c!r} must be >= ||y-Ty||={ry!r}.")
    xn, xn1 = trace.point(n), trace.point(n + 1)
    rn = trace.residuals[n]
    rhs = hc.squared_distance(xn, y) - s.weight_at(n) * rn * rn + 2.0 * ((n + 1) * b + 2.0 * c) * ry
    return hc.squared_distance(xn1, y) - rhs


# ---------------------------------------------------------------------------
# Trace-level checks
# ---------------------------------------------------------------------------

def _orbit_sq_distances(trace: IterationTrace, y: Vector) -> np.ndarray:
    if not trace.has_points:
        raise PreconditionError("This check needs a trace with stored points.")
    return _sq(trace.points - y)


def _descent_terms(trace: IterationTrace, d2: np.ndarray):
    """(lhs, rhs without the y-dependent term, scale) for n = 0..N-1."""
    r = trace.residuals[:-1]
    a = trace.weights[: trace.N]
    lhs = d2[1:]
    base = d2[:-1] - a * r * r
    scale = 1.0 + d2[:-1] + d2[1:]
    return lhs, base, scale


def fixed_point_descent_defects(trace: IterationTrace, p: Vector) -> np.ndarray:
    """||x_{n+1}-p||^2 - (||x_n-p||^2 - a_n r_n^2) for n = 0..N-1."""
    lhs, base, _ = _descent_terms(trace, _orbit_sq_distances(trace, p))
    return lhs - base


def check_fixed_point_descent(trace: IterationTrace, p: Vector,
                              rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    T = trace.operator
    if T is None:
        raise PreconditionError("Trace carries no operator; cannot confirm p is a fixed point.")
    rp = residual(T, p)
    if rp > 1e-12 * (1.0 + hc.norm(p)):
        raise PreconditionError(f"p is not a fixed point: ||p-Tp||={rp:.3e}.")
    lhs, base, scale = _descent_terms(trace, _orbit_sq_distances(trace, p))
    ratios = (lhs - base) / scale
    return _outcome("check_fixed_point_descent", ratios, rules.defect_rel, lambda i: {"n": i})


def check_step_descent_agreement(T: Operator, s: StepSchedule, trace: IterationTrace, p: Vector,
                                 rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """The scalar step oracle at a fixed point p against the vectorised descent defects.

    With ||p-Tp|| = 0 both reduce to the same inequality, so they must agree
    to ``agreement_abs`` at every step.
    """
    rules = rules or ToleranceRules()
    descent = fixed_point_descent_defects(trace, p)
    gaps = np.array([abs(check_lemma_step(T, s, trace, p, n) - descent[n]) for n in range(trace.N)])
    return _outcome("check_step_descent_agreement", gaps, rules.agreement_abs, lambda i: {"n": i})


def check_growth_bounds(trace: IterationTrace, y: Vector, b: float,
                        rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """||x_n-y|| <= (n+1)b and ||Tx_n-y|| <= (n+2)b for all n <= N."""
    rules = rules or ToleranceRules()
    _check_afp_hypotheses(trace, y, b)
    n = np.arange(trace.N + 1, dtype=np.float64)
    dx = np.sqrt(_sq(trace.points - y))
    dtx = np.sqrt(_sq(trace.images - y))
    ratios = np.maximum((dx - (n + 1) * b) / (1.0 + (n + 1) * b),
                        (dtx - (n + 2) * b) / (1.0 + (n + 2) * b))
    return _outcome("check_growth_bounds", ratios, rules.defect_rel, lambda i: {"n": i})


def check_delta_claim(trace: IterationTrace, m: int, b: float,
                      rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """sum_{n<=m} a_n r_n^2 <= b^2 (up to delta_rel * (1 + b^2))."""
    rules = rules or ToleranceRules()
    if not 0 <= m <= trace.N:
        raise PreconditionError(f"m={m} outside the trace horizon 0..{trace.N}.")
    delta = delta_sum(trace, m)
    ratio = (delta - b * b) / (1.0 + b * b)
    return CheckOutcome("check_delta_claim", ratio <= rules.delta_rel, ratio, rules.delta_rel,
                        {"m": m, "delta": delta, "b_squared": b * b})


def check_afp_telescoping(trace: IterationTrace, y: Vector, m: int, b: float,
                          rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """For ||y-Ty|| <= 1/2 and every k <= m:
    Delta_k <= ||x0-y||^2 - ||x_{k+1}-y||^2 + ||y-Ty||(k+1)(kb+2b+2)."""
    rules = rules or ToleranceRules()
    T = trace.operator
    if T is None:
        raise PreconditionError("Trace carries no operator.")
    if not 0 <= m < trace.N:
        raise PreconditionError(f"m={m} must satisfy 0 <= m < N={trace.N}.")
    _check_afp_hypotheses(trace, y, b)
    ry = residual(T, y)
    if ry > 0.5:
        raise PreconditionError(f"||y-Ty||={ry!r} exceeds 1/2.")
    d2 = _orbit_sq_distances(trace, y)
    k = np.arange(m + 1, dtype=np.float64)
    deltas = trace.delta_partials[: m + 1]
    bound = d2[0] - d2[1: m + 2] + ry * (k + 1) * (k * b + 2 * b + 2)
    ratios = (deltas - bound) / (1.0 + d2[0] + b * b)
    return _outcome("check_afp_telescoping", ratios, rules.defect_rel, lambda i: {"m": i})


def check_monotone(trace: IterationTrace, rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    report = check_monotone_residuals(trace, rules.monotone_abs)
    return CheckOutcome("check_monotone_residuals", report.ok, report.worst_increase,
                        rules.monotone_abs, {"first_violation": report.first_violation})


def check_delta_monotone(trace: IterationTrace, rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """Partial sums Delta_m never decrease (weights and squared residuals are >= 0)."""
    rules = rules or ToleranceRules()
    drops = -np.diff(trace.delta_partials)
    return _outcome("check_delta_monotone", drops, rules.monotone_abs, lambda i: {"m": i + 1})


def check_step_reconstruction(trace: IterationTrace) -> CheckOutcome:
    """Every stored x_{n+1} equals lambda_n x_n + (1-lambda_n) T x_n bit for bit."""
    if trace.N == 0:
        return CheckOutcome("step_reconstruction", True, 0.0, 0.0)
    lam = trace.lambdas[: trace.N, None]
    rebuilt = lam * trace.points[:-1] + (1.0 - lam) * trace.images[:-1]
    gaps = np.max(np.abs(trace.points[1:] - rebuilt), axis=1)
    return _outcome("step_reconstruction", gaps, 0.0, lambda i: {"n": i})


# ---------------------------------------------------------------------------
# Sampled checks
# ---------------------------------------------------------------------------

def check_norm_identities(rng: np.random.Generator, n_samples: int, dims: Sequence[int],
                          rules: Optional[ToleranceRules] = None) -> List[CheckOutcome]:
    """Sampled norm identities, Cauchy-Schwarz and exact symmetry of inner."""
    rules = rules or ToleranceRules()
    sums = np.empty(n_samples)
    diffs = np.empty(n_samples)
    convex = np.empty(n_samples)
    cs = np.empty(n_samples)
    asym = np.empty(n_samples)
    for i in range(n_samples):
        d = int(rng.choice(dims))
        magnitude = 10.0 ** rng.uniform(-3, 3)
        x = hc.as_vector(magnitude * rng.standard_normal(d))
        y = hc.as_vector(magnitude * rng.standard_normal(d))
        t = float(rng.random())
        scale = hc.defect_scale(x, y)
        sums[i] = abs(hc.identity_defect_sum(x, y)) / scale
        diffs[i] = abs(hc.identity_defect_difference(x, y)) / scale
        convex[i] = abs(hc.identity_defect_convex(t, x, y)) / scale
        xx, yy, xy = hc.inner(x, x), hc.inner(y, y), hc.inner(x, y)
        cs[i] = (xy * xy - xx * yy) / (1.0 + xx * yy)
        asym[i] = abs(hc.inner(x, y) - hc.inner(y, x))

    witness = lambda i: {"sample": i}
    return [
        _outcome("identity_defect_sum", sums, rules.identity_rel, witness),
        _outcome("identity_defect_difference", diffs, rules.identity_rel, witness),
        _outcome("identity_defect_convex", convex, rules.identity_rel, witness),
        _outcome("cauchy_schwarz", cs, rules.abs_floor, witness),
        _outcome("inner_symmetry", asym, 0.0, witness),
    ]


def check_strictness(T: Operator, kappa: float, sampler: BallSampler, n_samples: int,
                     rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    report = check_strict(T, kappa, sampler, n_samples, rules.defect_rel)
    return CheckOutcome("check_strict", report.holds, report.worst_ratio, rules.defect_rel,
                        {"pair": report.worst_pair, "defect": report.worst_defect},
                        f"kappa={kappa!r}, {n_samples} pairs")


def check_nonexpansive(T: Operator, sampler: BallSampler, n_samples: int,
                       rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """||Tx-Ty|| <= ||x-y|| on sampled pairs."""
    rules = rules or ToleranceRules()
    xs, ys = sampler.pairs(n_samples)
    ratios = np.empty(n_samples)
    for i, (x, y) in enumerate(zip(xs, ys)):
        tx, ty = evaluate(T, x), evaluate(T, y)
        ratios[i] = (hc.distance(tx, ty) - hc.distance(x, y)) / hc.defect_scale(x, y)
    return _outcome("check_nonexpansive", ratios, rules.nonexpansive_rel,
                    lambda i: {"pair": [xs[i].tolist(), ys[i].tolist()]})


def check_tzy_sampled(T: Operator, kappa: float, sampler: BallSampler, n_samples: int,
                      rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    zs, ys = sampler.pairs(n_samples)
    ratios = np.empty(n_samples)
    for i, (z, y) in enumerate(zip(zs, ys)):
        z, y = hc.as_vector(z), hc.as_vector(y)
        scale = hc.defect_scale(z, y, evaluate(T, z), evaluate(T, y))
        ratios[i] = check_lemma_tzy(T, kappa, z, y) / scale
    return _outcome("check_lemma_tzy", ratios, rules.defect_rel,
                    lambda i: {"z": zs[i].tolist(), "y": ys[i].tolist()})


def _step_lemma_sampled(trace: IterationTrace, ys: Sequence[Vector], name: str,
                        rules: ToleranceRules, extra: Callable[[Vector, float, np.ndarray], np.ndarray]
                        ) -> CheckOutcome:
    """Runs a one-step descent inequality for every (y, n) pair.

    ``extra(y, ry, d2)`` returns the y-dependent slack term for n = 0..N-1.
    """
    T = trace.operator
    all_ratios, where = [], []
    for j, y in enumerate(ys):
        ry = residual(T, y)
        d2 = _orbit_sq_distances(trace, y)
        lhs, base, scale = _descent_terms(trace, d2)
        slack = extra(y, ry, d2)
        all_ratios.append((lhs - base - slack) / (scale + ry * ry))
        where.extend((j, n) for n in range(trace.N))
    if not all_ratios:
        return CheckOutcome(name, True, 0.0, rules.defect_rel, None, "no samples")
    ratios = np.concatenate(all_ratios)
    return _outcome(name, ratios, rules.defect_rel,
                    lambda i: {"y": np.asarray(ys[where[i][0]]).tolist(), "n": where[i][1]},
                    f"{len(ys)} points x {trace.N} steps")


def check_step_sampled(trace: IterationTrace, ys: Sequence[Vector],
                       rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    return _step_lemma_sampled(
        trace, ys, "check_lemma_step", rules,
        lambda y, ry, d2: 2.0 * ry * (np.sqrt(d2[:-1]) + 2.0 * ry))


def check_afp_step_sampled(trace: IterationTrace, ys: Sequence[Vector], b: float,
                           c: Optional[float], rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    """Step bound with explicit c; c=None uses c = ||y-Ty|| for each y.

    b is raised per point to max(b, r_0, ||x0-y||) so the growth hypothesis holds.
    """
    rules = rules or ToleranceRules()
    label = "residual" if c is None else f"{c:g}"
    n = np.arange(trace.N, dtype=np.float64)
    r0 = trace.residuals[0]

    def extra(y, ry, d2):
        b_y = max(b, r0, math.sqrt(d2[0]))
        c_y = ry if c is None else c
        return 2.0 * ((n + 1) * b_y + 2.0 * c_y) * ry

    if c is not None:
        ys = [y for y in ys if residual(trace.operator, y) <= c]
    return _step_lemma_sampled(trace, ys, f"check_afp_step_bound[c={label}]", rules, extra)


def check_theta(s: StepSchedule, rate: DivergenceRate, n_max: int,
                rules: Optional[ToleranceRules] = None) -> CheckOutcome:
    rules = rules or ToleranceRules()
    report = verify_theta(s, rate, n_max, rules.theta_tol)
    return CheckOutcome("verify_theta", report.ok, report.shortfall, rules.theta_tol,
                        {"first_failure": report.first_failure, "n_max": n_max,
                         "nondecreasing": report.nondecreasing},
                        report.detail or rate.description)


# ---------------------------------------------------------------------------
# Full suite
# ---------------------------------------------------------------------------

def run_full_suite(T: Operator, s: StepSchedule, x0: Vector, b: float, eps: float,
                   sampler: Optional[BallSampler] = None, n_samples: int = 10_000,
                   rate: Optional[DivergenceRate] = None,
                   rules: Optional[ToleranceRules] = None,
                   max_workers: int = 1) -> List[CheckOutcome]:
    """Runs every check against one (operator, schedule, start) configuration.

    Results come back in a fixed order regardless of ``max_workers``.
    """
    rules = rules or load_tolerances()
    sampler = sampler or BallSampler.for_operator(T)
    x0 = hc.as_vector(x0)
    if rate is None:
        rate = theta_constant(s.lam, s.kappa) if s.is_constant else theta_computed(s)

    target = robust_ceil(b * b / (eps * eps))
    phi = rate(target)
    horizon = max(1, min(phi, SUITE_HORIZON))
    trace = run_mann(T, s, x0, horizon, keep_points=True)
    r0 = float(trace.residuals[0])

    afp = approx_fixed_point(T, x0, b, 1e-6, 10_000)
    rng = np.random.default_rng(sampler.seed)
    rng_identities = np.random.default_rng(sampler.seed + 1)
    n_y = min(MAX_SAMPLED_Y, max(1, math.ceil(n_samples / trace.N)))
    sampled_ys = [hc.as_vector(y) for y in sampler.points(n_y, rng)]
    near_fixed = [hc.as_vector(trace.points[i]) for i in np.flatnonzero(trace.residuals <= 0.5)[:n_y]]
    if afp is not None:
        near_fixed.insert(0, afp)

    def growth():
        y = afp if afp is not None else x0
        return check_growth_bounds(trace, y, max(b, r0, hc.distance(x0, y)), rules)

    def descent():
        p = T.known_fixed_point
        if p is None:
            return CheckOutcome("check_fixed_point_descent", True, 0.0, rules.defect_rel,
                                None, "skipped: no known fixed point")
        return check_fixed_point_descent(trace, p, rules)

    def agreement():
        p = T.known_fixed_point
        if p is None:
            return CheckOutcome("check_step_descent_agreement", True, 0.0, rules.agreement_abs,
                                None, "skipped: no known fixed point")
        return check_step_descent_agreement(T, s, trace, p, rules)

    def delta_claim():
        name = "check_delta_claim"
        if b < r0:
            return _failed_precondition(name, rules.delta_rel, f"b={b!r} < ||x0-Tx0||={r0!r}")
        if afp is None:
            return _failed_precondition(name, rules.delta_rel, "no approximate fixed point within b of x0")
        return check_delta_claim(trace, min(phi, trace.N), b, rules)

    def telescoping():
        name = "check_afp_telescoping"
        if afp is None:
            return _failed_precondition(name, rules.defect_rel, "no approximate fixed point within b of x0")
        y = afp
        return check_afp_telescoping(trace, y, trace.N - 1, max(b, r0, hc.distance(x0, y)), rules)

    def nonexpansive():
        if T.kappa != 0.0:
            return CheckOutcome("check_nonexpansive", True, 0.0, rules.nonexpansive_rel,
                                None, "skipped: kappa > 0")
        return check_nonexpansive(T, sampler, n_samples, rules)

    def approx_point():
        name = "approx_fixed_point"
        if afp is None:
            return _failed_precondition(name, 0.0, f"none found within b={b!r} at delta=1e-6")
        gap = hc.distance(x0, afp) - b
        ok = gap <= 0.0 and residual(T, afp) < 1e-6
        return CheckOutcome(name, ok, max(gap, 0.0), 0.0, {"y": afp.tolist()})

    tasks: List[Tuple[str, Callable[[], Any]]] = [
        ("norm_identities", lambda: check_norm_identities(rng_identities, n_samples, (1, 2, 3, T.dim, 64), rules)),
        ("check_strict", lambda: check_strictness(T, T.kappa, sampler, n_samples, rules)),
        ("check_nonexpansive", nonexpansive),
        ("check_lemma_tzy", lambda: check_tzy_sampled(T, T.kappa, sampler, n_samples, rules)),
        ("check_lemma_step", lambda: check_step_sampled(trace, sampled_ys + near_fixed, rules)),
        ("check_fixed_point_descent", descent),
        ("check_step_descent_agreement", agreement),
        ("check_monotone_residuals", lambda: check_monotone(trace, rules)),
        ("check_growth_bounds", growth),
        ("check_afp_step_bound[c=0.5]", lambda: check_afp_step_sampled(trace, near_fixed, b, 0.5, rules)),
        ("check_afp_step_bound[c=residual]",
         lambda: check_afp_step_sampled(trace, sampled_ys + near_fixed, b, None, rules)),
        ("check_delta_claim", delta_claim),
        ("check_afp_telescoping", telescoping),
        ("step_reconstruction", lambda: check_step_reconstruction(trace)),
        ("verify_theta", lambda: check_theta(s, rate, target, rules)),
        ("approx_fixed_point", approx_point),
    ]

    def run(task):
        return run_guarded(*task)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]

    outcomes: List[CheckOutcome] = []
    for result in results:
        outcomes.extend(result if isinstance(result, list) else [result])
    logger.info("suite for %s: %d/%d checks ok", T.name, sum(o.ok for o in outcomes), len(outcomes))
    return outcomes

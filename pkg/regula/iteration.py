"""
Mann iteration engine.

Convention: x_{n+1} = lambda_n x_n + (1 - lambda_n) T x_n. With this
convention the one-step descent coefficient is exactly
(lambda_n - kappa)(1 - lambda_n), the weight whose series must diverge.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Optional

import numpy as np

from regula import hilbert_core as hc
from regula.errors import DimensionMismatchError, DomainError, PreconditionError, ScheduleError
from regula.hilbert_core import Vector
from regula.operators import Operator, evaluate
from regula.schedules import StepSchedule

logger = logging.getLogger(__name__)

CYCLE_WINDOW = 256


@dataclass(frozen=True)
class IterationTrace:
    """The orbit x_0..x_N with residuals r_n = ||x_n - T x_n||.

    ``points`` and ``images`` (T x_n) are None in residuals-only mode.
    ``weights`` and ``lambdas`` have N+1 entries (the step out of x_N is
    included so delta sums can run to the horizon).
    """

    residuals: np.ndarray
    weights: np.ndarray
    lambdas: np.ndarray
    kappa: float
    points: Optional[np.ndarray] = None
    images: Optional[np.ndarray] = None
    operator_id: str = ""
    schedule_id: str = ""
    operator: Optional[Operator] = field(default=None, repr=False, compare=False)
    schedule: Optional[StepSchedule] = field(default=None, repr=False, compare=False)
    stationary_from: Optional[int] = None
    cycle_period: Optional[int] = None

    @property
    def N(self) -> int:
        return self.residuals.size - 1

    @property
    def has_points(self) -> bool:
        return self.points is not None

    @property
    def delta_partials(self) -> np.ndarray:
        """Cumulative a_n r_n^2, left to right."""
        return np.cumsum(self.weights[: self.N + 1] * self.residuals ** 2)

    def point(self, n: int) -> Vector:
        if self.points is None:
            raise PreconditionError("Trace was built in residuals-only mode; no points stored.")
        return self.points[n]

    def image(self, n: int) -> Vector:
        if self.images is None:
            raise PreconditionError("Trace was built in residuals-only mode; no images stored.")
        return self.images[n]

    @classmethod
    def from_residuals(cls, residuals, weights=None, kappa: float = 0.0,
                       operator_id: str = "", schedule_id: str = "") -> "IterationTrace":
        """Residuals-only trace, e.g. loaded from CSV or built by hand."""
        r = np.asarray(residuals, dtype=np.float64)
        w = np.zeros_like(r) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.size < r.size:
            raise PreconditionError("weights must have at least as many entries as residuals.")
        return cls(r, w[: r.size], np.full(r.size, np.nan), kappa,
                   operator_id=operator_id, schedule_id=schedule_id)


def _step(x: Vector, tx: Vector, lam: float) -> Vector:
    return lam * x + (1.0 - lam) * tx


def mann_step(x: Vector, lam: float, T: Operator) -> Vector:
    """lambda*x + (1-lambda)*Tx for kappa < lambda < 1."""
    if not (T.kappa < lam < 1.0):
        raise ScheduleError(f"step condition violated: need kappa < lambda < 1, got lambda={lam}, kappa={T.kappa}.")
    out = _step(x, evaluate(T, x), lam)
    out.setflags(write=False)
    return out


def run_mann(T: Operator, s: StepSchedule, x0: Vector, N: int,
             keep_points: bool = True) -> IterationTrace:
    """Runs N Mann steps from x0.

    T x_n is evaluated once per step and reused for both the residual and the
    step. With a constant step the orbit is a function of the current bit
    pattern alone, so once x_{n+1} repeats one of the last CYCLE_WINDOW
    iterates the rest of the orbit cycles through the same points. The
    remaining horizon is then filled in from that cycle without evaluating T
    again. Period 1 is the stationary case; contractions that bottom out in
    subnormals usually land in a short sign-flipping cycle instead.
    """
    if N < 0:
        raise PreconditionError(f"Horizon N must be >= 0, got {N}.")
    if not math.isclose(s.kappa, T.kappa, rel_tol=1e-12, abs_tol=1e-15):
        raise PreconditionError(
            f"Schedule kappa {s.kappa} does not match operator kappa {T.kappa}.")
    x = hc.as_vector(x0)
    if x.shape[0] != T.dim:
        raise DimensionMismatchError(T.dim, x.shape[0])
    if not T.domain.contains(x):
        raise DomainError(f"x0 lies outside {T.domain.describe()}.")

    lambdas = s.lambdas(0, N + 1)
    weights = (lambdas - s.kappa) * (1.0 - lambdas)
    residuals = np.empty(N + 1, dtype=np.float64)
    points = np.empty((N + 1, T.dim), dtype=np.float64) if keep_points else None
    images = np.empty((N + 1, T.dim), dtype=np.float64) if keep_points else None
    check_domain = T.domain.diameter != math.inf
    stationary_from = None
    cycle_period = None
    # bit pattern -> index, for the most recent iterates only
    recent: Dict[bytes, int] = {}
    recent_keys: Deque[bytes] = deque()
    if s.is_constant:
        recent[x.tobytes()] = 0
        recent_keys.append(x.tobytes())

    for n in range(N + 1):
        tx = evaluate(T, x)
        d = x - tx
        residuals[n] = math.sqrt(hc.inner(d, d))
        if keep_points:
            points[n] = x
            images[n] = tx
        if n == N:
            break

        nxt = _step(x, tx, lambdas[n])
        if check_domain and not T.domain.contains(nxt):
            raise DomainError(f"Iterate {n + 1} left {T.domain.describe()}.")

        if s.is_constant:
            key = nxt.tobytes()
            start = recent.get(key)
            if start is not None:
                stationary_from, cycle_period = start, n + 1 - start
                src = start + (np.arange(n + 1, N + 1) - start) % cycle_period
                residuals[n + 1:] = residuals[src]
                if keep_points:
                    points[n + 1:] = points[src]
                    images[n + 1:] = images[src]
                logger.debug("orbit repeats from n=%d with period %d; filled %d remaining steps",
                             start, cycle_period, N - n)
                break
            recent[key] = n + 1
            recent_keys.append(key)
            if len(recent_keys) > CYCLE_WINDOW:
                del recent[recent_keys.popleft()]
        x = nxt

    if keep_points:
        points.setflags(write=False)
        images.setflags(write=False)
    residuals.setflags(write=False)
    return IterationTrace(
        residuals=residuals,
        weights=weights,
        lambdas=lambdas,
        kappa=s.kappa,
        points=points,
        images=images,
        operator_id=T.name,
        schedule_id=s.label,
        operator=T,
        schedule=s,
        stationary_from=stationary_from,
        cycle_period=cycle_period,
    )


def empirical_index(trace: IterationTrace, eps: float) -> Optional[int]:
    """Least n <= N with r_n < eps, or None."""
    if not eps > 0:
        raise PreconditionError(f"eps must be positive, got {eps}.")
    hits = np.flatnonzero(trace.residuals < eps)
    return int(hits[0]) if hits.size else None


@dataclass
class MonotoneReport:
    ok: bool
    first_violation: Optional[int]
    worst_increase: float


def check_monotone_residuals(trace: IterationTrace, tol: float = 1e-10) -> MonotoneReport:
    """r_{n+1} <= r_n + tol for all n < N."""
    increases = np.diff(trace.residuals)
    if increases.size == 0:
        return MonotoneReport(True, None, 0.0)
    bad = np.flatnonzero(increases > tol)
    worst = float(increases.max())
    if bad.size:
        return MonotoneReport(False, int(bad[0]), worst)
    return MonotoneReport(True, None, worst)


def delta_sum(trace: IterationTrace, m: int) -> float:
    """sum_{n=0}^{m} a_n r_n^2."""
    if not 0 <= m <= trace.N:
        raise PreconditionError(f"m={m} outside the trace horizon 0..{trace.N}.")
    return float(trace.delta_partials[m])

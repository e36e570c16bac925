"""
Step-size sequences (lambda_n), their weights a_n = (lambda_n - kappa)(1 - lambda_n)
and rates of divergence theta for the series sum a_n.
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from regula.errors import DivergenceNotWitnessedError, ScheduleError
from regula.schema import ScheduleKind, ScheduleSpec, ThetaSource

logger = logging.getLogger(__name__)

THETA_CAP = 10**8
CEIL_SNAP = 1e-9

Formula = Callable[[int, float], float]

FORMULAS: Dict[str, Formula] = {
    "half-plus-harmonic": lambda n, kappa: 0.5 + 1.0 / (4.0 * (n + 2)),
    "kappa-midpoint": lambda n, kappa: (1.0 + kappa) / 2.0,
    "kappa-harmonic": lambda n, kappa: kappa + (1.0 - kappa) / 2.0 * (1.0 + 1.0 / (n + 2)),
    "alternating": lambda n, kappa: kappa + (1.0 - kappa) * (0.25 if n % 2 == 0 else 0.75),
}


def robust_ceil(value: float, rel: float = CEIL_SNAP) -> int:
    """Ceiling that snaps to a nearby integer first.

    Ratios like 1/0.1**2 land a hair above 100 in floating point; taking the
    plain ceiling would add a whole step to every bound built on top.
    """
    nearest = round(value)
    if abs(value - nearest) <= rel * max(1.0, abs(nearest)):
        return int(nearest)
    return int(math.ceil(value))


class _PartialSums:
    """Left-to-right partial sums S_m = a_0 + ... + a_m, grown on demand.

    Shared between threads; every reader sees a prefix of the same array.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._sums = np.empty(0, dtype=np.float64)

    def through(self, schedule: "StepSchedule", m: int) -> np.ndarray:
        with self._lock:
            if m >= self._sums.size:
                size = self._sums.size
                target = max(m + 1, 2 * size, 1024)
                chunk = schedule.weights(size, target)
                start = self._sums[-1] if size else 0.0
                # Prepending the running total keeps cumsum strictly sequential.
                tail = np.cumsum(np.concatenate(([start], chunk)))[1:]
                self._sums = np.concatenate((self._sums, tail))
            return self._sums


@dataclass(frozen=True)
class StepSchedule:
    kind: ScheduleKind
    kappa: float
    lam: Optional[float] = None
    prefix: Tuple[float, ...] = ()
    tail: Optional[float] = None
    formula_name: Optional[str] = None
    _sums: _PartialSums = field(default_factory=_PartialSums, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.kappa < 1.0):
            raise ScheduleError(f"kappa must lie in [0, 1), got {self.kappa}.")
        if self.kind is ScheduleKind.FORMULA and self.formula_name not in FORMULAS:
            raise ScheduleError(f"Unknown formula '{self.formula_name}'. Known: {', '.join(sorted(FORMULAS))}")

    @classmethod
    def constant(cls, lam: float, kappa: float) -> "StepSchedule":
        return cls(ScheduleKind.CONSTANT, kappa, lam=lam)

    @classmethod
    def table(cls, prefix, tail: float, kappa: float) -> "StepSchedule":
        return cls(ScheduleKind.TABLE, kappa, prefix=tuple(prefix), tail=tail)

    @classmethod
    def formula(cls, name: str, kappa: float) -> "StepSchedule":
        return cls(ScheduleKind.FORMULA, kappa, formula_name=name)

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"constant({self.lam:.6g}; kappa={self.kappa:.6g})"
        if self.kind is ScheduleKind.FORMULA:
            return f"formula({self.formula_name}; kappa={self.kappa:.6g})"
        return f"table({len(self.prefix)}+tail {self.tail:.6g}; kappa={self.kappa:.6g})"

    def to_spec(self) -> ScheduleSpec:
        return ScheduleSpec(self.kind, lam=self.lam, name=self.formula_name,
                            prefix=self.prefix, tail=self.tail)

    @property
    def is_constant(self) -> bool:
        return self.kind is ScheduleKind.CONSTANT

    def _raw_lambda(self, n: int) -> float:
        if self.kind is ScheduleKind.CONSTANT:
            return self.lam
        if self.kind is ScheduleKind.TABLE:
            return self.prefix[n] if n < len(self.prefix) else self.tail
        return FORMULAS[self.formula_name](n, self.kappa)

    def _check(self, lam: float, n: int) -> float:
        if not (self.kappa < lam < 1.0):
            raise ScheduleError(
                f"step condition violated at n={n}: need kappa < lambda_n < 1, "
                f"got lambda_n={lam!r} with kappa={self.kappa!r}.", index=n)
        return lam

    def lambda_at(self, n: int) -> float:
        if n < 0:
            raise ScheduleError(f"Index must be >= 0, got {n}.", index=n)
        return self._check(self._raw_lambda(n), n)

    def weight_at(self, n: int) -> float:
        lam = self.lambda_at(n)
        return (lam - self.kappa) * (1.0 - lam)

    def lambdas(self, start: int, stop: int) -> np.ndarray:
        """lambda_n for start <= n < stop, validated."""
        if self.kind is ScheduleKind.CONSTANT:
            self._check(self.lam, start)
            return np.full(stop - start, self.lam, dtype=np.float64)
        out = np.array([self._raw_lambda(n) for n in range(start, stop)], dtype=np.float64)
        bad = np.flatnonzero(~((out > self.kappa) & (out < 1.0)))
        if bad.size:
            n = start + int(bad[0])
            self._check(float(out[bad[0]]), n)
        return out

    def weights(self, start: int, stop: int) -> np.ndarray:
        lam = self.lambdas(start, stop)
        return (lam - self.kappa) * (1.0 - lam)

    def partial_sums(self, m: int) -> np.ndarray:
        """Array whose first m+1 entries are S_0..S_m (it may be longer)."""
        return self._sums.through(self, m)

    def partial_sum(self, m: int) -> float:
        return float(self.partial_sums(m)[m])


@dataclass(frozen=True)
class DivergenceRate:
    """A nondecreasing theta with sum_{k<=theta(n)} a_k >= n."""

    theta: Callable[[int], int] = field(repr=False)
    source: ThetaSource
    description: str = ""

    def __call__(self, n: int) -> int:
        return int(self.theta(n))


def theta_constant(lam: float, kappa: float) -> DivergenceRate:
    """theta(n) = ceil(1/((lambda-kappa)(1-lambda))) * n for a constant step."""
    if not (0.0 <= kappa < lam < 1.0):
        raise ScheduleError(f"step condition violated: need kappa < lambda < 1, got lambda={lam}, kappa={kappa}.")
    coefficient = robust_ceil(1.0 / ((lam - kappa) * (1.0 - lam)))
    return DivergenceRate(lambda n: coefficient * n, ThetaSource.CLOSED_FORM,
                          f"{coefficient}*n")


def theta_explicit(coefficient: float) -> DivergenceRate:
    """theta(n) = ceil(c * n) for a user supplied coefficient c."""
    if not coefficient > 0:
        raise ScheduleError(f"theta coefficient must be positive, got {coefficient}.")
    if float(coefficient).is_integer():
        c = int(coefficient)
        return DivergenceRate(lambda n: c * n, ThetaSource.EXPLICIT, f"{c}*n")
    return DivergenceRate(lambda n: robust_ceil(coefficient * n), ThetaSource.EXPLICIT,
                          f"ceil({coefficient:g}*n)")


def compute_theta(s: StepSchedule, n: int, cap: int = THETA_CAP) -> int:
    """Least m with S_m >= n."""
    if n < 0:
        raise ScheduleError(f"n must be >= 0, got {n}.")
    if n == 0:
        return 0
    m = 0
    while True:
        sums = s.partial_sums(m)
        if sums[-1] >= n:
            return int(np.searchsorted(sums, n, side="left"))
        if sums.size >= cap:
            raise DivergenceNotWitnessedError(
                f"divergence not witnessed within cap: S_{sums.size - 1}={sums[-1]:.6g} < {n} "
                f"for {s.label}.")
        m = min(cap - 1, 2 * sums.size)


def theta_computed(s: StepSchedule, cap: int = THETA_CAP) -> DivergenceRate:
    return DivergenceRate(lambda n: compute_theta(s, n, cap), ThetaSource.COMPUTED,
                          f"least m with S_m >= n for {s.label}")


@dataclass
class ThetaReport:
    ok: bool
    first_failure: Optional[int]
    n_max: int
    nondecreasing: bool
    shortfall: float = 0.0
    detail: str = ""


def verify_theta(s: StepSchedule, rate: DivergenceRate, n_max: int,
                 tol: float = 1e-9, cap: int = THETA_CAP) -> ThetaReport:
    """Checks S_{theta(n)} >= n - tol for every n <= n_max."""
    if n_max < 0:
        raise ScheduleError(f"n_max must be >= 0, got {n_max}.")

    nondecreasing = True
    previous = -1
    for n in range(n_max + 1):
        m = rate(n)
        if m < previous:
            nondecreasing = False
        previous = m
        if m < 0:
            return ThetaReport(False, n, n_max, nondecreasing, float(n), f"theta({n})={m} is negative")

        # S is increasing, so a sum already past the target at the cap settles it.
        reach = min(m, cap - 1)
        total = s.partial_sum(reach)
        if total < n - tol:
            detail = f"S_{m}={total!r} < {n}"
            if reach < m:
                detail = f"S_{reach}={total!r} < {n} and theta({n})={m} exceeds the cap"
            logger.debug("verify_theta first failure at n=%d: %s", n, detail)
            return ThetaReport(False, n, n_max, nondecreasing, n - total, detail)

    return ThetaReport(True, None, n_max, nondecreasing)


def build_schedule(spec: ScheduleSpec, kappa: float) -> StepSchedule:
    spec.validate()
    if spec.kind is ScheduleKind.CONSTANT:
        return StepSchedule.constant(spec.lam, kappa)
    if spec.kind is ScheduleKind.TABLE:
        return StepSchedule.table(spec.prefix, spec.tail, kappa)
    return StepSchedule.formula(spec.name, kappa)

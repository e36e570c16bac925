"""
kappa-strict pseudo-contractions: construction, evaluation, the strictness
defect, sampled strictness checks and approximate fixed points.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from regula import hilbert_core as hc
from regula.errors import DimensionMismatchError, DomainError, OperatorError
from regula.hilbert_core import Vector
from regula.schema import OperatorKind, OperatorSpec

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-12
DEFAULT_SAMPLER_RADIUS = 10.0


class DomainKind(Enum):
    FULL_SPACE = "full-space"
    BALL = "ball"


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    dim: int
    center: Optional[Vector] = None
    radius: Optional[float] = None

    @classmethod
    def full_space(cls, dim: int) -> "Domain":
        return cls(DomainKind.FULL_SPACE, dim)

    @classmethod
    def ball(cls, center: Vector, radius: float) -> "Domain":
        center = hc.as_vector(center)
        if not radius > 0:
            raise DomainError(f"Ball radius must be positive, got {radius}.")
        return cls(DomainKind.BALL, center.shape[0], center, float(radius))

    @property
    def diameter(self) -> float:
        return math.inf if self.kind is DomainKind.FULL_SPACE else 2.0 * self.radius

    def project(self, x: Vector) -> Vector:
        if self.kind is DomainKind.FULL_SPACE:
            return x
        return hc.project_onto_ball(x, self.center, self.radius)

    def contains(self, x: Vector, tol: float = 1e-12) -> bool:
        if x.shape[0] != self.dim:
            return False
        if self.kind is DomainKind.FULL_SPACE:
            return True
        return hc.distance(x, self.center) <= self.radius * (1.0 + tol) + tol

    def describe(self) -> str:
        if self.kind is DomainKind.FULL_SPACE:
            return "full-space"
        return f"ball(center={list(self.center)}, radius={self.radius:g})"


@dataclass(frozen=True)
class Operator:
    """A self-map T of a convex set with a claimed strictness constant kappa."""

    name: str
    rule: Callable[[Vector], Vector] = field(repr=False)
    kappa: float
    domain: Domain
    known_fixed_point: Optional[Vector] = None
    spec: Optional[OperatorSpec] = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.kappa < 1.0):
            raise OperatorError(f"kappa must lie in [0, 1), got {self.kappa}.")
        p = self.known_fixed_point
        if p is not None:
            if p.shape[0] != self.dim:
                raise OperatorError("Known fixed point has the wrong dimension.")
            r = residual(self, p)
            if r > FIXED_POINT_TOL * (1.0 + hc.norm(p)):
                raise OperatorError(f"Claimed fixed point has residual {r:.3e}.")

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, x: Vector) -> Vector:
        return evaluate(self, x)


def evaluate(T: Operator, x: Vector) -> Vector:
    """Tx, with x first projected onto T's domain."""
    if x.shape[0] != T.dim:
        raise DimensionMismatchError(T.dim, x.shape[0])
    out = np.asarray(T.rule(T.domain.project(x)), dtype=np.float64)
    out.setflags(write=False)
    return out


def residual(T: Operator, x: Vector) -> float:
    """||x - Tx||."""
    return hc.distance(x, evaluate(T, x))


def strictness_defect(T: Operator, kappa: float, x: Vector, y: Vector) -> float:
    """||Tx-Ty||^2 - ||x-y||^2 - kappa*||(x-Tx)-(y-Ty)||^2; <= 0 iff the
    pseudo-contraction inequality holds at (x, y)."""
    tx, ty = evaluate(T, x), evaluate(T, y)
    gap = (x - tx) - (y - ty)
    return hc.squared_distance(tx, ty) - hc.squared_distance(x, y) - kappa * hc.inner(gap, gap)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

class BallSampler:
    """Uniform point pairs in a ball, reproducible for a given seed."""

    def __init__(self, dim: int, radius: float = DEFAULT_SAMPLER_RADIUS,
                 center: Optional[Vector] = None, seed: int = 0):
        self.dim = dim
        self.radius = radius
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=np.float64)
        self.seed = seed

    @classmethod
    def for_operator(cls, T: Operator, seed: int = 0) -> "BallSampler":
        if T.domain.kind is DomainKind.BALL:
            return cls(T.dim, T.domain.radius, T.domain.center, seed)
        return cls(T.dim, DEFAULT_SAMPLER_RADIUS, None, seed)

    def points(self, n: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = rng or np.random.default_rng(self.seed)
        direction = rng.standard_normal((n, self.dim))
        lengths = np.linalg.norm(direction, axis=1, keepdims=True)
        lengths[lengths == 0.0] = 1.0
        u = rng.random((n, 1)) ** (1.0 / self.dim)
        return self.center + self.radius * u * direction / lengths

    def pairs(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        return self.points(n, rng), self.points(n, rng)


@dataclass
class StrictnessReport:
    holds: bool
    worst_pair: Optional[Tuple[List[float], List[float]]]
    worst_defect: float
    worst_ratio: float
    n_samples: int
    kappa: float


def check_strict(T: Operator, kappa: float, sampler: Optional[BallSampler] = None,
                 n_samples: int = 10_000, tol: float = 1e-9) -> StrictnessReport:
    """Samples point pairs and checks the pseudo-contraction inequality on each.

    A pair counts as violating when its defect exceeds tol * (1 + ||x||^2 + ||y||^2).
    """
    if n_samples < 1:
        raise OperatorError(f"n_samples must be >= 1, got {n_samples}.")
    sampler = sampler or BallSampler.for_operator(T)
    xs, ys = sampler.pairs(n_samples)

    worst_ratio = -math.inf
    worst_defect = -math.inf
    worst_pair = None
    for x_raw, y_raw in zip(xs, ys):
        x, y = hc.as_vector(x_raw), hc.as_vector(y_raw)
        if not (T.domain.contains(x) and T.domain.contains(y)):
            raise DomainError(f"Sampler produced a point outside {T.domain.describe()}.")
        defect = strictness_defect(T, kappa, x, y)
        ratio = defect / hc.defect_scale(x, y)
        if ratio > worst_ratio:
            worst_ratio, worst_defect = ratio, defect
            worst_pair = (x.tolist(), y.tolist())

    holds = worst_ratio <= tol
    logger.debug("check_strict %s kappa=%g: worst ratio %.3e over %d pairs",
                 T.name, kappa, worst_ratio, n_samples)
    return StrictnessReport(holds, worst_pair, worst_defect, worst_ratio, n_samples, kappa)


# ---------------------------------------------------------------------------
# Approximate fixed points
# ---------------------------------------------------------------------------

def approx_fixed_point(T: Operator, x: Vector, b: float, delta: float,
                       budget: int = 10_000, step: Optional[float] = None) -> Optional[Vector]:
    """Looks for y in Fix_delta(T, x, b): ||x - y|| <= b and ||y - Ty|| < delta.

    Tries the known fixed point first, then walks the Mann orbit of x with a
    constant step (default: midpoint of (kappa, 1)). Returns None when nothing
    was found within budget; that is not a proof that the set is empty.
    """
    if not (b > 0 and delta > 0 and budget >= 1):
        raise OperatorError("approx_fixed_point needs b > 0, delta > 0 and budget >= 1.")

    p = T.known_fixed_point
    if p is not None and hc.distance(x, p) <= b and residual(T, p) < delta:
        return p

    lam = (1.0 + T.kappa) / 2.0 if step is None else step
    y = T.domain.project(x)
    for _ in range(budget):
        ty = evaluate(T, y)
        if hc.distance(y, ty) < delta and hc.distance(x, y) <= b:
            return y
        y = hc.convex_combination(lam, y, ty)
    return None


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def scaling_kappa(a: float) -> float:
    """Least kappa for which x -> a*x is kappa-strict."""
    if abs(a) <= 1.0:
        return 0.0
    return (a * a - 1.0) / (1.0 - a) ** 2


def affine_kappa(A: np.ndarray) -> Optional[float]:
    """Least kappa for x -> Ax + c, or None when I - A is singular.

    Largest generalized eigenvalue of (A^T A - I, (I-A)^T (I-A)), clipped at 0.
    """
    n = A.shape[0]
    eye = np.eye(n)
    gap = eye - A
    if np.linalg.matrix_rank(gap) < n:
        return None
    top = scipy.linalg.eigh(A.T @ A - eye, gap.T @ gap, eigvals_only=True)[-1]
    return max(0.0, float(top))


def _rotation_matrix(dim: int, angle: float, plane: Tuple[int, int]) -> np.ndarray:
    R = np.eye(dim)
    i, j = plane
    c, s = math.cos(angle), math.sin(angle)
    R[i, i], R[i, j] = c, -s
    R[j, i], R[j, j] = s, c
    return R


def _linear_rule(M: np.ndarray, c: Optional[np.ndarray] = None) -> Callable[[Vector], Vector]:
    if c is None:
        return lambda x: M @ x
    return lambda x: M @ x + c


def _check_kappa(kappa: float, label: str) -> float:
    if kappa >= 1.0:
        raise OperatorError(f"{label}: derived kappa {kappa:.6g} >= 1, outside the pseudo-contraction class.")
    return kappa


def _claimed(spec: OperatorSpec, derived: Optional[float]) -> float:
    if spec.kappa is None:
        if derived is None:
            raise OperatorError(f"{spec.label}: no closed-form kappa; supply 'kappa' explicitly.")
        return _check_kappa(derived, spec.label)
    if derived is not None and spec.kappa < derived - 1e-15:
        logger.warning("%s: claimed kappa %g is below the derived minimum %g",
                       spec.label, spec.kappa, derived)
    return spec.kappa


def build_operator(spec: OperatorSpec) -> Operator:
    """Builds an Operator with the least valid kappa (or the claimed one)."""
    spec.validate()
    dim = spec.dim
    origin = hc.as_vector(np.zeros(dim))

    if spec.kind is OperatorKind.SCALING:
        a = spec.a
        kappa = _claimed(spec, scaling_kappa(a))
        return Operator(spec.label, lambda x: a * x, kappa, Domain.full_space(dim), origin, spec)

    if spec.kind is OperatorKind.ROTATION:
        R = _rotation_matrix(dim, spec.angle, spec.plane)
        kappa = _claimed(spec, 0.0)
        return Operator(spec.label, _linear_rule(R), kappa, Domain.full_space(dim), origin, spec)

    if spec.kind is OperatorKind.AFFINE:
        A = np.array(spec.matrix, dtype=np.float64)
        c = np.array(spec.offset, dtype=np.float64)
        kappa = _claimed(spec, affine_kappa(A))
        p = None
        gap = np.eye(dim) - A
        if np.linalg.matrix_rank(gap) == dim:
            p = hc.as_vector(np.linalg.solve(gap, c))
            # solve() may leave more rounding than the fixed-point invariant allows.
            if hc.distance(A @ p + c, p) > FIXED_POINT_TOL * (1.0 + hc.norm(p)):
                p = None
        return Operator(spec.label, _linear_rule(A, c), kappa, Domain.full_space(dim), p, spec)

    # projected: P o S on a ball
    inner = build_operator(spec.inner)
    center = hc.as_vector(spec.center if spec.center is not None else np.zeros(dim))
    domain = Domain.ball(center, spec.radius)
    derived = 0.0 if inner.kappa == 0.0 else None
    kappa = _claimed(spec, derived)

    def rule(x: Vector) -> Vector:
        return domain.project(hc.as_vector(evaluate(inner, x)))

    p = inner.known_fixed_point
    if p is not None and not domain.contains(p, tol=0.0):
        p = None
    return Operator(spec.label, rule, kappa, domain, p, spec)


def load_catalog(path: Optional[str] = None) -> List[OperatorSpec]:
    """Loads the default operator catalog from data/catalog.json."""
    if path is None:
        base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        path = os.path.join(base_path, "data", "catalog.json")
    with open(path, "r") as f:
        entries = json.load(f)
    return [OperatorSpec.from_dict(entry) for entry in entries["operators"]]

"""
Finite-dimensional real inner-product space primitives.

Vectors are read-only 1-D float64 numpy arrays. The ``identity_defect_*``
functions return LHS - RHS of the standard Hilbert-space norm identities;
they are mathematically zero and numerically tiny.
"""

import math
from typing import Iterable, Union

import numpy as np
import numpy.typing as npt

from regula.errors import DimensionMismatchError, InvalidVectorError

Vector = npt.NDArray[np.float64]
VectorLike = Union[Vector, Iterable[float]]

# Relative tolerance convention shared by every "mathematically zero" check.
REL_TOL = 1e-10
ABS_FLOOR = 1e-12


def as_vector(values: VectorLike) -> Vector:
    """Validates a coordinate sequence and returns a frozen float64 copy."""
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidVectorError(f"Not a real coordinate sequence: {e}")

    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidVectorError(f"Vector must be 1-D, got shape {arr.shape}.")
    if arr.size == 0:
        raise InvalidVectorError("Vector must have at least one component.")
    if not np.all(np.isfinite(arr)):
        raise InvalidVectorError("Vector components must be finite (no NaN/inf).")

    arr.setflags(write=False)
    return arr


def _check_same_dim(u: Vector, v: Vector) -> None:
    if u.shape != v.shape:
        raise DimensionMismatchError(u.shape[0], v.shape[0])


def inner(u: Vector, v: Vector) -> float:
    # u*v == v*u elementwise, and the same summation runs over it,
    # so symmetry is exact.
    _check_same_dim(u, v)
    return float(np.sum(u * v))


def norm(u: Vector) -> float:
    return math.sqrt(inner(u, u))


def squared_distance(u: Vector, v: Vector) -> float:
    _check_same_dim(u, v)
    d = u - v
    return inner(d, d)


def distance(u: Vector, v: Vector) -> float:
    return math.sqrt(squared_distance(u, v))


def convex_combination(t: float, u: Vector, v: Vector) -> Vector:
    """Returns t*u + (1-t)*v for t in [0, 1]."""
    if not (0.0 <= t <= 1.0):
        raise InvalidVectorError(f"Convex weight must lie in [0, 1], got {t}.")
    _check_same_dim(u, v)
    out = t * u + (1.0 - t) * v
    out.setflags(write=False)
    return out


def identity_defect_sum(x: Vector, y: Vector) -> float:
    """||x+y||^2 - ||x||^2 - ||y||^2 - 2<x,y>."""
    s = x + y
    return inner(s, s) - inner(x, x) - inner(y, y) - 2.0 * inner(x, y)


def identity_defect_difference(x: Vector, y: Vector) -> float:
    """||x-y||^2 - ||x||^2 - ||y||^2 + 2<x,y>."""
    d = x - y
    return inner(d, d) - inner(x, x) - inner(y, y) + 2.0 * inner(x, y)


def identity_defect_convex(t: float, x: Vector, y: Vector) -> float:
    """||tx+(1-t)y||^2 - (t||x||^2 + (1-t)||y||^2 - t(1-t)||x-y||^2)."""
    z = convex_combination(t, x, y)
    lhs = inner(z, z)
    rhs = t * inner(x, x) + (1.0 - t) * inner(y, y) - t * (1.0 - t) * squared_distance(x, y)
    return lhs - rhs


def project_onto_ball(x: Vector, center: Vector, radius: float) -> Vector:
    """Metric projection onto the closed ball B(center, radius)."""
    _check_same_dim(x, center)
    offset = x - center
    dist = norm(offset)
    if dist <= radius:
        return x
    out = center + (radius / dist) * offset
    out.setflags(write=False)
    return out


def defect_scale(*vectors: Vector) -> float:
    """1 + sum of squared norms: the magnitude a defect is measured against."""
    return 1.0 + sum(inner(v, v) for v in vectors)


def within_tolerance(defect: float, scale: float,
                     rel: float = REL_TOL, abs_floor: float = ABS_FLOOR) -> bool:
    """True iff a signed defect is <= 0 up to rounding at the given scale."""
    return defect <= abs_floor + rel * scale

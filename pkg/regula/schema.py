"""Config-level records: operator specs, schedule specs and experiment configs.

Each record can be built from a plain JSON dict (strict: unknown keys raise
``ConfigError``) and validated with ``validate()``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from regula.errors import ConfigError


class OperatorKind(Enum):
    SCALING = "scaling"
    ROTATION = "rotation"
    AFFINE = "affine"
    PROJECTED = "projected"


class ScheduleKind(Enum):
    CONSTANT = "constant"
    TABLE = "table"
    FORMULA = "formula"


class ThetaSource(Enum):
    CLOSED_FORM = "closed-form"
    COMPUTED = "computed"
    EXPLICIT = "explicit"


def reject_unknown(data: Dict[str, Any], allowed: set, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {where}: {', '.join(unknown)}")


def _finite(value: Any, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}' must be a real number, got {value!r}.")
    if not math.isfinite(out):
        raise ConfigError(f"'{name}' must be finite, got {value!r}.")
    return out


@dataclass(frozen=True)
class OperatorSpec:
    kind: OperatorKind
    dim: int
    a: Optional[float] = None
    angle: Optional[float] = None
    plane: Tuple[int, int] = (0, 1)
    matrix: Optional[Tuple[Tuple[float, ...], ...]] = None
    offset: Optional[Tuple[float, ...]] = None
    inner: Optional["OperatorSpec"] = None
    center: Optional[Tuple[float, ...]] = None
    radius: Optional[float] = None
    kappa: Optional[float] = None
    name: Optional[str] = None

    KEYS = {"kind", "dim", "a", "angle", "plane", "matrix", "offset",
            "inner", "center", "radius", "kappa", "name"}

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind is OperatorKind.SCALING:
            return f"scaling({self.a:g})[d={self.dim}]"
        if self.kind is OperatorKind.ROTATION:
            return f"rotation({self.angle:.6g})[d={self.dim}]"
        if self.kind is OperatorKind.AFFINE:
            return f"affine[d={self.dim}]"
        return f"projected({self.inner.label}, r={self.radius:g})"

    def validate(self) -> bool:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ConfigError(f"Operator dim must be a positive integer, got {self.dim!r}.")
        if self.kappa is not None and not (0.0 <= self.kappa < 1.0):
            raise ConfigError(f"Claimed kappa must lie in [0, 1), got {self.kappa}.")

        if self.kind is OperatorKind.SCALING:
            if self.a is None:
                raise ConfigError("scaling operator needs 'a'.")
        elif self.kind is OperatorKind.ROTATION:
            if self.angle is None:
                raise ConfigError("rotation operator needs 'angle'.")
            i, j = self.plane
            if self.dim < 2 or i == j or not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ConfigError(f"rotation plane {self.plane} invalid for dim {self.dim}.")
        elif self.kind is OperatorKind.AFFINE:
            if self.matrix is None or self.offset is None:
                raise ConfigError("affine operator needs 'matrix' and 'offset'.")
            if len(self.matrix) != self.dim or any(len(row) != self.dim for row in self.matrix):
                raise ConfigError(f"affine matrix must be {self.dim}x{self.dim}.")
            if len(self.offset) != self.dim:
                raise ConfigError(f"affine offset must have {self.dim} entries.")
        elif self.kind is OperatorKind.PROJECTED:
            if self.inner is None or self.radius is None:
                raise ConfigError("projected operator needs 'inner' and 'radius'.")
            if self.radius <= 0:
                raise ConfigError(f"ball radius must be positive, got {self.radius}.")
            if self.inner.dim != self.dim:
                raise ConfigError("projected operator dim must match its inner operator.")
            if self.center is not None and len(self.center) != self.dim:
                raise ConfigError(f"ball center must have {self.dim} entries.")
            self.inner.validate()
        return True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OperatorSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"operator spec must be an object, got {data!r}.")
        reject_unknown(data, cls.KEYS, "operator")
        try:
            kind = OperatorKind(data.get("kind"))
        except ValueError:
            raise ConfigError(f"Unknown operator kind: {data.get('kind')!r}")

        inner = cls.from_dict(data["inner"]) if "inner" in data else None
        dim = data.get("dim", inner.dim if inner is not None else None)
        if dim is None and kind is OperatorKind.AFFINE and "offset" in data:
            dim = len(data["offset"])
        if dim is None:
            dim = 2 if kind is OperatorKind.ROTATION else 1

        spec = cls(
            kind=kind,
            dim=int(dim),
            a=_finite(data["a"], "a") if "a" in data else None,
            angle=_finite(data["angle"], "angle") if "angle" in data else None,
            plane=tuple(int(i) for i in data.get("plane", (0, 1))),
            matrix=tuple(tuple(_finite(v, "matrix") for v in row) for row in data["matrix"])
            if "matrix" in data else None,
            offset=tuple(_finite(v, "offset") for v in data["offset"]) if "offset" in data else None,
            inner=inner,
            center=tuple(_finite(v, "center") for v in data["center"]) if "center" in data else None,
            radius=_finite(data["radius"], "radius") if "radius" in data else None,
            kappa=_finite(data["kappa"], "kappa") if "kappa" in data else None,
            name=data.get("name"),
        )
        spec.validate()
        return spec

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind.value, "dim": self.dim}
        if self.a is not None:
            out["a"] = self.a
        if self.angle is not None:
            out["angle"] = self.angle
            out["plane"] = list(self.plane)
        if self.matrix is not None:
            out["matrix"] = [list(row) for row in self.matrix]
        if self.offset is not None:
            out["offset"] = list(self.offset)
        if self.inner is not None:
            out["inner"] = self.inner.to_dict()
        if self.center is not None:
            out["center"] = list(self.center)
        if self.radius is not None:
            out["radius"] = self.radius
        if self.kappa is not None:
            out["kappa"] = self.kappa
        if self.name:
            out["name"] = self.name
        return out


@dataclass(frozen=True)
class ScheduleSpec:
    kind: ScheduleKind
    lam: Optional[float] = None
    name: Optional[str] = None
    prefix: Tuple[float, ...] = ()
    tail: Optional[float] = None

    KEYS = {"kind", "lambda", "name", "prefix", "tail"}

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"constant({self.lam:.6g})"
        if self.kind is ScheduleKind.FORMULA:
            return f"formula({self.name})"
        return f"table({len(self.prefix)} + tail {self.tail:.6g})"

    def validate(self) -> bool:
        if self.kind is ScheduleKind.CONSTANT and self.lam is None:
            raise ConfigError("constant schedule needs 'lambda'.")
        if self.kind is ScheduleKind.FORMULA and not self.name:
            raise ConfigError("formula schedule needs 'name'.")
        if self.kind is ScheduleKind.TABLE and self.tail is None:
            raise ConfigError("table schedule needs 'tail'.")
        return True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScheduleSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"schedule spec must be an object, got {data!r}.")
        reject_unknown(data, cls.KEYS, "schedule")
        try:
            kind = ScheduleKind(data.get("kind"))
        except ValueError:
            raise ConfigError(f"Unknown schedule kind: {data.get('kind')!r}")
        spec = cls(
            kind=kind,
            lam=_finite(data["lambda"], "lambda") if "lambda" in data else None,
            name=data.get("name"),
            prefix=tuple(_finite(v, "prefix") for v in data.get("prefix", ())),
            tail=_finite(data["tail"], "tail") if "tail" in data else None,
        )
        spec.validate()
        return spec

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.name:
            out["name"] = self.name
        if self.prefix:
            out["prefix"] = list(self.prefix)
        if self.tail is not None:
            out["tail"] = self.tail
        return out


@dataclass
class ExperimentConfig:
    operator: OperatorSpec
    schedule: ScheduleSpec
    theta: Union[str, float] = "closed-form"
    x0: Union[List[float], Dict[str, Any]] = field(default_factory=lambda: {"rule": "ones", "scale": 1.0})
    b: Union[float, str] = "auto"
    eps: List[float] = field(default_factory=lambda: [0.1])
    horizon: int = 100
    horizon_extra: int = 0
    seed: int = 0
    n_samples: int = 10_000
    certify_samples: int = 1_000
    lambda_grid: List[float] = field(default_factory=list)
    tolerance_rules: str = "default"
    include_points: bool = False
    output_dir: str = "out"

    def validate(self) -> bool:
        self.operator.validate()
        self.schedule.validate()

        if isinstance(self.theta, str):
            if self.theta not in (ThetaSource.CLOSED_FORM.value, ThetaSource.COMPUTED.value):
                raise ConfigError(f"theta must be 'closed-form', 'computed' or a coefficient, got {self.theta!r}.")
        elif not (isinstance(self.theta, (int, float)) and self.theta > 0):
            raise ConfigError(f"explicit theta coefficient must be positive, got {self.theta!r}.")

        if isinstance(self.b, str):
            if self.b != "auto":
                raise ConfigError(f"b must be a positive number or 'auto', got {self.b!r}.")
        elif not (self.b > 0 and math.isfinite(self.b)):
            raise ConfigError(f"b must be positive, got {self.b}.")

        if not self.eps or any(not (e > 0 and math.isfinite(e)) for e in self.eps):
            raise ConfigError(f"eps values must be positive, got {self.eps}.")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}.")
        if self.horizon_extra < 0:
            raise ConfigError(f"horizon_extra must be >= 0, got {self.horizon_extra}.")
        if self.n_samples < 1 or self.certify_samples < 1:
            raise ConfigError("sample counts must be >= 1.")
        return True

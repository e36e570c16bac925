import copy
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, MutableMapping, Optional, Sequence

import numpy as np

from regula import hilbert_core as hc
from regula.errors import ConfigError, DomainError
from regula.hilbert_core import Vector
from regula.operators import Operator, build_operator, residual
from regula.schedules import (
    DivergenceRate,
    StepSchedule,
    build_schedule,
    theta_computed,
    theta_constant,
    theta_explicit,
)
from regula.schema import ExperimentConfig, OperatorSpec, ScheduleSpec, ThetaSource, reject_unknown
from regula.verify import ToleranceRules, load_tolerances

logger = logging.getLogger(__name__)

SEED_ENV = "REGULA_SEED"
X0_KEYS = {"rule", "scale", "index"}


def _strict_object(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"Duplicate key in config: {key!r}")
        out[key] = value
    return out


def _reject_constant(name):
    raise ConfigError(f"Non-finite number {name} is not allowed in config files.")


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"'{name}' must be an integer, got {value!r}.")
    return int(value)


@dataclass
class Experiment:
    """A config resolved into the objects the library runs on."""

    config: ExperimentConfig
    operator: Operator
    schedule: StepSchedule
    rate: DivergenceRate
    x0: Vector
    b: float
    eps: List[float]
    rules: ToleranceRules


class ConfigManager:
    """
    Holds experiment configuration: DEFAULTS, overlaid by a JSON file,
    overlaid by command-line (or dashboard) overrides.
    With a ``state`` mapping (e.g. st.session_state) the working config is kept there.
    """

    DEFAULTS: Dict[str, Any] = {
        "operator": {"kind": "scaling", "a": -2.0, "dim": 1},
        "schedule": {"kind": "constant", "lambda": 2.0 / 3.0},
        "theta": "closed-form",
        "x0": {"rule": "ones", "scale": 1.0},
        "b": "auto",
        "eps": [0.1],
        "horizon": 100,
        "horizon_extra": 0,
        "seed": 0,
        "n_samples": 10_000,
        "certify_samples": 1_000,
        "lambda_grid": [],
        "tolerance_rules": "default",
        "include_points": False,
        "output_dir": "out",
    }

    def __init__(self, state: Optional[MutableMapping] = None):
        self.state = state if state is not None else {}
        if "config" not in self.state:
            self.state["config"] = copy.deepcopy(self.DEFAULTS)

    @property
    def raw(self) -> Dict[str, Any]:
        return self.state["config"]

    def load(self, path: str) -> Dict[str, Any]:
        """Reads a config file and merges it over the current working config."""
        try:
            with open(path, "r") as f:
                data = json.load(f, object_pairs_hook=_strict_object, parse_constant=_reject_constant)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object.")
        reject_unknown(data, set(self.DEFAULTS), "config")
        self.raw.update(copy.deepcopy(data))
        self.state["seed_from_file"] = "seed" in data
        logger.info("loaded config from %s", path)
        return self.raw

    def update(self, key: str, value: Any) -> None:
        reject_unknown({key: value}, set(self.DEFAULTS), "config")
        self.raw[key] = value

    def apply_overrides(self, eps: Optional[Sequence[float]] = None, lam: Optional[float] = None,
                        kappa: Optional[float] = None, dim: Optional[int] = None,
                        seed: Optional[int] = None, lambda_grid: Optional[Sequence[float]] = None) -> None:
        if eps is not None:
            self.raw["eps"] = [float(e) for e in eps]
        if lam is not None:
            self.raw["schedule"] = {"kind": "constant", "lambda": float(lam)}
        if lambda_grid is not None:
            self.raw["lambda_grid"] = [float(v) for v in lambda_grid]
        if kappa is not None:
            self.raw["operator"] = dict(self.raw["operator"], kappa=float(kappa))
        if dim is not None:
            self.raw["operator"] = dict(self.raw["operator"], dim=int(dim))
        if seed is not None:
            self.raw["seed"] = int(seed)
            self.state["seed_from_file"] = True

    def resolve_seed(self) -> int:
        """Override or file > REGULA_SEED > DEFAULTS."""
        if self.state.get("seed_from_file"):
            return _as_int(self.raw["seed"], "seed")
        env = os.environ.get(SEED_ENV)
        if env not in (None, ""):
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}.")
        return _as_int(self.raw["seed"], "seed")

    def config(self) -> ExperimentConfig:
        raw = self.raw
        eps = raw["eps"] if isinstance(raw["eps"], list) else [raw["eps"]]
        theta = raw["theta"]
        b = raw["b"]
        try:
            cfg = ExperimentConfig(
                operator=OperatorSpec.from_dict(raw["operator"]),
                schedule=ScheduleSpec.from_dict(raw["schedule"]),
                theta=theta if isinstance(theta, str) else float(theta),
                x0=copy.deepcopy(raw["x0"]),
                b=b if isinstance(b, str) else float(b),
                eps=[float(e) for e in eps],
                horizon=_as_int(raw["horizon"], "horizon"),
                horizon_extra=_as_int(raw["horizon_extra"], "horizon_extra"),
                seed=self.resolve_seed(),
                n_samples=_as_int(raw["n_samples"], "n_samples"),
                certify_samples=_as_int(raw["certify_samples"], "certify_samples"),
                lambda_grid=[float(v) for v in raw["lambda_grid"]],
                tolerance_rules=str(raw["tolerance_rules"]),
                include_points=bool(raw["include_points"]),
                output_dir=str(raw["output_dir"]),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid config value: {e}")
        cfg.validate()
        return cfg

    def resolve(self) -> Experiment:
        return resolve(self.config())


# ---------------------------------------------------------------------------
# Resolution helpers
# ---------------------------------------------------------------------------

def resolve_x0(rule: Any, T: Operator, seed: int = 0) -> Vector:
    """x0 from a literal list or a named rule: ones, basis or random."""
    if isinstance(rule, list):
        x0 = hc.as_vector(rule)
        if x0.shape[0] != T.dim:
            raise ConfigError(f"x0 has {x0.shape[0]} entries, operator dimension is {T.dim}.")
    elif isinstance(rule, dict):
        reject_unknown(rule, X0_KEYS, "x0")
        scale = float(rule.get("scale", 1.0))
        name = rule.get("rule")
        if name == "ones":
            x0 = hc.as_vector(scale * np.ones(T.dim))
        elif name == "basis":
            index = _as_int(rule.get("index", 0), "x0.index")
            if not 0 <= index < T.dim:
                raise ConfigError(f"x0.index must lie in 0..{T.dim - 1}, got {index}.")
            e = np.zeros(T.dim)
            e[index] = scale
            x0 = hc.as_vector(e)
        elif name == "random":
            x0 = hc.as_vector(scale * np.random.default_rng(seed).standard_normal(T.dim))
        else:
            raise ConfigError(f"Unknown x0 rule {name!r}; use ones, basis or random.")
    else:
        raise ConfigError(f"x0 must be a list or a rule object, got {rule!r}.")

    if not T.domain.contains(x0):
        raise DomainError(f"x0 lies outside {T.domain.describe()}.")
    return x0


def resolve_b(b: Any, T: Operator, x0: Vector, eps: Sequence[float]) -> float:
    """'auto' is max(||x0-Tx0||, ||x0-p||) with a known fixed point p, else ||x0-Tx0||."""
    if not isinstance(b, str):
        return float(b)
    r0 = residual(T, x0)
    p = T.known_fixed_point
    if p is not None:
        value = max(r0, hc.distance(x0, p))
    else:
        logger.warning("b='auto' for %s without a known fixed point: using ||x0-Tx0||; "
                       "the approximate fixed point hypothesis is only probe-checked", T.name)
        value = r0
    if value == 0.0:
        # x0 is already fixed; any b works, the smallest eps gives ceil(b^2/eps^2) = 1.
        value = min(eps)
    return value


def resolve_theta(theta: Any, s: StepSchedule) -> DivergenceRate:
    if theta == ThetaSource.CLOSED_FORM.value:
        if not s.is_constant:
            raise ConfigError("theta 'closed-form' needs a constant schedule; use 'computed' "
                              "or an explicit coefficient.")
        return theta_constant(s.lam, s.kappa)
    if theta == ThetaSource.COMPUTED.value:
        return theta_computed(s)
    return theta_explicit(float(theta))


def resolve(cfg: ExperimentConfig) -> Experiment:
    T = build_operator(cfg.operator)
    s = build_schedule(cfg.schedule, T.kappa)
    s.lambda_at(0)
    rate = resolve_theta(cfg.theta, s)
    x0 = resolve_x0(cfg.x0, T, cfg.seed)
    b = resolve_b(cfg.b, T, x0, cfg.eps)
    return Experiment(cfg, T, s, rate, x0, b, list(cfg.eps), load_tolerances(cfg.tolerance_rules))

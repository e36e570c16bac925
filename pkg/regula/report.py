import json
import logging
import os
from typing import Any, Dict

import numpy as np
import pandas as pd

from regula.errors import ConfigError
from regula.iteration import IterationTrace

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["n", "residual", "weight", "delta_partial"]
FLOAT_FORMAT = "%.17g"


def trace_to_frame(trace: IterationTrace, include_points: bool = False) -> pd.DataFrame:
    """
    One row per index n = 0..N: residual, weight a_n and the running delta sum.
    With include_points the coordinates of x_n follow as x_0, x_1, ...
    """
    df = pd.DataFrame({
        "n": np.arange(trace.N + 1),
        "residual": trace.residuals,
        "weight": trace.weights[: trace.N + 1],
        "delta_partial": trace.delta_partials,
    })
    if include_points and trace.has_points:
        coords = pd.DataFrame(np.asarray(trace.points),
                              columns=[f"x_{i}" for i in range(trace.points.shape[1])])
        df = pd.concat([df, coords], axis=1)
    return df


def write_trace_csv(trace: IterationTrace, path: str, include_points: bool = False) -> str:
    _ensure_parent(path)
    trace_to_frame(trace, include_points).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %d trace rows to %s", trace.N + 1, path)
    return path


def load_trace_csv(path: str, kappa: float = 0.0) -> IterationTrace:
    """
    Reads a trace written by write_trace_csv (or edited by hand).
    The delta_partial column is ignored; it is recomputed from residual and weight.
    """
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise ConfigError(f"Trace file not found: {path}")
    except Exception as e:
        raise ConfigError(f"Could not read trace file {path}: {e}")

    missing = [c for c in ("n", "residual", "weight") if c not in df.columns]
    if missing:
        raise ConfigError(f"Trace file {path} is missing columns: {missing}")
    if df.empty:
        raise ConfigError(f"Trace file {path} has no rows.")

    df = df.sort_values("n").reset_index(drop=True)
    if not np.array_equal(df["n"].to_numpy(), np.arange(len(df))):
        raise ConfigError(f"Trace file {path}: column n must run 0..N without gaps.")

    residuals = df["residual"].to_numpy(dtype=np.float64)
    weights = df["weight"].to_numpy(dtype=np.float64)
    if not (np.all(np.isfinite(residuals)) and np.all(residuals >= 0)):
        raise ConfigError(f"Trace file {path}: residuals must be finite and >= 0.")
    if not np.all(np.isfinite(weights)):
        raise ConfigError(f"Trace file {path}: weights must be finite.")

    trace = IterationTrace.from_residuals(residuals, weights, kappa, schedule_id=f"csv:{os.path.basename(path)}")
    coord_cols = sorted((c for c in df.columns if c.startswith("x_")), key=lambda c: int(c[2:]))
    if coord_cols:
        points = df[coord_cols].to_numpy(dtype=np.float64)
        points.setflags(write=False)
        trace = IterationTrace(trace.residuals, trace.weights, trace.lambdas, kappa,
                               points=points, schedule_id=trace.schedule_id)
    return trace


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, tuple)):
        return list(value)
    if hasattr(value, "value"):  # Enum
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(data: Dict[str, Any], path: str) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(data, f, sort_keys=True, indent=2, default=_jsonable)
        f.write("\n")
    logger.info("wrote %s", path)
    return path


def trace_summary(trace: IterationTrace) -> Dict[str, Any]:
    return {
        "operator": trace.operator_id,
        "schedule": trace.schedule_id,
        "kappa": trace.kappa,
        "N": trace.N,
        "residual_first": float(trace.residuals[0]),
        "residual_last": float(trace.residuals[-1]),
        "delta_total": float(trace.delta_partials[-1]),
        "stationary_from": trace.stationary_from,
        "cycle_period": trace.cycle_period,
    }


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)

"""
Command-line front-end: ``python -m regula {run,certify,sweep,verify}``.

Exit codes: 0 success, 2 configuration or precondition error, 3 certification
hypothesis unverified, 4 certification check failed or bound violated,
5 verification suite failure.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from regula import hilbert_core as hc
from regula.config_manager import ConfigManager, Experiment, resolve_b, resolve_theta
from regula.errors import ConfigError, RegulaError
from regula.iteration import empirical_index, run_mann
from regula.operators import BallSampler, build_operator, load_catalog
from regula.rates import CertificationReport, certify
from regula.report import load_trace_csv, trace_summary, write_json, write_trace_csv
from regula.schedules import StepSchedule
from regula.verify import check_delta_monotone, check_monotone, run_full_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_CERTIFY = 4
EXIT_VERIFY = 5

LOG_ENV = "REGULA_LOG_LEVEL"
SWEEP_WORKERS = 4


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or os.environ.get(LOG_ENV) or "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _eps_key(eps: float) -> str:
    return repr(float(eps))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(exp: Experiment, out_dir: str) -> int:
    cfg = exp.config
    trace = run_mann(exp.operator, exp.schedule, exp.x0, cfg.horizon, keep_points=cfg.include_points)
    write_trace_csv(trace, os.path.join(out_dir, "trace.csv"), cfg.include_points)

    summary = trace_summary(trace)
    summary["x0"] = exp.x0.tolist()
    summary["empirical_index"] = {_eps_key(e): empirical_index(trace, e) for e in exp.eps}
    write_json(summary, os.path.join(out_dir, "summary.json"))
    logger.info("run: N=%d, final residual %.3e", trace.N, trace.residuals[-1])
    return EXIT_OK


def _certify_eps(exp: Experiment, eps: float, schedule: Optional[StepSchedule] = None) -> CertificationReport:
    s = schedule or exp.schedule
    rate = exp.rate if schedule is None else resolve_theta(exp.config.theta, s)
    sampler = BallSampler.for_operator(exp.operator, seed=exp.config.seed)
    return certify(exp.operator, s, rate, exp.x0, exp.b, eps,
                   horizon_extra=exp.config.horizon_extra, rules=exp.rules,
                   n_samples=exp.config.certify_samples, sampler=sampler)


def certify_exit_code(reports: Sequence[CertificationReport]) -> int:
    if not all(r.hypothesis_verified for r in reports):
        return EXIT_HYPOTHESIS
    if not all(r.bound_holds and r.checks_ok for r in reports):
        return EXIT_CERTIFY
    return EXIT_OK


def cmd_certify(exp: Experiment, out_dir: str) -> int:
    reports = [_certify_eps(exp, eps) for eps in exp.eps]
    if len(reports) == 1:
        payload: Dict[str, Any] = reports[0].to_dict()
    else:
        payload = {"reports": [r.to_dict() for r in reports]}
    write_json(payload, os.path.join(out_dir, "report.json"))

    code = certify_exit_code(reports)
    for r in reports:
        failed = [h.name for h in r.hypotheses if not h.ok] + [c.name for c in r.checks if not c.ok]
        if failed:
            logger.warning("eps=%g: failed %s", r.eps, ", ".join(failed))
    return code


def _sweep_cell(exp: Experiment, eps: float, lam: Optional[float]) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "eps": eps,
        "lambda": lam if lam is not None else np.nan,
        "schedule": exp.schedule.label if lam is None else "",
        "inv_eps_sq": 1.0 / (eps * eps),
    }
    try:
        schedule = None if lam is None else StepSchedule.constant(lam, exp.operator.kappa)
        if schedule is not None:
            row["schedule"] = schedule.label
        r = _certify_eps(exp, eps, schedule)
        row.update(phi=r.phi, empirical_idx=r.empirical_idx, tightness=r.tightness,
                   bound_holds=r.bound_holds, hypothesis_verified=r.hypothesis_verified,
                   checks_ok=r.checks_ok, error="")
    except RegulaError as e:
        logger.warning("sweep cell eps=%g lambda=%s failed: %s", eps, lam, e)
        row.update(phi=None, empirical_idx=None, tightness=None, bound_holds=None,
                   hypothesis_verified=None, checks_ok=None, error=str(e))
    return row


def cmd_sweep(exp: Experiment, out_dir: str) -> int:
    lambdas: List[Optional[float]] = list(exp.config.lambda_grid) or [None]
    cells = [(eps, lam) for eps in exp.eps for lam in lambdas]
    with ThreadPoolExecutor(max_workers=SWEEP_WORKERS) as pool:
        rows = list(pool.map(lambda cell: _sweep_cell(exp, *cell), cells))

    df = pd.DataFrame(rows, columns=["eps", "lambda", "schedule", "inv_eps_sq", "phi", "empirical_idx",
                                     "tightness", "bound_holds", "hypothesis_verified", "checks_ok", "error"])
    path = os.path.join(out_dir, "sweep.csv")
    os.makedirs(out_dir, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info("sweep: %d cells written to %s", len(rows), path)
    return EXIT_OK


def _suite_payload(exp: Experiment, T, s, x0, b, rate) -> Dict[str, Any]:
    cfg = exp.config
    sampler = BallSampler.for_operator(T, seed=cfg.seed)
    outcomes = run_full_suite(T, s, x0, b, exp.eps[0], sampler=sampler, n_samples=cfg.n_samples,
                              rate=rate, rules=exp.rules)
    return {
        "operator": T.name,
        "kappa": T.kappa,
        "schedule": s.label,
        "b": b,
        "eps": exp.eps[0],
        "ok": all(o.ok for o in outcomes),
        "outcomes": [o.to_dict() for o in outcomes],
    }


def cmd_verify(exp: Experiment, out_dir: str, trace_path: Optional[str] = None,
               catalog: bool = False) -> int:
    if trace_path:
        trace = load_trace_csv(trace_path, kappa=exp.operator.kappa)
        outcomes = [check_monotone(trace, exp.rules), check_delta_monotone(trace, exp.rules)]
        suites = [{"trace": os.path.basename(trace_path), "ok": all(o.ok for o in outcomes),
                   "outcomes": [o.to_dict() for o in outcomes]}]
    elif catalog:
        suites = []
        for spec in load_catalog():
            T = build_operator(spec)
            s = StepSchedule.constant((1.0 + T.kappa) / 2.0, T.kappa)
            x0 = hc.as_vector(T.domain.project(np.ones(T.dim)))
            b = resolve_b("auto", T, x0, [1.0])
            suites.append(_suite_payload(exp, T, s, x0, b, resolve_theta("closed-form", s)))
    else:
        suites = [_suite_payload(exp, exp.operator, exp.schedule, exp.x0, exp.b, exp.rate)]

    ok = all(suite["ok"] for suite in suites)
    write_json({"ok": ok, "suites": suites}, os.path.join(out_dir, "suite.json"))
    for suite in suites:
        for o in suite["outcomes"]:
            if not o["ok"]:
                logger.warning("%s: %s failed (worst defect %.3e)",
                               suite.get("operator", suite.get("trace")), o["name"], o["worst_defect"])
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment config (strict JSON)")
    common.add_argument("--out", help="Output directory (default: config output_dir, else out/)")
    common.add_argument("--seed", type=int, help="Seed; falls back to config, then $REGULA_SEED, then 0")
    common.add_argument("--eps", type=float, nargs="+", help="Target residual(s)")
    common.add_argument("--lambda", dest="lam", type=float, nargs="+",
                        help="Constant step; several values form the sweep grid")
    common.add_argument("--kappa", type=float, help="Claimed strictness constant for the operator")
    common.add_argument("--dim", type=int, help="Operator dimension")
    common.add_argument("--log-level", help="Logging level (default WARNING or $REGULA_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="regula",
                                     description="Mann iteration runs with certified residual bounds")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Run the iteration and write trace.csv")
    sub.add_parser("certify", parents=[common], help="Certify the residual bound and write report.json")
    sub.add_parser("sweep", parents=[common], help="Tabulate phi over eps and lambda grids")
    verify = sub.add_parser("verify", parents=[common], help="Run the verification suite")
    verify.add_argument("--trace", help="Re-check a saved or hand-edited trace CSV")
    verify.add_argument("--catalog", action="store_true", help="Run the suite over data/catalog.json")
    return parser


def _experiment(args: argparse.Namespace) -> Experiment:
    manager = ConfigManager()
    if args.config:
        manager.load(args.config)
    lam = lambda_grid = None
    if args.lam:
        if args.command == "sweep":
            lambda_grid = args.lam
        elif len(args.lam) == 1:
            lam = args.lam[0]
        else:
            raise ConfigError("--lambda takes several values only with sweep.")
    manager.apply_overrides(eps=args.eps, lam=lam, kappa=args.kappa, dim=args.dim,
                            seed=args.seed, lambda_grid=lambda_grid)
    return manager.resolve()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        exp = _experiment(args)
        out_dir = args.out or exp.config.output_dir
        if args.command == "run":
            return cmd_run(exp, out_dir)
        if args.command == "certify":
            return cmd_certify(exp, out_dir)
        if args.command == "sweep":
            return cmd_sweep(exp, out_dir)
        return cmd_verify(exp, out_dir, args.trace, args.catalog)
    except RegulaError as e:
        sys.stderr.write(f"regula: error: {e}\n")
        return EXIT_CONFIG

"""End-to-end reproductions of the bound and its supporting inequalities on the catalog."""

import json
import math
import time

import numpy as np
import pytest

from regula import hilbert_core as hc
from regula.cli import EXIT_OK, main
from regula.config_manager import resolve_b
from regula.iteration import run_mann
from regula.operators import BallSampler, load_catalog
from regula.rates import certify
from regula.schedules import StepSchedule, compute_theta, theta_constant
from regula.verify import check_norm_identities, fixed_point_descent_defects

from conftest import make_operator

EPS_GRID = (0.5, 0.1, 0.01)


def step_grid(kappa):
    return sorted({(1.0 + kappa) / 2.0, kappa + 0.1, 0.9})


def catalog_cases(ops):
    for T in ops:
        if T.known_fixed_point is None:
            continue
        x0 = hc.as_vector(T.domain.project(np.ones(T.dim)))
        for lam in step_grid(T.kappa):
            yield T, StepSchedule.constant(lam, T.kappa), x0


@pytest.mark.slow
def test_bound_holds_across_catalog(catalog_ops):
    cases = list(catalog_cases(catalog_ops))
    assert len(cases) >= 18
    started = time.perf_counter()
    for T, s, x0 in cases:
        rate = theta_constant(s.lam, s.kappa)
        for eps in EPS_GRID:
            b = resolve_b("auto", T, x0, [eps])
            report = certify(T, s, rate, x0, b, eps, n_samples=100,
                             sampler=BallSampler.for_operator(T, seed=0))
            label = (T.name, s.lam, eps)
            assert report.hypothesis_verified, label
            assert report.bound_holds, label
            checks = {c.name: c for c in report.checks}
            assert checks["check_monotone_residuals"].ok, label
            assert checks["check_delta_claim"].ok, label
            assert report.checks_ok, (label, [c.name for c in report.checks if not c.ok])
    assert time.perf_counter() - started < 60.0


def test_rotation_descent_is_an_equality():
    T = make_operator(kind="rotation", angle=math.pi / 2, dim=2)
    trace = run_mann(T, StepSchedule.constant(0.5, 0.0), hc.as_vector([3.0, -1.0]), 50)
    defects = fixed_point_descent_defects(trace, hc.as_vector([0.0, 0.0]))
    assert np.max(np.abs(defects)) <= 1e-10 * 10.0


def test_rotation_residual_closed_form(rotation_op, half_schedule):
    x0 = hc.as_vector([0.6, -1.7])
    trace = run_mann(rotation_op, half_schedule, x0, 50)
    n = np.arange(51)
    expected = math.sqrt(2.0) * (math.sqrt(2.0) / 2.0) ** n * hc.norm(x0)
    assert np.max(np.abs(trace.residuals - expected)) <= 1e-10


@pytest.mark.slow
def test_norm_identities_at_scale():
    rng = np.random.default_rng(2024)
    outcomes = check_norm_identities(rng, 100_000, range(1, 65))
    failed = [o.name for o in outcomes if not o.ok]
    assert failed == []


def test_compute_theta_against_oracle():
    rng = np.random.default_rng(99)
    for _ in range(100):
        kappa = float(rng.uniform(0.0, 0.8))
        prefix = kappa + (1.0 - kappa) * rng.uniform(0.05, 0.95, size=int(rng.integers(1, 30)))
        tail = kappa + (1.0 - kappa) * float(rng.uniform(0.05, 0.95))
        s = StepSchedule.table(prefix.tolist(), tail, kappa)
        n = int(rng.integers(1, 6))
        total, m = 0.0, 0
        while True:
            total += s.weight_at(m)
            if total >= n:
                break
            m += 1
        assert compute_theta(s, n) == m


def test_suite_artifacts_are_reproducible(tmp_path):
    config = tmp_path / "config.json"
    config.write_text('{"eps": [0.5], "n_samples": 300, "seed": 5}')
    for name in ("a", "b"):
        assert main(["verify", "--config", str(config), "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a" / "suite.json").read_bytes() == (tmp_path / "b" / "suite.json").read_bytes()


@pytest.mark.slow
def test_catalog_suite_passes_at_full_sample_count(tmp_path):
    assert main(["verify", "--catalog", "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "suite.json") as f:
        suite = json.load(f)
    assert suite["ok"] is True
    assert len(suite["suites"]) == len(load_catalog())
    for entry in suite["suites"]:
        names = {o["name"] for o in entry["outcomes"]}
        assert {"check_strict", "check_lemma_tzy", "check_lemma_step", "check_growth_bounds",
                "check_afp_step_bound[c=0.5]", "check_step_descent_agreement"} <= names, entry["operator"]
        assert all(o["ok"] for o in entry["outcomes"]), entry["operator"]

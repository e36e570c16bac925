import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regula.errors import DivergenceNotWitnessedError, ScheduleError
from regula.schedules import (
    DivergenceRate,
    StepSchedule,
    build_schedule,
    compute_theta,
    robust_ceil,
    theta_computed,
    theta_constant,
    theta_explicit,
    verify_theta,
)
from regula.schema import ScheduleSpec, ThetaSource


def oracle_theta(s, n):
    """Least m with a_0 + ... + a_m >= n, by plain left-to-right summation."""
    total, m = 0.0, 0
    while True:
        total += s.weight_at(m)
        if total >= n:
            return m
        m += 1


class TestLambdaAndWeights:
    def test_constant(self):
        s = StepSchedule.constant(2.0 / 3.0, 1.0 / 3.0)
        assert s.lambda_at(0) == s.lambda_at(1000) == 2.0 / 3.0

    def test_formula(self):
        s = StepSchedule.formula("half-plus-harmonic", 0.0)
        assert s.lambda_at(0) == 0.625

    def test_lambda_below_kappa_rejected(self):
        s = StepSchedule.constant(0.2, 1.0 / 3.0)
        with pytest.raises(ScheduleError, match="step condition violated"):
            s.lambda_at(0)

    def test_table_violation_reports_index(self):
        s = StepSchedule.table([0.5, 0.6, 0.1], 0.5, 0.2)
        with pytest.raises(ScheduleError) as info:
            s.lambdas(0, 5)
        assert info.value.index == 2

    def test_table_tail(self):
        s = StepSchedule.table([0.9], 0.5, 0.0)
        assert s.lambda_at(0) == 0.9
        assert s.lambda_at(7) == 0.5

    def test_weights(self):
        assert StepSchedule.constant(2.0 / 3.0, 1.0 / 3.0).weight_at(0) == pytest.approx(1.0 / 9.0)
        assert StepSchedule.constant(0.5, 0.0).weight_at(3) == 0.25

    def test_unknown_formula(self):
        with pytest.raises(ScheduleError):
            StepSchedule.formula("no-such-formula", 0.0)

    @pytest.mark.parametrize("name", ["half-plus-harmonic", "kappa-midpoint", "kappa-harmonic", "alternating"])
    def test_formulas_stay_in_range(self, name):
        s = StepSchedule.formula(name, 0.25)
        lam = s.lambdas(0, 200)
        assert np.all((lam > 0.25) & (lam < 1.0))


class TestTheta:
    def test_theta_constant_coefficients(self):
        assert theta_constant(0.5, 0.0)(7) == 28
        assert theta_constant(2.0 / 3.0, 1.0 / 3.0)(5) == 45
        assert theta_constant(0.9, 0.3)(0) == 0

    def test_theta_constant_invalid(self):
        with pytest.raises(ScheduleError):
            theta_constant(0.3, 0.3)

    def test_theta_explicit(self):
        rate = theta_explicit(9)
        assert rate(100) == 900
        assert rate.source is ThetaSource.EXPLICIT
        assert theta_explicit(2.5)(3) == 8

    def test_compute_theta_exact_case(self):
        assert compute_theta(StepSchedule.constant(0.5, 0.0), 1) == 3

    def test_compute_theta_zero(self):
        assert compute_theta(StepSchedule.formula("alternating", 0.1), 0) == 0

    def test_compute_theta_thirds(self):
        s = StepSchedule.constant(2.0 / 3.0, 1.0 / 3.0)
        m = compute_theta(s, 2)
        assert m == 17
        assert m == oracle_theta(s, 2)
        assert m <= theta_constant(2.0 / 3.0, 1.0 / 3.0)(2)

    def test_compute_theta_minimality(self):
        s = StepSchedule.formula("kappa-harmonic", 0.2)
        for n in range(1, 40):
            m = compute_theta(s, n)
            assert s.partial_sum(m) >= n
            if m > 0:
                assert s.partial_sum(m - 1) < n

    def test_cap_reported(self):
        s = StepSchedule.constant(0.5, 0.0)
        with pytest.raises(DivergenceNotWitnessedError):
            compute_theta(s, 1000, cap=100)

    def test_theta_computed_is_nondecreasing(self):
        rate = theta_computed(StepSchedule.formula("alternating", 0.0))
        values = [rate(n) for n in range(60)]
        assert values == sorted(values)

    def test_concurrent_queries_agree_with_sequential(self):
        s = StepSchedule.formula("kappa-harmonic", 0.1)
        expected = [oracle_theta(s, n) for n in range(0, 300, 7)]
        results = {}

        def worker(k):
            results[k] = [compute_theta(s, n) for n in range(0, 300, 7)]

        threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(r == expected for r in results.values())

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=0.8), st.floats(min_value=0.05, max_value=0.95))
    def test_closed_form_bounds_computed(self, kappa, frac):
        lam = kappa + frac * (1.0 - kappa)
        if not kappa < lam < 1.0:
            return
        s = StepSchedule.constant(lam, kappa)
        closed = theta_constant(lam, kappa)
        for n in (1, 5, 20):
            assert compute_theta(s, n) <= closed(n)


class TestVerifyTheta:
    def test_theta_constant_passes(self):
        s = StepSchedule.constant(0.5, 0.0)
        report = verify_theta(s, theta_constant(0.5, 0.0), 1000)
        assert report.ok and report.nondecreasing

    def test_zero_rate_fails_at_one(self):
        s = StepSchedule.constant(0.5, 0.0)
        report = verify_theta(s, DivergenceRate(lambda n: 0, ThetaSource.EXPLICIT), 1)
        assert not report.ok
        assert report.first_failure == 1
        assert report.shortfall == pytest.approx(0.75)

    def test_n_max_zero(self):
        s = StepSchedule.constant(0.5, 0.0)
        assert verify_theta(s, DivergenceRate(lambda n: 0, ThetaSource.EXPLICIT), 0).ok


class TestRobustCeil:
    def test_snaps_decimal_noise(self):
        assert robust_ceil(1.0 / 0.1 ** 2) == 100
        assert robust_ceil(9.0 / 0.1 ** 2) == 900

    def test_plain_ceiling(self):
        assert robust_ceil(2.5) == 3
        assert robust_ceil(0.2) == 1


def test_build_schedule_from_spec():
    s = build_schedule(ScheduleSpec.from_dict({"kind": "constant", "lambda": 0.75}), 0.5)
    assert s.is_constant and s.lam == 0.75 and s.kappa == 0.5
    f = build_schedule(ScheduleSpec.from_dict({"kind": "formula", "name": "half-plus-harmonic"}), 0.0)
    assert f.lambda_at(0) == 0.625

"""Tests for the monitor tape, its invariants, and the estimate verdicts."""
import math

import numpy as np
import pytest

from gkflow.engine import FlowState, StepControl, evaluate, run, step
from gkflow.monitors import (CSV_HEADER, MonitorTape, MonitorTolerances,
                             assert_estimates)
from gkflow.profile import cylinder_profile, dumbbell_profile, sphere_profile


def record_run(initial, t_max, stride=5, sigma=0.1, cfl=0.2):
    tape = MonitorTape(n=initial.n, sigma=sigma, stride=stride, mu_stride=5)
    state, tape = run(initial, StepControl(cfl=cfl), t_max, monitor=tape)
    return state, tape


@pytest.fixture(scope="module")
def sphere_tape():
    _, tape = record_run(sphere_profile(1.0, 300), 0.1)
    return tape


class TestSphereRows:
    def test_H_over_G_constant(self, sphere_tape):
        col = sphere_tape.column("max_H_over_G")
        assert np.all(np.abs(col - 4.5) <= 1e-6)

    def test_lambda1_over_G(self, sphere_tape):
        col = sphere_tape.column("min_lambda1_over_G")
        assert np.all(np.abs(col - 1.5) <= 1e-4)

    def test_inscribed_times_G(self, sphere_tape):
        col = sphere_tape.column("min_inscribed_times_G")
        assert np.all(np.abs(col - 2.0 / 3.0) <= 1e-4)

    def test_rows_strictly_increasing_in_t(self, sphere_tape):
        t = sphere_tape.column("t")
        assert np.all(np.diff(t) > 0.0)


class TestCylinderRows:
    def test_zero_excess_at_delta_zero(self):
        tape = MonitorTape(n=3, delta=0.0)
        state = FlowState(curve=cylinder_profile(1.0, 2 * math.pi, 200))
        tape.record(evaluate(state))
        assert tape.rows[0]["max_f_sigma_plus"] == 0.0
        assert tape.rows[0]["max_H_over_G"] == pytest.approx(5.0, abs=1e-9)


class TestDilationInvariance:
    def test_matched_rows(self):
        # dilating by c scales time by c^2; ratio columns match at matched
        # normalized times
        _, tape1 = record_run(sphere_profile(1.0, 300), 0.05)
        _, tape2 = record_run(sphere_profile(2.0, 300), 0.2)
        t1 = tape1.column("t")
        t2 = tape2.column("t") / 4.0
        for col in ("max_H_over_G", "min_lambda1_over_G",
                    "min_inscribed_times_G"):
            v2 = np.interp(t1[t1 < 0.045], t2, tape2.column(col))
            v1 = tape1.column(col)[t1 < 0.045]
            assert np.allclose(v1, v2, atol=1e-5), col

    def test_translation_invariance(self):
        _, tape1 = record_run(sphere_profile(1.0, 300), 0.05)
        _, tape2 = record_run(sphere_profile(1.0, 300, center_z=7.5), 0.05)
        for col in ("max_G", "max_H_over_G", "min_inscribed_times_G"):
            assert np.allclose(tape1.column(col), tape2.column(col),
                               rtol=1e-12), col


class TestVerdicts:
    def test_sphere_passes_defaults(self, sphere_tape):
        verdicts = assert_estimates(sphere_tape, MonitorTolerances())
        evaluated = [v for v in verdicts if v.evaluated]
        assert evaluated and all(v.passed for v in evaluated)

    def test_all_disabled_means_not_evaluated(self):
        _, tape = record_run(sphere_profile(1.0, 300), 0.05)
        tol = MonitorTolerances(convexity_delta=None)
        verdicts = assert_estimates(tape, tol)
        by_name = {v.name: v for v in verdicts}
        assert by_name["speed_positive"].evaluated  # always on
        for name in ("uniform_two_convexity", "convexity", "cylindrical_excess",
                     "noncollapsing", "gradient_bound", "hessian_bound"):
            assert not by_name[name].evaluated

    def test_corrupted_row_fails_with_witness(self):
        _, tape = record_run(sphere_profile(1.0, 300), 0.05)
        k = len(tape.rows) // 2
        tape.rows[k] = dict(tape.rows[k], min_lambda1_over_G=-10.0, max_G=50.0)
        verdicts = assert_estimates(tape, MonitorTolerances(convexity_delta=0.05))
        v = {x.name: x for x in verdicts}["convexity"]
        assert v.evaluated and not v.passed
        assert v.witness_row == k
        assert v.observed == -10.0

    def test_convexity_K_gates_rows(self):
        _, tape = record_run(dumbbell_profile(1.0, 0.4, 6.0, 500), 0.002)
        # neck rows have negative lambda1/G; a K above every max_G skips them
        tol = MonitorTolerances(convexity_delta=0.05, convexity_K=1e6)
        verdicts = assert_estimates(tape, tol)
        v = {x.name: x for x in verdicts}["convexity"]
        assert not v.evaluated
        # with K = 0 the verdict is evaluated and fails on the neck
        verdicts = assert_estimates(tape, MonitorTolerances(convexity_delta=0.05))
        v = {x.name: x for x in verdicts}["convexity"]
        assert v.evaluated and not v.passed

    def test_empty_tape_raises(self):
        tape = MonitorTape(n=3)
        with pytest.raises(ValueError):
            assert_estimates(tape, MonitorTolerances())


class TestCsv:
    def test_header_and_shape(self):
        _, tape = record_run(sphere_profile(1.0, 300), 0.02)
        text = tape.to_csv_string()
        lines = text.strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == len(tape.rows) + 1
        assert all(len(line.split(",")) == 10 for line in lines[1:])

    def test_roundtrip_values(self):
        _, tape = record_run(sphere_profile(1.0, 300), 0.02)
        text = tape.to_csv_string()
        data = np.genfromtxt(text.splitlines(), delimiter=",", names=True)
        assert np.array_equal(data["max_G"], tape.column("max_G"))

"""Tests for the speed function and its variations on principal spectra."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkflow.algebra import (PrincipalSpectrum, ShapeOperator,
                            check_pinching_inequality,
                            check_structure_conditions, cylindrical_constant,
                            cylindrical_quantities, eval_derivatives,
                            eval_second_variation, eval_speed,
                            finite_difference_second_variation,
                            finite_difference_speed_gradient, sample_spectra)
from gkflow.errors import TwoConvexityViolated


def sphere_spectrum(n, r=1.0, kappa=0.0):
    return PrincipalSpectrum(n, kappa, np.full(n, 1.0 / r))


def cylinder_spectrum(n, r=1.0, kappa=0.0):
    lam = np.full(n, 1.0 / r)
    lam[0] = 0.0
    return PrincipalSpectrum(n, kappa, lam)


class TestClosedForms:
    def test_sphere_speed(self):
        # pair sum: n(n-1)/2 pairs, each gap 2/r, so G = 4/(n(n-1)r)
        for n in range(3, 9):
            g = eval_speed(sphere_spectrum(n, r=2.0))
            assert g == pytest.approx(4.0 / (n * (n - 1) * 2.0), rel=1e-14)

    def test_cylinder_speed_n3(self):
        # gaps: (0+1), (0+1), (1+1) -> sum of inverses 5/2, G = 2/5
        assert eval_speed(cylinder_spectrum(3)) == pytest.approx(0.4, rel=1e-14)

    def test_cylinder_H_over_G(self):
        for n in range(3, 9):
            s = cylinder_spectrum(n, r=1.7)
            H = float(np.sum(s.lambdas))
            assert H / eval_speed(s) == pytest.approx(cylindrical_constant(n),
                                                      rel=1e-13)

    def test_sphere_to_cylinder_speed_ratio(self):
        # at equal radius the n=3 sphere is 5/3 faster than the cylinder
        ratio = eval_speed(sphere_spectrum(3)) / eval_speed(cylinder_spectrum(3))
        assert ratio == pytest.approx(5.0 / 3.0, rel=1e-14)

    def test_inadmissible_raises(self):
        s = PrincipalSpectrum(3, 1.0, np.array([0.5, 0.5, 3.0]))
        with pytest.raises(TwoConvexityViolated):
            eval_speed(s)


class TestDerivatives:
    def test_gradient_matches_finite_differences(self):
        for s in sample_spectra(4, 0.1, 25, seed=7):
            grad = eval_derivatives(s).eigen_gradient
            fd = finite_difference_speed_gradient(s)
            assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)

    def test_gradient_positive(self):
        for s in sample_spectra(5, 0.0, 25, seed=8):
            assert np.all(eval_derivatives(s).eigen_gradient > 0.0)

    def test_homogeneity(self):
        # G is 1-homogeneous in lambda - kappa
        s = PrincipalSpectrum(4, 0.2, np.array([0.3, 0.5, 1.0, 2.0]))
        g = eval_speed(s)
        for c in (0.25, 2.0, 8.0):
            lam_c = 0.2 + c * (s.lambdas - 0.2)
            gc = eval_speed(PrincipalSpectrum(4, 0.2, lam_c))
            assert gc == pytest.approx(c * g, rel=1e-13)

    def test_euler_relation(self):
        # 1-homogeneity: sum gamma_i (lambda_i - kappa) = G
        for s in sample_spectra(4, 0.3, 20, seed=9):
            d = eval_derivatives(s)
            lhs = float(np.sum(d.eigen_gradient * (s.lambdas - 0.3)))
            assert lhs == pytest.approx(d.value, rel=1e-12)


class TestSecondVariation:
    def test_concavity_random(self):
        rng = np.random.default_rng(3)
        count = 0
        while count < 100:
            lam = np.sort(rng.uniform(-1.0, 3.0, size=4))
            s = PrincipalSpectrum(4, 0.1, lam)
            if not s.admissible:
                continue
            count += 1
            h = ShapeOperator(4, np.diag(s.lambdas))
            M = rng.standard_normal((4, 4))
            A = 0.5 * (M + M.T)
            v = eval_second_variation(h, A, 0.1)
            assert v <= 1e-10
            fd = finite_difference_second_variation(h, A, 0.1)
            assert v == pytest.approx(fd, rel=1e-6, abs=1e-6)

    def test_equality_direction(self):
        # the radial direction h - kappa*I is flat by homogeneity
        s = PrincipalSpectrum(4, 0.2, np.array([0.5, 0.8, 1.5, 2.5]))
        h = ShapeOperator(4, np.diag(s.lambdas))
        A = h.h - 0.2 * np.eye(4)
        assert abs(eval_second_variation(h, A, 0.2)) <= 1e-10

    def test_offdiagonal_direction(self):
        s = PrincipalSpectrum(3, 0.0, np.array([0.2, 1.0, 1.5]))
        h = ShapeOperator(3, np.diag(s.lambdas))
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 0] = 1.0
        v = eval_second_variation(h, A, 0.0)
        fd = finite_difference_second_variation(h, A, 0.0)
        assert v <= 1e-10
        assert v == pytest.approx(fd, rel=1e-6, abs=1e-6)


class TestPinching:
    def test_fuzz(self):
        for n in range(3, 9):
            for kappa in (0.0, 0.1, 1.0):
                for s in sample_spectra(n, kappa, 40, seed=n * 17 + int(10 * kappa)):
                    lhs, rhs, holds = check_pinching_inequality(s)
                    assert holds, (n, kappa, s.lambdas, lhs, rhs)

    def test_cylinder_equality(self):
        for n in range(3, 9):
            for c in (0.5, 1.0, 4.0):
                lam = np.full(n, c)
                lam[0] = 0.0
                lhs, rhs, _ = check_pinching_inequality(
                    PrincipalSpectrum(n, 0.0, lam))
                assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_shifted_cylinder_equality(self):
        # equality persists on kappa-shifted cylinders
        kappa, c = 0.3, 1.2
        lam = np.full(5, kappa + c)
        lam[0] = kappa
        lhs, rhs, _ = check_pinching_inequality(PrincipalSpectrum(5, kappa, lam))
        assert abs(lhs - rhs) <= 1e-10


class TestStructureConditions:
    def test_report_passes(self):
        for s in sample_spectra(4, 0.1, 5, seed=11):
            rep = check_structure_conditions(s, trials=8, seed=5)
            assert rep.all_pass, rep.failures

    def test_cylindrical_quantities_plus_part(self):
        # the cylinder sits exactly on the pinching boundary at delta = 0
        H, g, f, f_plus = cylindrical_quantities(cylinder_spectrum(3), 0.1, 0.0)
        assert abs(f) <= 1e-12
        assert f_plus == 0.0
        # spheres are strictly inside: negative excess
        _, _, f_sph, f_plus_sph = cylindrical_quantities(sphere_spectrum(3),
                                                         0.1, 0.0)
        assert f_sph < 0.0
        assert f_plus_sph == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 8),
       st.floats(0.0, 1.0),
       st.data())
def test_speed_positive_and_monotone_in_each_eigenvalue(n, kappa, data):
    lam = np.array(data.draw(
        st.lists(st.floats(-1.0, 3.0), min_size=n, max_size=n)))
    s = PrincipalSpectrum(n, kappa, lam)
    if not s.admissible:
        return
    g = eval_speed(s)
    assert g > 0.0
    bumped = s.lambdas.copy()
    bumped[-1] += 0.1
    g2 = eval_speed(PrincipalSpectrum(n, kappa, bumped))
    assert g2 >= g - 1e-12

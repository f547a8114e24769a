"""Tests for profile curves, discrete geometry, and the inscribed radius."""
import io

import numpy as np
import pytest

from gkflow.errors import DegenerateProfile
from gkflow.profile import (ProfileCurve, PseudoCone, capsule_profile,
                            cone_containment, cylinder_profile,
                            dumbbell_profile, geometry, is_embedded,
                            load_profile, mu_two_point,
                            pseudo_cone_radial_curvature, reparametrize,
                            save_profile, sphere_profile, tube_profile)


class TestConstructors:
    def test_sphere_radius_and_closure(self):
        c = sphere_profile(2.0, 300)
        assert c.closure == "caps"
        assert c.r[0] == 0.0 and c.r[-1] == 0.0
        assert np.max(np.sqrt(c.z**2 + c.r**2)) == pytest.approx(2.0, rel=1e-12)

    def test_cylinder_uniform_radius(self):
        c = cylinder_profile(1.5, 6.0, 200)
        assert c.closure == "periodic"
        assert np.all(c.r == 1.5)

    def test_capsule_validates(self):
        capsule_profile(1.0, 8.0, 600).validate()

    def test_dumbbell_validates_and_is_symmetric(self):
        c = dumbbell_profile(1.0, 0.35, 8.0, 800, waist_len=5.0)
        c.validate()
        assert is_embedded(c)
        # even profile in z
        k = np.argmin(np.abs(c.z))
        mirrored = np.interp(-c.z[: k], c.z, c.r)
        assert np.allclose(mirrored, c.r[: k], atol=2e-3)

    def test_dumbbell_waist_is_flat(self):
        c = dumbbell_profile(1.0, 0.35, 8.0, 1000, waist_len=5.0)
        core = np.abs(c.z) < 2.0
        assert np.max(np.abs(c.r[core] - 0.35)) < 1e-9

    def test_tube_validates(self):
        c = tube_profile(1.0, 0.35, 4.0, 900)
        c.validate()
        assert is_embedded(c)

    def test_degenerate_rejected(self):
        pts = np.stack([np.linspace(0, 1, 50), np.ones(50)], axis=1)
        with pytest.raises(DegenerateProfile):
            ProfileCurve(3, pts, "caps").validate()


class TestGeometry:
    def test_sphere_curvatures(self):
        c = sphere_profile(2.0, 800)
        geo = geometry(c)
        interior = slice(5, -5)
        assert np.allclose(geo.lam_profile[interior], 0.5, atol=5e-5)
        assert np.allclose(geo.lam_rot[interior], 0.5, atol=5e-5)

    def test_cylinder_curvatures(self):
        c = cylinder_profile(1.25, 6.0, 400)
        geo = geometry(c)
        assert np.allclose(geo.lam_profile, 0.0, atol=1e-10)
        assert np.allclose(geo.lam_rot, 0.8, atol=1e-10)

    def test_outward_normal_on_sphere(self):
        c = sphere_profile(1.0, 400)
        geo = geometry(c)
        pos = c.points[5:-5]
        outward = pos / np.linalg.norm(pos, axis=1, keepdims=True)
        assert np.allclose(geo.normal[5:-5], outward, atol=1e-3)

    def test_reparametrize_keeps_shape(self):
        c = dumbbell_profile(1.0, 0.4, 6.0, 700)
        c2 = reparametrize(c)
        ds = np.linalg.norm(np.diff(c2.points, axis=0), axis=1)
        assert np.std(ds) / np.mean(ds) < 1e-3
        r2 = np.interp(c.z[1:-1], c2.z, c2.r)
        assert np.allclose(r2, c.r[1:-1], atol=5e-4)


class TestInscribedRadius:
    def test_unit_sphere(self):
        c = sphere_profile(1.0, 300)
        mu = mu_two_point(c)
        assert np.allclose(mu, 1.0, atol=1e-9)

    def test_scaled_sphere(self):
        c = sphere_profile(2.5, 300)
        assert np.allclose(mu_two_point(c), 1.0 / 2.5, atol=1e-9)

    def test_cylinder(self):
        c = cylinder_profile(2.0, 12.0, 500)
        assert np.allclose(mu_two_point(c), 0.5, atol=1e-6)

    def test_neck_dominates_on_dumbbell(self):
        c = dumbbell_profile(1.0, 0.35, 8.0, 900, waist_len=5.0)
        mu = mu_two_point(c)
        iw = np.argmin(np.abs(c.z))
        assert mu[iw] == pytest.approx(1.0 / 0.35, rel=2e-2)


class TestPseudoCone:
    def test_radial_curvature_bound(self):
        rng = np.random.default_rng(0)
        for d in (0.01, 0.1, 1.0):
            pc = PseudoCone(np.array([0.0, 0.0]), np.array([d, 0.0]))
            for s in rng.uniform(1e-6, 1.0 - 1e-6, 1000):
                assert pseudo_cone_radial_curvature(pc, float(s)) < -1e-3 / d

    def test_containment_inside_sphere(self):
        from gkflow.profile import Containment
        c = sphere_profile(1.0, 400)
        pc = PseudoCone(np.array([0.0, 0.0]), np.array([0.3, 0.0]))
        verdict, _ = cone_containment(pc, c)
        assert verdict is Containment.Inside

    def test_containment_exits_small_sphere(self):
        from gkflow.profile import Containment
        c = sphere_profile(0.2, 400)
        pc = PseudoCone(np.array([0.0, 0.0]), np.array([0.5, 0.0]))
        verdict, _ = cone_containment(pc, c)
        assert verdict in (Containment.Exits, Containment.Touches)


class TestSerialization:
    def test_roundtrip_bit_exact(self):
        c = dumbbell_profile(1.0, 0.35, 8.0, 500, waist_len=5.0)
        buf = io.StringIO()
        save_profile(c, buf)
        buf.seek(0)
        c2 = load_profile(buf)
        assert c2.n == c.n and c2.closure == c.closure
        assert np.array_equal(c2.points, c.points)
        assert c2.target_spacing == c.target_spacing

    def test_periodic_roundtrip(self):
        c = cylinder_profile(1.0, 6.2832, 128)
        buf = io.StringIO()
        save_profile(c, buf)
        buf.seek(0)
        c2 = load_profile(buf)
        assert c2.period == c.period
        assert np.array_equal(c2.points, c.points)

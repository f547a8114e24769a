"""Discrete differential geometry of rotationally symmetric hypersurfaces.

A hypersurface of revolution in R^{n+1} is described by its generating
profile (z(u), r(u)) in the meridian half-plane. Principal curvatures,
the two-point inscribed-radius quantity, pseudo-cone geometry and
arc-length reparametrization all live here.

Sign conventions, fixed once: the profile is traversed with z generally
increasing; the outward unit normal in the (z, r) plane is
nu = (-r_u, z_u)/|X_u|, which makes a round sphere of radius R have all
principal curvatures +1/R and H = n/R > 0.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ApexOutside, DegenerateProfile

MIN_POINTS = 16

# half-aperture of the pseudo-cone, radians
CONE_APERTURE = 0.01


class Containment(Enum):
    Inside = "inside"
    Touches = "touches"
    Exits = "exits"


@dataclass(frozen=True)
class ProfileCurve:
    """Discretized generating curve of a surface of revolution.

    closure "caps": the curve starts and ends on the axis (r = 0 at both
    endpoints, meeting it perpendicularly); closure "periodic": the curve
    repeats with the given period in z (last point does not duplicate the
    first).
    """

    n: int
    points: np.ndarray  # (N, 2) columns z, r
    closure: str        # "caps" | "periodic"
    period: float | None = None
    target_spacing: float | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be (N, 2)")
        object.__setattr__(self, "points", pts)
        if self.closure not in ("caps", "periodic"):
            raise ValueError(f"unknown closure {self.closure!r}")
        if self.closure == "periodic" and not (self.period and self.period > 0):
            raise ValueError("periodic closure needs a positive period")
        if self.n < 3:
            raise ValueError("dimension must be >= 3")
        if self.target_spacing is None:
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            object.__setattr__(self, "target_spacing", float(np.mean(seg)))

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def r(self) -> np.ndarray:
        return self.points[:, 1]

    def validate(self):
        """Raise DegenerateProfile on broken invariants."""
        if self.N < MIN_POINTS:
            raise DegenerateProfile(f"only {self.N} points, need >= {MIN_POINTS}")
        r = self.r
        if self.closure == "caps":
            if abs(r[0]) > 1e-9 or abs(r[-1]) > 1e-9:
                raise DegenerateProfile("caps profile must meet the axis at both ends")
            if np.any(r[1:-1] <= 0.0):
                raise DegenerateProfile("interior radius must stay positive")
        else:
            if np.any(r <= 0.0):
                raise DegenerateProfile("periodic profile radius must stay positive")
        seg = segment_lengths(self)
        if np.any(seg <= 0.0):
            raise DegenerateProfile("coincident consecutive points")

    def arc_lengths(self) -> np.ndarray:
        """Cumulative chord length at each point, starting at 0."""
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate(([0.0], np.cumsum(seg)))

    def total_length(self) -> float:
        L = float(self.arc_lengths()[-1])
        if self.closure == "periodic":
            wrap = self.points[0] + np.array([self.period, 0.0]) - self.points[-1]
            L += float(np.linalg.norm(wrap))
        return L


def segment_lengths(c: ProfileCurve) -> np.ndarray:
    seg = np.linalg.norm(np.diff(c.points, axis=0), axis=1)
    if c.closure == "periodic":
        wrap = c.points[0] + np.array([c.period, 0.0]) - c.points[-1]
        seg = np.concatenate([seg, [np.linalg.norm(wrap)]])
    return seg


# 4th-order uniform-grid stencils (grid step 1); one-sided rows are
# Fornberg weights on offsets 0..5
_D1_ONESIDED = np.array([
    [-137 / 60, 5, -5, 10 / 3, -5 / 4, 1 / 5],
    [-1 / 5, -13 / 12, 2, -1, 1 / 3, -1 / 20],
])
_D2_ONESIDED = np.array([
    [15 / 4, -77 / 6, 107 / 6, -13, 61 / 12, -5 / 6],
    [5 / 6, -5 / 4, -1 / 3, 7 / 6, -1 / 2, 1 / 12],
])


def _deriv_uniform(f: np.ndarray, periodic: bool):
    """4th-order first and second derivatives of samples on a uniform grid
    of step 1 (the index); one-sided stencils at the ends for open data."""
    N = f.shape[0]
    if N < 8:
        raise DegenerateProfile("too few points for the derivative stencils")
    if periodic:
        fm2, fm1 = np.roll(f, 2), np.roll(f, 1)
        fp1, fp2 = np.roll(f, -1), np.roll(f, -2)
        d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / 12.0
        d2 = (-fm2 + 16 * fm1 - 30 * f + 16 * fp1 - fp2) / 12.0
        return d1, d2
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    d1[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / 12.0
    d2[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / 12.0
    head = f[:6]
    tail = f[-6:][::-1]
    d1[0], d1[1] = _D1_ONESIDED @ head
    d2[0], d2[1] = _D2_ONESIDED @ head
    d1[-1], d1[-2] = -(_D1_ONESIDED @ tail)
    d2[-1], d2[-2] = _D2_ONESIDED @ tail
    return d1, d2


def _deriv_central_open(fe: np.ndarray):
    """Central 4th-order derivatives of data padded with 4 ghost samples at
    each end; returns derivatives for the unpadded interior."""
    d1 = (fe[:-4] - 8 * fe[1:-3] + 8 * fe[3:-1] - fe[4:]) / 12.0
    d2 = (-fe[:-4] + 16 * fe[1:-3] - 30 * fe[2:-2] + 16 * fe[3:-1] - fe[4:]) / 12.0
    return d1[2:-2], d2[2:-2]


@dataclass(frozen=True)
class Geometry:
    """Per-point geometric data of a profile, as arrays of length N."""

    s: np.ndarray          # cumulative arc length
    ds: np.ndarray         # |X_u|, metric factor of the index parametrization
    tangent: np.ndarray    # (N, 2) unit tangent
    normal: np.ndarray     # (N, 2) outward unit normal
    lam_profile: np.ndarray
    lam_rot: np.ndarray

    @property
    def lam_min(self):
        return np.minimum(self.lam_profile, self.lam_rot)

    @property
    def lam_max(self):
        return np.maximum(self.lam_profile, self.lam_rot)


def geometry(c: ProfileCurve, validate: bool = True) -> Geometry:
    """Curvature data from 4th-order finite differences in the index
    parameter; parametrization-independent formulas, so mild nonuniformity
    of the spacing costs accuracy but not correctness."""
    if validate:
        c.validate()
    periodic = c.closure == "periodic"
    z, r = c.z.copy(), c.r.copy()
    if periodic:
        # z winds by one period per loop; subtract the linear winding so the
        # roll-based stencils see a periodic signal, then add its slope back
        trend = np.arange(c.N) * (c.period / c.N)
        d1z, d2z = _deriv_uniform(z - trend, True)
        d1z = d1z + c.period / c.N
        d1r, d2r = _deriv_uniform(r, True)
    else:
        # the meridian continues through each pole onto the opposite
        # azimuth: z extends evenly, r oddly. The extension is exact for
        # the revolved surface, so central stencils apply at the poles.
        ze = np.concatenate([z[4:0:-1], z, z[-2:-6:-1]])
        re = np.concatenate([-r[4:0:-1], r, -r[-2:-6:-1]])
        d1z, d2z = _deriv_central_open(ze)
        d1r, d2r = _deriv_central_open(re)
    ds = np.hypot(d1z, d1r)
    if np.any(ds <= 0.0):
        raise DegenerateProfile("vanishing metric factor")
    tangent = np.stack([d1z, d1r], axis=1) / ds[:, None]
    normal = np.stack([-d1r, d1z], axis=1) / ds[:, None]
    lam_p = (d1r * d2z - d1z * d2r) / ds**3
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_r = d1z / (r * ds)
    if not periodic:
        # umbilic poles: the rotational curvature limits to the profile one
        lam_r[0] = lam_p[0]
        lam_r[-1] = lam_p[-1]
        # poles sit on the axis; the outward normal is axial there
        normal[0] = np.array([-np.sign(d1r[0]), 0.0])
        normal[-1] = np.array([-np.sign(d1r[-1]), 0.0])
    if np.any(~np.isfinite(lam_r)) or np.any(~np.isfinite(lam_p)):
        raise DegenerateProfile("non-finite curvature")
    return Geometry(s=c.arc_lengths(), ds=ds, tangent=tangent, normal=normal,
                    lam_profile=lam_p, lam_rot=lam_r)


@dataclass(frozen=True)
class PointGeometry:
    index: int
    tangent: np.ndarray
    normal: np.ndarray
    lambda_profile: float
    lambda_rot: float
    spectrum: "PrincipalSpectrum"


def curvatures(c: ProfileCurve, kappa: float = 0.0) -> list[PointGeometry]:
    """Per-point principal curvature data. The spectrum at each point is
    (lambda_profile, lambda_rot x (n-1)), sorted."""
    from .algebra import PrincipalSpectrum

    g = geometry(c)
    out = []
    for i in range(c.N):
        lam = np.concatenate(([g.lam_profile[i]], np.full(c.n - 1, g.lam_rot[i])))
        out.append(PointGeometry(
            index=i, tangent=g.tangent[i], normal=g.normal[i],
            lambda_profile=float(g.lam_profile[i]), lambda_rot=float(g.lam_rot[i]),
            spectrum=PrincipalSpectrum(c.n, kappa, np.sort(lam))))
    return out


def _mu_ratio(z, r, zi, ri, nz, nr, cos_t):
    """Two-point ratio -2 <y - x, nu(x)> / |y - x|^2, broadcast over the
    meridian samples (z, r) and the rotation cosines."""
    dz = z - zi
    num = -2.0 * (dz * nz + (r * cos_t - ri) * nr)
    den = dz**2 + r**2 + ri**2 - 2.0 * ri * r * cos_t
    return np.where(den > 1e-24, num / np.where(den > 1e-24, den, 1.0), -np.inf)


def mu_two_point(c: ProfileCurve, angle_grid: int = 32) -> np.ndarray:
    """Reciprocal inscribed radius mu(x) = sup_{y != x} -2<y-x, nu(x)>/|y-x|^2
    over the full revolved hypersurface.

    By symmetry x sits on the zero meridian; candidates y range over all
    meridian samples and a rotation angle. The angular dependence is a
    Mobius function of cos(theta), so the supremum sits at theta in {0, pi};
    both are always on the grid, and a golden-section polish of the angle
    keeps the search assumption-free.
    """
    c.validate()
    if c.closure == "periodic":
        # replicate neighbours so antipodal chords across the period exist
        z = np.concatenate([c.z - c.period, c.z, c.z + c.period])
        r = np.tile(c.r, 3)
    else:
        z, r = c.z, c.r
    geo = geometry(c)
    thetas = np.unique(np.concatenate(([0.0, np.pi],
                                       np.linspace(0.0, np.pi, angle_grid))))
    cos_t = np.cos(thetas)
    N, M, T = c.N, z.shape[0], thetas.shape[0]
    mu = np.empty(N)
    best_j = np.empty(N, dtype=int)
    best_k = np.empty(N, dtype=int)
    block = max(1, int(4e6 // (M * T)))
    for lo in range(0, N, block):
        hi = min(lo + block, N)
        ratio = _mu_ratio(z[None, :, None], r[None, :, None],
                          c.z[lo:hi, None, None], c.r[lo:hi, None, None],
                          geo.normal[lo:hi, 0, None, None],
                          geo.normal[lo:hi, 1, None, None],
                          cos_t[None, None, :])
        flat = ratio.reshape(hi - lo, -1).argmax(axis=1)
        mu[lo:hi] = ratio.reshape(hi - lo, -1)[np.arange(hi - lo), flat]
        best_j[lo:hi] = flat // T
        best_k[lo:hi] = flat % T

    # vectorized golden-section polish of the rotation angle around the
    # best grid angle of each point
    zj, rj = z[best_j], r[best_j]
    nz, nr = geo.normal[:, 0], geo.normal[:, 1]
    a = np.maximum(thetas[best_k] - 0.2, 0.0)
    b = np.minimum(thetas[best_k] + 0.2, np.pi)
    gold = (np.sqrt(5.0) - 1.0) / 2.0

    def f(t):
        return _mu_ratio(zj, rj, c.z, c.r, nz, nr, np.cos(t))

    x1 = b - gold * (b - a)
    x2 = a + gold * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(40):
        take = f1 < f2
        a = np.where(take, x1, a)
        b = np.where(take, b, x2)
        x1 = b - gold * (b - a)
        x2 = a + gold * (b - a)
        f1, f2 = f(x1), f(x2)
    return np.maximum(mu, np.maximum(f1, f2))


def reparametrize(c: ProfileCurve, target_spacing: float | None = None) -> ProfileCurve:
    """Redistribute points to uniform arc length by cubic interpolation of
    (z, r) against cumulative chord length. Pole endpoints stay fixed for
    capped profiles. Idempotent on already-uniform data."""
    c.validate()
    target = target_spacing if target_spacing is not None else c.target_spacing
    if c.closure == "periodic":
        z = np.concatenate([c.z, [c.z[0] + c.period]])
        r = np.concatenate([c.r, [c.r[0]]])
        seg = np.linalg.norm(np.diff(np.stack([z, r], axis=1), axis=0), axis=1)
        s = np.concatenate(([0.0], np.cumsum(seg)))
        L = s[-1]
        N_new = max(int(round(L / target)), MIN_POINTS)
        s_new = np.linspace(0.0, L, N_new, endpoint=False)
        # periodic spline needs matching endpoint values, satisfied by design
        cz = CubicSpline(s, z - s * (z[-1] - z[0]) / L, bc_type="periodic")
        cr = CubicSpline(s, r, bc_type="periodic")
        z_new = cz(s_new) + s_new * (z[-1] - z[0]) / L
        r_new = cr(s_new)
        out = ProfileCurve(c.n, np.stack([z_new, r_new], axis=1), "periodic",
                           period=c.period, target_spacing=target)
    else:
        s = c.arc_lengths()
        L = s[-1]
        N_new = max(int(round(L / target)) + 1, MIN_POINTS)
        s_new = np.linspace(0.0, L, N_new)
        cz = CubicSpline(s, c.z)
        cr = CubicSpline(s, c.r)
        z_new = cz(s_new)
        r_new = cr(s_new)
        # endpoints are interpolation nodes: poles are preserved exactly
        r_new[0], r_new[-1] = c.r[0], c.r[-1]
        r_new[1:-1] = np.maximum(r_new[1:-1], 1e-300)
        out = ProfileCurve(c.n, np.stack([z_new, r_new], axis=1), "caps",
                           target_spacing=target)
    out.validate()
    return out


def is_embedded(c: ProfileCurve) -> bool:
    """True when the profile polyline has no self-intersections in the
    (z, r) half-plane. Non-adjacent segment pairs are tested after a
    bounding-box prefilter."""
    P = c.points
    if c.closure == "periodic":
        P = np.vstack([P, P[0] + np.array([c.period, 0.0])])
    a, b = P[:-1], P[1:]
    m = a.shape[0]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    # candidate pairs: bounding boxes overlap, indices differ by > 1
    overlap = ((lo[:, None, 0] <= hi[None, :, 0]) & (lo[None, :, 0] <= hi[:, None, 0])
               & (lo[:, None, 1] <= hi[None, :, 1]) & (lo[None, :, 1] <= hi[:, None, 1]))
    idx = np.arange(m)
    nonadj = np.abs(idx[:, None] - idx[None, :]) > 1
    if c.closure == "periodic":
        nonadj &= np.abs(idx[:, None] - idx[None, :]) != m - 1
    cand = np.argwhere(np.triu(overlap & nonadj))
    if cand.size == 0:
        return True
    i, j = cand[:, 0], cand[:, 1]

    def cross(o, p, q):
        return ((p[:, 0] - o[:, 0]) * (q[:, 1] - o[:, 1])
                - (p[:, 1] - o[:, 1]) * (q[:, 0] - o[:, 0]))

    d1 = cross(a[i], b[i], a[j])
    d2 = cross(a[i], b[i], b[j])
    d3 = cross(a[j], b[j], a[i])
    d4 = cross(a[j], b[j], b[i])
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    return not bool(np.any(proper))


# ---------------------------------------------------------------------------
# pseudo-cone geometry

def phi(s):
    """Opening profile of the pseudo-cone: tan(aperture) * (s + s^2)."""
    return np.tan(CONE_APERTURE) * (s + s * s)


def phi_prime(s):
    return np.tan(CONE_APERTURE) * (1.0 + 2.0 * s)


def phi_second(s):
    return 2.0 * np.tan(CONE_APERTURE) * np.ones_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class PseudoCone:
    """Region swept by revolving the graph radius = d*phi(t/d) about the
    apex-to-base axis; apex and base center are points in a meridian plane
    (z, w), w signed."""

    apex: np.ndarray
    base: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        if self.d <= 0:
            raise ValueError("apex and base must be distinct")

    @property
    def d(self) -> float:
        return float(np.linalg.norm(self.base - self.apex))

    @property
    def axis(self) -> np.ndarray:
        return (self.base - self.apex) / self.d

    def lateral_radius(self, s):
        """Distance from the axis to the lateral boundary at fraction s of d."""
        return self.d * phi(s)

    def base_radius(self) -> float:
        return self.d * phi(1.0)


def pseudo_cone_radial_curvature(pc: PseudoCone, s: float) -> float:
    """Smallest (meridional) principal curvature of the lateral boundary,
    with respect to the outward normal of the cone region:

        -phi''(s) (1 + phi'(s)^2)^(-3/2) / d

    Strictly below -1e-3/d on all of (0, 1)."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    return float(-phi_second(s) * (1.0 + phi_prime(s) ** 2) ** -1.5 / pc.d)


def _region_path(c: ProfileCurve, z_lo: float, z_hi: float):
    """Closed polygon of the revolved region's meridian cross-section
    (profile mirrored across the axis). Periodic profiles are tiled to
    cover [z_lo, z_hi] and closed off well outside that window."""
    from matplotlib.path import Path

    if c.closure == "caps":
        upper = c.points
        lower = c.points[::-1] * np.array([1.0, -1.0])
        poly = np.vstack([upper, lower])
    else:
        k_lo = int(np.floor((z_lo - c.z.max()) / c.period)) - 1
        k_hi = int(np.ceil((z_hi - c.z.min()) / c.period)) + 1
        tiles = [c.points + np.array([k * c.period, 0.0])
                 for k in range(k_lo, k_hi + 1)]
        upper = np.vstack(tiles)
        order = np.argsort(upper[:, 0], kind="stable")
        upper = upper[order]
        lower = upper[::-1] * np.array([1.0, -1.0])
        poly = np.vstack([upper, lower])
    return Path(poly)


def _cone_boundary_samples(pc: PseudoCone, n_axial: int = 200, n_azimuth: int = 33,
                           n_base: int = 12):
    """3D samples of the cone boundary: lateral surface plus base disk.
    Coordinates: the profile's axis is the first coordinate; returns the
    (z, rho) reduction with rho the distance to the revolution axis."""
    e = np.zeros(3)
    e[:2] = pc.axis
    e1 = np.array([-e[1], e[0], 0.0])  # in-plane perpendicular
    e2 = np.array([0.0, 0.0, 1.0])     # out-of-plane
    apex3 = np.array([pc.apex[0], pc.apex[1], 0.0])
    svals = np.linspace(1e-4, 1.0, n_axial)
    psis = np.linspace(0.0, 2 * np.pi, n_azimuth, endpoint=False)
    pts = []
    for s in svals:
        center = apex3 + s * pc.d * e
        rad = pc.lateral_radius(s)
        ring = center[None, :] + rad * (np.cos(psis)[:, None] * e1[None, :]
                                        + np.sin(psis)[:, None] * e2[None, :])
        pts.append(ring)
    base3 = apex3 + pc.d * e
    for frac in np.linspace(0.0, 1.0, n_base):
        rad = frac * pc.base_radius()
        ring = base3[None, :] + rad * (np.cos(psis)[:, None] * e1[None, :]
                                       + np.sin(psis)[:, None] * e2[None, :])
        pts.append(ring)
    pts = np.vstack(pts)
    z = pts[:, 0]
    rho = np.hypot(pts[:, 1], pts[:, 2])
    return np.stack([z, rho], axis=1)


def _dist_to_polyline(q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Distance from each query point to the polyline P ((M,2)).

    Nearest vertex via a KD-tree, then exact distance to the two segments
    adjacent to it; the nearest segment of a simple polyline with bounded
    spacing is adjacent to the nearest vertex."""
    from scipy.spatial import cKDTree

    tree = cKDTree(P)
    _, idx = tree.query(q)
    M = P.shape[0]
    out = np.full(q.shape[0], np.inf)
    for off in (-1, 0):
        i = idx + off
        ok = (i >= 0) & (i + 1 < M)
        a = P[np.clip(i, 0, M - 2)]
        b = P[np.clip(i + 1, 1, M - 1)]
        ab = b - a
        denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
        t = np.clip(np.sum((q - a) * ab, axis=1) / denom, 0.0, 1.0)
        d = np.linalg.norm(q - (a + t[:, None] * ab), axis=1)
        out = np.where(ok, np.minimum(out, d), out)
    # fall back to the vertex distance where no adjacent segment applied
    dv = np.linalg.norm(q - P[idx], axis=1)
    return np.minimum(out, dv)


def cone_containment(pc: PseudoCone, c: ProfileCurve):
    """Classify the pseudo-cone against the solid of revolution: fully
    Inside, Touches (first-contact point returned), or Exits. Tolerance
    1e-9 * d on the boundary distance."""
    c.validate()
    tol = 1e-9 * pc.d
    samples = _cone_boundary_samples(pc, n_axial=400)
    z_lo = min(samples[:, 0].min(), pc.apex[0]) - 1.0
    z_hi = max(samples[:, 0].max(), pc.apex[0]) + 1.0
    path = _region_path(c, z_lo, z_hi)
    apex_q = np.array([[pc.apex[0], abs(pc.apex[1])]])
    if not path.contains_points(apex_q)[0]:
        raise ApexOutside("cone apex is not enclosed by the hypersurface")
    inside = path.contains_points(samples)
    prof = c.points if c.closure == "caps" else _tiled_profile(c, z_lo, z_hi)
    dists = _dist_to_polyline(samples, prof)
    outside_far = (~inside) & (dists > tol)
    if np.any(outside_far):
        return Containment.Exits, None
    near = dists <= tol
    if np.any(near):
        k = int(np.argmin(dists))
        return Containment.Touches, samples[k]
    return Containment.Inside, None


def _tiled_profile(c: ProfileCurve, z_lo: float, z_hi: float) -> np.ndarray:
    k_lo = int(np.floor((z_lo - c.z.max()) / c.period)) - 1
    k_hi = int(np.ceil((z_hi - c.z.min()) / c.period)) + 1
    return np.vstack([c.points + np.array([k * c.period, 0.0])
                      for k in range(k_lo, k_hi + 1)])


# ---------------------------------------------------------------------------
# fixtures

def sphere_profile(radius: float, N: int, n: int = 3, center_z: float = 0.0) -> ProfileCurve:
    """Round sphere sampled uniformly in polar angle (uniform arc length)."""
    t = np.linspace(0.0, np.pi, N)
    z = center_z - radius * np.cos(t)
    r = radius * np.sin(t)
    r[0] = r[-1] = 0.0
    return ProfileCurve(n, np.stack([z, r], axis=1), "caps")


def cylinder_profile(radius: float, period: float, N: int, n: int = 3) -> ProfileCurve:
    z = np.linspace(0.0, period, N, endpoint=False)
    r = np.full(N, float(radius))
    return ProfileCurve(n, np.stack([z, r], axis=1), "periodic", period=period)


def capsule_profile(radius: float, length: float, N: int, n: int = 3) -> ProfileCurve:
    """Cylinder of the given radius and axial length, closed by hemispherical
    caps; centered at z = 0."""
    R, half = float(radius), float(length) / 2.0
    t = np.linspace(np.pi, np.pi / 2, 4 * N)
    zl = -half + R * np.cos(t)
    rl = R * np.sin(t)
    zm = np.linspace(-half, half, 8 * N)[1:-1]
    pts = np.concatenate([
        np.stack([zl, rl], axis=1),
        np.stack([zm, np.full_like(zm, R)], axis=1),
        np.stack([-zl[::-1], rl[::-1]], axis=1),
    ])
    pts[0, 1] = pts[-1, 1] = 0.0
    raw = ProfileCurve(n, pts, "caps")
    return reparametrize(raw, target_spacing=raw.total_length() / (N - 1))


def dumbbell_profile(bulb_r: float, neck_r: float, separation: float, N: int,
                     n: int = 3, waist_len: float = 0.0) -> ProfileCurve:
    """Two spherical bulbs of radius bulb_r centered at +-separation/2,
    joined by a shallow quadratic neck of waist radius neck_r; the square
    of the radius is blended with a quintic so the profile is C^2.

    waist_len > 0 inserts an exact cylindrical segment of that length at
    the waist (the flat-to-quadratic junction is mollified so the profile
    stays C^2); the bulb centers remain separation apart.
    """
    R, nu = float(bulb_r), float(neck_r)
    a = float(waist_len) / 2.0
    zc = (float(separation) - float(waist_len)) / 2.0
    if not 0 < nu < R:
        raise ValueError("need 0 < neck_r < bulb_r")
    if a < 0 or zc <= 0:
        raise ValueError("waist_len must lie in [0, separation)")
    g = (R * R - nu * nu) / zc
    z_m = zc - g
    if z_m <= 0 or g >= R:
        raise ValueError("separation incompatible with bulb and neck radii")
    alpha = g / z_m
    z_a, z_b = z_m - 0.3 * g, z_m + 0.3 * g
    # x^4/(x^2+w^2) equals x^2 away from the junction but flattens to zero
    # with two vanishing derivatives at x = 0, so the cylinder joins in C^2;
    # w = 0 recovers the plain parabola
    w = 0.15 * z_m if a > 0 else 0.0

    def _p(x, order=0):
        if w == 0.0:
            return (x * x, 2.0 * x, 2.0)[order] if order else x * x
        D = x * x + w * w
        if order == 0:
            return x**4 / D
        if order == 1:
            return (2 * x**5 + 4 * x**3 * w * w) / D**2
        return (2 * x**6 + 6 * x**4 * w**2 + 12 * x**2 * w**4) / D**3

    def q_neck(z):
        return nu * nu + alpha * _p(z)

    def q_sphere(z):
        return R * R - (z - zc) ** 2

    # quintic bridge matching value and two derivatives at z_a and z_b
    h = z_b - z_a
    A_mat = np.zeros((6, 6))
    for k, (x, dref) in enumerate([(0.0, 0), (0.0, 1), (0.0, 2),
                                   (h, 0), (h, 1), (h, 2)]):
        for p in range(dref, 6):
            wt = 1.0
            for m in range(dref):
                wt *= p - m
            A_mat[k, p] = wt * (x ** (p - dref) if p > dref else 1.0)
    rhs = np.array([
        q_neck(z_a), alpha * _p(z_a, 1), alpha * _p(z_a, 2),
        q_sphere(z_b), -2 * (z_b - zc), -2.0,
    ])
    coef = np.linalg.solve(A_mat, rhs)

    def q_bridge(z):
        x = z - z_a
        return sum(coef[p] * x**p for p in range(6))

    def q(z):
        x = np.maximum(np.abs(z) - a, -a)
        return np.where(x <= z_a, np.where(x <= 0.0, nu * nu, q_neck(x)),
                        np.where(x <= z_b, q_bridge(x), q_sphere(x)))

    # parametrize: polar angle on the bulb caps, uniform z elsewhere,
    # then reparametrize to uniform arc length
    z_end = a + zc + R
    t_cap = np.linspace(np.pi, np.arccos(np.clip((zc - z_b) / R, -1, 1)), 4 * N)
    z_left_cap = -(a + zc - R * np.cos(t_cap))
    z_mid = np.linspace(-(a + z_b), a + z_b, 8 * N)
    z_right_cap = -z_left_cap[::-1]
    z_all = np.concatenate([z_left_cap, z_mid[1:-1], z_right_cap])
    z_all = np.unique(np.clip(z_all, -z_end, z_end))
    q_all = np.maximum(q(z_all), 0.0)
    r_all = np.sqrt(q_all)
    r_all[0] = r_all[-1] = 0.0
    raw = ProfileCurve(n, np.stack([z_all, r_all], axis=1), "caps")
    L = raw.total_length()
    return reparametrize(raw, target_spacing=L / (N - 1))


def tube_profile(bulb_r: float, neck_r: float, waist_len: float, N: int,
                 n: int = 3, shoulder: float = 2.0,
                 end_r: float | None = None) -> ProfileCurve:
    """Test-tube fixture: one bulb of radius bulb_r, a shoulder tapering to
    an exact cylindrical neck of radius neck_r and length waist_len, closed
    by a convex end of radius end_r (default neck_r).

    Built by taking the bulb half of a flat-waist dumbbell and replacing
    the far half with a mollified spherical end."""
    rho = neck_r if end_r is None else float(end_r)
    if rho < neck_r:
        raise ValueError("end_r must be >= neck_r")
    sep = float(waist_len) + 2.0 * shoulder
    full = dumbbell_profile(bulb_r, neck_r, sep, 4 * N, n=n,
                            waist_len=waist_len)
    keep = full.points[full.z <= 0.0]
    nu, a = float(neck_r), float(waist_len) / 2.0
    # mollified end cap: q = rho^2 - x^4/(x^2+w^2) matches the cylinder in
    # C^2 at x = x0 where the mollified square equals rho^2 - nu^2
    w = 0.15 * nu
    x0 = 0.0
    if rho > nu:
        # solve x^4/(x^2+w^2) = rho^2-nu^2 for the attach offset
        d = rho * rho - nu * nu
        x0 = math.sqrt((d + math.sqrt(d * d + 4 * d * w * w)) / 2.0)
    xs = np.linspace(0.0, 1.0, 6 * N)
    # cluster samples toward the pole
    x_end = None
    from scipy.optimize import brentq
    f = lambda x: rho * rho - x**4 / (x * x + w * w)
    x_end = brentq(f, rho * 0.5, rho * 2.0)
    x = x0 + (x_end - x0) * np.sin(0.5 * math.pi * xs)
    q = rho * rho - x**4 / (x * x + w * w)
    q[-1] = 0.0
    zc = a + (x - x0)
    cap = np.stack([zc, np.sqrt(np.maximum(q, 0.0))], axis=1)
    flat_z = np.arange(0.0, a, full.target_spacing)
    flat = np.stack([flat_z, np.full_like(flat_z, nu)], axis=1)
    pts = np.concatenate([keep, flat[1:] if keep[-1, 0] >= 0.0 else flat,
                          cap[1:] if a > 0 else cap])
    raw = ProfileCurve(n, pts, "caps")
    L = raw.total_length()
    return reparametrize(raw, target_spacing=L / (N - 1))


# ---------------------------------------------------------------------------
# serialization: CSV rows z,r with a header comment carrying the metadata

def save_profile(c: ProfileCurve, path_or_buf):
    """Write `z,r` rows with a metadata comment; floats use shortest
    round-trip repr so loading is bit-exact."""
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "w") if own else path_or_buf
    try:
        period = repr(c.period) if c.period is not None else ""
        f.write(f"# n={c.n} closure={c.closure} period={period} "
                f"target_spacing={repr(c.target_spacing)}\n")
        f.write("z,r\n")
        for z, r in c.points:
            f.write(f"{repr(float(z))},{repr(float(r))}\n")
    finally:
        if own:
            f.close()


def load_profile(path_or_buf) -> ProfileCurve:
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "r") if own else path_or_buf
    try:
        header = f.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing profile metadata header")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        colnames = f.readline().strip()
        if colnames != "z,r":
            raise ValueError("expected z,r column header")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
        period = float(meta["period"]) if meta.get("period") else None
        return ProfileCurve(int(meta["n"]), data, meta["closure"], period=period,
                            target_spacing=float(meta["target_spacing"]))
    finally:
        if own:
            f.close()


def profile_roundtrip_string(c: ProfileCurve) -> str:
    buf = io.StringIO()
    save_profile(c, buf)
    return buf.getvalue()

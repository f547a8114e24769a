"""Neck detection and standard surgery on rotationally symmetric profiles.

A neck is a run of points where the profile is nearly cylindrical: the
radius stays within a relative band epsilon0 of the waist radius, the
meridian slope |dr/ds| stays below epsilon0, and the normalized length
(arc length over waist radius) reaches L0. Surgery replaces the middle of
such a neck by two convex caps: an exponential inward bend

    u(zeta) = r0 * exp(-B / (zeta - Lambda)),   zeta in (Lambda, 3 Lambda],

applied as r -> r - tau0 * u on each side of the neck center, followed by
a quintic cap (built in q = r^2 so the axis crossing is automatically
smooth) that brings the profile to the axis. zeta is arc length from the
start of the surgery region in units of the bending scale z_scale; on a
long neck z_scale equals the waist radius, on shorter necks it is
compressed so the whole construction fits in the middle third of the neck.

The surgery must not decrease the speed and must not increase the positive
part of the cylindrical excess at any surviving point of the bent region;
both are checked pointwise and reported, and a violation raises.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .algebra import cylindrical_constant, speed_profile
from .errors import (DegenerateProfile, MonotonicityViolated, NeckTooShort,
                     NoNeckAtThreshold)
from .profile import ProfileCurve, _deriv_uniform, geometry, reparametrize


@dataclass(frozen=True)
class SurgeryParams:
    g_star: float = 1.0        # surgery scale; flow stops at 2 * g_star
    B: float = 50.0            # bend sharpness
    tau0: float = 0.05         # bend amplitude, fraction of the waist radius
    Lambda: float = 10.0       # bend onset in units of z_scale
    epsilon0: float = 0.02     # neck flatness tolerance
    L0: float = 10.0           # minimum neck length in waist radii
    sigma: float = 0.1         # exponent of the cylindrical excess
    delta_grid: tuple = (0.0, 0.1, 1.0)
    cap_tip_factor: float = 1.5    # cap tip radius in waist radii
    cap_width_factor: float = 1.25  # cap axial width in waist radii
    verdict_margin: float = 1e-9   # relative slack for the verdicts
    max_surgeries: int = 10
    band_tolerance: float = 0.05   # relative slack on the [G*/2, 2G*] band

    def __post_init__(self):
        if self.g_star <= 0 or self.tau0 < 0 or self.B <= 0:
            raise ValueError("g_star and B must be positive, tau0 nonnegative")
        if not 0 < self.epsilon0 < 0.5:
            raise ValueError("epsilon0 must lie in (0, 0.5)")
        if self.Lambda <= 0 or self.L0 <= 0:
            raise ValueError("Lambda and L0 must be positive")


@dataclass(frozen=True)
class NeckCandidate:
    i_lo: int        # first profile index of the neck
    i_hi: int        # last profile index of the neck
    i_waist: int     # index of the minimal radius
    r0: float        # waist radius
    length: float    # arc length of the neck
    epsilon: float   # worst observed relative radius deviation

    @property
    def normalized_length(self) -> float:
        return self.length / self.r0

    def as_dict(self):
        return {"i_lo": self.i_lo, "i_hi": self.i_hi, "i_waist": self.i_waist,
                "r0": self.r0, "length": self.length, "epsilon": self.epsilon,
                "normalized_length": self.normalized_length}


def detect_necks(c: ProfileCurve, p: SurgeryParams) -> list:
    """Maximal disjoint neck candidates, in index order."""
    geo = geometry(c)
    s, r = geo.s, c.r
    flat = np.abs(geo.tangent[:, 1]) <= p.epsilon0
    flat &= r > 0.0
    necks = []
    i = 0
    N = c.N
    while i < N:
        if not flat[i]:
            i += 1
            continue
        j = i
        while j + 1 < N and flat[j + 1]:
            j += 1
        cand = _qualify_run(c, s, r, i, j, p)
        if cand is not None:
            necks.append(cand)
        i = j + 1
    return necks


def _qualify_run(c, s, r, a, b, p: SurgeryParams):
    """Grow a radius band around the waist of the flat run [a, b] and apply
    the length and disjointness criteria."""
    iw = a + int(np.argmin(r[a:b + 1]))
    r0 = float(r[iw])
    lo = hi = iw
    while lo > a and abs(r[lo - 1] - r0) <= p.epsilon0 * r0:
        lo -= 1
    while hi < b and abs(r[hi + 1] - r0) <= p.epsilon0 * r0:
        hi += 1
    length = float(s[hi] - s[lo])
    if length < p.L0 * r0:
        return None
    # the solid tube around the neck must not meet the rest of the surface
    z_lo = float(min(c.z[lo], c.z[hi]))
    z_hi = float(max(c.z[lo], c.z[hi]))
    outside = np.ones(c.N, dtype=bool)
    outside[lo:hi + 1] = False
    intrude = outside & (c.z >= z_lo) & (c.z <= z_hi) \
        & (c.r <= (1.0 + 3.0 * p.epsilon0) * r0)
    if np.any(intrude):
        return None
    eps = float(np.max(np.abs(r[lo:hi + 1] - r0)) / r0)
    return NeckCandidate(i_lo=lo, i_hi=hi, i_waist=iw, r0=r0,
                         length=length, epsilon=eps)


def _bend(zeta: np.ndarray, r0: float, B: float, Lambda: float):
    """u(zeta) and its first two zeta-derivatives; zero for zeta <= Lambda."""
    x = zeta - Lambda
    u = np.zeros_like(zeta)
    u1 = np.zeros_like(zeta)
    u2 = np.zeros_like(zeta)
    pos = x > 0.0
    xp = x[pos]
    e = r0 * np.exp(-B / xp)
    u[pos] = e
    u1[pos] = e * B / xp**2
    u2[pos] = e * (B * B / xp**4 - 2.0 * B / xp**3)
    return u, u1, u2


@dataclass
class SurgeryReport:
    """Everything observable about one surgery: the neck, the bending scale,
    the matched pre/post data on the bent regions, and the verdicts."""

    neck: NeckCandidate
    z_scale: float
    compressed: bool
    params: SurgeryParams
    t: float = 0.0
    sides: list = field(default_factory=list)      # per-side matched data
    verdicts: list = field(default_factory=list)   # dicts name/passed/margin
    theta_u: float = 0.0     # max u / (r0^2 D1D1u) over the bends
    theta_dd: float = 0.0    # max r0 * D1D1u over the bends
    components: list = field(default_factory=list)
    removed_arc_length: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def as_dict(self):
        def clean(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            return x
        sides = [{k: clean(v) for k, v in side.items()} for side in self.sides]
        return {"t": self.t, "neck": self.neck.as_dict(),
                "z_scale": self.z_scale, "compressed": self.compressed,
                "tau0": self.params.tau0, "B": self.params.B,
                "Lambda": self.params.Lambda,
                "theta_u": self.theta_u, "theta_dd": self.theta_dd,
                "verdicts": self.verdicts, "components": self.components,
                "removed_arc_length": self.removed_arc_length,
                "sides": sides}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _f_sigma_plus(lam_p, lam_r, G, n, sigma, delta):
    H = lam_p + (n - 1) * lam_r
    cn = cylindrical_constant(n)
    with np.errstate(invalid="ignore"):
        f = G ** (sigma - 1.0) * (H - cn * (1.0 + delta) * G)
    return np.maximum(f, 0.0)


def _quintic_cap(q0, dq0, ddq0, W, rho_tip):
    """Coefficients of q(x) on [0, W] matching value and two derivatives of
    the bent profile at x = 0 and a spherical-type axis crossing at x = W:
    q(W) = 0, q'(W) = -2 rho_tip, q''(W) = -2."""
    M = np.zeros((6, 6))
    rhs = np.array([q0, dq0, ddq0, 0.0, -2.0 * rho_tip, -2.0])
    pw = W ** np.arange(6)
    M[0, 0] = 1.0
    M[1, 1] = 1.0
    M[2, 2] = 2.0
    M[3] = pw
    M[4, 1:] = np.arange(1, 6) * pw[:5]
    M[5, 2:] = np.arange(2, 6) * np.arange(1, 5) * pw[:4]
    return np.linalg.solve(M, rhs)


def standard_surgery(c: ProfileCurve, neck: NeckCandidate, p: SurgeryParams,
                     kappa: float = 0.0):
    """Perform the standard surgery on the given neck.

    Returns (components, report) where components are reparametrized caps
    profiles ready to flow. Raises NeckTooShort when the construction does
    not fit the middle third of the neck, MonotonicityViolated (with the
    report attached) when a verdict fails.
    """
    if c.closure != "caps":
        raise DegenerateProfile("surgery expects a caps profile")
    geo = geometry(c)
    s, z, r = geo.s, c.z, c.r
    n = c.n
    r0 = neck.r0
    s_lo, s_hi = float(s[neck.i_lo]), float(s[neck.i_hi])
    L = s_hi - s_lo
    s_c = 0.5 * (s_lo + s_hi)
    # per side the bend (arc 2*Lambda*zs) plus the cap (axial width W) must
    # fit in half of the middle third of the neck
    avail = L / 6.0
    W = p.cap_width_factor * r0
    zs = min(r0, (avail - W) / (2.0 * p.Lambda))
    if zs < r0 / 50.0:
        raise NeckTooShort(
            f"bending scale {zs:.3g} below {r0 / 50.0:.3g} "
            f"(neck length {L:.3g}, waist {r0:.3g}, cap width {W:.3g})")
    report = SurgeryReport(neck=neck, z_scale=zs, compressed=zs < r0, params=p)

    # index-grid derivatives of the original profile, reused per side
    d1z, d2z = _deriv_uniform(z, False)

    sides = []
    for side in ("left", "right"):
        if side == "left":
            zeta = (s - (s_c - W - 3.0 * p.Lambda * zs)) / zs
        else:
            zeta = ((s_c + W + 3.0 * p.Lambda * zs) - s) / zs
        u, u1, u2 = _bend(zeta, r0, p.B, p.Lambda)
        r_bent = r - p.tau0 * u
        # curvature of the bent curve on the unmodified index grid; only the
        # bend region (away from both the pole and the discarded middle) is
        # read, so the global evaluation is safe without revalidation
        bent = ProfileCurve(n, np.stack([z, r_bent], axis=1), "caps",
                            target_spacing=c.target_spacing)
        geo_t = geometry(bent, validate=False)
        sel = (zeta > p.Lambda) & (zeta <= 3.0 * p.Lambda)
        idx = np.nonzero(sel)[0]
        if idx.size == 0:
            raise NeckTooShort("no profile points inside the bend region")
        G_pre = speed_profile(geo.lam_profile[idx], geo.lam_rot[idx], n, kappa)
        G_post = speed_profile(geo_t.lam_profile[idx], geo_t.lam_rot[idx],
                               n, kappa)
        data = {"side": side, "indices": idx,
                "lam_profile_pre": geo.lam_profile[idx],
                "lam_rot_pre": geo.lam_rot[idx],
                "lam_profile_post": geo_t.lam_profile[idx],
                "lam_rot_post": geo_t.lam_rot[idx],
                "G_pre": G_pre, "G_post": G_post,
                "u": u[idx], "D1D1u": u2[idx] / zs**2}
        for delta in p.delta_grid:
            data[f"f_plus_pre_{delta}"] = _f_sigma_plus(
                geo.lam_profile[idx], geo.lam_rot[idx], G_pre, n, p.sigma, delta)
            data[f"f_plus_post_{delta}"] = _f_sigma_plus(
                geo_t.lam_profile[idx], geo_t.lam_rot[idx], G_post, n,
                p.sigma, delta)
        sides.append((data, zeta, u, r_bent, d1z, d2z))
        report.sides.append(data)

    # bending-regime scales over both bends
    th_u, th_dd = 0.0, 0.0
    for data, *_ in sides:
        dd = data["D1D1u"]
        ok = dd > 0.0
        if np.any(ok):
            th_u = max(th_u, float(np.max(data["u"][ok] / (r0**2 * dd[ok]))))
            th_dd = max(th_dd, float(np.max(dd * r0)))
    report.theta_u, report.theta_dd = th_u, th_dd

    # verdicts at matched points. Near zeta = Lambda the bend displacement
    # underflows the curvature stencil's noise floor; those points are
    # unchanged to machine precision and excluded from the margin.
    for data, *_ in sides:
        live = data["u"] >= 1e-6 * r0
        if not np.any(live):
            live = np.ones_like(data["u"], dtype=bool)
        scale = np.maximum(1.0, np.abs(data["G_pre"]))
        diff = (data["G_post"] - data["G_pre"]) / scale
        margin = float(np.min(diff[live]))
        report.verdicts.append({
            "name": f"speed_nondecreasing_{data['side']}",
            "passed": bool(margin >= -p.verdict_margin),
            "margin": margin, "points": int(live.sum())})
        for delta in p.delta_grid:
            pre = data[f"f_plus_pre_{delta}"]
            post = data[f"f_plus_post_{delta}"]
            scale = np.maximum(1.0, np.abs(pre))
            margin = float(np.min(((pre - post) / scale)[live]))
            report.verdicts.append({
                "name": f"excess_nonincreasing_{data['side']}_delta_{delta}",
                "passed": bool(margin >= -p.verdict_margin),
                "margin": margin, "points": int(live.sum())})

    # assemble the two capped components
    components = []
    kept = np.zeros(c.N, dtype=bool)
    mid_lo, mid_hi = s_lo + L / 3.0, s_hi - L / 3.0
    for data, zeta, u, r_bent, d1z_, d2z_ in sides:
        at_end = data["side"] == "left"
        inside = zeta <= 3.0 * p.Lambda
        if at_end:
            j = int(np.nonzero(inside)[0][-1])
            keep = np.arange(0, j + 1)
        else:
            j = int(np.nonzero(inside)[0][0])
            keep = np.arange(j, c.N)
        kept[keep] = True
        pts = np.stack([z[keep], r_bent[keep]], axis=1)
        d1r_b, d2r_b = _deriv_uniform(r_bent, False)
        cap = _cap_points(z, r_bent, d1z, d2z, d1r_b, d2r_b, j, at_end,
                          W, r0, p, c.target_spacing)
        pts = np.concatenate([pts, cap]) if at_end else \
            np.concatenate([cap, pts])
        comp = ProfileCurve(n, pts, "caps", target_spacing=c.target_spacing)
        comp.validate()

        # locality: every modified profile point sits in the middle third
        # of the neck (the bend starts at most L/6 from the neck center)
        modified = keep[(p.tau0 * u[keep]) > 0.0] if p.tau0 > 0.0 else \
            keep[zeta[keep] > p.Lambda]
        if modified.size:
            s_mod = s[modified]
            margin = float(min(s_mod.min() - mid_lo, mid_hi - s_mod.max()))
        else:
            margin = float(L / 6.0)
        report.verdicts.append({
            "name": f"middle_third_locality_{data['side']}",
            "passed": bool(margin >= -1e-9 * L), "margin": margin,
            "points": int(modified.size)})

        # cap diameter and curvature band, plus component admissibility
        geo_c = geometry(comp, validate=False)
        G_c = speed_profile(geo_c.lam_profile, geo_c.lam_rot, n, kappa)
        ncap = cap.shape[0]
        # slices include the junction point so the rim-to-axis arc is whole
        cap_sl = slice(len(keep) - 1, None) if at_end else slice(0, ncap + 1)
        cap_arc = float(np.sum(np.sqrt(np.sum(
            np.diff(pts[cap_sl], axis=0) ** 2, axis=1))))
        diam = 2.0 * cap_arc
        report.verdicts.append({
            "name": f"cap_diameter_{data['side']}",
            "passed": bool(diam <= 100.0 / p.g_star),
            "margin": float(100.0 / p.g_star - diam), "points": ncap})
        cap_G = G_c[cap_sl]
        report.verdicts.append({
            "name": f"cap_curvature_ceiling_{data['side']}",
            "passed": bool(np.nanmax(cap_G) <= 100.0 * p.g_star),
            "margin": float(100.0 * p.g_star - np.nanmax(cap_G)),
            "points": ncap})
        gap = geo_c.lam_profile + geo_c.lam_rot - 2.0 * kappa
        report.verdicts.append({
            "name": f"admissibility_{data['side']}",
            "passed": bool(np.nanmin(gap) > 0.0),
            "margin": float(np.nanmin(gap)), "points": comp.N})

        comp = reparametrize(comp)
        kind = "ball" if comp.r[0] == 0.0 and comp.r[-1] == 0.0 else "open"
        components.append(comp)
        report.components.append({"kind": kind, "n_points": comp.N,
                                  "arc_length": comp.total_length(),
                                  "cap_min_G": float(np.nanmin(cap_G)),
                                  "cap_max_G": float(np.nanmax(cap_G)),
                                  "cap_diameter": diam})
    removed = ~kept
    report.removed_arc_length = float(np.sum(geo.ds[removed]))

    if not report.passed:
        bad = [v["name"] for v in report.verdicts if not v["passed"]]
        err = MonotonicityViolated("surgery verdict failed: " + ", ".join(bad))
        err.report = report
        raise err
    return components, report


def _cap_points(z, r_bent, d1z, d2z, d1r, d2r, j, at_end, W, r0,
                p: SurgeryParams, spacing):
    """Cap samples continuing the bent profile from index j to the axis.

    The cap is a quintic in q = r^2 over the axial offset x in [0, W],
    oriented away from the kept piece; the axis crossing matches a sphere
    of radius cap_tip_factor * r0, which makes the tip smooth after
    revolution."""
    e = 1.0 if at_end else -1.0
    e *= np.sign(d1z[j])
    rj = r_bent[j]
    drdz = d1r[j] / d1z[j]
    d2rdz2 = (d2r[j] * d1z[j] - d1r[j] * d2z[j]) / d1z[j] ** 3
    q0 = rj * rj
    dq0 = 2.0 * rj * drdz * e
    ddq0 = 2.0 * drdz * drdz + 2.0 * rj * d2rdz2
    rho_tip = p.cap_tip_factor * r0
    coef = _quintic_cap(q0, dq0, ddq0, W, rho_tip)
    npts = max(12, int(math.ceil(0.5 * math.pi * W / spacing)))
    xi = np.linspace(0.0, 1.0, npts + 1)[1:]
    x = W * np.sin(0.5 * math.pi * xi)
    q = np.polyval(coef[::-1], x)
    q[-1] = 0.0
    if np.any(q[:-1] <= 0.0):
        raise DegenerateProfile("cap polynomial leaves the positive radius "
                                "range; neck too distorted for surgery")
    zc = z[j] + e * x
    cap = np.stack([zc, np.sqrt(q)], axis=1)
    return cap if at_end else cap[::-1]


def events_to_jsonl(events: list) -> str:
    return "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in events)


def classify_component(c: ProfileCurve) -> str:
    """Topological class of the revolved component from the profile alone:
    a caps profile (two poles) bounds a ball, a periodic one a solid torus."""
    if c.closure == "periodic":
        return "solid_torus_like"
    if c.r[0] == 0.0 and c.r[-1] == 0.0:
        return "ball"
    return "open"


def _sphere_time_constant(n: int) -> float:
    # round sphere: r dr/dt = -4/(n(n-1)), so T - t = r^2 n(n-1)/8
    return n * (n - 1) / 8.0


def _circumradius(c: ProfileCurve) -> float:
    zc = 0.5 * (c.z.max() + c.z.min())
    return float(np.sqrt((c.z - zc) ** 2 + c.r ** 2).max())


def _in_band(G: np.ndarray, neck: NeckCandidate, p: SurgeryParams) -> bool:
    """Mean speed over the neck must sit in the surgery band [G*/2, 2G*]."""
    mean = float(np.mean(G[neck.i_lo:neck.i_hi + 1]))
    tol = p.band_tolerance
    return (0.5 * p.g_star * (1.0 - tol) <= mean
            <= 2.0 * p.g_star * (1.0 + tol))


def surgically_modified_run(initial: ProfileCurve, ctl, p: SurgeryParams,
                            t_max: float, kappa: float = 0.0,
                            monitor_stride: int = 10, mu_stride: int = 10):
    """Flow with surgeries: run until the speed reaches 2 * g_star, operate
    on the neck carrying the maximum, and continue each resulting component;
    repeat until every component is extinct, failed, or t_max is reached.

    Returns (final_states, events, reports, tapes). Raises NoNeckAtThreshold
    (with partial results attached) when the threshold is reached away from
    any detectable neck.
    """
    from .engine import StepControl, run
    from .monitors import MonitorTape

    ctl = dc_replace(ctl, g_stop=2.0 * p.g_star)
    queue = [(initial, 0.0)]
    events, reports, tapes, final = [], [], [], []
    surgeries = 0
    while queue:
        curve, t0 = queue.pop(0)
        tape = MonitorTape(n=curve.n, kappa=kappa, sigma=p.sigma,
                           stride=monitor_stride, mu_stride=mu_stride)
        state, tape = run(curve, ctl, t_max - t0, kappa=kappa, monitor=tape)
        tapes.append(tape)
        t_abs = t0 + state.t
        kind = state.status.kind
        if kind == "threshold":
            lam1 = np.minimum(state.geo.lam_profile, state.geo.lam_rot)
            if np.all(lam1 > 0.0):
                # a uniformly convex component shrinks to a round point;
                # grinding it through the resolution floor adds nothing
                proj = t_abs + _sphere_time_constant(state.curve.n) \
                    * _circumradius(state.curve) ** 2
                events.append({"event": "extinct", "t": t_abs,
                               "mode": "convex",
                               "projected_extinction": proj,
                               "classification":
                                   classify_component(state.curve)})
                final.append(state)
                continue
            if surgeries >= p.max_surgeries:
                events.append({"event": "surgery_limit", "t": t_abs})
                final.append(state)
                continue
            necks = [nk for nk in detect_necks(state.curve, p)
                     if _in_band(state.G, nk, p)]
            hit = int(state.status.index)
            chosen = None
            for neck in necks:
                if neck.i_lo <= hit <= neck.i_hi:
                    chosen = neck
                    break
            if chosen is None and necks:
                # threshold reached away from every neck (e.g. at a small
                # convex region); operate on the neck with the fastest waist
                G = state.G
                chosen = max(necks, key=lambda nk: G[nk.i_waist])
            if chosen is None:
                events.append({"event": "no_neck_at_threshold", "t": t_abs,
                               "index": hit})
                err = NoNeckAtThreshold(
                    f"speed threshold reached at t={t_abs:.6g} away from "
                    "any detectable neck")
                err.partial = (final, events, reports, tapes)
                raise err
            g_waist = float(state.G[chosen.i_waist])
            components, rep = standard_surgery(state.curve, chosen, p,
                                               kappa=kappa)
            rep.t = t_abs
            reports.append(rep)
            events.append({"event": "surgery", "t": t_abs,
                           "neck": chosen.as_dict(),
                           "g_waist": g_waist,
                           "z_scale": rep.z_scale,
                           "components": rep.components})
            surgeries += 1
            for comp in components:
                cgeo = geometry(comp)
                cG = speed_profile(cgeo.lam_profile, cgeo.lam_rot, comp.n,
                                   kappa)
                if float(np.nanmin(cG)) >= 0.5 * p.g_star:
                    # everything on this piece lives at the surgery scale:
                    # remove it immediately after surgery. Its remaining
                    # lifetime is bounded by the round-point time of its
                    # circumscribed sphere, recorded as the projection.
                    proj = t_abs + _sphere_time_constant(comp.n) \
                        * _circumradius(comp) ** 2
                    events.append({"event": "extinct", "t": t_abs,
                                   "mode": "removed",
                                   "classification":
                                       classify_component(comp),
                                   "min_G": float(np.nanmin(cG)),
                                   "max_G": float(np.nanmax(cG)),
                                   "projected_extinction": proj})
                    continue
                queue.append((comp, t_abs))
        elif kind == "extinct":
            events.append({"event": "extinct", "t": t_abs,
                           "mode": "resolution",
                           "classification": classify_component(state.curve),
                           "steps": state.step_count})
            final.append(state)
        elif kind == "running":
            events.append({"event": "t_max", "t": t_abs})
            final.append(state)
        else:
            events.append({"event": "failed", "t": t_abs,
                           "reason": state.status.reason})
            final.append(state)
    return final, events, reports, tapes

"""Time stepping for the inward curvature flow with speed G_kappa.

Explicit Euler with a curvature-adaptive step: every profile point moves by
-dt * G * nu, with dt = cfl * ds^2 / max(sum gamma_i), the sum of the
eigen-gradient playing the role of the parabolic coefficient. Tangential
drift is handled by periodic arc-length reparametrization, which does not
alter the geometric evolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import gamma_profile, speed_profile
from .errors import InsufficientHistory
from .profile import (Geometry, ProfileCurve, _deriv_uniform, geometry,
                      is_embedded, reparametrize)

DT_UNDERFLOW = 1e-14


@dataclass(frozen=True)
class Status:
    kind: str                 # running | threshold | extinct | failed
    index: int | None = None  # point index for threshold
    reason: str | None = None  # failure reason

    @property
    def running(self) -> bool:
        return self.kind == "running"


RUNNING = Status("running")


@dataclass(frozen=True)
class StepControl:
    cfl: float = 0.2
    reparam_interval: int = 10
    g_stop: float = math.inf
    embed_check_interval: int = 20

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if self.g_stop <= 0.0:
            raise ValueError("g_stop must be positive")
        if self.reparam_interval < 1:
            raise ValueError("reparam_interval must be >= 1")


@dataclass(frozen=True)
class FlowState:
    curve: ProfileCurve
    kappa: float = 0.0
    t: float = 0.0
    dt_last: float = 0.0
    step_count: int = 0
    status: Status = RUNNING
    # caches for monitors and the consistency check. prev_* is the previous
    # accepted step; anchor_* is the oldest index-aligned snapshot since the
    # last reparametrization (a longer time baseline conditions the
    # consistency check better than one Euler step).
    geo: Geometry | None = field(default=None, compare=False)
    G: np.ndarray | None = field(default=None, compare=False)
    prev_G: np.ndarray | None = field(default=None, compare=False)
    prev_t: float | None = field(default=None, compare=False)
    anchor_G: np.ndarray | None = field(default=None, compare=False)
    anchor_t: float | None = field(default=None, compare=False)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def enclosed_volume(c: ProfileCurve) -> float:
    """Volume of the revolved region: cross-sections are n-balls of radius r."""
    if c.closure == "periodic":
        z = np.concatenate([c.z, [c.z[0] + c.period]])
        r = np.concatenate([c.r, [c.r[0]]])
    else:
        z, r = c.z, c.r
    return float(unit_ball_volume(c.n) * np.trapezoid(r ** c.n, z))


def evaluate(state: FlowState) -> FlowState:
    """Fill the geometry and speed caches if absent."""
    if state.geo is not None and state.G is not None:
        return state
    # step() and reparametrize() maintain the invariants between full
    # validations, so the hot path skips them
    geo = geometry(state.curve, validate=state.step_count == 0)
    G = speed_profile(geo.lam_profile, geo.lam_rot, state.curve.n, state.kappa)
    return replace(state, geo=geo, G=G)


def _is_extinct(c: ProfileCurve) -> bool:
    if c.closure == "periodic":
        return False
    spacing = c.target_spacing
    if c.r.max() < 5.0 * spacing:
        return True
    return enclosed_volume(c) < (10.0 * spacing) ** (c.n + 1)


def step(state: FlowState, ctl: StepControl) -> FlowState:
    """One accepted explicit Euler step. Statuses other than running are
    returned unchanged."""
    if not state.status.running:
        return state
    state = evaluate(state)
    geo, G = state.geo, state.G
    c = state.curve
    if np.any(~np.isfinite(G)):
        bad = int(np.argmax(~np.isfinite(G)))
        return replace(state, status=Status("failed", index=bad,
                                            reason="AdmissibilityLost"))
    imax = int(np.argmax(G))
    if G[imax] >= ctl.g_stop:
        return replace(state, status=Status("threshold", index=imax))
    if _is_extinct(c):
        return replace(state, status=Status("extinct"))

    _, _, gamma_sum = gamma_profile(geo.lam_profile, geo.lam_rot, c.n,
                                    state.kappa, G=G)
    ds = float(geo.ds.min())
    dt = ctl.cfl * ds * ds / float(np.nanmax(gamma_sum))
    if dt < DT_UNDERFLOW:
        return replace(state, status=Status("failed", reason="StepUnderflow"))

    pts = c.points - dt * G[:, None] * geo.normal
    if c.closure == "caps":
        pts[0, 1] = 0.0
        pts[-1, 1] = 0.0
        if np.any(pts[1:-1, 1] <= 0.0):
            return replace(state, status=Status("failed", reason="AdmissibilityLost"))
    new_curve = ProfileCurve(c.n, pts, c.closure, period=c.period,
                             target_spacing=c.target_spacing)
    count = state.step_count + 1
    prev_G, prev_t = G, state.t
    anchor_G, anchor_t = state.anchor_G, state.anchor_t
    if anchor_G is None or anchor_G.shape != G.shape:
        anchor_G, anchor_t = G, state.t
    if count % ctl.reparam_interval == 0:
        new_curve = reparametrize(new_curve)
        prev_G, prev_t = None, None      # indices no longer aligned
        anchor_G, anchor_t = None, None
    if count % ctl.embed_check_interval == 0 and not is_embedded(new_curve):
        return replace(state, status=Status("failed", reason="SelfIntersection"))
    return replace(state, curve=new_curve, t=state.t + dt, dt_last=dt,
                   step_count=count, geo=None, G=None,
                   prev_G=prev_G, prev_t=prev_t,
                   anchor_G=anchor_G, anchor_t=anchor_t)


def pde_consistency_check(state: FlowState) -> float:
    """Residual of the evolution equation of the speed,

        d/dt G = gamma_p G'' + (n-1) gamma_r (r'/r) G' + G |h|^2_gamma,

    where primes are arc-length derivatives, |h|^2_gamma = gamma_p lam_p^2 +
    (n-1) gamma_r lam_r^2, and d/dt is the normal-time derivative sampled
    from the last two accepted steps. Returns max over interior points of
    |lhs - rhs| / max(G^2, 1); points within 10 spacings of a pole or of
    the axis are excluded as under-resolved."""
    ref_G, ref_t = state.anchor_G, state.anchor_t
    if ref_G is None:
        ref_G, ref_t = state.prev_G, state.prev_t
    if ref_G is None or ref_t is None:
        raise InsufficientHistory("need two consecutive accepted steps "
                                  "without an intervening reparametrization")
    state = evaluate(state)
    c, geo, G = state.curve, state.geo, state.G
    if G.shape != ref_G.shape:
        raise InsufficientHistory("point count changed between steps")
    dt = state.t - ref_t
    if dt <= 0:
        raise InsufficientHistory("no time elapsed")
    lhs = (G - ref_G) / dt
    periodic = c.closure == "periodic"
    d1G, d2G = _deriv_uniform(G, periodic)
    d1r, _ = _deriv_uniform(c.r, periodic)
    Gs = d1G / geo.ds
    Gss = (d2G - d1G * _metric_drift(geo.ds, periodic)) / geo.ds**2
    gp, gr, _ = gamma_profile(geo.lam_profile, geo.lam_rot, c.n, state.kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        rot = (d1r / geo.ds) / c.r
    rhs = gp * Gss + (c.n - 1) * gr * rot * Gs \
        + G * (gp * geo.lam_profile**2 + (c.n - 1) * gr * geo.lam_rot**2)
    res = np.abs(lhs - rhs) / np.maximum(G * G, 1.0)
    # exclude points near the poles and the axis: at least 10 spacings, but
    # no less than 1% of the arc so the admitted domain is mesh-independent
    # and refinement comparisons are meaningful
    guard = max(10.0 * c.target_spacing, 0.01 * float(geo.s[-1]))
    ok = np.isfinite(res)
    if not periodic:
        ok &= c.r > guard
        s = geo.s
        ok &= (s > guard) & (s < s[-1] - guard)
    if not np.any(ok):
        raise InsufficientHistory("no resolvable interior points")
    return float(res[ok].max())


def _metric_drift(ds: np.ndarray, periodic: bool) -> np.ndarray:
    """d(ds)/du / ds, the chain-rule correction from index to arc length."""
    d1, _ = _deriv_uniform(ds, periodic)
    return d1 / ds


def run(initial: ProfileCurve, ctl: StepControl, t_max: float, kappa: float = 0.0,
        monitor=None, max_steps: int = 10_000_000):
    """Advance until extinction, threshold, failure, or t >= t_max.

    monitor, when given, is a MonitorTape; one row is recorded per accepted
    step subject to the tape's own stride. Returns (final_state, monitor).
    """
    from .monitors import MonitorTape

    state = FlowState(curve=initial, kappa=kappa)
    if monitor is None:
        # the inscribed-radius column is quadratic in N; keep the implicit
        # tape cheap and let callers pass a denser one when needed
        monitor = MonitorTape(n=initial.n, kappa=kappa, stride=10, mu_stride=10)
    while state.status.running and state.t < t_max and state.step_count < max_steps:
        state = evaluate(state)
        monitor.record(state)
        nxt = step(state, ctl)
        if nxt.status.running and nxt.step_count == state.step_count:
            break  # no progress; defensive
        state = nxt
    state = evaluate(state) if state.status.running else state
    return state, monitor

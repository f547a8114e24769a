"""Per-step empirical constants of the flow and pass/fail verdicts for the
a-priori estimates they track.

Every recorded quantity is a scale-invariant ratio: H/G, lambda_1/G,
inscribed radius times G, |grad h|/G^2, |hess h|/G^3, so rows of a dilated
run match rows of the original at matched normalized times.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .algebra import cylindrical_constant, speed_profile
from .errors import InsufficientHistory
from .profile import _deriv_uniform, mu_two_point

CSV_HEADER = ("t,min_G,max_G,max_H_over_G,min_lambda1_over_G,max_f_sigma_plus,"
              "min_inscribed_times_G,max_grad_h_over_G2,max_hess_h_over_G3,"
              "pde_residual")

COLUMNS = CSV_HEADER.split(",")


@dataclass
class MonitorTape:
    """Time series of monitor rows plus the knobs controlling how often the
    expensive columns are refreshed.

    stride: record every stride-th accepted step. mu_stride: recompute the
    inscribed-radius column every mu_stride-th recorded row (the previous
    value is carried in between; the first row always computes it).
    """

    n: int
    kappa: float = 0.0
    sigma: float = 0.1
    delta: float = 0.0
    stride: int = 1
    mu_stride: int = 1
    rows: list = field(default_factory=list)
    _last_mu_col: float = float("nan")
    _recorded: int = 0

    def record(self, state) -> dict | None:
        """Append one row for the given evaluated FlowState; honors stride."""
        if state.step_count % self.stride != 0:
            return None
        from .engine import evaluate, pde_consistency_check

        state = evaluate(state)
        geo, G = state.geo, state.G
        c = state.curve
        lam_p, lam_r = geo.lam_profile, geo.lam_rot
        lam1 = np.minimum(lam_p, lam_r)
        H = lam_p + (c.n - 1) * lam_r
        cn = cylindrical_constant(c.n)
        with np.errstate(invalid="ignore"):
            f_sigma = G ** (self.sigma - 1.0) * (H - cn * (1.0 + self.delta) * G)
        periodic = c.closure == "periodic"
        d1p, d2p = _deriv_uniform(lam_p, periodic)
        d1r, d2r = _deriv_uniform(lam_r, periodic)
        grad_h = np.sqrt((d1p / geo.ds) ** 2 + (c.n - 1) * (d1r / geo.ds) ** 2)
        hess_h = np.sqrt((d2p / geo.ds**2) ** 2
                         + (c.n - 1) * (d2r / geo.ds**2) ** 2)
        if self._recorded % self.mu_stride == 0:
            mu = mu_two_point(c)
            with np.errstate(divide="ignore"):
                self._last_mu_col = float(np.min(G / mu))
        try:
            residual = pde_consistency_check(state)
        except InsufficientHistory:
            residual = float("nan")
        row = {
            "t": state.t,
            "min_G": float(np.nanmin(G)),
            "max_G": float(np.nanmax(G)),
            "max_H_over_G": float(np.nanmax(H / G)),
            "min_lambda1_over_G": float(np.nanmin(lam1 / G)),
            "max_f_sigma_plus": float(max(np.nanmax(f_sigma), 0.0)),
            "min_inscribed_times_G": self._last_mu_col,
            "max_grad_h_over_G2": float(np.nanmax(grad_h / G**2)),
            "max_hess_h_over_G3": float(np.nanmax(hess_h / G**3)),
            "pde_residual": residual,
        }
        self.rows.append(row)
        self._recorded += 1
        return row

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def to_csv(self, path_or_buf):
        own = isinstance(path_or_buf, (str, bytes))
        f = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            f.write(CSV_HEADER + "\n")
            w = csv.writer(f, lineterminator="\n")
            for row in self.rows:
                w.writerow([repr(float(row[k])) for k in COLUMNS])
        finally:
            if own:
                f.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class Verdict:
    name: str
    evaluated: bool
    passed: bool | None
    witness_row: int | None
    threshold: float | None
    observed: float | None

    def as_dict(self):
        return {"name": self.name, "evaluated": self.evaluated,
                "passed": self.passed, "witness_row": self.witness_row,
                "threshold": self.threshold, "observed": self.observed}


@dataclass(frozen=True)
class MonitorTolerances:
    """Thresholds for the estimate verdicts. A None threshold disables the
    corresponding verdict ("not evaluated"); the defaults leave the
    fixture-frozen bounds to the caller."""

    max_H_over_G: float | None = None     # uniform two-convexity ceiling
    convexity_delta: float | None = 0.05  # lambda_1/G >= -delta ...
    convexity_K: float | None = None      # ... on rows with max_G >= K
    f_sigma_ceiling: float | None = None  # cylindrical-excess ceiling
    alpha: float | None = None            # inscribed radius * G floor
    grad_ceiling: float | None = None     # |grad h|/G^2 ceiling
    hess_ceiling: float | None = None     # |hess h|/G^3 ceiling


def _worst(values: np.ndarray, kind: str):
    if kind == "max":
        i = int(np.nanargmax(values))
    else:
        i = int(np.nanargmin(values))
    return i, float(values[i])


def assert_estimates(tape: MonitorTape, tol: MonitorTolerances) -> list[Verdict]:
    """Evaluate every enabled estimate against the tape; each verdict carries
    the witnessing row."""
    if not tape.rows:
        raise ValueError("empty monitor tape")
    out = []

    def skip(name):
        out.append(Verdict(name, False, None, None, None, None))

    def check(name, col, kind, threshold, ok):
        i, v = _worst(tape.column(col), kind)
        out.append(Verdict(name, True, bool(ok(v)), i, threshold, v))

    # speed stays positive (finite-time lower speed bound, qualitatively)
    check("speed_positive", "min_G", "min", 0.0, lambda v: v > 0.0)
    if tol.max_H_over_G is None:
        skip("uniform_two_convexity")
    else:
        check("uniform_two_convexity", "max_H_over_G", "max", tol.max_H_over_G,
              lambda v: v <= tol.max_H_over_G)
    if tol.convexity_delta is None:
        skip("convexity")
    else:
        K = tol.convexity_K if tol.convexity_K is not None else 0.0
        maxG = tape.column("max_G")
        lam1 = tape.column("min_lambda1_over_G")
        sel = maxG >= K
        if not np.any(sel):
            skip("convexity")
        else:
            vals = np.where(sel, lam1, np.nan)
            i, v = _worst(vals, "min")
            out.append(Verdict("convexity", True, bool(v >= -tol.convexity_delta),
                               i, -tol.convexity_delta, v))
    if tol.f_sigma_ceiling is None:
        skip("cylindrical_excess")
    else:
        check("cylindrical_excess", "max_f_sigma_plus", "max", tol.f_sigma_ceiling,
              lambda v: v <= tol.f_sigma_ceiling)
    if tol.alpha is None:
        skip("noncollapsing")
    else:
        check("noncollapsing", "min_inscribed_times_G", "min", tol.alpha,
              lambda v: v >= tol.alpha)
    if tol.grad_ceiling is None:
        skip("gradient_bound")
    else:
        check("gradient_bound", "max_grad_h_over_G2", "max", tol.grad_ceiling,
              lambda v: v <= tol.grad_ceiling)
    if tol.hess_ceiling is None:
        skip("hessian_bound")
    else:
        check("hessian_bound", "max_hess_h_over_G3", "max", tol.hess_ceiling,
              lambda v: v <= tol.hess_ceiling)
    return out


def verdicts_to_json(verdicts: list[Verdict], extra: dict | None = None) -> str:
    payload = {"verdicts": [v.as_dict() for v in verdicts]}
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)

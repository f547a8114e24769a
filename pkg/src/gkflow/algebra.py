"""Curvature algebra for the speed function

    G_kappa = ( sum_{i<j} 1/(lambda_i + lambda_j - 2 kappa) )^(-1)

on the admissible cone lambda_1 + lambda_2 > 2 kappa, together with its first
and second variations and the algebraic inequalities the flow relies on.
All formulas are evaluated in an eigenbasis and are multiplicity-safe: no
coefficient divides by an eigenvalue gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TwoConvexityViolated

# relative slack below which the cone boundary is treated as crossed
ADMISSIBILITY_RTOL = 1e-10


def cylindrical_constant(n: int) -> float:
    """Exact ratio H/G on a round cylinder: (n-1)^2 (n+2) / 4."""
    return (n - 1) ** 2 * (n + 2) / 4.0


@dataclass(frozen=True)
class PrincipalSpectrum:
    """Sorted principal curvatures with dimension and the convexity offset kappa."""

    n: int
    kappa: float
    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (self.n,):
            raise ValueError(f"expected {self.n} eigenvalues, got shape {lam.shape}")
        if self.n < 3:
            raise ValueError("dimension must be >= 3")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        lam = np.sort(lam)
        object.__setattr__(self, "lambdas", lam)

    @property
    def admissible(self) -> bool:
        gap = self.lambdas[0] + self.lambdas[1] - 2.0 * self.kappa
        scale = max(1.0, abs(self.lambdas[-1]))
        return gap > ADMISSIBILITY_RTOL * scale

    def require_admissible(self):
        if not self.admissible:
            raise TwoConvexityViolated(
                f"lambda_1 + lambda_2 = {self.lambdas[0] + self.lambdas[1]:.6g} "
                f"<= 2 kappa = {2 * self.kappa:.6g}"
            )


@dataclass(frozen=True)
class ShapeOperator:
    """Symmetric second fundamental form in an orthonormal frame (metric = id)."""

    n: int
    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.n, self.n):
            raise ValueError("h must be n x n")
        if not np.allclose(h, h.T, atol=1e-12):
            raise ValueError("h must be symmetric to 1e-12")
        object.__setattr__(self, "h", 0.5 * (h + h.T))

    def spectrum(self, kappa: float) -> PrincipalSpectrum:
        lam = np.linalg.eigvalsh(self.h)
        return PrincipalSpectrum(self.n, kappa, lam)


@dataclass(frozen=True)
class SpeedDerivatives:
    value: float
    gradient: np.ndarray       # dG/dh_ij in the input frame
    eigen_gradient: np.ndarray  # gamma_i = dG/dlambda_i


def _pair_gaps(s: PrincipalSpectrum) -> np.ndarray:
    """Matrix of lambda_i + lambda_j - 2 kappa, diagonal unused."""
    lam = s.lambdas
    return lam[:, None] + lam[None, :] - 2.0 * s.kappa


def eval_speed(s: PrincipalSpectrum) -> float:
    """G_kappa as the harmonic-type pair sum. Positive and permutation symmetric."""
    s.require_admissible()
    gaps = _pair_gaps(s)
    iu = np.triu_indices(s.n, k=1)
    return 1.0 / np.sum(1.0 / gaps[iu])


def eval_derivatives(s: PrincipalSpectrum) -> SpeedDerivatives:
    """First variation: gamma_i = G^2 sum_{j != i} 1/(lambda_i+lambda_j-2 kappa)^2.

    The gradient matrix is diagonal in the eigenbasis used for the spectrum,
    so in this frame it is diag(gamma).
    """
    s.require_admissible()
    g = eval_speed(s)
    gaps = _pair_gaps(s)
    np.fill_diagonal(gaps, np.inf)  # diagonal pairs are not part of the sum
    inv2 = 1.0 / gaps**2
    gamma = g * g * inv2.sum(axis=1)
    return SpeedDerivatives(value=g, gradient=np.diag(gamma), eigen_gradient=gamma)


def eval_second_variation(h: ShapeOperator, A: np.ndarray, kappa: float) -> float:
    """d^2/ds^2 G_kappa(h + sA) at s = 0, for symmetric A.

    Evaluated in the eigenbasis of h:

      - G^2 sum_{i != l} sum_{j not in {i,l}}
            [ 1/((l_i+l_j-2k)(l_l+l_j-2k)) ] (1/(l_i+l_j-2k) + 1/(l_l+l_j-2k)) A_il^2
      - 2 G^2 sum_{i<j} (A_ii + A_jj)^2 / (l_i+l_j-2k)^3
      + 2 G^3 ( sum_{i<j} (A_ii + A_jj) / (l_i+l_j-2k)^2 )^2

    Always <= 0; zero exactly when A is a scalar multiple of h - kappa*id.
    The off-diagonal coefficients are continuous across eigenvalue collisions,
    so repeated eigenvalues need no special treatment.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (h.n, h.n):
        raise ValueError("A must be n x n")
    if not np.allclose(A, A.T, atol=1e-12):
        raise ValueError("A must be symmetric")
    lam, Q = np.linalg.eigh(h.h)
    s = PrincipalSpectrum(h.n, kappa, lam)
    s.require_admissible()
    # order of eigh output is ascending, matching the spectrum
    B = Q.T @ A @ Q
    g = eval_speed(s)
    n = h.n
    gaps = lam[:, None] + lam[None, :] - 2.0 * kappa

    off = 0.0
    for i in range(n):
        for l in range(n):
            if l == i or B[i, l] == 0.0:
                continue
            acc = 0.0
            for j in range(n):
                if j == i or j == l:
                    continue
                a = 1.0 / gaps[i, j]
                b = 1.0 / gaps[l, j]
                acc += a * b * (a + b)
            off += acc * B[i, l] ** 2
    diag = np.diag(B)
    iu = np.triu_indices(n, k=1)
    pair_diag = diag[iu[0]] + diag[iu[1]]
    pair_gaps = gaps[iu]
    term2 = np.sum(pair_diag**2 / pair_gaps**3)
    term3 = np.sum(pair_diag / pair_gaps**2)
    return -g * g * off - 2.0 * g * g * term2 + 2.0 * g**3 * term3**2


def cylindrical_quantities(s: PrincipalSpectrum, sigma: float, delta: float):
    """H, G and the pinching quantity f_sigma = G^(sigma-1) (H - c_n (1+delta) G).

    Returns (H, G, f_sigma, f_sigma_plus).
    """
    if not 0.0 < sigma < 0.5:
        raise ValueError("sigma must lie in (0, 1/2)")
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    s.require_admissible()
    g = eval_speed(s)
    H = float(np.sum(s.lambdas))
    f = g ** (sigma - 1.0) * (H - cylindrical_constant(s.n) * (1.0 + delta) * g)
    return H, g, f, max(f, 0.0)


def check_pinching_inequality(s: PrincipalSpectrum):
    """Sharp lower bound on lambda_1 in terms of G, H and kappa:

      (3(n-2)/(n+2)) lambda_1 >= c_n G - H + ((n-1)(n+6)/(n+2)) kappa

    Equality holds exactly on kappa-shifted cylinders (kappa, c, ..., c)+...
    i.e. spectra of the form lambda = (kappa, kappa + c, ..., kappa + c).
    Returns (lhs, rhs, holds).
    """
    s.require_admissible()
    n = s.n
    g = eval_speed(s)
    H = float(np.sum(s.lambdas))
    lhs = 3.0 * (n - 2) / (n + 2) * s.lambdas[0]
    rhs = cylindrical_constant(n) * g - H + (n - 1) * (n + 6) / (n + 2) * s.kappa
    scale = max(1.0, abs(lhs), abs(rhs))
    return lhs, rhs, lhs >= rhs - 1e-12 * scale


def sample_spectra(n: int, kappa: float, count: int, seed: int) -> list[PrincipalSpectrum]:
    """Seeded fuzzing sampler: lambda uniform in [-1, 3]^n, sorted, inadmissible rejected."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        lam = np.sort(rng.uniform(-1.0, 3.0, size=n))
        s = PrincipalSpectrum(n, kappa, lam)
        if s.admissible:
            out.append(s)
    return out


def random_two_nonnegative(n: int, rng) -> np.ndarray:
    """Random symmetric matrix whose eigenvalue sums lambda_i + lambda_j are >= 0
    for i != j (two-nonnegative): built as PSD plus a bounded smallest eigenvalue shift."""
    M = rng.standard_normal((n, n))
    A = M @ M.T  # PSD
    w = np.linalg.eigvalsh(A)
    # shift down by at most half the second-smallest eigenvalue keeps
    # lambda_1 + lambda_2 >= 0
    shift = rng.uniform(0.0, 0.5 * max(w[1], 0.0))
    return A - shift * np.eye(n)


@dataclass
class StructureReport:
    positivity: bool = False
    boundary_vanishing: bool = False
    homogeneity: bool = False
    monotonicity: bool = False
    concavity: bool = False
    observed_gradient_sup: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return (self.positivity and self.boundary_vanishing and self.homogeneity
                and self.monotonicity and self.concavity)


def check_structure_conditions(s: PrincipalSpectrum, trials: int, seed: int) -> StructureReport:
    """Verify the defining structure conditions of the speed at one spectrum:
    positivity, vanishing at the cone boundary, 1-homogeneity in lambda - kappa,
    0 <= dG(h + tA)/dt <= C tr(A) for two-nonnegative A, and concavity.
    """
    s.require_admissible()
    rng = np.random.default_rng(seed)
    rep = StructureReport()
    g = eval_speed(s)
    kap = s.kappa

    rep.positivity = g > 0.0
    if not rep.positivity:
        rep.failures.append(("positivity", g))

    # walk the spectrum toward the boundary lambda_1 + lambda_2 -> 2 kappa
    lam = s.lambdas.copy()
    ok = True
    prev = g
    for c in np.geomspace(1.0, 1e-8, 30)[1:]:
        lam_c = kap + c * (lam - kap)
        sc = PrincipalSpectrum(s.n, kap, lam_c)
        if not sc.admissible:
            break
        gc = eval_speed(sc)
        if gc > prev + 1e-14:
            ok = False
        prev = gc
    rep.boundary_vanishing = ok and prev < 1e-6
    if not rep.boundary_vanishing:
        rep.failures.append(("boundary_vanishing", prev))

    ok = True
    for c in (0.5, 2.0, 10.0):
        lam_c = kap + c * (lam - kap)
        gc = eval_speed(PrincipalSpectrum(s.n, kap, lam_c))
        if abs(gc - c * g) > 1e-10 * max(1.0, abs(c * g)):
            ok = False
            rep.failures.append(("homogeneity", c, gc, c * g))
    rep.homogeneity = ok

    d = eval_derivatives(s)
    ok = True
    sup = 0.0
    for _ in range(max(trials, 1)):
        A = random_two_nonnegative(s.n, rng)
        lamA, QA = np.linalg.eigh(A)
        # directional derivative in the eigenbasis of the spectrum: the
        # gradient is diag(gamma), so dG = sum_i gamma_i A_ii for A expressed
        # in that basis; sample A already in this basis.
        dG = float(np.sum(d.eigen_gradient * np.diag(A)))
        trA = float(np.trace(A))
        if dG < -1e-12 * max(1.0, abs(trA)):
            ok = False
            rep.failures.append(("monotonicity_lower", dG))
        if trA > 1e-12:
            sup = max(sup, dG / trA)
        del lamA, QA
    rep.observed_gradient_sup = max(sup, float(np.max(d.eigen_gradient)))
    rep.monotonicity = ok and bool(np.all(d.eigen_gradient > 0.0))
    if not np.all(d.eigen_gradient > 0.0):
        rep.failures.append(("monotonicity_gamma", d.eigen_gradient.tolist()))

    h = ShapeOperator(s.n, np.diag(s.lambdas))
    ok = True
    for _ in range(max(trials, 1)):
        M = rng.standard_normal((s.n, s.n))
        A = 0.5 * (M + M.T)
        v = eval_second_variation(h, A, kap)
        if v > 1e-10 * max(1.0, g):
            ok = False
            rep.failures.append(("concavity", v))
    rep.concavity = ok
    return rep


def speed_profile(lam_p, lam_r, n: int, kappa: float):
    """Vectorized G_kappa for the rotationally symmetric spectrum
    (lam_p, lam_r x (n-1)). Pair sum splits into (n-1) mixed pairs and
    (n-1)(n-2)/2 rotational pairs. Inadmissible entries yield nan."""
    lam_p = np.asarray(lam_p, dtype=float)
    lam_r = np.asarray(lam_r, dtype=float)
    gap_m = lam_p + lam_r - 2.0 * kappa
    gap_r = 2.0 * lam_r - 2.0 * kappa
    # lambda_2 of the multiset {lam_p, lam_r x (n-1)} is always lam_r
    # since the rotational eigenvalue has multiplicity n-1 >= 2
    gap_min = np.minimum(lam_p, lam_r) + lam_r - 2.0 * kappa
    scale = np.maximum(1.0, np.abs(np.maximum(lam_p, lam_r)))
    ok = gap_min > ADMISSIBILITY_RTOL * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = (n - 1) / gap_m + ((n - 1) * (n - 2) / 2.0) / gap_r
        g = np.where(ok, 1.0 / inv, np.nan)
    return g


def gamma_profile(lam_p, lam_r, n: int, kappa: float, G=None):
    """Vectorized eigen-gradient for the rotationally symmetric spectrum.
    Returns (gamma_p, gamma_r, gamma_sum) where gamma_r is the per-direction
    rotational component (n-1 equal copies). Pass G to reuse a computed
    speed array."""
    g = speed_profile(lam_p, lam_r, n, kappa) if G is None else G
    gap_m = np.asarray(lam_p, dtype=float) + lam_r - 2.0 * kappa
    gap_r = 2.0 * np.asarray(lam_r, dtype=float) - 2.0 * kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        gp = g * g * (n - 1) / gap_m**2
        gr = g * g * (1.0 / gap_m**2 + (n - 2) / gap_r**2)
    return gp, gr, gp + (n - 1) * gr


def finite_difference_speed_gradient(s: PrincipalSpectrum, step: float = 1e-6) -> np.ndarray:
    """Central-difference oracle for gamma_i, independent of eval_derivatives."""
    lam = s.lambdas
    out = np.zeros(s.n)
    for i in range(s.n):
        lp = lam.copy()
        lp[i] += step
        lm = lam.copy()
        lm[i] -= step
        gp = eval_speed(PrincipalSpectrum(s.n, s.kappa, lp))
        gm = eval_speed(PrincipalSpectrum(s.n, s.kappa, lm))
        out[i] = (gp - gm) / (2.0 * step)
    return out


def finite_difference_second_variation(h: ShapeOperator, A: np.ndarray, kappa: float,
                                       step: float = 1e-4) -> float:
    """5-point central second difference of s -> G_kappa(h + sA), an oracle
    independent of the closed-form second variation."""
    A = np.asarray(A, dtype=float)

    def f(t):
        return eval_speed(ShapeOperator(h.n, h.h + t * A).spectrum(kappa))

    return (-f(2 * step) + 16 * f(step) - 30 * f(0.0)
            + 16 * f(-step) - f(-2 * step)) / (12.0 * step * step)

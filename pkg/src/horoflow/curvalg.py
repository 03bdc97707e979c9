"""Symmetric-function algebra of principal curvature spectra.

The flow speed is F = H_m^beta, with H_m the normalized m-th elementary
symmetric polynomial of the principal curvatures.  This module owns that
algebra: evaluation, first and second derivatives in the spectrum, the
shifted (h-convexity) invariants, and the constructive pinching constants
(epsilon0, C*) obtained by balancing a gradient floor against a Hessian
ceiling over the pinching cone.

Every evaluator broadcasts over a leading batch axis, so the same code
serves single spectra, whole grids, and the 1e5-point sampling oracles.

Conventions.  Spectra are length-n vectors in the positive cone; shifted
quantities subtract the ambient constant a = sqrt(-kappa) componentwise.
The pinching cone at parameter eps is

    {lambda : min_i lambda_i >= eps * (lambda_1 + ... + lambda_n) > 0},

a genuine cone, intersected with the unit sphere for sampling.  Shifted
spectra with min lambda_tilde >= eps * sum lambda_tilde automatically land
in it, which is what makes the sampled bounds valid along the flow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    FeasibilityError,
    ParabolicityLostError,
    RootFindingError,
    SingularityError,
)
from .hypergeom import AmbientCurvature
from .parallel import map_rows

logger = logging.getLogger(__name__)

# Difference quotients of the gradient switch to their coalescence limit
# below this relative eigenvalue gap.
EIGEN_COALESCE_RTOL = 1.0e-8

# Fallback pinching parameter when the balance function has no sign change
# (linear speed: the Hessian ceiling vanishes identically).
DEGENERATE_EPSILON_FLOOR = 1.0e-2

DEFAULT_SAMPLES = 100_000
BISECTION_TOL = 1.0e-8
_SLICE_VALIDATION_SAMPLES = 200_000
_SLICE_VALIDATION_RTOL = 1.0e-3


@dataclass(frozen=True)
class FlowParams:
    """Dimension, curvature order, speed power, and ambient curvature."""

    n: int
    m: int
    beta: float
    ac: AmbientCurvature

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise DomainError(f"hypersurface dimension n must be an integer >= 2, got {self.n}")
        if not isinstance(self.m, int) or not 1 <= self.m <= self.n:
            raise DomainError(f"curvature order m must be an integer in [1, n], got {self.m}")
        if not np.isfinite(self.beta) or self.beta <= 0.0:
            raise DomainError(f"speed power beta must be positive, got {self.beta}")
        if self.m * self.beta < 1.0 - 1e-15:
            raise DomainError(
                f"degree m*beta must be >= 1 for the flow to contract properly, got {self.m * self.beta}"
            )

    @property
    def mbeta(self) -> float:
        return self.m * self.beta

    @property
    def a(self) -> float:
        return self.ac.a

    @property
    def binom(self) -> int:
        # Normalization H_m = E_m / C(n, m).
        return math.comb(self.n, self.m)


@dataclass(frozen=True)
class CurvatureSpectrum:
    """A principal-curvature spectrum, sorted ascending, with its shift."""

    values: np.ndarray
    shifted: np.ndarray

    @classmethod
    def from_values(cls, lam, ac: AmbientCurvature) -> "CurvatureSpectrum":
        lam = np.sort(np.asarray(lam, dtype=float), axis=-1)
        return cls(values=lam, shifted=lam - ac.a)

    @property
    def is_h_convex(self):
        return np.min(self.shifted, axis=-1) > 0.0


def _as_batch(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0 or lam.shape[-1] < 2:
        raise DomainError("a spectrum needs at least two principal curvatures")
    return lam


def _esym_table(lam: np.ndarray) -> np.ndarray:
    """Return all elementary symmetric values E_0..E_n along the last axis.

    One-root-at-a-time recurrence: exact in exact arithmetic, stable in
    floating point for the small n used here.
    """
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,), dtype=float)
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        for k in range(min(i + 1, n), 0, -1):
            e[..., k] += li * e[..., k - 1]
    return e


def _esym_drop(e: np.ndarray, li: np.ndarray, upto: int) -> np.ndarray:
    """Synthetic division: elementary symmetric values of the set without one root."""
    out = np.zeros(li.shape + (upto + 1,), dtype=float)
    out[..., 0] = 1.0
    for k in range(1, upto + 1):
        out[..., k] = e[..., k] - li * out[..., k - 1]
    return out


def elementary_symmetric(lam, k: int):
    """Return E_k(lambda) summed over all k-subsets of the last axis."""
    lam = _as_batch(lam)
    n = lam.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"elementary symmetric order k={k} outside [0, {n}]")
    return _esym_table(lam)[..., k]


def mean_curvature_m(lam, params: FlowParams):
    """Return H_m = E_m(lambda) / C(n, m)."""
    lam = _as_batch(lam)
    if lam.shape[-1] != params.n:
        raise DomainError(f"spectrum length {lam.shape[-1]} != n = {params.n}")
    return elementary_symmetric(lam, params.m) / params.binom


def speed(lam, params: FlowParams):
    """Return F = H_m^beta; parabolicity demands H_m > 0 everywhere."""
    hm = mean_curvature_m(lam, params)
    bad = ~(hm > 0.0)
    if np.any(bad):
        idx = int(np.argmax(np.ravel(bad)))
        raise ParabolicityLostError(
            f"H_m <= 0 (min {np.min(hm):.6g}); speed undefined", node_index=idx
        )
    return hm**params.beta


def speed_gradient(lam, params: FlowParams):
    """Return dF/dlambda_i, shape (..., n); positive on the positive cone."""
    lam = _as_batch(lam)
    n = params.n
    e = _esym_table(lam)
    hm = e[..., params.m] / params.binom
    if np.any(~(hm > 0.0)):
        raise ParabolicityLostError(f"H_m <= 0 (min {np.min(hm):.6g}); gradient undefined")
    prefactor = params.beta * hm ** (params.beta - 1.0) / params.binom
    grad = np.empty_like(lam)
    for i in range(n):
        reduced = _esym_drop(e, lam[..., i], params.m - 1)
        grad[..., i] = prefactor * reduced[..., params.m - 1]
    return grad


def speed_second_partials(lam, params: FlowParams):
    """Return the matrix d^2F/dlambda_i dlambda_j, shape (..., n, n)."""
    lam = _as_batch(lam)
    n, m, beta = params.n, params.m, params.beta
    e = _esym_table(lam)
    hm = e[..., m] / params.binom
    if np.any(~(hm > 0.0)):
        raise ParabolicityLostError(f"H_m <= 0 (min {np.min(hm):.6g}); Hessian undefined")
    dhm = np.empty_like(lam)
    reduced_tables = []
    for i in range(n):
        reduced = _esym_drop(e, lam[..., i], m - 1)
        reduced_tables.append(reduced)
        dhm[..., i] = reduced[..., m - 1] / params.binom

    out = np.zeros(lam.shape + (n,), dtype=float)
    # Rank-one part from the outer power; vanishes identically when beta = 1.
    if beta != 1.0:
        coef = beta * (beta - 1.0) * hm ** (beta - 2.0)
        out += coef[..., None, None] * dhm[..., :, None] * dhm[..., None, :]
    # Mixed second derivatives of H_m itself: remove two distinct roots.
    if m >= 2:
        coef = beta * hm ** (beta - 1.0) / params.binom
        for i in range(n):
            for j in range(i + 1, n):
                twice_reduced = _esym_drop(reduced_tables[i], lam[..., j], m - 2)
                val = coef * twice_reduced[..., m - 2]
                out[..., i, j] += val
                out[..., j, i] += val
    return out


def _difference_quotients(lam, grad, second):
    """Return Q_ij = (dF_i - dF_j)/(lambda_i - lambda_j) with coalescence limits."""
    gap = lam[..., :, None] - lam[..., None, :]
    scale = np.linalg.norm(lam, axis=-1)[..., None, None]
    near = np.abs(gap) < EIGEN_COALESCE_RTOL * np.maximum(scale, 1e-300)
    diff = grad[..., :, None] - grad[..., None, :]
    sec_diag = np.diagonal(second, axis1=-2, axis2=-1)
    # Limit of the quotient as eigenvalues coalesce, symmetrized in (i, j).
    limit = 0.5 * (sec_diag[..., :, None] + sec_diag[..., None, :]) - second
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = np.where(near, 0.0, diff) / np.where(near, 1.0, gap)
    q = np.where(near, limit, quotient)
    n = lam.shape[-1]
    eye = np.eye(n, dtype=bool)
    return np.where(eye, 0.0, q)


def speed_hessian_quadform(lam, params: FlowParams, B):
    """Return the second derivative of F at W = diag(lambda) in direction B.

    B must be symmetric (..., n, n).  The value combines the Hessian in the
    eigenvalues on the diagonal of B with difference quotients of the
    gradient against the off-diagonal entries.
    """
    lam = _as_batch(lam)
    B = np.asarray(B, dtype=float)
    second = speed_second_partials(lam, params)
    grad = speed_gradient(lam, params)
    d = np.diagonal(B, axis1=-2, axis2=-1)
    term_diag = np.einsum("...ij,...i,...j->...", second, d, d)
    q = _difference_quotients(lam, grad, second)
    term_off = np.einsum("...ij,...ij->...", q, B * B)
    return term_diag + term_off


@dataclass(frozen=True)
class TildeQuantities:
    """Shifted invariants: trace, product, their ratio, and squared norm."""

    htilde: np.ndarray
    ktilde: np.ndarray
    qtilde: np.ndarray
    atilde_sq: np.ndarray


def tilde_quantities(lam, params: FlowParams) -> TildeQuantities:
    """Return the shifted invariants of spectra (requires sum of shifts != 0)."""
    lam = _as_batch(lam)
    shifted = lam - params.a
    htilde = np.sum(shifted, axis=-1)
    ktilde = np.prod(shifted, axis=-1)
    atilde_sq = np.sum(shifted * shifted, axis=-1)
    if np.any(htilde == 0.0):
        raise SingularityError("shifted trace vanished; pinching ratio undefined")
    qtilde = ktilde / htilde**params.n
    return TildeQuantities(htilde=htilde, ktilde=ktilde, qtilde=qtilde, atilde_sq=atilde_sq)


def pinching_predicate(lam, params: FlowParams, c_star: float):
    """Return the boolean field K_tilde > c_star * H_tilde^n > 0."""
    lam = _as_batch(lam)
    shifted = lam - params.a
    htilde = np.sum(shifted, axis=-1)
    ktilde = np.prod(shifted, axis=-1)
    return (htilde > 0.0) & (ktilde > c_star * htilde**params.n)


# ---------------------------------------------------------------------------
# Pinching constants: gap bound, sampled gradient floor / Hessian ceiling,
# and the balance point epsilon0 with its preserved-ratio constant C*.
# ---------------------------------------------------------------------------


def gap_bound(eps, n: int):
    """Return the inverse-spectrum gap bound as a function of eps in (0, 1/n].

    Piecewise rational with a knot at 1/(2(n-1)); continuous there, strictly
    decreasing, blowing up at 0+ and vanishing at 1/n.
    """
    if n < 2:
        raise DomainError("gap bound needs n >= 2")
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0.0) or np.any(eps > 1.0 / n + 1e-15):
        raise DomainError(f"gap bound defined for eps in (0, 1/{n}]")
    knot = 1.0 / (2.0 * (n - 1))
    sqrt_n = math.sqrt(n)
    low = sqrt_n * (1.0 - eps * n) / eps
    high = sqrt_n * (n - 1) * (1.0 - n * eps) / (1.0 - (n - 1) * eps)
    return np.where(eps <= knot, low, high)


class ConeSampler:
    """Seeded sample cloud on the unit cross-section of the pinching cone.

    The same Gaussian draw is reused for every eps (common random numbers),
    so sampled bounds vary smoothly in eps and bisection on their balance
    is well posed.  Projection shifts a point along the umbilic direction
    just enough to satisfy the constraint, which also densifies the cone
    boundary where the extrema live.
    """

    def __init__(self, n: int, n_samples: int = DEFAULT_SAMPLES, seed: int = 0):
        if n < 2:
            raise DomainError("sampler needs n >= 2")
        if n_samples < 100:
            raise DomainError("sampler needs at least 100 points")
        self.n = n
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self._base = np.abs(rng.standard_normal((self.n_samples, n)))

    def _deterministic_extras(self, eps: float) -> np.ndarray:
        """Boundary vertices where one or all-but-one coordinates sit on the constraint."""
        n = self.n
        rows = [np.full(n, 1.0 / math.sqrt(n))]
        if eps < 1.0 / n:
            lo_single = eps * (n - 1) / (1.0 - eps)
            for i in range(n):
                v = np.ones(n)
                v[i] = lo_single
                rows.append(v / np.linalg.norm(v))
            if n > 2 and eps < 1.0 / (n - 1):
                hi = eps / (1.0 - (n - 1) * eps)
                for i in range(n):
                    v = np.full(n, hi)
                    v[i] = 1.0
                    rows.append(v / np.linalg.norm(v))
        return np.array(rows)

    def points(self, eps: float) -> np.ndarray:
        """Return unit-norm feasible points for the given eps."""
        n = self.n
        if not 0.0 < eps <= 1.0 / n + 1e-15:
            raise DomainError(f"eps = {eps} outside (0, 1/{n}]")
        if 1.0 - n * eps < 1e-12:
            # The cross-section degenerates to the umbilic point.
            return np.full((1, n), 1.0 / math.sqrt(n))
        pts = project_to_cone(self._base, eps)
        pts = np.concatenate([pts, self._deterministic_extras(eps)], axis=0)
        total = pts.sum(axis=1)
        feasible = (pts.min(axis=1) >= eps * total - 1e-12) & (total > 0.0)
        pts = pts[feasible]
        if pts.shape[0] == 0:
            raise FeasibilityError(f"no feasible samples on the cone at eps = {eps}")
        return pts


def project_to_cone(x: np.ndarray, eps: float) -> np.ndarray:
    """Shift rows along the umbilic direction onto the cone, then normalize."""
    x = np.maximum(np.atleast_2d(np.asarray(x, dtype=float)), 0.0)
    n = x.shape[-1]
    total = x.sum(axis=-1)
    lowest = x.min(axis=-1)
    shift = np.maximum(0.0, (eps * total - lowest) / (1.0 - n * eps))
    y = x + shift[..., None]
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    # A zero row can only come from an all-zero input; replace by umbilic.
    bad = norm[..., 0] <= 0.0
    if np.any(bad):
        y[bad] = 1.0
        norm = np.linalg.norm(y, axis=-1, keepdims=True)
    return y / norm


@dataclass(frozen=True)
class SampledBound:
    """A sampled extremum with the resolution it was computed at."""

    value: float
    argpoint: np.ndarray
    n_points: int
    refined: bool


def _coordinate_descent(objective, y0: np.ndarray, eps: float, minimize: bool) -> tuple[np.ndarray, float]:
    """Polish a sampled extremum by projected coordinate descent on the cone."""
    y = np.array(y0, dtype=float)
    best = float(objective(y[None, :])[0])
    sign = 1.0 if minimize else -1.0
    step = 0.25
    n = y.shape[0]
    while step > 1e-9:
        improved = False
        for j in range(n):
            for direction in (1.0, -1.0):
                trial = y.copy()
                trial[j] += direction * step
                trial = project_to_cone(trial, eps)[0]
                val = float(objective(trial[None, :])[0])
                if sign * val < sign * best - 1e-15:
                    y, best, improved = trial, val, True
        if not improved:
            step *= 0.5
    return y, best


def gradient_floor(eps: float, params: FlowParams, sampler: ConeSampler) -> SampledBound:
    """Return the sampled minimum of the speed gradient's components on the cone.

    This is the constructive constant in the lower bound
    dF_i(lambda) >= floor * |lambda|^{m beta - 1} on pinched spectra;
    increasing in eps, and exactly 1/n for the linear speed (m = beta = 1).
    """
    if sampler.n != params.n:
        raise DomainError("sampler dimension does not match params.n")
    pts = sampler.points(eps)

    def batch_min_component(block):
        return np.min(speed_gradient(block, params), axis=-1)

    vals = map_rows(batch_min_component, pts)
    k = int(np.argmin(vals))
    y, best = _coordinate_descent(batch_min_component, pts[k], eps, minimize=True)
    if best > vals[k]:
        y, best = pts[k], float(vals[k])
    return SampledBound(value=best, argpoint=y, n_points=pts.shape[0], refined=True)


def _quadform_operator_norm(lam: np.ndarray, params: FlowParams) -> np.ndarray:
    """Return sup over unit-Frobenius symmetric B of |quadform(B, B)| per spectrum.

    The quadratic form block-diagonalizes: an n x n block of second partials
    acting on diag(B), plus independent 1-D blocks with the difference
    quotients on each off-diagonal entry.  The operator norm is therefore
    the max of the spectral radius of the small block and the largest
    absolute quotient; no sampling over B is needed.
    """
    second = speed_second_partials(lam, params)
    grad = speed_gradient(lam, params)
    q = _difference_quotients(lam, grad, second)
    q_max = np.max(np.abs(q), axis=(-2, -1))
    eig_max = np.max(np.abs(_symmetric_eigenvalues(second)), axis=-1)
    return np.maximum(eig_max, q_max)


def _symmetric_eigenvalues(mats: np.ndarray) -> np.ndarray:
    """Eigenvalues of small symmetric matrices, closed form for n = 2, 3."""
    n = mats.shape[-1]
    if n == 2:
        a = mats[..., 0, 0]
        d = mats[..., 1, 1]
        b = mats[..., 0, 1]
        half_tr = 0.5 * (a + d)
        disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b * b, 0.0))
        return np.stack([half_tr - disc, half_tr + disc], axis=-1)
    if n == 3:
        return _sym_eig3(mats)
    return np.linalg.eigvalsh(mats)


def _sym_eig3(mats: np.ndarray) -> np.ndarray:
    """Trigonometric closed form for symmetric 3x3 eigenvalues."""
    a00 = mats[..., 0, 0]
    a11 = mats[..., 1, 1]
    a22 = mats[..., 2, 2]
    a01 = mats[..., 0, 1]
    a02 = mats[..., 0, 2]
    a12 = mats[..., 1, 2]
    p1 = a01**2 + a02**2 + a12**2
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    safe_p = np.where(p > 0.0, p, 1.0)
    b00 = (a00 - q) / safe_p
    b11 = (a11 - q) / safe_p
    b22 = (a22 - q) / safe_p
    b01 = a01 / safe_p
    b02 = a02 / safe_p
    b12 = a12 / safe_p
    det_b = (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    out = np.stack([e3, e2, e1], axis=-1)
    return np.where(p[..., None] > 0.0, out, np.stack([q, q, q], axis=-1))


def hessian_ceiling(eps: float, params: FlowParams, sampler: ConeSampler) -> SampledBound:
    """Return the sampled supremum of the quadform operator norm on the cone.

    Decreasing in eps; identically zero for the linear speed m = beta = 1.
    """
    if sampler.n != params.n:
        raise DomainError("sampler dimension does not match params.n")
    pts = sampler.points(eps)

    def batch_norm(block):
        return _quadform_operator_norm(block, params)

    vals = map_rows(batch_norm, pts)
    k = int(np.argmax(vals))
    y, best = _coordinate_descent(batch_norm, pts[k], eps, minimize=False)
    if best < vals[k]:
        y, best = pts[k], float(vals[k])
    return SampledBound(value=best, argpoint=y, n_points=pts.shape[0], refined=True)


def slice_constant(eps: float, n: int) -> float:
    """Return the maximum of the pinching ratio on the boundary slice.

    Maximizing K_tilde/H_tilde^n subject to lambda_tilde_1 = eps * H_tilde
    puts the remaining shifts equal, giving eps*((1-eps)/(n-1))^(n-1).
    Equals 1/n^n at eps = 1/n.
    """
    if not 0.0 < eps <= 1.0 / n:
        raise DomainError(f"slice constant defined for eps in (0, 1/{n}]")
    return float(eps * ((1.0 - eps) / (n - 1)) ** (n - 1))


def slice_constant_bruteforce(eps: float, n: int, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Brute-force the slice maximum by sampling the constrained simplex."""
    if not 0.0 < eps <= 1.0 / n:
        raise DomainError(f"slice constant defined for eps in (0, 1/{n}]")
    rng = np.random.default_rng(seed)
    rest = rng.dirichlet(np.ones(n - 1), size=n_samples)
    first = np.full((n_samples, 1), eps / (1.0 - eps))
    shifted = np.concatenate([first, rest], axis=1)
    htilde = shifted.sum(axis=1)
    qtilde = shifted.prod(axis=1) / htilde**n
    return float(np.max(qtilde))


@dataclass(frozen=True)
class PinchingConstants:
    """The balance point epsilon0, the preserved ratio C*, and the tables behind them."""

    epsilon0: float
    c_star: float
    eps_grid: np.ndarray
    gap_table: np.ndarray
    grad_floor_table: np.ndarray
    hess_ceiling_table: np.ndarray
    n_samples: int
    seed: int
    degenerate: bool = False


def balance_function(eps: float, params: FlowParams, sampler: ConeSampler) -> float:
    """Return the pinching balance (n-1)/(2 sqrt n) * floor * eps^2 - ceiling * gap."""
    n = params.n
    w1 = gradient_floor(eps, params, sampler).value
    w2 = hessian_ceiling(eps, params, sampler).value
    coef = (n - 1) / (2.0 * math.sqrt(n))
    return coef * w1 * eps**2 - w2 * float(gap_bound(eps, n))


def solve_pinching_constants(
    params: FlowParams,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    eps_floor: float = DEGENERATE_EPSILON_FLOOR,
    table_points: int = 17,
    tol: float = BISECTION_TOL,
) -> PinchingConstants:
    """Solve for the unique balance point epsilon0 and derive C*.

    The balance function is negative near 0+ (the gap bound blows up) and
    positive near 1/n (the gap bound vanishes) whenever the Hessian ceiling
    is nonzero; bisection between the first tabulated sign change pins the
    root to `tol`.  If the ceiling vanishes identically (linear speed), the
    balance is positive throughout and epsilon0 falls back to `eps_floor`.
    """
    n = params.n
    sampler = ConeSampler(n, n_samples=n_samples, seed=seed)
    eps_hi = 1.0 / n
    eps_grid = np.linspace(eps_hi / 64.0, eps_hi * (1.0 - 1e-9), table_points)
    gap_table = gap_bound(eps_grid, n)
    grad_floor_table = np.array([gradient_floor(e, params, sampler).value for e in eps_grid])
    hess_ceiling_table = np.array([hessian_ceiling(e, params, sampler).value for e in eps_grid])
    coef = (n - 1) / (2.0 * math.sqrt(n))
    balance = coef * grad_floor_table * eps_grid**2 - hess_ceiling_table * gap_table

    degenerate = False
    if balance[0] > 0.0:
        if np.any(balance <= 0.0):
            raise RootFindingError("pinching balance is not increasing across the table")
        logger.info(
            "pinching balance positive on all of (0, 1/n); using floor epsilon0 = %g", eps_floor
        )
        epsilon0 = float(eps_floor)
        degenerate = True
    else:
        flips = np.nonzero(balance > 0.0)[0]
        if flips.size == 0:
            raise RootFindingError("pinching balance never becomes positive below 1/n")
        hi_idx = int(flips[0])
        lo = float(eps_grid[hi_idx - 1]) if hi_idx > 0 else float(eps_grid[0]) / 2.0
        hi = float(eps_grid[hi_idx])
        f_lo = balance_function(lo, params, sampler)
        while f_lo > 0.0:
            # Guard: the true sign change sits below the first table point.
            hi, lo = lo, lo / 2.0
            f_lo = balance_function(lo, params, sampler)
            if lo < 1e-12:
                raise RootFindingError("failed to bracket the pinching balance root")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if balance_function(mid, params, sampler) <= 0.0:
                lo = mid
            else:
                hi = mid
        epsilon0 = 0.5 * (lo + hi)

    c_star = slice_constant(epsilon0, n)
    brute = slice_constant_bruteforce(
        epsilon0, n, n_samples=_SLICE_VALIDATION_SAMPLES, seed=seed + 1
    )
    if not math.isclose(c_star, brute, rel_tol=_SLICE_VALIDATION_RTOL):
        raise RootFindingError(
            f"slice constant {c_star:.8g} disagrees with brute force {brute:.8g}"
        )
    if not 0.0 < c_star < 1.0 / n**n:
        raise RootFindingError(f"C* = {c_star:.8g} outside (0, 1/n^n)")
    logger.info(
        "pinching constants: epsilon0 = %.8g, C* = %.8g (degenerate=%s)",
        epsilon0,
        c_star,
        degenerate,
    )
    return PinchingConstants(
        epsilon0=float(epsilon0),
        c_star=float(c_star),
        eps_grid=eps_grid,
        gap_table=gap_table,
        grad_floor_table=grad_floor_table,
        hess_ceiling_table=hess_ceiling_table,
        n_samples=int(n_samples),
        seed=int(seed),
        degenerate=degenerate,
    )

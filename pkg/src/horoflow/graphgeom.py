"""Radial-graph geometry over the round sphere.

A closed hypersurface star-shaped about the chart center is the image of
X(u) = exp_center(r(u) u) for a positive function r on the unit n-sphere.
This module discretizes r, differentiates it covariantly, and assembles the
induced metric, second fundamental form, Weingarten map, principal
curvatures, support function, and quadrature weights at every node.

Two grid modes:

* axisymmetric (the workhorse): r = r(theta) on a uniform colatitude grid
  including both poles, any hypersurface dimension n >= 2.  Everything is
  diagonal in the adapted orthonormal frame (theta direction plus n-1
  equivalent azimuthal directions), so no eigensolves are needed.
* full2d: n = 2 only, a latitude-longitude grid cell-centered in theta
  (no node sits on a pole) with Fourier-spectral derivatives in phi.

Frame convention: all per-node tensors (Dr, D2r, g, h, ...) are expressed
in an orthonormal frame of the round sphere, so the round metric is the
identity and raising/lowering sphere indices is free.  Determinant factors
of the coordinate metric live entirely in the quadrature weights.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .curvalg import FlowParams, speed
from .errors import DomainError, HoroflowError
from .hypergeom import AmbientCurvature

logger = logging.getLogger(__name__)

MODES = ("axisymmetric", "full2d")
MIN_NODES_THETA = 16
# Number of cells adjacent to each pole where the azimuthal curvature term
# cot(theta) r' is replaced by its pole limit r''.
POLE_REGULARIZATION_CELLS = 2

SNAPSHOT_MAGIC = "# horoflow-grid v1"
_MODE_TAGS = {"axisymmetric": "axisym", "full2d": "full2d"}
_TAG_MODES = {v: k for k, v in _MODE_TAGS.items()}


def _sphere_area(dim: int) -> float:
    """Total measure of the round unit sphere S^dim."""
    return 2.0 * math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0)


@dataclass(frozen=True)
class GridSpec:
    """Static discretization data shared by every state on the same grid."""

    mode: str
    n: int
    n_theta: int
    n_phi: int | None
    theta: np.ndarray
    phi: np.ndarray | None
    weights: np.ndarray
    spacing_theta: float
    spacing_phi: float | None

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, ...]:
        if self.mode == "axisymmetric":
            return (self.n_theta,)
        return (self.n_theta, self.n_phi)


def make_grid(mode: str, n: int, n_theta: int, n_phi: int | None = None) -> GridSpec:
    """Build a grid specification with precomputed nodes and quadrature weights."""
    if mode not in MODES:
        raise DomainError(f"unknown grid mode {mode!r}; expected one of {MODES}")
    if n < 2:
        raise DomainError(f"hypersurface dimension n must be >= 2, got {n}")
    if n_theta < MIN_NODES_THETA:
        raise DomainError(f"n_theta must be >= {MIN_NODES_THETA}, got {n_theta}")

    if mode == "axisymmetric":
        h = math.pi / (n_theta - 1)
        theta = np.linspace(0.0, math.pi, n_theta)
        trap = np.ones(n_theta)
        trap[0] = trap[-1] = 0.5
        weights = _sphere_area(n - 1) * np.sin(theta) ** (n - 1) * h * trap
        return GridSpec(
            mode=mode,
            n=n,
            n_theta=n_theta,
            n_phi=None,
            theta=theta,
            phi=None,
            weights=weights,
            spacing_theta=h,
            spacing_phi=None,
        )

    if n != 2:
        raise DomainError("full2d mode is only defined for n = 2")
    if n_phi is None or n_phi < 8 or n_phi % 2 != 0:
        raise DomainError("full2d needs an even n_phi >= 8 (pole ghosts shift by pi)")
    h_t = math.pi / n_theta
    theta = (np.arange(n_theta) + 0.5) * h_t
    h_p = 2.0 * math.pi / n_phi
    phi = np.arange(n_phi) * h_p
    weights = (np.sin(theta)[:, None] * np.ones(n_phi)[None, :] * h_t * h_p).ravel()
    return GridSpec(
        mode=mode,
        n=2,
        n_theta=n_theta,
        n_phi=n_phi,
        theta=theta,
        phi=phi,
        weights=weights,
        spacing_theta=h_t,
        spacing_phi=h_p,
    )


@dataclass(frozen=True)
class GraphState:
    """A radial graph at a moment in time: r > 0 on the grid's natural shape."""

    t: float
    grid: GridSpec
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.shape != self.grid.shape:
            raise DomainError(f"state shape {r.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(r)):
            raise DomainError("radial profile contains non-finite values")
        if np.any(r <= 0.0):
            raise DomainError("radial profile must be positive (graph over the chart center)")
        object.__setattr__(self, "r", r)

    @property
    def r_flat(self) -> np.ndarray:
        return self.r.reshape(-1)


def sphere_state(grid: GridSpec, r0: float, t: float = 0.0) -> GraphState:
    """Return the geodesic sphere of radius r0 as a state."""
    if r0 <= 0.0:
        raise DomainError("sphere radius must be positive")
    return GraphState(t=t, grid=grid, r=np.full(grid.shape, float(r0)))


def perturbed_sphere_state(
    grid: GridSpec,
    r0: float,
    mode_l: int,
    amplitude: float,
    mode_phi: int = 0,
    t: float = 0.0,
) -> GraphState:
    """Return r = r0 + amplitude * (smooth degree-l profile), optionally with
    azimuthal dependence (full2d only, via an associated Legendre factor)."""
    if r0 <= 0.0:
        raise DomainError("base radius must be positive")
    if mode_l < 2:
        raise DomainError("perturbation mode must have l >= 2 (l < 2 shifts or translates)")
    if abs(amplitude) / r0 > 0.2:
        raise DomainError("relative perturbation amplitude capped at 0.2")
    if mode_phi != 0 and grid.mode != "full2d":
        raise DomainError("azimuthal perturbations require a full2d grid")
    if mode_phi == 0:
        profile = np.cos(mode_l * grid.theta)
        if grid.mode == "full2d":
            profile = np.repeat(profile[:, None], grid.n_phi, axis=1)
    else:
        if mode_phi > mode_l:
            raise DomainError("azimuthal order cannot exceed l")
        from scipy.special import lpmv

        leg = lpmv(mode_phi, mode_l, np.cos(grid.theta))
        leg = leg / np.max(np.abs(leg))
        profile = leg[:, None] * np.cos(mode_phi * grid.phi)[None, :]
    return GraphState(t=t, grid=grid, r=r0 + amplitude * profile)


# ---------------------------------------------------------------------------
# Covariant derivatives on the round sphere
# ---------------------------------------------------------------------------


def _axisym_scalar_derivatives(grid: GridSpec, r: np.ndarray):
    """Return (r', r'', azimuthal Hessian component) on the colatitude grid.

    Ghost nodes reflect across each pole (smooth even extension), closing the
    Neumann conditions r'(0) = r'(pi) = 0 exactly.  The azimuthal component
    cot(theta) r' switches to its limit r'' within two cells of each pole.
    """
    h = grid.spacing_theta
    re = np.empty(r.size + 2)
    re[1:-1] = r
    re[0] = r[1]
    re[-1] = r[-2]
    rp = (re[2:] - re[:-2]) / (2.0 * h)
    rpp = (re[2:] - 2.0 * r + re[:-2]) / (h * h)
    k = POLE_REGULARIZATION_CELLS
    azim = np.empty_like(r)
    inner = slice(k, r.size - k)
    azim[inner] = rp[inner] / np.tan(grid.theta[inner])
    azim[:k] = rpp[:k]
    azim[-k:] = rpp[-k:]
    return rp, rpp, azim


def _full2d_scalar_derivatives(grid: GridSpec, r: np.ndarray):
    """Return coordinate derivatives (r_t, r_tt, r_p, r_pp, r_tp) on the 2d grid.

    Theta uses second-order central differences with ghost rows obtained by
    crossing the pole (same ring, phi shifted by pi); phi is Fourier-spectral.
    """
    h = grid.spacing_theta
    n_phi = grid.n_phi
    ghost_top = np.roll(r[0], n_phi // 2)
    ghost_bot = np.roll(r[-1], n_phi // 2)
    re = np.vstack([ghost_top, r, ghost_bot])
    r_t = (re[2:] - re[:-2]) / (2.0 * h)
    r_tt = (re[2:] - 2.0 * r + re[:-2]) / (h * h)

    k = 2.0 * np.pi * np.fft.rfftfreq(n_phi, d=2.0 * np.pi / n_phi)
    spec = np.fft.rfft(r, axis=1)
    r_p = np.fft.irfft(1j * k[None, :] * spec, n=n_phi, axis=1)
    r_pp = np.fft.irfft(-(k[None, :] ** 2) * spec, n=n_phi, axis=1)
    spec_t = np.fft.rfft(r_t, axis=1)
    r_tp = np.fft.irfft(1j * k[None, :] * spec_t, n=n_phi, axis=1)
    return r_t, r_tt, r_p, r_pp, r_tp


def spherical_derivatives(state: GraphState):
    """Return frame components (Dr, D2r) of the covariant gradient and Hessian.

    Shapes (N, n) and (N, n, n) over flattened nodes.  In the axisymmetric
    mode only the first slot of Dr and the diagonal of D2r are nonzero.
    """
    grid = state.grid
    n = grid.n
    if grid.mode == "axisymmetric":
        r = state.r
        rp, rpp, azim = _axisym_scalar_derivatives(grid, r)
        N = r.size
        Dr = np.zeros((N, n))
        Dr[:, 0] = rp
        D2r = np.zeros((N, n, n))
        D2r[:, 0, 0] = rpp
        for k in range(1, n):
            D2r[:, k, k] = azim
        return Dr, D2r

    r = state.r
    r_t, r_tt, r_p, r_pp, r_tp = _full2d_scalar_derivatives(grid, r)
    sin_t = np.sin(grid.theta)[:, None]
    cot_t = (np.cos(grid.theta) / np.sin(grid.theta))[:, None]
    Dr = np.stack([r_t.ravel(), (r_p / sin_t).ravel()], axis=1)
    D2r = np.empty((r.size, 2, 2))
    D2r[:, 0, 0] = r_tt.ravel()
    off = ((r_tp - cot_t * r_p) / sin_t).ravel()
    D2r[:, 0, 1] = off
    D2r[:, 1, 0] = off
    D2r[:, 1, 1] = (r_pp / sin_t**2 + cot_t * r_t).ravel()
    return Dr, D2r


# ---------------------------------------------------------------------------
# Pointwise curvature algebra (exact given r and its derivatives)
# ---------------------------------------------------------------------------


def axisym_pointwise_curvatures(r, rp, rpp, azim, ac: AmbientCurvature):
    """Return (lam_theta, lam_azim, xi_norm, s, c) from scalar derivative data.

    Pure pointwise algebra shared by the finite-difference pipeline and by
    tests that substitute analytic derivatives.
    """
    r = np.asarray(r, dtype=float)
    a = ac.a
    s = np.sinh(a * r) / a
    c = np.cosh(a * r)
    xi_sq = s * s + rp * rp
    xi = np.sqrt(xi_sq)
    h_theta = -(s * rpp - s * s * c - 2.0 * c * rp * rp) / xi
    h_azim = -(s * azim - s * s * c) / xi
    lam_theta = h_theta / xi_sq
    lam_azim = h_azim / (s * s)
    return lam_theta, lam_azim, xi, s, c


@dataclass
class GeometryFields:
    """Per-node geometry of a state, flattened over nodes.

    The tensor fields (Dr, D2r, g, g_inv, h, W) are populated only when the
    full assembly is requested; the scalar fields always are.
    """

    r: np.ndarray
    s: np.ndarray
    c: np.ndarray
    xi_norm: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    Hm: np.ndarray
    F: np.ndarray
    Phi: np.ndarray
    area_weight: np.ndarray
    min_spacing: float
    Dr: np.ndarray | None = None
    D2r: np.ndarray | None = None
    g: np.ndarray | None = None
    g_inv: np.ndarray | None = None
    h: np.ndarray | None = None
    W: np.ndarray | None = None


def geometry_from_graph(state: GraphState, params: FlowParams, full: bool = True) -> GeometryFields:
    """Assemble the per-node geometry of a radial graph.

    full=False skips the tensor fields; the flow integrator uses that path
    inside stages, while diagnostics and tests take the complete assembly.
    """
    grid = state.grid
    if grid.n != params.n:
        raise DomainError(f"grid dimension {grid.n} does not match params.n = {params.n}")
    n = grid.n

    if grid.mode == "axisymmetric":
        r = state.r
        rp, rpp, azim = _axisym_scalar_derivatives(grid, r)
        lam_theta, lam_azim, xi, s, c = axisym_pointwise_curvatures(r, rp, rpp, azim, params.ac)
        N = r.size
        lam = np.empty((N, n))
        lam[:, 0] = lam_theta
        lam[:, 1:] = lam_azim[:, None]
        lam.sort(axis=1)
        H = lam_theta + (n - 1) * lam_azim
        min_spacing = grid.spacing_theta * float(np.sqrt(np.min(xi * xi)))
        fields = _scalar_fields(state, params, lam, H, xi, s, c, min_spacing)
        if full:
            Dr = np.zeros((N, n))
            Dr[:, 0] = rp
            D2r = np.zeros((N, n, n))
            D2r[:, 0, 0] = rpp
            g = np.zeros((N, n, n))
            g_inv = np.zeros((N, n, n))
            h2 = np.zeros((N, n, n))
            W = np.zeros((N, n, n))
            xi_sq = xi * xi
            s_sq = s * s
            h_theta = lam_theta * xi_sq
            h_azim = lam_azim * s_sq
            g[:, 0, 0] = xi_sq
            g_inv[:, 0, 0] = 1.0 / xi_sq
            h2[:, 0, 0] = h_theta
            W[:, 0, 0] = lam_theta
            for k in range(1, n):
                D2r[:, k, k] = azim
                g[:, k, k] = s_sq
                g_inv[:, k, k] = 1.0 / s_sq
                h2[:, k, k] = h_azim
                W[:, k, k] = lam_azim
            fields.Dr, fields.D2r, fields.g, fields.g_inv, fields.h, fields.W = (
                Dr,
                D2r,
                g,
                g_inv,
                h2,
                W,
            )
        return fields

    # full2d: assemble 2x2 frame tensors and take closed-form eigenvalues.
    Dr, D2r = spherical_derivatives(state)
    r = state.r_flat
    a = params.a
    s = np.sinh(a * r) / a
    c = np.cosh(a * r)
    dr_sq = np.einsum("ni,ni->n", Dr, Dr)
    xi_sq = s * s + dr_sq
    xi = np.sqrt(xi_sq)
    eye = np.eye(2)
    outer = Dr[:, :, None] * Dr[:, None, :]
    g = outer + (s * s)[:, None, None] * eye
    g_inv = (eye[None, :, :] - outer / xi_sq[:, None, None]) / (s * s)[:, None, None]
    h2 = -(
        s[:, None, None] * D2r
        - (s * s * c)[:, None, None] * eye
        - 2.0 * c[:, None, None] * outer
    ) / xi[:, None, None]
    W = np.einsum("nij,njk->nik", g_inv, h2)
    tr = W[:, 0, 0] + W[:, 1, 1]
    # (W00 - W11)^2 + 4 W01 W10 equals tr^2 - 4 det but does not cancel
    # catastrophically at umbilic points (W is self-adjoint w.r.t. g, so
    # the discriminant is nonnegative up to rounding)
    gap = W[:, 0, 0] - W[:, 1, 1]
    disc = np.sqrt(np.maximum(gap * gap + 4.0 * W[:, 0, 1] * W[:, 1, 0], 0.0))
    lam = np.stack([(tr - disc) / 2.0, (tr + disc) / 2.0], axis=1)
    theta_spacing = grid.spacing_theta * np.sqrt(g[:, 0, 0])
    # Coordinate phi spacing carries the sin(theta) factor of the chart.
    sin_t = np.repeat(np.sin(grid.theta), grid.n_phi)
    phi_spacing = grid.spacing_phi * sin_t * np.sqrt(g[:, 1, 1])
    min_spacing = float(min(np.min(theta_spacing), np.min(phi_spacing)))
    fields = _scalar_fields(state, params, lam, tr, xi, s, c, min_spacing)
    if full:
        fields.Dr, fields.D2r, fields.g, fields.g_inv, fields.h, fields.W = (
            Dr,
            D2r,
            g,
            g_inv,
            h2,
            W,
        )
    return fields


def _scalar_fields(state, params, lam, H, xi, s, c, min_spacing) -> GeometryFields:
    F = speed(lam, params)
    Phi = s * s / xi
    area_weight = s ** (params.n - 1) * xi * state.grid.weights
    return GeometryFields(
        r=state.r_flat,
        s=s,
        c=c,
        xi_norm=xi,
        lam=lam,
        H=H,
        Hm=F ** (1.0 / params.beta) if params.beta != 1.0 else F,
        F=F,
        Phi=Phi,
        area_weight=area_weight,
        min_spacing=min_spacing,
    )


def mean_curvature_direct(state: GraphState, params: FlowParams) -> np.ndarray:
    """Mean curvature from the scalar graph formula, independent of the Weingarten route.

    H = -(Delta r - Hess r(Dr, Dr)/|xi|^2)/(|xi| s) + (c/|xi|)(n + |Dr|^2/|xi|^2),
    with all sphere derivatives covariant.  Shares only Dr/D2r with the
    tensor assembly, so agreement validates the index gymnastics.
    """
    Dr, D2r = spherical_derivatives(state)
    r = state.r_flat
    a = params.a
    s = np.sinh(a * r) / a
    c = np.cosh(a * r)
    dr_sq = np.einsum("ni,ni->n", Dr, Dr)
    xi_sq = s * s + dr_sq
    xi = np.sqrt(xi_sq)
    lap = np.trace(D2r, axis1=1, axis2=2)
    hess_rad = np.einsum("nij,ni,nj->n", D2r, Dr, Dr)
    return -(lap - hess_rad / xi_sq) / (xi * s) + (c / xi) * (params.n + dr_sq / xi_sq)


def christoffel_difference(state: GraphState, params: FlowParams) -> np.ndarray:
    """Difference tensor between the induced and round-sphere connections.

    Frame components T^k_ij = g^{kl}[Hess_ij r D_l r + s c (D_i r delta_lj
    + D_j r delta_il - D_l r delta_ij)], shape (N, n, k, i, j) collapsed to
    (N, n, n, n).  Vanishes identically on geodesic spheres, where the
    induced metric is a constant multiple of the round one and the two
    connections coincide.
    """
    Dr, D2r = spherical_derivatives(state)
    r = state.r_flat
    a = params.a
    s = np.sinh(a * r) / a
    c = np.cosh(a * r)
    dr_sq = np.einsum("ni,ni->n", Dr, Dr)
    xi_sq = s * s + dr_sq
    n = params.n
    eye = np.eye(n)
    sc = s * c
    inner = (
        np.einsum("nij,nl->nlij", D2r, Dr)
        + np.einsum("n,ni,lj->nlij", sc, Dr, eye)
        + np.einsum("n,nj,il->nlij", sc, Dr, eye)
        - np.einsum("n,nl,ij->nlij", sc, Dr, eye)
    )
    g_up = (eye[None, :, :] - Dr[:, :, None] * Dr[:, None, :] / xi_sq[:, None, None]) / (
        s * s
    )[:, None, None]
    return np.einsum("nkl,nlij->nkij", g_up, inner)


# ---------------------------------------------------------------------------
# Quadrature functionals
# ---------------------------------------------------------------------------


def _sinh_power_integral(x: np.ndarray, n: int) -> np.ndarray:
    """Return J_n(x) = integral of sinh^n over [0, x], by the power recurrence."""
    x = np.asarray(x, dtype=float)
    sh = np.sinh(x)
    ch = np.cosh(x)
    if n % 2 == 0:
        j = x.copy()
        start = 2
    else:
        j = ch - 1.0
        start = 3
    for k in range(start, n + 1, 2):
        j = (sh ** (k - 1) * ch - (k - 1) * j) / k
    return j


def enclosed_volume_integrand(r, params: FlowParams):
    """Return the radial volume factor integral_0^r s(t)^n dt, elementwise."""
    a = params.a
    return _sinh_power_integral(a * np.asarray(r, dtype=float), params.n) / a ** (params.n + 1)


def area_and_volume(state: GraphState, params: FlowParams) -> tuple[float, float]:
    """Return (surface area, enclosed volume) of the graph.

    Area sums sqrt(det g) against the round-sphere weights; volume integrates
    the exact radial antiderivative of s^n node by node.
    """
    grid = state.grid
    r = state.r_flat
    a = params.a
    s = np.sinh(a * r) / a
    if grid.mode == "axisymmetric":
        rp, _, _ = _axisym_scalar_derivatives(grid, state.r)
        xi = np.sqrt(s * s + rp * rp)
    else:
        Dr, _ = spherical_derivatives(state)
        xi = np.sqrt(s * s + np.einsum("ni,ni->n", Dr, Dr))
    area = float(np.sum(s ** (params.n - 1) * xi * grid.weights))
    volume = float(np.sum(grid.weights * enclosed_volume_integrand(r, params)))
    return area, volume


# ---------------------------------------------------------------------------
# Snapshot I/O
# ---------------------------------------------------------------------------


def save_snapshot(state: GraphState, path: str) -> None:
    """Write a grid snapshot CSV; header carries mode, dimension, and time."""
    grid = state.grid
    tag = _MODE_TAGS[grid.mode]
    # repr of Python floats round-trips exactly; numpy scalars are cast first.
    lines = [f"{SNAPSHOT_MAGIC}, mode={tag}, n={grid.n}, t={float(state.t)!r}"]
    if grid.mode == "axisymmetric":
        for th, rv in zip(grid.theta, state.r):
            lines.append(f"{float(th)!r},{float(rv)!r}")
    else:
        for i, th in enumerate(grid.theta):
            for j, ph in enumerate(grid.phi):
                lines.append(f"{float(th)!r},{float(ph)!r},{float(state.r[i, j])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path: str) -> GraphState:
    """Read a grid snapshot CSV written by save_snapshot."""
    with open(path) as fh:
        first = fh.readline().strip()
        match = re.match(
            r"# horoflow-grid v1, mode=(axisym|full2d), n=(\d+), t=(.+)$", first
        )
        if not match:
            raise HoroflowError(f"{path} is not a horoflow grid snapshot")
        mode = _TAG_MODES[match.group(1)]
        n = int(match.group(2))
        t = float(match.group(3))
        body = fh.read()
    data = np.loadtxt(StringIO(body), delimiter=",", ndmin=2)
    if mode == "axisymmetric":
        grid = make_grid(mode, n, data.shape[0])
        if not np.allclose(data[:, 0], grid.theta, atol=1e-12):
            raise HoroflowError("snapshot colatitudes do not match a uniform grid")
        return GraphState(t=t, grid=grid, r=data[:, 1])
    thetas = np.unique(data[:, 0])
    phis = np.unique(data[:, 1])
    grid = make_grid(mode, n, thetas.size, phis.size)
    if not (
        np.allclose(thetas, grid.theta, atol=1e-12)
        and np.allclose(phis, grid.phi, atol=1e-12)
    ):
        raise HoroflowError("snapshot nodes do not match a cell-centered lat-long grid")
    r = data[:, 2].reshape(thetas.size, phis.size)
    return GraphState(t=t, grid=grid, r=r)

"""Time integration of the volume-preserving scalar flow of a radial graph.

The normal speed is the deviation of the curvature speed from its area
average, so the enclosed volume is conserved by construction; the radial
function then satisfies dr/dt = (Fbar - F) |xi| / s at every node.  The
integrator is explicit (Heun by default, classical RK4 optionally), with the
nonlocal average recomputed at every internal stage and a per-step time step
from the parabolic stability scale of the linearized operator.

Geodesic spheres make the right-hand side vanish identically, so they are
exact discrete equilibria; the run loop therefore declares convergence from
the state itself (roundness deficit below tolerance and relative radial
oscillation below a fixed threshold) rather than from step counts.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .curvalg import FlowParams, PinchingConstants, solve_pinching_constants, speed_gradient
from .errors import (
    DomainError,
    HoroflowError,
    NumericalBlowupError,
    RootFindingError,
    StiffnessError,
)
from .graphgeom import (
    GeometryFields,
    GraphState,
    enclosed_volume_integrand,
    geometry_from_graph,
    save_snapshot,
)
from .hypergeom import generalized_sine
from .monitors import DiagnosticsRecorder, fit_exponential
from .oracle import support_offset

logger = logging.getLogger(__name__)

SCHEMES = ("heun", "rk4")

# Consecutive steps pinned at the dt floor before the run aborts as stiff.
STIFFNESS_PATIENCE = 10

# Relative radial oscillation (max r - min r) / mean r below which the state
# counts as a geodesic sphere for the convergence test.
R_OSCILLATION_RTOL = 1.0e-8

DEFAULT_MAX_STEPS = 2_000_000

# Noise floor passed to the summary's decay fit; see monitors.FIT_NOISE_FLOOR.
_SUMMARY_FIT_FLOOR = 1.0e-13


@dataclass(frozen=True)
class StepControl:
    """Explicit time-stepper knobs: CFL safety, dt clamps, and the scheme."""

    safety: float = 0.2
    dt_min: float = 1.0e-10
    dt_max: float = 1.0e-2
    scheme: str = "heun"

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise DomainError(f"safety factor must be in (0, 1], got {self.safety}")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise DomainError("need 0 < dt_min <= dt_max")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


def average_speed(fields: GeometryFields) -> float:
    """Area-weighted average of the speed over the hypersurface."""
    total = float(np.sum(fields.area_weight))
    if total <= 0.0:
        raise DomainError("total area is not positive; cannot average the speed")
    return float(np.sum(fields.F * fields.area_weight)) / total


def _stage_rate(fields: GeometryFields) -> tuple[np.ndarray, float]:
    """Per-node dr/dt (flattened) and the average speed it used."""
    fbar = average_speed(fields)
    return (fbar - fields.F) * fields.xi_norm / fields.s, fbar


def flow_rhs(state: GraphState, params: FlowParams) -> np.ndarray:
    """Evaluate dr/dt = (Fbar - F) |xi| / s on the grid's natural shape.

    Logs a warning when h-convexity fails (the flow is still defined while
    H_m > 0; losing parabolicity raises instead).
    """
    fields = geometry_from_graph(state, params, full=False)
    if float(np.min(fields.lam)) <= params.a:
        logger.warning(
            "h-convexity lost at t=%.6g (min lambda = %.6g <= a = %.6g)",
            state.t,
            float(np.min(fields.lam)),
            params.a,
        )
    rate, _fbar = _stage_rate(fields)
    return rate.reshape(state.grid.shape)


def stable_dt(fields: GeometryFields, params: FlowParams, control: StepControl) -> float:
    """Parabolic stability step from the linearized diffusion scale.

    The linearization of the speed in the radial Hessian has directional
    diffusion coefficients bounded by the components of the speed gradient
    over the induced metric factors; their sum (the gradient trace) bounds
    the largest eigenvalue including the pole-regularized azimuthal cells,
    so dt = safety * (min induced spacing)^2 / max_nodes trace(dF).
    """
    trace = np.sum(speed_gradient(fields.lam, params), axis=-1)
    scale = float(np.max(trace))
    if not np.isfinite(scale) or scale <= 0.0:
        raise DomainError("diffusion scale must be positive and finite")
    dt = control.safety * fields.min_spacing**2 / scale
    return float(min(max(dt, control.dt_min), control.dt_max))


@dataclass(frozen=True)
class StepResult:
    """One accepted step: the new state plus the start-of-step evaluation."""

    state: GraphState
    fields: GeometryFields
    dt: float
    fbar: float


def _advance(state: GraphState, r_new: np.ndarray, dt: float) -> GraphState:
    try:
        return GraphState(t=state.t + dt, grid=state.grid, r=r_new)
    except DomainError as exc:
        raise NumericalBlowupError(
            f"state left the graph domain at t = {state.t + dt:.6g}: {exc}",
            last_state=state,
        ) from exc


def step(
    state: GraphState,
    params: FlowParams,
    control: StepControl,
    fields: GeometryFields | None = None,
    dt: float | None = None,
) -> StepResult:
    """Advance one explicit step, recomputing the speed average per stage."""
    if fields is None:
        fields = geometry_from_graph(state, params, full=False)
    if dt is None:
        dt = stable_dt(fields, params, control)
    shape = state.grid.shape
    k1, fbar = _stage_rate(fields)
    k1 = k1.reshape(shape)

    if control.scheme == "heun":
        trial = _advance(state, state.r + dt * k1, dt)
        k2, _ = _stage_rate(geometry_from_graph(trial, params, full=False))
        r_new = state.r + (0.5 * dt) * (k1 + k2.reshape(shape))
    else:
        half = _advance(state, state.r + (0.5 * dt) * k1, 0.5 * dt)
        k2, _ = _stage_rate(geometry_from_graph(half, params, full=False))
        k2 = k2.reshape(shape)
        half2 = _advance(state, state.r + (0.5 * dt) * k2, 0.5 * dt)
        k3, _ = _stage_rate(geometry_from_graph(half2, params, full=False))
        k3 = k3.reshape(shape)
        full = _advance(state, state.r + dt * k3, dt)
        k4, _ = _stage_rate(geometry_from_graph(full, params, full=False))
        r_new = state.r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4.reshape(shape))

    return StepResult(state=_advance(state, r_new, dt), fields=fields, dt=dt, fbar=fbar)


def volume_renormalize(state: GraphState, params: FlowParams, v0: float) -> GraphState:
    """Uniform radial shift restoring the enclosed volume to v0 exactly.

    Safeguarded Newton on the strictly increasing volume-of-shift function;
    intended for drift correction, so the current volume must already be
    within 10% of the target.
    """
    weights = state.grid.weights
    r = state.r_flat

    def volume_at(delta: float) -> float:
        return float(np.sum(weights * enclosed_volume_integrand(r + delta, params)))

    v_now = volume_at(0.0)
    if abs(v_now - v0) / v0 >= 0.1:
        raise DomainError(
            f"volume drifted {abs(v_now - v0) / v0:.3g} relative; renormalization "
            "is a drift corrector, not a resizing tool"
        )
    delta = 0.0
    max_shift = 0.1 * float(np.min(r))
    for _ in range(50):
        err = volume_at(delta) - v0
        if abs(err) <= 1e-12 * v0:
            if delta == 0.0:
                return state
            return GraphState(t=state.t, grid=state.grid, r=state.r + delta)
        deriv = float(np.sum(weights * generalized_sine(r + delta, params.ac) ** params.n))
        newton = err / deriv
        delta -= float(np.clip(newton, -max_shift, max_shift))
    raise RootFindingError("volume renormalization Newton did not converge in 50 iterations")


def _roundness_deficit(fields: GeometryFields, params: FlowParams) -> float:
    """Max over nodes of 1/n^n - Qtilde; NaN when the shifted trace dips <= 0."""
    shifted = fields.lam - params.a
    htilde = np.sum(shifted, axis=-1)
    if float(np.min(htilde)) <= 0.0:
        return math.nan
    qtilde_min = float(np.min(np.prod(shifted, axis=-1) / htilde**params.n))
    return 1.0 / params.n**params.n - qtilde_min


_CONSTANTS_CACHE: dict[tuple, PinchingConstants] = {}


def pinching_constants_cached(params: FlowParams, n_samples: int, seed: int) -> PinchingConstants:
    """Memoized pinching constants; repeated runs share one construction."""
    key = (params.n, params.m, float(params.beta), float(params.ac.kappa), int(n_samples), int(seed))
    if key not in _CONSTANTS_CACHE:
        _CONSTANTS_CACHE[key] = solve_pinching_constants(
            params, n_samples=n_samples, seed=seed
        )
    return _CONSTANTS_CACHE[key]


@dataclass
class FlowResult:
    """Everything a finished (or aborted-and-reraised) run produced."""

    params: FlowParams
    final_state: GraphState
    recorder: DiagnosticsRecorder
    status: str
    converged: bool
    n_steps: int
    v0: float
    zeta_epsilon: float
    constants: PinchingConstants
    initial_pinched: bool | None
    diagnostics_path: str | None = None
    summary: dict = field(default_factory=dict)

    def arrays(self):
        return self.recorder.arrays()


def run(config, max_steps: int = DEFAULT_MAX_STEPS) -> FlowResult:
    """Integrate a configured run to convergence, t_end, or the step cap.

    `config` carries params, grid, the initial GraphState, StepControl,
    t_end, record_interval, snapshot_interval, f_tol, renormalize_volume,
    output_dir, and the pinching-constants sampling knobs (see the cli
    module's RunConfig).  Diagnostics rows are appended at the record
    cadence plus the initial and final states; snapshots and the summary
    JSON are written only when output_dir is set.  Aborts flush what was
    recorded before propagating.
    """
    params: FlowParams = config.params
    control: StepControl = config.control
    state: GraphState = config.initial
    if state.grid is not config.grid and state.grid.shape != config.grid.shape:
        raise DomainError("initial state grid does not match the configured grid")

    constants = pinching_constants_cached(params, config.constants_samples, config.constants_seed)
    weights = state.grid.weights
    v0 = float(np.sum(weights * enclosed_volume_integrand(state.r_flat, params)))
    zeta = support_offset(v0, params)

    recorder = DiagnosticsRecorder(params, zeta_epsilon=zeta, c_star=constants.c_star)
    fields = geometry_from_graph(state, params, full=False)
    first = recorder.observe(state, fields, 0.0)
    initial_pinched = first.pinched
    if initial_pinched:
        logger.info("initial state is pinched against C* = %.8g", constants.c_star)
    else:
        logger.warning(
            "initial state violates the pinching hypothesis (C* = %.8g); "
            "the convergence theorem gives sufficiency only, proceeding",
            constants.c_star,
        )

    out_dir = getattr(config, "output_dir", None)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    record_interval = config.record_interval
    snapshot_interval = config.snapshot_interval
    next_record = record_interval
    next_snapshot = snapshot_interval if snapshot_interval else math.inf
    snapshot_index = 0
    if out_dir and snapshot_interval:
        save_snapshot(state, os.path.join(out_dir, f"snapshot_{snapshot_index:06d}.csv"))
        snapshot_index += 1

    n_steps = 0
    stiff_streak = 0
    last_dt = 0.0
    status = "max_steps"
    try:
        while True:
            deficit = _roundness_deficit(fields, params)
            r = state.r
            oscillation = float((np.max(r) - np.min(r)) / np.mean(r))
            if (
                np.isfinite(deficit)
                and deficit < config.f_tol
                and oscillation < R_OSCILLATION_RTOL
            ):
                status = "converged"
                break
            if state.t >= config.t_end - 1e-15:
                status = "t_end"
                break
            if n_steps >= max_steps:
                status = "max_steps"
                break

            dt_stable = stable_dt(fields, params, control)
            if dt_stable <= control.dt_min * (1.0 + 1e-12):
                stiff_streak += 1
                if stiff_streak >= STIFFNESS_PATIENCE:
                    raise StiffnessError(
                        f"dt pinned at dt_min = {control.dt_min:g} for "
                        f"{stiff_streak} consecutive steps at t = {state.t:.6g}"
                    )
            else:
                stiff_streak = 0
            dt = min(dt_stable, config.t_end - state.t)

            result = step(state, params, control, fields=fields, dt=dt)
            state = result.state
            last_dt = result.dt
            n_steps += 1
            if config.renormalize_volume:
                state = volume_renormalize(state, params, v0)
            fields = geometry_from_graph(state, params, full=False)

            if state.t + 1e-12 >= next_record:
                recorder.observe(state, fields, last_dt)
                next_record = record_interval * (math.floor(state.t / record_interval) + 1)
            if out_dir and state.t + 1e-12 >= next_snapshot:
                save_snapshot(
                    state, os.path.join(out_dir, f"snapshot_{snapshot_index:06d}.csv")
                )
                snapshot_index += 1
                next_snapshot = snapshot_interval * (
                    math.floor(state.t / snapshot_interval) + 1
                )
    except HoroflowError:
        if out_dir:
            recorder.write_csv(os.path.join(out_dir, "diagnostics.csv"))
            save_snapshot(state, os.path.join(out_dir, "abort_state.csv"))
        raise

    if recorder.records[-1].t != state.t:
        recorder.observe(state, fields, last_dt)

    result = FlowResult(
        params=params,
        final_state=state,
        recorder=recorder,
        status=status,
        converged=status == "converged",
        n_steps=n_steps,
        v0=v0,
        zeta_epsilon=zeta,
        constants=constants,
        initial_pinched=initial_pinched,
    )
    result.summary = _summarize(result)
    if out_dir:
        csv_path = os.path.join(out_dir, "diagnostics.csv")
        recorder.write_csv(csv_path)
        result.diagnostics_path = csv_path
        save_snapshot(state, os.path.join(out_dir, "final_state.csv"))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(result.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result


def _summarize(result: FlowResult) -> dict:
    cols = result.recorder.arrays()
    v = cols["V"]
    drift = float(np.max(np.abs(v - v[0])) / abs(v[0])) if v.size else 0.0
    try:
        fit = fit_exponential(cols["t"], cols["f_max"], floor=_SUMMARY_FIT_FLOOR)
        decay = {"rate": fit.rate, "r_squared": fit.r_squared, "n_used": fit.n_used}
    except DomainError:
        decay = None
    p = result.params
    return {
        "converged": result.converged,
        "status": result.status,
        "t_final": float(result.final_state.t),
        "n_steps": result.n_steps,
        "volume_initial": result.v0,
        "volume_drift": drift,
        "decay_fit": decay,
        "zeta_epsilon": result.zeta_epsilon,
        "initial_pinched": result.initial_pinched,
        "params": {"n": p.n, "m": p.m, "beta": float(p.beta), "kappa": float(p.ac.kappa)},
        "constants": {
            "epsilon0": result.constants.epsilon0,
            "c_star": result.constants.c_star,
            "degenerate": result.constants.degenerate,
            "n_samples": result.constants.n_samples,
            "seed": result.constants.seed,
        },
    }

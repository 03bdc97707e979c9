"""Time integration: stages, stability control, conservation, run loop."""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import mpmath as mp
import numpy as np
import pytest

from horoflow import (
    AmbientCurvature,
    DomainError,
    FlowParams,
    GraphState,
    StepControl,
    StiffnessError,
    area_and_volume,
    flow_rhs,
    geometry_from_graph,
    load_snapshot,
    make_grid,
    perturbed_sphere_state,
    run,
    sphere_state,
    stable_dt,
    step,
    volume_renormalize,
)
from horoflow.flow import average_speed
from horoflow.graphgeom import POLE_REGULARIZATION_CELLS, enclosed_volume_integrand

COTH1 = math.cosh(1.0) / math.sinh(1.0)


def make_config(params, grid, initial, **overrides):
    base = dict(
        params=params,
        grid=grid,
        initial=initial,
        control=StepControl(),
        t_end=1.0,
        record_interval=0.002,
        snapshot_interval=None,
        f_tol=1e-8,
        renormalize_volume=False,
        output_dir=None,
        constants_samples=2000,
        constants_seed=0,
    )
    base.update(overrides)
    return SimpleNamespace(**base)


def perturbed_config(params, n_theta=48, amplitude=0.05, **overrides):
    grid = make_grid("axisymmetric", params.n, n_theta)
    initial = perturbed_sphere_state(grid, 1.0, 2, amplitude)
    return make_config(params, grid, initial, **overrides)


# ---------------------------------------------------------------------------
# Stage algebra
# ---------------------------------------------------------------------------


def test_step_control_validation():
    with pytest.raises(DomainError):
        StepControl(safety=0.0)
    with pytest.raises(DomainError):
        StepControl(safety=1.5)
    with pytest.raises(DomainError):
        StepControl(dt_min=1e-2, dt_max=1e-3)
    with pytest.raises(DomainError):
        StepControl(scheme="euler")


def test_average_speed_on_sphere(params_n2m1):
    state = sphere_state(make_grid("axisymmetric", 2, 96), 1.0)
    fields = geometry_from_graph(state, params_n2m1)
    assert average_speed(fields) == pytest.approx(COTH1, abs=1e-14)


def test_rhs_vanishes_on_spheres():
    for n, m, beta in ((2, 1, 1.0), (3, 2, 1.0), (2, 2, 1.0)):
        params = FlowParams(n=n, m=m, beta=beta, ac=AmbientCurvature(kappa=-1.0))
        state = sphere_state(make_grid("axisymmetric", n, 96), 1.0)
        assert np.max(np.abs(flow_rhs(state, params))) < 1e-13


def test_heun_step_is_the_documented_two_stage_average(params_n2m1):
    state = perturbed_sphere_state(make_grid("axisymmetric", 2, 64), 1.0, 2, 0.05)
    dt = 5e-4
    k1 = flow_rhs(state, params_n2m1)
    trial = GraphState(t=state.t + dt, grid=state.grid, r=state.r + dt * k1)
    k2 = flow_rhs(trial, params_n2m1)
    expected = state.r + (0.5 * dt) * (k1 + k2)
    result = step(state, params_n2m1, StepControl(), dt=dt)
    assert np.array_equal(result.state.r, expected)
    assert result.state.t == state.t + dt
    assert result.fbar == average_speed(geometry_from_graph(state, params_n2m1))


def test_rk4_step_is_the_documented_four_stage_average(params_n2m1):
    state = perturbed_sphere_state(make_grid("axisymmetric", 2, 64), 1.0, 2, 0.05)
    dt = 5e-4
    k1 = flow_rhs(state, params_n2m1)
    s2 = GraphState(t=state.t + 0.5 * dt, grid=state.grid, r=state.r + (0.5 * dt) * k1)
    k2 = flow_rhs(s2, params_n2m1)
    s3 = GraphState(t=state.t + 0.5 * dt, grid=state.grid, r=state.r + (0.5 * dt) * k2)
    k3 = flow_rhs(s3, params_n2m1)
    s4 = GraphState(t=state.t + dt, grid=state.grid, r=state.r + dt * k3)
    k4 = flow_rhs(s4, params_n2m1)
    expected = state.r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    result = step(state, params_n2m1, StepControl(scheme="rk4"), dt=dt)
    assert np.array_equal(result.state.r, expected)


# ---------------------------------------------------------------------------
# High-precision recomputation of the semi-discrete right-hand side
# ---------------------------------------------------------------------------


def mp_axisym_rhs(state, params):
    """Recompute dr/dt at 50 digits with the same stencils, for n = 2.

    Every r-dependent quantity (ghost reflection, central differences, the
    pole switch of the azimuthal Hessian, curvatures, speed, area average)
    is rebuilt in mpmath; only the grid nodes and quadrature weights enter
    as exact copies of their float values.
    """
    mp.mp.dps = 50
    grid = state.grid
    N = grid.n_theta
    hh = mp.mpf(grid.spacing_theta)
    r = [mp.mpf(float(x)) for x in state.r]
    th = [mp.mpf(float(x)) for x in grid.theta]
    w = [mp.mpf(float(x)) for x in grid.weights]

    rp, rpp = [], []
    for i in range(N):
        left = r[i - 1] if i > 0 else r[1]
        right = r[i + 1] if i < N - 1 else r[N - 2]
        rp.append((right - left) / (2 * hh))
        rpp.append((right - 2 * r[i] + left) / (hh * hh))
    azim = [
        rpp[i]
        if i < POLE_REGULARIZATION_CELLS or i >= N - POLE_REGULARIZATION_CELLS
        else rp[i] / mp.tan(th[i])
        for i in range(N)
    ]

    lam_t, lam_a, xi, s = [], [], [], []
    for i in range(N):
        si, ci = mp.sinh(r[i]), mp.cosh(r[i])
        xi_sq = si * si + rp[i] * rp[i]
        xin = mp.sqrt(xi_sq)
        h_tt = -(si * rpp[i] - si * si * ci - 2 * ci * rp[i] * rp[i]) / xin
        h_aa = -(si * azim[i] - si * si * ci) / xin
        lam_t.append(h_tt / xi_sq)
        lam_a.append(h_aa / (si * si))
        xi.append(xin)
        s.append(si)

    if params.m == 1:
        F = [(lam_t[i] + lam_a[i]) / 2 for i in range(N)]
    elif params.m == 2:
        F = [lam_t[i] * lam_a[i] for i in range(N)]
    else:
        raise NotImplementedError
    F = [f ** mp.mpf(float(params.beta)) for f in F]

    aw = [s[i] * xi[i] * w[i] for i in range(N)]
    fbar = mp.fsum(F[i] * aw[i] for i in range(N)) / mp.fsum(aw)
    return np.array([float((fbar - F[i]) * xi[i] / s[i]) for i in range(N)])


def test_rhs_matches_50_digit_recomputation():
    grid = make_grid("axisymmetric", 2, 64)
    state = perturbed_sphere_state(grid, 1.0, 3, 0.05)
    for m, beta in ((1, 1.0), (2, 1.0), (1, 2.0)):
        params = FlowParams(n=2, m=m, beta=beta, ac=AmbientCurvature(kappa=-1.0))
        got = flow_rhs(state, params)
        want = mp_axisym_rhs(state, params)
        assert np.max(np.abs(got - want)) < 1e-10, (m, beta)


# ---------------------------------------------------------------------------
# Temporal convergence order (fixed dt Richardson)
# ---------------------------------------------------------------------------


def integrate_fixed(state, params, scheme, dt, n_steps):
    control = StepControl(scheme=scheme, dt_max=1.0)
    for _ in range(n_steps):
        state = step(state, params, control, dt=dt).state
    return state.r


def test_time_integration_orders(params_n2m1):
    state = perturbed_sphere_state(make_grid("axisymmetric", 2, 24), 1.0, 2, 0.05)
    t_end = 0.04
    ref = integrate_fixed(state, params_n2m1, "rk4", t_end / 512, 512)

    errs = {
        scheme: [
            float(np.max(np.abs(integrate_fixed(state, params_n2m1, scheme, t_end / k, k) - ref)))
            for k in (10, 20, 40)
        ]
        for scheme in ("heun", "rk4")
    }
    heun_orders = np.log2(np.array(errs["heun"][:-1]) / np.array(errs["heun"][1:]))
    rk4_orders = np.log2(np.array(errs["rk4"][:-1]) / np.array(errs["rk4"][1:]))
    assert np.all(heun_orders > 1.8), errs["heun"]
    assert np.all(rk4_orders > 3.5), errs["rk4"]


# ---------------------------------------------------------------------------
# Stability step
# ---------------------------------------------------------------------------


def test_stable_dt_scaling_and_clamps(params_n2m1):
    state = sphere_state(make_grid("axisymmetric", 2, 96), 1.0)
    fields = geometry_from_graph(state, params_n2m1)
    # n = 2, m = 1: the speed gradient is (1/2, 1/2), so the trace is 1
    expected = 0.2 * fields.min_spacing**2
    assert stable_dt(fields, params_n2m1, StepControl()) == pytest.approx(expected, rel=1e-12)
    assert stable_dt(fields, params_n2m1, StepControl(dt_max=1e-6)) == 1e-6
    assert stable_dt(fields, params_n2m1, StepControl(dt_min=0.5, dt_max=1.0)) == 0.5


# ---------------------------------------------------------------------------
# Volume renormalization
# ---------------------------------------------------------------------------


def test_volume_renormalize_restores_v0(params_n2m1):
    grid = make_grid("axisymmetric", 2, 96)
    base = perturbed_sphere_state(grid, 1.0, 2, 0.05)
    v0 = float(np.sum(grid.weights * enclosed_volume_integrand(base.r_flat, params_n2m1)))
    drifted = GraphState(t=0.1, grid=grid, r=base.r * 1.02)
    fixed = volume_renormalize(drifted, params_n2m1, v0)
    v_fixed = float(np.sum(grid.weights * enclosed_volume_integrand(fixed.r_flat, params_n2m1)))
    assert abs(v_fixed - v0) <= 1e-12 * v0
    shift = fixed.r - drifted.r
    assert np.max(shift) - np.min(shift) < 1e-15  # uniform radial shift
    assert fixed.t == drifted.t


def test_volume_renormalize_is_identity_when_exact(params_n2m1):
    grid = make_grid("axisymmetric", 2, 64)
    state = sphere_state(grid, 1.0)
    v0 = float(np.sum(grid.weights * enclosed_volume_integrand(state.r_flat, params_n2m1)))
    assert volume_renormalize(state, params_n2m1, v0) is state


def test_volume_renormalize_rejects_large_drift(params_n2m1):
    grid = make_grid("axisymmetric", 2, 64)
    state = sphere_state(grid, 1.3)
    v0 = float(np.sum(grid.weights * enclosed_volume_integrand(np.full(64, 1.0), params_n2m1)))
    with pytest.raises(DomainError):
        volume_renormalize(state, params_n2m1, v0)


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


def test_sphere_converges_immediately(params_n2m1):
    grid = make_grid("axisymmetric", 2, 96)
    config = make_config(params_n2m1, grid, sphere_state(grid, 1.0))
    result = run(config)
    assert result.status == "converged"
    assert result.converged is True
    assert result.n_steps == 0
    assert np.array_equal(result.final_state.r, config.initial.r)
    assert result.summary["decay_fit"] is None
    assert result.summary["volume_drift"] == 0.0


def test_short_run_decays_and_conserves_volume(params_n2m1):
    config = perturbed_config(params_n2m1, t_end=0.6)
    result = run(config)
    assert result.status == "t_end"
    assert result.n_steps > 100
    cols = result.arrays()
    assert cols["t"][0] == 0.0
    assert cols["t"][-1] == result.final_state.t
    assert np.all(np.diff(cols["t"]) > 0.0)
    v = cols["V"]
    assert np.max(np.abs(v - v[0])) / v[0] < 1e-8
    assert cols["f_max"][-1] < 0.2 * cols["f_max"][0]
    finite_q = cols["Qtilde_min"][np.isfinite(cols["Qtilde_min"])]
    assert np.all(np.diff(finite_q) > -1e-6)


def test_run_respects_max_steps(params_n2m1):
    config = perturbed_config(params_n2m1, t_end=100.0)
    result = run(config, max_steps=5)
    assert result.status == "max_steps"
    assert result.n_steps == 5


def test_run_rejects_grid_mismatch(params_n2m1):
    grid_a = make_grid("axisymmetric", 2, 48)
    grid_b = make_grid("axisymmetric", 2, 64)
    config = make_config(params_n2m1, grid_b, sphere_state(grid_a, 1.0))
    with pytest.raises(DomainError):
        run(config)


def test_record_cadence(params_n2m1):
    config = perturbed_config(params_n2m1, t_end=0.2, record_interval=0.05)
    result = run(config)
    t = result.arrays()["t"]
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(0.2, abs=1e-12)
    for k in (1, 2, 3):
        target = 0.05 * k
        after = t[t + 1e-12 >= target]
        assert after.size and after[0] - target < 2e-2  # within a few steps


def test_stiff_floor_aborts(params_n2m1):
    config = perturbed_config(
        params_n2m1,
        n_theta=96,
        amplitude=0.01,
        control=StepControl(dt_min=1e-3, dt_max=1e-2),
        t_end=10.0,
    )
    with pytest.raises(StiffnessError):
        run(config)


def test_abort_flushes_diagnostics(tmp_path, params_n2m1):
    out = str(tmp_path / "aborted")
    config = perturbed_config(
        params_n2m1,
        n_theta=96,
        amplitude=0.01,
        control=StepControl(dt_min=1e-3, dt_max=1e-2),
        t_end=10.0,
        output_dir=out,
    )
    with pytest.raises(StiffnessError):
        run(config)
    assert os.path.exists(os.path.join(out, "diagnostics.csv"))
    assert os.path.exists(os.path.join(out, "abort_state.csv"))


def test_renormalized_run_keeps_volume_exact(params_n2m1):
    config = perturbed_config(params_n2m1, t_end=0.3, renormalize_volume=True)
    result = run(config)
    v = result.arrays()["V"]
    assert np.max(np.abs(v - v[0])) / v[0] < 2e-12


def test_run_writes_output_files(tmp_path, params_n2m1):
    out = str(tmp_path / "runout")
    config = perturbed_config(
        params_n2m1, t_end=0.2, snapshot_interval=0.1, output_dir=out
    )
    result = run(config)
    assert result.diagnostics_path == os.path.join(out, "diagnostics.csv")
    names = sorted(os.listdir(out))
    assert "diagnostics.csv" in names
    assert "final_state.csv" in names
    assert "summary.json" in names
    assert "snapshot_000000.csv" in names  # initial state
    assert "snapshot_000001.csv" in names  # first interval crossing
    final = load_snapshot(os.path.join(out, "final_state.csv"))
    assert np.array_equal(final.r, result.final_state.r)


def test_resume_from_snapshot_matches_uninterrupted_run(tmp_path, params_n2m1):
    grid = make_grid("axisymmetric", 2, 48)
    initial = perturbed_sphere_state(grid, 1.0, 2, 0.05)

    whole = run(make_config(params_n2m1, grid, initial, t_end=0.3))

    out = str(tmp_path / "leg1")
    leg1 = run(make_config(params_n2m1, grid, initial, t_end=0.15, output_dir=out))
    resumed_state = load_snapshot(os.path.join(out, "final_state.csv"))
    leg2 = run(make_config(params_n2m1, grid, resumed_state, t_end=0.3))

    assert leg2.final_state.t == pytest.approx(whole.final_state.t, abs=1e-12)
    assert np.max(np.abs(leg2.final_state.r - whole.final_state.r)) < 1e-9

"""Command-line orchestration: config parsing, runs, oracles, and analysis.

Config files are flat structured text, one `section.key = value` pair per
line with `#` comments, chosen for diffability in experiment folders:

    params.n = 2
    params.m = 1
    params.beta = 1.0
    params.kappa = -1.0
    grid.mode = axisymmetric
    grid.n_theta = 256
    initial.shape = perturbed_sphere
    initial.r0 = 1.0
    initial.mode_l = 2
    initial.amplitude = 0.05
    flow.t_end = 10.0
    output.dir = runs/standard

Subcommands: run, oracle sphere, constants, analyze, check.  Exit codes:
0 success, 1 invariant or configuration failure, 2 numerical abort,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import curvalg, flow, graphgeom, monitors, oracle
from .curvalg import FlowParams
from .errors import (
    ConfigurationError,
    HoroflowError,
    NumericalBlowupError,
    ParabolicityLostError,
    RootFindingError,
    StiffnessError,
)
from .flow import StepControl
from .graphgeom import GraphState, GridSpec, make_grid
from .hypergeom import AmbientCurvature, kappa_trig

logger = logging.getLogger(__name__)

USAGE = """\
usage: horoflow <subcommand> [options]

subcommands:
  run <config>                 integrate a configured flow, print summary JSON
  oracle sphere <r0> <t_end>   emit the contracting-sphere trajectory CSV
  constants                    solve pinching constants, dump tables
  analyze <csv>                verdict JSON for a diagnostics CSV
  check                        run the built-in invariant suite

exit codes: 0 success, 1 invariant/config failure, 2 numerical abort, 64 usage
"""

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64

_NUMERICAL_ABORTS = (
    StiffnessError,
    NumericalBlowupError,
    ParabolicityLostError,
    RootFindingError,
)

INITIAL_SHAPES = ("sphere", "perturbed_sphere", "custom")


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: constructed objects, not raw strings."""

    params: FlowParams
    grid: GridSpec
    initial: GraphState
    control: StepControl
    t_end: float
    record_interval: float
    snapshot_interval: float | None
    f_tol: float
    seed: int
    output_dir: str | None
    renormalize_volume: bool
    constants_samples: int
    constants_seed: int


def _parse_scalar(raw: str):
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def read_config_text(text: str) -> dict:
    """Parse `section.key = value` lines into a flat dict of typed values."""
    values: dict[str, object] = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected 'section.key = value', got {line.strip()!r}")
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key or "." not in key:
            problems.append(f"line {lineno}: keys are dotted section.name pairs, got {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        values[key] = _parse_scalar(raw)
    if problems:
        raise ConfigurationError(problems)
    return values


_KNOWN_KEYS = {
    "params.n",
    "params.m",
    "params.beta",
    "params.kappa",
    "grid.mode",
    "grid.n_theta",
    "grid.n_phi",
    "initial.shape",
    "initial.r0",
    "initial.mode_l",
    "initial.amplitude",
    "initial.mode_phi",
    "initial.snapshot",
    "control.scheme",
    "control.safety",
    "control.dt_min",
    "control.dt_max",
    "flow.t_end",
    "flow.f_tol",
    "flow.record_interval",
    "flow.snapshot_interval",
    "flow.renormalize_volume",
    "flow.seed",
    "constants.n_samples",
    "constants.seed",
    "output.dir",
}


def config_from_values(values: dict) -> RunConfig:
    """Validate a parsed key/value mapping and construct the run objects.

    Every offending field is collected before raising, so one pass over the
    error message fixes the file.
    """
    problems = [f"unknown key {key!r}" for key in sorted(set(values) - _KNOWN_KEYS)]

    def take(key, default=None):
        return values.get(key, default)

    def number(key, default=None, *, integer=False):
        raw = values.get(key, default)
        if raw is None:
            problems.append(f"{key} is required")
            return None
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            problems.append(f"{key} must be a number, got {raw!r}")
            return None
        if integer and not isinstance(raw, int):
            problems.append(f"{key} must be an integer, got {raw!r}")
            return None
        return raw

    n = number("params.n", integer=True)
    m = number("params.m", integer=True)
    beta = number("params.beta")
    kappa = number("params.kappa")
    if n is not None and n < 2:
        problems.append(f"params.n must be >= 2, got {n}")
    if n is not None and m is not None and not 1 <= m <= n:
        problems.append(f"params.m must be in [1, {n}], got {m}")
    if beta is not None and beta <= 0:
        problems.append(f"params.beta must be positive, got {beta}")
    if m is not None and beta is not None and m * beta < 1.0 - 1e-15:
        problems.append(f"params.m * params.beta must be >= 1, got {m * beta}")
    if kappa is not None and kappa >= 0:
        problems.append(f"params.kappa must be negative (hyperbolic ambient), got {kappa}")

    mode = take("grid.mode", "axisymmetric")
    if mode not in graphgeom.MODES:
        problems.append(f"grid.mode must be one of {graphgeom.MODES}, got {mode!r}")
    n_theta = number("grid.n_theta", 256, integer=True)
    n_phi = take("grid.n_phi")
    if n_theta is not None and n_theta < graphgeom.MIN_NODES_THETA:
        problems.append(f"grid.n_theta must be >= {graphgeom.MIN_NODES_THETA}, got {n_theta}")
    if mode == "full2d":
        if n is not None and n != 2:
            problems.append("full2d grids require params.n = 2")
        if not isinstance(n_phi, int) or n_phi < 8 or n_phi % 2:
            problems.append(f"grid.n_phi must be an even integer >= 8 for full2d, got {n_phi}")

    shape = take("initial.shape")
    if shape not in INITIAL_SHAPES:
        problems.append(f"initial.shape must be one of {INITIAL_SHAPES}, got {shape!r}")
    r0 = mode_l = amplitude = None
    mode_phi = 0
    snapshot_path = None
    if shape in ("sphere", "perturbed_sphere"):
        r0 = number("initial.r0")
        if r0 is not None and r0 <= 0:
            problems.append(f"initial.r0 must be positive, got {r0}")
    if shape == "perturbed_sphere":
        mode_l = number("initial.mode_l", integer=True)
        amplitude = number("initial.amplitude")
        mode_phi = number("initial.mode_phi", 0, integer=True) or 0
        if mode_l is not None and mode_l < 2:
            problems.append(
                f"initial.mode_l must be >= 2 (0 rescales, 1 translates), got {mode_l}"
            )
        if amplitude is not None and r0 and abs(amplitude) / r0 > 0.2:
            problems.append(
                f"initial.amplitude/r0 must be <= 0.2 for star-shapedness, got {abs(amplitude) / r0:.3g}"
            )
        if mode_phi and mode != "full2d":
            problems.append("initial.mode_phi requires grid.mode = full2d")
    if shape == "custom":
        snapshot_path = take("initial.snapshot")
        if not isinstance(snapshot_path, str):
            problems.append("initial.snapshot must be a path for custom initial data")
        elif not os.path.exists(snapshot_path):
            problems.append(f"initial.snapshot file not found: {snapshot_path}")

    scheme = take("control.scheme", "heun")
    if isinstance(scheme, str):
        scheme = scheme.lower()
    if scheme not in flow.SCHEMES:
        problems.append(f"control.scheme must be one of {flow.SCHEMES}, got {scheme!r}")
    safety = number("control.safety", 0.2)
    dt_min = number("control.dt_min", 1e-10)
    dt_max = number("control.dt_max", 1e-2)
    if safety is not None and not 0 < safety <= 1:
        problems.append(f"control.safety must be in (0, 1], got {safety}")
    if dt_min is not None and dt_max is not None and not 0 < dt_min <= dt_max:
        problems.append(f"need 0 < control.dt_min <= control.dt_max, got {dt_min}, {dt_max}")

    t_end = number("flow.t_end", 10.0)
    f_tol = number("flow.f_tol", 1e-8)
    record_interval = number("flow.record_interval", 0.002)
    snapshot_interval = take("flow.snapshot_interval")
    renormalize = take("flow.renormalize_volume", False)
    seed = number("flow.seed", 0, integer=True)
    if t_end is not None and t_end <= 0:
        problems.append(f"flow.t_end must be positive, got {t_end}")
    if f_tol is not None and f_tol <= 0:
        problems.append(f"flow.f_tol must be positive, got {f_tol}")
    if record_interval is not None and record_interval <= 0:
        problems.append(f"flow.record_interval must be positive, got {record_interval}")
    if snapshot_interval in (0, None):
        snapshot_interval = None
    elif not isinstance(snapshot_interval, (int, float)) or snapshot_interval <= 0:
        problems.append(
            f"flow.snapshot_interval must be positive (or 0 to disable), got {snapshot_interval}"
        )
    if not isinstance(renormalize, bool):
        problems.append(f"flow.renormalize_volume must be a boolean, got {renormalize!r}")

    constants_samples = number("constants.n_samples", curvalg.DEFAULT_SAMPLES, integer=True)
    constants_seed = number("constants.seed", seed if seed is not None else 0, integer=True)
    if constants_samples is not None and constants_samples < 100:
        problems.append(f"constants.n_samples must be >= 100, got {constants_samples}")

    output_dir = take("output.dir")
    if output_dir is not None and not isinstance(output_dir, str):
        problems.append(f"output.dir must be a path, got {output_dir!r}")

    if problems:
        raise ConfigurationError(problems)

    params = FlowParams(n=n, m=m, beta=float(beta), ac=AmbientCurvature(kappa=float(kappa)))
    if shape == "custom":
        initial = graphgeom.load_snapshot(snapshot_path)
        grid = initial.grid
        if grid.n != params.n:
            raise ConfigurationError(
                [f"snapshot dimension n={grid.n} does not match params.n={params.n}"]
            )
    else:
        grid = make_grid(mode, params.n, n_theta, n_phi if mode == "full2d" else None)
        if shape == "sphere":
            initial = graphgeom.sphere_state(grid, float(r0))
        else:
            initial = graphgeom.perturbed_sphere_state(
                grid, float(r0), int(mode_l), float(amplitude), mode_phi=int(mode_phi)
            )
    control = StepControl(
        safety=float(safety), dt_min=float(dt_min), dt_max=float(dt_max), scheme=scheme
    )
    return RunConfig(
        params=params,
        grid=grid,
        initial=initial,
        control=control,
        t_end=float(t_end),
        record_interval=float(record_interval),
        snapshot_interval=float(snapshot_interval) if snapshot_interval else None,
        f_tol=float(f_tol),
        seed=int(seed),
        output_dir=output_dir,
        renormalize_volume=bool(renormalize),
        constants_samples=int(constants_samples),
        constants_seed=int(constants_seed),
    )


def parse_config(path: str) -> RunConfig:
    """Read, validate, and pre-check a config file.

    The initial state's pinching is evaluated against the computed C* and
    logged; a violation warns rather than fails, since the pinched
    hypothesis is sufficient for convergence, not necessary.
    """
    if not os.path.exists(path):
        raise ConfigurationError([f"config file not found: {path}"])
    with open(path) as fh:
        config = config_from_values(read_config_text(fh.read()))
    constants = flow.pinching_constants_cached(
        config.params, config.constants_samples, config.constants_seed
    )
    fields = graphgeom.geometry_from_graph(config.initial, config.params, full=False)
    pinched = bool(
        np.all(curvalg.pinching_predicate(fields.lam, config.params, constants.c_star))
    )
    if pinched:
        logger.info("%s: initial state is pinched (C* = %.8g)", path, constants.c_star)
    else:
        logger.warning(
            "%s: initial state is NOT pinched against C* = %.8g; proceeding anyway",
            path,
            constants.c_star,
        )
    return config


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_run(args: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="horoflow run", add_help=True)
    parser.add_argument("config")
    parser.add_argument("--max-steps", type=int, default=flow.DEFAULT_MAX_STEPS)
    ns = parser.parse_args(args)
    config = parse_config(ns.config)
    result = flow.run(config, max_steps=ns.max_steps)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return EXIT_OK


def _oracle_params(ns) -> FlowParams:
    return FlowParams(
        n=ns.n, m=ns.m, beta=ns.beta, ac=AmbientCurvature(kappa=ns.kappa)
    )


def _cmd_oracle(args: list[str]) -> int:
    if not args or args[0] != "sphere":
        sys.stderr.write("usage: horoflow oracle sphere <r0> <t_end> [options]\n")
        return EXIT_USAGE
    parser = argparse.ArgumentParser(prog="horoflow oracle sphere")
    parser.add_argument("r0", type=float)
    parser.add_argument("t_end", type=float)
    parser.add_argument("--samples", type=int, default=101)
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--m", type=int, default=1)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--kappa", type=float, default=-1.0)
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(args[1:])
    params = _oracle_params(ns)
    t_grid = np.linspace(0.0, ns.t_end, ns.samples)
    traj = oracle.sphere_contraction(ns.r0, params, t_grid)
    residual = oracle.contraction_residual(traj)
    lines = ["t,r,residual"]
    for t, r, res in zip(traj.t, traj.r, residual):
        if not np.isfinite(r):
            break
        lines.append(f"{float(t)!r},{float(r)!r},{float(res)!r}")
    text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_constants(args: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="horoflow constants")
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--m", type=int, default=1)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--kappa", type=float, default=-1.0)
    parser.add_argument("--samples", type=int, default=curvalg.DEFAULT_SAMPLES)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", default=None, help="write the epsilon tables as CSV")
    parser.add_argument("--json", dest="json_path", default=None)
    ns = parser.parse_args(args)
    params = _oracle_params(ns)
    constants = curvalg.solve_pinching_constants(params, n_samples=ns.samples, seed=ns.seed)
    payload = {
        "n": ns.n,
        "m": ns.m,
        "beta": ns.beta,
        "kappa": ns.kappa,
        "epsilon0": constants.epsilon0,
        "c_star": constants.c_star,
        "degenerate": constants.degenerate,
        "n_samples": constants.n_samples,
        "seed": constants.seed,
        "table": {
            "eps": [float(v) for v in constants.eps_grid],
            "gap_bound": [float(v) for v in constants.gap_table],
            "gradient_floor": [float(v) for v in constants.grad_floor_table],
            "hessian_ceiling": [float(v) for v in constants.hess_ceiling_table],
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if ns.csv:
        rows = ["eps,gap_bound,gradient_floor,hessian_ceiling"]
        for e, g, w1, w2 in zip(
            constants.eps_grid,
            constants.gap_table,
            constants.grad_floor_table,
            constants.hess_ceiling_table,
        ):
            rows.append(f"{float(e)!r},{float(g)!r},{float(w1)!r},{float(w2)!r}")
        with open(ns.csv, "w") as fh:
            fh.write("\n".join(rows) + "\n")
    if ns.json_path:
        with open(ns.json_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_analyze(args: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="horoflow analyze")
    parser.add_argument("csv")
    parser.add_argument("--json", dest="json_path", default=None)
    parser.add_argument("--n", type=int, default=None, help="override n from the CSV metadata")
    parser.add_argument("--m", type=int, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--kappa", type=float, default=None)
    ns = parser.parse_args(args)
    meta, cols = monitors.load_diagnostics(ns.csv)
    for key in ("n", "m", "beta", "kappa"):
        if getattr(ns, key) is not None:
            meta[key] = getattr(ns, key)
    missing = [key for key in ("n", "m", "beta", "kappa") if key not in meta]
    if missing:
        raise ConfigurationError(
            [f"{key} absent from CSV metadata; pass --{key}" for key in missing]
        )
    verdict = monitors.analyze_diagnostics(meta, cols)
    text = json.dumps(verdict, indent=2, sort_keys=True)
    if ns.json_path:
        with open(ns.json_path, "w") as fh:
            fh.write(text + "\n")
    print(text)
    ok = verdict["monotone_Qtilde"] and verdict["bounds_respected"]
    return EXIT_OK if ok else EXIT_INVARIANT


def _cmd_check(args: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="horoflow check")
    parser.add_argument("--samples", type=int, default=5000, help="cone sample count")
    ns = parser.parse_args(args)
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        if ok:
            print(f"ok   - {name}")
        else:
            failures += 1
            print(f"FAIL - {name}" + (f": {detail}" if detail else ""))

    ac = AmbientCurvature(kappa=-1.0)
    x = np.linspace(1e-3, 8.0, 4001)
    s, c, ta, co = kappa_trig(x, ac)
    report(
        "hyperbolic Pythagoras c^2 - a^2 s^2 = 1",
        bool(np.max(np.abs(c * c - ac.a**2 * s * s - 1.0)) < 1e-9),
    )
    report("tangent-cotangent inverse pair", bool(np.max(np.abs(ta * co - 1.0)) < 1e-12))
    report("sphere curvature decreasing in radius", bool(np.all(np.diff(co) < 0.0)))

    rng = np.random.default_rng(7)
    for trip in ((2, 1, 1.0), (3, 2, 1.0)):
        params = FlowParams(n=trip[0], m=trip[1], beta=trip[2], ac=ac)
        lam = np.abs(rng.standard_normal((20_000, trip[0]))) + 0.05
        euler = np.einsum(
            "ij,ij->i", curvalg.speed_gradient(lam, params), lam
        ) - params.mbeta * curvalg.speed(lam, params)
        rel = np.max(np.abs(euler) / np.maximum(curvalg.speed(lam, params), 1e-300))
        report(f"Euler identity (n,m,beta)={trip}", bool(rel < 1e-10), f"rel {rel:.2e}")

    grid = make_grid("axisymmetric", 2, 128)
    params = FlowParams(n=2, m=1, beta=1.0, ac=ac)
    sphere = graphgeom.sphere_state(grid, 1.0)
    fields = graphgeom.geometry_from_graph(sphere, params)
    lam_err = float(np.max(np.abs(fields.lam - co_of(1.0, ac))))
    report("geodesic sphere principal curvatures exact", lam_err < 1e-12, f"{lam_err:.2e}")

    control = StepControl()
    state = sphere
    for _ in range(200):
        state = flow.step(state, params, control).state
    drift = float(np.max(np.abs(state.r - 1.0)))
    report("sphere equilibrium drift over 200 steps", drift < 1e-12, f"{drift:.2e}")

    t_grid = np.linspace(0.0, 1.0, 51)
    traj = oracle.sphere_contraction(1.5, params, t_grid)
    res = float(np.nanmax(np.abs(oracle.contraction_residual(traj))))
    report("contracting sphere implicit relation", res < 1e-6, f"{res:.2e}")
    v_round = oracle.ball_volume(1.25, params)
    round_trip = abs(oracle.psi_inverse(float(v_round), params) - 1.25)
    report("ball volume-radius round trip", round_trip < 1e-9, f"{round_trip:.2e}")

    try:
        scen = config_from_values(
            {
                "params.n": 2,
                "params.m": 1,
                "params.beta": 1.0,
                "params.kappa": -1.0,
                "grid.n_theta": 128,
                "initial.shape": "perturbed_sphere",
                "initial.r0": 1.0,
                "initial.mode_l": 2,
                "initial.amplitude": 0.05,
                "flow.t_end": 1.0,
                "flow.record_interval": 0.01,
                "constants.n_samples": ns.samples,
            }
        )
        result = flow.run(scen)
        meta = {"n": 2, "m": 1, "beta": 1.0, "kappa": -1.0}
        verdict = monitors.analyze_diagnostics(meta, result.arrays())
        report("short run: pinching ratio monotone", verdict["monotone_Qtilde"])
        report("short run: speed and convexity bounds", verdict["bounds_respected"])
        report(
            "short run: volume drift",
            verdict["volume_drift"] < 1e-4,
            f"{verdict['volume_drift']:.2e}",
        )
    except _NUMERICAL_ABORTS as exc:
        print(f"ABORT - short run: {exc}")
        return EXIT_NUMERICAL

    constants = flow.pinching_constants_cached(
        FlowParams(n=2, m=2, beta=1.0, ac=ac), ns.samples, 0
    )
    report(
        "pinching constants land in their intervals",
        0.0 < constants.epsilon0 < 0.5 and 0.0 < constants.c_star < 0.25,
        f"epsilon0={constants.epsilon0:.4g}, c_star={constants.c_star:.4g}",
    )
    print("all checks passed" if failures == 0 else f"{failures} check(s) failed")
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def co_of(x: float, ac: AmbientCurvature) -> float:
    """Principal curvature of the geodesic sphere of radius x."""
    _s, _c, _ta, co = kappa_trig(x, ac)
    return float(co)


def main(argv: list[str] | None = None) -> int:
    """Dispatch a subcommand; returns the process exit code."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        sys.stdout.write(USAGE)
        return EXIT_OK if argv else EXIT_USAGE
    command, rest = argv[0], argv[1:]
    handlers = {
        "run": _cmd_run,
        "oracle": _cmd_oracle,
        "constants": _cmd_constants,
        "analyze": _cmd_analyze,
        "check": _cmd_check,
    }
    handler = handlers.get(command)
    if handler is None:
        sys.stderr.write(f"unknown subcommand: {command}\n\n{USAGE}")
        return EXIT_USAGE
    try:
        return handler(rest)
    except SystemExit as exc:
        # argparse exits on malformed flags; normalize to the usage code.
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error:\n  " + "\n  ".join(exc.problems) + "\n")
        return EXIT_INVARIANT
    except _NUMERICAL_ABORTS as exc:
        sys.stderr.write(f"numerical abort: {exc}\n")
        return EXIT_NUMERICAL
    except HoroflowError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVARIANT
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVARIANT


def entrypoint() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())

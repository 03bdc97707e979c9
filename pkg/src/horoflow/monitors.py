"""Theorem-level diagnostics on recorded states and their time series.

Each recorded step condenses a full geometry evaluation into one row of
extrema: volume, speed statistics, the shifted-spectrum invariants, the
roundness deficit f_max = 1/n^n - Qtilde_min, the support-function minimum,
and the speed-bound test ratio.  Post-processing covers monotonicity checks,
log-linear exponential fits, and the combined verdict used by the analyze
subcommand.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .curvalg import FlowParams, pinching_predicate
from .errors import DomainError, HoroflowError
from .graphgeom import GeometryFields, GraphState, enclosed_volume_integrand
from .hypergeom import AmbientCurvature

logger = logging.getLogger(__name__)

DIAGNOSTICS_MAGIC = "# horoflow-diagnostics v1"
CSV_COLUMNS = (
    "t",
    "V",
    "Fbar",
    "Fmin",
    "Fmax",
    "Qtilde_min",
    "f_max",
    "Htilde_min",
    "lambda_tilde_min",
    "Phi_min",
    "Z_max",
    "dt",
)

# Per-recorded-step slack for monotonicity of the pinching ratio; discrete
# curvature noise makes exact monotonicity unattainable.
MONOTONE_TOL_PER_STEP = 1.0e-6

# Roundness-deficit samples below this are floating-point residue of a
# converged state and are excluded from decay-rate fits.
FIT_NOISE_FLOOR = 1.0e-13

# Tolerance on the speed lower bound F >= a^{m beta}.
SPEED_FLOOR_SLACK = 1.0e-8


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One monitored step: extrema of every theorem-level quantity.

    Qtilde_min, f_max are NaN when the shifted trace is nonpositive
    somewhere (the ratio is undefined there); Z_max is NaN when the support
    function does not clear the offset.  The CSV row carries the twelve
    float columns; the two booleans are derived views.
    """

    t: float
    V: float
    Fbar: float
    Fmin: float
    Fmax: float
    Qtilde_min: float
    f_max: float
    Htilde_min: float
    lambda_tilde_min: float
    Phi_min: float
    Z_max: float
    dt: float
    h_convex: bool
    pinched: bool | None

    def as_row(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in CSV_COLUMNS)


def record(
    state: GraphState,
    fields: GeometryFields,
    params: FlowParams,
    zeta_epsilon: float,
    dt: float,
    c_star: float | None = None,
) -> DiagnosticsRecord:
    """Condense one state into a DiagnosticsRecord.

    All reductions are single ordered numpy folds over the node axis, so
    identical inputs give bitwise identical rows.
    """
    n = params.n
    a = params.a
    weights = state.grid.weights
    V = float(np.sum(weights * enclosed_volume_integrand(state.r_flat, params)))

    total_area = float(np.sum(fields.area_weight))
    if total_area <= 0.0:
        raise DomainError("total area weight must be positive")
    fbar = float(np.sum(fields.F * fields.area_weight)) / total_area

    shifted = fields.lam - a
    lam_tilde_min = float(np.min(shifted))
    htilde = np.sum(shifted, axis=-1)
    htilde_min = float(np.min(htilde))

    if htilde_min > 0.0:
        qtilde = np.prod(shifted, axis=-1) / htilde**n
        qtilde_min = float(np.min(qtilde))
        f_max = 1.0 / n**n - qtilde_min
    else:
        qtilde_min = math.nan
        f_max = math.nan

    phi_min = float(np.min(fields.Phi))
    if phi_min > zeta_epsilon:
        z_max = float(np.max(fields.F / (fields.Phi - zeta_epsilon)))
    else:
        z_max = math.nan

    pinched: bool | None = None
    if c_star is not None:
        pinched = bool(np.all(pinching_predicate(fields.lam, params, c_star)))

    return DiagnosticsRecord(
        t=float(state.t),
        V=V,
        Fbar=fbar,
        Fmin=float(np.min(fields.F)),
        Fmax=float(np.max(fields.F)),
        Qtilde_min=qtilde_min,
        f_max=f_max,
        Htilde_min=htilde_min,
        lambda_tilde_min=lam_tilde_min,
        Phi_min=phi_min,
        Z_max=z_max,
        dt=float(dt),
        h_convex=lam_tilde_min > 0.0,
        pinched=pinched,
    )


class DiagnosticsRecorder:
    """Accumulates records for one run and serializes them deterministically."""

    def __init__(self, params: FlowParams, zeta_epsilon: float, c_star: float | None = None):
        self.params = params
        self.zeta_epsilon = float(zeta_epsilon)
        self.c_star = c_star
        self.records: list[DiagnosticsRecord] = []

    def observe(self, state: GraphState, fields: GeometryFields, dt: float) -> DiagnosticsRecord:
        rec = record(state, fields, self.params, self.zeta_epsilon, dt, self.c_star)
        self.records.append(rec)
        return rec

    def meta_line(self) -> str:
        p = self.params
        return (
            f"{DIAGNOSTICS_MAGIC}, n={p.n}, m={p.m}, "
            f"beta={float(p.beta)!r}, kappa={float(p.ac.kappa)!r}"
        )

    def arrays(self) -> dict[str, np.ndarray]:
        """Column arrays of the recorded series, in CSV column order."""
        if not self.records:
            return {name: np.empty(0) for name in CSV_COLUMNS}
        table = np.array([rec.as_row() for rec in self.records])
        return {name: table[:, k] for k, name in enumerate(CSV_COLUMNS)}

    def write_csv(self, path: str) -> None:
        lines = [self.meta_line(), ",".join(CSV_COLUMNS)]
        for rec in self.records:
            lines.append(",".join(repr(v) for v in rec.as_row()))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def load_diagnostics(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a diagnostics CSV back into (metadata, column arrays).

    The leading metadata comment is optional: a plain CSV starting with the
    column header parses with empty metadata (callers supply the flow
    parameters some other way, e.g. CLI flags).
    """
    with open(path) as fh:
        first = fh.readline().strip()
        match = re.match(
            r"# horoflow-diagnostics v1, n=(\d+), m=(\d+), beta=([^,]+), kappa=(.+)$", first
        )
        if match:
            meta = {
                "n": int(match.group(1)),
                "m": int(match.group(2)),
                "beta": float(match.group(3)),
                "kappa": float(match.group(4)),
            }
            header = fh.readline().strip()
        else:
            meta = {}
            header = first
        if header != ",".join(CSV_COLUMNS):
            raise HoroflowError(f"unexpected diagnostics column header: {header!r}")
        body = fh.read()
    data = np.loadtxt(StringIO(body), delimiter=",", ndmin=2)
    if data.size == 0:
        return meta, {name: np.empty(0) for name in CSV_COLUMNS}
    if data.shape[1] != len(CSV_COLUMNS):
        raise HoroflowError(f"{path} has {data.shape[1]} columns, expected {len(CSV_COLUMNS)}")
    return meta, {name: data[:, k] for k, name in enumerate(CSV_COLUMNS)}


@dataclass(frozen=True)
class MonotoneReport:
    """Outcome of a monotonicity check: worst violation and where it happened."""

    ok: bool
    worst_violation: float
    index: int | None


def check_monotone(series, direction: str = "nondecreasing", tol: float = 0.0) -> MonotoneReport:
    """Check that consecutive differences respect the direction within tol."""
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DomainError("monotonicity check needs a 1-d series with >= 2 samples")
    if direction == "nondecreasing":
        violations = -np.diff(y)
    elif direction == "nonincreasing":
        violations = np.diff(y)
    else:
        raise DomainError(f"unknown direction {direction!r}")
    worst = float(np.max(violations))
    if worst <= tol:
        return MonotoneReport(ok=True, worst_violation=max(worst, 0.0), index=None)
    return MonotoneReport(ok=False, worst_violation=worst, index=int(np.argmax(violations)) + 1)


@dataclass(frozen=True)
class ExponentialFit:
    """Least-squares fit of y ~ amplitude * exp(-rate * t) on log(y)."""

    rate: float
    amplitude: float
    r_squared: float
    n_used: int
    clipped: bool


def fit_exponential(t, y, skip_fraction: float = 0.1, floor: float | None = None) -> ExponentialFit:
    """Fit an exponential decay rate by least squares on (t, log y).

    The first skip_fraction of the samples is excluded as transient.
    Nonpositive y values are clipped to a machine-epsilon floor and flagged;
    passing `floor` instead drops samples below it entirely (used to cut the
    floating-point residue of converged runs out of the window).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise DomainError("fit needs matching 1-d time and value arrays")
    if not 0.0 <= skip_fraction < 1.0:
        raise DomainError("skip_fraction must be in [0, 1)")
    keep = np.isfinite(t) & np.isfinite(y)
    if floor is not None:
        keep &= y > floor
    t, y = t[keep], y[keep]
    start = int(skip_fraction * t.size)
    t, y = t[start:], y[start:]
    if t.size < 10:
        raise DomainError(f"fit needs >= 10 usable samples, got {t.size}")

    clipped = bool(np.any(y <= 0.0))
    if clipped:
        logger.warning("fit_exponential: clipping %d nonpositive samples", int(np.sum(y <= 0.0)))
        y = np.maximum(y, np.finfo(float).eps)

    log_y = np.log(y)
    slope, intercept = np.polyfit(t, log_y, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((log_y - pred) ** 2))
    ss_tot = float(np.sum((log_y - np.mean(log_y)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return ExponentialFit(
        rate=float(-slope),
        amplitude=float(np.exp(intercept)),
        r_squared=r_squared,
        n_used=int(t.size),
        clipped=clipped,
    )


def analyze_diagnostics(meta: dict, cols: dict[str, np.ndarray]) -> dict:
    """Produce the verdict dictionary for a recorded diagnostics series.

    Keys: monotone_Qtilde (pinching ratio minimum nondecreasing within the
    per-step tolerance), volume_drift (max relative deviation from the first
    record), decay_rate and r_squared (exponential fit of the roundness
    deficit above the noise floor), bounds_respected (speed floor, shifted
    positivity, finite speed-bound ratio on every record).
    """
    t = cols["t"]
    if t.size < 2:
        raise DomainError("analysis needs at least two recorded steps")

    qtilde = cols["Qtilde_min"]
    finite_q = np.isfinite(qtilde)
    if np.sum(finite_q) >= 2:
        monotone = check_monotone(qtilde[finite_q], "nondecreasing", MONOTONE_TOL_PER_STEP)
        monotone_ok = monotone.ok
    else:
        monotone_ok = False

    v = cols["V"]
    volume_drift = float(np.max(np.abs(v - v[0])) / abs(v[0]))

    try:
        fit = fit_exponential(t, cols["f_max"], floor=FIT_NOISE_FLOOR)
        decay_rate, r_squared = fit.rate, fit.r_squared
    except DomainError:
        decay_rate, r_squared = math.nan, math.nan

    a = AmbientCurvature(kappa=meta["kappa"]).a
    speed_floor = a ** (meta["m"] * meta["beta"]) - SPEED_FLOOR_SLACK
    bounds_respected = bool(
        np.all(cols["Fmin"] >= speed_floor)
        and np.all(cols["Htilde_min"] > 0.0)
        and np.all(cols["lambda_tilde_min"] > 0.0)
        and np.all(np.isfinite(cols["Z_max"]))
    )
    return {
        "monotone_Qtilde": bool(monotone_ok),
        "volume_drift": volume_drift,
        "decay_rate": decay_rate,
        "r_squared": r_squared,
        "bounds_respected": bounds_respected,
    }

"""Config grammar, subcommand behavior, and process exit codes."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from horoflow import (
    ConfigurationError,
    make_grid,
    perturbed_sphere_state,
    save_snapshot,
)
from horoflow.cli import (
    EXIT_INVARIANT,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    _parse_scalar,
    config_from_values,
    main,
    parse_config,
    read_config_text,
)
from horoflow.curvalg import DEFAULT_SAMPLES

MINIMAL = {
    "params.n": 2,
    "params.m": 1,
    "params.beta": 1.0,
    "params.kappa": -1.0,
    "initial.shape": "sphere",
    "initial.r0": 1.0,
}


def write_config(tmp_path, name="run.cfg", **overrides):
    values = {**MINIMAL, **overrides}
    lines = [f"{key} = {value}" for key, value in values.items()]
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------


def test_parse_scalar_types():
    assert _parse_scalar("true") is True
    assert _parse_scalar("Off") is False
    assert _parse_scalar("42") == 42
    assert isinstance(_parse_scalar("42"), int)
    assert _parse_scalar("1e-3") == 1e-3
    assert _parse_scalar("heun") == "heun"


def test_read_config_text_round_trip():
    text = """
    # a comment
    params.n = 2
    params.kappa = -1.0   # trailing comment
    grid.mode = axisymmetric

    flow.renormalize_volume = true
    """
    values = read_config_text(text)
    assert values == {
        "params.n": 2,
        "params.kappa": -1.0,
        "grid.mode": "axisymmetric",
        "flow.renormalize_volume": True,
    }


def test_read_config_text_collects_all_problems():
    text = "params.n 2\nnodots = 1\nparams.m = 1\nparams.m = 2\n"
    with pytest.raises(ConfigurationError) as err:
        read_config_text(text)
    problems = err.value.problems
    assert len(problems) == 3
    assert "line 1" in problems[0]
    assert "dotted" in problems[1]
    assert "duplicate" in problems[2]


# ---------------------------------------------------------------------------
# Validation and defaults
# ---------------------------------------------------------------------------


def test_minimal_config_defaults():
    config = config_from_values(dict(MINIMAL))
    assert config.params.n == 2
    assert config.grid.mode == "axisymmetric"
    assert config.grid.n_theta == 256
    assert config.control.scheme == "heun"
    assert config.control.safety == 0.2
    assert config.control.dt_min == 1e-10
    assert config.control.dt_max == 1e-2
    assert config.t_end == 10.0
    assert config.f_tol == 1e-8
    assert config.record_interval == 0.002
    assert config.snapshot_interval is None
    assert config.renormalize_volume is False
    assert config.output_dir is None
    assert config.constants_samples == DEFAULT_SAMPLES
    assert config.constants_seed == 0
    assert np.all(config.initial.r == 1.0)


def test_config_collects_all_problems_at_once():
    values = {
        "params.n": 1,
        "params.m": 0,
        "params.beta": -1.0,
        "params.kappa": 0.5,
        "initial.shape": "cube",
        "control.scheme": "euler",
        "flow.t_end": -3.0,
        "bogus.key": 1,
    }
    with pytest.raises(ConfigurationError) as err:
        config_from_values(values)
    text = "\n".join(err.value.problems)
    assert len(err.value.problems) >= 7
    assert "unknown key 'bogus.key'" in text
    assert "params.n must be >= 2" in text
    assert "params.beta must be positive" in text
    assert "params.kappa must be negative" in text
    assert "initial.shape" in text
    assert "control.scheme" in text
    assert "flow.t_end must be positive" in text


def test_config_perturbation_rules():
    values = {
        **MINIMAL,
        "initial.shape": "perturbed_sphere",
        "initial.mode_l": 1,
        "initial.amplitude": 0.5,
        "initial.mode_phi": 2,
    }
    with pytest.raises(ConfigurationError) as err:
        config_from_values(values)
    text = "\n".join(err.value.problems)
    assert "(0 rescales, 1 translates)" in text
    assert "amplitude/r0" in text
    assert "mode_phi requires grid.mode = full2d" in text


def test_config_full2d_rules():
    values = {**MINIMAL, "grid.mode": "full2d", "grid.n_phi": 31}
    with pytest.raises(ConfigurationError) as err:
        config_from_values(values)
    assert any("even integer" in p for p in err.value.problems)
    good = config_from_values({**MINIMAL, "grid.mode": "full2d", "grid.n_theta": 32, "grid.n_phi": 16})
    assert good.grid.mode == "full2d"
    assert good.initial.r.shape == (32, 16)


def test_config_snapshot_interval_zero_disables():
    config = config_from_values({**MINIMAL, "flow.snapshot_interval": 0})
    assert config.snapshot_interval is None
    config = config_from_values({**MINIMAL, "flow.snapshot_interval": 0.5})
    assert config.snapshot_interval == 0.5


def test_config_custom_snapshot(tmp_path):
    state = perturbed_sphere_state(make_grid("axisymmetric", 2, 48), 1.0, 2, 0.05)
    snap = str(tmp_path / "start.csv")
    save_snapshot(state, snap)
    config = config_from_values(
        {
            "params.n": 2,
            "params.m": 1,
            "params.beta": 1.0,
            "params.kappa": -1.0,
            "initial.shape": "custom",
            "initial.snapshot": snap,
        }
    )
    assert np.array_equal(config.initial.r, state.r)
    with pytest.raises(ConfigurationError) as err:
        config_from_values(
            {
                "params.n": 3,
                "params.m": 1,
                "params.beta": 1.0,
                "params.kappa": -1.0,
                "initial.shape": "custom",
                "initial.snapshot": snap,
            }
        )
    assert any("does not match params.n" in p for p in err.value.problems)


def test_parse_config_reads_files(tmp_path):
    path = write_config(tmp_path, **{"grid.n_theta": 48, "constants.n_samples": 2000})
    config = parse_config(path)
    assert config.grid.n_theta == 48
    with pytest.raises(ConfigurationError):
        parse_config(str(tmp_path / "absent.cfg"))


# ---------------------------------------------------------------------------
# Dispatch and exit codes
# ---------------------------------------------------------------------------


def test_usage_and_unknown_subcommand(capsys):
    assert main([]) == EXIT_USAGE
    assert "subcommands" in capsys.readouterr().out
    assert main(["help"]) == EXIT_OK
    assert main(["--help"]) == EXIT_OK
    assert main(["frobnicate"]) == EXIT_USAGE
    assert "unknown subcommand" in capsys.readouterr().err


def test_malformed_flags_exit_usage(capsys):
    assert main(["run"]) == EXIT_USAGE
    assert main(["oracle", "banana"]) == EXIT_USAGE
    assert main(["oracle", "sphere", "abc", "1.0"]) == EXIT_USAGE
    assert main(["constants", "--samples", "many"]) == EXIT_USAGE
    capsys.readouterr()


def test_run_bad_config_lists_problems(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("params.n = 1\nparams.m = 0\nparams.beta = 1.0\nparams.kappa = -1.0\ninitial.shape = sphere\ninitial.r0 = 1.0\n")
    assert main(["run", str(path)]) == EXIT_INVARIANT
    err = capsys.readouterr().err
    assert "configuration error" in err
    assert "params.n must be >= 2" in err
    assert main(["run", str(tmp_path / "nope.cfg")]) == EXIT_INVARIANT


def test_run_sphere_converges(tmp_path, capsys):
    path = write_config(
        tmp_path, **{"grid.n_theta": 48, "constants.n_samples": 2000}
    )
    assert main(["run", path]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["converged"] is True
    assert summary["n_steps"] == 0
    assert summary["status"] == "converged"
    assert summary["params"] == {"n": 2, "m": 1, "beta": 1.0, "kappa": -1.0}


def test_run_max_steps_flag(tmp_path, capsys):
    path = write_config(
        tmp_path,
        **{
            "grid.n_theta": 48,
            "initial.shape": "perturbed_sphere",
            "initial.mode_l": 2,
            "initial.amplitude": 0.05,
            "flow.t_end": 50.0,
            "constants.n_samples": 2000,
        },
    )
    assert main(["run", path, "--max-steps", "3"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["status"] == "max_steps"
    assert summary["n_steps"] == 3


def test_run_stiff_config_exits_numerical(tmp_path, capsys):
    path = write_config(
        tmp_path,
        **{
            "grid.n_theta": 96,
            "initial.shape": "perturbed_sphere",
            "initial.mode_l": 2,
            "initial.amplitude": 0.01,
            "control.dt_min": 1e-3,
            "control.dt_max": 1e-2,
            "flow.t_end": 10.0,
            "constants.n_samples": 2000,
        },
    )
    assert main(["run", path]) == EXIT_NUMERICAL
    assert "numerical abort" in capsys.readouterr().err


def test_oracle_writes_trajectory(tmp_path, capsys):
    out = str(tmp_path / "traj.csv")
    code = main(["oracle", "sphere", "1.0", "0.3", "--samples", "31", "--out", out])
    assert code == EXIT_OK
    lines = open(out).read().strip().splitlines()
    assert lines[0] == "t,r,residual"
    assert len(lines) == 32
    last = lines[-1].split(",")
    t, r, res = (float(v) for v in last)
    assert t == 0.3
    assert r == pytest.approx(math.acosh(math.cosh(1.0) * math.exp(-0.3)), abs=1e-8)
    assert abs(res) < 1e-8
    # stdout mode
    assert main(["oracle", "sphere", "1.0", "0.1", "--samples", "11"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("t,r,residual")


def test_constants_outputs(tmp_path, capsys):
    json_path = str(tmp_path / "constants.json")
    csv_path = str(tmp_path / "constants.csv")
    code = main(
        [
            "constants",
            "--n", "2", "--m", "1", "--samples", "500",
            "--json", json_path, "--csv", csv_path,
        ]
    )
    assert code == EXIT_OK
    payload = json.loads(open(json_path).read())
    assert payload["degenerate"] is True  # linear speed: flat hessian ceiling
    assert payload["epsilon0"] == pytest.approx(0.01)
    assert payload["c_star"] == pytest.approx(0.0099)
    table = payload["table"]
    sizes = {len(table[k]) for k in ("eps", "gap_bound", "gradient_floor", "hessian_ceiling")}
    assert len(sizes) == 1
    rows = open(csv_path).read().strip().splitlines()
    assert rows[0] == "eps,gap_bound,gradient_floor,hessian_ceiling"
    assert len(rows) == len(table["eps"]) + 1
    capsys.readouterr()


def test_analyze_verdict_flow(tmp_path, capsys):
    out_dir = str(tmp_path / "out")
    path = write_config(
        tmp_path,
        **{
            "grid.n_theta": 48,
            "initial.shape": "perturbed_sphere",
            "initial.mode_l": 2,
            "initial.amplitude": 0.05,
            "flow.t_end": 0.4,
            "constants.n_samples": 2000,
            "output.dir": out_dir,
        },
    )
    assert main(["run", path]) == EXIT_OK
    capsys.readouterr()
    csv = f"{out_dir}/diagnostics.csv"
    assert main(["analyze", csv]) == EXIT_OK
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["monotone_Qtilde"] is True
    assert verdict["bounds_respected"] is True
    assert verdict["volume_drift"] < 1e-8


def test_analyze_headerless_needs_flags(tmp_path, capsys):
    from horoflow import CSV_COLUMNS

    path = tmp_path / "plain.csv"
    header = ",".join(CSV_COLUMNS)
    row_a = ",".join(repr(float(v)) for v in [0.0, 5.0, 1.3, 1.2, 1.4, 0.2, 0.05, 0.6, 0.3, 1.1, 1.2, 1e-3])
    row_b = ",".join(repr(float(v)) for v in [0.1, 5.0, 1.3, 1.2, 1.4, 0.21, 0.04, 0.6, 0.3, 1.1, 1.2, 1e-3])
    path.write_text(header + "\n" + row_a + "\n" + row_b + "\n")
    assert main(["analyze", str(path)]) == EXIT_INVARIANT
    err = capsys.readouterr().err
    for key in ("--n", "--m", "--beta", "--kappa"):
        assert key in err
    code = main(["analyze", str(path), "--n", "2", "--m", "1", "--beta", "1.0", "--kappa", "-1.0"])
    assert code == EXIT_OK
    capsys.readouterr()
    assert main(["analyze", str(tmp_path / "missing.csv")]) == EXIT_INVARIANT


def test_check_suite_passes(capsys):
    assert main(["check", "--samples", "500"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "FAIL" not in out
    assert out.count("ok   -") >= 10

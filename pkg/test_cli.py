import json
import math

import pytest
from click.testing import CliRunner

from main import cli
from models import ChannelParams, ProtocolParams
from services.channel import sift_probability

KEYRATE_ARGS = ["keyrate", "--eta", "0.8", "--xi", "0.04", "--alpha", "0.6", "--x-th", "0.3",
                "--kappa", "12", "--gamma", "1.2"]

SMALL_GRID = {
    "alpha2_grid": {"start": 0.30, "stop": 0.40, "step": 0.05},
    "gamma_grid": {"start": 1.0, "stop": 2.0, "step": 0.5},
    "kappa_grid": {"start": 10.0, "stop": 30.0, "step": 10.0},
    "x_th_grid": {"start": 0.0, "stop": 0.4, "step": 0.2},
}


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_keyrate_prints_breakdown(runner):
    result = runner.invoke(cli, KEYRATE_ARGS)
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert set(payload) == {"p_sift", "e_bit", "f0", "b_const", "minus_term", "e_ph_bound", "rate"}
    # target defaults to the matched amplitude
    assert payload["f0"] == pytest.approx(0.98, rel=1e-12)


def test_out_of_range_transmission_names_the_field(runner):
    args = list(KEYRATE_ARGS)
    args[args.index("0.8")] = "1.5"
    result = runner.invoke(cli, args)
    assert result.exit_code == 2
    assert "channel.eta" in result.stderr
    assert "transmission" in result.stderr


def test_mismatched_heterodyne_target_is_a_configuration_error(runner):
    result = runner.invoke(cli, KEYRATE_ARGS + ["--beta", "0.1", "--fidelity-model", "heterodyne"])
    assert result.exit_code == 2
    assert "heterodyne" in result.stderr


def test_flags_override_config_file(runner, tmp_path):
    config_path = _write_config(tmp_path, {
        "channel": {"eta": 0.5, "xi": 0.04},
        "protocol": {"alpha": 0.6, "x_th": 0.3},
        "dual": {"kappa": 12.0, "gamma": 1.2},
    })
    result = runner.invoke(cli, ["keyrate", "--config", config_path, "--eta", "0.8"])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    expected = sift_probability(ProtocolParams(alpha=0.6, x_th=0.3), ChannelParams(eta=0.8, xi=0.04))
    assert payload["p_sift"] == pytest.approx(expected, rel=1e-15)
    assert payload["f0"] == pytest.approx(0.98, rel=1e-12)


def test_unknown_config_key_rejected(runner, tmp_path):
    config_path = _write_config(tmp_path, {"bogus": 1})
    result = runner.invoke(cli, ["fidelity-bounds", "--config", config_path])
    assert result.exit_code == 2
    assert "bogus" in result.stderr


def test_malformed_config_file_rejected(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    result = runner.invoke(cli, ["fidelity-bounds", "--config", str(path)])
    assert result.exit_code == 2


def test_missing_parameters_rejected(runner):
    result = runner.invoke(cli, ["keyrate", "--eta", "0.8", "--xi", "0.0"])
    assert result.exit_code == 2


def test_output_file_instead_of_stdout(runner, tmp_path):
    target = tmp_path / "point.json"
    result = runner.invoke(cli, KEYRATE_ARGS + ["--output", str(target)])
    assert result.exit_code == 0, result.stderr
    assert result.stdout == ""
    assert json.loads(target.read_text(encoding="utf-8"))["rate"] >= 0.0


def test_fidelity_bounds_table(runner):
    result = runner.invoke(cli, ["fidelity-bounds"])
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.strip().splitlines()
    assert lines[0] == "xi,exact,lambda,theorem1"
    assert len(lines) == 102
    xi, exact, lam, moment = (float(v) for v in lines[-1].split(","))
    assert xi == 1.0
    assert exact == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert moment <= lam <= exact


def test_fidelity_bounds_as_json(runner):
    result = runner.invoke(cli, ["fidelity-bounds", "--xi-start", "0", "--xi-stop", "0.1", "--xi-step", "0.05",
                                 "--format", "json"])
    assert result.exit_code == 0, result.stderr
    rows = json.loads(result.stdout)
    assert [row["xi"] for row in rows] == pytest.approx([0.0, 0.05, 0.1])


def test_sweep_from_config_file(runner, tmp_path):
    config_path = _write_config(tmp_path, {
        "grid": SMALL_GRID,
        "xi": [0.0, 0.02],
        "loss": {"start": 0.0, "stop": 0.3, "step": 0.3},
    })
    result = runner.invoke(cli, ["sweep", "--config", config_path])
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.strip().splitlines()
    assert lines[0] == "xi,loss,rate,alpha,x_th,kappa,gamma,beta"
    assert len(lines) == 5
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0 and first[1] == 0.0 and first[2] > 0.0


def test_sweep_rejects_total_loss(runner):
    result = runner.invoke(cli, ["sweep", "--loss-start", "0.5", "--loss-stop", "1.0", "--loss-step", "0.5"])
    assert result.exit_code == 2


def test_optimize_with_comparison(runner, tmp_path):
    config_path = _write_config(tmp_path, {"grid": SMALL_GRID})
    result = runner.invoke(cli, ["optimize", "--config", config_path, "--eta", "0.9", "--xi", "0.0",
                                 "--compare-fixed-beta"])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["best"]["rate"] > 0.0
    assert payload["refined_beta_rate"] >= payload["fixed_beta_rate"]
    assert payload["arg"]["beta"] > 0.0


def test_verify_rejects_negative_kappa(runner):
    result = runner.invoke(cli, ["verify-operator", "--kappa", "-1"])
    assert result.exit_code == 2
    assert "kappa" in result.stderr


def test_verify_report_shape(runner):
    result = runner.invoke(cli, ["verify-operator", "--n-max", "8"])
    assert result.exit_code == 0, result.stderr
    report = json.loads(result.stdout)
    for key in ("lambda_min", "n_max", "converged", "tolerance", "truncation_shift"):
        assert key in report
    assert report["n_max"] == 8
    assert report["lambda_min"] >= -1e-6
    assert [check["beta"] for check in report["theorem1"]] == [0.0, 0.5]


@pytest.mark.slow
def test_default_verify_run_passes(runner):
    result = runner.invoke(cli, ["verify-operator"])
    assert result.exit_code == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["n_max"] == 40
    assert report["passed"] is True
    assert report["lambda_min"] >= -report["tolerance"]
    assert report["operator_inequality"]["lambda_min_confirm"] >= -report["tolerance"]


def test_monte_carlo_is_reproducible(runner):
    args = ["mc", "--n-samples", "200000", "--seed", "5"]
    first = runner.invoke(cli, args)
    second = runner.invoke(cli, args)
    assert first.exit_code == 0, first.stderr
    assert first.stdout == second.stdout
    payload = json.loads(first.stdout)
    assert payload["passed"] is True
    assert payload["seed"] == 5
    assert "power_sums" not in payload
    assert math.isclose(payload["beta"], math.sqrt(0.8) * 0.6)


def test_workers_option_does_not_change_monte_carlo(runner):
    args = ["mc", "--n-samples", "50000", "--seed", "9", "--block-size", "8192"]
    single = runner.invoke(cli, ["--workers", "1"] + args)
    several = runner.invoke(cli, ["--workers", "4"] + args)
    assert single.stdout == several.stdout

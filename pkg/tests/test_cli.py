import io
import json

import pandas as pd
import pytest

from core.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main, run, worker_count
from core.errors import ConfigurationError

FAST = ["--set", "channel.n_samples=1000"]


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def _csv(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return pd.read_csv(io.StringIO(body))


def test_lyrrc_command(capsys):
    assert main(["lyrrc", *FAST]) == EXIT_OK
    doc = _json_out(capsys)
    assert doc["command"] == "lyrrc"
    assert doc["config"]["system"]["M"] == 64
    assert doc["config"]["channel"]["n_samples"] == 1000
    assert doc["result"]["status"] == "ok"
    assert doc["result"]["resolution_limited"] is True
    assert set(doc) == {"command", "version", "config", "result"}


def test_output_is_reproducible(tmp_path):
    out = tmp_path / "lyrrc.json"
    assert main(["lyrrc", *FAST, "--seed", "3", "--out", str(out)]) == EXIT_OK
    first = out.read_bytes()
    assert main(["lyrrc", *FAST, "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == first
    assert json.loads(first)["config"]["simulation"]["seed"] == 3


def test_schema_error_exit_code(capsys):
    assert main(["lyrrc", "--set", "system.bogus=1"]) == EXIT_USAGE
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert payload["error"] == "SchemaError"
    assert payload["pointer"] == "/system/bogus"


def test_missing_config_file(tmp_path):
    assert run("lyrrc", config_path=str(tmp_path / "nope.json")) == EXIT_USAGE


def test_unknown_subcommand():
    assert run("frobnicate") == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_runtime_failure_exit_code(capsys):
    users = json.dumps([{"power_budget_dbm": -30.0}, {}])
    assert main(["lyrrc-mu", *FAST, "--set", f"multiuser.users={users}"]) == EXIT_RUNTIME
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "InfeasibleError"


def test_lyrrc_mu(capsys):
    assert main(["lyrrc-mu", *FAST]) == EXIT_OK
    result = _json_out(capsys)["result"]
    assert result["mode"] == "lyrrc"
    assert len(result["users"]) == 4


def test_power_map_csv(tmp_path):
    out = tmp_path / "power.csv"
    code = main(["power-map", *FAST, "--set", "solver.eps_grid=[0.01, 0.1]", "--out", str(out)])
    assert code == EXIT_OK
    text = out.read_text()
    assert text.startswith("# command: power-map\n")
    assert "# version: " in text
    table = _csv(text)
    assert list(table.columns) == ["r", "eps", "p", "p_dbm", "feasible"]
    assert len(table) == 2 * 11


def test_power_map_as_json(capsys):
    code = main(["power-map", *FAST, "--set", "solver.eps_grid=[0.01]",
                 "--set", "output.format=json"])
    assert code == EXIT_OK
    assert len(_json_out(capsys)["result"]["rows"]) == 11


def test_simulate_reports_exact_value(capsys):
    code = main(["simulate", *FAST, "--set", "simulation.horizon=10000",
                 "--set", "system.drop_penalty_s=0"])
    assert code == EXIT_OK
    result = _json_out(capsys)["result"]
    assert result["policy"]["name"] == "rule-of-double"
    assert result["report"]["latency_frames"] == pytest.approx(result["exact"]["latency"],
                                                               abs=0.01)


def test_simulate_fixed_rule(capsys):
    code = main(["simulate", *FAST, "--set", "simulation.horizon=10000",
                 "--set", "policy.kind=drain", "--set", "policy.eps=0.01"])
    assert code == EXIT_OK
    assert _json_out(capsys)["result"]["policy"]["name"] == "drain"


def test_solve_command(capsys):
    code = main(["solve", *FAST, "--set", "solver.eps_grid=[0.001, 0.01]",
                 "--set", "solver.alpha=0.99", "--set", "solver.tol=1e-4"])
    assert code == EXIT_OK
    result = _json_out(capsys)["result"]
    assert result["chosen"] is not None
    assert len(result["records"]) == 2


def test_curve_command(capsys):
    code = main(["curve", *FAST, "--set", "curve.M_values=[32, 64]"])
    assert code == EXIT_OK
    table = _csv(capsys.readouterr().out)
    assert list(table["M"]) == [32, 64]
    assert list(table["status"]) == ["utilization_infeasible", "ok"]


def test_curve_at_fixed_utilization(capsys):
    code = main(["curve", *FAST, "--set", "curve.M_values=[16, 64]",
                 "--set", "curve.fixed_rho=0.8"])
    assert code == EXIT_OK
    table = _csv(capsys.readouterr().out)
    assert table["rho"].tolist() == pytest.approx([0.8, 0.8])


def test_channel_stats(capsys):
    code = main(["channel-stats", *FAST, "--set", "channel.stats_samples=2000"])
    assert code == EXIT_OK
    result = _json_out(capsys)["result"]
    assert result["mean_kappa"] == pytest.approx(result["theoretical_mean_kappa"], rel=0.05)
    assert result["kappa_samples"] == 2000
    assert result["eta_mean"] == pytest.approx(result["theoretical_eta_mean"], rel=0.01)
    assert set(result["eta_quantiles"]) == {"0.0001", "0.001", "0.01", "0.1", "0.5"}


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MMLAT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MMLAT_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        worker_count()
    monkeypatch.setenv("MMLAT_THREADS", "0")
    with pytest.raises(ConfigurationError):
        worker_count()


def test_solve_with_baselines(capsys):
    code = main(["solve", *FAST, "--set", "solver.eps_grid=[0.01]", "--set", "solver.baselines=true",
                 "--set", "solver.alpha=0.99", "--set", "solver.tol=1e-4"])
    assert code == EXIT_OK
    baselines = _json_out(capsys)["result"]["baselines"]
    assert baselines["fixed_eps"]["eps"] == 0.1
    assert baselines["peak_power"]["label"] == "peak-power"
    assert baselines["peak_power"]["beta"] is None


def test_solve_curve_as_csv(capsys):
    code = main(["solve", *FAST, "--set", "solver.eps_grid=[0.001, 0.01]",
                 "--set", "solver.alpha=0.99", "--set", "solver.tol=1e-4",
                 "--set", "output.format=csv"])
    assert code == EXIT_OK
    table = _csv(capsys.readouterr().out)
    assert list(table["eps"]) == [0.001, 0.01]
    assert {"D_eps", "D_eps_ms", "beta", "avg_power", "feasible"} <= set(table.columns)

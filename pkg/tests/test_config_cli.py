import csv
import json
import math
from pathlib import Path

import pytest

from mftrade import cli
from mftrade.config import DEFAULTS, apply_overrides, build_portfolio, load_config, resolve
from mftrade.errors import ConfigError, ParameterDomainError

ROOT = Path(__file__).resolve().parents[1]
DESK_CFG = ROOT / "configs" / "desk.yaml"


def test_shipped_config_equals_defaults():
    assert load_config(DESK_CFG) == load_config(None)


def test_build_portfolio_counts():
    pf = build_portfolio(load_config(DESK_CFG))
    assert pf.n == 100 and pf.sigma2 == pytest.approx(1.0)


def test_asset_blocks_and_defaults(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("assets:\n  - {count: 2, gamma: 2.0}\n  - {beta: 0.5, m_cap: 3}\nlambda_risk: 0.1\n")
    cfg = load_config(f)
    pf = build_portfolio(cfg)
    assert pf.n == 3
    assert [a.gamma for a in pf.assets] == [2.0, 2.0, 1.0]
    assert pf.assets[2].beta == 0.5 and pf.assets[2].m_cap == 3.0
    assert pf.lambda_risk == 0.1


def test_overrides():
    cfg = apply_overrides(load_config(None), ["assets.0.gamma=2", "slope_search.rounds=1", "rate.q_hat=[0.1, 0.2]"])
    assert cfg["assets"][0]["gamma"] == 2
    assert cfg["slope_search"]["rounds"] == 1
    assert cfg["rate"]["q_hat"] == [0.1, 0.2]
    assert resolve(None, [], seed=9)["master_seed"] == 9
    assert DEFAULTS["assets"][0]["gamma"] == 1.0


@pytest.mark.parametrize("bad", ["nokey=1", "assets.5.gamma=1", "assets.0.color=red", "lambda_risk", "horizon.x=1"])
def test_bad_overrides(bad):
    with pytest.raises(ConfigError):
        apply_overrides(load_config(None), [bad])


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    f = tmp_path / "bad.yaml"
    f.write_text("assets: [\n")
    with pytest.raises(ConfigError):
        load_config(f)
    f.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(f)
    f.write_text("colour: blue\n")
    with pytest.raises(ConfigError) as err:
        load_config(f)
    assert err.value.field == "colour"


def test_build_portfolio_names_offending_field():
    cfg = apply_overrides(load_config(None), ["assets.0.psi=-1"])
    with pytest.raises(ParameterDomainError) as err:
        build_portfolio(cfg)
    assert err.value.field == "assets.0.psi"
    cfg = apply_overrides(load_config(None), ["assets.0.count=0"])
    with pytest.raises(ConfigError):
        build_portfolio(cfg)


def run(tmp_path, *argv):
    return cli.run([*argv, "--out", str(tmp_path)])


def test_cli_threshold(tmp_path):
    assert run(tmp_path, "threshold", "--config", str(DESK_CFG)) == 0
    data = json.loads((tmp_path / "threshold.json").read_text())
    rec = data["result"]["thresholds"][0]
    assert rec["regime"] == "intermediate"
    assert rec["q_star"] == pytest.approx(1.1447e-2, abs=1e-6)
    assert rec["q1"] == pytest.approx(1.0947e-2, abs=1e-6)
    assert data["config"]["assets"][0]["count"] == 100
    assert data["seeds"]["master_seed"] == 0


def test_cli_rate_and_fig2(tmp_path):
    args = ["--set", "rate.horizon=200000", "--set", "rate.q_hat=[0.1, 0.362, 2.0]"]
    assert run(tmp_path, "rate", *args) == 0
    rows = list(csv.DictReader(open(tmp_path / "rate.csv")))
    assert list(rows[0]) == ["q_hat", "j_exact", "j_small", "j_large", "j_mc", "stderr"]
    assert rows[0]["j_large"] == "" and rows[2]["j_small"] == ""
    assert run(tmp_path, "fig2", *args) == 0
    rows = list(csv.DictReader(open(tmp_path / "fig2.csv")))
    assert list(rows[0]) == ["q_hat", "j_simulated", "j_approx", "j_exact", "stderr"]


def test_cli_fig3_columns(tmp_path):
    assert run(tmp_path, "fig3", "--set", "slope_search.horizon=100000", "--set", "slope_search.rounds=1") == 0
    rows = list(csv.DictReader(open(tmp_path / "fig3.csv")))
    assert list(rows[0]) == ["jbar_over_eps", "s_hat", "s_theory"]
    assert [float(r["jbar_over_eps"]) for r in rows] == [1.0, 2.0, 5.0, 10.0]


def test_cli_slope_search_writes_curve(tmp_path):
    code = run(tmp_path, "slope-search", "--set", "slope_search.horizon=200000", "--set", "slope_search.rounds=1")
    assert code in (0, cli.EXIT_BOUNDARY)
    rows = list(csv.reader(open(tmp_path / "pnl_curve.csv")))
    assert rows[0] == ["round", "S", "pnl"] and len(rows) == 12


def test_cli_simulate_is_byte_identical(tmp_path):
    args = ["simulate", "--set", "horizon=20000", "--set", "assets.0.count=8", "--set", "lambda_risk=0.01", "--write-path"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, *args) == 0 and run(b, *args) == 0
    assert (a / "simulate.json").read_bytes() == (b / "simulate.json").read_bytes()
    assert (a / "r_path.csv").read_bytes() == (b / "r_path.csv").read_bytes()
    assert "theory" in json.loads((a / "simulate.json").read_text())["result"]["report"]


def test_cli_risk_calibrate_target(tmp_path):
    assert run(tmp_path, "risk-calibrate", "--set", "risk.target=0.5") == 0
    res = json.loads((tmp_path / "risk_calibrate.json").read_text())["result"]
    assert res["report"]["realized"] == pytest.approx(0.5, rel=1e-12)
    assert res["lambda_for_target"] > 0


def test_cli_fit_ou(tmp_path):
    from mftrade.ou import OuParams, simulate_ar1

    simulate_ar1(OuParams(0.02, 0.1), 20_000, 1).to_csv(tmp_path / "p.csv")
    assert run(tmp_path, "fit-ou", "--path", str(tmp_path / "p.csv")) == 0
    fit = json.loads((tmp_path / "fit_ou.json").read_text())["result"]["fit"]
    assert fit["kappa_hat"] == pytest.approx(0.02, rel=0.3)


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cli_error_codes(tmp_path, capsys):
    assert run(tmp_path, "threshold", "--set", "assets.0.psi=-1") == cli.EXIT_DOMAIN
    err = _error(capsys)
    assert err["field"] == "assets.0.psi" and err["exit_code"] == cli.EXIT_DOMAIN
    assert run(tmp_path, "threshold", "--config", str(tmp_path / "none.yaml")) == cli.EXIT_CONFIG
    assert _error(capsys)["error"] == "ConfigError"
    assert run(tmp_path, "fit-ou") == cli.EXIT_CONFIG
    capsys.readouterr()
    (tmp_path / "flat.csv").write_text("step,value\n" + "".join(f"{i},1.0\n" for i in range(200)))
    assert run(tmp_path, "fit-ou", "--path", str(tmp_path / "flat.csv")) == cli.EXIT_NUMERICAL
    assert _error(capsys)["error"] == "NonStationaryFitError"
    assert run(tmp_path, "risk-calibrate", "--set", "risk.target=-1") == cli.EXIT_DOMAIN


def test_cli_unknown_command(capsys):
    with pytest.raises(SystemExit) as err:
        cli.run(["bogus"])
    assert err.value.code == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_clean_replaces_non_finite():
    out = cli._clean({"a": math.nan, "b": [math.inf, 1.0], "c": (2, None)})
    assert out == {"a": None, "b": [None, 1.0], "c": [2, None]}

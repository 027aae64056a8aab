import csv

import numpy as np
import pytest

from crossturn.cli import ConfigError, RunConfig, load_config, main

SMALL = ["--days", "160", "--assets", "12", "--window", "40", "--seed", "5"]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_stats_one_alpha(tmp_path, capsys):
    assert run(tmp_path, "stats", *SMALL, "--alpha", "paper1") == 0
    rows = read_csv(tmp_path / "set_stats.csv")
    assert rows[0] == ["alpha", "cumPnL", "sharpe", "T", "stdPnL", "T_over_std"]
    assert len(rows) == 2 and len(rows[1]) == 6
    assert str(tmp_path / "set_stats.csv") in capsys.readouterr().out


def test_stats_duplicated_alpha_correlation(tmp_path):
    assert run(tmp_path, "stats", *SMALL, "--alpha", "paper2", "--alpha", "paper2") == 0
    rows = read_csv(tmp_path / "set_correlation.csv")
    assert float(rows[1][2]) == 1.0 and float(rows[2][1]) == 1.0


def test_stats_builtins(tmp_path):
    assert run(tmp_path, "stats", *SMALL) == 0
    rows = read_csv(tmp_path / "set_stats.csv")
    assert [r[0] for r in rows[1:]] == ["paper1", "paper2", "paper3", "paper4"]
    for r in rows[1:]:
        cum, sharpe, tau, std, ratio = map(float, r[1:])
        assert std > 0 and tau > 0
        assert ratio == pytest.approx(tau / std, rel=1e-12)


def test_pairs_two_alphas_six_rows(tmp_path):
    assert run(tmp_path, "pairs", *SMALL, "--alpha", "paper1", "--alpha", "paper3") == 0
    rows = read_csv(tmp_path / "set_pairs.csv")
    assert rows[0] == ["estimator", "rho1", "rho2", "rho3", "rho4", "rho5"]
    assert [r[0] for r in rows[1:]] == ["kl_pair", "t1", "t2", "t3", "t4", "tmax"]
    assert (tmp_path / "set_pairs.md").exists()


def test_sobol_count_one(tmp_path):
    assert run(tmp_path, "sobol", *SMALL, "--count", "1", "--name", "a") == 0
    assert run(tmp_path, "series", *SMALL, "--name", "b") == 0
    sobol = {r[0]: r for r in read_csv(tmp_path / "a_sobol.csv")[1:]}
    assert float(sobol["tmax"][3]) == pytest.approx(1.0)
    series = read_csv(tmp_path / "b_series.csv")
    real = np.array([float(r[1]) for r in series[1:]])
    kl = np.array([float(r[2]) for r in series[1:]])
    assert float(sobol["kl_spectral"][2]) == pytest.approx(np.abs(kl - real).mean(), rel=1e-12)


def test_series_contract(tmp_path):
    assert run(tmp_path, "series", *SMALL, "--alpha", "paper1", "--alpha", "paper4") == 0
    rows = read_csv(tmp_path / "set_series.csv")
    assert rows[0] == ["date", "real", "kl", "t1", "t2", "t3", "t4", "tmax"]
    for r in rows[1:]:
        assert float(r[1]) <= float(r[7])
    pnl = read_csv(tmp_path / "set_cumpnl.csv")
    for name in ("paper1", "paper4"):
        col = [r for r in pnl[1:] if r[1] == name]
        np.testing.assert_allclose(
            [float(r[3]) for r in col], np.cumsum([float(r[2]) for r in col]), atol=1e-12
        )


def test_series_with_negative_weights(tmp_path):
    assert run(tmp_path, "series", *SMALL, "--alpha", "paper1", "--alpha", "paper3", "--weights", "1", "-0.5") == 0


def test_theory(tmp_path):
    assert run(tmp_path, "theory", "--seed", "1") == 0
    rows = read_csv(tmp_path / "set_theory.csv")
    assert rows[0] == ["check", "measured", "expected", "tolerance", "passed"]
    assert all(r[4] == "True" for r in rows[1:])


def test_synth_then_load(tmp_path):
    assert run(tmp_path, "synth", "--days", "50", "--assets", "3", "--seed", "2") == 0
    files = sorted(p.name for p in (tmp_path / "data").iterdir())
    assert files == ["S0000.csv", "S0001.csv", "S0002.csv"]
    out = tmp_path / "stats"
    assert main(["stats", "--data", str(tmp_path / "data"), "--out", str(out), "--alpha", "close"]) == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'days = 120\nassets = 8\nwindow = 30\nalphas = ["paper1", "paper4"]\nname = "cfg"\n'
        "[synthetic]\nvolatility = 0.03\n"
    )
    loaded = load_config(cfg)
    assert loaded.days == 120 and loaded.alphas == ("paper1", "paper4")
    assert loaded.synthetic.volatility == 0.03
    assert run(tmp_path, "pairs", "--config", str(cfg), "--name", "flag") == 0
    assert (tmp_path / "flag_pairs.csv").exists() and not (tmp_path / "cfg_pairs.csv").exists()


def test_estimator_selection(tmp_path):
    assert run(tmp_path, "pairs", *SMALL, "--estimators", "t1", "kl_pair") == 0
    assert [r[0] for r in read_csv(tmp_path / "set_pairs.csv")[1:]] == ["kl_pair", "t1", "tmax"]


@pytest.mark.parametrize(
    "text,key",
    [
        ("colour = 1\n", "colour"),
        ("window = 'x'\n", "window"),
        ("alphas = 'paper1'\n", "alphas"),
        ("[synthetic]\nvol = 1\n", "synthetic.vol"),
        ("window = \n", "config"),
    ],
)
def test_config_errors_name_key(tmp_path, text, key):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError, match=key):
        load_config(path)


@pytest.mark.parametrize(
    "args,needle",
    [
        (["pairs", "--window", "1"], "window"),
        (["pairs", "--alpha", "paper1"], "alphas"),
        (["stats", "--alpha", "delay(close"], "alphas[0]"),
        (["stats", "--data", "/nonexistent/dir"], "nonexistent"),
        (["series", "--alpha", "paper1", "--alpha", "paper2", "--weights", "1"], "weights"),
        (["pairs", "--estimators", "bogus"], "estimators"),
    ],
)
def test_errors_exit_nonzero(tmp_path, capsys, args, needle):
    assert run(tmp_path, *args, "--days", "60", "--assets", "5") == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ") and needle in err


def test_default_config():
    cfg = RunConfig()
    assert cfg.window == 250 and cfg.count == 100 and len(cfg.alphas) == 4

import subprocess
import sys

import numpy as np
import pytest

from rescale import scenarios as sc
from rescale.cli import main, read_config
from rescale.errors import ConfigError
from rescale.io import read_csv

FAST = ["--t-end", "0.2"]


def _ini(tmp_path, body, name="run.ini"):
    p = tmp_path / name
    p.write_text("[scenario]\n" + body)
    return str(p)


def test_list(capsys):
    assert main(["--list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 10
    assert lines[0].startswith("scaling-d1")
    assert main(["list"]) == 0


def test_unknown_scenario_suggests(capsys):
    assert main(["run", "--scenario", "vp-radial-d5"]) == 1
    err = capsys.readouterr().err
    assert "unknown scenario" in err and "did you mean" in err


@pytest.mark.parametrize("args", [["--scenario", "nls-critical-d1", "--dt", "-1"],
                                  ["--scenario", "nls-critical-d1", "--cadence", "0"],
                                  ["--scenario", "nls-critical-d1", "--seed", "-3"],
                                  []])
def test_invalid_config_exit_1(tmp_path, args):
    assert main(["run", "--out", str(tmp_path)] + args) == 1


@pytest.mark.parametrize("body", ["id = scaling-d1\nfoo = 1\n", "id = scaling-d1\nN = 2.5\n",
                                  "id = scaling-d1\neps = 2\n", "id = scaling-d1\nmodel = nls\n"])
def test_bad_ini_exit_1(tmp_path, body):
    assert main(["--config", _ini(tmp_path, body), "--out", str(tmp_path / "o")]) == 1


def test_ini_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "missing.ini"))
    p = tmp_path / "x.ini"
    p.write_text("[other]\na = 1\n")
    with pytest.raises(ConfigError):
        read_config(str(p))
    name, over, out = read_config(_ini(tmp_path, "id = vp-radial-d3\nN = 1e4\nt_end = 2\nout = here\n"))
    assert (name, over, out) == ("vp-radial-d3", {"N": 10000, "t_end": 2.0}, "here")


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--scenario", "scaling-d1", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["manifest.txt", "scaling.csv", "scaling.png", "summary.csv", "tau.png"]
    summary = (out / "summary.csv").read_text()
    assert summary.startswith("key,value\nmax_error_R,")
    man = (out / "manifest.txt").read_text()
    assert "status = ok" in man and "scaling.csv " in man and "[config]" in man
    assert "outputs in" in capsys.readouterr().out


def test_no_plot(tmp_path):
    assert main(["--scenario", "scaling-d1", "--out", str(tmp_path), "--no-plot"]) == 0
    assert not list(tmp_path.glob("*.png"))


def test_precedence_flags_over_ini(tmp_path):
    ini = _ini(tmp_path, "id = scaling-d1\nt_end = 3\ndt = 0.01\n")
    assert main(["--config", ini, "--t-end", "2", "--out", str(tmp_path / "o"), "--no-plot"]) == 0
    man = (tmp_path / "o" / "manifest.txt").read_text()
    assert "t_end = 2.0" in man and "dt = 0.01" in man
    t = read_csv(tmp_path / "o" / "scaling.csv")["t"]
    assert t[-1] == pytest.approx(2.0)


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RESCALE_OUT_DIR", str(tmp_path / "root"))
    assert main(["--scenario", "scaling-lambda", "--t-end", "5", "--no-plot"]) == 0
    assert (tmp_path / "root" / "scaling-lambda" / "lambda_residuals.csv").exists()


def test_abort_exit_2_keeps_partial(tmp_path, capsys):
    ini = _ini(tmp_path, "id = vp1d-cold-slab\neps = 1\nN = 2000\nt_end = 50\n")
    out = tmp_path / "o"
    assert main(["--config", ini, "--out", str(out)]) == 2
    assert "run aborted" in capsys.readouterr().err
    assert (out / "partial.csv").exists()
    assert "status,aborted" in (out / "summary.csv").read_text()
    assert "status = aborted" in (out / "manifest.txt").read_text()


def test_rerun_is_byte_identical(tmp_path):
    args = ["--scenario", "nls-critical-d1", "--t-end", "0.3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in a:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rescale", "--list"], capture_output=True, text=True)
    assert res.returncode == 0 and "sp-radial-d3" in res.stdout


def test_config_validation():
    with pytest.raises(ConfigError):
        sc.make_config("scaling-d1", colour="red")
    with pytest.raises(ConfigError):
        sc.ScenarioConfig("scaling-d1", "nls", 1)
    with pytest.raises(ConfigError):
        sc.ScenarioConfig("scaling-d1", "ode", 1, t_end=float("inf"))
    cfg = sc.make_config("vp-radial-d3", seed=4)
    assert "seed = 4\n" in cfg.as_text()


@pytest.mark.parametrize("sid", [s[0] for s in sc.list_scenarios()])
def test_every_scenario_runs_small(sid, tmp_path):
    d = sc.get(sid).defaults
    over = {"t_end": min(d.t_end, 2.0)}
    if d.model not in ("nls", "sp"):
        over["N"] = min(d.N, 500)
    if sid == "interpolation-lemma-d3":
        over = {"N": 5}
    outcome = sc.run(sc.make_config(sid, **over), tmp_path)
    assert (tmp_path / "summary.csv").exists()
    assert list(tmp_path.glob("*.csv"))
    for f in outcome.figures:
        assert len(f.x) == len(f.series[0][1])
    assert all(np.isfinite(v) or np.isnan(v) for v in outcome.summary.values()
               if isinstance(v, float))

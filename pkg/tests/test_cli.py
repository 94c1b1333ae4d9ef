import re
import subprocess
import sys

import numpy as np
import pytest

from ssanova_deriv import cli
from ssanova_deriv.lattice import SpectralFit
from ssanova_deriv.sim import Truth

SIM = """seed = 7
[truth]
d = 2
r = 2
max_frequency = 3
[design]
kind = "lattice"
resolutions = [9, 8]
[data]
p = 2
sigmas = [0, 0, 0]
"""


def _run(*argv):
    return cli.dispatch([str(a) for a in argv])


def test_exponent_output(capsys):
    assert _run("exponent", "--m", 2, "--d", 1, "--r", 1, "--p", 0, "--target", "function") == 0
    assert capsys.readouterr().out == "-0.8 0\n"
    assert _run("exponent", "--m", 2, "--d", 2, "--r", 2, "--p", 2) == 0
    assert capsys.readouterr().out == "-1 1\n"


def test_exponent_bad_arguments(capsys):
    assert _run("exponent", "--m", 2, "--d", 1, "--r", 2, "--p", 0) == 1
    assert "r" in capsys.readouterr().err


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "missing.toml"
    assert _run("rates", "--config", missing, "--out", tmp_path / "o") == 1
    err = capsys.readouterr().err
    assert str(missing) in err and err.count("\n") == 1
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("body,key", [("bogus = 1\n", "bogus"),
                                      ("[truth]\nd = 1\nr = 1\ncolour = 2\n", "truth.colour"),
                                      ("[truth]\nd = 1\n", "truth.r"),
                                      ("[truth]\nd = 1.5\nr = 1\n", "truth.d"),
                                      ("[extras]\nx = 1\n", "extras")])
def test_strict_config(tmp_path, capsys, body, key):
    cfg = tmp_path / "c.toml"
    cfg.write_text(body)
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert key in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_simulate_then_fit_round_trip(tmp_path):
    (tmp_path / "sim.toml").write_text(SIM)
    (tmp_path / "fit.toml").write_text('[data]\npath = "sim/dataset.txt"\n[fit]\nr = 2\nlambda = 0.0\n')
    assert _run("simulate", "--config", tmp_path / "sim.toml", "--out", tmp_path / "sim") == 0
    assert _run("fit-lattice", "--config", tmp_path / "fit.toml", "--out", tmp_path / "fit") == 0
    truth = Truth.load(tmp_path / "sim" / "truth.txt")
    fit = SpectralFit.load(tmp_path / "fit" / "fit.txt")
    padded = np.zeros(fit.theta.shape)
    padded[tuple(slice(0, s) for s in truth.theta.shape)] = truth.theta
    assert np.abs(fit.theta - padded).max() <= 1e-8
    manifest = (tmp_path / "sim" / "manifest.txt").read_text()
    assert "seed = 7" in manifest and "truth.max_frequency = 3" in manifest
    assert all(re.fullmatch(r"[\w.]+ = .+", ln) for ln in manifest.splitlines())


def test_fit_kernel_and_degenerate_exit(tmp_path, capsys):
    sim = SIM.replace('kind = "lattice"', 'kind = "iid_uniform"\nn = 12').replace(
        "resolutions = [9, 8]\n", "").replace("sigmas = [0, 0, 0]", "sigmas = [0.1, 0.1, 0.1]")
    (tmp_path / "sim.toml").write_text(sim)
    assert _run("simulate", "--config", tmp_path / "sim.toml", "--out", tmp_path / "sim") == 0
    fit = '[data]\npath = "sim/dataset.txt"\n[fit]\nr = 2\nlambda = {lam}\nseries_cutoff = 0\n'
    (tmp_path / "k.toml").write_text(fit.format(lam=1e-3))
    assert _run("fit-kernel", "--config", tmp_path / "k.toml", "--out", tmp_path / "k") == 0
    assert (tmp_path / "k" / "kernel_fit.txt").is_file()

    dup = tmp_path / "dup.txt"
    lines = (tmp_path / "sim" / "dataset.txt").read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    row = lines[len(header) + 1]
    dup.write_text("\n".join(header + ["channel,t1,t2,response,scale", row, row]) + "\n")
    dup.write_text(dup.read_text().replace('# p = 2', '# p = 0').replace(
        '# sigmas = [0.1, 0.1, 0.1]', '# sigmas = [0.1]'))
    (tmp_path / "d.toml").write_text(fit.format(lam=0.0).replace("sim/dataset.txt", "dup.txt"))
    assert _run("fit-kernel", "--config", tmp_path / "d.toml", "--out", tmp_path / "d") == 2
    assert "degenera" in capsys.readouterr().err
    assert not (tmp_path / "d").exists()


def test_rates_threads_give_identical_csv(tmp_path):
    cfg = tmp_path / "r.toml"
    cfg.write_text("seed = 1\n[rates]\nd = 2\nr = 2\np = 1\nreplicates = 3\n"
                   "n_grid = [36, 64, 100, 144]\n")
    assert _run("rates", "--config", cfg, "--out", tmp_path / "a") == 0
    assert _run("rates", "--config", cfg, "--out", tmp_path / "b", "--threads", 3) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "rates.csv").read_bytes() == (b / "rates.csv").read_bytes()
    assert "rates.sigmas = [1.0, 1.0]" in (a / "manifest.txt").read_text()


def test_rates_infeasible_grid(tmp_path, capsys):
    cfg = tmp_path / "r.toml"
    cfg.write_text("[rates]\nd = 2\nr = 2\nn_grid = [36, 64, 99, 144]\n")
    assert _run("rates", "--config", cfg, "--out", tmp_path / "a") == 1
    assert "nearest feasible" in capsys.readouterr().err


def test_help_names_units_and_defaults():
    parser = cli.build_parser()
    subs = next(a for a in parser._actions if a.choices and "rates" in a.choices).choices
    numeric = [a for sp in subs.values() for a in sp._actions if a.type in (int, float)]
    assert numeric
    for action in numeric:
        assert "default" in action.help and any(u in action.help for u in ("count", "dimensionless"))
    out = subprocess.run([sys.executable, "-m", "ssanova_deriv", "exponent", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "smoothness order" in out

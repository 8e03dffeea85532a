import os

import numpy as np
import pytest

from cglab import cli
from cglab.config import config_hash, load_config, parse_config
from cglab.errors import ConfigError, SpectralConvergenceError
from cglab.pipeline import RunOptions, run_pipeline, summarize
from helpers import CONFIG_DIR

CAP = os.path.join(CONFIG_DIR, "cap.cfg")
CUBE = os.path.join(CONFIG_DIR, "cube.cfg")
SEVEN = os.path.join(CONFIG_DIR, "seven_points.cfg")


def _points(n=8):
    return "".join(f"point = {0.1 * k:.2f}, {0.05 * k * k:.3f}\n" for k in range(n))


def test_parse_complex_and_triples():
    text = _points(7) + "point = 0.0, 0.6, 0.8\nalpha_prime = 2.5\nmesh_level = 1\npairing = 1-8, 2-3, 4-5, 6-7\n"
    cfg = parse_config(text)
    assert cfg.branch.alpha_prime == 2.5
    assert cfg.branch.mesh_level == 1
    assert cfg.branch.pairing == ((0, 7), (1, 2), (3, 4), (5, 6))


def test_parse_inf_and_comments():
    cfg = parse_config("# header\n" + _points(7) + "point = inf  # the pole\n")
    assert np.allclose(cfg.branch.points[7], [-1, 0, 0])


@pytest.mark.parametrize("text, where", [
    (_points(8) + "colour = red\n", "line 9"),
    (_points(8) + "alpha_prime = fast\n", "line 9"),
    ("point = 1, 2, 3, 4\n" + _points(7), "line 1"),
    (_points(3) + "point = 0.5, 0.5, 0.5\n" + _points(4), "line 4"),
    (_points(8) + "mesh_level = 1\nmesh_level = 2\n", "line 10"),
    (_points(8) + "just words\n", "line 9"),
    (_points(7), "point"),
    (_points(8) + "alpha_prime = -1\n", "alpha_prime"),
    (_points(8) + "pairing = 1-2, 3-4\n", "pairing"),
])
def test_parse_errors_are_located(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/cfg")


def test_hash_is_canonical():
    a = parse_config(_points(8) + "alpha_prime = 1\n")
    b = parse_config("# different spacing\n" + _points(8).replace(" = ", "=") + "alpha_prime = 1.000\n")
    assert config_hash(a.branch) == config_hash(b.branch)
    c = parse_config(_points(8) + "alpha_prime = 2\n")
    assert config_hash(a.branch) != config_hash(c.branch)


def test_solve_cap_exit_zero(tmp_path, capsys):
    assert cli.main(["solve", "--config", CAP, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "hemisphere: FEASIBLE (margin 0.88)" in out
    assert "index ≤ 15" in out
    (folder,) = list(tmp_path.iterdir())
    summary = dict(line.split(" = ", 1) for line in (folder / "summary.txt").read_text().splitlines())
    assert int(summary["spectrum.index"]) >= 2
    assert float(summary["solve.quadratic"]) <= 1e-12
    assert float(summary["solve.pde_analytic"]) <= 1e-9
    assert summary["status"] == "ok"


def test_solve_cube_exit_three(tmp_path, capsys):
    assert cli.main(["solve", "--config", CUBE, "--out", str(tmp_path)]) == 3
    captured = capsys.readouterr()
    assert "index 1 < deg 2: Strominger ansatz unsolvable" in captured.out
    assert "certificate" in captured.err
    assert "hemisphere: INFEASIBLE" in captured.out


def test_seven_points_exit_two(tmp_path, capsys):
    assert cli.main(["solve", "--config", SEVEN, "--out", str(tmp_path)]) == 2
    assert "expected 8 branch points" in capsys.readouterr().err


def test_bad_level_exit_two(tmp_path):
    assert cli.main(["mesh", "--config", CAP, "--level", "9", "--out", str(tmp_path)]) == 2


def test_bad_thread_env_exit_two(tmp_path, monkeypatch):
    monkeypatch.setenv("CGLAB_THREADS", "zero")
    assert cli.main(["mesh", "--config", CAP, "--out", str(tmp_path)]) == 2


def test_thread_cap_runs(tmp_path, monkeypatch):
    monkeypatch.setenv("CGLAB_THREADS", "1")
    assert cli.main(["mesh", "--config", CAP, "--level", "0", "--out", str(tmp_path), "--quiet"]) == 0


def test_numerical_failure_exit_four(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise SpectralConvergenceError("eigensolver did not converge (3 of 16)", np.array([1e-3]))
    monkeypatch.setattr(cli, "run_pipeline", boom)
    assert cli.main(["spectrum", "--config", CAP, "--out", str(tmp_path)]) == 4
    assert "numerical failure" in capsys.readouterr().err


def test_unwritable_directory_exit_five(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["mesh", "--config", CAP, "--out", str(blocker / "sub"), "--quiet"]) == 5


def test_spectrum_files(tmp_path):
    assert cli.main(["spectrum", "--config", CAP, "--eigs", "10", "--out", str(tmp_path), "--quiet"]) == 0
    (folder,) = list(tmp_path.iterdir())
    lines = (folder / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "k,lambda,residual"
    assert len(lines) == 11
    vertices = len((folder / "vertices.csv").read_text().splitlines()) - 1
    fields = len((folder / "fields.csv").read_text().splitlines()) - 1
    assert vertices == fields == 1276


def test_repeated_runs_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["report", "--config", CAP, "--samples", "10", "--out", str(d), "--quiet"]) == 0
        (folder,) = list(d.iterdir())
        outs.append((folder.name, {p.name: p.read_bytes() for p in sorted(folder.iterdir())}))
    assert outs[0] == outs[1]
    assert {"mesh.off", "vertices.csv", "fields.csv", "spectrum.csv", "solution.csv", "identities.csv",
            "summary.txt", "periods.csv"} <= set(outs[0][1])


def test_report_numbers_match_csv(tmp_path):
    assert cli.main(["solve", "--config", CAP, "--out", str(tmp_path), "--quiet"]) == 0
    (folder,) = list(tmp_path.iterdir())
    summary = dict(line.split(" = ", 1) for line in (folder / "summary.txt").read_text().splitlines())
    rows = np.loadtxt(folder / "solution.csv", delimiter=",", skiprows=1)
    ram = np.loadtxt(folder / "vertices.csv", delimiter=",", skiprows=1)[:, 7].astype(bool)
    assert abs(rows[ram, 1].min() - float(summary["solve.u_min_ramification"])) <= 1e-9
    assert int(summary["mesh.V"]) == len(rows)
    spec = np.loadtxt(folder / "spectrum.csv", delimiter=",", skiprows=1)
    delta = float(summary["spectrum.delta"])
    assert np.count_nonzero(np.abs(spec[:, 1] - 2) <= delta) == int(summary["spectrum.kernel_multiplicity"])


def test_cover_option(capsys):
    rep = run_pipeline(load_config(CAP), "spectrum", RunOptions(level=1, cover=2))
    assert rep.mesh_stats["chi"] == -8
    assert rep.spectral.index >= 4
    text = summarize(rep)
    assert "genus 5" in text and "index ≤ 30" in text


def test_verify_subcommand(capsys):
    rep = run_pipeline(load_config(CAP), "verify", RunOptions(samples=12))
    assert float(rep.get("verify.max_algebraic")) <= 1e-10
    assert float(rep.get("verify.max_differential")) <= 1e-9
    assert float(rep.get("verify.period_homology_defect")) <= 1e-6
    assert all(n == 12 for _, _, n in rep.identities)

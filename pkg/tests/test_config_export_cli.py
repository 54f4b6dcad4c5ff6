import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptdimer import cli
from ptdimer.config import config_hash, parse_config
from ptdimer.errors import ConfigError
from ptdimer.export import LOG10_FLOOR, export_trajectory, read_heatmap, write_heatmap
from ptdimer.lattice import LatticeParams
from ptdimer.propagation import GAIN_SITE, evolve
from ptdimer.recipes import heatmap_files, run_figure_recipe

# config


def test_minimal_config_defaults():
    cfg = parse_config('{"command": "evolve", "nu": 1, "nu_prime": 1, "gamma": 0.5}')
    assert cfg.lattice == LatticeParams(41, 1.0, 1.0, 0.5)
    assert cfg.initial.theta == 0 and cfg.initial.dimer == 0
    assert (cfg.t_max, cfg.n_times) == (10.0, 501)


@pytest.mark.parametrize(
    "text,key",
    [
        ('{"command": "evolve", "nu_prime": 1, "gamma": 0.5, "n_dimers": 40}', "n_dimers"),
        ('{"command": "evolve", "nu_prime": 1, "gamma": -0.5}', "gamma"),
        ('{"command": "evolve", "nu_prime": 1, "gamma": 0.5, "colour": 1}', "<root>"),
        ('{"command": "evolve", "nu_prime": "x", "gamma": 0.5}', "nu_prime"),
        ('{"command": "meandisp", "nu_prime": 1, "gamma": 0.5, "quadrature": {"tail_tol": "a"}}', "quadrature/tail_tol"),
        ('{"command": "meandisp", "nu_prime": 1, "gamma": 0.5, "quadrature": {"tail_tol": 2}}', "quadrature"),
        ('{"command": "meandisp", "nu_prime": 1, "gamma": 0}', "gamma"),
        ('{"command": "evolve", "nu_prime": 1}', "gamma"),
        ('{"command": "evolve", "nu_prime": 1, "gamma": 0.5, "dimer": 30}', "dimer"),
        ('{"command": "sweep", "gamma": 1, "nu_prime_list": [0.5, -1]}', "nu_prime_list/1"),
        ('{"command": "asymptotics-compare", "nu_prime": 0.5, "gamma": 0.2}', "gamma"),
        ('{"command": "meandisp", "nu_prime": 1, "gamma": 1, "disorder": {"strength": -1, "n_realizations": 2}}', "disorder/strength"),
    ],
)
def test_rejections_name_the_field(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == key


def test_bad_json_and_command_conflicts():
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")
    with pytest.raises(ConfigError):
        parse_config('{"command": "spectrum", "nu_prime": 1, "gamma": 0}', command="evolve")
    with pytest.raises(ConfigError):
        parse_config('{"nu_prime": 1, "gamma": 0}')


@given(st.permutations(["command", "nu", "nu_prime", "gamma", "n_dimers", "theta"]))
def test_hash_stable_under_reordering(order):
    base = {"command": "evolve", "nu": 1.0, "nu_prime": 0.5, "gamma": 0.2, "n_dimers": 21, "theta": 0.1}
    text = json.dumps({k: base[k] for k in order})
    assert parse_config(text).config_hash == parse_config(json.dumps(base)).config_hash


def test_hash_ignores_output_dir_but_not_physics():
    a = parse_config('{"command": "evolve", "nu_prime": 1, "gamma": 0.5, "out": "x"}')
    b = parse_config('{"command": "evolve", "nu_prime": 1, "gamma": 0.5, "out": "y"}')
    c = parse_config('{"command": "evolve", "nu_prime": 1, "gamma": 0.6}')
    assert a.config_hash == b.config_hash != c.config_hash
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})


# export


@pytest.fixture(scope="module")
def fig2_traj():
    return evolve(LatticeParams(41, 1, 1, 0.5), GAIN_SITE, 10, 500)


def test_heatmap_shape_and_format(tmp_path, fig2_traj):
    files = export_trajectory(fig2_traj, tmp_path)
    names = sorted(Path(f).name for f in files)
    assert names == ["intensity_g.csv", "intensity_l.csv", "manifest.json", "total_intensity.csv"]
    raw = (tmp_path / "intensity_g.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert len(lines) == 42
    assert all(len(line.split(",")) == 502 for line in lines)
    assert lines[0].startswith("m,0,0.02,")
    assert [int(line.split(",")[0]) for line in lines[1:]] == list(range(-20, 21))


def test_clamp(tmp_path, fig2_traj):
    export_trajectory(fig2_traj, tmp_path, manifest=False)
    _, _, values = read_heatmap(tmp_path / "intensity_l.csv")
    # at t = 0 only (0, G) is populated, so the loss column is all zeros
    assert np.all(values[:, 0] == LOG10_FLOOR)
    assert values.min() == LOG10_FLOOR


def test_round_trip(tmp_path, fig2_traj):
    export_trajectory(fig2_traj, tmp_path, manifest=False)
    dimers, times, values = read_heatmap(tmp_path / "intensity_g.csv")
    stored = np.maximum(fig2_traj.log10_intensity("G"), LOG10_FLOOR)
    np.testing.assert_array_equal(values, stored)
    np.testing.assert_array_equal(times, fig2_traj.times)
    assert dimers.tolist() == list(range(-20, 21))
    # the log10/exp10 pair itself costs about ln(10) |log10 I| ulp
    live = stored > LOG10_FLOOR
    recovered = 10.0 ** values[live]
    truth = fig2_traj.intensity_g[live]
    bound = 1e-15 * np.maximum(1.0, math.log(10) * np.abs(values[live]))
    assert np.all(np.abs(recovered - truth) / truth <= bound * 4)


@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False), min_size=1, max_size=20))
def test_csv_numbers_round_trip(tmp_path_factory, xs):
    path = tmp_path_factory.mktemp("rt") / "h.csv"
    write_heatmap(path, [0.0], range(len(xs)), [[x] for x in xs])
    _, _, values = read_heatmap(path)
    assert values[:, 0].tolist() == xs


def test_manifest_lists_every_file(tmp_path, fig2_traj):
    export_trajectory(fig2_traj, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    on_disk = sorted(p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*") if p.is_file())
    assert manifest["files"] == on_disk
    assert manifest["code_version"]


# recipes


def test_fig2_recipe(tmp_path):
    res = run_figure_recipe("fig2", tmp_path)
    assert [p.name for p in heatmap_files(res)] == ["intensity_g.csv", "intensity_l.csv"]


def test_unknown_recipe(tmp_path):
    with pytest.raises(Exception):
        run_figure_recipe("fig9", tmp_path)


# cli


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _tree(root):
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if not p.is_file():
            continue
        data = p.read_bytes()
        if p.name == "manifest.json":
            obj = json.loads(data)
            obj.pop("wall_time_s")
            data = json.dumps(obj, sort_keys=True).encode()
        out[p.relative_to(root).as_posix()] = data
    return out


def test_cli_evolve_and_env_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"nu": 1, "nu_prime": 1, "gamma": 0.5, "n_dimers": 11, "n_times": 21})
    assert cli.main(["evolve", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "intensity_g.csv").exists()
    monkeypatch.setenv("PTDIMER_OUT", str(tmp_path / "env"))
    assert cli.main(["evolve", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "env" / "manifest.json").exists() and not (tmp_path / "b").exists()


def test_cli_config_errors(tmp_path, capsys):
    bad = _write(tmp_path, {"nu_prime": 1, "gamma": 0.5, "n_dimers": 40})
    assert cli.main(["evolve", "--config", bad, "--out", str(tmp_path)]) == 2
    assert "n_dimers" in capsys.readouterr().err
    assert cli.main(["evolve", "--config", str(tmp_path / "missing.json")]) == 2
    ok = _write(tmp_path, {"nu_prime": 1, "gamma": 0.5}, "ok.json")
    assert cli.main(["evolve", "--config", ok, "--jobs", "0"]) == 2


def test_cli_numerical_failure(tmp_path):
    cfg = _write(
        tmp_path,
        {"nu_prime": 0.8, "gamma": 0.5, "n_dimers": 11, "quadrature": {"t_max": 1.0, "max_doublings": 0}},
    )
    assert cli.main(["meandisp", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    summary = json.loads((tmp_path / "o" / "meandisp.json").read_text())
    assert summary["converged"] is False


def test_cli_partial_sweep(tmp_path, monkeypatch):
    from ptdimer import transitions
    from ptdimer.errors import EigensolverError

    real = transitions.absorbed_distribution

    def flaky(params, *a, **kw):
        if params.nu_prime == 0.5:
            raise EigensolverError("injected")
        return real(params, *a, **kw)

    monkeypatch.setattr(transitions, "absorbed_distribution", flaky)
    cfg = _write(tmp_path, {"gamma": 1, "nu_prime_list": [0.5, 2.0], "n_dimers": 11})
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == 4
    rows = (tmp_path / "s" / "transition_curve.csv").read_text().splitlines()
    assert "injected" in rows[1] and rows[2].startswith("2,")


@pytest.mark.parametrize(
    "command,obj,expected",
    [
        ("spectrum", {"nu_prime": 0.5, "gamma": 0.2}, ["spectrum.csv", "spectrum.json"]),
        ("meandisp", {"nu_prime": 2, "gamma": 1, "disorder": {"strength": 0.05, "n_realizations": 3}}, ["absorbed.csv", "disorder.csv", "meandisp.json"]),
        ("sweep", {"gamma": 1, "nu_prime_list": [0.5, 2], "n_dimers": 21}, ["transition_curve.csv"]),
        ("asymptotics-compare", {"nu_prime": 1, "gamma": 1, "n_dimers": 61, "theta": 1.5707963267948966}, ["comparison.json", "profiles.csv"]),
        ("phase-diagram", {"nu_prime_list": [0.5, 1], "gamma_list": [0.2, 0.5]}, ["phase_grid.csv"]),
    ],
)
def test_cli_commands(tmp_path, command, obj, expected):
    out = tmp_path / "o"
    assert cli.main([command, "--config", _write(tmp_path, obj), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == sorted(expected + ["manifest.json"])


def test_cli_phase_diagram_needs_input(tmp_path):
    assert cli.main(["phase-diagram", "--config", _write(tmp_path, {}), "--out", str(tmp_path)]) == 2


def test_cli_determinism_across_runs_and_jobs(tmp_path):
    cfg = _write(tmp_path, {"recipe": "fig4", "n_times": 51})
    trees = []
    for jobs, name in [(1, "a"), (1, "b"), (3, "c")]:
        assert cli.main(["phase-diagram", "--config", cfg, "--jobs", str(jobs), "--out", str(tmp_path / name), "--seed", "5"]) == 0
        trees.append(_tree(tmp_path / name))
    assert trees[0] == trees[1] == trees[2]
    assert len([k for k in trees[0] if k.endswith(("intensity_g.csv", "intensity_l.csv"))]) == 30
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    on_disk = sorted(p.relative_to(tmp_path / "a").as_posix() for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert manifest["files"] == on_disk


def test_cli_seed_changes_disorder_only(tmp_path):
    cfg = _write(tmp_path, {"nu_prime": 2, "gamma": 1, "n_dimers": 21, "disorder": {"strength": 0.1, "n_realizations": 2}})
    for seed in ("1", "2"):
        assert cli.main(["meandisp", "--config", cfg, "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    a = (tmp_path / "1" / "disorder.csv").read_bytes()
    b = (tmp_path / "2" / "disorder.csv").read_bytes()
    assert a != b
    assert (tmp_path / "1" / "absorbed.csv").read_bytes() == (tmp_path / "2" / "absorbed.csv").read_bytes()

import json
import struct

import numpy as np
import pytest

from diraclimit.cli import main
from diraclimit.config import ConfigError, RunConfig, parse_config
from diraclimit.limit_harness import CSV_COLUMNS
from diraclimit.snapshot import read_snapshot, write_snapshot
from diraclimit.spectral import GridSpec, norm


def test_empty_config_gives_defaults():
    cfg = parse_config("{}")
    assert (cfg.params.kappa, cfg.params.s, cfg.params.m) == (2.0, 2.5, 1.0)
    assert (cfg.grid.n, cfg.grid.half_width) == (48, 12.0)


@pytest.mark.parametrize(
    "text, needle",
    [
        ('{"params": {"s": 2.9}}', "(2, 8/3]"),
        ('{"params": {"kappa": 2.5}}', "[2, 7/3)"),
        ('{"params": {"tau": 1.0}}', "tau"),
        ('{"params": {"c_list": [8, 4, 16]}}', "c_list"),
        ('{"grid": {"n": 15}}', "grid.n"),
        ('{"solver": {"bogus": 1}}', "solver.bogus: unknown key"),
        ("{not json", "malformed"),
        ("[1, 2]", "object"),
    ],
)
def test_bad_configs_name_the_key(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_config_round_trip_and_hash():
    cfg = parse_config('{"params": {"c": 5.0}, "seed": 9, "harness": {"decay_window": [2.5, 5.5]}}')
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    moved = cfg.model_copy(update={"output_dir": "elsewhere"})
    assert moved.config_hash() == cfg.config_hash()
    assert RunConfig().config_hash() != cfg.config_hash()


def test_snapshot_round_trip_and_layout(tmp_path):
    g = GridSpec(8, 3.5)
    rng = np.random.default_rng(0)
    u = rng.standard_normal((4, 8, 8, 8)) + 1j * rng.standard_normal((4, 8, 8, 8))
    path = tmp_path / "u.dspn"
    write_snapshot(path, u, g)
    raw = path.read_bytes()
    assert raw[:4] == b"DSPN"
    assert struct.unpack_from("<IIId", raw, 4) == (1, 8, 4, 3.5)
    # x index varies fastest: the second stored value is u[0, 1, 0, 0]
    second = struct.unpack_from("<dd", raw, 24 + 16)
    assert second == (u[0, 1, 0, 0].real, u[0, 1, 0, 0].imag)
    back, g2 = read_snapshot(path)
    assert np.array_equal(back, u) and g2 == g


def test_snapshot_rejects_corruption(tmp_path):
    path = tmp_path / "bad.dspn"
    path.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(path)
    g = GridSpec(8, 1.0)
    write_snapshot(path, np.zeros((2, 8, 8, 8), complex), g)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(ValueError, match="bytes"):
        read_snapshot(path)


def small_config(tmp_path, **extra):
    data = {"grid": {"n": 16}, **extra}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_solve_nls_writes_unit_mass_snapshot(tmp_path):
    out = tmp_path / "nls"
    code = main(["solve-nls", "--config", small_config(tmp_path), "--out", str(out)])
    assert code == 0
    h, g = read_snapshot(out / "h.dspn")
    assert abs(norm(h, g) - 1) < 1e-8
    meta = json.loads((out / "metadata.json").read_text())
    assert "started" in meta and meta["command"] == "solve-nls"
    assert not (out / "failure.json").exists()


def test_solve_dirac_with_trace(tmp_path):
    out = tmp_path / "dirac"
    code = main(["solve-dirac", "--config", small_config(tmp_path, params={"c": 4.0}), "--out", str(out), "--trace"])
    assert code == 0
    res = json.loads((out / "dirac.json").read_text())
    assert res["converged"] and 0 < res["gap"]
    assert (out / "dirac_trace.csv").exists()


def test_limit_sweep_outputs(tmp_path):
    out = tmp_path / "sweep"
    code = main(["limit-sweep", "--config", small_config(tmp_path), "--out", str(out)])
    header = [ln for ln in (out / "sweep.csv").read_text().splitlines() if not ln.startswith("#")][0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    first = (out / "sweep.csv").read_text().splitlines()[0]
    assert first.startswith("# config_hash=")
    for name in ("gap.gp", "g_norm.gp", "f_dist.gp", "h.dspn", "u_c16.dspn", "report.json"):
        assert (out / name).exists(), name
    # a 16^3 grid is too coarse for the decay window, so the run must report failure
    assert code == 1
    failure = json.loads((out / "failure.json").read_text())
    assert any(f["check"] == "decay" for f in failure["failures"])


def test_check_inequalities_exit_reflects_verdict(tmp_path):
    out = tmp_path / "ineq"
    cfg = small_config(tmp_path, inequalities={"n_samples": 20})
    code = main(["check-inequalities", "--config", cfg, "--out", str(out), "--seed", "4"])
    report = json.loads((out / "inequalities.json").read_text())
    assert code == (0 if report["pass"] else 1)
    assert report["seed"] == 4


def test_decay_fit_from_snapshot(tmp_path):
    g = GridSpec(48, 12.0)
    snap = tmp_path / "e.dspn"
    write_snapshot(snap, (np.exp(-g.radius) * np.ones(g.shape))[None].astype(complex), g)
    out = tmp_path / "fit"
    assert main(["decay-fit", "--input", str(snap), "--out", str(out)]) == 0
    assert abs(json.loads((out / "decay.json").read_text())["delta"] - 1) < 0.05


def test_usage_and_config_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"params": {"s": 2.9}}')
    assert main(["solve-nls", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "(2, 8/3]" in capsys.readouterr().err
    assert main(["solve-nls", "--config", str(tmp_path / "missing.json")]) == 2

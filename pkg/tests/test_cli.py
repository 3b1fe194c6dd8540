import math

import numpy as np
import pytest
import yaml

from irsopt import cli
from irsopt.channel import load_channels


def test_unit_helpers():
    assert cli.db_to_linear(10.0) == pytest.approx(10.0)
    assert cli.dbm_to_watts(30.0) == pytest.approx(1.0)
    assert cli.watts_to_dbm(1.0) == pytest.approx(30.0)
    assert math.isnan(cli.watts_to_dbm(math.inf))
    assert math.isnan(cli.watts_to_dbm(0.0))
    assert cli.watts_to_dbm(cli.dbm_to_watts(-42.5)) == pytest.approx(-42.5)


def test_config_from_dict_defaults_and_broadcast():
    cfg = cli.config_from_dict({"K": 3, "gamma_dB": 5.0})
    assert cfg.K == 3 and cfg.gamma.shape == (3,)
    assert np.allclose(cfg.gamma, 10.0 ** 0.5)
    cfg = cli.config_from_dict({"gamma_dB": [0.0, 10.0]})
    assert np.allclose(cfg.gamma, [1.0, 10.0])


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(cli.BadConfig):
        cli.config_from_dict({"Mx": 2})


def test_profile_loading():
    raw = cli.load_profile("paper")
    assert raw["N"] == 64 and raw["L"] == 4
    with pytest.raises(cli.BadConfig):
        cli.load_profile("missing-profile")


def test_solve_exit_ok(capsys):
    rc = cli.main(["solve", "--N", "3", "--seed", "1"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "status    : Optimal" in out and "dBm" in out


def test_solve_exit_infeasible(capsys):
    # one BS antenna, two users at 5 dB each: unsatisfiable for any phases
    rc = cli.main(["solve", "--M", "1", "--K", "2", "--N", "3"])
    assert rc == cli.EXIT_INFEASIBLE


def test_bad_config_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("bogus_key: 1\n")
    rc = cli.main(["solve", "--config", str(cfg)])
    assert rc == cli.EXIT_BAD_CONFIG


def test_oracle_check_exit(capsys):
    rc = cli.main(["oracle-check", "--instances", "2", "--N", "3"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "2/2 matches" in out


def test_dump_channels_roundtrip(tmp_path):
    out = tmp_path / "ch.json"
    rc = cli.main(["dump-channels", "--N", "3", "--seed", "9", "--output", str(out)])
    assert rc == cli.EXIT_OK
    ch = load_channels(out)
    assert ch.F.shape == (3, 3) and ch.h.shape == (2, 3)


def _write_plan(tmp_path, **extra):
    plan = {
        "base": {"M": 3, "K": 2, "N": 3, "L": 2, "seed": 0},
        "output": str(tmp_path / "rows.csv"),
        "trials": 2,
        "schemes": ["GBD", "AlternatingOpt"],
        "sweep": {"gamma_dB": [0.0, 5.0]},
    }
    plan.update(extra)
    path = tmp_path / "plan.yaml"
    path.write_text(yaml.safe_dump(plan))
    return path, plan


def test_plan_validation(tmp_path):
    path, _ = _write_plan(tmp_path, schemes=["NoSuchScheme"])
    with pytest.raises(cli.BadConfig):
        cli.load_plan(str(path))
    path, _ = _write_plan(tmp_path, trials=0)
    with pytest.raises(cli.BadConfig):
        cli.load_plan(str(path))
    orphan = tmp_path / "orphan.yaml"
    orphan.write_text(yaml.safe_dump({"output": "x.csv"}))
    with pytest.raises(cli.BadConfig):
        cli.load_plan(str(orphan))


def test_oracle_scheme_requires_budget(tmp_path):
    path, _ = _write_plan(tmp_path, schemes=["Oracle"], oracle_budget=4)
    plan = cli.load_plan(str(path))
    with pytest.raises(cli.BadConfig):
        cli.run_plan(plan)


def test_sweep_writes_rows_and_summary(tmp_path, capsys):
    path, plan = _write_plan(tmp_path)
    rc = cli.main(["sweep", str(path)])
    assert rc == cli.EXIT_OK
    rows = (tmp_path / "rows.csv").read_text().splitlines()
    assert rows[0] == cli.CSV_HEADER
    assert len(rows) == 1 + 2 * 2 * 2  # points x trials x schemes
    summary = (tmp_path / "rows_summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 2 * 2


def test_run_scheme_dispatch():
    cfg = cli.config_from_dict({"N": 3, "seed": 2})
    gbd_out = cli.run_scheme("GBD", cfg)
    orc_out = cli.run_scheme("Oracle", cfg)
    assert gbd_out.status == orc_out.status == "Optimal"
    assert gbd_out.power == pytest.approx(orc_out.power, rel=1e-6)
    for scheme in ("RandomPhase", "AlternatingOpt", "PenaltySCA"):
        out = cli.run_scheme(scheme, cfg)
        assert out.status == "Optimal"
        assert out.power >= orc_out.power * (1.0 - 1e-9)
    with pytest.raises(cli.BadConfig):
        cli.run_scheme("NoSuchScheme", cfg)

import csv
import json
import math

import pytest

from gapflow.cli import HEADERS, fmt, main, parse_config
from gapflow.errors import GapflowError

A11 = 5.026548245743669


def _run(tmp_path, cfg, name="out", extra=()):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main(["--config", str(path), "--out", str(out), *extra])
    return code, out


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_headers_are_exact(tmp_path):
    assert ",".join(HEADERS["verify"]) == "check,family,eps,statistic,threshold,verdict,worst_point"
    assert ",".join(HEADERS["asymptotics"]) == "quantity,eps,value,error,basis,slope,intercept,ref_value,rel_dev"
    assert ",".join(HEADERS["system"]) == "family,eps,alpha,C_alpha,det,det_scaled,cond"
    assert ",".join(HEADERS["envelope"]) == (
        "family,eps,x1,x2,x3,grad_singular,p_singular,stress_singular,bound_value,ratio"
    )


def test_verify_passes_on_identity_checks(tmp_path, capsys):
    cfg = {"command": "verify", "eps_grid": [1e-2, 1e-3], "sample_count": 500, "checks": ["divergence", "boundary"]}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    rows = _read(out / "verify.csv")
    assert rows[0] == HEADERS["verify"]
    # one row per (check, family, eps): 16 default families, 2 checks, 2 eps
    assert len(rows) - 1 == 16 * 2 * 2
    assert all(r[5] == "pass" for r in rows[1:])
    assert "checks passed" in capsys.readouterr().out


def test_verify_default_suite(tmp_path):
    code, out = _run(tmp_path, {"command": "verify"})
    assert code == 0, "default invariant suite should pass; see verify.csv for failing rows"


def test_asymptotics_contains_a11_fit(tmp_path):
    code, out = _run(tmp_path, {"command": "asymptotics"})
    rows = _read(out / "asymptotics.csv")
    assert rows[0] == HEADERS["asymptotics"]
    a11 = [r for r in rows[1:] if r[0] == "a1_1"]
    assert len(a11) == 5
    assert abs(float(a11[0][5]) - A11) / A11 <= 0.03
    assert code in (0, 2)


def test_system_rows(tmp_path):
    code, out = _run(tmp_path, {"command": "system", "eps_grid": [1e-2, 1e-3, 1e-4]})
    assert code == 0
    rows = _read(out / "system.csv")
    assert rows[0] == HEADERS["system"]
    assert len(rows) - 1 == 3 * 6
    first = rows[1]
    assert first[0] == "phi1_l0_i1_c1" and first[1] == "0.01" and first[2] == "1"


def test_envelope_csv_for_four_dimensions(tmp_path):
    cfg = {"command": "envelope", "d": 4, "eps_grid": [1e-2, 3e-3]}
    code, out = _run(tmp_path, cfg)
    rows = _read(out / "envelope.csv")
    assert rows[0][:6] == ["family", "eps", "x1", "x2", "x3", "x4"]
    assert code in (0, 2)


def test_degenerate_curvature_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, {"command": "verify", "kappa1": 1.0, "kappa": 1.0})
    assert code == 1
    assert "DegenerateCurvature" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg",
    [
        {"bogus": 1},
        {"command": "plot"},
        {"eps_grid": []},
        {"eps_grid": [1e-3, 1e-3]},
        {"families": ["phi9_l0"]},
        {"command": "system", "families": ["rigid1"]},
        {"d": 4, "families": ["phi2_l1_i1"]},
        {"rel_tol": 1e-14},
        {"sample_count": 0},
        {"sample_count": 1.5},
        {"far_field": [[1, 2], [2, 1]]},
        {"eps_grid": [2.0]},
    ],
)
def test_config_errors_exit_one(tmp_path, cfg):
    code, _ = _run(tmp_path, cfg)
    assert code == 1


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["--config", str(tmp_path / "missing.json")]) == 1


def test_failed_check_exit_two(tmp_path):
    cfg = {"command": "envelope", "families": ["phi1_l1_i1_c1"], "eps_grid": [1e-2, 1e-4]}
    code, _ = _run(tmp_path, cfg)
    # the unit-constant envelope ratio of this family exceeds 10 at the rim of the neck
    assert code == 2


def test_command_flag_overrides_config(tmp_path):
    cfg = {"command": "verify", "eps_grid": [1e-2, 1e-3, 1e-4]}
    code, out = _run(tmp_path, cfg, extra=("--command", "system"))
    assert code == 0 and (out / "system.csv").exists()


def test_determinism(tmp_path):
    cfg = {"command": "verify", "eps_grid": [1e-2, 1e-3], "sample_count": 300, "seed": 11}
    _, a = _run(tmp_path, cfg, "a")
    _, b = _run(tmp_path, cfg, "b")
    assert (a / "verify.csv").read_bytes() == (b / "verify.csv").read_bytes()


def test_float_formatting_round_trips():
    for x in (0.1, 1e-300, 1 / 3, 12345.678, -0.0):
        assert float(fmt(x)) == x
    assert fmt(True) == "pass" and fmt(None) == "" and fmt((0.5, 1.0)) == "0.5;1.0"


def test_parse_config_defaults():
    rc = parse_config({})
    assert rc.command == "verify"
    assert rc.base.d == 3 and rc.base.kappa1 == 1.0 and rc.base.kappa == 0.0 and rc.base.mu == 1.0
    assert rc.eps_grid == (1e-2, 1e-3, 1e-4, 1e-5)
    rc = parse_config({"command": "asymptotics"})
    assert rc.eps_grid == (1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4)
    assert math.isclose(rc.rel_tol, 1e-8)
    with pytest.raises(GapflowError):
        parse_config([])

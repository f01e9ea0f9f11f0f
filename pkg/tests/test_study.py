import math
import subprocess
import sys

import numpy as np
import pytest

from stiga.cases import CASES, get_case
from stiga.cli import main, read_coefficients
from stiga.study import (
    CSV_HEADER,
    ConfigError,
    StudyTable,
    check_compatible,
    emit_csv,
    parse_config,
    parse_config_text,
    read_control_net,
    read_csv,
    run_study,
)
from stiga.geometry import box_geometry

MINIMAL = "case = MS1\ndegree = 2\nlevels = 2-3\n"


def test_minimal_config_defaults():
    cfg = parse_config_text(MINIMAL)
    assert (cfg.theta, cfg.q, cfg.gamma, cfg.zeta, cfg.epsilon) == (1.0, 4, 1.0, 1.0, 2.0)
    assert (cfg.flux, cfg.majorant, cfg.solver) == ("gradient", "I", "direct")
    assert cfg.levels == [2, 3]


def test_comments_and_level_lists():
    cfg = parse_config_text("# study\ncase = MS2  # polynomial\ndegree = 3\nlevels = 1, 3,4\n")
    assert cfg.levels == [1, 3, 4] and cfg.degree == 3


def test_theta_zero_rejected():
    with pytest.raises(ConfigError, match="theta"):
        parse_config_text(MINIMAL + "theta = 0\n")


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigError, match=r"'degree' on lines 2 and 4"):
        parse_config_text(MINIMAL + "degree = 3\n")


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError, match="valid keys: case, degree, levels"):
        parse_config_text(MINIMAL + "colour = blue\n")


def test_missing_required_key_reports_lines():
    with pytest.raises(ConfigError, match=r"missing required key\(s\) levels.*case \(line 1\)"):
        parse_config_text("case = MS1\ndegree = 2\n")


@pytest.mark.parametrize(
    "extra,key",
    [("majorant = III", "majorant"), ("flux = magic", "flux"), ("degree_typo = 1", "unknown"), ("solver = lu", "solver")],
)
def test_validation_messages(extra, key):
    with pytest.raises(ConfigError, match=key):
        parse_config_text(MINIMAL + extra + "\n")


def test_degree_one_rejected():
    with pytest.raises(ConfigError, match="degree"):
        parse_config_text("case = MS1\ndegree = 1\nlevels = 2-3\n")


def test_cases_vanish_on_boundary():
    rng = np.random.default_rng(0)
    for case in CASES.values():
        D = case.d + 1
        for _ in range(50):
            X = rng.uniform(0, 1, D)
            X[-1] = 0.0
            assert abs(case.u(X)) < 1e-12
            X = rng.uniform(0, 1, D)
            X[rng.integers(0, D - 1)] = rng.integers(0, 2)
            assert abs(case.u(X)) < 1e-12


@pytest.mark.parametrize("name", ["MS1", "MS2", "MS3"])
def test_case_source_consistent_with_derivatives(name):
    case = get_case(name)
    X = np.random.default_rng(1).uniform(0, 1, (20, case.d + 1))
    h = 1e-6
    E = np.zeros(case.d + 1)
    E[-1] = h
    fd_dt = (case.u(X + E) - case.u(X - E)) / (2 * h)
    assert np.abs(fd_dt - case.dt(X)).max() < 1e-6
    assert np.abs(case.f(X) - (case.dt(X) - case.lap(X))).max() < 1e-14


def test_incompatible_geometry_rejected():
    with pytest.raises(ConfigError, match="vanish"):
        check_compatible(get_case("MS1"), box_geometry([1.5, 1.0]))


def test_emit_empty_table(tmp_path):
    out = tmp_path / "t.csv"
    emit_csv(StudyTable(), out)
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_two_level_run_roundtrip(tmp_path):
    table = run_study(parse_config_text(MINIMAL))
    out = tmp_path / "s.csv"
    emit_csv(table, out)
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    back = read_csv(out)
    for row, ref in zip(back, table.rows):
        for k in ("h", "error_sh", "majorant", "i_eff"):
            assert abs(row[k] - ref[k]) <= 1e-11 * abs(ref[k])
    assert back[0]["order"] is None and back[1]["order"] > 1.5


def test_representable_case_study():
    table = run_study(parse_config_text("case = MS2\ndegree = 2\nlevels = 1-3\n"))
    for r in table.rows:
        assert r["error_sh"] < 1e-9 and r["majorant"] < 1e-8
        assert r["i_eff"] is None and r["order"] is None


def test_efficiency_at_least_one():
    for kind in ("I", "II", "I_w", "II_w"):
        table = run_study(parse_config_text(MINIMAL + f"majorant = {kind}\nflux = minimized\n"))
        for r in table.rows:
            assert r["i_eff"] >= 1 - 1e-6


def test_order_trend_p3():
    table = run_study(parse_config_text("case = MS1\ndegree = 3\nlevels = 2-5\n"))
    orders = [r["order"] for r in table.rows[1:]]
    assert all(b >= a - 0.3 for a, b in zip(orders, orders[1:]))
    assert abs(orders[-1] - 3) < 0.3


def test_study_needs_two_levels():
    with pytest.raises(ConfigError):
        run_study(parse_config_text("case = MS1\ndegree = 2\nlevels = 3\n"))


def test_control_net_geometry_file(tmp_path):
    net = tmp_path / "unit.txt"
    lines = ["degree 2", "knots 0 0 0 1 1 1", "knots 0 0 0 1 1 1"]
    lines += [f"point {x} {t}" for x in (0, 0.5, 1) for t in (0, 0.5, 1)]
    net.write_text("\n".join(lines) + "\n")
    g = read_control_net(net)
    assert g.space.shape == (3, 3)
    cfg = parse_config_text(MINIMAL + f"geometry = file:{net}\n")
    ref = run_study(parse_config_text(MINIMAL))
    got = run_study(cfg)
    for a, b in zip(got.rows, ref.rows):
        assert abs(a["error_sh"] - b["error_sh"]) < 1e-12


def test_cli_solve_estimate_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(MINIMAL + "majorant = II\n")
    coef = tmp_path / "u.txt"
    assert main(["solve", str(cfg), "--out", str(coef)]) == 0
    vals = read_coefficients(coef)
    assert vals.size == 8 * 9
    est = tmp_path / "e.txt"
    assert main(["estimate", str(cfg), "--coefficients", str(coef), "--out", str(est)]) == 0
    kv = dict(line.split(" = ") for line in est.read_text().splitlines())
    table = run_study(parse_config_text(MINIMAL + "majorant = II\n"))
    assert math.isclose(float(kv["majorant"]), table.rows[-1]["majorant"], rel_tol=1e-10)
    assert float(kv["i_eff"]) >= 1.0


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(MINIMAL + "theta = -1\n")
    assert main(["study", str(cfg)]) == 2
    assert "theta" in capsys.readouterr().err


def test_cli_wrong_coefficient_count(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(MINIMAL)
    coef = tmp_path / "u.txt"
    coef.write_text("1.0\n2.0\n")
    assert main(["estimate", str(cfg), "--coefficients", str(coef)]) == 2
    assert "expected 72" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = MS2\ndegree = 2\nlevels = 1-2\ntimings = off\n")
    out = subprocess.run([sys.executable, "-m", "stiga", "study", str(cfg)], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("level,h,dofs")
    assert out.stdout.count("\n") == 3

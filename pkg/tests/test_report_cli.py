import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nlmg.assembly import Nonlinearity, assemble_mass, assemble_stiffness
from nlmg.cli import main
from nlmg.eigen import EigenPair, smallest_generalized_eigenpair
from nlmg.exceptions import ConfigError, MissingReference, NonPositiveError
from nlmg.mesh import build_hierarchy
from nlmg.report import AnalyticReference, DirectReference, compare_to_reference, compute_rates, fine_quadrature
from nlmg.study import evaluate_checks, load_config, parse_config, run_study

GOLDEN = Path(__file__).parent / "golden" / "report_1d_n2.json"
GOLDEN_CONFIG = {"domain": "interval01", "H": 0.25, "n": 2, "reference": "analytic", "mode": "scheme", "seed": 0}


def write_config(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_compute_rates():
    assert compute_rates([1, 0.25, 0.0625], 2) == [2.0, 2.0]
    assert compute_rates([1, 0.5], 2) == [1.0]
    with pytest.raises(NonPositiveError):
        compute_rates([1, 0.0, 0.1], 2)
    with pytest.raises(NonPositiveError):
        compute_rates([1, -0.5], 2)


def test_fine_quadrature_exactness():
    for d in (1, 2):
        bary, w = fine_quadrature(d)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
    bary, w = fine_quadrature(2)
    # integral of l1^4 l2^3 over the unit triangle relative to its area: 2 * 4! 3! / 9!
    assert w @ (bary[:, 1] ** 4 * bary[:, 2] ** 3) == pytest.approx(2 * 24 * 6 / 362880, rel=1e-12)


def test_compare_analytic_1d_closed_form():
    hier = build_hierarchy("interval01", 1 / 64, 1)
    m = hier[0]
    lam, u = smallest_generalized_eigenpair(assemble_stiffness(m), assemble_mass(m))
    pair = EigenPair(lam, u, 0)
    ref = AnalyticReference(1)
    el, l2, h1 = compare_to_reference(pair, ref, hier)
    h = 1 / 64
    gap = (6 / h**2) * (1 - np.cos(np.pi * h)) / (2 + np.cos(np.pi * h)) - np.pi**2
    assert el > 0 and abs(el - gap) <= 1e-10
    flipped = compare_to_reference(EigenPair(lam, -u, 0), ref, hier)
    assert flipped == (el, l2, h1)
    assert 0 < l2 < h1


def test_compare_direct_reference():
    hier = build_hierarchy("interval01", 0.125, 2)
    m = hier[2]
    lam, u = smallest_generalized_eigenpair(assemble_stiffness(m), assemble_mass(m))
    ref = DirectReference(hier, 2, lam, u)
    assert compare_to_reference(EigenPair(lam, u, 2), ref) == (0.0, 0.0, 0.0)
    assert compare_to_reference(EigenPair(lam, -u, 2), ref) == (0.0, 0.0, 0.0)
    lam1, u1 = smallest_generalized_eigenpair(assemble_stiffness(hier[1]), assemble_mass(hier[1]))
    rich = DirectReference(hier, 2, lam, u, lam1)
    assert rich.lam == pytest.approx((4 * lam - lam1) / 3)
    el, l2, h1 = compare_to_reference(EigenPair(lam1, u1, 1), rich)
    assert el > 0 and l2 > 0 and h1 > 0
    with pytest.raises(MissingReference):
        compare_to_reference(EigenPair(lam, u, 2), None)
    with pytest.raises(MissingReference):
        compare_to_reference(EigenPair(lam1, u1, 3), rich)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"mode": "fast"})
    with pytest.raises(ConfigError):
        parse_config({"reference": "analytic", "nonlinearity": {"kind": "cubic", "zeta": 1}})
    with pytest.raises(ConfigError):
        parse_config({"H": 0.3})
    with pytest.raises(ConfigError) as info:
        parse_config({"levels": 3})
    assert info.value.field == "levels"
    with pytest.raises(ConfigError):
        parse_config({"scf": {"damping": 2}})
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 3,\n "H": }')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(bad)
    cfg = load_config(write_config(tmp_path, {"n": 2, "mode": "scheme"}), {"mode": "both", "output": None})
    assert cfg.mode == "both" and cfg.output == "out"


def test_cli_linear_2d_rates(tmp_path):
    cfg = write_config(tmp_path, {"domain": "square01", "H": 0.25, "n": 4, "reference": "analytic"})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out / "table.csv") as fh:
        rows = list(csv.DictReader(fh))
    rates = [float(r["rate_lambda"]) for r in rows[1:]]
    assert all(abs(r - 2.0) < 0.1 for r in rates)
    assert (out / "timing.json").exists()


def test_cli_mode_both_has_gap(tmp_path):
    cfg = write_config(tmp_path, {"domain": "interval01", "H": 0.25, "n": 3})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--mode", "both", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert "gap" in rep["columns"] and rep["config"]["mode"] == "both"


def test_cli_malformed_config_writes_nothing(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    cfg2 = write_config(tmp_path, {"n": 0})
    assert main(["run", "--config", str(cfg2), "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_solver_failure(tmp_path):
    doc = {"nonlinearity": {"kind": "gpe", "v_harmonic": 100, "zeta": 50}, "scf": {"max_iter": 3}, "n": 2}
    cfg = write_config(tmp_path, doc)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cli_check_failure(tmp_path):
    doc = {
        "nonlinearity": {"kind": "gpe", "v_harmonic": 100, "zeta": 50},
        "scf": {"damping": 0.4, "max_iter": 400},
        "aug_tol_factor": None,
        "n": 2,
    }
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--check"]) == 4
    rep = json.loads((out / "report.json").read_text())
    assert any(c["name"] == "augmented sweeps" and not c["passed"] for c in rep["checks"])


def test_cli_check_pass_and_rates(tmp_path, capsys):
    cfg = write_config(tmp_path, {"domain": "interval01", "H": 0.125, "n": 4, "reference": "analytic", "mode": "both"})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--check"]) == 0
    capsys.readouterr()
    assert main(["rates", "--csv", str(out / "table.csv")]) == 0
    text = capsys.readouterr().out
    assert text.startswith("err_lambda: 2.0")
    assert main(["rates", "--csv", str(tmp_path / "missing.csv")]) == 2


def test_cli_sweep(tmp_path):
    cdir = tmp_path / "configs"
    cdir.mkdir()
    write_config(cdir, {"n": 2}, "a.json")
    write_config(cdir, {"n": 2, "domain": "square01", "H": 0.5}, "b.json")
    out = tmp_path / "sweep"
    assert main(["sweep", "--configs", str(cdir), "--out", str(out), "--jobs", "2"]) == 0
    assert (out / "a" / "report.json").exists() and (out / "b" / "table.csv").exists()
    assert main(["sweep", "--configs", str(tmp_path / "none"), "--out", str(out)]) == 2


def test_csv_and_json_carry_identical_numbers(tmp_path):
    cfg = write_config(tmp_path, {"domain": "interval01", "H": 0.125, "n": 3, "reference": "analytic", "mode": "both"})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    with open(out / "table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0].keys()) == rep["columns"]
    for jrow, crow in zip(rep["rows"], rows):
        for c in rep["columns"]:
            v = jrow.get(c)
            if v is None:
                assert crow[c] == ""
            else:
                assert float(crow[c]) == v


def test_golden_report(tmp_path):
    report, _ = run_study(parse_config(GOLDEN_CONFIG))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    assert text == GOLDEN.read_text()


def test_report_bit_identical_reruns(tmp_path):
    cfg = write_config(tmp_path, {"domain": "interval01", "H": 0.125, "n": 4, "nonlinearity": {"kind": "gpe", "v_harmonic": 100, "zeta": 10}, "reference": "direct_finer"})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_checks_on_nonlinear_report():
    doc = {"domain": "interval01", "H": 0.125, "n": 4, "nonlinearity": {"kind": "gpe", "v_harmonic": 100, "zeta": 10},
           "reference": "direct_finer", "mode": "both"}
    report, _ = run_study(parse_config(doc))
    names = {n: p for n, p, _ in evaluate_checks(report)}
    assert names == {"eigenvalue rate": True, "scheme vs direct": True, "augmented sweeps": True}

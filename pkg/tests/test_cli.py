import csv
import json
from pathlib import Path

import numpy as np
import pytest

from spikeslab.cli import main, parse_args, read_config
from spikeslab.errors import InputError

DIABETES = Path(__file__).resolve().parents[1] / "data" / "diabetes.csv"
CHAIN = ["--burnin", "100", "--samples", "200"]


def _write_csv(path, x, y, names=None):
    names = names or [f"x{k + 1}" for k in range(x.shape[1])]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([*names, "y"])
        for row, v in zip(x, y):
            wr.writerow([*(f"{a:.10g}" for a in row), f"{v:.10g}"])
    return path


@pytest.fixture
def small_csv(tmp_path, rng):
    x = rng.standard_normal((60, 4))
    y = 2.0 * x[:, 0] - x[:, 2] + rng.standard_normal(60)
    return _write_csv(tmp_path / "d.csv", x, y)


def test_fit_is_byte_identical_for_a_seed(tmp_path, small_csv):
    args = ["fit", "--input", str(small_csv), "--response", "y", *CHAIN, "--seed", "3"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    doc = json.loads(a)
    assert doc["K"] == 4 and doc["n"] == 60
    assert doc["settings"]["seed"] == 3
    main(["fit", "--input", str(small_csv), "--response", "y", *CHAIN, "--seed", "4", "--out", str(tmp_path / "c")])
    assert a != (tmp_path / "c" / "summary.json").read_bytes()


def test_fit_trace(tmp_path, small_csv):
    assert main(["fit", "--input", str(small_csv), "--response", "y", *CHAIN, "--trace", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 201


def test_malformed_csv_names_the_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,y\n1,2,3\n4,oops,6\n7,8,9\n")
    assert main(["fit", "--input", str(bad), "--response", "y", "--out", str(tmp_path / "o")]) == 2
    assert "row 3" in capsys.readouterr().err
    short = tmp_path / "short.csv"
    short.write_text("a,b,y\n1,2,3\n4,5\n")
    assert main(["fit", "--input", str(short), "--response", "y", "--out", str(tmp_path / "o")]) == 2
    assert "row 3" in capsys.readouterr().err


def test_missing_file_and_response(tmp_path, small_csv):
    assert main(["fit", "--input", str(tmp_path / "none.csv"), "--response", "y", "--out", str(tmp_path)]) == 2
    assert main(["fit", "--input", str(small_csv), "--response", "z", "--out", str(tmp_path)]) == 2


def test_numerical_failures_exit_1(tmp_path, rng):
    # integer data keep the exact linear fit exact after the CSV round trip
    x = rng.integers(-20, 20, size=(30, 3)).astype(float)
    exact = _write_csv(tmp_path / "exact.csv", x, x @ np.array([1.0, 2.0, -1.0]))
    assert main(["fit", "--input", str(exact), "--response", "y", *CHAIN, "--out", str(tmp_path / "o")]) == 1
    dup = _write_csv(tmp_path / "dup.csv", np.column_stack([x, x[:, 0]]), rng.standard_normal(30))
    assert main(["fit", "--input", str(dup), "--response", "y", *CHAIN, "--out", str(tmp_path / "o")]) == 1


@pytest.mark.skipif(not DIABETES.exists(), reason="diabetes data not bundled")
def test_quadratic_expansion_has_64_columns(tmp_path):
    out = tmp_path / "q"
    assert main(["fit", "--input", str(DIABETES), "--response", "y", "--quadratic", "--burnin", "50",
                 "--samples", "100", "--out", str(out)]) == 0
    doc = json.loads((out / "summary.json").read_text())
    assert doc["K"] == 64 and len(doc["coefficients"]) == 64


def test_select_alpha_extremes(tmp_path, small_csv):
    base = ["select", "--input", str(small_csv), "--response", "y", *CHAIN, "--rule", "zcut"]
    assert main([*base, "--alpha", "1.0", "--out", str(tmp_path / "all")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "all" / "selection.csv")))
    assert len(rows) == 4 and all(float(r["zcut"]) != 0.0 for r in rows)
    assert main([*base, "--alpha", "1e-300", "--out", str(tmp_path / "none")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "none" / "selection.csv")))
    assert all(float(r["zcut"]) == 0.0 for r in rows)
    models = json.loads((tmp_path / "none" / "models.json").read_text())["models"]
    assert models == {"zcut": []}


def test_select_all_rules_and_top(tmp_path, small_csv, capsys):
    assert main(["select", "--input", str(small_csv), "--response", "y", *CHAIN, "--top", "2",
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "selection.csv")))
    assert len(rows) == 2 and rows[0]["variable"] == "x1"
    assert set(rows[0]) == {"variable", "beta_star", "zcut", "olshard", "svsforwd", "olsforwd"}
    assert "zcut" in capsys.readouterr().out


def test_bad_alpha_is_rejected(tmp_path, small_csv):
    with pytest.raises(SystemExit) as info:
        main(["select", "--input", str(small_csv), "--response", "y", "--alpha", "0", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_simulate_is_deterministic_and_writes_plot_files(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n": 60, "K": 6, "beta0": [1.0, 0.5, 0, 0, 0, 0], "r_squared": None}))
    args = ["simulate", "--spec", str(spec), "--reps", "2", *CHAIN]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("table.csv", "replications.csv", "scatter.csv", "misclassification.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    mis = list(csv.DictReader(open(tmp_path / "a" / "misclassification.csv")))
    assert {r["rule"] for r in mis} == {"zcut", "olshard"}
    assert len(mis) == 2 * 81


def test_simulate_spec_errors(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 60, "K": 6, "colour": "red"}))
    assert main(["simulate", "--spec", str(bad), "--out", str(tmp_path)]) == 2


def test_theory_pmf(tmp_path):
    assert main(["theory", "--K", "25", "--k0", "10", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "pmf.csv")))
    fwd = {int(r["k"]): float(r["probability"]) for r in rows if r["rule"] == "forward"}
    assert fwd[10] == pytest.approx(0.9, abs=1e-12)
    assert main(["theory", "--K", "5", "--k0", "5", "--rule", "backward", "--out", str(tmp_path / "p")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "p" / "pmf.csv")))
    assert [float(r["probability"]) for r in rows] == [0, 0, 0, 0, 0, 1.0]
    assert main(["theory", "--K", "5", "--k0", "6", "--out", str(tmp_path / "e")]) == 2


def test_theory_with_monte_carlo(tmp_path):
    assert main(["theory", "--K", "6", "--k0", "3", "--mc-reps", "20", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "pmf.csv")))
    emp = [float(r["empirical"]) for r in rows if r["rule"] == "olshard"]
    assert sum(emp) == pytest.approx(1.0)


def test_config_file_and_flag_precedence(tmp_path, small_csv):
    conf = tmp_path / "run.conf"
    conf.write_text(f"# chain settings\ninput = {small_csv}\nresponse = y\nburnin = 7\nsamples = 300\n"
                    "quadratic = false\nrule = zcut, olshard\n")
    args = parse_args(["select", "--config", str(conf), "--out", str(tmp_path), "--samples", "500"])
    assert args.burnin == 7 and args.samples == 500
    assert args.rule == ["zcut", "olshard"] and args.quadratic is False


def test_config_errors(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("burnin 7\n")
    with pytest.raises(InputError):
        read_config(conf)
    conf.write_text("warp = 9\n")
    assert main(["theory", "--config", str(conf), "--out", str(tmp_path)]) == 2
    conf.write_text("trace = maybe\n")
    with pytest.raises(InputError):
        read_config(conf)

import csv
import json
import subprocess
import sys

import pytest

from reslab import __version__
from reslab.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, run


def go(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = run(list(argv) + ["--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_bounds_example(tmp_path, capsys):
    code, out = go(tmp_path, "bounds", "--problem", "quad_saddle", "--alg", "tt-gda", "--tau", "1")
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "s_max 0.5" in printed and "s_TTGDA" in printed
    rows = read_csv(out / "results.csv")
    assert rows[0] == ["quantity", "value", "provenance"]
    assert rows[1][0] == "s_max" and float(rows[1][1]) == 0.5
    # provenance contains commas, so the field must be quoted
    raw = (out / "results.csv").read_text()
    assert '"s_TTGDA: min{min(1,tau)/L' in raw
    s = summary(out)
    assert set(s) == {"config", "verdicts", "bounds", "fits", "timing", "partial", "version"}
    assert s["bounds"][0]["s_max"] == 0.5 and s["version"] == __version__ and s["partial"] is False


def test_classify_example(tmp_path, capsys):
    code, out = go(tmp_path, "classify", "--problem", "bilinear", "--alg", "geg", "--order", "os", "--s", "0.1",
                   "--gamma", "1", "--tau", "1", "--at", "0,0")
    assert code == EXIT_OK
    assert "ExpStable" in capsys.readouterr().out
    assert summary(out)["verdicts"][0]["verdict"] == "ExpStable"


def test_simulate_example(tmp_path):
    code, out = go(tmp_path, "simulate", "--problem", "x2y4", "--alg", "dn", "--s", "0.1", "--z0", "0.3,0.3")
    assert code == EXIT_OK
    rows = read_csv(out / "results.csv")
    head = rows[0]
    assert head[:3] == ["k", "z1", "z2"]
    assert float(rows[-1][head.index("norm")]) <= 1e-4


def test_float_format_round_trips(tmp_path):
    code, out = go(tmp_path, "simulate", "--problem", "bilinear", "--alg", "geg", "--s", "0.3", "--z0", "1,1",
                   "--max-iters", "5")
    rows = read_csv(out / "results.csv")
    from reslab.algorithms import step
    from reslab.fields import HyperParams
    from reslab.problems import builtin
    import numpy as np
    z = step("geg", builtin("bilinear").objective, HyperParams(0.3), np.array([1.0, 1.0])).z_next
    assert float(rows[2][1]) == z[0] and float(rows[2][2]) == z[1]  # bit-exact through '.17g'


def test_summary_round_trip(tmp_path):
    code, a = go(tmp_path, "transfer", "--random", "2,1,3", "--alg", "geg", "--s-grid", "0.05,0.2",
                 "--gamma", "0.5", "--trials", "5", name="a")
    assert code == EXIT_OK
    code, b = go(tmp_path, "transfer", "--config", str(a / "summary.json"), name="b")
    assert code == EXIT_OK
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    sa, sb = summary(a), summary(b)
    sa["config"]["output"] = sb["config"]["output"] = None
    for s in (sa, sb):
        s.pop("timing")
    assert sa == sb


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": {"builtin": "quad_saddle"}, "algorithm": "tt-gda",
                               "hyperparams": {"tau": 1.0}}))
    code, out = go(tmp_path, "bounds", "--config", str(cfg), "--tau", "2")
    assert code == EXIT_OK
    assert summary(out)["config"]["hyperparams"]["tau"] == 2.0


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": {"builtin": "bilinear"}, "algorithm": "geg", "step": 0.1}))
    code, out = go(tmp_path, "classify", "--config", str(cfg))
    assert code == EXIT_INVALID and not out.exists()


@pytest.mark.parametrize("argv", [
    ["classify", "--problem", "bilinear"],                      # no algorithm
    ["classify", "--alg", "geg"],                               # no problem
    ["classify", "--problem", "bilinear", "--alg", "ogda"],
    ["classify", "--problem", "bilinear", "--alg", "geg", "--s", "-1"],
    ["classify", "--expr", "x^2 -", "--alg", "geg"],
    ["classify", "--problem", "bilinear", "--alg", "geg", "--at", "1,1"],  # not an equilibrium
    ["classify", "--problem", "bilinear", "--alg", "geg", "--at", "0,0,0"],
    ["classify", "--config", "/nonexistent.json"],
    ["frobnicate"],
])
def test_validation_exit_code(tmp_path, argv):
    assert run(argv + ["--out", str(tmp_path / "x")] if argv[0] != "frobnicate" else argv) == EXIT_INVALID


def test_numeric_failure_flushes_partial(tmp_path):
    code, out = go(tmp_path, "simulate", "--problem", "x2y4", "--alg", "dn", "--z0", "0.5,0")
    assert code == EXIT_NUMERIC
    assert summary(out)["partial"] is True
    assert read_csv(out / "results.csv")[0][0] == "k"


def test_header_present_on_empty_result(tmp_path):
    code, out = go(tmp_path, "basin", "--problem", "antisaddle", "--alg", "tt-gda", "--trials", "0")
    assert code == EXIT_OK
    rows = read_csv(out / "results.csv")
    assert len(rows) == 1 and rows[0][0] == "seed"
    assert summary(out)["fits"][0]["value"] == "nan"


def test_plot_data(tmp_path):
    code, out = go(tmp_path, "consistency", "--problem", "bilinear", "--alg", "tt-gda", "--emit-plot-data")
    assert code == EXIT_OK
    rows = read_csv(out / "plot_data.csv")
    assert rows[0] == ["series", "t_or_k", "value"] and len(rows) == 17
    fits = summary(out)["fits"]
    assert 1.8 <= fits[0]["slope"] <= 2.2 and 2.8 <= fits[1]["slope"] <= 3.2


def test_setconv_and_expression_problem(tmp_path):
    code, out = go(tmp_path, "setconv", "--problem", "compact_attractor", "--alg", "tt-gda", "--s", "0.05",
                   "--trials", "2", "--tol", "1e-4")
    assert code == EXIT_OK and summary(out)["fits"][0]["interior_fixed"] == 100
    code, out = go(tmp_path, "classify", "--expr", "x^2 - y^2", "--alg", "tt-gda", "--s", "0.1", name="e")
    assert code == EXIT_OK and summary(out)["verdicts"][0]["verdict"] == "ExpStable"


def test_no_temp_files_left(tmp_path):
    code, out = go(tmp_path, "bounds", "--problem", "bilinear", "--alg", "geg")
    assert sorted(p.name for p in out.iterdir()) == ["results.csv", "summary.json"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "reslab", "bounds", "--problem", "quad_saddle", "--alg",
                           "tt-gda", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "s_max 0.5" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "reslab", "bounds", "--problem", "nope"], capture_output=True)
    assert proc.returncode == 2

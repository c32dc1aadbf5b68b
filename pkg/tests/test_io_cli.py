import io
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from oracles import dense_sandwich

from logitscale.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from logitscale.datagen import DataGenConfig, gen_dataset
from logitscale.exceptions import EmptyDataset, MissingColumn, ParseError
from logitscale.inference import CoefficientRow, CovKind, SummaryTable, build_summary
from logitscale.io import (
    DatasetSource,
    format_number,
    load_csv,
    read_csv_chunks,
    render_summary,
    significance_code,
    summary_records,
    write_csv,
)
from logitscale.model import Dataset
from logitscale.solvers import fit

DATA_DIR = Path(__file__).parent / "data"


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- reading and writing ------------------------------------------------------


def test_three_rows_two_chunks(tmp_path):
    p = write_text(tmp_path / "d.csv", "y,a,b\n1,0.5,2\n0,1.5,-1\n1,2.5,0\n")
    chunks = list(read_csv_chunks(DatasetSource(p, chunk_size=2)))
    assert [c.n_rows for c in chunks] == [2, 1]
    assert chunks[0].column_names == ("a", "b")
    np.testing.assert_array_equal(chunks[1].X, [[2.5, 0.0]])


def test_bad_response_reports_line_number(tmp_path):
    rows = ["y,x"] + ["0,1.0"] * 5 + ["2,1.0"]
    p = write_text(tmp_path / "d.csv", "\n".join(rows) + "\n")
    with pytest.raises(ParseError) as info:
        list(read_csv_chunks(DatasetSource(p)))
    assert info.value.line == 7 and info.value.token == "2"
    assert "line 7" in str(info.value)


def test_non_numeric_and_non_finite_features(tmp_path):
    p = write_text(tmp_path / "d.csv", "y,x\n0,abc\n")
    with pytest.raises(ParseError):
        load_csv(DatasetSource(p))
    p = write_text(tmp_path / "e.csv", "y,x\n0,inf\n")
    with pytest.raises(ParseError):
        load_csv(DatasetSource(p))


def test_column_selection_and_missing_columns(tmp_path):
    p = write_text(tmp_path / "d.csv", "a,resp,b,c\n1,0,2,3\n4,1,5,6\n")
    ds = load_csv(DatasetSource(p, "resp", ["c", "a"]))
    X, y = ds.to_arrays()
    np.testing.assert_array_equal(X, [[3, 1], [6, 4]])
    np.testing.assert_array_equal(y, [0, 1])
    assert ds.column_names == ("c", "a") and ds.response_name == "resp"
    with pytest.raises(MissingColumn):
        load_csv(DatasetSource(p, "y"))
    with pytest.raises(MissingColumn):
        load_csv(DatasetSource(p, "resp", ["zz"]))


def test_empty_inputs(tmp_path):
    with pytest.raises(EmptyDataset):
        load_csv(DatasetSource(write_text(tmp_path / "e.csv", "")))
    with pytest.raises(EmptyDataset):
        load_csv(DatasetSource(write_text(tmp_path / "h.csv", "y,x\n")))
    with pytest.raises(FileNotFoundError):
        load_csv(DatasetSource(tmp_path / "missing.csv"))


def test_round_trip_is_bit_exact(tmp_path):
    data, _ = gen_dataset(DataGenConfig(100_000, 3, seed=21))
    path = tmp_path / "rt.csv"
    assert write_csv(path, data) == 100_000
    back = load_csv(DatasetSource(path))
    Xa, ya = data.to_arrays()
    Xb, yb = back.to_arrays()
    assert np.array_equal(Xa.view(np.uint64), Xb.view(np.uint64))
    assert np.array_equal(ya, yb)


def test_streamed_csv_fit_equals_in_memory(tmp_path):
    data, _ = gen_dataset(DataGenConfig(3000, 3, seed=2))
    path = tmp_path / "d.csv"
    write_csv(path, data)
    mem = load_csv(DatasetSource(path, chunk_size=500))
    streamed = load_csv(DatasetSource(path, chunk_size=500), in_memory=False)
    assert streamed.streamed and streamed.n_rows == 3000
    assert np.array_equal(fit(mem).beta_hat, fit(streamed).beta_hat)


# -- summary formatting -------------------------------------------------------


def test_format_number_and_codes():
    assert format_number(0.0) == "0.000000"
    assert format_number(1.0) == "1.000000"
    assert format_number(-0.5) == "-0.500000"
    assert format_number(0.00012345678) == "1.23457e-04"
    assert format_number(123456.7) == "1.23457e+05"
    assert significance_code(0.0004) == "***"
    assert significance_code(0.005) == "**"
    assert significance_code(0.04) == "*"
    assert significance_code(0.07) == "."
    assert significance_code(0.5) == ""


def test_intercept_only_balanced_summary_row():
    data = Dataset.from_arrays(np.zeros((4, 0)), [0, 1, 0, 1])
    text = render_summary(build_summary(fit(data), data, CovKind.MLE))
    row = next(line for line in text.splitlines() if line.startswith("(Intercept)"))
    cells = row.split()
    assert cells[1] == "0.000000" and cells[2] == "1.000000" and cells[4] == "1.000000"
    # no significance code: the row is name + six numeric cells
    assert len(cells) == 7 and all(c[-1].isdigit() for c in cells[1:])
    assert "logit(formula = y ~ 1)" in text


def test_tiny_p_value_is_floored_in_text():
    row = CoefficientRow("x1", 30.0, 1.0, 30.0, 0.0, 28.0, 32.0)
    table = SummaryTable([row], 10, 1, -1.0, -2.0, 4.0, 0.5, 2.0, 1, 0.1, 0.9, CovKind.MLE, 0.95)
    text = render_summary(table)
    assert "< 2e-16" in text and "***" in text
    assert "logit(formula = y ~ x1 - 1)" in text


def test_golden_summary_file():
    data, _ = gen_dataset(DataGenConfig(1000, 5, seed=7, stream=0))
    table = build_summary(fit(data), data)
    expected = (DATA_DIR / "summary_1000x5_seed7.txt").read_text(encoding="utf-8")
    assert render_summary(table) == expected


def test_golden_run_against_external_reference():
    sm = pytest.importorskip("statsmodels.api")
    data, _ = gen_dataset(DataGenConfig(1000, 5, seed=7, stream=0))
    table = build_summary(fit(data), data)
    X, y = data.to_arrays()
    Xd = sm.add_constant(X)
    ref = sm.Logit(y, Xd).fit(disp=0, method="newton", tol=1e-12)
    np.testing.assert_allclose(table.column("estimate"), ref.params, atol=1e-8)
    se = np.sqrt(np.diag(dense_sandwich(Xd, y, ref.params)))
    np.testing.assert_allclose(table.column("std_error"), se, rtol=1e-7)
    assert table.aic == pytest.approx(ref.aic, rel=1e-10)
    assert table.lr_statistic == pytest.approx(ref.llr, rel=1e-8)
    mle = build_summary(fit(data), data, CovKind.MLE)
    np.testing.assert_allclose(mle.column("std_error"), ref.bse, rtol=1e-7)


def test_summary_records_are_full_precision():
    data, _ = gen_dataset(DataGenConfig(500, 2, seed=1))
    table = build_summary(fit(data), data)
    recs = dict(summary_records(table))
    assert float(recs["aic"]) == table.aic
    assert float(recs["coef.x1.estimate"]) == table.coefficients[1].estimate
    assert recs["covariance_kind"] == "sandwich"


# -- command line -------------------------------------------------------------


@pytest.fixture
def csv_file(tmp_path):
    code, _, _ = run(["gen", "--n", "800", "--k", "3", "--seed", "5", "--out", str(tmp_path / "d.csv")])
    assert code == EXIT_OK
    return tmp_path / "d.csv"


def test_cli_fit_prints_summary_and_writes_records(csv_file, tmp_path):
    out_path = tmp_path / "res.csv"
    code, out, _ = run(["fit", "--data", str(csv_file), "--solver", "irls", "--cov", "mle",
                        "--out", str(out_path)])
    assert code == EXIT_OK
    assert "Coefficients:" in out and "Covariance: MLE" in out
    recs = dict(line.split(",", 1) for line in out_path.read_text().splitlines())
    assert recs["solver"] == "irls" and recs["n"] == "800"


def test_cli_fit_options(csv_file):
    code, out, _ = run(["fit", "--data", str(csv_file), "--features", "x2,x1", "--no-intercept",
                        "--level", "0.9", "--chunk-size", "7", "--parallel"])
    assert code == EXIT_OK
    assert "y ~ x2 + x1 - 1" in out and "5 %" in out and "95 %" in out


def test_cli_chunked_fit_agrees(csv_file, tmp_path):
    vals = []
    for cs in ("1", "17", "65536"):
        path = tmp_path / f"r{cs}.csv"
        assert run(["fit", "--data", str(csv_file), "--chunk-size", cs, "--out", str(path)])[0] == 0
        recs = dict(line.split(",", 1) for line in path.read_text().splitlines())
        vals.append([float(recs[f"coef.{n}.estimate"]) for n in ("(Intercept)", "x1", "x2", "x3")])
    assert np.max(np.abs(np.array(vals) - vals[0])) <= 1e-9


def test_cli_exit_codes(tmp_path, csv_file):
    code, _, err = run(["fit", "--data", str(tmp_path / "nope.csv")])
    assert code == EXIT_DATA and "nope.csv" in err
    assert run(["fit"])[0] == EXIT_USAGE
    assert run(["bogus"])[0] == EXIT_USAGE
    assert run(["fit", "--data", str(csv_file), "--solver", "newton"])[0] == EXIT_USAGE
    assert run(["fit", "--data", str(csv_file), "--response", "zz"])[0] == EXIT_DATA
    bad = write_text(tmp_path / "bad.csv", "y,x\n0,1\n3,2\n")
    code, _, err = run(["fit", "--data", bad])
    assert code == EXIT_DATA and "line 3" in err
    const = write_text(tmp_path / "const.csv", "y,x\n1,1\n1,2\n")
    assert run(["fit", "--data", const])[0] == EXIT_DATA
    assert run(["--help"])[0] == EXIT_OK


def test_cli_numerical_failure(tmp_path):
    rows = ["y,a,b"] + [f"{i % 2},{i * 0.1},{i * 0.2}" for i in range(1, 60)]
    p = write_text(tmp_path / "col.csv", "\n".join(rows) + "\n")
    code, _, err = run(["fit", "--data", p, "--solver", "irls"])
    assert code == EXIT_NUMERIC and "HessianNotPD" in err


def test_cli_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["gen", "--n", "1000", "--k", "2", "--corr", "0.999", "--seed", "7",
                    "--out", str(path)])[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_cli_gen_with_beta_file(tmp_path):
    beta = write_text(tmp_path / "beta.txt", "0.5, -0.25\n")
    out, bout = tmp_path / "d.csv", tmp_path / "b.txt"
    assert run(["gen", "--n", "50", "--k", "2", "--beta", beta, "--beta-out", str(bout),
                "--out", str(out)])[0] == EXIT_OK
    assert [float(v) for v in bout.read_text().split()] == [0.5, -0.25]
    assert run(["gen", "--n", "50", "--k", "3", "--beta", beta, "--out", str(out)])[0] == EXIT_USAGE
    assert run(["gen", "--n", "50", "--k", "2", "--corr", "1.5", "--out", str(out)])[0] == EXIT_USAGE


def test_cli_corr_sweep_report(tmp_path):
    code, out, _ = run(["experiment", "corr-sweep", "--replicates", "2", "--n", "200",
                        "--out-dir", str(tmp_path / "rep")])
    assert code == EXIT_OK
    lines = (tmp_path / "rep" / "summary.csv").read_text().splitlines()
    assert len(lines) == 1 + 14 * 2
    assert (tmp_path / "rep" / "manifest.json").exists()


def test_cli_pvalues_and_bootstrap(tmp_path):
    code, out, _ = run(["experiment", "pvalues", "--replicates", "5", "--n", "500", "--k", "2",
                        "--out-dir", str(tmp_path / "pv")])
    assert code == EXIT_OK and "KS D" in out
    code, out, _ = run(["experiment", "bootstrap", "--n", "200", "--k", "2", "--counts", "50",
                        "--out-dir", str(tmp_path / "bs")])
    assert code == EXIT_OK and "B=50" in out
    assert run(["experiment", "bootstrap", "--counts", "10", "--out-dir", str(tmp_path / "x")])[0] == EXIT_USAGE


def test_cli_bench(tmp_path):
    code, out, _ = run(["bench", "--sizes", "2000,1000", "--k", "2", "--repeats", "1",
                        "--out-dir", str(tmp_path / "b")])
    assert code == EXIT_OK
    assert out.splitlines()[1].split()[0] == "1000"


def test_module_entry_point(csv_file):
    proc = subprocess.run([sys.executable, "-m", "logitscale", "fit", "--data", str(csv_file)],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0 and "AUC:" in proc.stdout

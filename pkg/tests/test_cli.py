"""End-to-end tests of the ``snrobust`` command line."""

import csv
import io
import json

import pytest

from app import cli


def _run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_fit_writes_report(csv_path, tmp_path):
    out = tmp_path / "fit.json"
    code = cli.main(["fit", "--input", str(csv_path), "--column", "value", "--alpha", "0,0.5", "--output", str(out)])
    assert code == 0
    document = json.loads(out.read_text())
    assert document["command"] == "fit"
    assert document["n"] == 300
    assert [block["alpha"] for block in document["results"]] == [0.0, 0.5]
    for block in document["results"]:
        assert block["error"] is None
        assert block["fit"]["converged"] is True
        assert all(se > 0 for se in block["fit"]["std_errors"].values())
    assert document["results"][0]["fit"]["method"] == "mle"
    assert "runtime_seconds" in document["timing"]


def test_fit_csv_with_outlier_filter(csv_path, capsys):
    code, captured = _run(
        ["fit", "--input", str(csv_path), "--column", "value", "--alpha", "0.5", "--drop-outliers", "--format", "csv"],
        capsys,
    )
    assert code in (0, 3)
    rows = list(csv.DictReader(io.StringIO(captured.out)))
    assert len(rows) == 1
    assert {"mu", "se_mu", "clean_mu", "rd_mu"} <= set(rows[0])


def test_test_command(csv_path, capsys):
    code, captured = _run(
        ["test", "--input", str(csv_path), "--column", "value", "--alpha", "0.3", "--hypothesis", "mu=3"], capsys
    )
    assert code == 0
    document = json.loads(captured.out)
    assert document["hypothesis"] == "mu=3"
    assert document["results"][0]["test"]["p_value"] < 1e-6


def test_missing_input_file(tmp_path):
    out = tmp_path / "never.json"
    code = cli.main(["fit", "--input", str(tmp_path / "missing.csv"), "--column", "x", "--output", str(out)])
    assert code == 2
    assert not out.exists()


def test_missing_column(csv_path):
    assert cli.main(["fit", "--input", str(csv_path), "--column", "weight"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["test", "--hypothesis", "delta=1"],
        ["fit", "--alpha", "-0.5"],
        ["fit", "--alpha", "a,b"],
        ["fit", "--optimizer", "newton"],
    ],
)
def test_usage_errors(argv, csv_path):
    assert cli.main(argv + ["--input", str(csv_path), "--column", "value"]) == 1


def test_unknown_command():
    assert cli.main(["explain"]) == 1


def test_are_csv(capsys):
    code, captured = _run(["are", "--theta", "0,1,1", "--alpha", "0,0.5", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(captured.out)))
    assert [row["parameter"] for row in rows] == ["mu", "sigma", "gamma"]
    assert float(rows[0]["alpha=0"]) == pytest.approx(100.0)
    assert float(rows[2]["alpha=0.5"]) < 100.0


def test_are_is_reproducible(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for target in (first, second):
        assert cli.main(["are", "--alpha", "0,0.3", "--output", str(target)]) == 0
    one, two = json.loads(first.read_text()), json.loads(second.read_text())
    one.pop("timing")
    two.pop("timing")
    assert one == two
    assert len(one["rows"]) == 9
    assert one["reference_check"]["compared"] == 18


def test_power_anchor(capsys):
    code, captured = _run(["power", "--alpha", "0,0.5", "--d", "3,5"], capsys)
    assert code == 0
    document = json.loads(captured.out)
    rows = {row["d"]: row for row in document["rows"]}
    assert rows[3.0]["alpha=0"] == pytest.approx(0.6685, abs=0.005)
    assert rows[5.0]["alpha=0.5"] == pytest.approx(0.9585, abs=0.005)
    assert document["marginal"] == {"0": True, "0.5": True}


@pytest.mark.parametrize("kind,columns", [
    ("estimator_if", {"y", "if_mu_a0", "if_sigma_a0.5", "if_gamma_a0.5"}),
    ("test_if2", {"y", "if2_a0", "if2_a0.5"}),
    ("test_pif", {"y", "pif_a0", "pif_a0.5"}),
])
def test_diagnose(kind, columns, capsys):
    code, captured = _run(
        ["diagnose", "--kind", kind, "--start", "-2", "--stop", "2", "--step", "1", "--format", "csv"], capsys
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(captured.out)))
    assert [float(row["y"]) for row in rows] == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert columns <= set(rows[0])


def test_diagnose_bad_grid():
    assert cli.main(["diagnose", "--start", "1", "--stop", "0"]) == 1


def test_simulate_smoke(tmp_path):
    out = tmp_path / "sim.json"
    code = cli.main(["simulate", "--n", "40", "--reps", "2", "--alpha", "0,0.5", "--seed", "3", "--output", str(out)])
    assert code in (0, 3)
    document = json.loads(out.read_text())
    assert document["design"] == "bias_mse"
    assert document["scheme"]["epsilon"] == 0.1
    assert len(document["metrics"]) == 6
    assert "runtime_seconds" in document["timing"]

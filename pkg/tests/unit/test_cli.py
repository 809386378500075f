import csv
import json
import math

import pytest

from qrep.cli import build_parser, run
from qrep.matcore import write_matrix
from qrep.sweeps import CSV_COLUMNS


def run_json(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


@pytest.fixture
def pair_file(tmp_path, capsys):
    path = tmp_path / "pair.json"
    assert run(["gen", "voiculescu", "--n", "16", "-o", str(path)]) == 0
    capsys.readouterr()
    return path


def test_version(capsys):
    assert run(["--version"]) == 0
    assert capsys.readouterr().out.startswith("qrep ")


def test_missing_command_is_a_usage_error():
    assert run([]) == 3
    assert run(["invariant"]) == 3
    assert run(["invariant", "kappa"]) == 3


def test_invalid_range_is_a_usage_error():
    assert run(["verify", "voiculescu", "--n-range", "8:4"]) == 3
    assert run(["verify", "voiculescu", "--n-range", "x:4"]) == 3


def test_gen_voiculescu_writes_quasi_rep(pair_file):
    document = json.loads(pair_file.read_text())
    assert document["presentation"]["kind"] == "Z2"
    assert set(document["images"]) == {"a", "b"}


def test_invariant_kappa_of_relator(capsys, pair_file):
    code, report = run_json(capsys, "invariant", "kappa", "-i", str(pair_file), "--deterministic")
    assert code == 0
    assert report["command"] == "invariant kappa"
    assert "generated_at" not in report
    assert report["result"]["rounded"] == -1
    assert report["config"]["tolerances"]["branch_margin"] == 1e-6


def test_invariant_kappa_of_reversed_commutator(capsys, pair_file):
    code, report = run_json(capsys, "invariant", "kappa", "-i", str(pair_file), "--word", "[b, a]")
    assert code == 0
    assert report["result"]["rounded"] == 1
    assert "generated_at" in report


def test_invariant_kappa_normalized_trace(capsys, pair_file):
    _, report = run_json(
        capsys, "invariant", "kappa", "-i", str(pair_file), "--trace", "normalized"
    )
    assert report["result"]["name"] == "kappa_tau"
    assert report["result"]["value"] == pytest.approx(-1 / 16, abs=1e-9)


def test_invariant_winding(capsys, pair_file):
    code, report = run_json(capsys, "invariant", "winding", "-i", str(pair_file))
    assert code == 0
    assert report["result"]["rounded"] == -1


def test_invariant_on_matrix_input(capsys, tmp_path):
    path = tmp_path / "w.json"
    write_matrix(path, [[1, 0], [0, 1]])
    code, report = run_json(capsys, "invariant", "kappa", "-i", str(path))
    assert code == 0
    assert report["result"]["value"] == 0.0
    assert run(["invariant", "kappa", "-i", str(path), "--word", "a"]) == 3


def test_branch_cut_exits_with_numerical_failure(tmp_path):
    path = tmp_path / "w.json"
    write_matrix(path, [[-1, 0], [0, -1]])
    assert run(["invariant", "kappa", "-i", str(path)]) == 2


def test_non_unitary_input_is_a_hypothesis_failure(tmp_path):
    path = tmp_path / "w.json"
    write_matrix(path, [[2, 0], [0, 1]])
    assert run(["invariant", "kappa", "-i", str(path)]) == 1


def test_unreadable_input_is_an_input_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert run(["invariant", "kappa", "-i", str(path)]) == 3
    assert run(["invariant", "kappa", "-i", str(tmp_path / "missing.json")]) == 3


def test_matrix_document_is_not_a_quasi_rep(tmp_path):
    path = tmp_path / "w.json"
    write_matrix(path, [[1, 0], [0, 1]])
    assert run(["defect", "-i", str(path)]) == 3
    assert run(["gen", "perturbed", "-i", str(path), "--radius", "0.1"]) == 3


def test_word_syntax_error_is_an_input_error(pair_file):
    assert run(["invariant", "kappa", "-i", str(pair_file), "--word", "a $"]) == 3
    assert run(["invariant", "kappa", "-i", str(pair_file), "--word", "(a^1000000)^1000000"]) == 3


def test_defect(capsys, pair_file):
    code, report = run_json(capsys, "defect", "-i", str(pair_file), "--set", "a,b,a b")
    assert code == 0
    assert report["result"]["relator_defect"] == pytest.approx(2 * math.sin(math.pi / 16))
    assert report["result"]["elements"] == ["a", "b", "a b"]


def test_gen_perturbed_and_pullback(capsys, tmp_path, pair_file):
    perturbed = tmp_path / "perturbed.json"
    assert run(["gen", "perturbed", "-i", str(pair_file), "--radius", "0.1", "--seed", "3", "-o", str(perturbed)]) == 0
    surface = tmp_path / "surface.json"
    assert run(["gen", "pullback", "-i", str(pair_file), "--genus", "2", "-o", str(surface)]) == 0
    document = json.loads(surface.read_text())
    assert document["presentation"]["kind"] == "surface"
    code, report = run_json(capsys, "invariant", "kappa", "-i", str(surface))
    assert code == 0
    assert report["result"]["rounded"] == -1


def test_gen_pullback_with_explicit_images(tmp_path, pair_file):
    surface = tmp_path / "surface.json"
    assert run(["gen", "pullback", "-i", str(pair_file), "--images", "s1=b,t1=a", "-o", str(surface)]) == 0
    assert run(["gen", "pullback", "-i", str(pair_file), "--images", "s1"]) == 3


def test_gen_direct_sum(capsys, tmp_path, pair_file):
    code = run(["gen", "direct-sum", "-i", str(pair_file), "-i", str(pair_file)])
    document = json.loads(capsys.readouterr().out)
    assert code == 0
    assert len(document["images"]["a"]["re"]) == 32 * 32
    assert run(["gen", "direct-sum", "-i", str(pair_file)]) == 3


def test_invariant_k(capsys, tmp_path):
    path = tmp_path / "pair.json"
    assert run(["gen", "voiculescu", "--n", "64", "-o", str(path)]) == 0
    code, report = run_json(capsys, "invariant", "k", "-i", str(path))
    assert code == 0
    assert report["result"]["rounded"] == 1
    assert run(["invariant", "k", "-i", str(path), "--pair", "a"]) == 3


def test_verify_voiculescu_writes_csv(capsys, tmp_path):
    out = tmp_path / "family.csv"
    code, report = run_json(capsys, "verify", "voiculescu", "--n-range", "3:9:3", "--csv", str(out))
    assert code == 0
    assert report["result"]["cases"] == 3
    with out.open() as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [row[0] for row in rows[1:]] == ["3", "6", "9"]
    assert all(row[CSV_COLUMNS.index("kappa")] == "-1" for row in rows[1:])


def test_failed_cases_become_rows(capsys):
    code, report = run_json(capsys, "verify", "voiculescu", "--n-range", "2:3")
    assert code == 2
    first, second = report["result"]["rows"]
    assert first["status"] == "BranchCut"
    assert first["error"]
    assert second["status"] == "ok"


def test_invalid_sizes_become_rows(capsys):
    code, report = run_json(capsys, "verify", "voiculescu", "--n-range", "1:3")
    assert code == 2
    assert [row["status"] for row in report["result"]["rows"]] == [
        "InvalidParameter",
        "BranchCut",
        "ok",
    ]
    assert "at least 2" in report["result"]["rows"][0]["error"]


def test_invalid_size_is_a_hypothesis_failure():
    assert run(["gen", "voiculescu", "--n", "1"]) == 1


def test_invalid_seed_becomes_a_row(capsys):
    code, report = run_json(
        capsys, "stability", "--n", "32", "--radius", "0.19", "--seeds", "2", "--seed", "-1"
    )
    assert code == 1
    first, second = report["result"]["rows"]
    assert (first["seed"], first["status"]) == (-1, "InvalidParameter")
    assert (second["seed"], second["status"]) == (0, "ok")


def test_csv_requires_sweep_rows(tmp_path, pair_file):
    assert run(["invariant", "kappa", "-i", str(pair_file), "--csv", str(tmp_path / "x.csv")]) == 3


def test_stability(capsys):
    code, report = run_json(
        capsys, "stability", "--g", "1", "--n", "32", "--radius", "0.19", "--seeds", "3"
    )
    assert code == 0
    assert report["result"]["bound"] == pytest.approx(0.2)
    for row in report["result"]["rows"]:
        assert row["kappa_before"] == row["kappa"] == -1
        assert row["status"] == "ok"


def test_stability_hypothesis_violation(capsys):
    code, report = run_json(capsys, "stability", "--n", "32", "--radius", "0.3", "--seeds", "1")
    assert code == 1
    assert report["result"]["rows"][0]["status"] == "HypothesisViolated"
    code, report = run_json(
        capsys, "stability", "--n", "32", "--radius", "0.3", "--seeds", "1", "--observe"
    )
    assert code == 0
    assert report["result"]["rows"][0]["status"] == "unverified"


def test_homotopy_gap(capsys, pair_file):
    code, report = run_json(capsys, "homotopy-gap", "-i", str(pair_file))
    assert code == 0
    assert 0.0 < report["result"]["value"] < 1.0


@pytest.mark.parametrize("variant", ["remark25", "representatives"])
def test_verify_representatives(capsys, variant):
    code, report = run_json(capsys, "verify", variant, "--n", "64")
    assert code == 0
    assert report["command"] == f"verify {variant}"
    result = report["result"]
    assert result["representatives_agree"] and result["pullback_agrees"]
    assert {value["rounded"] for value in result["representatives"].values()} == {1}
    assert result["genus1"]["lhs_k"] == result["genus2"]["lhs_k"] == 1


def test_tolerance_flags_and_environment(capsys, monkeypatch, pair_file):
    _, report = run_json(
        capsys, "invariant", "kappa", "-i", str(pair_file), "--tol-branch-margin", "1e-3"
    )
    assert report["config"]["tolerances"]["branch_margin"] == 1e-3
    monkeypatch.setenv("QREP_TOL_INTEGER", "1e-4")
    _, report = run_json(capsys, "invariant", "kappa", "-i", str(pair_file))
    assert report["config"]["tolerances"]["integer"] == 1e-4
    monkeypatch.setenv("QREP_TOL_INTEGER", "tiny")
    assert run(["invariant", "kappa", "-i", str(pair_file)]) == 3


def test_summary_is_rendered(tmp_path, pair_file):
    summary = tmp_path / "summary.md"
    assert run(["invariant", "kappa", "-i", str(pair_file), "--summary", str(summary), "-o", str(tmp_path / "r.json")]) == 0
    text = summary.read_text()
    assert text.startswith("# qrep invariant kappa")
    assert "| `rounded` | -1 |" in text


def test_deterministic_reports_are_identical(tmp_path, pair_file):
    outputs = []
    for name in ("first.json", "second.json"):
        path = tmp_path / name
        assert run(["invariant", "winding", "-i", str(pair_file), "--deterministic", "-o", str(path)]) == 0
        outputs.append(path.read_text().replace(name, ""))
    assert outputs[0] == outputs[1]


def test_parser_accepts_global_options_after_subcommand():
    args = build_parser().parse_args(["gen", "voiculescu", "--n", "4"])
    assert args.tol_branch_margin is None
    assert args.envelope is False

import csv
import json
from importlib import resources

import pytest

from nccp.cli import content_hash, main

ONE_DIM = str(resources.files("nccp") / "data" / "one_dim.json")


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_one_dim_converges(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["solve", ONE_DIM, "--variant", "vapp", "--gamma", "1", "--eps0", "0.4",
                 "--max-iter", "1000", "--output", str(out)])
    assert code == 0
    assert "converged" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "converged"
    assert summary["solution"]["u"][0] == pytest.approx(1.0, abs=1e-5)
    assert len(_read_csv(out / "trace.csv")) == summary["iterations"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "solve" and len(man["input_hash"]) == 64


def test_solve_hits_iteration_cap(tmp_path):
    assert main(["solve", ONE_DIM, "--eps0", "0.4", "--max-iter", "3", "--output", str(tmp_path)]) == 2


def test_solve_strong_without_beta(tmp_path, capsys):
    doc = json.loads(open(ONE_DIM).read())
    doc["objective"]["smooth"]["strong_convexity"] = 0.0
    spec = tmp_path / "flat.json"
    spec.write_text(json.dumps(doc))
    code = main(["solve", str(spec), "--variant", "vapp-s", "--output", str(tmp_path / "o")])
    assert code == 1
    assert "missing β_G" in capsys.readouterr().err


def test_solve_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["solve", str(bad), "--output", str(tmp_path / "o")]) == 1
    assert main(["solve", ONE_DIM, "--variant", "vapp-m", "--output", str(tmp_path / "o")]) == 1
    assert main(["solve", ONE_DIM, "--dual-bound", "3", "--output", str(tmp_path / "o")]) == 1
    assert "dual-bound" in capsys.readouterr().err


@pytest.mark.parametrize("variant,extra", [("vapp-m", ["--dual-bound", "5"]), ("mirror-prox", []),
                                           ("vapp", ["--backtrack-eta", "0.5"])])
def test_solve_other_variants(tmp_path, variant, extra):
    assert main(["solve", ONE_DIM, "--variant", variant, "--output", str(tmp_path)] + extra) == 0


def test_json_and_csv_traces_agree(tmp_path):
    base = ["solve", ONE_DIM, "--eps0", "0.4", "--max-iter", "40", "--tol-feas", "0", "--tol-obj", "0"]
    main(base + ["--output", str(tmp_path / "c")])
    main(base + ["--format", "json", "--output", str(tmp_path / "j")])
    rows = _read_csv(tmp_path / "c" / "trace.csv")
    js = json.loads((tmp_path / "j" / "trace.json").read_text())
    assert len(rows) == len(js) == 40
    for a, b in zip(rows, js):
        for k, v in b.items():
            assert (a[k] == "") if v is None else (float(a[k]) == v)


def test_manifest_hash_stable(tmp_path):
    args = ["solve", ONE_DIM, "--eps0", "0.4", "--max-iter", "50"]
    main(args + ["--output", str(tmp_path / "a")])
    main(args + ["--output", str(tmp_path / "b")])
    main(args[:-1] + ["51", "--output", str(tmp_path / "c")])
    h = [json.loads((tmp_path / d / "manifest.json").read_text())["input_hash"] for d in "abc"]
    assert h[0] == h[1] != h[2]
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    assert content_hash({"x": 1, "y": 2}) == content_hash({"y": 2, "x": 1})


def test_bench_deterministic_and_reports_ratio(tmp_path):
    args = ["bench-sensvm", "--m", "8", "--n", "20", "--s", "2", "--seed", "5"]
    assert main(args + ["--output", str(tmp_path / "a")]) == 0
    assert main(args + ["--output", str(tmp_path / "b")]) == 0
    for v in ("vapp-m-I", "vapp-m-C", "mirror-prox-SP"):
        a = (tmp_path / "a" / f"trace_{v}.csv").read_bytes()
        assert a == (tmp_path / "b" / f"trace_{v}.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["cost_ratios"]["vapp-m-C/mirror-prox-SP"] > 0
    for v, r in summary["variants"].items():
        assert r["status"] == "converged"
        assert r["objective"] <= 1e-5


def test_bench_rejects_bad_arguments(tmp_path):
    assert main(["bench-sensvm", "--variants", "admm", "--output", str(tmp_path)]) == 1
    assert main(["bench-sensvm", "--s", "0", "--output", str(tmp_path)]) == 1


def test_check_passes_and_detects_mutation(capsys):
    assert main(["check", "--samples", "200"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8
    assert main(["check", "--suites", "lemma1", "--mutate", "dual-order"]) == 1
    assert "FAIL lemma1" in capsys.readouterr().out
    assert main(["check", "--suites", "nonsense"]) == 1

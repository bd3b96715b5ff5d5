import json
import shutil

import pytest

from conftest import GOLDEN
from reqtest.cli import GENERATED_BY, main


@pytest.fixture
def project(data_dir):
    return {
        "o1": str(data_dir / "stage1.onto.json"),
        "o2": str(data_dir / "stage2.onto.json"),
        "links": str(data_dir / "links.json"),
        "rsl": str(data_dir / "requirements.rsl"),
        "rsl2": str(data_dir / "stage2.rsl"),
        "scenarios": sorted(str(p) for p in (data_dir / "scenarios").glob("*.json")),
    }


def stage1(project):
    return ["--ontology", project["o1"], "--rsl", project["rsl"]]


def test_validate_ok(project, capsys):
    assert main(["validate", *stage1(project)]) == 0
    assert "4 requirement(s) valid" in capsys.readouterr().out


def test_validate_unknown_atom(project, tmp_path, capsys):
    bad = tmp_path / "bad.rsl"
    bad.write_text(
        "requirement RX stage 1 fsm {\n  entry: {Feedwater Tank.leaks};\n  state q0 { stay: true; }\n  release q0: true;\n}\n"
    )
    assert main(["validate", "--ontology", project["o1"], "--rsl", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "{Feedwater Tank.leaks}" in out and "foreign-atom" in out


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", "--ontology", str(tmp_path / "nope.json"), "--rsl", "x.rsl"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_option(capsys):
    assert main(["gen", "--out", "x"]) == 2


def test_gen_matches_golden(project, tmp_path, capsys):
    assert main(["gen", *stage1(project), "--out", str(tmp_path)]) == 0
    got = (tmp_path / "R1_3.csv").read_bytes()
    assert got == (GOLDEN / "R1_3_TC1_V1.csv").read_bytes()
    doc = json.loads((tmp_path / "R1_3.tc.json").read_text())
    assert [tc["id"] for tc in doc["test_cases"]] == ["R1_3_TC1_V1"]
    assert "R1_3: 1 test case(s), 1 leaf/leaves" in capsys.readouterr().out


def test_gen_depth_one_warns(project, tmp_path, capsys):
    assert main(["gen", *stage1(project), "--out", str(tmp_path), "--max-depth", "1"]) == 0
    out = capsys.readouterr().out
    assert "warning: R1_3 has no entry-to-release path" in out
    assert (tmp_path / "R1_3.csv").read_text() == "test_case_id,step_index,pre_condition,post_condition\n"


def test_gen_bad_depth():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--max-depth", "0"])
    assert exc.value.code == 2


def test_gen_stage_two(project, tmp_path):
    args = ["gen", "--ontology", project["o1"], "--ontology", project["o2"], "--links", project["links"]]
    assert main([*args, "--rsl", project["rsl2"], "--out", str(tmp_path)]) == 0
    ids = [tc["id"] for tc in json.loads((tmp_path / "R1_5.tc.json").read_text())["test_cases"]]
    assert ids and all(i.endswith("_V2") for i in ids)


def test_refine(project, tmp_path, data_dir):
    args = ["refine", "--ontology", project["o1"], "--ontology", project["o2"], "--links", project["links"]]
    assert main([*args, "--out", str(tmp_path)]) == 0
    merged = json.loads((tmp_path / "stage2.onto.json").read_text())
    assert merged["stage_version"] == 2
    assert any("refines" in a["labels"] for a in merged["arcs"])


def test_refine_needs_two(project, tmp_path):
    assert main(["refine", "--ontology", project["o1"], "--out", str(tmp_path)]) == 2


def _pipeline(project, root):
    tests, traces, out = root / "tests", root / "traces", root / "out"
    assert main(["gen", *stage1(project), "--out", str(tests)]) == 0
    sim = ["simulate", "--ontology", project["o1"], "--out", str(traces)]
    for s in project["scenarios"]:
        sim += ["--scenario", s]
    assert main(sim) == 0
    return tests, traces, out


def test_simulate_exec_report(project, tmp_path, capsys):
    tests, traces, out = _pipeline(project, tmp_path)
    assert len(list(traces.glob("*.trace.csv"))) == 6
    assert (traces / "near_h.plant.trace.csv").exists()
    capsys.readouterr()
    assert main(["exec", "--tests", str(tests), "--traces", str(traces), "--out", str(out)]) == 1
    text = capsys.readouterr().out
    assert (out / "report.txt").read_text() == text
    assert "R2_2_TC1_V1" in text and "FAIL" in text
    doc = json.loads((out / "report.json").read_text())
    cell = next(
        c for c in doc["cells"] if c["test_case"] == "R2_2_TC1_V1" and c["trace"] == "near_h.plant"
    )
    assert cell["outcome"] == "fail"
    assert main(["report", "--out", str(out)]) == 1


def test_exec_deterministic(project, tmp_path):
    tests, traces, _ = _pipeline(project, tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["exec", "--tests", str(tests), "--traces", str(traces), "--out", str(a)])
    main(["exec", "--tests", str(tests), "--traces", str(traces), "--out", str(b)])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert GENERATED_BY in (a / "report.json").read_text()


def test_exec_empty_tests(project, tmp_path):
    tests, traces, out = _pipeline(project, tmp_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["exec", "--tests", str(empty), "--traces", str(traces), "--out", str(out)]) == 0


def test_exec_missing_atom_column(project, tmp_path, capsys):
    tests, traces, out = _pipeline(project, tmp_path)
    lone = tmp_path / "lone"
    lone.mkdir()
    src = traces / "drain.model.trace.csv"
    header, *rows = src.read_text().splitlines()
    cols = header.split(",")
    drop = cols.index("{System.normal system operation}")
    keep = lambda line: ",".join(v for i, v in enumerate(line.split(",")) if i != drop)
    (lone / "cut.trace.csv").write_text("\n".join(keep(l) for l in [header, *rows]) + "\n")
    only = tmp_path / "only"
    only.mkdir()
    shutil.copy(tests / "R1_3.csv", only)
    assert main(["exec", "--tests", str(only), "--traces", str(lone), "--out", str(out)]) == 2
    assert "normal system operation" in capsys.readouterr().out


def test_exec_missing_dir(tmp_path):
    assert main(["exec", "--tests", str(tmp_path / "x"), "--traces", str(tmp_path), "--out", str(tmp_path)]) == 2

"""CLI behaviour: exit codes, goldens, byte reproducibility.

Set FLOWSHADOW_UPDATE_GOLDENS=1 to rewrite the golden files.
"""

import json
import os
from pathlib import Path

import pytest

from flowshadow import io
from flowshadow.cli import build_parser, run

GOLDENS = Path(__file__).parent / "goldens"
UPDATE = os.environ.get("FLOWSHADOW_UPDATE_GOLDENS") == "1"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


GOLDEN_CASES = {
    "sys_list.txt": ["sys", "list"],
    "sys_show_pitchfork1d.txt": ["sys", "show", "pitchfork1d"],
    "sys_show_circle_ns.txt": ["sys", "show", "circle_ns"],
    "sys_show_torus_linear.txt": ["sys", "show", "--system", "torus_linear", "--alpha", "1.4142135623730951"],
    "sys_show_saddle2d.txt": ["sys", "show", "saddle2d"],
    "attractors_pitchfork1d.json": ["chain", "attractors", "--system", "pitchfork1d", "--depth", "4"],
    "scc_circle_ns.json": ["chain", "scc", "--system", "circle_ns", "--depth", "4"],
    "graph_pitchfork1d.txt": ["chain", "graph", "--system", "pitchfork1d", "--depth", "3"],
    "prop3_pitchfork1d.json": ["verify", "prop3", "--system", "pitchfork1d", "--depth", "4"],
    "concat_ab.po": ["pseudo", "gen", "--system", "pitchfork1d", "--kind", "concat_ab", "--a", "1", "--b", "-1",
                     "--half-len", "8"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_goldens(name, capsys):
    code, out, _ = call(capsys, *GOLDEN_CASES[name])
    assert code == 0
    path = GOLDENS / name
    if UPDATE:
        path.write_text(out, encoding="utf-8")
    want = path.read_text(encoding="utf-8")
    if name.endswith((".json", ".po")):
        assert io.canonical(json.loads(out)) == io.canonical(json.loads(want))
    else:
        assert out == want


def test_exit_codes(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert call(capsys, "sys", "show", "nope")[0] == 1
    assert call(capsys, "bogus")[0] == 1
    assert call(capsys, "sys", "show")[0] == 1
    assert call(capsys, "integrate", "--system", "pitchfork1d", "--x0", "1.9", "--t-max", "-5")[0] == 1
    assert call(capsys, "chain", "transitive", "--system", "pitchfork1d", "--depth", "4")[0] == 2
    code, out, _ = call(capsys, "verify", "prop3", "--system", "torus_linear", "--alpha", "1.4142135623730951",
                        "--depth", "4")
    assert code == 0 and json.loads(out)["verdict"] == "consistent"
    assert call(capsys, "verify", "thm_asp", "--system", "torus_linear", "--alpha", "0.5", "--depth", "3",
                "--a", "0.5,0.5", "--b", "0.1,0.1", "--grid", "5")[0] == 3
    assert call(capsys, "verify", "thm_asp", "--system", "pitchfork1d")[0] == 1


def test_bad_system_file(capsys, tmp_path):
    f = tmp_path / "bad.sys"
    f.write_text("name = x\nspace = box(0, 1)\ndx0 = x0 +\n")
    code, _, err = call(capsys, "sys", "show", "--file", str(f))
    assert code == 1 and "line 3" in err
    f.write_text("name = lin\nspace = box(-1, 1)\ndx0 = -x0\n")
    code, out, _ = call(capsys, "sys", "show", "--file", str(f))
    assert code == 0 and out.startswith("name = lin")


def test_pseudo_and_shadow_pipeline(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert call(capsys, "pseudo", "gen", "--system", "pitchfork1d", "--kind", "concat_ab", "--a", "1", "--b", "-1",
                "--out", ".", "--name", "concat_ab.po")[0] == 0
    code, _, _ = call(capsys, "pseudo", "classify", "--po", "concat_ab.po", "--kind", "delta_average",
                      "--delta", "0.1", "--out", "cls")
    assert code == 0
    rep = json.loads((tmp_path / "cls" / "classification.json").read_text())
    assert rep["result"]["window_N"] == 21
    assert (tmp_path / "cls" / "defects.csv").read_text().startswith("i,defect\n")
    code, _, _ = call(capsys, "shadow", "search", "--po", "concat_ab.po", "--mode", "average", "--grid", "401",
                      "--out", "sh")
    assert code == 2
    rep = json.loads((tmp_path / "sh" / "shadow.json").read_text())
    assert rep["status"] == "refuted" and rep["result"]["certificate"]["valid"]
    assert rep["result"]["search"]["value"] >= 0.25 - 1e-6
    # the attached certificate replays
    cert_path = tmp_path / "cert.json"
    cert_path.write_text(io.dumps(rep["result"]["certificate"]))
    assert call(capsys, "shadow", "certify", "--recheck", str(cert_path))[0] == 0
    # a true orbit is shadowed: exit 0 and no certificate
    assert call(capsys, "pseudo", "gen", "--system", "pitchfork1d", "--kind", "orbit", "--x0", "0.5",
                "--out", ".", "--name", "orbit.po")[0] == 0
    code, out, _ = call(capsys, "shadow", "search", "--po", "orbit.po", "--mode", "uniform", "--grid", "4001")
    assert code == 0 and json.loads(out)["result"]["search"]["z"] == [0.5]


def test_perturb_is_seed_reproducible(capsys, tmp_path):
    args = ["pseudo", "gen", "--system", "circle_ns", "--kind", "perturb", "--n", "12", "--noise", "0.05"]
    a = call(capsys, *args, "--seed", "3")[1]
    b = call(capsys, *args, "--seed", "3")[1]
    c = call(capsys, *args, "--seed", "4")[1]
    assert a == b and a != c


def test_reports_byte_reproducible(capsys, tmp_path):
    args = ["transitive-test", "--system", "torus_linear", "--alpha", "1.4142135623730951", "--depth", "3",
            "--t-max", "300", "--pairs", "6", "--seed", "11"]
    for d in ("r1", "r2"):
        assert call(capsys, *args, "--out", str(tmp_path / d))[0] == 0
    b1 = (tmp_path / "r1" / "transitivity.json").read_bytes()
    b2 = (tmp_path / "r2" / "transitivity.json").read_bytes()
    # only the recorded output directory differs
    assert b1.replace(b"r1", b"r2") == b2
    rep = json.loads(b1)
    assert rep["run_config"]["seed"] == 11 and rep["result"]["seed"] == 11


def test_integrate_csv(capsys, tmp_path):
    code, out, _ = call(capsys, "integrate", "--system", "pitchfork1d", "--x0", "0.5", "--t-max", "1", "--dt", "0.5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,x0" and len(lines) == 4
    assert call(capsys, "integrate", "--system", "pitchfork1d", "--t-max", "1", "--out", str(tmp_path))[0] == 0
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "trajectory.json").exists()


def test_chain_subcommands(capsys, tmp_path):
    code, out, _ = call(capsys, "chain", "omega", "--system", "pitchfork1d", "--x0", "0.5")
    assert code == 0 and json.loads(out)["result"]["boxes"] == [47, 48]
    code, out, _ = call(capsys, "chain", "basin", "--system", "pitchfork1d", "--x0", "1", "--depth", "4")
    assert code == 0 and 12 in json.loads(out)["result"][0]["boxes"]
    assert call(capsys, "chain", "graph", "--system", "pitchfork1d", "--depth", "3", "--out", str(tmp_path))[0] == 0
    assert (tmp_path / "graph.txt").read_text().startswith("# cover")


def test_help_lists_recorded_flags():
    text = build_parser()._subparsers._group_actions[0].choices["verify"].format_help()
    for flag in ("--system", "--file", "--depth", "--eps0", "--gap-n", "--half-len", "--step", "--t-edge",
                 "--t-max", "--seed", "--jobs", "--out", "--delta"):
        assert flag in text
    text = build_parser()._subparsers._group_actions[0].choices["chain"].format_help()
    assert "--delta" in text and "--t-edge" in text

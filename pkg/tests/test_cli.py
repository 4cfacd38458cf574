import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from adasub.cli import main, render_table
from adasub.instance import load_instance

from conftest import reference_sad_value

DATA = Path(__file__).parent / "data"
TOY = str(DATA / "toy_knapsack.json")


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


class TestVerify:
    def test_generated_instance_passes(self, tmp_path):
        path = tmp_path / "g.json"
        assert run("generate", "--seed", "1", "--n", "3", "--states", "2", "--out", str(path))[0] == 0
        code, text = run("verify", "--instance", str(path))
        assert code == 0 and text.rstrip().endswith("result: pass")

    def test_violation_prints_witness(self):
        code, text = run("verify", "--instance", str(DATA / "supermodular_pair.json"))
        assert code == 1
        assert "VIOLATION (required)" in text and "Δ(1|{}) = 0 < Δ(1|{0: 0}) = 1" in text

    def test_corrupted_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(Path(TOY).read_text()[:-40])
        assert run("verify", "--instance", str(bad))[0] == 2
        assert "line" in capsys.readouterr().err

    def test_claimed_property_is_required(self, tmp_path):
        doc = json.loads((DATA / "supermodular_pair.json").read_text())
        # the pair is monotone, so a non-monotone claim must fail even though adaptivity also fails
        doc["certified"] = ["non-monotone"]
        p = tmp_path / "claim.json"
        p.write_text(json.dumps(doc))
        assert run("verify", "--instance", str(p))[0] == 1


class TestRun:
    def test_sad_exact_golden(self):
        code, text = run("run", "--instance", TOY, "--policy", "sad", "--mode", "exact")
        assert code == 0
        assert text == (DATA / "toy_knapsack_sad_exact.golden").read_text()

    def test_golden_value_is_reference(self):
        inst = load_instance(TOY)
        golden = (DATA / "toy_knapsack_sad_exact.golden").read_text()
        value = float(next(line.split()[1] for line in golden.splitlines() if line.startswith("value")))
        ref = reference_sad_value(inst.utility, inst.prior, inst.constraint)
        assert value == pytest.approx(ref, abs=1e-10)

    def test_default_mode_is_exact(self):
        code, text = run("run", "--instance", TOY, "--policy", "sad")
        assert code == 0 and "exact" in text

    def test_mc_reproducible(self, tmp_path):
        path = tmp_path / "p.json"
        run("generate", "--seed", "4", "--n", "3", "--constraint", "partition", "--out", str(path))
        a = run("run", "--instance", str(path), "--policy", "sag", "--mode", "mc", "--seed", "7", "--trials", "20000")
        b = run("run", "--instance", str(path), "--policy", "sag", "--mode", "mc", "--seed", "7", "--trials", "20000")
        assert a == b and a[0] == 0 and "std-error" in a[1]

    def test_invalid_deltas(self):
        assert run("run", "--instance", TOY, "--policy", "sad", "--delta1", "0.7", "--delta2", "0.4")[0] == 2

    def test_wrong_constraint_for_policy(self):
        assert run("run", "--instance", TOY, "--policy", "sag")[0] == 2

    def test_json_output(self, tmp_path):
        out = tmp_path / "r.json"
        run("run", "--instance", TOY, "--policy", "sad", "--mode", "exact", "--out", str(out))
        doc = json.loads(out.read_text())
        assert doc["value"] == pytest.approx(0.91875) and doc["mode"] == "exact"

    def test_usage_error(self):
        assert run("run", "--instance", TOY)[0] == 2
        assert run("frobnicate")[0] == 2


class TestRatio:
    def test_knapsack_row(self, tmp_path):
        out = tmp_path / "ratio.json"
        code, text = run("ratio", "--instance", TOY, "--out", str(out))
        assert code == 0
        header, row = text.splitlines()
        assert header.split() == ["instance-id", "policy", "value", "opt", "ratio", "bound", "pass"]
        assert row.split()[0] == "toy-knapsack" and row.split()[-2:] == ["0.1", "pass"]
        doc = json.loads(out.read_text())
        assert doc[0]["pass"] is True and doc[0]["bound"] == pytest.approx(0.1)

    def test_matroid_row(self, tmp_path):
        path = tmp_path / "m.json"
        run("generate", "--seed", "2", "--n", "4", "--constraint", "partition", "--out", str(path))
        code, text = run("ratio", "--instance", str(path))
        row = text.splitlines()[1].split()
        assert code == 0 and row[1] == "sag" and float(row[-2]) == pytest.approx(1 / 6) and row[-1] == "pass"

    def test_oversize(self):
        assert run("ratio", "--instance", str(DATA / "six_items.json"))[0] == 3
        assert run("optimal", "--instance", str(DATA / "six_items.json"))[0] == 3


class TestGenerate:
    def test_writes_certified_file(self, tmp_path):
        path = tmp_path / "g.json"
        code, text = run("generate", "--seed", "1", "--n", "3", "--states", "2", "--nonmonotone", "yes",
                         "--out", str(path))
        assert code == 0 and "non-monotone" in text
        assert "non-monotone" in json.loads(path.read_text())["certified"]

    def test_same_seed_same_bytes(self):
        a = run("generate", "--seed", "9", "--n", "3")
        b = run("generate", "--seed", "9", "--n", "3")
        assert a == b and a[0] == 0

    def test_impossible_profile(self):
        code, _ = run("generate", "--seed", "0", "--n", "1", "--pointwise", "no", "--nonmonotone", "any",
                      "--max-attempts", "100")
        assert code == 1

    def test_out_of_range(self):
        assert run("generate", "--seed", "0", "--n", "9")[0] == 2


def test_optimal_command(tmp_path):
    out = tmp_path / "opt.json"
    code, text = run("optimal", "--instance", TOY, "--out", str(out))
    assert code == 0 and "opt" in text
    doc = json.loads(out.read_text())
    assert doc["tree"][0]["observation"] == []


def test_render_table_alignment():
    text = render_table(["a", "bb"], [["xxx", 1.5], ["y", None]])
    assert text == "a    bb\nxxx  1.5\ny    -\n"


def test_console_script_is_deterministic():
    cmd = [sys.executable, "-m", "adasub.cli", "run", "--instance", TOY, "--policy", "sad-simplified",
           "--mode", "mc", "--trials", "3000", "--seed", "11"]
    a = subprocess.run(cmd, capture_output=True, check=True)
    b = subprocess.run(cmd, capture_output=True, check=True)
    assert a.stdout == b.stdout and a.stdout

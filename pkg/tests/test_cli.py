import json
import subprocess
import sys

import pytest

from signsum.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def halves(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("1/2\n1/2\n")
    return str(p)


class TestBounds:
    def test_eval_G(self, capsys):
        code, out, _ = run(["bounds", "--eval", "G", "0.25"], capsys)
        assert code == 0
        assert abs(float(out) - 0.42768) <= 1e-5

    def test_eval_F_exact_json(self, capsys):
        code, out, _ = run(["bounds", "--eval", "F", "1/4", "--format", "json"], capsys)
        assert code == 0
        assert json.loads(out)["value"] == "13/32"

    def test_eval_U(self, capsys):
        code, out, _ = run(["bounds", "--eval", "U", "2", "2"], capsys)
        assert code == 0 and float(out) == pytest.approx(0.28)

    def test_eval_domain_error(self, capsys):
        code, _, err = run(["bounds", "--eval", "G", "-1"], capsys)
        assert code == 2 and "error" in err

    def test_eval_unknown(self, capsys):
        code, _, err = run(["bounds", "--eval", "Q", "1"], capsys)
        assert code == 2

    def test_checks_text_header(self, capsys):
        code, out, _ = run(["bounds"], capsys)
        assert code == 0
        assert out.startswith("#")
        assert "c_star" in out or "c*" in out
        assert "11/11 claims pass" in out


class TestDist:
    def test_interval_halves(self, halves, capsys):
        code, out, _ = run(["dist", "--weights", halves, "--interval", "-1", "1"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["interval"]["numerator"] == doc["interval"]["denominator"] == 4
        assert doc["mode"] == "exact" and doc["schema_version"] == 1

    def test_csv_distribution(self, halves, capsys):
        code, out, _ = run(["dist", "--weights", halves, "--format", "csv"], capsys)
        assert out.splitlines() == ["value,count,prob", "-1,1,0.25", "0,2,0.5", "1,1,0.25"]

    def test_text(self, halves, capsys):
        code, out, _ = run(["dist", "--weights", halves, "--tail", "1", "--format", "text"], capsys)
        assert "tail: 1/4" in out

    def test_shift_out_of_range(self, halves, capsys):
        code, _, err = run(["dist", "--weights", halves, "--shift", "2"], capsys)
        assert code == 2

    def test_parse_error_line(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("0.5\n# fine\n0.5x\n")
        code, _, err = run(["dist", "--weights", str(p)], capsys)
        assert code == 2 and "line 3" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["dist", "--weights", str(tmp_path / "nope.txt")], capsys)
        assert code == 2

    def test_missing_weights_flag(self, capsys):
        code, _, _ = run(["dist"], capsys)
        assert code == 2

    def test_capacity(self, tmp_path, capsys):
        p = tmp_path / "big.txt"
        p.write_text("sq:1/30\n" * 30)
        code, _, err = run(["dist", "--weights", str(p), "--engine", "naive"], capsys)
        assert code == 2 and "capped" in err

    def test_bad_cap_flag(self, halves, capsys):
        code, _, _ = run(["dist", "--weights", halves, "--naive-cap", "0"], capsys)
        assert code == 2

    def test_out_file(self, halves, tmp_path, capsys):
        target = tmp_path / "o.json"
        code, out, _ = run(["dist", "--weights", halves, "--out", str(target)], capsys)
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["interval"]["prob"] == 1.0


class TestStopping:
    def test_certificate_json(self, tmp_path, capsys):
        p = tmp_path / "w.txt"
        p.write_text("1/2\n1/2\n1/2\n1/2\n")
        code, out, _ = run(["stopping", "--weights", str(p)], capsys)
        assert code == 0
        doc = json.loads(out)
        assert {"K", "per_T", "final_prob", "final_bound", "pass"} <= set(doc)
        assert doc["final_prob"] == 14 / 16
        for row in doc["per_T"].values():
            assert {"count", "cond_prob", "bound", "margin"} <= set(row)

    def test_norm_too_large(self, tmp_path, capsys):
        p = tmp_path / "w.txt"
        p.write_text("1\n1\n")
        code, _, _ = run(["stopping", "--weights", str(p)], capsys)
        assert code == 2

    def test_text_and_csv(self, tmp_path, capsys):
        p = tmp_path / "w.txt"
        p.write_text("sq:1/9\n" * 9)
        code, out, _ = run(["stopping", "--weights", str(p), "--format", "text"], capsys)
        assert code == 0 and "PASS" in out
        code, out, _ = run(["stopping", "--weights", str(p), "--format", "csv"], capsys)
        assert out.startswith("T,count,cond_prob,bound,margin,case")


class TestVerify:
    def test_single_claim(self, capsys):
        code, out, _ = run(["verify", "--claim", "G_quarter_value"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["pass"] and doc["claims"][0]["claim_id"] == "G_quarter_value"

    def test_requires_selection(self, capsys):
        code, _, _ = run(["verify"], capsys)
        assert code == 2

    def test_unknown_claim_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--claim", "nope"])
        assert exc.value.code == 2

    def test_all_small_trials(self, capsys, tmp_path):
        rec = tmp_path / "records.csv"
        code, out, _ = run(["verify", "--all", "--seed", "42", "--trials", "40",
                            "--records-csv", str(rec)], capsys)
        assert code == 0
        doc = json.loads(out)
        assert len(doc["claims"]) == 18
        assert all(c["pass"] for c in doc["claims"])
        assert rec.read_text().startswith("claim_id,ordinal,margin\n")

    def test_csv_format(self, capsys):
        code, out, _ = run(["verify", "--claim", "c_star_value", "--format", "csv"], capsys)
        assert out.splitlines()[0].startswith("claim_id")

    def test_byte_identical_modulo_timestamp(self, capsys):
        argv = ["verify", "--claim", "lemma2_quarter", "--claim", "theorem_batch", "--trials", "30"]
        _, a, _ = run(argv, capsys)
        _, b, _ = run(argv + ["--threads", "3"], capsys)
        da, db = json.loads(a), json.loads(b)
        da.pop("generated_at"), db.pop("generated_at")
        assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("SSL_SEED", "7")
        _, out, _ = run(["verify", "--claim", "lemma2_quarter", "--trials", "5"], capsys)
        assert json.loads(out)["seed"] == 7
        _, out, _ = run(["verify", "--claim", "lemma2_quarter", "--trials", "5", "--seed", "3"], capsys)
        assert json.loads(out)["seed"] == 3

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("SSL_SEED", "abc")
        code, _, _ = run(["verify", "--claim", "c_star_value"], capsys)
        assert code == 2

    def test_default_seed(self, capsys, monkeypatch):
        monkeypatch.delenv("SSL_SEED", raising=False)
        _, out, _ = run(["verify", "--claim", "c_star_value"], capsys)
        assert json.loads(out)["seed"] == 42


class TestSearchAndReport:
    def test_search(self, capsys):
        code, out, _ = run(["search", "--n", "5", "--restarts", "4", "--steps", "10"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["result"]["best_prob"]["prob"] >= 0.5

    def test_search_bad_n(self, capsys):
        code, _, _ = run(["search", "--n", "30"], capsys)
        assert code == 2

    def test_report_text(self, capsys):
        code, out, _ = run(["report", "--trials", "20"], capsys)
        assert code == 0
        assert "15/15 claims pass" in out
        assert "G(1/4)" in out or "G_quarter" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "signsum", "bounds", "--eval", "G", "0.25"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip().startswith("0.4276")

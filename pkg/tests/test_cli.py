import subprocess
import sys

import pytest

from fwerkit.cli import build_parser, main
from fwerkit.replication import fixture_path


def fixture(name):
    return str(fixture_path(name))


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err
    return _run


def run_exit(run, *argv):
    try:
        return run(*argv)
    except SystemExit as exc:
        return exc.code, "", ""


class TestAdjust:
    def test_table2_holm_pretty(self, run):
        code, out, err = run("adjust", "--method", "holm", "--alpha", "0.10",
                             "--input", fixture("piso_firme_table2.csv"), "--format", "pretty")
        assert code == 0 and err == ""
        flagged = {line.split()[0] for line in out.splitlines()[2:] if line.rstrip().endswith("*")}
        assert flagged == {"anemia", "macarthur"}
        published = {"parasite_count": 0.186, "diarrhea": 0.186, "anemia": 0.015, "macarthur": 0.007,
                     "peabody": 0.153, "height_for_age": 1.0, "weight_for_height": 1.0}
        for line in out.splitlines()[2:]:
            cells = line.split()
            assert abs(float(cells[2]) - published[cells[0]]) <= 0.010

    def test_empty_input(self, run, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("hypothesis_id,p_value\n")
        code, out, _ = run("adjust", "--method", "holm", "--input", str(path))
        assert code == 0
        assert out == "hypothesis_id,p_raw,p_adjusted,rank,rejected,method,alpha\n"

    def test_bad_input_reports_line(self, run, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("hypothesis_id,p_value\na,0.1\nb,1.7\n")
        code, out, err = run("adjust", "--input", str(path))
        assert code == 1 and out == ""
        assert "bad.csv" in err and "line 3" in err and "p_value" in err

    def test_output_file(self, run, tmp_path):
        target = tmp_path / "out.csv"
        code, out, _ = run("adjust", "--method", "sidak-holm", "--input", fixture("piso_firme_table1.csv"),
                           "--output", str(target))
        assert code == 0 and out == ""
        assert target.read_text().count("0.000") >= 10


class TestFallbackAndGate:
    def test_table3_decisions(self, run):
        code, out, _ = run("fallback", "--plan", fixture("table3_fallback.plan"),
                           "--input", fixture("piso_firme_table2_extended.csv"))
        assert code == 0
        decisions = [line.split(",")[5] for line in out.splitlines()[1:]]
        assert decisions == ["Reject"] * 10 + ["No Reject"] * 2

    def test_weights_from_csv(self, run):
        code, out, _ = run("fallback", "--alpha", "0.10", "--input", fixture("piso_firme_table2_extended.csv"))
        assert code == 0 and out.count(",Reject,") == 10

    def test_alpha_conflict(self, run):
        code, _, err = run("fallback", "--alpha", "0.05", "--plan", fixture("table3_fallback.plan"),
                           "--input", fixture("piso_firme_table2_extended.csv"))
        assert code == 1 and "conflicts" in err

    def test_gatekeep_table4(self, run):
        code, out, _ = run("gatekeep", "--plan", fixture("table4_gate.plan"),
                           "--input", fixture("piso_firme_table2_extended.csv"))
        assert code == 0 and out.count(",rejected,") == 10

    def test_invalid_plan(self, run, tmp_path):
        path = tmp_path / "bad.plan"
        path.write_text('{"alpha": 0.1, "steps": [{"id": "anemia", "weight": 0.6}, {"id": "diarrhea", "weight": 0.6}]}')
        code, out, err = run("fallback", "--plan", str(path), "--input", fixture("piso_firme_table2.csv"))
        assert code == 1 and out == "" and "weight sum" in err and "bad.plan" in err


class TestRandomized:
    def test_wy_prints_seed_and_is_repeatable(self, run):
        args = ("wy", "--input", fixture("datamatrix.csv"), "--B", "999", "--seed", "11")
        code, out1, err = run(*args)
        assert code == 0 and "seed: 11" in err
        assert run(*args)[1] == out1
        assert run(*args, "--jobs", "3")[1] == out1

    def test_seed_from_environment(self, run, monkeypatch):
        monkeypatch.setenv("FWERKIT_SEED", "11")
        code, out, err = run("wy", "--input", fixture("datamatrix.csv"), "--B", "999")
        assert "seed: 11" in err
        assert out == run("wy", "--input", fixture("datamatrix.csv"), "--B", "999", "--seed", "11")[1]

    def test_default_seed(self, run, monkeypatch):
        monkeypatch.delenv("FWERKIT_SEED", raising=False)
        assert "seed: 0" in run("wy", "--input", fixture("datamatrix.csv"), "--B", "99")[2]

    def test_bad_env_seed(self, run, monkeypatch):
        monkeypatch.setenv("FWERKIT_SEED", "banana")
        assert run("simulate", "--m", "3", "--reps", "100")[0] == 1

    def test_simulate_paired(self, run):
        args = ("simulate", "--effects", "2.8,2.8,0,0", "--reps", "500", "--procedure", "bonferroni,fallback")
        code, out, err = run(*args)
        assert code == 0 and "seed: 0" in err
        rows = [line.split(",") for line in out.splitlines()]
        assert [r[0] for r in rows[1:]] == ["bonferroni", "fallback"]
        assert run(*args)[1] == out

    def test_simulate_with_plan(self, run):
        code, out, _ = run("simulate", "--m", "12", "--reps", "200", "--procedure", "fallback",
                           "--plan", fixture("table3_fallback.plan"))
        assert code == 0

    def test_simulate_plan_size_mismatch(self, run):
        code, _, err = run("simulate", "--m", "3", "--reps", "200", "--procedure", "gatekeeping",
                           "--plan", fixture("table4_gate.plan"))
        assert code == 1 and "hypotheses" in err

    def test_simulate_bad_procedure(self, run):
        assert run("simulate", "--m", "3", "--reps", "200", "--procedure", "magic")[0] == 1


class TestReplicate:
    def test_table3(self, run):
        code, out, _ = run("replicate", "--table", "3", "--model", "3")
        assert code == 0 and "MISMATCH" not in out and "tolerance" in out

    def test_table3a_model1(self, run):
        out = run("replicate", "--table", "3A", "--model", "1")[1]
        peabody = [line for line in out.splitlines() if "Peabody" in line and "(5) H0" in line]
        assert peabody and "No Reject" in peabody[0] and "match" in peabody[0]

    def test_table4_caveat(self, run):
        out = run("replicate", "--table", "4", "--model", "3")[1]
        assert "misaligned" in out and "not recomputable" in out
        assert "rejections" in out and "10" in out


class TestParserBehaviour:
    def test_unknown_subcommand(self, run):
        assert run_exit(run, "frobnicate")[0] == 1

    def test_unknown_flag(self, run):
        assert run_exit(run, "adjust", "--input", "x.csv", "--bogus")[0] == 1

    def test_missing_file(self, run):
        code, _, err = run("adjust", "--input", "/nonexistent/p.csv")
        assert code == 1 and "No such file" in err

    def test_bad_table(self, run):
        assert run_exit(run, "replicate", "--table", "9")[0] == 1

    @pytest.mark.parametrize("sub, flags", [
        ("adjust", ["--method", "--alpha", "--input", "--output", "--format"]),
        ("fallback", ["--plan", "--input", "--alpha", "--output", "--format"]),
        ("gatekeep", ["--plan", "--input", "--data", "--seed", "--B"]),
        ("wy", ["--B", "--scheme", "--statistic", "--seed", "--input", "--alpha", "--format"]),
        ("simulate", ["--reps", "--rho", "--effects", "--procedure", "--seed", "--alpha", "--plan"]),
        ("replicate", ["--table", "--model", "--output"]),
    ])
    def test_help_documents_flags(self, sub, flags):
        text = build_parser()._subparsers._group_actions[0].choices[sub].format_help()
        for flag in flags:
            assert flag in text

    def test_internal_fault_exit_code(self, run, monkeypatch):
        import fwerkit.cli as cli

        def boom(args):
            raise RuntimeError("boom")

        monkeypatch.setitem(cli.COMMANDS, "replicate", boom)
        code, _, err = run("replicate", "--table", "1")
        assert code == 2 and "internal error" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "fwerkit", "replicate", "--table", "1"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "match" in proc.stdout

import importlib.resources as resources

import pytest
from click.testing import CliRunner

from pneumos import fsmc
from pneumos.cli import main
from pneumos.pla import empty_pattern, encode_membrane


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def fsm_path(tmp_path):
    def write(name):
        text = (resources.files("pneumos") / f"programs/{name}.fsm").read_text()
        path = tmp_path / f"{name}.fsm"
        path.write_text(text)
        return str(path)
    return write


@pytest.fixture
def membrane_path(tmp_path, fsm_path, runner):
    def build(name):
        out = tmp_path / f"{name}.mem"
        result = runner.invoke(main, ["compile", fsm_path(name), "-o", str(out)])
        assert result.exit_code == 0, result.output
        return str(out)
    return build


class TestCompile:
    def test_membrane_matches_library(self, runner, fsm_path):
        result = runner.invoke(main, ["compile", fsm_path("counter_reset")])
        assert result.exit_code == 0
        source = (resources.files("pneumos") / "programs/counter_reset.fsm").read_text()
        assert result.output == fsmc.compile_program(source).membrane

    def test_table_and_sop_flags(self, runner, fsm_path, tmp_path):
        out = tmp_path / "m.mem"
        result = runner.invoke(main, ["compile", fsm_path("counter_reset"),
                                      "--table", "--sop", "-o", str(out)])
        assert result.exit_code == 0
        assert "S1 S0 A | N1 N0" in result.output
        assert "N0 = S0n*A" in result.output
        assert out.read_text().startswith("MEMBRANE v1")

    def test_malformed_dsl_exit_2(self, runner, tmp_path):
        bad = tmp_path / "bad.fsm"
        bad.write_text("fsm x\nbits 7\n")
        result = runner.invoke(main, ["compile", str(bad)])
        assert result.exit_code == 2

    def test_capacity_exit_3(self, runner, tmp_path):
        five = tmp_path / "five.fsm"
        five.write_text(
            "fsm parity\nbits 2\ninput A\ninitial 00\n"
            "from 00: A=0 -> 01 ; A=1 -> 10\n"
            "from 01: A=0 -> 10 ; A=1 -> 00\n"
            "from 10: A=0 -> 10 ; A=1 -> 00\n"
            "from 11: A=0 -> 00 ; A=1 -> 10\n")
        result = runner.invoke(main, ["compile", str(five)])
        assert result.exit_code == 3

    def test_missing_file_exit_2(self, runner):
        result = runner.invoke(main, ["compile", "no_such.fsm"])
        assert result.exit_code == 2


class TestTruthtable:
    def test_legal_membrane_identical_columns(self, runner, membrane_path):
        result = runner.invoke(main, ["truthtable", "--membrane",
                                      membrane_path("phase_toggle")])
        assert result.exit_code == 0
        assert "MISMATCH" not in result.output
        assert len(result.output.strip().splitlines()) == 9

    def test_fault_injection_exit_1(self, runner, membrane_path):
        result = runner.invoke(main, ["truthtable", "--membrane",
                                      membrane_path("phase_toggle"), "--tamper"])
        assert result.exit_code == 1
        assert "MISMATCH" in result.output

    def test_empty_membrane_all_zero(self, runner, tmp_path):
        path = tmp_path / "empty.mem"
        path.write_text(encode_membrane(empty_pattern()))
        result = runner.invoke(main, ["truthtable", "--membrane", str(path)])
        assert result.exit_code == 0
        for line in result.output.strip().splitlines()[1:]:
            outputs = line.split("|")[1].split()
            assert outputs == ["0", "0"]


class TestSimulate:
    def test_chip_from_membrane(self, runner, membrane_path, tmp_path):
        vcd = tmp_path / "out.vcd"
        result = runner.invoke(main, [
            "simulate", "--membrane", membrane_path("phase_toggle"),
            "--clock", "clk period=16 phase=10", "--t-end", "90",
            "--vcd", str(vcd)])
        assert result.exit_code == 0, result.output
        assert result.output.splitlines()[0] == "time\tsignal\tlevel"
        assert "q1" in result.output
        assert vcd.read_text().startswith("$version")

    def test_missing_membrane_exit_2(self, runner):
        result = runner.invoke(main, ["simulate", "--membrane", "none.mem"])
        assert result.exit_code == 2

    def test_both_or_neither_sources_exit_2(self, runner):
        assert runner.invoke(main, ["simulate"]).exit_code == 2

    def test_unstable_dt_exit_2(self, runner, membrane_path):
        result = runner.invoke(main, [
            "simulate", "--membrane", membrane_path("phase_toggle"),
            "--dt", "0.01", "--t-end", "1"])
        assert result.exit_code == 2
        assert "dt" in result.output


class TestDemo:
    def test_dilution_prints_series(self, runner):
        result = runner.invoke(main, ["demo", "dilution"])
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[0] == "rung\tconcentration"
        concs = [float(line.split("\t")[1]) for line in lines[1:]]
        assert concs == pytest.approx([1.0, 0.5, 0.25, 0.125, 0.0625], rel=0.01)

    def test_mixer_script(self, runner, tmp_path):
        script = tmp_path / "presses.tsv"
        script.write_text("time\taction\n40\tpress\n46\trelease\n")
        history = tmp_path / "history.tsv"
        result = runner.invoke(main, ["demo", "mixer", "--script", str(script),
                                      "--t-end", "60",
                                      "--history", str(history)])
        assert result.exit_code == 0
        assert result.output.splitlines()[0] == "source\tfraction"
        assert history.read_text().startswith("cycle\tcompartment")

    def test_mixer_without_script_exit_2(self, runner):
        assert runner.invoke(main, ["demo", "mixer"]).exit_code == 2

    def test_unknown_demo_exit_2(self, runner):
        assert runner.invoke(main, ["demo", "sorting"]).exit_code == 2


class TestConfig:
    def test_config_file_overrides(self, runner, tmp_path, membrane_path):
        cfg = tmp_path / "params.cfg"
        cfg.write_text("g_open = 50.0\n")
        result = runner.invoke(main, ["--config", str(cfg), "truthtable",
                                      "--membrane", membrane_path("phase_toggle")])
        assert result.exit_code == 0

    def test_bad_config_key_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "params.cfg"
        cfg.write_text("warp_factor = 9\n")
        result = runner.invoke(main, ["--config", str(cfg), "demo", "dilution"])
        assert result.exit_code == 2

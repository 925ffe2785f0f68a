import json
from pathlib import Path

import pytest

from jndq.cli import main

FIXTURES = Path(__file__).parent / "data"


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sources_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-sources")
    assert (
        run_cli(
            "gen-sources", "--out", out, "--n", "4", "--seed", "3", "--duration", "0.4"
        )
        == 0
    )
    return out


class TestGenSources:
    def test_creates_requested_files(self, sources_dir):
        wavs = sorted(sources_dir.glob("*.wav"))
        assert len(wavs) == 4
        manifest = json.loads((sources_dir / "run_manifest.json").read_text())
        assert manifest["command"] == "gen-sources"
        assert len(manifest["outputs"]) == 4

    def test_rejects_zero_sources(self, tmp_path):
        assert run_cli("gen-sources", "--out", tmp_path / "s", "--n", "0") == 3


class TestGenStimuli:
    def test_four_sources_times_sixteen_levels(self, sources_dir, tmp_path):
        out = tmp_path / "set"
        code = run_cli(
            "gen-stimuli", "--sources", sources_dir, "--out", out, "--seed", "11"
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["stimuli"]) == 64
        assert manifest["levels_db"] == list(range(35, 51))
        assert len(list((out / "stimuli").glob("*.wav"))) == 64

    def test_empty_sources_dir_is_data_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli("gen-stimuli", "--sources", empty, "--out", tmp_path / "o") == 3

    def test_rerun_same_seed_identical_hashes(self, sources_dir, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert (
                run_cli(
                    "gen-stimuli",
                    "--sources",
                    sources_dir,
                    "--out",
                    out,
                    "--seed",
                    "11",
                    "--levels",
                    "40,45,50",
                )
                == 0
            )
        manifest_a = (out_a / "run_manifest.json").read_text()
        manifest_b = (out_b / "run_manifest.json").read_text()
        assert manifest_a == manifest_b


class TestSimulate:
    def _scenario(self, tmp_path, **overrides):
        scenario = {
            "seed": 5,
            "listeners": [{"name": "silent", "preset": "silent-headphone"}],
            "staircase": {"n_runs": 120},
            "screening": {"n_runs": 300, "levels_db": [10, 8], "acceptance_k": [1, 3]},
        }
        scenario.update(overrides)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(scenario))
        return path

    def test_preset_listener_converges_near_midpoint(self, tmp_path):
        path = self._scenario(tmp_path)
        out = tmp_path / "sim"
        assert run_cli("simulate", "--scenario", path, "--out", out) == 0
        summary = json.loads((out / "summary.json").read_text())
        entry = summary["listeners"]["silent"]
        # oracle: the bisection convergence point for the preset
        assert abs(entry["staircase"]["mean_jnd_db"] - entry["convergence_point_db"]) <= 1.0
        assert abs(entry["convergence_point_db"] - 9.9) < 0.6
        assert (out / "staircase_runs.csv").exists()
        assert (out / "screening_pass_rates.csv").exists()

    def test_zero_runs_is_data_error(self, tmp_path):
        path = self._scenario(tmp_path, staircase={"n_runs": 0})
        assert run_cli("simulate", "--scenario", path, "--out", tmp_path / "x") == 3

    def test_identical_seeds_identical_summaries(self, tmp_path):
        path = self._scenario(tmp_path, staircase={"n_runs": 40})
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run_cli("simulate", "--scenario", path, "--out", out) == 0
        assert (out_a / "summary.json").read_text() == (out_b / "summary.json").read_text()

    def test_missing_scenario_file(self, tmp_path):
        assert run_cli("simulate", "--scenario", tmp_path / "no.json") == 3


class TestRunCommands:
    def test_run_staircase_simulated(self, tmp_path, capsys):
        out = tmp_path / "session.json"
        code = run_cli(
            "run-staircase", "--simulate", "--mu", "10", "--seed", "4", "--out", out
        )
        assert code == 0
        document = json.loads(out.read_text())
        assert document["session"]["complete"] is True
        assert document["result"]["valid"] in (True, False)

    def test_run_screening_simulated_preset(self, tmp_path):
        out = tmp_path / "screen.json"
        code = run_cli(
            "run-screening",
            "--simulate",
            "--preset",
            "silent-headphone",
            "--level",
            "10",
            "--seed",
            "2",
            "--out",
            out,
        )
        assert code == 0
        document = json.loads(out.read_text())
        assert document["verdict"] in ("pass", "fail")
        assert len(document["session"]["trials"]) == 4

    def test_simulate_requires_listener_params(self):
        assert run_cli("run-staircase", "--simulate") == 3

    def test_bad_level_is_data_error(self):
        assert run_cli("run-screening", "--simulate", "--mu", "9", "--level", "30") == 3


class TestAnalyze:
    def test_fixture_produces_report_files(self, tmp_path):
        out = tmp_path / "analysis"
        code = run_cli(
            "analyze",
            "--ratings",
            FIXTURES / "ratings_fixture.csv",
            "--lab-mos",
            FIXTURES / "lab_mos_fixture.csv",
            "--out",
            out,
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert {c["jnd_level_db"] for c in report["comparisons"]} == {10, 8, 6}
        assert {c["acceptance_k"] for c in report["comparisons"]} <= {1, 2, 3}
        table = (out / "report.txt").read_text()
        assert "PCC" in table and "RMSE" in table
        rates = report["pass_rates"]["percentages"]
        # survival structure: non-increasing in k for every level
        for level in (10, 8, 6):
            row = [rates[f"{level}/{k}"] for k in (1, 2, 3, 4)]
            assert row == sorted(row, reverse=True)
        assert (out / "per_condition_mos.csv").exists()
        assert (out / "pass_rates.txt").exists()

    def test_deterministic_report(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                run_cli(
                    "analyze",
                    "--ratings",
                    FIXTURES / "ratings_fixture.csv",
                    "--lab-mos",
                    FIXTURES / "lab_mos_fixture.csv",
                    "--out",
                    out,
                )
                == 0
            )
            outs.append((out / "report.json").read_text())
        assert outs[0] == outs[1]

    def test_missing_column_is_named_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("worker_id,score\nw1,4\n")
        code = run_cli(
            "analyze",
            "--ratings",
            bad,
            "--lab-mos",
            FIXTURES / "lab_mos_fixture.csv",
            "--out",
            tmp_path / "o",
        )
        assert code == 3
        assert "missing columns" in capsys.readouterr().err

    def test_empty_ratings_is_data_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        header = (FIXTURES / "ratings_fixture.csv").read_text().splitlines()[0]
        empty.write_text(header + "\n")
        code = run_cli(
            "analyze",
            "--ratings",
            empty,
            "--lab-mos",
            FIXTURES / "lab_mos_fixture.csv",
            "--out",
            tmp_path / "o",
        )
        assert code == 3

    def test_missing_file_is_data_error(self, tmp_path):
        code = run_cli(
            "analyze",
            "--ratings",
            tmp_path / "none.csv",
            "--lab-mos",
            FIXTURES / "lab_mos_fixture.csv",
            "--out",
            tmp_path / "o",
        )
        assert code == 3


class TestServeValidation:
    def test_missing_manifest_is_data_error(self, tmp_path):
        code = run_cli(
            "serve", "--manifest", tmp_path / "none.json", "--data", tmp_path / "d"
        )
        assert code == 3


class TestDataRootEnv:
    def test_env_var_supplies_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("JNDQ_DATA_ROOT", str(tmp_path / "root"))
        assert run_cli("gen-sources", "--n", "1", "--duration", "0.2") == 0
        assert (tmp_path / "root" / "sources" / "voice01.wav").exists()

    def test_no_env_no_out_is_data_error(self, monkeypatch):
        monkeypatch.delenv("JNDQ_DATA_ROOT", raising=False)
        assert run_cli("gen-sources", "--n", "1", "--duration", "0.2") == 3

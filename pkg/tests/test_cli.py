"""Tests for the coded-gossip command line."""

import json

import pytest
from click.testing import CliRunner

from coded_gossip import __version__
from coded_gossip.cli import _load_config_file, main
from coded_gossip.render import read_csv_rows

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _make_runner():
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


# Small enough to run in well under a second per command
SMALL = [
    "model.n=4",
    "flood.trials=40",
    "flood.max_starts=2",
    "flood.max_rounds=200",
    "experiment.trials=5",
    "experiment.max_rounds=200",
    "coding.l=8",
    "coding.s=4",
    "field.m=4",
]


def _invoke(tmp_path, *args, sets=(), small=True):
    options = []
    for item in (SMALL if small else []) + [f"output_dir={tmp_path}"] + list(sets):
        options += ["--set", item]
    return _make_runner().invoke(main, options + list(args))


def _json(path):
    return json.loads(path.read_text())


class FakeCtx:
    def __init__(self):
        self.meta = {}


# ---------------------------------------------------------------------------
# Group options
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestGroup:
    def test_version(self):
        result = _make_runner().invoke(main, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_help_lists_commands(self):
        result = _make_runner().invoke(main, ["--help"])
        assert result.exit_code == 0
        for name in ("flood-estimate", "gossip-run", "capacity-scan", "lemma4-verify", "sweep"):
            assert name in result.output

    def test_schema_flag(self):
        result = _make_runner().invoke(main, ["--schema"])
        assert result.exit_code == 0
        assert result.stdout.startswith("# Default configuration")
        assert "decode_times.csv:" in result.stdout

    def test_schema_command(self):
        result = _make_runner().invoke(main, ["schema"])
        assert result.exit_code == 0
        assert "# CSV columns" in result.stdout


@pytest.mark.unit
class TestLoadConfigFileCallback:
    def test_none_value_returns_early(self):
        ctx = FakeCtx()
        assert _load_config_file(ctx, None, None) is None
        assert ctx.meta == {}

    def test_loads_valid_yaml(self, tmp_path):
        cfg = tmp_path / "config.yaml"
        cfg.write_text("seed: 4\nmodel:\n  n: 5\n")
        ctx = FakeCtx()
        _load_config_file(ctx, None, str(cfg))
        assert ctx.meta["config_file"] == {"seed": 4, "model": {"n": 5}}

    def test_file_not_found_raises_bad_parameter(self):
        from click import BadParameter

        with pytest.raises(BadParameter, match="not found"):
            _load_config_file(FakeCtx(), None, "/nonexistent/config.yaml")

    def test_invalid_yaml_raises_bad_parameter(self, tmp_path):
        from click import BadParameter

        cfg = tmp_path / "bad.yaml"
        cfg.write_text("seed: [\ninvalid yaml")
        with pytest.raises(BadParameter, match="Invalid YAML"):
            _load_config_file(FakeCtx(), None, str(cfg))


@pytest.mark.unit
class TestConfigErrors:
    def test_unknown_set_key(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", sets=["coding.blocks=3"])
        assert result.exit_code == 2
        assert "Unknown config key: coding.blocks" in result.stderr

    def test_set_without_value(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", sets=["seed"])
        assert result.exit_code == 2
        assert "key.path=value" in result.stderr

    def test_missing_config_file(self, tmp_path):
        result = _make_runner().invoke(
            main, ["--config-file", str(tmp_path / "none.yaml"), "gossip-run"]
        )
        assert result.exit_code == 2

    def test_config_file_values_apply(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(
            f"output_dir: {tmp_path / 'out'}\n"
            "lemma4:\n  q_values: [2]\n  ambient: [2]\n  h: [1]\n"
        )
        result = _make_runner().invoke(main, ["--config-file", str(cfg), "lemma4-verify"])
        assert result.exit_code == 0
        assert (tmp_path / "out" / "lemma4.csv").exists()

    def test_set_overrides_config_file(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("lemma4:\n  q_values: [2]\n  ambient: [2]\n  h: [1]\n  strict: true\n")
        result = _make_runner().invoke(
            main,
            [
                "--config-file", str(cfg),
                "--set", f"output_dir={tmp_path}",
                "--set", "lemma4.strict=false",
                "lemma4-verify",
            ],
        )
        assert result.exit_code == 0

    def test_bad_field_order(self, tmp_path):
        result = _invoke(tmp_path, "flood-estimate", "--q", "6")
        assert result.exit_code == 2
        assert "prime power" in result.stderr


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


@pytest.mark.integration
class TestFloodEstimate:
    def test_writes_tail_and_params(self, tmp_path):
        result = _invoke(tmp_path, "-f", "json", "flood-estimate", "--q", "4")
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data["q"] == 4
        assert data["T"] >= 1
        assert data["alpha"] > 0

        params = _json(tmp_path / "flood_params.json")
        assert params["_meta"]["seed"] == 1
        assert params["T"] == data["T"]
        rows = read_csv_rows(tmp_path / "flood_tail.csv")
        assert rows[0][0] == "0"
        assert float(rows[0][3]) == 1.0

    def test_header_line(self, tmp_path):
        _invoke(tmp_path, "flood-estimate")
        first = (tmp_path / "flood_tail.csv").read_text().splitlines()[0]
        assert first.startswith("# config_hash=")
        assert first.endswith(" seed=1")

    def test_held_out_check(self, tmp_path):
        result = _invoke(tmp_path, "flood-estimate", sets=["flood.check_trials=40"])
        assert result.exit_code == 0, result.output
        params = _json(tmp_path / "flood_params.json")
        assert "held_out_passed" in params
        assert params["held_out_violations"] >= 0

    def test_verbose_progress_on_stderr(self, tmp_path):
        result = _invoke(tmp_path, "-v", "flood-estimate")
        assert result.exit_code == 0
        assert "Estimating flooding parameters" in result.stderr
        assert "Wrote" in result.stderr

    def test_few_trials_warn(self, tmp_path):
        result = _invoke(tmp_path, "flood-estimate")
        assert result.exit_code == 0
        assert "Warning: flood.trials=40 is below 1000" in result.stderr
        assert _json(tmp_path / "flood_params.json")["below_min_trials"] is True

    def test_enough_trials_do_not_warn(self, tmp_path, mocker):
        mocker.patch("coded_gossip.flooding.MIN_FLOOD_TRIALS", 40)
        result = _invoke(tmp_path, "flood-estimate")
        assert result.exit_code == 0
        assert "is below" not in result.stderr
        assert _json(tmp_path / "flood_params.json")["below_min_trials"] is False

    def test_floods_that_never_finish_exit_3(self, tmp_path):
        sets = ["model.type=static", "model.graph=[]"]
        result = _invoke(tmp_path, "flood-estimate", sets=sets)
        assert result.exit_code == 3
        assert "Error: No flood from node" in result.stderr


@pytest.mark.integration
class TestGossipRun:
    def test_decode_times(self, tmp_path):
        result = _invoke(tmp_path, "-f", "json", "gossip-run")
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "decode_times.csv").read_text().splitlines()
        assert lines[1] == "trial,stop_time,node_0,node_1,node_2,node_3"
        rows = read_csv_rows(tmp_path / "decode_times.csv")
        assert len(rows) == 5
        assert all(row[2] == "0" for row in rows)

        summary = _json(tmp_path / "summary.json")
        assert summary["trials"] == 5
        assert summary["blocks"] == 3
        assert summary["bound"] is None

    def test_given_flood_parameters_set_bound(self, tmp_path):
        result = _invoke(
            tmp_path,
            "gossip-run",
            sets=["experiment.bound=spreading", "experiment.T=3", "experiment.alpha=1.0"],
        )
        assert result.exit_code == 0, result.output
        summary = _json(tmp_path / "summary.json")
        # 3 + (3 + log_16 10) / 1
        assert summary["bound"] == pytest.approx(6.830482, abs=1e-5)
        assert summary["flood"] == {"T": 3, "alpha": 1.0}
        assert 0.0 <= summary["exceed_fraction"] <= 1.0

    def test_estimated_flood_parameters(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", sets=["experiment.bound=joint"])
        assert result.exit_code == 0, result.output
        summary = _json(tmp_path / "summary.json")
        assert summary["bound"] > summary["flood"]["T"]

    def test_same_seed_same_output(self, tmp_path):
        _invoke(tmp_path / "a", "gossip-run")
        _invoke(tmp_path / "b", "gossip-run")
        assert read_csv_rows(tmp_path / "a" / "decode_times.csv") == read_csv_rows(
            tmp_path / "b" / "decode_times.csv"
        )

    def test_trials_option(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", "--trials", "2")
        assert result.exit_code == 0
        assert len(read_csv_rows(tmp_path / "decode_times.csv")) == 2

    def test_invalid_experiment(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", sets=["experiment.stop_rule=some"])
        assert result.exit_code == 2
        assert "stop_rule" in result.stderr

    def test_capacity_driven_bound(self, tmp_path):
        sets = [
            "experiment.bound=theorem5",
            "experiment.T=3",
            "experiment.alpha=1.0",
            "capacity.demands=[1]",
            "capacity.delta_inner=0.1",
        ]
        result = _invoke(tmp_path, "gossip-run", sets=sets)
        assert result.exit_code == 0, result.output
        summary = _json(tmp_path / "summary.json")
        # 3 + (ceil(2 * 1 + 0.1) + log_16 20 + 0.1) / 1
        assert summary["bound"] == pytest.approx(7.180482, abs=1e-5)

    def test_capacity_below_entropy_is_rejected(self, tmp_path):
        sets = [
            "experiment.bound=theorem5",
            "experiment.T=3",
            "experiment.alpha=1.0",
            "capacity.demands=[0.5]",
        ]
        result = _invoke(tmp_path, "gossip-run", sets=sets)
        assert result.exit_code == 2
        assert "not sufficient" in result.stderr

    def test_unknown_bound(self, tmp_path):
        result = _invoke(tmp_path, "gossip-run", sets=["experiment.bound=loose"])
        assert result.exit_code == 2
        assert "Unknown bound: loose" in result.stderr

    def test_every_trial_timing_out_exits_3(self, tmp_path):
        # one packet per round cannot give a relay rank 3 within two rounds
        result = _invoke(tmp_path, "gossip-run", sets=["experiment.max_rounds=2"])
        assert result.exit_code == 3
        assert "Error: All 5 trials hit max_rounds=2" in result.stderr
        summary = _json(tmp_path / "summary.json")
        assert summary["timeouts"] == 5
        assert len(read_csv_rows(tmp_path / "decode_times.csv")) == 5


@pytest.mark.integration
class TestCapacityScan:
    SETS = [
        "model.type=static",
        "model.n=3",
        "model.graph=path",
        "model.directed=true",
        "capacity.sources=[0]",
        "capacity.demands=[2]",
        "capacity.trials=3",
    ]

    def test_directed_path(self, tmp_path):
        result = _invoke(tmp_path, "-f", "json", "capacity-scan", sets=self.SETS, small=False)
        assert result.exit_code == 0, result.output
        rows = read_csv_rows(tmp_path / "feasible_times.csv")
        assert [row[1] for row in rows] == ["3", "3", "3"]
        data = json.loads(result.stdout)
        assert data["median"] == 3.0
        assert data["timeouts"] == 0

    def test_dump_paths(self, tmp_path):
        sets = self.SETS + ["capacity.dump_paths=true"]
        result = _invoke(tmp_path, "capacity-scan", sets=sets, small=False)
        assert result.exit_code == 0
        text = (tmp_path / "paths.txt").read_text()
        assert "# trial 0" in text
        assert "path 1: 0@0 1@1 2@2 2@3" in text
        assert "path 1: 0@0 0@1 1@2 2@3" in text

    def test_every_trial_timing_out_exits_3(self, tmp_path):
        sets = self.SETS + ["capacity.max_rounds=2"]
        result = _invoke(tmp_path, "capacity-scan", sets=sets, small=False)
        assert result.exit_code == 3
        assert "Error: No trial was feasible within 2 rounds" in result.stderr
        assert _json(tmp_path / "capacity_summary.json")["timeouts"] == 3
        rows = read_csv_rows(tmp_path / "feasible_times.csv")
        assert all(row[1] == "" for row in rows)


@pytest.mark.integration
class TestLemma4Verify:
    SETS = ["lemma4.q_values=[2]", "lemma4.ambient=[2]", "lemma4.h=[1]"]

    def test_verified(self, tmp_path):
        result = _invoke(tmp_path, "lemma4-verify", sets=self.SETS)
        assert result.exit_code == 0
        assert read_csv_rows(tmp_path / "lemma4.csv") == [["2", "2", "1", "3", "4", "true"]]

    def test_strict_fails(self, tmp_path):
        result = _invoke(tmp_path, "-f", "json", "lemma4-verify", "--strict", sets=self.SETS)
        assert result.exit_code == 1
        checks = json.loads(result.stdout)["checks"]
        assert checks == [
            {"q": 2, "ambient": 2, "h": 1, "witnesses": 2, "subspaces": 3, "verified": False}
        ]

    def test_out_of_range_h_is_skipped(self, tmp_path):
        sets = ["lemma4.q_values=[3]", "lemma4.ambient=[2]", "lemma4.h=[0, 2]"]
        result = _invoke(tmp_path, "lemma4-verify", sets=sets)
        assert result.exit_code == 0
        assert len(read_csv_rows(tmp_path / "lemma4.csv")) == 1


@pytest.mark.integration
class TestOracleCurve:
    def test_without_side_information(self, tmp_path):
        result = _invoke(
            tmp_path,
            "-f", "json",
            "oracle-curve",
            sets=["oracle.l=6", "oracle.trials=10", "coding.s=10", "field.m=1"],
        )
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        # ceil(6 * 1.1) = 7 symbols fit one 10-bit block
        assert sorted(data) == ["rate_0", "rate_1"]
        assert data["rate_0"] == 1.0
        assert len(read_csv_rows(tmp_path / "oracle_curve.csv")) == 2

    def test_message_out_of_range(self, tmp_path):
        result = _invoke(tmp_path, "oracle-curve", sets=["oracle.message=3"])
        assert result.exit_code == 2
        assert "oracle.message" in result.stderr


@pytest.mark.integration
class TestSweep:
    def test_flood_sweep(self, tmp_path):
        result = _invoke(
            tmp_path,
            "sweep",
            "--key", "model.n",
            "--values", "[3, 4]",
            "--command", "flood-estimate",
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "model.n=3" / "flood_params.json").exists()
        assert (tmp_path / "model.n=4" / "flood_params.json").exists()
        data = _json(tmp_path / "sweep_summary.json")
        assert [p["value"] for p in data["points"]] == [3, 4]
        assert data["command"] == "flood-estimate"

    def test_unknown_key(self, tmp_path):
        result = _invoke(tmp_path, "sweep", "--key", "model.size", "--values", "[1]")
        assert result.exit_code == 2
        assert "Unknown config key" in result.stderr

    def test_empty_values(self, tmp_path):
        result = _invoke(tmp_path, "sweep", "--values", "[]")
        assert result.exit_code == 2
        assert "nonempty list" in result.stderr

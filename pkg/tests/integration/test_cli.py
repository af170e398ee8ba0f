"""
Integration tests for the infoloss command line
"""
import csv
import io
import json
import math

import pytest

from infoloss.cli.main import build_parser, main
from infoloss.core.reference import sqlin_loss_bits

SQLIN = {
    "function": {"kind": "catalog", "name": "sqlin"},
    "density": {"kind": "uniform", "a": 1},
}
MAGNITUDE = {
    "function": {"kind": "catalog", "name": "magnitude"},
    "density": {"kind": "normal", "sigma": 1},
}


@pytest.fixture(autouse=True)
def keep_test_logging(mocker):
    """Leave pytest's log capture in place of the CLI's root handler"""
    mocker.patch("infoloss.cli.main.configure_logging")


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestParser:

    def test_subcommands(self):
        args = build_parser().parse_args(["sweep", "cfg.json", "--seed", "3", "--workers", "2"])
        assert (args.command, args.config, args.seed, args.workers) == ("sweep", "cfg.json", 3, 2)

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["integrate", "cfg.json"])
        assert excinfo.value.code == 2


class TestLossCommand:

    def test_sqlin_reproduces_closed_form(self, write_config, tmp_path, capsys):
        config = write_config(SQLIN)
        report_path = tmp_path / "loss.json"
        csv_path = tmp_path / "loss.csv"
        code = main(["loss", config, "--json", str(report_path), "--csv", str(csv_path)])

        assert code == 0
        assert "0.922" in capsys.readouterr().out
        report = _read_json(report_path)
        assert report["command"] == "loss"
        direct, via_w = report["reports"]
        assert direct["method"] == "quadrature_X" and via_w["method"] == "quadrature_W"
        assert direct["loss_bits"] == pytest.approx(sqlin_loss_bits(1.0), abs=1e-3)
        assert report["reference_bits"] == pytest.approx(sqlin_loss_bits(1.0))
        assert report["route_gap_bits"] <= 1e-3
        assert [direct["bound1_bits"], direct["bound2_bits"], direct["bound3_bits"]] == pytest.approx([1.0] * 3, abs=1e-6)

        rows = _csv_rows(csv_path.read_text(encoding="utf-8"))
        assert [row["method"] for row in rows] == ["quadrature_X", "quadrature_W"]

    def test_tolerance_flag(self, write_config, tmp_path):
        report_path = tmp_path / "loss.json"
        code = main(["loss", write_config(MAGNITUDE), "--tol", "1e-7", "--json", str(report_path)])
        assert code == 0
        report = _read_json(report_path)
        assert report["config"]["quadrature"]["abs_tol"] == 1e-7
        assert report["reports"][0]["loss_bits"] == pytest.approx(1.0, abs=1e-7)
        assert report["tightness"]["bound3_tight"] is True

    def test_missing_config_exits_2(self, tmp_path, capsys):
        report_path = tmp_path / "error.json"
        code = main(["loss", str(tmp_path / "missing.json"), "--json", str(report_path)])
        assert code == 2
        assert "infoloss: error: Config file not found" in capsys.readouterr().err
        assert _read_json(report_path)["error"]["code"] == "CONFIG_ERROR"

    def test_invalid_config_exits_2(self, write_config):
        config = write_config({"function": {"kind": "catalog", "name": "tanh"}, "density": {"kind": "normal"}})
        assert main(["loss", config]) == 2

    def test_support_mismatch_exits_3(self, write_config):
        config = write_config({"function": {"kind": "catalog", "name": "cosine"}, "density": {"kind": "normal"}})
        assert main(["loss", config]) == 3

    def test_invalid_function_exits_3(self, write_config, tmp_path):
        config = write_config({
            "function": {"kind": "piecewise", "pieces": [
                {"coeffs": [1, 0], "domain": {"lo": 0, "hi": 1}},
                {"coeffs": [1, 0], "domain": {"lo": 1, "hi": 2}},
            ]},
            "density": {"kind": "uniform", "lo": 0, "hi": 2},
        })
        report_path = tmp_path / "error.json"
        assert main(["loss", config, "--json", str(report_path)]) == 3
        assert _read_json(report_path)["error"]["code"] == "FUNCTION_VALIDATION_FAILED"

    def test_non_convergence_exits_4(self, write_config, tmp_path, mocker):
        mocker.patch(
            "infoloss.core.loss_engine.integrate.quad",
            return_value=(0.25, 1.0, {"neval": 21}, "The maximum number of subdivisions has been achieved."),
        )
        report_path = tmp_path / "loss.json"
        code = main(["loss", write_config(SQLIN), "--json", str(report_path)])
        assert code == 4
        report = _read_json(report_path)
        assert report["reports"][0]["converged"] is False

    def test_metrics_flag(self, write_config, capsys):
        assert main(["loss", write_config(MAGNITUDE), "--metrics"]) == 0
        err = capsys.readouterr().err
        assert 'operation_duration_seconds_count{operation="info_loss"}' in err
        assert "quadrature_panels_total" in err


class TestMcCommand:

    def test_seeded_run_is_reproducible(self, write_config, tmp_path):
        config = write_config({**MAGNITUDE, "mc": {"n_samples": 10000}})
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["mc", config, "--seed", "7", "--json", str(first)]) == 0
        assert main(["mc", config, "--seed", "7", "--workers", "3", "--json", str(second)]) == 0
        a, b = _read_json(first), _read_json(second)
        assert a["reports"][0]["loss_bits"] == b["reports"][0]["loss_bits"]
        assert a["reports"][0]["loss_bits"] == pytest.approx(1.0, abs=1e-12)
        assert a["config"]["mc"]["seed"] == 7

    def test_missing_seed_exits_2(self, write_config, capsys):
        assert main(["mc", write_config(MAGNITUDE)]) == 2
        assert "seed" in capsys.readouterr().err


class TestCascadeCommand:

    def test_verified_cascade(self, write_config, tmp_path, capsys):
        config = write_config({
            "density": {"kind": "normal", "sigma": 1},
            "cascade": {"stages": [
                {"kind": "catalog", "name": "magnitude"},
                {"kind": "catalog", "name": "magnitude", "params": {"center": 1}},
            ], "verify": True},
        })
        report_path, csv_path = tmp_path / "cascade.json", tmp_path / "cascade.csv"
        assert main(["cascade", config, "--json", str(report_path), "--csv", str(csv_path)]) == 0
        assert "additivity holds" in capsys.readouterr().out
        report = _read_json(report_path)
        assert report["cascade"]["stage_losses_bits"][0] == pytest.approx(1.0, abs=1e-3)
        assert report["additivity"]["passed"] is True
        assert report["additivity"]["composite_branches"] == 4
        assert len(_csv_rows(csv_path.read_text(encoding="utf-8"))) == 2

    def test_verification_needs_two_stages(self, write_config):
        config = write_config({
            "density": {"kind": "normal"},
            "cascade": {"stages": [{"kind": "catalog", "name": "magnitude"}], "verify": True},
        })
        assert main(["cascade", config]) == 2

    def test_incompatible_stages_exit_3(self, write_config):
        config = write_config({
            "density": {"kind": "normal"},
            "cascade": {"stages": [
                {"kind": "catalog", "name": "magnitude"},
                {"kind": "catalog", "name": "cosine"},
            ]},
        })
        assert main(["cascade", config]) == 3


class TestOracleCommand:

    def test_levels(self, write_config, tmp_path, capsys):
        config = write_config({
            **MAGNITUDE,
            "mc": {"n_samples": 20000, "seed": 1},
            "histogram": {"y_bins": 8, "refinement_levels": 2},
        })
        csv_path = tmp_path / "oracle.csv"
        assert main(["oracle", config, "--csv", str(csv_path)]) == 0
        out = capsys.readouterr().out
        assert "Histogram oracle" in out and "Quadrature" in out
        rows = _csv_rows(csv_path.read_text(encoding="utf-8"))
        assert [row["bins_requested"] for row in rows] == ["8", "16", "32"]
        assert float(rows[-1]["estimate_bits"]) == pytest.approx(1.0, abs=0.02)


class TestBuildTightCommand:

    def test_table_on_stdout(self, write_config, tmp_path, capsys):
        config = write_config({"density": {"kind": "uniform", "lo": 0, "hi": 1}, "tight": {"L": 3, "table_points": 4}})
        report_path = tmp_path / "tight.json"
        assert main(["build-tight", config, "--json", str(report_path)]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert set(rows[0]) == {"branch", "x", "g", "derivative"}
        assert {row["branch"] for row in rows} == {"0", "1", "2"}
        report = _read_json(report_path)
        assert report["reports"][0]["loss_bits"] == pytest.approx(math.log2(3.0), abs=1e-4)
        assert report["tightness"]["bound1_tight"] is True
        assert len(report["function"]) == 3

    def test_table_to_file(self, write_config, tmp_path, capsys):
        config = write_config({"density": {"kind": "normal"}, "tight": {"L": 2, "signs": [1, -1]}})
        csv_path = tmp_path / "table.csv"
        assert main(["build-tight", config, "--csv", str(csv_path)]) == 0
        assert "tight[2]" in capsys.readouterr().out
        assert csv_path.read_text(encoding="utf-8").startswith("branch,x,g,derivative\n")

    def test_custom_offsets(self, write_config, tmp_path):
        config = write_config({
            "density": {"kind": "uniform", "lo": 0, "hi": 1},
            "tight": {"L": 2, "offsets": [0, 0]},
        })
        report_path = tmp_path / "tight.json"
        assert main(["build-tight", config, "--json", str(report_path)]) == 0
        assert _read_json(report_path)["reports"][0]["loss_bits"] == pytest.approx(0.0, abs=1e-9)

    def test_missing_section_exits_2(self, write_config):
        assert main(["build-tight", write_config(MAGNITUDE)]) == 2


class TestSweepCommand:

    def test_sqlin_over_a(self, write_config, capsys):
        config = write_config({**SQLIN, "sweep": {"param": "density.a", "values": [1, 2, 4], "with_mc": False}})
        assert main(["sweep", config]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert [float(row["param"]) for row in rows] == [1.0, 2.0, 4.0]
        for row in rows:
            a = float(row["param"])
            assert float(row["loss_quadrature"]) == pytest.approx(sqlin_loss_bits(a), abs=1e-3)
            assert row["loss_mc"] == "nan"

    def test_single_point_matches_loss(self, write_config, tmp_path):
        loss_path, sweep_path = tmp_path / "loss.json", tmp_path / "sweep.json"
        assert main(["loss", write_config(SQLIN), "--json", str(loss_path)]) == 0
        sweep = write_config({**SQLIN, "sweep": {"param": "density.a", "values": [1], "with_mc": False}}, "sweep.json")
        assert main(["sweep", sweep, "--json", str(sweep_path)]) == 0
        direct = _read_json(loss_path)["reports"][0]["loss_bits"]
        assert _read_json(sweep_path)["rows"][0][1] == pytest.approx(direct, abs=1e-12)

    def test_rows_keep_grid_order_with_workers(self, write_config, tmp_path):
        config = write_config({
            **MAGNITUDE,
            "mc": {"n_samples": 2000},
            "sweep": {"param": "density.sigma", "start": 1, "stop": 100, "num": 4, "spacing": "log"},
        })
        csv_path = tmp_path / "sweep.csv"
        assert main(["sweep", config, "--seed", "5", "--workers", "4", "--csv", str(csv_path)]) == 0
        rows = _csv_rows(csv_path.read_text(encoding="utf-8"))
        assert [float(row["param"]) for row in rows] == pytest.approx([1.0, 100 ** (1 / 3), 100 ** (2 / 3), 100.0])
        assert all(float(row["loss_mc"]) == pytest.approx(1.0, abs=1e-12) for row in rows)

    def test_dumped_config_reproduces_table(self, write_config, tmp_path):
        config = write_config({
            "function": {"kind": "catalog", "name": "cubic", "params": {"c": 100}},
            "density": {"kind": "normal", "sigma": 10},
            "mc": {"n_samples": 2000},
            "sweep": {"param": "density.sigma", "values": [5, 20]},
        })
        dumped, first, second = tmp_path / "effective.json", tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", config, "--seed", "3", "--dump-config", str(dumped), "--csv", str(first)]) == 0
        assert main(["sweep", str(dumped), "--csv", str(second)]) == 0
        assert first.read_text(encoding="utf-8") == second.read_text(encoding="utf-8")

    def test_failed_point_is_reported(self, write_config, tmp_path):
        config = write_config({**MAGNITUDE, "sweep": {"param": "density.sigma", "values": [-1, 2], "with_mc": False}})
        report_path = tmp_path / "sweep.json"
        assert main(["sweep", config, "--json", str(report_path)]) == 0
        report = _read_json(report_path)
        assert report["failed"][0]["index"] == 0
        assert report["failed"][0]["error"]["code"] == "CONFIG_ERROR"
        assert report["rows"][0][1] is None
        assert report["rows"][1][1] == pytest.approx(1.0, abs=1e-4)

    def test_every_point_failed(self, write_config):
        config = write_config({**MAGNITUDE, "sweep": {"param": "density.sigma", "values": [-1, -2], "with_mc": False}})
        assert main(["sweep", config]) == 2

    def test_mc_sweep_needs_seed(self, write_config):
        config = write_config({**MAGNITUDE, "sweep": {"param": "density.sigma", "values": [1]}})
        assert main(["sweep", config]) == 2

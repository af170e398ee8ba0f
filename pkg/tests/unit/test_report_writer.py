"""
Unit tests for text, CSV and JSON report formatting
"""
import json
import math

import numpy as np
import pytest

from infoloss.core.cascade import CascadeReport
from infoloss.core.estimators import OracleLevel, OracleReport
from infoloss.core.loss_engine import LossMethod, LossReport
from infoloss.functions.base import Interval
from infoloss.services.report_writer import (
    CASCADE_COLUMNS,
    LOSS_COLUMNS,
    cascade_rows,
    format_cascade,
    format_loss_summary,
    format_number,
    format_oracle,
    format_sweep,
    function_table_rows,
    loss_rows,
    oracle_rows,
    render_csv,
    to_json,
    write_csv,
    write_json,
)


@pytest.fixture
def report():
    return LossReport(
        loss_bits=0.922409, method=LossMethod.QUADRATURE_X, error_estimate_bits=1e-7,
        bound1_bits=1.0, bound2_bits=1.0, bound3_bits=1.0, L=2, bijective_mass=0.0,
    )


class TestFormatNumber:

    @pytest.mark.parametrize("value,expected", [
        (0.1 + 0.2, "0.3"),
        (1.0 / 3.0, "0.333333333333"),
        (1e-20, "1e-20"),
        (math.nan, "nan"),
        (None, "nan"),
        (True, "true"),
        (np.int64(3), "3"),
        (np.float64(2.5), "2.5"),
        ("magnitude", "magnitude"),
    ])
    def test_cells(self, value, expected):
        assert format_number(value) == expected


class TestCsv:

    def test_render(self, report):
        text = render_csv(LOSS_COLUMNS, loss_rows([report]))
        lines = text.splitlines()
        assert lines[0] == ",".join(LOSS_COLUMNS)
        assert lines[1] == "quadrature_X,0.922409,1e-07,1,1,1,2,0,true"

    def test_write_to_file_and_stream(self, tmp_path, report):
        path = tmp_path / "out.csv"
        write_csv(str(path), LOSS_COLUMNS, loss_rows([report]))
        assert path.read_text(encoding="utf-8").startswith("method,loss_bits")

        class Sink:
            def __init__(self):
                self.parts = []

            def write(self, text):
                self.parts.append(text)

        sink = Sink()
        write_csv(None, CASCADE_COLUMNS, [[1, "magnitude", 1.0, 0.0]], stream=sink)
        assert "".join(sink.parts) == "stage,name,loss_bits,error_bits\n1,magnitude,1,0\n"

    def test_function_table_drops_open_ends(self, magnitude):
        rows = function_table_rows(magnitude, Interval(-1.0, 1.0), 5)
        assert len(rows) == 9
        assert [row[0] for row in rows] == [0] * 4 + [1] * 5
        assert rows[0][1:] == [-1.0, 1.0, -1.0]
        assert all(row[1] < 0 for row in rows[:4])


class TestJson:

    def test_non_finite_values_become_null(self, tmp_path, report):
        report.bijective_mass = math.nan
        payload = {"report": report.to_dict(), "values": [math.inf, np.float64(1.5)], "method": LossMethod.MONTE_CARLO}
        data = json.loads(to_json(payload))
        assert data["report"]["bijective_mass"] is None
        assert data["values"] == [None, 1.5]
        assert data["method"] == "monte_carlo"

        path = tmp_path / "report.json"
        write_json(str(path), payload)
        assert json.loads(path.read_text(encoding="utf-8")) == data


class TestText:

    def test_loss_summary(self, report):
        text = format_loss_summary("sqlin on uniform", [report], reference_bits=0.922409)
        assert text.startswith("sqlin on uniform\n")
        assert "H(X|Y) = 0.922409 bits" in text
        assert "L=2" in text
        assert "closed form" in text

    def test_unconverged_report_is_marked(self, report):
        report.converged = False
        report.notes.append("quadrature did not converge on every panel")
        text = format_loss_summary("title", [report])
        assert "NOT CONVERGED" in text
        assert "note: quadrature did not converge" in text

    def test_cascade(self):
        cascade = CascadeReport([1.0, 0.5], [1e-7, 2e-7], 1.5, ["magnitude", "cubic"])
        assert cascade_rows(cascade) == [[1, "magnitude", 1.0, 1e-7], [2, "cubic", 0.5, 2e-7]]
        text = format_cascade(cascade)
        assert "total" in text and "1.500000 bits" in text

    def test_oracle(self):
        oracle = OracleReport([OracleLevel(0, 8, 8, 0.95), OracleLevel(1, 16, 15, 0.93)], 1000, 4, 2)
        assert oracle_rows(oracle)[1] == [1, 16, 15, 0.93]
        assert "seed 4" in format_oracle(oracle)

    def test_sweep(self):
        text = format_sweep("density.a", [[1.0, 0.92, math.nan, math.nan, 1.0, 1.0, 1.0]], [])
        assert text.splitlines()[0] == "Sweep over density.a: 1 points, 0 failed"
        assert "nan" in text

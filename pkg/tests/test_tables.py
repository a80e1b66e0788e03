import json
import math

import numpy as np

from src.distributions import pareto_q
from src.orlicz import power
from src.schemas import RatioReport, RatioRow
from src.tables import dumps, ensure_out, orlicz_grid_frame, ratio_frame, survival_frame, write_csv, write_json


def test_ensure_out_creates_nested_dirs(tmp_path):
    out = ensure_out(tmp_path / "a" / "b")
    assert out.is_dir()


def test_csv_has_header_and_lf_endings(tmp_path):
    path = write_csv(orlicz_grid_frame(power(2.0), [0.5, 1.0, 2.0]), tmp_path / "grid.csv")
    raw = open(path, "rb").read()
    assert b"\r\n" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "s,M"
    assert lines[3] == "2.0,4.0"


def test_survival_frame_columns(tmp_path):
    df = survival_frame(pareto_q(2.0), [2.0])
    assert list(df.columns) == ["x", "survival"]
    assert df["survival"].iloc[0] == 0.25


def test_json_is_sorted_and_encodes_infinity(tmp_path):
    text = dumps({"b": math.inf, "a": np.float64(1.5), "c": [np.int64(2), -math.inf, math.nan]})
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data == {"a": 1.5, "b": "inf", "c": [2, "-inf", "nan"]}
    assert text.endswith("\n")


def test_ratio_report_csv_columns(tmp_path):
    rep = RatioReport(theorem="max", rows=[RatioRow(n=4, estimate=1.0, dispersion=0.1, predicted=2.0, ratio=0.5)],
                      spread=1.0)
    df = ratio_frame(rep)
    assert list(df.columns) == ["n", "estimate", "dispersion", "predicted", "ratio"]
    path = write_json(rep, tmp_path / "r.json")
    assert json.loads(open(path).read())["theorem"] == "max"

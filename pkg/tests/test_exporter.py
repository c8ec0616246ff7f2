"""
ファイル出力のテスト

スケジュールJSON・バッチ区間CSV・LONのGraphML/DOT・決定変数JSONをテストします。
"""

import json
from collections import Counter

import pandas as pd
import pytest

from modules.exporter import (
    batch_intervals,
    export_graph,
    graph_to_dot,
    read_graphml,
    read_schedule,
    schedule_from_dict,
    schedule_to_dict,
    write_assignment,
    write_batch_intervals,
    write_schedule,
)
from modules.instance_model import load_assignment
from modules.landscape_analysis import RunLog, compress_plateaus, merge_run_logs
from modules.schedule_decoder import decode_fabm, validate_schedule

EXAMPLE_VSS = [3, 1, 6, 4, 5, 2]


@pytest.fixture
def example_schedule(example6):
    return decode_fabm(example6, EXAMPLE_VSS, "recorded")


@pytest.fixture
def small_lon():
    log = RunLog(
        fitness={"3-1-2": 120.0, "1-3-2": 110.0, "1-2-3": 110.0},
        hits=Counter({"3-1-2": 1, "1-3-2": 1, "1-2-3": 1}),
        edges=Counter({("3-1-2", "1-3-2"): 2, ("1-3-2", "1-2-3"): 1}),
    )
    return merge_run_logs([log])


class TestScheduleFiles:
    """スケジュールJSONのテスト"""

    def test_dict_contains_rounded_mtat(self, example_schedule):
        data = schedule_to_dict(example_schedule)
        assert data["mtat"] == 1569.5
        assert len(data["batches"]) == len(example_schedule.batches)

    def test_write_and_read(self, tmp_path, example6, example_schedule):
        path = write_schedule(example_schedule, str(tmp_path / "out" / "schedule.json"))
        restored = read_schedule(path)
        assert restored.tat == example_schedule.tat
        assert restored.mtat == pytest.approx(1569.5)
        assert validate_schedule(example6, restored).ok

    def test_missing_field_raises_error(self, example_schedule):
        data = schedule_to_dict(example_schedule)
        del data["line_of"]
        with pytest.raises(ValueError, match="missing a field"):
            schedule_from_dict(data)

    def test_processing_time_derived_when_absent(self, example6, example_schedule):
        """"p" がないバッチは completion − start から処理時間を求めること"""
        data = schedule_to_dict(example_schedule)
        for b in data["batches"]:
            del b["p"]
        restored = schedule_from_dict(data)
        key = lambda b: (b.line, b.machine, b.position)
        assert [b.processing_time for b in sorted(restored.batches, key=key)] == [
            b.processing_time for b in sorted(example_schedule.batches, key=key)
        ]
        assert validate_schedule(example6, restored).ok

    def test_stated_tat_is_kept_for_validation(self, tmp_path, example6, example_schedule):
        """ファイルに書かれたTATを読み込み、改ざんを制約 (15) で検出すること"""
        data = schedule_to_dict(example_schedule)
        specimen = next(iter(data["tat"]))
        data["tat"][specimen] += 7
        path = tmp_path / "tampered.json"
        path.write_text(json.dumps(data), encoding="utf-8")

        restored = read_schedule(str(path))
        assert restored.tat[int(specimen)] == example_schedule.tat[int(specimen)] + 7
        assert 15 in validate_schedule(example6, restored).constraints()

    def test_tat_derived_when_absent(self, example_schedule):
        data = schedule_to_dict(example_schedule)
        del data["tat"]
        assert schedule_from_dict(data).tat == example_schedule.tat


class TestBatchIntervals:
    """バッチ区間のテスト"""

    def test_rows_are_sorted_by_machine(self, example_schedule):
        table = batch_intervals(example_schedule)
        assert len(table) == len(example_schedule.batches)
        keys = list(zip(table["line"], table["machine_index"], table["position"]))
        assert keys == sorted(keys)
        assert (table["completion"] - table["start"] == table["processing_time"]).all()

    def test_csv_output(self, tmp_path, example_schedule):
        path = write_batch_intervals(example_schedule, str(tmp_path / "batches.csv"))
        table = pd.read_csv(path)
        assert table.loc[0, "machine"].startswith("M1,")


class TestGraphExport:
    """グラフ出力のテスト"""

    def test_graphml_roundtrip(self, tmp_path, small_lon):
        path = export_graph(small_lon, str(tmp_path / "lon.graphml"))
        view = read_graphml(path)
        assert view.number_of_nodes() == 3
        assert view.nodes["1-3-2"]["fitness"] == 110.0
        assert view.nodes["1-3-2"]["size"] == 2
        assert view.nodes["1-2-3"]["size"] == 1

    def test_export_is_byte_identical(self, tmp_path, small_lon):
        a = export_graph(small_lon, str(tmp_path / "a.graphml"))
        b = export_graph(small_lon, str(tmp_path / "b.graphml"))
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

    def test_plateau_attributes(self, tmp_path, small_lon):
        plateaus = compress_plateaus(small_lon)
        view = read_graphml(export_graph(plateaus, str(tmp_path / "plateaus.graphml")))
        assert view.nodes["1-3-2"]["plateau"] == view.nodes["1-2-3"]["plateau"]
        assert view.nodes["1-2-3"]["sink"] is True
        assert view.nodes["3-1-2"]["sink"] is False

    def test_dot_output(self, tmp_path, small_lon):
        text = graph_to_dot(small_lon)
        assert "digraph" in text
        assert "weight" in text
        path = export_graph(small_lon, str(tmp_path / "lon.dot"), fmt="dot")
        with open(path, encoding="utf-8") as f:
            assert f.read() == text

    def test_unknown_format_raises_error(self, tmp_path, small_lon):
        with pytest.raises(ValueError, match="fmt must be one of"):
            export_graph(small_lon, str(tmp_path / "lon.gexf"), fmt="gexf")


class TestAssignmentFile:
    """決定変数JSONのテスト"""

    def test_write_and_load(self, tmp_path, example6_assignment):
        path = write_assignment(example6_assignment, str(tmp_path / "asg.json"))
        assert load_assignment(path) == example6_assignment
        with open(path, encoding="utf-8") as f:
            assert set(json.load(f)) == {"x", "y", "z"}

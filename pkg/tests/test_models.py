"""
labsched データモデルのテスト

データクラスの基本的な機能と検証ロジックをテストします。
"""

import pytest

from modules.models import (
    AnnealConfig,
    BlockPartition,
    DistanceMoments,
    FdcSample,
    Machine,
    MlState,
    MoveKind,
    ResultRecord,
    ScatterConfig,
    SearchResult,
    Specimen,
    StageBounds,
    StageKind,
    ValidationReport,
    WalkSeries,
    route_for,
)


class TestRoute:
    """工程ルートのテスト"""

    def test_biochemical_route(self):
        """生化学検体は遠心分離→開栓→生化学→検証の順"""
        assert route_for("biochemical") == (
            StageKind.CENTRIFUGATION,
            StageKind.DECAPPING,
            StageKind.BIOCHEMICAL_TEST,
            StageKind.VALIDATION,
        )

    def test_immunologic_route_uses_immunologic_stage(self):
        assert route_for("immunologic")[2] == StageKind.IMMUNOLOGIC_TEST

    def test_unknown_kind_raises_error(self):
        with pytest.raises(ValueError):
            route_for("hematology")


class TestMachineAndSpecimen:
    """Machine・Specimenデータクラスのテスト"""

    def test_machine_label(self):
        machine = Machine(1, 2, StageKind.CENTRIFUGATION, 84)
        assert machine.key == (1, 2)
        assert machine.label == "M1,2"

    def test_specimen_nonpositive_id_raises_error(self):
        with pytest.raises(ValueError, match="id must be positive"):
            Specimen(0, "biochemical", route_for("biochemical"))

    def test_specimen_unknown_kind_raises_error(self):
        with pytest.raises(ValueError, match="test_kind must be one of"):
            Specimen(1, "urine", route_for("biochemical"))

    def test_stage_bounds_lower_above_upper_raises_error(self):
        with pytest.raises(ValueError, match="lower must not exceed upper"):
            StageBounds(count=1, capacity=1, lower=10, upper=5)


class TestSearchConfigs:
    """探索設定データクラスのテスト"""

    def test_anneal_config_defaults(self):
        cfg = AnnealConfig()
        assert cfg.cooling == 0.98
        assert cfg.block_size == 4
        assert cfg.budget == 10_000

    @pytest.mark.parametrize("cooling", [0.0, -0.5, 1.01])
    def test_anneal_config_cooling_out_of_range_raises_error(self, cooling):
        with pytest.raises(ValueError, match="cooling must be in"):
            AnnealConfig(cooling=cooling)

    def test_anneal_config_cooling_one_is_fixed_temperature(self):
        """λ=1（FTA）は有効"""
        assert AnnealConfig(cooling=1.0).cooling == 1.0

    def test_anneal_config_theta_zero_raises_error(self):
        with pytest.raises(ValueError, match="theta must be at least 1"):
            AnnealConfig(theta=0)

    def test_anneal_config_unknown_neighborhood_raises_error(self):
        with pytest.raises(ValueError, match="neighborhood must be"):
            AnnealConfig(neighborhood="2opt")

    def test_scatter_config_refset_too_small_raises_error(self):
        with pytest.raises(ValueError, match="refset_size must be at least 2"):
            ScatterConfig(refset_size=1)

    def test_scatter_config_exposes_improvement_neighborhood(self):
        assert ScatterConfig(improvement=AnnealConfig(neighborhood="inb")).neighborhood == "inb"

    def test_ml_state_defaults_are_uniform(self):
        state = MlState()
        assert state.k == len(MoveKind)
        assert sum(state.probabilities) == pytest.approx(1.0)
        assert state.training is True

    def test_ml_state_wrong_length_raises_error(self):
        with pytest.raises(ValueError, match="rewards and probabilities"):
            MlState(rewards=(0.0, 0.0))


class TestBlockPartition:
    """BlockPartitionデータクラスのテスト"""

    def test_overlapping_blocks_raise_error(self):
        with pytest.raises(ValueError, match="disjoint"):
            BlockPartition(block_size=2, blocks=((1, 2), (2, 3)))

    def test_oversized_block_raises_error(self):
        with pytest.raises(ValueError, match="every block must hold"):
            BlockPartition(block_size=2, blocks=((1, 2, 3),))

    def test_counts(self):
        partition = BlockPartition(block_size=2, blocks=((1, 2), (3, 4), (5,)))
        assert partition.b == 3
        assert partition.n == 5


class TestResultTypes:
    """結果データクラスのテスト"""

    def test_search_result_trace_must_end_at_best(self):
        with pytest.raises(ValueError, match="best_mtat must equal the last trace value"):
            SearchResult(best_vss=[1, 2], best_mtat=10.0, trace=[(1, 12.0)], optima_log=[], evaluations=1)

    def test_distance_moments_negative_variance_raises_error(self):
        with pytest.raises(ValueError, match="variance must be non-negative"):
            DistanceMoments(mean=0.1, variance=-0.5)

    def test_fdc_sample_distance_out_of_range_raises_error(self):
        with pytest.raises(ValueError, match=r"distance must be in \[0, 1\]"):
            FdcSample(fitness=100.0, distance=1.5)

    def test_walk_series_too_short_raises_error(self):
        with pytest.raises(ValueError, match="at least 2 entries"):
            WalkSeries(values=(1.0,), kind=MoveKind.SWP, seed=0)

    def test_result_record_nonpositive_mtat_raises_error(self):
        with pytest.raises(ValueError, match="best_mtat must be positive"):
            ResultRecord("I", "sa", "swp", 0, 1, 0.0, 10, 0.1)

    def test_result_record_rep_starts_at_one(self):
        with pytest.raises(ValueError, match="rep must be at least 1"):
            ResultRecord("I", "sa", "swp", 0, 0, 100.0, 10, 0.1)


class TestValidationReport:
    """ValidationReportのテスト"""

    def test_empty_report_is_ok(self):
        report = ValidationReport()
        assert report.ok
        assert len(report) == 0

    def test_constraints_are_sorted_and_unique(self):
        report = ValidationReport()
        report.add(12, "a")
        report.add(5, "b")
        report.add(12, "c")
        assert not report.ok
        assert report.constraints() == [5, 12]

"""
スケジュールデコーダのテスト

FABMデコード・タイブレーク・決定変数からの実現・制約検証をテストします。
"""

from dataclasses import replace
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modules.errors import InfeasibleAssignmentError
from modules.instance_model import generate_instance, realistic_profile, toy_profile
from modules.models import Assignment
from modules.schedule_decoder import (
    LowestIndexTieBreaker,
    RecordedTieBreaker,
    SeededRandomTieBreaker,
    decode_fabm,
    decode_partial,
    evaluate_mtat,
    export_assignment,
    format_mtat,
    make_tie_breaker,
    realize_from_assignment,
    validate_schedule,
)
from tests.helpers import (
    assignment_optimum,
    brute_force_optimum,
    feasible_assignments,
    random_assignment,
)

EXAMPLE_VSS = [3, 1, 6, 4, 5, 2]


def _batch_sets(sched):
    """(装置, メンバー検体の集合, 処理時間) の一覧"""
    return {
        (b.machine_key, frozenset(i for i, _ in b.members), b.processing_time)
        for b in sched.batches
    }


class TestTieBreakers:
    """タイブレーク方針のテスト"""

    def test_lowest_index(self):
        assert LowestIndexTieBreaker().choose([(2, 1), (1, 2), (1, 1)]) == (1, 1)

    def test_seeded_random_is_reproducible(self):
        candidates = [(1, 1), (1, 2), (2, 1), (2, 2)]
        a = SeededRandomTieBreaker(5)
        b = SeededRandomTieBreaker(5)
        assert [a.choose(candidates) for _ in range(10)] == [b.choose(candidates) for _ in range(10)]

    def test_recorded_falls_back_to_lowest(self):
        """記録が候補外・使い切りの場合は最小の装置"""
        breaker = RecordedTieBreaker([(9, 9)])
        assert breaker.choose([(2, 1), (1, 2)]) == (1, 2)
        assert breaker.choose([(2, 1), (2, 2)]) == (2, 1)

    def test_unknown_policy_raises_error(self):
        with pytest.raises(ValueError, match="tie_policy must be"):
            make_tie_breaker("coin-flip")


class TestExampleDecode:
    """例題のデコード結果のテスト"""

    def test_example_mtat(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        assert sched.mtat == pytest.approx(1569.5)
        assert format_mtat(sched.mtat) == "1569.50"
        assert evaluate_mtat(sched) == pytest.approx(sum(sched.tat.values()) / 6)

    def test_example_tat_multiset(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        assert sorted(sched.tat.values()) == sorted([880, 1065, 875, 2398, 1806, 2393])

    def test_example_first_stage_batches(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        first = {entry for entry in _batch_sets(sched) if entry[0] in {(1, 1), (1, 2), (2, 1), (2, 2)}}
        assert ((2, 1), frozenset({3, 1}), 332) in first
        assert ((1, 2), frozenset({6, 4}), 597) in first
        assert ((2, 2), frozenset({5, 2}), 356) in first

    def test_example_schedule_is_valid(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        assert validate_schedule(example6, sched).ok

    def test_export_matches_fixture(self, example6, example6_assignment):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        assert export_assignment(sched) == example6_assignment


class TestDecodeProperties:
    """デコードの性質のテスト"""

    def test_deterministic_for_fixed_seed(self, small_instance):
        vss = list(small_instance.specimen_ids)[::-1]
        a = decode_fabm(small_instance, vss, "seeded-random", 3)
        b = decode_fabm(small_instance, vss, "seeded-random", 3)
        assert a == b

    @given(st.permutations(list(range(1, 11))), st.integers(min_value=0, max_value=1000))
    def test_random_orders_decode_to_valid_schedules(self, small_instance, vss, seed):
        sched = decode_fabm(small_instance, vss, "seeded-random", seed)
        report = validate_schedule(small_instance, sched)
        assert report.ok, report.violations
        assert sched.mtat > 0

    def test_every_specimen_has_tat(self, medium_instance):
        sched = decode_fabm(medium_instance, medium_instance.specimen_ids, "lowest-index")
        assert set(sched.tat) == set(medium_instance.specimen_ids)
        assert validate_schedule(medium_instance, sched).ok

    def test_scaling_times_scales_mtat(self, small_instance):
        vss = list(small_instance.specimen_ids)
        base = decode_fabm(small_instance, vss, "lowest-index").mtat
        scaled = decode_fabm(small_instance.scaled(3), vss, "lowest-index").mtat
        assert scaled == pytest.approx(3 * base)

    def test_partial_decode_covers_subset(self, example6):
        sched = decode_partial(example6, [4, 2], "lowest-index")
        assert set(sched.tat) == {4, 2}

    def test_repeated_id_raises_error(self, example6):
        with pytest.raises(ValueError, match="must not repeat"):
            decode_fabm(example6, [1, 1, 2, 3, 4, 5])

    def test_short_sequence_raises_error(self, example6):
        with pytest.raises(ValueError, match="must be a permutation"):
            decode_fabm(example6, [1, 2, 3])

    def test_unknown_id_raises_error(self, example6):
        with pytest.raises(ValueError, match="unknown specimen ids"):
            decode_fabm(example6, [1, 2, 3, 4, 5, 7])

    @pytest.mark.slow
    def test_fuzzing_produces_no_violations(self, toy_instances):
        """小規模と100検体のインスタンスで10万回デコードしても違反なし"""
        large = [generate_instance(realistic_profile(), 50, 50, idx, seed=21) for idx in (1, 2)]
        instances = list(toy_instances) + large
        rng = np.random.default_rng(0)
        for k in range(100_000):
            inst = instances[k % len(instances)]
            vss = [inst.specimen_ids[p] for p in rng.permutation(inst.n)]
            sched = decode_fabm(inst, vss, "seeded-random", k)
            report = validate_schedule(inst, sched)
            assert report.ok, (inst.name, vss, report.violations)


class TestRealizeFromAssignment:
    """決定変数からのタイミング実現のテスト"""

    def test_fixture_realizes_example_mtat(self, example6, example6_assignment):
        sched = realize_from_assignment(example6, example6_assignment)
        assert sched.mtat == pytest.approx(1569.5)
        assert validate_schedule(example6, sched).ok

    def test_capacity_violation_reports_constraint_5(self, example6, example6_assignment):
        y = set(example6_assignment.y)
        y.remove((6, 2, 2, 1, 3))
        y.add((6, 2, 1, 1, 3))
        asg = replace(example6_assignment, y=frozenset(y))
        with pytest.raises(InfeasibleAssignmentError) as excinfo:
            realize_from_assignment(example6, asg)
        assert excinfo.value.constraint == 5

    def test_line_mismatch_reports_constraint_3(self, example6, example6_assignment):
        x = (set(example6_assignment.x) - {(4, 1)}) | {(4, 2)}
        with pytest.raises(InfeasibleAssignmentError) as excinfo:
            realize_from_assignment(example6, replace(example6_assignment, x=frozenset(x)))
        assert excinfo.value.constraint == 3

    def test_missing_line_reports_constraint_2(self, example6, example6_assignment):
        x = set(example6_assignment.x) - {(4, 1)}
        with pytest.raises(InfeasibleAssignmentError) as excinfo:
            realize_from_assignment(example6, replace(example6_assignment, x=frozenset(x)))
        assert excinfo.value.constraint == 2

    def test_unassigned_operation_reports_constraint_4(self, example6, example6_assignment):
        y = set(example6_assignment.y) - {(4, 4, 1, 1, 8)}
        with pytest.raises(InfeasibleAssignmentError) as excinfo:
            realize_from_assignment(example6, replace(example6_assignment, y=frozenset(y)))
        assert excinfo.value.constraint == 4

    def test_duplicate_position_reports_constraint_6(self, example6, example6_assignment):
        z = (set(example6_assignment.z) - {(2, 1, 8, 1)}) | {(2, 1, 8, 2)}
        with pytest.raises(InfeasibleAssignmentError) as excinfo:
            realize_from_assignment(example6, replace(example6_assignment, z=frozenset(z)))
        assert excinfo.value.constraint == 6

    def test_empty_assignment_reports_constraint_2(self, example6):
        with pytest.raises(InfeasibleAssignmentError, match=r"Constraint \(2\)"):
            realize_from_assignment(example6, Assignment(frozenset(), frozenset(), frozenset()))

    def test_decoded_schedules_round_trip(self, small_instance):
        """デコードした50件のスケジュールを決定変数経由で実現しても同じMTATになること"""
        rng = np.random.default_rng(4)
        for k in range(50):
            vss = [small_instance.specimen_ids[p] for p in rng.permutation(small_instance.n)]
            sched = decode_fabm(small_instance, vss, "seeded-random", k)
            realized = realize_from_assignment(small_instance, export_assignment(sched))
            assert realized.tat == sched.tat
            assert realized.mtat == pytest.approx(sched.mtat)


class TestAssignmentEnumeration:
    """決定変数の全列挙と無作為標本のテスト"""

    def test_enumerated_assignments_are_valid(self, toy_instances):
        inst = toy_instances[0]
        schedules = [sched for _, sched in feasible_assignments(inst)]
        assert schedules
        for sched in schedules:
            report = validate_schedule(inst, sched)
            assert report.ok, report.violations

    def test_decoded_optimum_not_below_assignment_optimum(self, toy_instances):
        """全順列のデコード最良値が決定変数の全列挙による最適値を下回らないこと"""
        for inst in toy_instances:
            optimum = assignment_optimum(inst)
            assert brute_force_optimum(inst, "lowest-index") >= optimum - 1e-9
            assert brute_force_optimum(inst, "seeded-random", 1) >= optimum - 1e-9

    def test_decoded_schedules_are_enumerated(self, toy_instances):
        """デコード結果のMTATは列挙した実行可能解のいずれかと一致すること"""
        inst = toy_instances[1]
        values = {round(sched.mtat, 6) for _, sched in feasible_assignments(inst)}
        for vss in permutations(inst.specimen_ids):
            assert round(decode_fabm(inst, vss, "lowest-index").mtat, 6) in values

    def test_random_assignments_realize_to_valid_schedules(self):
        """4検体で無作為に作った決定変数は、先行関係と矛盾しなければ違反なく実現できること"""
        inst = generate_instance(toy_profile(), 2, 2, 1, seed=13)
        rng = np.random.default_rng(0)
        realized = 0
        for _ in range(300):
            asg = random_assignment(inst, rng)
            try:
                sched = realize_from_assignment(inst, asg)
            except InfeasibleAssignmentError as e:
                assert e.constraint == 12
                continue
            report = validate_schedule(inst, sched)
            assert report.ok, (asg, report.violations)
            assert set(sched.tat) == set(inst.specimen_ids)
            realized += 1
        assert realized > 0


class TestValidateSchedule:
    """制約検証のテスト"""

    def test_wrong_completion_reports_constraint_9(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        batches = list(sched.batches)
        batches[0] = replace(batches[0], completion=batches[0].completion + 1)
        report = validate_schedule(example6, replace(sched, batches=tuple(batches)))
        assert 9 in report.constraints()

    def test_wrong_tat_reports_constraint_15(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        tat = dict(sched.tat)
        tat[1] += 10
        report = validate_schedule(example6, replace(sched, tat=tat))
        assert report.constraints() == [15]

    def test_overfull_batch_reports_constraint_5(self, example6):
        """容量1の装置で2つのバッチをまとめると制約 (5) の違反になること"""
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        first, second = next(
            batches[:2]
            for key, batches in sched.machine_batches.items()
            if example6.machine_by_key[key].capacity == 1 and len(batches) >= 2
        )
        merged = replace(first, members=first.members + second.members)
        batches = tuple(merged if b == first else b for b in sched.batches if b != second)
        report = validate_schedule(example6, replace(sched, batches=batches))
        assert 5 in report.constraints()

    def test_early_next_operation_reports_constraint_12(self, example6):
        """次の工程が前の工程の完了前に始まると制約 (12) の違反になること"""
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        owner = {m: b for b in sched.batches for m in b.members}
        decapping = owner[(1, 2)]
        centrifugation = owner[(1, 1)]
        start = centrifugation.completion - 1
        shifted = replace(decapping, start=start, completion=start + decapping.processing_time)
        batches = tuple(shifted if b == decapping else b for b in sched.batches)
        report = validate_schedule(example6, replace(sched, batches=batches))
        assert 12 in report.constraints()
        assert 9 not in report.constraints()

    def test_missing_batch_reports_constraint_4(self, example6):
        sched = decode_fabm(example6, EXAMPLE_VSS, "recorded")
        report = validate_schedule(example6, replace(sched, batches=sched.batches[1:]))
        assert 4 in report.constraints()

"""
近傍操作と距離のテスト

近傍操作・ブロック分割・JPR距離・距離モーメントをテストします。
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modules.models import BlockPartition, MoveKind
from modules.neighborhoods import (
    apply_move,
    as_move_kind,
    empirical_moments,
    enumerate_moves,
    jpr_distance,
    moments_table,
    sample_move,
    scattered_block_bounds,
    split_blocks,
    split_sequence,
    theoretical_moments,
)


class TestApplyMove:
    """近傍操作のテスト"""

    def test_swap(self):
        assert apply_move("swp", [1, 2, 3, 4], (0, 3)) == [4, 2, 3, 1]

    def test_insert_moves_later_element_forward(self):
        assert apply_move("ins", [1, 2, 3, 4, 5], (1, 3)) == [1, 4, 2, 3, 5]

    def test_exclusive_inversion_keeps_endpoints(self):
        assert apply_move("inv", [1, 2, 3, 4, 5], (0, 4)) == [1, 4, 3, 2, 5]

    def test_inclusive_inversion(self):
        assert apply_move("inv", [1, 2, 3, 4, 5], (0, 4), inclusive=True) == [5, 4, 3, 2, 1]

    def test_adjacent_exclusive_inversion_is_identity(self):
        assert apply_move("inv", [1, 2, 3], (0, 1)) == [1, 2, 3]

    def test_block_insertion(self):
        """後ろのブロックを前のブロックの先頭の直前へ移す"""
        partition = split_blocks(6, 2)
        assert apply_move("inb", [1, 2, 3, 4, 5, 6], (0, 2), partition=partition) == [5, 6, 1, 2, 3, 4]

    def test_block_insertion_on_scattered_blocks(self):
        partition = BlockPartition(block_size=2, blocks=((1, 4), (2, 5)))
        result = apply_move("inb", [1, 2, 3, 4, 5], (0, 1), partition=partition)
        assert result == [2, 5, 1, 3, 4]

    def test_params_order_does_not_matter(self):
        assert apply_move("ins", [1, 2, 3, 4], (3, 1)) == apply_move("ins", [1, 2, 3, 4], (1, 3))

    def test_same_position_raises_error(self):
        with pytest.raises(ValueError, match="two distinct positions"):
            apply_move("swp", [1, 2, 3], (1, 1))

    def test_out_of_range_raises_error(self):
        with pytest.raises(ValueError, match="positions must be in"):
            apply_move("swp", [1, 2, 3], (0, 3))

    def test_block_insertion_without_partition_raises_error(self):
        with pytest.raises(ValueError, match="INB requires a block partition"):
            apply_move("inb", [1, 2, 3, 4], (0, 1))

    def test_unknown_kind_raises_error(self):
        with pytest.raises(ValueError, match="kind must be one of"):
            as_move_kind("2opt")

    @given(
        st.permutations(list(range(1, 9))),
        st.sampled_from(["ins", "swp", "inv"]),
        st.tuples(st.integers(0, 7), st.integers(0, 7)).filter(lambda p: p[0] != p[1]),
    )
    def test_moves_preserve_permutation(self, vss, kind, params):
        assert sorted(apply_move(kind, vss, params)) == list(range(1, 9))


class TestSampling:
    """一様サンプリングのテスト"""

    def test_sample_returns_ordered_distinct_pair(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = sample_move("swp", 5, rng)
            assert 0 <= a < b < 5

    def test_sample_blocks(self):
        rng = np.random.default_rng(1)
        a, b = sample_move("inb", split_blocks(9, 3), rng)
        assert 0 <= a < b < 3

    def test_sample_from_single_element_raises_error(self):
        with pytest.raises(ValueError, match="n must be at least 2"):
            sample_move("swp", 1, np.random.default_rng(0))

    def test_sample_single_block_raises_error(self):
        with pytest.raises(ValueError, match="at least 2 blocks"):
            sample_move("inb", split_blocks(3, 4), np.random.default_rng(0))

    def test_enumerate_counts_pairs(self):
        assert len(list(enumerate_moves("ins", 6))) == 15


class TestBlocks:
    """ブロック分割のテスト"""

    def test_split_with_remainder(self):
        partition = split_blocks(10, 4)
        assert partition.blocks == ((1, 2, 3, 4), (5, 6, 7, 8), (9, 10))

    def test_split_sequence_follows_order(self):
        assert split_sequence([3, 1, 2], 2).blocks == ((3, 1), (2,))

    def test_empty_sequence_raises_error(self):
        with pytest.raises(ValueError, match="must not be empty"):
            split_sequence([], 2)


class TestJprDistance:
    """JPR距離のテスト"""

    def test_example_pair(self):
        assert jpr_distance([3, 1, 6, 4, 5, 2], [3, 4, 6, 1, 5, 2]) == pytest.approx(0.2)

    def test_reverse_is_one(self):
        assert jpr_distance([1, 2, 3, 4], [4, 3, 2, 1]) == 1.0

    @given(st.permutations(list(range(1, 8))), st.permutations(list(range(1, 8))))
    def test_symmetric_and_bounded(self, p1, p2):
        d = jpr_distance(p1, p2)
        assert d == pytest.approx(jpr_distance(p2, p1))
        assert 0.0 <= d <= 1.0
        assert (d == 0.0) == (list(p1) == list(p2))

    def test_different_sets_raise_error(self):
        with pytest.raises(ValueError, match="same id set"):
            jpr_distance([1, 2, 3], [1, 2, 4])

    def test_single_element_raises_error(self):
        with pytest.raises(ValueError, match="at least 2 ids"):
            jpr_distance([1], [1])


class TestTheoreticalMoments:
    """理論モーメントのテスト"""

    @pytest.mark.parametrize("kind,mean,variance", [
        ("inv", 0.1600, 0.03712),
        ("ins", 0.0068, 2.244e-05),
        ("swp", 0.0134, 8.977e-05),
    ])
    def test_values_at_100(self, kind, mean, variance):
        moments = theoretical_moments(kind, 100)
        assert moments.mean == pytest.approx(mean, abs=5e-5)
        assert moments.variance == pytest.approx(variance, rel=1e-3)

    def test_block_insertion_at_100(self):
        moments = theoretical_moments("inb", 100, 25)
        assert moments.mean == pytest.approx(0.0280, abs=5e-5)
        assert moments.variance == pytest.approx(3.471e-4, rel=1e-3)

    @pytest.mark.parametrize("n,inv,ins,swp,inb", [
        (200, 0.1633, 0.0034, 0.0067, 0.0137),
        (300, 0.1644, 0.0022, 0.0045, 0.0090),
        (400, 0.1650, 0.0017, 0.0033, 0.0068),
        (500, 0.1653, 0.0013, 0.0027, 0.0054),
    ])
    def test_means_for_larger_sizes(self, n, inv, ins, swp, inb):
        assert theoretical_moments("inv", n).mean == pytest.approx(inv, abs=5e-5)
        assert theoretical_moments("ins", n).mean == pytest.approx(ins, abs=5e-5)
        assert theoretical_moments("swp", n).mean == pytest.approx(swp, abs=5e-5)
        assert theoretical_moments("inb", n, n // 4).mean == pytest.approx(inb, abs=5e-5)

    def test_small_n_values(self):
        assert theoretical_moments("swp", 6).mean == pytest.approx(0.2444444444)
        assert theoretical_moments("inv", 6).mean == pytest.approx(1 / 15)
        inb = theoretical_moments("inb", 6, 3)
        assert inb.mean == pytest.approx(32 / 90)
        assert inb.variance == pytest.approx(0.015802469136)

    def test_two_blocks_have_zero_variance(self):
        assert theoretical_moments("inb", 8, 2).variance == 0.0

    def test_indivisible_blocks_raise_error(self):
        with pytest.raises(ValueError, match="divisible"):
            theoretical_moments("inb", 10, 4)

    def test_missing_block_count_raises_error(self):
        with pytest.raises(ValueError, match="b must be at least 2"):
            theoretical_moments("inb", 8)


class TestExhaustiveMoments:
    """全列挙による経験的モーメントが理論値と一致することのテスト"""

    @pytest.mark.parametrize("n,kind,mean,variance", [
        (4, "swp", 0.3888888889, 0.061728395062),
        (4, "ins", 0.2777777778, 0.015432098765),
        (4, "inv", 0.0277777778, 0.003858024691),
        (8, "swp", 0.1785714286, 0.015306122449),
        (8, "ins", 0.1071428571, 0.003826530612),
        (8, "inv", 0.0892857143, 0.018176020408),
    ])
    def test_exhaustive_matches_theory(self, n, kind, mean, variance):
        observed = empirical_moments(kind, n, exhaustive=True)
        theory = theoretical_moments(kind, n)
        assert observed.mean == pytest.approx(mean, abs=1e-9)
        assert observed.variance == pytest.approx(variance, abs=1e-9)
        assert theory.mean == pytest.approx(mean, abs=1e-9)
        assert theory.variance == pytest.approx(variance, abs=1e-9)

    def test_exhaustive_block_insertion(self):
        observed = empirical_moments("inb", split_blocks(8, 2), exhaustive=True)
        assert observed.mean == pytest.approx(0.2380952381, abs=1e-9)
        assert observed.variance == pytest.approx(0.011337868481, abs=1e-9)
        assert observed.samples == 6

    def test_sampled_moments_approach_theory(self):
        observed = empirical_moments(MoveKind.SWP, 30, samples=20_000, seed=4)
        theory = theoretical_moments(MoveKind.SWP, 30)
        assert observed.mean == pytest.approx(theory.mean, rel=0.03)

    def test_sampled_moments_are_reproducible(self):
        a = empirical_moments("ins", 20, samples=500, seed=9)
        b = empirical_moments("ins", 20, samples=500, seed=9)
        assert a == b


class TestScatteredBlockBounds:
    """散在ブロックの上下界のテスト"""

    def test_bounds_at_100(self):
        mean_low, mean_high, var_low, var_high = scattered_block_bounds(100, 25)
        assert mean_low == pytest.approx(0.0082155, abs=1e-6)
        assert mean_high == pytest.approx(0.047811, abs=1e-6)
        assert var_low == 0.0
        assert var_high == pytest.approx(0.0029249, abs=1e-6)

    def test_contiguous_values_lie_inside(self):
        mean_low, mean_high, var_low, var_high = scattered_block_bounds(100, 25)
        contiguous = theoretical_moments("inb", 100, 25)
        assert mean_low <= contiguous.mean <= mean_high
        assert var_low <= contiguous.variance <= var_high


class TestMomentsTable:
    """モーメント表のテスト"""

    def test_table_shape(self):
        table = moments_table(["swp", "inb"], [8, 12], block_size=4)
        assert len(table) == 4
        assert list(table.columns) == ["kind", "n", "b", "theory_mean", "theory_var"]
        assert table.loc[(table["kind"] == "inb") & (table["n"] == 12), "b"].iloc[0] == 3

    def test_table_with_samples(self):
        table = moments_table(["ins"], [10], samples=100)
        assert "empirical_mean" in table.columns

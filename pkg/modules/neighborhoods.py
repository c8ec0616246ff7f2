"""
labsched 近傍操作と距離

このモジュールは以下の機能を提供します：
- 4種類の近傍操作（INS, SWP, INV, INB）と一様サンプリング
- ブロック分割
- JPR距離（正規化したペア逆転数）
- 近傍間距離の期待値・分散の理論値と散在ブロックの上下界
- モンテカルロ・全列挙による経験的モーメント
"""

import logging
from fractions import Fraction
from itertools import combinations
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .models import BlockPartition, DistanceMoments, MoveKind

logger = logging.getLogger(__name__)

MoveParams = Tuple[int, int]
SizeOrPartition = Union[int, BlockPartition]

# 逆転数をまとめて数える際のブール配列の要素数上限
_CHUNK_CELLS = 20_000_000


def as_move_kind(kind: Union[str, MoveKind]) -> MoveKind:
    """文字列または MoveKind を MoveKind に変換する"""
    try:
        return MoveKind(kind.lower() if isinstance(kind, str) else kind)
    except ValueError:
        raise ValueError(f"kind must be one of ins/swp/inv/inb, got {kind}") from None


# ==================== JPR距離 ====================


def _inversions(seq: np.ndarray) -> int:
    return int(np.count_nonzero(np.triu(seq[:, None] > seq[None, :], 1)))


def jpr_distance(p1: Sequence[int], p2: Sequence[int]) -> float:
    """
    2つの順列のJPR距離を計算する

    相対順序が異なる要素ペアの数を n(n-1)/2 で割った値です。

    Args:
        p1: 順列
        p2: 同じ要素集合の順列

    Returns:
        float: [0, 1] の距離

    Raises:
        ValueError: 要素集合が異なる、または n < 2 の場合

    Examples:
        >>> jpr_distance([3, 1, 6, 4, 5, 2], [3, 4, 6, 1, 5, 2])
        0.2
    """
    if len(p1) != len(p2) or sorted(p1) != sorted(p2):
        raise ValueError("p1 and p2 must be permutations of the same id set")
    if len(set(p1)) != len(p1):
        raise ValueError("permutations must not repeat ids")
    n = len(p1)
    if n < 2:
        raise ValueError(f"permutations must hold at least 2 ids, got {n}")
    position = {value: index for index, value in enumerate(p2)}
    seq = np.fromiter((position[value] for value in p1), dtype=np.int64, count=n)
    return _inversions(seq) / (n * (n - 1) / 2)


# ==================== ブロック分割 ====================


def split_blocks(n: int, block_size: int) -> BlockPartition:
    """
    1..n を連続したブロックに分割する

    Args:
        n: 要素数
        block_size: ブロックサイズ n_c

    Returns:
        BlockPartition: ⌈n/block_size⌉ 個のブロック（最後のブロックは端数）
    """
    return split_sequence(list(range(1, n + 1)), block_size)


def split_sequence(vss: Sequence[int], block_size: int) -> BlockPartition:
    """任意の検体順序を先頭から block_size ずつのブロックに分割する"""
    if block_size < 1:
        raise ValueError(f"block_size must be at least 1, got {block_size}")
    if len(vss) < 1:
        raise ValueError("sequence must not be empty")
    blocks = tuple(tuple(vss[start:start + block_size]) for start in range(0, len(vss), block_size))
    return BlockPartition(block_size=block_size, blocks=blocks)


# ==================== 近傍操作 ====================


def apply_move(
    kind: Union[str, MoveKind],
    vss: Sequence[int],
    params: MoveParams,
    partition: Optional[BlockPartition] = None,
    inclusive: bool = False
) -> List[int]:
    """
    近傍操作を適用した新しい順序を返す

    params はINS/SWP/INVでは0始まりの位置の組、INBではブロック番号の組です。
    INVは既定で両端を除いた区間を反転し、inclusive=True で両端を含めます。
    INBでは後ろのブロック（先頭要素が後に現れる方）の全要素を、順序を
    保ったまま前のブロックの先頭要素の直前に移します。

    Args:
        kind: 近傍操作
        vss: 元の順序
        params: 位置またはブロック番号の組
        partition: INBのブロック分割
        inclusive: INVで両端を含めるか

    Returns:
        List[int]: 新しい順序

    Raises:
        ValueError: 位置・ブロックが同一または範囲外の場合

    Examples:
        >>> apply_move("swp", [1, 2, 3], (0, 2))
        [3, 2, 1]
        >>> apply_move("inv", [1, 2, 3, 4, 5], (0, 4))
        [1, 4, 3, 2, 5]
    """
    kind = as_move_kind(kind)
    first, second = int(params[0]), int(params[1])
    if first == second:
        raise ValueError(f"move needs two distinct positions or blocks, got {params}")
    a, b = min(first, second), max(first, second)
    seq = list(vss)

    if kind is MoveKind.INB:
        if partition is None:
            raise ValueError("INB requires a block partition")
        if not 0 <= a < b < partition.b:
            raise ValueError(f"block indices must be in [0, {partition.b}), got {params}")
        return _insert_block(seq, partition.blocks[a], partition.blocks[b])

    if not 0 <= a < b < len(seq):
        raise ValueError(f"positions must be in [0, {len(seq)}), got {params}")
    if kind is MoveKind.SWP:
        seq[a], seq[b] = seq[b], seq[a]
    elif kind is MoveKind.INS:
        seq.insert(a, seq.pop(b))
    elif kind is MoveKind.INV:
        if inclusive:
            seq[a:b + 1] = seq[a:b + 1][::-1]
        else:
            seq[a + 1:b] = seq[a + 1:b][::-1]
    return seq


def _insert_block(seq: List[int], block_a: Sequence[int], block_b: Sequence[int]) -> List[int]:
    position = {value: index for index, value in enumerate(seq)}
    first_a = min(position[v] for v in block_a)
    first_b = min(position[v] for v in block_b)
    front, back = (block_a, block_b) if first_a < first_b else (block_b, block_a)
    front_head = seq[min(first_a, first_b)]
    moving = set(back)
    back_in_order = [v for v in seq if v in moving]
    rest = [v for v in seq if v not in moving]
    anchor = rest.index(front_head)
    return rest[:anchor] + back_in_order + rest[anchor:]


def sample_move(
    kind: Union[str, MoveKind],
    size: SizeOrPartition,
    rng: np.random.Generator
) -> MoveParams:
    """
    順序を問わない2位置（INBでは2ブロック）を一様に選ぶ

    Args:
        kind: 近傍操作
        size: 要素数 n、またはINB用のブロック分割
        rng: 乱数生成器

    Returns:
        MoveParams: (小さい方, 大きい方)

    Raises:
        ValueError: n < 2（INBでは b < 2）の場合
    """
    kind = as_move_kind(kind)
    count = _pair_universe(kind, size)
    first = int(rng.integers(count))
    second = int(rng.integers(count - 1))
    if second >= first:
        second += 1
    return (min(first, second), max(first, second))


def _pair_universe(kind: MoveKind, size: SizeOrPartition) -> int:
    if kind is MoveKind.INB:
        if not isinstance(size, BlockPartition):
            raise ValueError("INB requires a block partition")
        if size.b < 2:
            raise ValueError(f"INB needs at least 2 blocks, got {size.b}")
        return size.b
    count = size.n if isinstance(size, BlockPartition) else int(size)
    if count < 2:
        raise ValueError(f"n must be at least 2, got {count}")
    return count


def enumerate_moves(kind: Union[str, MoveKind], size: SizeOrPartition) -> Iterator[MoveParams]:
    """すべての順序なしペアを列挙する"""
    kind = as_move_kind(kind)
    return combinations(range(_pair_universe(kind, size)), 2)


# ==================== 理論モーメント ====================


def _exact_moments(kind: MoveKind, n: int, b: Optional[int]) -> Tuple[Fraction, Fraction]:
    n = Fraction(n)
    if kind is MoveKind.SWP:
        mean = 2 * (2 * n - 1) / (3 * n * (n - 1))
        var = 8 * (n + 1) * (n - 2) / (9 * n ** 2 * (n - 1) ** 2)
    elif kind is MoveKind.INS:
        mean = 2 * (n + 1) / (3 * n * (n - 1))
        var = 2 * (n + 1) * (n - 2) / (9 * n ** 2 * (n - 1) ** 2)
    elif kind is MoveKind.INV:
        mean = (n - 2) * (n - 3) / (6 * n * (n - 1))
        var = (n + 1) * (n - 2) * (n - 3) * (7 * n - 18) / (180 * n ** 2 * (n - 1) ** 2)
    else:
        b = Fraction(b)
        mean = 2 * n * (b + 1) / (3 * b ** 2 * (n - 1))
        var = 2 * (b + 1) * (b - 2) * n ** 2 / (9 * b ** 4 * (n - 1) ** 2)
    return mean, var


def theoretical_moments(kind: Union[str, MoveKind], n: int, b: Optional[int] = None) -> DistanceMoments:
    """
    近傍間距離の期待値と分散の理論値を返す

    INVは両端を除いた反転、INBは等サイズで連続したブロックを前提とします。

    Args:
        kind: 近傍操作
        n: 要素数
        b: INBのブロック数

    Returns:
        DistanceMoments: 期待値と分散

    Raises:
        ValueError: n < 2、またはINBで b < 2 や n が b で割り切れない場合

    Examples:
        >>> round(theoretical_moments("swp", 100).mean, 4)
        0.0134
    """
    kind = as_move_kind(kind)
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if kind is MoveKind.INB:
        _check_blocks(n, b)
    mean, var = _exact_moments(kind, n, b)
    return DistanceMoments(mean=float(mean), variance=float(var))


def _check_blocks(n: int, b: Optional[int]) -> None:
    if b is None or b < 2:
        raise ValueError(f"b must be at least 2, got {b}")
    if n % b != 0:
        raise ValueError(f"n must be divisible by b for equal blocks, got n={n}, b={b}")


def scattered_block_bounds(n: int, b: int) -> Tuple[float, float, float, float]:
    """
    散在したブロックでのINB距離の期待値・分散の上下界

    Args:
        n: 要素数
        b: ブロック数

    Returns:
        Tuple[float, float, float, float]: (期待値下界, 期待値上界, 分散下界, 分散上界)

    Raises:
        ValueError: b < 2 または n が b で割り切れない場合
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    _check_blocks(n, b)
    n_, b_ = Fraction(n), Fraction(b)
    mean_upper = ((4 * b_ + 1) * n_ + (-2 * b_ + 1) * b_) / (3 * b_ ** 2 * (n_ - 1))
    mean_lower = (3 * n_ + (2 * b_ - 1) * b_) / (3 * b_ ** 2 * (n_ - 1))
    var_upper = (
        6 * (3 * b_ ** 2 + b_ - 2) * n_ ** 2
        - 6 * (b_ - 2) * (b_ + 1) * b_ * n_
        - 2 * (5 * b_ + 2) * (b_ + 1) * b_ ** 2
    ) / (9 * b_ ** 4 * (n_ - 1) ** 2)
    var_lower = (
        (-80 * b_ ** 4 - 4 * b_ ** 3 - 89 * b_ ** 2 + b_ + 6) * n_ ** 2
        + 5 * (-16 * b_ ** 2 + 4 * b_ + 5) * (b_ - 1) * b_ ** 2 * n_
        + 5 * (4 * b_ ** 4 - 8 * b_ ** 3 + 5 * b_ ** 2 + b_ - 1) * b_ ** 2
    ) / (45 * (n_ - 1) ** 2 * b_ ** 5 * (b_ - 1))
    return (
        float(mean_lower),
        float(mean_upper),
        float(max(Fraction(0), var_lower)),
        float(min(Fraction(1), var_upper)),
    )


# ==================== 経験的モーメント ====================


def _reference(size: SizeOrPartition) -> List[int]:
    if isinstance(size, BlockPartition):
        return [v for block in size.blocks for v in block]
    return list(range(1, int(size) + 1))


def _batched_distances(neighbors: List[List[int]], reference: List[int]) -> np.ndarray:
    """参照順序からの距離をまとめて計算する"""
    n = len(reference)
    rank = {value: index for index, value in enumerate(reference)}
    table = np.array([[rank[v] for v in seq] for seq in neighbors], dtype=np.int32)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    counts = ((table[:, :, None] > table[:, None, :]) & upper).sum(axis=(1, 2))
    return counts / (n * (n - 1) / 2)


def empirical_moments(
    kind: Union[str, MoveKind],
    size: SizeOrPartition,
    samples: int = 10_000,
    seed: int = 0,
    exhaustive: bool = False,
    inclusive: bool = False
) -> DistanceMoments:
    """
    固定した参照順序から近傍へのJPR距離の標本平均・分散を求める

    参照順序は 1..n（INBでは分割のブロック順）です。exhaustive=True の場合は
    全ペアを1回ずつ列挙し、母分散を返します。

    Args:
        kind: 近傍操作
        size: 要素数、またはINB用のブロック分割
        samples: サンプル数（exhaustive=Falseの場合）
        seed: 乱数シード
        exhaustive: 全列挙するか
        inclusive: INVで両端を含めるか

    Returns:
        DistanceMoments: 標本平均と分散
    """
    kind = as_move_kind(kind)
    if kind is MoveKind.INB and not isinstance(size, BlockPartition):
        raise ValueError("INB requires a block partition")
    if not exhaustive and samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    reference = _reference(size)
    n = len(reference)
    partition = size if isinstance(size, BlockPartition) else None

    if exhaustive:
        moves: Iterator[MoveParams] = enumerate_moves(kind, size)
        total = None
    else:
        universe = _pair_universe(kind, size)
        rng = np.random.default_rng(seed)
        first = rng.integers(universe, size=samples)
        second = rng.integers(universe - 1, size=samples)
        second = second + (second >= first)
        moves = zip(np.minimum(first, second).tolist(), np.maximum(first, second).tolist())
        total = samples

    chunk = max(1, _CHUNK_CELLS // (n * n))
    distances: List[np.ndarray] = []
    pending: List[List[int]] = []
    for params in moves:
        pending.append(apply_move(kind, reference, params, partition=partition, inclusive=inclusive))
        if len(pending) >= chunk:
            distances.append(_batched_distances(pending, reference))
            pending = []
    if pending:
        distances.append(_batched_distances(pending, reference))

    values = np.concatenate(distances)
    logger.debug(f"経験的モーメント: kind={kind.value}, n={n}, samples={total or len(values)}")
    return DistanceMoments(mean=float(values.mean()), variance=float(values.var()), samples=len(values))


def moments_table(
    kinds: Sequence[Union[str, MoveKind]],
    sizes: Sequence[int],
    block_size: int = 4,
    samples: int = 0,
    seed: int = 0
) -> pd.DataFrame:
    """
    理論値と（samples > 0 の場合）経験値を並べた表を作る

    Returns:
        pd.DataFrame: kind, n, b, theory_mean, theory_var, empirical_mean, empirical_var
    """
    rows = []
    for n in sizes:
        for raw_kind in kinds:
            kind = as_move_kind(raw_kind)
            b = None
            size: SizeOrPartition = n
            if kind is MoveKind.INB:
                partition = split_blocks(n, block_size)
                b = partition.b
                size = partition
            theory = theoretical_moments(kind, n, b)
            row = {
                "kind": kind.value,
                "n": n,
                "b": b,
                "theory_mean": theory.mean,
                "theory_var": theory.variance,
            }
            if samples > 0:
                observed = empirical_moments(kind, size, samples=samples, seed=seed)
                row["empirical_mean"] = observed.mean
                row["empirical_var"] = observed.variance
            rows.append(row)
    return pd.DataFrame(rows)

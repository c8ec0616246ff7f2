"""
labsched ランドスケープ解析

このモジュールは以下の機能を提供します：
- 適応度距離相関（FDC）
- ランダムウォークと自己相関 AC(s)
- 局所解ネットワーク（LON）の構築と複数実行ログのマージ
- 同一適応度の連結ノードをまとめるプラトー圧縮
"""

import hashlib
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from config import Config
from .errors import DegenerateInputError
from .models import FdcSample, Instance, MoveKind, SearchResult, WalkSeries
from .neighborhoods import apply_move, as_move_kind, jpr_distance, sample_move, split_sequence
from .schedule_decoder import decode_fabm
from .search_engines import run_algorithm

logger = logging.getLogger(__name__)


# ==================== FDC ====================


def fdc(samples: Sequence[FdcSample]) -> float:
    """
    適応度距離相関を計算する

    母集団の標準偏差（除数 m）で正規化したピアソン相関です。

    Args:
        samples: FDC標本

    Returns:
        float: [−1, 1] の相関係数

    Raises:
        DegenerateInputError: 標本が2未満、または適応度・距離の分散がゼロの場合

    Examples:
        >>> fdc([FdcSample(1.0, 0.1), FdcSample(2.0, 0.2), FdcSample(3.0, 0.3)])
        1.0
    """
    if len(samples) < 2:
        raise DegenerateInputError(f"FDC needs at least 2 samples, got {len(samples)}")
    fitness = np.array([s.fitness for s in samples], dtype=float)
    distance = np.array([s.distance for s in samples], dtype=float)
    sigma_f = fitness.std()
    sigma_d = distance.std()
    if sigma_f == 0 or sigma_d == 0:
        raise DegenerateInputError("fitness and distance must both have non-zero variance")
    covariance = np.mean((fitness - fitness.mean()) * (distance - distance.mean()))
    return float(np.clip(covariance / (sigma_f * sigma_d), -1.0, 1.0))


def fdc_samples_from_run(result: SearchResult) -> List[FdcSample]:
    """
    探索で受理された解から、最良解を基準にしたFDC標本を作る

    Args:
        result: record_accepted=True で実行した探索結果

    Returns:
        List[FdcSample]: 受理された解ごとの (MTAT, 最良解までのJPR距離)
    """
    reference = result.best_vss
    return [FdcSample(fitness=mtat, distance=jpr_distance(vss, reference)) for vss, mtat in result.accepted]


# ==================== 自己相関 ====================


def random_walk(
    inst: Instance,
    kind: Union[str, MoveKind],
    length: int,
    seed: int,
    block_size: int = 4
) -> WalkSeries:
    """
    ランダムウォークに沿ったMTATの系列を記録する

    ランダムな順列から始め、一様に選んだ近傍操作を length−1 回適用します。
    デコードは lowest-index で決定的に行い、INBのブロック分割は開始時に固定します。

    Raises:
        ValueError: length < 2 または検体数が2未満の場合
    """
    if length < 2:
        raise ValueError(f"length must be at least 2, got {length}")
    kind = as_move_kind(kind)
    rng = np.random.default_rng(seed)
    vss = [inst.specimen_ids[k] for k in rng.permutation(inst.n)]
    partition = split_sequence(vss, min(block_size, max(1, inst.n // 2)))

    values = [decode_fabm(inst, vss, "lowest-index").mtat]
    for _ in range(length - 1):
        if kind is MoveKind.INB:
            vss = apply_move(kind, vss, sample_move(kind, partition, rng), partition=partition)
        else:
            vss = apply_move(kind, vss, sample_move(kind, len(vss), rng))
        values.append(decode_fabm(inst, vss, "lowest-index").mtat)
    return WalkSeries(values=tuple(values), kind=kind, seed=seed)


def autocorrelation(series: Union[WalkSeries, Sequence[float]], s: int) -> float:
    """
    ラグ s の自己相関 AC(s)

    AC(s) = Σ_{t=1}^{m−s} (f_t − f̄)(f_{t+s} − f̄) / (σ_f² (m − s)) で、σ_f² は
    母分散です。AC(0) = 1 となります。この正規化では大きなラグの絶対値が
    m/(m−s) まで取り得ます。

    Raises:
        ValueError: s が [0, m) の範囲外の場合
        DegenerateInputError: 系列が定数の場合

    Examples:
        >>> autocorrelation([1.0, 2.0, 3.0], 0)
        1.0
    """
    values = np.asarray(series.values if isinstance(series, WalkSeries) else series, dtype=float)
    m = len(values)
    if not 0 <= s < m:
        raise ValueError(f"lag must be in [0, {m}), got {s}")
    variance = values.var()
    if variance == 0:
        raise DegenerateInputError("autocorrelation of a constant series is undefined")
    deviation = values - values.mean()
    return float(np.dot(deviation[:m - s], deviation[s:]) / (variance * (m - s)))


def autocorrelation_table(series: Union[WalkSeries, Sequence[float]], lags: Iterable[int]) -> pd.DataFrame:
    """複数ラグの AC(s) を lag, ac 列の表にする"""
    rows = [{"lag": int(s), "ac": autocorrelation(series, int(s))} for s in lags]
    return pd.DataFrame(rows, columns=["lag", "ac"])


def correlation_length(ac1: float) -> float:
    """相関長 −1/ln|AC(1)|（AC(1)=0 で0、|AC(1)|≥1 で無限大）"""
    magnitude = abs(ac1)
    if magnitude == 0:
        return 0.0
    if magnitude >= 1:
        return math.inf
    return -1.0 / math.log(magnitude)


# ==================== 局所解ネットワーク ====================


def solution_key(vss: Sequence[int], fitness: float, hash_min_size: int = 100) -> str:
    """
    LONノードのキー

    n < hash_min_size では "3-1-6-4-5-2" のような順列そのもの、それ以上では
    順列と適応度の128ビットBLAKE2bハッシュ（16進32桁）です。
    """
    if len(vss) < hash_min_size:
        return "-".join(str(int(i)) for i in vss)
    digest = hashlib.blake2b(digest_size=16)
    digest.update(np.asarray(vss, dtype=np.int64).tobytes())
    digest.update(repr(float(fitness)).encode())
    return digest.hexdigest()


@dataclass
class RunLog:
    """
    1回の実行で記録した局所解とその遷移

    Attributes:
        fitness: ノードキー → MTAT
        hits: ノードキー → 出現回数
        edges: (遷移元, 遷移先) → 回数
    """
    fitness: Dict[str, float] = field(default_factory=dict)
    hits: Counter = field(default_factory=Counter)
    edges: Counter = field(default_factory=Counter)

    @classmethod
    def from_optima(cls, optima: Sequence[Tuple[Sequence[int], float]], hash_min_size: int = 100) -> "RunLog":
        log = cls()
        previous = None
        for vss, mtat in optima:
            key = solution_key(vss, mtat, hash_min_size)
            log.fitness[key] = float(mtat)
            log.hits[key] += 1
            if previous is not None and previous != key:
                log.edges[(previous, key)] += 1
            previous = key
        return log


@dataclass
class LonGraph:
    """
    局所解ネットワーク

    ノード属性は fitness（MTAT）、hits（出現回数）、in_weight（重み付き入次数）、
    エッジ属性は weight（遷移回数）です。自己ループは持ちません。
    """
    graph: nx.DiGraph

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    def fitness(self, key: str) -> float:
        return self.graph.nodes[key]["fitness"]

    def in_weight(self, key: str) -> int:
        return self.graph.nodes[key]["in_weight"]


def merge_run_logs(logs: Iterable[RunLog]) -> LonGraph:
    """
    実行ログを多重集合として合併し、LONを作る

    重複したノード・エッジは1つにまとめて回数を合計します。ノードとエッジは
    キー順に追加するため、結果はログの順序に依存しません。
    """
    fitness: Dict[str, float] = {}
    hits: Counter = Counter()
    edges: Counter = Counter()
    for log in logs:
        fitness.update(log.fitness)
        hits.update(log.hits)
        edges.update(log.edges)

    graph = nx.DiGraph()
    for key in sorted(fitness):
        graph.add_node(key, fitness=fitness[key], hits=hits[key], in_weight=0)
    for (source, target) in sorted(edges):
        if source == target:
            continue
        graph.add_edge(source, target, weight=edges[(source, target)])
        graph.nodes[target]["in_weight"] += edges[(source, target)]
    return LonGraph(graph)


def lon_defaults(inst: Instance, config: Optional[Config] = None) -> Tuple[int, int]:
    """インスタンス規模に応じた (実行回数 N, 停滞上限 M) の既定値"""
    config = config or Config()
    if inst.n <= config.LON_TOY_MAX_SIZE:
        return config.LON_TOY_RUNS, config.LON_TOY_STAGNATION
    return config.LON_RUNS, config.LON_STAGNATION


def _lon_run(task: tuple) -> RunLog:
    inst, algo, nbhd, budget, stagnation, seed, config, neutral = task
    result = run_algorithm(
        inst, algo, nbhd, budget, seed,
        config=config, stagnation=stagnation, neutral_optima=neutral,
    )
    return RunLog.from_optima(result.optima_log, config.LON_HASH_MIN_SIZE)


def build_lon(
    inst: Instance,
    algo: str = "sa",
    nbhd: str = "swp",
    runs: Optional[int] = None,
    stagnation: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    mode: Optional[str] = None,
    budget: Optional[int] = None,
    config: Optional[Config] = None
) -> LonGraph:
    """
    局所解ネットワークを構築する

    探索を runs 回実行し、各実行は stagnation 回連続で改善がなければ終了します。
    最良解の厳密な改善をノード、実行内で連続する改善の組をエッジとして記録し、
    全実行を合併します。mode="neutral" では同値の最良解の移動も記録します。

    Args:
        inst: インスタンス
        algo: アルゴリズムID
        nbhd: 近傍ID
        runs: 実行回数 N（省略時は規模に応じた既定値）
        stagnation: 停滞上限 M（省略時は規模に応じた既定値）
        seed: マスターシード（各実行のシードはここから導出）
        workers: 並列プロセス数
        mode: "strict" | "neutral"（省略時は設定値）
        budget: 1実行あたりの評価回数上限（省略時は max(EVAL_BUDGET, 10·M)）
        config: 設定

    Returns:
        LonGraph: 局所解ネットワーク

    Raises:
        ValueError: runs < 1、stagnation < 1、または未知のモードの場合
    """
    config = config or Config()
    default_runs, default_stagnation = lon_defaults(inst, config)
    runs = default_runs if runs is None else runs
    stagnation = default_stagnation if stagnation is None else stagnation
    mode = mode or config.LON_MODE
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    if stagnation < 1:
        raise ValueError(f"stagnation must be at least 1, got {stagnation}")
    if mode not in ("strict", "neutral"):
        raise ValueError(f"mode must be strict or neutral, got {mode}")
    budget = budget or max(config.EVAL_BUDGET, 10 * stagnation)

    run_seeds = np.random.SeedSequence(seed).generate_state(runs, dtype=np.uint64)
    tasks = [
        (inst, algo, nbhd, budget, stagnation, int(s), config, mode == "neutral")
        for s in run_seeds
    ]
    logger.info(f"{inst.name}: LON構築を開始します (N={runs}, M={stagnation}, mode={mode}, workers={workers})")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            logs = list(executor.map(_lon_run, tasks))
    else:
        logs = [_lon_run(task) for task in tasks]

    lon = merge_run_logs(logs)
    logger.info(f"{inst.name}: LONを構築しました ({lon.node_count}ノード, {lon.edge_count}エッジ)")
    return lon


# ==================== プラトー ====================


@dataclass
class PlateauGraph:
    """
    プラトー圧縮の結果

    Attributes:
        lon: 元の局所解ネットワーク
        plateaus: プラトーごとのノードキー（最良適応度順）
        sinks: プラトーごとのシンク判定（より良いプラトーへの出辺がない）
        plateau_of: ノードキー → プラトー番号
    """
    lon: LonGraph
    plateaus: List[Tuple[str, ...]]
    sinks: List[bool]
    plateau_of: Dict[str, int]

    @property
    def plateau_count(self) -> int:
        return len(self.plateaus)

    @property
    def plateau_average_size(self) -> float:
        if not self.plateaus:
            return 0.0
        return self.lon.node_count / len(self.plateaus)

    @property
    def sink_count(self) -> int:
        return sum(self.sinks)

    def fitness(self, plateau: int) -> float:
        return self.lon.fitness(self.plateaus[plateau][0])


def _same_fitness(a: float, b: float, tolerance: float) -> bool:
    return math.isclose(a, b, rel_tol=tolerance, abs_tol=0.0)


def compress_plateaus(lon: LonGraph, tolerance: float = 1e-6) -> PlateauGraph:
    """
    同じ適応度で辺によって連結したノードをプラトーにまとめる

    連結性は辺の向きを無視して判定します。より良い（MTATが小さい）
    プラトーへの出辺を持たないプラトーをシンク、持つものをアトラクタとします。

    Examples:
        5ノードのうち2ノードが同じ適応度で連結している場合、
        プラトー数4、平均サイズ1.25になります。
    """
    graph = lon.graph
    level = nx.Graph()
    level.add_nodes_from(graph.nodes)
    for source, target in graph.edges:
        if _same_fitness(graph.nodes[source]["fitness"], graph.nodes[target]["fitness"], tolerance):
            level.add_edge(source, target)

    components = [tuple(sorted(c)) for c in nx.connected_components(level)]
    components.sort(key=lambda c: (graph.nodes[c[0]]["fitness"], c[0]))
    plateau_of = {key: index for index, members in enumerate(components) for key in members}

    sinks = []
    for members in components:
        own = graph.nodes[members[0]]["fitness"]
        improvable = any(
            graph.nodes[target]["fitness"] < own
            and not _same_fitness(graph.nodes[target]["fitness"], own, tolerance)
            for key in members
            for target in graph.successors(key)
        )
        sinks.append(not improvable)

    result = PlateauGraph(lon=lon, plateaus=components, sinks=sinks, plateau_of=plateau_of)
    logger.debug(
        f"プラトー圧縮: {result.plateau_count}プラトー, "
        f"平均サイズ{result.plateau_average_size:.3f}, シンク{result.sink_count}"
    )
    return result


def plateau_stats(plateaus: PlateauGraph) -> pd.DataFrame:
    """プラトー統計を1行の表にする（CLIのCSV出力用）"""
    return pd.DataFrame([{
        "nodes": plateaus.lon.node_count,
        "edges": plateaus.lon.edge_count,
        "plateaus": plateaus.plateau_count,
        "plateau_average_size": plateaus.plateau_average_size,
        "sinks": plateaus.sink_count,
    }])

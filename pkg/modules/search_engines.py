"""
labsched 探索アルゴリズム

このモジュールは以下の機能を提供します：
- Evaluator: デコード回数の予算管理と最良解の履歴
- NEH / NEH-B 構築法
- 焼きなまし法（SA）と固定温度法（FTA）
- 投票による解の結合とスキャッターサーチ（SS）
- メタラマルク学習による近傍選択
- インスタンス規模による近傍の自動選択（APS）
"""

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from .errors import BudgetExhausted
from .models import (
    AnnealConfig,
    BlockPartition,
    Instance,
    MlState,
    MoveKind,
    Schedule,
    ScatterConfig,
    SearchResult,
)
from .neighborhoods import apply_move, as_move_kind, jpr_distance, sample_move, split_sequence
from .schedule_decoder import decode_fabm, decode_partial

logger = logging.getLogger(__name__)

ALGORITHMS = ("sa", "fta", "ss", "neh", "nehb")
NEIGHBORHOODS = ("ins", "swp", "inv", "inb", "ml", "auto")
ARMS: Tuple[MoveKind, ...] = tuple(MoveKind)


# ==================== 評価 ====================


class Evaluator:
    """
    デコード呼び出しを数え、予算と最良解の履歴を管理する

    評価のたびに最良解を更新し、厳密な改善を (評価回数, MTAT) の履歴と
    局所解ログに記録します。予算または停滞上限に達した後の評価要求は
    BudgetExhausted を送出します。

    Attributes:
        budget: 評価回数の上限
        stagnation: 改善のない連続評価回数の上限（Noneで無制限）
        evaluations: 使用した評価回数
    """

    def __init__(
        self,
        inst: Instance,
        budget: int,
        tie_policy: str = "seeded-random",
        tie_seed: int = 0,
        stagnation: Optional[int] = None,
        record_accepted: bool = False,
        neutral_optima: bool = False
    ):
        if budget < 1:
            raise ValueError(f"budget must be at least 1, got {budget}")
        if stagnation is not None and stagnation < 1:
            raise ValueError(f"stagnation must be at least 1, got {stagnation}")
        self.inst = inst
        self.budget = budget
        self.tie_policy = tie_policy
        self.tie_seed = tie_seed
        self.stagnation = stagnation
        self.record_accepted_solutions = record_accepted
        self.neutral_optima = neutral_optima

        self.evaluations = 0
        self.best_vss: Optional[Tuple[int, ...]] = None
        self.best_mtat = math.inf
        self.trace: List[Tuple[int, float]] = []
        self.optima_log: List[Tuple[Tuple[int, ...], float]] = []
        self.accepted: List[Tuple[Tuple[int, ...], float]] = []
        self._since_improvement = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.evaluations

    @property
    def exhausted(self) -> bool:
        if self.evaluations >= self.budget:
            return True
        return self.stagnation is not None and self._since_improvement >= self.stagnation

    def _spend(self) -> None:
        if self.exhausted:
            raise BudgetExhausted()
        self.evaluations += 1

    def evaluate(self, vss: Sequence[int]) -> float:
        """全検体の順序をデコードしてMTATを返す"""
        self._spend()
        mtat = decode_fabm(self.inst, vss, self.tie_policy, self.tie_seed).mtat
        key = tuple(int(i) for i in vss)
        if mtat < self.best_mtat:
            self.best_mtat = mtat
            self.best_vss = key
            self.trace.append((self.evaluations, mtat))
            self.optima_log.append((key, mtat))
            self._since_improvement = 0
        else:
            self._since_improvement += 1
            if self.neutral_optima and mtat == self.best_mtat and key != self.best_vss:
                self.best_vss = key
                self.optima_log.append((key, mtat))
        return mtat

    def evaluate_partial(self, vss: Sequence[int]) -> Schedule:
        """部分順序をデコードする（最良解の履歴には含めない）"""
        self._spend()
        return decode_partial(self.inst, vss, self.tie_policy, self.tie_seed)

    def record_accepted(self, vss: Sequence[int], mtat: float) -> None:
        if self.record_accepted_solutions:
            self.accepted.append((tuple(vss), mtat))

    def result(self, started_wall: float, started_cpu: float, stats: Optional[dict] = None) -> SearchResult:
        """現在の状態から SearchResult を作る"""
        return SearchResult(
            best_vss=list(self.best_vss or ()),
            best_mtat=self.best_mtat,
            trace=list(self.trace),
            optima_log=list(self.optima_log),
            evaluations=self.evaluations,
            wall_seconds=time.perf_counter() - started_wall,
            cpu_seconds=time.process_time() - started_cpu,
            accepted=list(self.accepted),
            stats=dict(stats or {}),
        )


# ==================== 構築法 ====================


def neh_priority(inst: Instance, block_size: int, seed: int) -> List[Tuple[int, ...]]:
    """
    NEH-Bの挿入順（ブロックを合計処理時間の降順に並べたもの）

    シード付きの乱数順列をブロックに分割し、安定ソートで並べ替えるため、
    シードは合計処理時間が等しいブロックの順序と分割の仕方だけに影響します。
    """
    if block_size < 1:
        raise ValueError(f"block_size must be at least 1, got {block_size}")
    rng = np.random.default_rng(seed)
    base = [inst.specimen_ids[k] for k in rng.permutation(inst.n)]
    partition = split_sequence(base, block_size)
    totals = [sum(inst.total_processing_time(i) for i in block) for block in partition.blocks]
    order = sorted(range(partition.b), key=lambda k: -totals[k])
    return [partition.blocks[k] for k in order]


def neh_b(
    inst: Instance,
    block_size: int = 4,
    idle_tiebreak: bool = True,
    seed: int = 0,
    evaluator: Optional[Evaluator] = None
) -> List[int]:
    """
    ブロック型NEH（NEH-B）で検体順序を構築する

    ブロックを合計処理時間の降順に1つずつ取り出し、配置済みブロックの間の
    位置のうち部分スケジュールのMTATが最小になる位置に挿入します。
    idle_tiebreak=True の場合、MTATが等しい位置は装置の遊休時間合計が
    小さい方を選びます。block_size=1 かつ idle_tiebreak=False で
    通常のNEHになります。デコード回数は b(b+1)/2 以下です。

    Args:
        inst: インスタンス
        block_size: ブロックサイズ
        idle_tiebreak: 遊休時間によるタイブレークを使うか
        seed: 分割と同点ブロックの順序を決めるシード
        evaluator: デコード回数を数える Evaluator（省略時は内部で作成）

    Returns:
        List[int]: 構築した検体順序
    """
    ranked = neh_priority(inst, block_size, seed)
    b = len(ranked)
    if evaluator is None:
        evaluator = Evaluator(inst, budget=max(1, b * (b + 1) // 2), tie_policy="lowest-index")

    placed: List[Tuple[int, ...]] = [ranked[0]]
    for block in ranked[1:]:
        best_key = None
        best_slot = 0
        for slot in range(len(placed) + 1):
            candidate = placed[:slot] + [block] + placed[slot:]
            sched = evaluator.evaluate_partial([i for blk in candidate for i in blk])
            key = (sched.total_tat, sched.total_idle_time if idle_tiebreak else 0)
            if best_key is None or key < best_key:
                best_key = key
                best_slot = slot
        placed.insert(best_slot, block)
    return [i for blk in placed for i in blk]


def neh(inst: Instance, seed: int = 0, evaluator: Optional[Evaluator] = None) -> List[int]:
    """通常のNEH（ブロックサイズ1、遊休時間タイブレークなし）"""
    return neh_b(inst, block_size=1, idle_tiebreak=False, seed=seed, evaluator=evaluator)


# ==================== メタラマルク学習 ====================


def utilizing_probabilities(rewards: Sequence[float]) -> Tuple[float, ...]:
    """報酬に比例した利用確率（報酬がすべて0なら一様）"""
    total = float(sum(rewards))
    if total <= 0:
        return tuple(1.0 / len(rewards) for _ in rewards)
    return tuple(float(r) / total for r in rewards)


def ml_select(state: MlState, rng: np.random.Generator) -> MoveKind:
    """
    次に使う近傍を選ぶ

    訓練段階では未訓練の腕を順に返し、以降は利用確率によるルーレット選択です。
    """
    if state.training:
        return ARMS[state.trained % len(ARMS)]
    return ARMS[int(rng.choice(len(ARMS), p=np.asarray(state.probabilities)))]


def ml_update(state: MlState, kind: MoveKind, mtat_before: float, mtat_after: float, theta: int) -> MlState:
    """
    使用した近傍の報酬を更新する

    報酬の増分は |MTAT_before − MTAT_after| / θ です。

    Args:
        state: 現在の学習状態
        kind: 使用した近傍
        mtat_before: θ回の試行前の現在解のMTAT
        mtat_after: θ回の試行後の現在解のMTAT
        theta: 試行回数

    Returns:
        MlState: 更新後の状態

    Raises:
        ValueError: theta < 1 の場合
    """
    if theta < 1:
        raise ValueError(f"theta must be at least 1, got {theta}")
    rewards = list(state.rewards)
    rewards[ARMS.index(as_move_kind(kind))] += abs(mtat_before - mtat_after) / theta
    trained = state.trained + 1 if state.training else state.trained
    return MlState(
        rewards=tuple(rewards),
        probabilities=utilizing_probabilities(rewards),
        training=state.training and trained < len(ARMS),
        trained=trained,
    )


# ==================== 焼きなまし法 ====================


def acceptance_probability(delta: float, temperature: float) -> float:
    """メトロポリス基準 min{1, exp(−ΔE/T)}"""
    if delta <= 0:
        return 1.0
    if temperature <= 0:
        return 0.0
    return math.exp(-delta / temperature)


class SimulatedAnnealing:
    """
    焼きなまし法

    各温度で θ 回の近傍試行を行い、ブロックごとに温度を λ 倍します。
    λ = 1 で固定温度法（FTA）になります。スキャッターサーチの改善フェーズ
    では温度と学習状態を保持したまま1ブロックずつ呼び出されます。

    Attributes:
        theta: 各温度での試行数
        temperature: 現在の温度
        ml_state: メタラマルク学習の状態（近傍が"ml"の場合）
    """

    def __init__(self, inst: Instance, cfg: AnnealConfig, evaluator: Evaluator, rng: np.random.Generator):
        self.inst = inst
        self.cfg = cfg
        self.evaluator = evaluator
        self.rng = rng
        self.theta = cfg.theta or max(1, math.ceil(inst.n / cfg.block_size))
        self.block_size = min(cfg.block_size, max(1, inst.n // 2))
        self.temperature = cfg.initial_temperature
        self.ml_state = MlState() if cfg.neighborhood == "ml" else None
        self.partition: Optional[BlockPartition] = None
        self.uphill_accepted = 0
        self.ml_history: List[str] = []

    def _kind(self) -> MoveKind:
        if self.ml_state is None:
            return as_move_kind(self.cfg.neighborhood)
        return ml_select(self.ml_state, self.rng)

    def reset_partition(self, vss: Sequence[int]) -> None:
        self.partition = split_sequence(list(vss), self.block_size)

    def neighbor(self, vss: List[int], kind: MoveKind) -> List[int]:
        """現在解から近傍解を1つ作る"""
        if kind is MoveKind.INB:
            if self.cfg.block_mode == "resplit" or self.partition is None:
                self.reset_partition(vss)
            params = sample_move(kind, self.partition, self.rng)
            return apply_move(kind, vss, params, partition=self.partition)
        params = sample_move(kind, len(vss), self.rng)
        return apply_move(kind, vss, params, inclusive=self.cfg.inv_inclusive)

    def calibrate(self, vss: List[int], mtat: float) -> float:
        """
        初期温度を推定する

        近傍の平均|ΔE|を ln 2 で割った値（上り移動の初期受理率が約50%）です。
        推定に使ったデコードも予算に数えます。
        """
        deltas = []
        kinds = ARMS if self.ml_state is not None else (as_move_kind(self.cfg.neighborhood),)
        samples = min(self.cfg.t0_samples, max(0, self.evaluator.remaining - 1))
        for k in range(samples):
            candidate = self.neighbor(vss, kinds[k % len(kinds)])
            deltas.append(abs(self.evaluator.evaluate(candidate) - mtat))
        mean_delta = float(np.mean(deltas)) if deltas else 0.0
        self.temperature = mean_delta / math.log(2) if mean_delta > 0 else 1.0
        logger.debug(f"初期温度を推定しました: T0={self.temperature:.4f} ({len(deltas)}サンプル)")
        return self.temperature

    def run_block(self, vss: List[int], mtat: float) -> Tuple[List[int], float]:
        """現在の温度で θ 回の試行を行い、1ブロック後に冷却する"""
        kind = self._kind()
        before = mtat
        for _ in range(self.theta):
            candidate = self.neighbor(vss, kind)
            value = self.evaluator.evaluate(candidate)
            delta = value - mtat
            if delta <= 0:
                accepted = True
            else:
                accepted = self.rng.random() < acceptance_probability(delta, self.temperature)
                if accepted:
                    self.uphill_accepted += 1
            if accepted:
                vss, mtat = candidate, value
                self.evaluator.record_accepted(vss, mtat)
        if self.ml_state is not None:
            self.ml_state = ml_update(self.ml_state, kind, before, mtat, self.theta)
            self.ml_history.append(kind.value)
        self.temperature *= self.cfg.cooling
        return vss, mtat

    def stats(self) -> dict:
        stats = {"uphill_accepted": self.uphill_accepted, "theta": self.theta}
        if self.ml_state is not None:
            stats["ml_history"] = list(self.ml_history)
            stats["ml_probabilities"] = list(self.ml_state.probabilities)
        return stats


def anneal(
    inst: Instance,
    cfg: AnnealConfig,
    initial: Optional[Sequence[int]] = None,
    evaluator: Optional[Evaluator] = None
) -> SearchResult:
    """
    焼きなまし法を実行する

    ランダムな順列（または initial）から開始し、評価回数の上限まで
    θ 回ごとに温度を下げながら探索します。

    Args:
        inst: インスタンス
        cfg: 焼きなまし法の設定
        initial: 初期解（省略時はランダム）
        evaluator: 共有する Evaluator（省略時は cfg.budget で作成）

    Returns:
        SearchResult: 探索結果
    """
    started_wall, started_cpu = time.perf_counter(), time.process_time()
    rng = np.random.default_rng(cfg.seed)
    if evaluator is None:
        evaluator = Evaluator(inst, cfg.budget)
    engine = SimulatedAnnealing(inst, cfg, evaluator, rng)

    vss = list(initial) if initial is not None else [inst.specimen_ids[k] for k in rng.permutation(inst.n)]
    try:
        mtat = evaluator.evaluate(vss)
        if inst.n >= 2:
            engine.reset_partition(vss)
            if engine.temperature is None:
                engine.calibrate(vss, mtat)
            while True:
                vss, mtat = engine.run_block(vss, mtat)
    except BudgetExhausted:
        pass

    result = evaluator.result(started_wall, started_cpu, engine.stats())
    logger.debug(f"{inst.name}: SA完了 best={result.best_mtat:.2f}, 評価回数={result.evaluations}")
    return result


# ==================== 解の結合 ====================


@dataclass(frozen=True)
class CombinationStep:
    """
    結合の1位置分の記録

    Attributes:
        position: 位置（0始まり）
        candidates: 親1と親2の候補
        departures: 各親を選んだ場合の重みからのl1乖離（候補が同じ場合None）
        donor: 採用した親（0または1、候補が同じ場合None）
    """
    position: int
    candidates: Tuple[int, int]
    departures: Optional[Tuple[float, float]]
    donor: Optional[int]


@dataclass(frozen=True)
class Combination:
    """結合結果と投票の記録"""
    trial: List[int]
    weights: Tuple[float, float]
    steps: Tuple[CombinationStep, ...]


def combine_with_trace(
    p1: Sequence[int],
    p2: Sequence[int],
    mtat1: float,
    mtat2: float,
    rng: Optional[np.random.Generator] = None
) -> Combination:
    """
    投票に基づくmin-max構成で2つの親から試行解を作る

    重みは w = [mtat2, mtat1] / (mtat1 + mtat2) で、良い親ほど大きくなります。
    左から順に、両親の未配置の先頭要素が同じならそのまま採用し、異なれば
    投票を正規化したベクトルと w のl1乖離が小さくなる親の要素を採用します。
    乖離が等しい場合は乱数で決めます。

    Raises:
        ValueError: 長さや要素集合が異なる、または目的値が正でない場合
    """
    if len(p1) != len(p2):
        raise ValueError(f"parents must have the same length, got {len(p1)} and {len(p2)}")
    if sorted(p1) != sorted(p2):
        raise ValueError("parents must be permutations of the same id set")
    if mtat1 <= 0 or mtat2 <= 0:
        raise ValueError(f"objective values must be positive, got {mtat1}, {mtat2}")
    rng = rng if rng is not None else np.random.default_rng(0)

    weights = np.array([mtat2, mtat1], dtype=float) / (mtat1 + mtat2)
    votes = np.zeros(2)
    parents = (list(p1), list(p2))
    cursor = [0, 0]
    placed = set()
    trial: List[int] = []
    steps: List[CombinationStep] = []

    for position in range(len(p1)):
        candidates = []
        for k, parent in enumerate(parents):
            while parent[cursor[k]] in placed:
                cursor[k] += 1
            candidates.append(parent[cursor[k]])

        if candidates[0] == candidates[1]:
            chosen = candidates[0]
            steps.append(CombinationStep(position, (candidates[0], candidates[1]), None, None))
        else:
            departures = []
            for k in range(2):
                trial_votes = votes.copy()
                trial_votes[k] += 1
                departures.append(float(np.abs(trial_votes / trial_votes.sum() - weights).sum()))
            if math.isclose(departures[0], departures[1], rel_tol=1e-12, abs_tol=1e-15):
                donor = int(rng.integers(2))
            else:
                donor = 0 if departures[0] < departures[1] else 1
            votes[donor] += 1
            chosen = candidates[donor]
            steps.append(CombinationStep(position, (candidates[0], candidates[1]), (departures[0], departures[1]), donor))

        trial.append(chosen)
        placed.add(chosen)

    return Combination(trial=trial, weights=(float(weights[0]), float(weights[1])), steps=tuple(steps))


def combine_solutions(
    p1: Sequence[int],
    p2: Sequence[int],
    mtat1: float,
    mtat2: float,
    rng: Optional[np.random.Generator] = None
) -> List[int]:
    """2つの親から試行解を作る（記録なし版）"""
    return combine_with_trace(p1, p2, mtat1, mtat2, rng).trial


# ==================== スキャッターサーチ ====================


def select_subset(refset: Sequence[Tuple[Sequence[int], float]]) -> Tuple[int, int, float]:
    """
    部分集合を選ぶ: 最良解と、最良解からJPR距離が最大の解

    Returns:
        Tuple[int, int, float]: (最良解の番号, 最遠解の番号, 距離)
    """
    best = min(range(len(refset)), key=lambda k: (refset[k][1], k))
    furthest, distance = best, -1.0
    for k, (vss, _) in enumerate(refset):
        if k == best:
            continue
        d = jpr_distance(refset[best][0], vss)
        if d > distance:
            furthest, distance = k, d
    return best, furthest, distance


class ScatterSearch:
    """
    スキャッターサーチ

    NEH-Bで参照集合を作り、最良解と最遠解を結合し、焼きなまし法で改善して
    最遠解と置き換えることを評価回数の上限まで繰り返します。

    Attributes:
        refset: (検体順序, MTAT) のリスト
        refills: 参照集合が同一解に収束して再構築した回数
    """

    def __init__(self, inst: Instance, cfg: ScatterConfig, evaluator: Evaluator):
        self.inst = inst
        self.cfg = cfg
        self.evaluator = evaluator
        self.rng = np.random.default_rng(cfg.seed)
        self.annealer = SimulatedAnnealing(inst, cfg.improvement, evaluator, self.rng)
        self.refset: List[Tuple[List[int], float]] = []
        self.refills = 0
        self._nehb_runs = 0

    def _nehb_cost(self) -> int:
        b = math.ceil(self.inst.n / self.annealer.block_size)
        return b * (b + 1) // 2

    def _fresh_member(self, spent_limit: float) -> List[int]:
        """予算が許せばNEH-B、そうでなければランダム順列"""
        cost = self._nehb_cost()
        affordable = cost + 1 <= self.evaluator.remaining and (
            self._nehb_runs == 0 or self.evaluator.evaluations + cost <= spent_limit
        )
        if affordable:
            seed = self.cfg.seed * 1_000_003 + self._nehb_runs
            self._nehb_runs += 1
            return neh_b(self.inst, self.annealer.block_size, True, seed, self.evaluator)
        return [self.inst.specimen_ids[k] for k in self.rng.permutation(self.inst.n)]

    def diversify(self) -> None:
        spent_limit = self.cfg.nehb_budget_share * self.cfg.budget
        for _ in range(self.cfg.refset_size):
            vss = self._fresh_member(spent_limit)
            self.refset.append((vss, self.evaluator.evaluate(vss)))
        logger.debug(f"参照集合を構築しました: {len(self.refset)}解 (NEH-B {self._nehb_runs}回)")

    def refill(self, keep: int) -> None:
        """最良解以外を新しい解で置き換える"""
        self.refills += 1
        logger.warning(f"{self.inst.name}: 参照集合が同一解に収束したため再構築します（{self.refills}回目）")
        spent_limit = self.evaluator.evaluations + self.cfg.nehb_budget_share * self.evaluator.remaining
        for k in range(len(self.refset)):
            if k == keep:
                continue
            vss = self._fresh_member(spent_limit)
            self.refset[k] = (vss, self.evaluator.evaluate(vss))

    def iterate(self) -> None:
        best, furthest, distance = select_subset(self.refset)
        if distance <= 0:
            self.refill(best)
            return
        (p1, f1), (p2, f2) = self.refset[best], self.refset[furthest]
        trial = combine_solutions(p1, p2, f1, f2, self.rng)
        value = self.evaluator.evaluate(trial)
        self.annealer.reset_partition(trial)
        improved, improved_value = self.annealer.run_block(trial, value)
        if all(tuple(improved) != tuple(member) for member, _ in self.refset):
            self.refset[furthest] = (list(improved), improved_value)

    def run(self) -> None:
        self.diversify()
        if self.inst.n < 2:
            return
        best, _, _ = select_subset(self.refset)
        if self.annealer.temperature is None:
            self.annealer.calibrate(*self.refset[best])
        while True:
            self.iterate()


def scatter_search(inst: Instance, cfg: ScatterConfig, evaluator: Optional[Evaluator] = None) -> SearchResult:
    """
    スキャッターサーチを実行する

    Args:
        inst: インスタンス
        cfg: スキャッターサーチの設定
        evaluator: 共有する Evaluator（省略時は cfg.budget で作成）

    Returns:
        SearchResult: 探索結果
    """
    started_wall, started_cpu = time.perf_counter(), time.process_time()
    if evaluator is None:
        evaluator = Evaluator(inst, cfg.budget)
    engine = ScatterSearch(inst, cfg, evaluator)
    try:
        engine.run()
    except BudgetExhausted:
        pass
    stats = engine.annealer.stats()
    stats["refills"] = engine.refills
    stats["nehb_runs"] = engine._nehb_runs
    result = evaluator.result(started_wall, started_cpu, stats)
    logger.debug(f"{inst.name}: SS完了 best={result.best_mtat:.2f}, 評価回数={result.evaluations}")
    return result


# ==================== 近傍の自動選択と実行窓口 ====================


def aps_select_neighborhood(inst: Instance, inb_min_size: int = 200) -> MoveKind:
    """
    インスタンス規模から近傍を選ぶ

    n が inb_min_size 以上ならINB、それ未満はSWPです。
    """
    return MoveKind.INB if inst.n >= inb_min_size else MoveKind.SWP


def run_algorithm(
    inst: Instance,
    algo: str,
    nbhd: str,
    budget: int,
    seed: int,
    config: Optional[Config] = None,
    stagnation: Optional[int] = None,
    record_accepted: bool = False,
    neutral_optima: bool = False
) -> SearchResult:
    """
    アルゴリズムIDと近傍IDで探索を実行する

    Args:
        inst: インスタンス
        algo: "sa" | "fta" | "ss" | "neh" | "nehb"
        nbhd: "ins" | "swp" | "inv" | "inb" | "ml" | "auto"
        budget: 評価回数の上限
        seed: 乱数シード
        config: 設定（省略時はデフォルト）
        stagnation: 改善のない連続評価回数の上限
        record_accepted: 受理解を記録するか（FDC用）
        neutral_optima: 同値の最良解移動も局所解ログに記録するか

    Returns:
        SearchResult: 探索結果

    Raises:
        ValueError: 未知のアルゴリズム・近傍の場合
    """
    config = config or Config()
    if algo not in ALGORITHMS:
        raise ValueError(f"algo must be one of {ALGORITHMS}, got {algo}")
    if nbhd not in NEIGHBORHOODS:
        raise ValueError(f"nbhd must be one of {NEIGHBORHOODS}, got {nbhd}")
    if nbhd == "auto":
        nbhd = aps_select_neighborhood(inst, config.APS_INB_MIN_SIZE).value
        logger.debug(f"{inst.name}: 近傍を自動選択しました: {nbhd}")

    evaluator = Evaluator(
        inst,
        budget,
        tie_policy=config.TIE_POLICY,
        tie_seed=config.TIE_SEED,
        stagnation=stagnation,
        record_accepted=record_accepted,
        neutral_optima=neutral_optima,
    )
    anneal_cfg = AnnealConfig(
        neighborhood=nbhd,
        budget=budget,
        seed=seed,
        initial_temperature=config.INITIAL_TEMPERATURE,
        cooling=config.COOLING,
        theta=config.THETA,
        block_size=config.BLOCK_SIZE,
        block_mode=config.BLOCK_MODE,
        t0_samples=config.T0_SAMPLES,
        inv_inclusive=config.INV_INCLUSIVE,
    )

    if algo == "sa":
        return anneal(inst, anneal_cfg, evaluator=evaluator)
    if algo == "fta":
        return anneal(inst, replace(anneal_cfg, cooling=1.0), evaluator=evaluator)
    if algo == "ss":
        scatter_cfg = ScatterConfig(
            improvement=anneal_cfg,
            refset_size=config.REFSET_SIZE,
            budget=budget,
            seed=seed,
            nehb_budget_share=config.NEHB_BUDGET_SHARE,
        )
        return scatter_search(inst, scatter_cfg, evaluator=evaluator)

    started_wall, started_cpu = time.perf_counter(), time.process_time()
    try:
        if algo == "neh":
            vss = neh(inst, seed=seed, evaluator=evaluator)
        else:
            vss = neh_b(inst, config.BLOCK_SIZE, True, seed, evaluator)
        evaluator.evaluate(vss)
    except BudgetExhausted:
        logger.warning(f"{inst.name}: {algo}の構築中に評価回数の上限に達しました")
    return evaluator.result(started_wall, started_cpu)

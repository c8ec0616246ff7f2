"""
labsched データモデル

このモジュールは以下のデータクラスを定義します：
- StageKind / Machine / Specimen / Instance: 検査ラインとインスタンス
- StageBounds / GenerationProfile: インスタンス生成プロファイル
- Batch / Schedule / Assignment / ValidationReport: スケジュールと決定変数
- MoveKind / BlockPartition / DistanceMoments: 近傍構造
- AnnealConfig / ScatterConfig / MlState / SearchResult: 探索アルゴリズム
- FdcSample / WalkSeries: ランドスケープ解析
- ResultRecord: ベンチマーク結果
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple


# ==================== インスタンス ====================


class StageKind(str, Enum):
    """検査工程の種類"""
    CENTRIFUGATION = "Centrifugation"
    DECAPPING = "Decapping"
    BIOCHEMICAL_TEST = "BiochemicalTest"
    IMMUNOLOGIC_TEST = "ImmunologicTest"
    VALIDATION = "Validation"


STAGE_ORDER: Tuple[StageKind, ...] = tuple(StageKind)

TEST_KINDS = ("biochemical", "immunologic")


def route_for(test_kind: str) -> Tuple[StageKind, ...]:
    """検査種別に対応する4工程の経路を返す"""
    if test_kind == "biochemical":
        test_stage = StageKind.BIOCHEMICAL_TEST
    elif test_kind == "immunologic":
        test_stage = StageKind.IMMUNOLOGIC_TEST
    else:
        raise ValueError(f"test_kind must be one of {TEST_KINDS}, got {test_kind}")
    return (StageKind.CENTRIFUGATION, StageKind.DECAPPING, test_stage, StageKind.VALIDATION)


@dataclass(frozen=True)
class Machine:
    """
    バッチ処理装置

    Attributes:
        line_index: ライン番号 l（1始まり）
        machine_index: ライン内の装置番号 k（1始まり）
        stage: 担当工程
        capacity: 最大同時処理数 c_{l,k}
    """
    line_index: int
    machine_index: int
    stage: StageKind
    capacity: int

    @property
    def key(self) -> Tuple[int, int]:
        return (self.line_index, self.machine_index)

    @property
    def label(self) -> str:
        return f"M{self.line_index},{self.machine_index}"


@dataclass(frozen=True)
class Specimen:
    """
    検体

    Attributes:
        id: 検体番号 i（1始まり）
        test_kind: "biochemical" または "immunologic"
        route: 工程の順序（長さ o_i = 4）
    """
    id: int
    test_kind: str
    route: Tuple[StageKind, ...]

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if self.id < 1:
            raise ValueError(f"id must be positive, got {self.id}")
        if self.test_kind not in TEST_KINDS:
            raise ValueError(f"test_kind must be one of {TEST_KINDS}, got {self.test_kind}")


@dataclass(frozen=True)
class Instance:
    """
    D-HFJSPインスタンス

    処理時間は (検体 i, 工程 j, ライン l) をキーとする秒単位の整数で、
    同一ライン内の同工程の装置はすべて同じ処理時間を共有します。

    Attributes:
        name: インスタンス名（"INSTANCE_BT_IT_Idx"）
        lines: ラインごとの装置列
        specimens: 検体のリスト
        times: (i, j, l) → 秒
        generation_seed: 生成に使用したシード
    """
    name: str
    lines: Tuple[Tuple[Machine, ...], ...]
    specimens: Tuple[Specimen, ...]
    times: Dict[Tuple[int, int, int], int]
    generation_seed: int = 0

    @property
    def n(self) -> int:
        return len(self.specimens)

    @property
    def f(self) -> int:
        return len(self.lines)

    @cached_property
    def specimen_ids(self) -> Tuple[int, ...]:
        return tuple(s.id for s in self.specimens)

    @cached_property
    def specimen_by_id(self) -> Dict[int, Specimen]:
        return {s.id: s for s in self.specimens}

    @cached_property
    def machine_by_key(self) -> Dict[Tuple[int, int], Machine]:
        return {m.key: m for line in self.lines for m in line}

    @cached_property
    def stage_machines(self) -> Dict[Tuple[StageKind, int], Tuple[Machine, ...]]:
        """(工程, ライン) → 装置列"""
        groups: Dict[Tuple[StageKind, int], List[Machine]] = {}
        for line in self.lines:
            for machine in line:
                groups.setdefault((machine.stage, machine.line_index), []).append(machine)
        return {key: tuple(ms) for key, ms in groups.items()}

    def machines_for(self, stage: StageKind, line: int) -> Tuple[Machine, ...]:
        return self.stage_machines.get((stage, line), ())

    def time(self, i: int, j: int, line: int) -> int:
        """処理時間 P_{i,j}^{l}（秒）"""
        return self.times[(i, j, line)]

    def eligible(self, i: int, j: int, line: int, k: int) -> bool:
        """適合度 W_{i,j}^{l,k}: 装置の工程が操作の工程と一致するか"""
        machine = self.machine_by_key.get((line, k))
        if machine is None:
            return False
        return self.specimen_by_id[i].route[j - 1] == machine.stage

    def total_processing_time(self, i: int) -> float:
        """検体の全工程処理時間（ライン平均）"""
        specimen = self.specimen_by_id[i]
        total = 0
        for j in range(1, len(specimen.route) + 1):
            total += sum(self.times[(i, j, line)] for line in range(1, self.f + 1))
        return total / self.f

    def scaled(self, factor: int) -> "Instance":
        """全処理時間をfactor倍したインスタンスを返す"""
        if factor < 1:
            raise ValueError(f"factor must be positive, got {factor}")
        return Instance(
            name=self.name,
            lines=self.lines,
            specimens=self.specimens,
            times={key: value * factor for key, value in self.times.items()},
            generation_seed=self.generation_seed,
        )


@dataclass(frozen=True)
class StageBounds:
    """
    工程ごとの生成パラメータ

    Attributes:
        count: 装置台数
        capacity: 最大同時処理数
        lower: 処理時間の下限（秒）
        upper: 処理時間の上限（秒）
    """
    count: int
    capacity: int
    lower: int
    upper: int

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {self.capacity}")
        if self.lower < 1:
            raise ValueError(f"lower must be positive, got {self.lower}")
        if self.lower > self.upper:
            raise ValueError(f"lower must not exceed upper, got {self.lower} > {self.upper}")


@dataclass(frozen=True)
class GenerationProfile:
    """
    インスタンス生成プロファイル

    Attributes:
        name: プロファイル名（"realistic" / "toy"）
        lines: ラインごとの工程 → StageBounds
    """
    name: str
    lines: Tuple[Dict[StageKind, StageBounds], ...]

    def bounds(self, line: int, stage: StageKind) -> StageBounds:
        return self.lines[line - 1][stage]


# ==================== スケジュール ====================


OperationRef = Tuple[int, int]  # (検体 i, 工程 j)


@dataclass(frozen=True)
class Batch:
    """
    装置上のバッチ

    Attributes:
        line: ライン番号 l
        machine: 装置番号 k
        position: 装置上の処理順 r（1始まり）
        members: (i, j) のリスト
        processing_time: バッチ処理時間 T（最大メンバー時間）
        start: 開始時刻（秒）
        completion: 完了時刻 C（秒）
    """
    line: int
    machine: int
    position: int
    members: Tuple[OperationRef, ...]
    processing_time: int
    start: int
    completion: int

    @property
    def machine_key(self) -> Tuple[int, int]:
        return (self.line, self.machine)


@dataclass(frozen=True)
class Schedule:
    """
    実行可能なバッチスケジュール

    Attributes:
        line_of: 検体 → ライン（X）
        batches: すべてのバッチ
        available: (i, j) → 到着時刻 E_{i,j}
        tat: 検体 → TAT_i（秒）
    """
    line_of: Dict[int, int]
    batches: Tuple[Batch, ...]
    available: Dict[OperationRef, int]
    tat: Dict[int, int]

    @property
    def total_tat(self) -> int:
        return sum(self.tat.values())

    @property
    def mtat(self) -> float:
        if not self.tat:
            return 0.0
        return self.total_tat / len(self.tat)

    @cached_property
    def machine_batches(self) -> Dict[Tuple[int, int], Tuple[Batch, ...]]:
        """装置 → 処理順に並んだバッチ列"""
        groups: Dict[Tuple[int, int], List[Batch]] = {}
        for batch in self.batches:
            groups.setdefault(batch.machine_key, []).append(batch)
        return {key: tuple(sorted(bs, key=lambda b: b.position)) for key, bs in sorted(groups.items())}

    @property
    def total_idle_time(self) -> int:
        """使用装置の遊休時間合計（最終完了時刻 − 稼働時間）"""
        idle = 0
        for batches in self.machine_batches.values():
            busy = sum(b.processing_time for b in batches)
            idle += batches[-1].completion - busy
        return idle


@dataclass(frozen=True)
class Assignment:
    """
    値が1の決定変数の集合

    Attributes:
        x: (i, l): 検体 i をライン l に割当て
        y: (i, j, d, l, k): 操作 (i, j) を装置 M_{l,k} のバッチ d に割当て
        z: (d, l, k, r): バッチ d を装置 M_{l,k} の r 番目に配置
    """
    x: FrozenSet[Tuple[int, int]]
    y: FrozenSet[Tuple[int, int, int, int, int]]
    z: FrozenSet[Tuple[int, int, int, int]]


@dataclass(frozen=True)
class Violation:
    """
    検証で見つかった違反

    Attributes:
        constraint: 制約番号（インスタンス検証では0）
        message: 内容
        location: 違反箇所（(i, j, l) や装置ラベル）
    """
    constraint: int
    message: str
    location: str = ""


@dataclass
class ValidationReport:
    """検証レポート（violationsが空なら妥当）"""
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, constraint: int, message: str, location: str = "") -> None:
        self.violations.append(Violation(constraint, message, location))

    def constraints(self) -> List[int]:
        return sorted({v.constraint for v in self.violations})

    def __len__(self) -> int:
        return len(self.violations)


# ==================== 近傍 ====================


class MoveKind(str, Enum):
    """近傍操作（学習の腕の順序もこの並び）"""
    INS = "ins"
    SWP = "swp"
    INV = "inv"
    INB = "inb"


@dataclass(frozen=True)
class BlockPartition:
    """
    検体IDのブロック分割

    Attributes:
        block_size: ブロックサイズ n_c
        blocks: ブロックごとの検体ID
    """
    block_size: int
    blocks: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if self.block_size < 1:
            raise ValueError(f"block_size must be at least 1, got {self.block_size}")
        seen = [i for block in self.blocks for i in block]
        if len(seen) != len(set(seen)):
            raise ValueError("blocks must be disjoint")
        if any(len(block) == 0 or len(block) > self.block_size for block in self.blocks):
            raise ValueError(f"every block must hold 1..{self.block_size} ids")

    @property
    def b(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return sum(len(block) for block in self.blocks)


@dataclass(frozen=True)
class DistanceMoments:
    """
    近傍間距離の期待値と分散

    Attributes:
        mean: 期待値 ED
        variance: 分散 VarD
        samples: 標本数（理論値では0）
    """
    mean: float
    variance: float
    samples: int = 0

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if not -1e-12 <= self.mean <= 1 + 1e-12:
            raise ValueError(f"mean must be in [0, 1], got {self.mean}")
        if self.variance < -1e-15:
            raise ValueError(f"variance must be non-negative, got {self.variance}")


# ==================== 探索 ====================


@dataclass(frozen=True)
class AnnealConfig:
    """
    焼きなまし法の設定

    Attributes:
        neighborhood: "ins" | "swp" | "inv" | "inb" | "ml"
        budget: 評価回数の上限
        seed: 乱数シード
        initial_temperature: 初期温度 T_0（Noneで自動推定）
        cooling: 冷却係数 λ（1でFTA）
        theta: 各温度での試行数 θ（Noneでブロック数）
        block_size: INBのブロックサイズ
        block_mode: "fixed" | "resplit"
        t0_samples: 初期温度推定に使う近傍サンプル数
        inv_inclusive: INVで端点を含めて反転するか
    """
    neighborhood: str = "swp"
    budget: int = 10_000
    seed: int = 0
    initial_temperature: Optional[float] = None
    cooling: float = 0.98
    theta: Optional[int] = None
    block_size: int = 4
    block_mode: str = "fixed"
    t0_samples: int = 100
    inv_inclusive: bool = False

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if not 0 < self.cooling <= 1:
            raise ValueError(f"cooling must be in (0, 1], got {self.cooling}")
        if self.theta is not None and self.theta < 1:
            raise ValueError(f"theta must be at least 1, got {self.theta}")
        if self.budget < 1:
            raise ValueError(f"budget must be at least 1, got {self.budget}")
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise ValueError(f"initial_temperature must be positive, got {self.initial_temperature}")
        if self.neighborhood not in ("ins", "swp", "inv", "inb", "ml"):
            raise ValueError(f"neighborhood must be ins/swp/inv/inb/ml, got {self.neighborhood}")
        if self.block_mode not in ("fixed", "resplit"):
            raise ValueError(f"block_mode must be fixed or resplit, got {self.block_mode}")


@dataclass(frozen=True)
class ScatterConfig:
    """
    スキャッターサーチの設定

    Attributes:
        improvement: 改善フェーズの焼きなまし設定（近傍・温度・θ）
        refset_size: 参照集合のサイズ
        budget: 評価回数の上限
        seed: 乱数シード
        nehb_budget_share: 参照集合の構築に使える評価回数の割合
    """
    improvement: AnnealConfig = field(default_factory=AnnealConfig)
    refset_size: int = 10
    budget: int = 10_000
    seed: int = 0
    nehb_budget_share: float = 0.5

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if self.refset_size < 2:
            raise ValueError(f"refset_size must be at least 2, got {self.refset_size}")
        if self.budget < 1:
            raise ValueError(f"budget must be at least 1, got {self.budget}")

    @property
    def neighborhood(self) -> str:
        return self.improvement.neighborhood


@dataclass(frozen=True)
class MlState:
    """
    メタラマルク学習の状態

    Attributes:
        rewards: 近傍ごとの報酬 η（MoveKindの順）
        probabilities: 利用確率 p_ut
        training: 訓練段階かどうか
        trained: 訓練済みの腕の数
    """
    rewards: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    probabilities: Tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    training: bool = True
    trained: int = 0

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if len(self.rewards) != len(MoveKind) or len(self.probabilities) != len(MoveKind):
            raise ValueError(f"rewards and probabilities must have {len(MoveKind)} entries")
        if any(p < 0 for p in self.probabilities):
            raise ValueError(f"probabilities must be non-negative, got {self.probabilities}")

    @property
    def k(self) -> int:
        return len(self.rewards)


@dataclass
class SearchResult:
    """
    探索結果

    Attributes:
        best_vss: 最良の検体順序
        best_mtat: 最良MTAT（秒）
        trace: (評価回数, 最良MTAT) の改善履歴
        optima_log: 改善した局所解の系列 (順序, MTAT)
        evaluations: 使用した評価回数
        wall_seconds: 経過時間
        cpu_seconds: CPU時間
        accepted: 受理された解の標本 (順序, MTAT)（FDC用、記録時のみ）
        stats: 補助統計（上り受理数、学習履歴など）
    """
    best_vss: List[int]
    best_mtat: float
    trace: List[Tuple[int, float]]
    optima_log: List[Tuple[Tuple[int, ...], float]]
    evaluations: int
    wall_seconds: float = 0.0
    cpu_seconds: float = 0.0
    accepted: List[Tuple[Tuple[int, ...], float]] = field(default_factory=list)
    stats: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if self.trace and self.trace[-1][1] != self.best_mtat:
            raise ValueError(f"best_mtat must equal the last trace value, got {self.best_mtat}")


# ==================== ランドスケープ ====================


@dataclass(frozen=True)
class FdcSample:
    """
    FDCの標本

    Attributes:
        fitness: MTAT（秒）
        distance: 最良解までの正規化JPR距離
    """
    fitness: float
    distance: float

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if not 0.0 <= self.distance <= 1.0:
            raise ValueError(f"distance must be in [0, 1], got {self.distance}")


@dataclass(frozen=True)
class WalkSeries:
    """
    ランダムウォークの適応度系列

    Attributes:
        values: 各ステップのMTAT
        kind: 近傍操作
        seed: 乱数シード
    """
    values: Tuple[float, ...]
    kind: MoveKind
    seed: int

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if len(self.values) < 2:
            raise ValueError(f"values must hold at least 2 entries, got {len(self.values)}")

    @property
    def m(self) -> int:
        return len(self.values)


# ==================== ベンチマーク ====================


@dataclass(frozen=True)
class ResultRecord:
    """
    1回の実行結果

    Attributes:
        instance: インスタンス名
        algo: アルゴリズムID
        nbhd: 近傍ID
        seed: セルのシード
        rep: 反復番号（1始まり）
        best_mtat: 最良MTAT I(a,k)_l
        evals: 評価回数
        cpu_seconds: CPU時間 CPU(a,k)_l
    """
    instance: str
    algo: str
    nbhd: str
    seed: int
    rep: int
    best_mtat: float
    evals: int
    cpu_seconds: float

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if not self.best_mtat > 0:
            raise ValueError(f"best_mtat must be positive, got {self.best_mtat}")
        if self.rep < 1:
            raise ValueError(f"rep must be at least 1, got {self.rep}")

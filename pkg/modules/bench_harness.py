"""
labsched ベンチマーク

このモジュールは以下の機能を提供します：
- 性能指標（BRE / ARE / WRE / ARPD / ACPU）
- フリードマン検定の平均順位と統計量
- マニフェストに従った実験の実行と結果CSVへの追記（中断からの再開に対応）
- 最良既知値の表、規模別の集計
"""

import glob
import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from scipy.stats import chi2, rankdata

from config import Config
from .errors import BestKnownMissingError
from .instance_model import load_instance, parse_instance_name
from .models import ResultRecord
from .search_engines import ALGORITHMS, NEIGHBORHOODS, run_algorithm

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["instance", "algo", "nbhd", "seed", "rep", "best_mtat", "evals", "cpu_seconds"]
METRIC_COLUMNS = ["instance", "algo", "nbhd", "BRE", "ARE", "WRE", "ARPD", "ACPU"]
ERROR_COLUMNS = ["instance", "algo", "nbhd", "rep", "error"]
BEST_KNOWN_COLUMNS = ["instance", "c_star"]

CellKey = Tuple[str, str, str, int]


# ==================== 性能指標 ====================


def compute_metrics(
    records: Sequence[ResultRecord],
    c_star: Union[float, Mapping[str, float]]
) -> Dict[str, float]:
    """
    1セル（インスタンス×アルゴリズム×近傍）の性能指標を計算する

    相対誤差 e_l = (I_l − C*) / C* について、BRE = min、WRE = max、
    ARE = ARPD = 平均、ACPU = CPU時間の平均です。

    Args:
        records: 同じセルの実行結果
        c_star: 最良既知値、またはインスタンス名 → 最良既知値の表

    Returns:
        Dict[str, float]: BRE, ARE, WRE, ARPD, ACPU

    Raises:
        ValueError: records が空、または C* が正でない場合
        BestKnownMissingError: 表にインスタンスがない場合

    Examples:
        >>> recs = [ResultRecord("I", "sa", "swp", 0, 1, 110.0, 10, 0.1),
        ...         ResultRecord("I", "sa", "swp", 0, 2, 105.0, 10, 0.3)]
        >>> compute_metrics(recs, 100.0)["ARPD"]
        0.075
    """
    if not records:
        raise ValueError("records must not be empty")
    if isinstance(c_star, Mapping):
        instance = records[0].instance
        if instance not in c_star:
            raise BestKnownMissingError(f"no best-known value for instance {instance}")
        c_star = c_star[instance]
    if not c_star > 0:
        raise ValueError(f"c_star must be positive, got {c_star}")

    errors = np.array([(r.best_mtat - c_star) / c_star for r in records], dtype=float)
    are = float(errors.mean())
    return {
        "BRE": float(errors.min()),
        "ARE": are,
        "WRE": float(errors.max()),
        "ARPD": are,
        "ACPU": float(np.mean([r.cpu_seconds for r in records])),
    }


@dataclass(frozen=True)
class FriedmanResult:
    """
    フリードマン検定の結果

    Attributes:
        average_ranks: 処理（列）ごとの平均順位（1が最良）
        statistic: 同順位補正済みのχ²統計量
        p_value: 自由度 T−1 のχ²分布による上側確率
    """
    average_ranks: List[float]
    statistic: float
    p_value: float


def friedman_ranks(matrix: Sequence[Sequence[float]]) -> FriedmanResult:
    """
    インスタンス×処理のARPD行列から平均順位を求める

    各行で値の小さい順に順位をつけ（同値は平均順位）、列ごとに平均します。

    Raises:
        ValueError: 行の長さが揃っていない、処理が2未満、または行がない場合

    Examples:
        >>> friedman_ranks([[1, 2, 3], [1, 2, 3]]).average_ranks
        [1.0, 2.0, 3.0]
    """
    rows = [list(row) for row in matrix]
    if not rows:
        raise ValueError("matrix must have at least one row")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ValueError(f"matrix must not be ragged, got row lengths {sorted(widths)}")
    k = widths.pop()
    if k < 2:
        raise ValueError(f"matrix must have at least 2 treatments, got {k}")

    data = np.asarray(rows, dtype=float)
    n = data.shape[0]
    ranks = rankdata(data, axis=1)
    rank_sums = ranks.sum(axis=0)

    ties = 0.0
    for row in data:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts ** 3 - counts))
    correction = 1.0 - ties / (k * (k * k - 1) * n)

    raw = 12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums ** 2)) - 3.0 * n * (k + 1)
    if correction <= 0:
        statistic, p_value = 0.0, 1.0
    else:
        statistic = raw / correction
        p_value = float(chi2.sf(statistic, k - 1))
    return FriedmanResult(
        average_ranks=[float(r) for r in rank_sums / n],
        statistic=float(statistic),
        p_value=p_value,
    )


# ==================== 結果ファイル ====================


def cell_seed(master_seed: int, instance: str, algo: str, nbhd: str, rep: int) -> int:
    """セルごとのシード（マスターシードと識別子の64ビットBLAKE2bハッシュ）"""
    digest = hashlib.blake2b(f"{master_seed}|{instance}|{algo}|{nbhd}|{rep}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def read_results(path: str) -> pd.DataFrame:
    """結果CSVを読み込む（ファイルがなければ空の表）"""
    if not os.path.exists(path):
        return pd.DataFrame(columns=RESULT_COLUMNS)
    return pd.read_csv(path, dtype={"instance": str, "algo": str, "nbhd": str})


def records_from_frame(frame: pd.DataFrame) -> List[ResultRecord]:
    return [
        ResultRecord(
            instance=str(row.instance),
            algo=str(row.algo),
            nbhd=str(row.nbhd),
            seed=int(row.seed),
            rep=int(row.rep),
            best_mtat=float(row.best_mtat),
            evals=int(row.evals),
            cpu_seconds=float(row.cpu_seconds),
        )
        for row in frame.itertuples(index=False)
    ]


def append_rows(path: str, rows: List[dict], columns: List[str]) -> None:
    """CSVに行を追記する（ファイルがなければヘッダ付きで作成）"""
    if not rows:
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    write_header = not os.path.exists(path)
    pd.DataFrame(rows, columns=columns).to_csv(path, mode="a", header=write_header, index=False)


def best_known_table(results: pd.DataFrame) -> Dict[str, float]:
    """インスタンスごとの最小MTATを最良既知値とする"""
    if results.empty:
        return {}
    return {str(k): float(v) for k, v in results.groupby("instance")["best_mtat"].min().items()}


def save_best_known(table: Mapping[str, float], path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame(sorted(table.items()), columns=BEST_KNOWN_COLUMNS)
    frame.to_csv(path, index=False)
    logger.info(f"最良既知値を保存しました: {path} ({len(frame)}インスタンス)")
    return path


def load_best_known(path: str) -> Dict[str, float]:
    """
    最良既知値の表を読み込む

    Raises:
        FileNotFoundError: ファイルが存在しない場合
        ValueError: C* が正でない行がある場合
    """
    frame = pd.read_csv(path, dtype={"instance": str})
    table = {str(row.instance): float(row.c_star) for row in frame.itertuples(index=False)}
    bad = [name for name, value in table.items() if not value > 0]
    if bad:
        raise ValueError(f"c_star must be positive, got invalid entries for {bad}")
    return table


def metrics_table(results: pd.DataFrame, best_known: Mapping[str, float]) -> pd.DataFrame:
    """
    結果表からセルごとの指標表を作る

    最良既知値のないインスタンスのセルは警告を出して除外します。
    """
    rows = []
    if not results.empty:
        for (instance, algo, nbhd), group in results.groupby(["instance", "algo", "nbhd"], sort=True):
            try:
                metrics = compute_metrics(records_from_frame(group), best_known)
            except BestKnownMissingError as e:
                logger.warning(f"{instance}: {e}。指標の計算をスキップします。")
                continue
            rows.append({"instance": instance, "algo": algo, "nbhd": nbhd, **metrics})
    return pd.DataFrame(rows, columns=METRIC_COLUMNS)


def summarize_by_size(metrics: pd.DataFrame) -> pd.DataFrame:
    """
    指標表を (アルゴリズム, 近傍, 検体数) ごとに平均する

    命名規則に合わないインスタンスは除外します。
    """
    columns = ["algo", "nbhd", "n", "instances", "ARPD", "ACPU"]
    if metrics.empty:
        return pd.DataFrame(columns=columns)
    frame = metrics.copy()
    sizes = []
    for name in frame["instance"]:
        try:
            n_bio, n_immuno, _ = parse_instance_name(str(name))
            sizes.append(n_bio + n_immuno)
        except ValueError:
            sizes.append(None)
    frame["n"] = sizes
    dropped = frame["n"].isna().sum()
    if dropped:
        logger.warning(f"命名規則に合わない{dropped}件のセルを集計から除外しました")
    frame = frame.dropna(subset=["n"])
    frame["n"] = frame["n"].astype(int)
    summary = (
        frame.groupby(["algo", "nbhd", "n"], sort=True)
        .agg(instances=("instance", "nunique"), ARPD=("ARPD", "mean"), ACPU=("ACPU", "mean"))
        .reset_index()
    )
    return summary[columns]


# ==================== 実験の実行 ====================


@dataclass
class BenchManifest:
    """
    実験マニフェスト（KEY=VALUE形式）

    Attributes:
        instances: インスタンスファイルのパスまたはglobパターン
        algorithms: アルゴリズムID
        neighborhoods: 近傍ID
        reps: 反復回数 L
        budget: 1実行あたりの評価回数
        master_seed: マスターシード
        results: 結果CSVのパス
        metrics: 指標CSVのパス
        best_known: 最良既知値CSVのパス（Noneで結果から導出）
        workers: 並列プロセス数
    """
    instances: List[str]
    algorithms: List[str]
    neighborhoods: List[str]
    reps: int = 30
    budget: int = 10_000
    master_seed: int = 1
    results: str = "output/results.csv"
    metrics: str = "output/metrics.csv"
    best_known: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        """データクラス初期化後の検証"""
        if not self.instances:
            raise ValueError("instances must not be empty")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if not self.algorithms or unknown:
            raise ValueError(f"algorithms must be chosen from {ALGORITHMS}, got {self.algorithms}")
        unknown = [v for v in self.neighborhoods if v not in NEIGHBORHOODS]
        if not self.neighborhoods or unknown:
            raise ValueError(f"neighborhoods must be chosen from {NEIGHBORHOODS}, got {self.neighborhoods}")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if self.budget < 1:
            raise ValueError(f"budget must be at least 1, got {self.budget}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")

    def instance_paths(self) -> List[str]:
        """globを展開したインスタンスパス（一致しないパターンはそのまま残す）"""
        paths: List[str] = []
        for pattern in self.instances:
            matches = sorted(glob.glob(pattern))
            for path in matches or [pattern]:
                if path not in paths:
                    paths.append(path)
        return paths


def _split_list(value: Optional[str]) -> List[str]:
    return [item.strip() for item in (value or "").split(",") if item.strip()]


def load_manifest(path: str, config: Optional[Config] = None) -> BenchManifest:
    """
    マニフェストを読み込む

    相対パスはマニフェストのあるディレクトリを基準に解決します。
    省略したキーは設定値を使います。

    Raises:
        FileNotFoundError: ファイルが存在しない場合
        ValueError: 未知のキーや不正な値がある場合
    """
    config = config or Config()
    if not os.path.exists(path):
        raise FileNotFoundError(f"マニフェストが見つかりません: {path}")
    values = {k.upper(): v for k, v in dotenv_values(path).items()}
    known = {"INSTANCES", "ALGORITHMS", "NEIGHBORHOODS", "REPS", "BUDGET", "MASTER_SEED",
             "RESULTS", "METRICS", "BEST_KNOWN", "WORKERS"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown manifest keys: {unknown}")

    base = Path(path).resolve().parent

    def resolve(p: Optional[str]) -> Optional[str]:
        if not p:
            return None
        return str(p if os.path.isabs(p) else base / p)

    try:
        return BenchManifest(
            instances=[resolve(p) for p in _split_list(values.get("INSTANCES"))],
            algorithms=_split_list(values.get("ALGORITHMS")),
            neighborhoods=_split_list(values.get("NEIGHBORHOODS")),
            reps=int(values.get("REPS") or config.REPS),
            budget=int(values.get("BUDGET") or config.EVAL_BUDGET),
            master_seed=int(values.get("MASTER_SEED") or config.MASTER_SEED),
            results=resolve(values.get("RESULTS")) or config.RESULTS_PATH,
            metrics=resolve(values.get("METRICS")) or config.METRICS_PATH,
            best_known=resolve(values.get("BEST_KNOWN")),
            workers=int(values.get("WORKERS") or config.MAX_WORKERS),
        )
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: {e}") from None


@dataclass(frozen=True)
class CellTask:
    """1セル・1反復の実行単位"""
    path: str
    instance: str
    algo: str
    nbhd: str
    rep: int
    seed: int
    budget: int
    config: Config = field(compare=False)

    @property
    def key(self) -> CellKey:
        return (self.instance, self.algo, self.nbhd, self.rep)


def safe_run_cell(task: CellTask) -> Tuple[bool, dict]:
    """
    1セルを安全に実行する

    インスタンスの読み込みや探索で例外が発生した場合は警告を記録し、
    エラー行を返します。これにより実験全体は継続できます。

    Returns:
        Tuple[bool, dict]: (成功したか, 結果行またはエラー行)
    """
    try:
        inst = load_instance(task.path)
        result = run_algorithm(inst, task.algo, task.nbhd, task.budget, task.seed, config=task.config)
        record = ResultRecord(
            instance=task.instance,
            algo=task.algo,
            nbhd=task.nbhd,
            seed=task.seed,
            rep=task.rep,
            best_mtat=result.best_mtat,
            evals=result.evaluations,
            cpu_seconds=result.cpu_seconds,
        )
        return True, {c: getattr(record, c) for c in RESULT_COLUMNS}
    except Exception as e:
        logger.warning(f"{task.instance}: {task.algo}/{task.nbhd} 反復{task.rep}でエラーが発生しました: {e}。スキップします。")
        return False, {"instance": task.instance, "algo": task.algo, "nbhd": task.nbhd,
                       "rep": task.rep, "error": f"{type(e).__name__}: {e}"}


@dataclass
class SuiteSummary:
    """実験の実行結果の要約"""
    planned: int = 0
    skipped: int = 0
    completed: int = 0
    failed: int = 0
    metrics_rows: int = 0


def errors_path(results_path: str) -> str:
    """エラー行の出力先（results.csv → results.errors.csv）"""
    root, ext = os.path.splitext(results_path)
    return f"{root}.errors{ext or '.csv'}"


def write_failures(results_path: str, failures: List[dict]) -> None:
    """今回の実行で失敗したセルだけをエラーCSVに書き直す（失敗がなければ削除）"""
    path = errors_path(results_path)
    if not failures:
        if os.path.exists(path):
            os.remove(path)
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pd.DataFrame(failures, columns=ERROR_COLUMNS).to_csv(path, index=False)


class SuiteRunner:
    """
    マニフェストに従って実験を実行するクラス

    すべての (インスタンス × アルゴリズム × 近傍 × 反復) セルを、導出した
    シードで実行し、結果CSVに追記します。既に結果のあるセルはスキップします。
    結果の書き込みはメインプロセスだけが行います。

    Attributes:
        config: 設定
    """

    def __init__(self, config: Optional[Config] = None):
        self.config = config or Config()

    def plan(self, manifest: BenchManifest) -> List[CellTask]:
        tasks = []
        for path in manifest.instance_paths():
            instance = Path(path).stem
            for algo in manifest.algorithms:
                for nbhd in manifest.neighborhoods:
                    for rep in range(1, manifest.reps + 1):
                        tasks.append(CellTask(
                            path=path,
                            instance=instance,
                            algo=algo,
                            nbhd=nbhd,
                            rep=rep,
                            seed=cell_seed(manifest.master_seed, instance, algo, nbhd, rep),
                            budget=manifest.budget,
                            config=self.config,
                        ))
        return tasks

    def _execute(self, tasks: List[CellTask], workers: int) -> Iterable[Tuple[bool, dict]]:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                yield from executor.map(safe_run_cell, tasks)
        else:
            for task in tasks:
                yield safe_run_cell(task)

    def run(self, manifest: BenchManifest) -> SuiteSummary:
        """
        実験を実行し、結果CSVと指標CSVを書き出す

        Args:
            manifest: 実験マニフェスト

        Returns:
            SuiteSummary: 実行件数の要約
        """
        summary = SuiteSummary()
        tasks = self.plan(manifest)
        summary.planned = len(tasks)

        existing = read_results(manifest.results)
        done = {
            (str(r.instance), str(r.algo), str(r.nbhd), int(r.rep))
            for r in existing.itertuples(index=False)
        }
        pending = [t for t in tasks if t.key not in done]
        summary.skipped = len(tasks) - len(pending)
        logger.info(f"実験を開始します: {len(tasks)}セル (実行済み{summary.skipped}, 実行予定{len(pending)})")

        failures = []
        for index, (ok, row) in enumerate(self._execute(pending, manifest.workers), start=1):
            if ok:
                append_rows(manifest.results, [row], RESULT_COLUMNS)
                summary.completed += 1
                logger.debug(f"({index}/{len(pending)}) {row['instance']} {row['algo']}/{row['nbhd']} "
                             f"反復{row['rep']}: MTAT={row['best_mtat']:.2f}")
            else:
                failures.append(row)
                summary.failed += 1
        write_failures(manifest.results, failures)

        results = read_results(manifest.results)
        if manifest.best_known is not None and os.path.exists(manifest.best_known):
            best_known = load_best_known(manifest.best_known)
        else:
            best_known = best_known_table(results)
        metrics = metrics_table(results, best_known)
        os.makedirs(os.path.dirname(os.path.abspath(manifest.metrics)), exist_ok=True)
        metrics.to_csv(manifest.metrics, index=False)
        summary.metrics_rows = len(metrics)

        logger.info(
            f"実験完了: 実行{summary.completed}, 失敗{summary.failed}, "
            f"スキップ{summary.skipped}, 指標{summary.metrics_rows}行"
        )
        return summary


def run_suite(manifest_path: str, config: Optional[Config] = None) -> SuiteSummary:
    """マニフェストファイルを読み込んで実験を実行する"""
    config = config or Config()
    return SuiteRunner(config).run(load_manifest(manifest_path, config))

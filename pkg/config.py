"""
labsched 設定モジュール

このモジュールは以下の設定値を一元管理します：
- インスタンス生成の設定
- FABMデコーダのタイブレーク設定
- 近傍・探索アルゴリズムのパラメータ
- ランドスケープ解析とベンチマークの設定
"""

import os
import logging
from typing import Any, Dict, Optional, get_type_hints
from dotenv import load_dotenv, dotenv_values

# .envファイルから環境変数を読み込む
load_dotenv()

ENV_PREFIX = "LABSCHED_"

TIE_POLICIES = ("seeded-random", "lowest-index", "recorded", "paper-example")
BLOCK_MODES = ("fixed", "resplit")
LON_MODES = ("strict", "neutral")


def _env(name: str, default: str) -> str:
    return os.getenv(f"{ENV_PREFIX}{name}", default)


class Config:
    """labschedの中央設定クラス"""

    # ==================== インスタンス生成 ====================

    INSTANCE_DIR: str = _env("INSTANCE_DIR", "instances")
    GENERATION_SEED: int = int(_env("GENERATION_SEED", "20240101"))
    INSTANCES_PER_SIZE: int = int(_env("INSTANCES_PER_SIZE", "10"))  # 実規模の各組合せの生成数
    TOY_INSTANCES_PER_SIZE: int = int(_env("TOY_INSTANCES_PER_SIZE", "5"))

    # ==================== デコーダ設定 ====================

    TIE_POLICY: str = _env("TIE_POLICY", "seeded-random")
    TIE_SEED: int = int(_env("TIE_SEED", "0"))

    # ==================== 近傍設定 ====================

    BLOCK_SIZE: int = int(_env("BLOCK_SIZE", "4"))  # n_c（b = ⌈n/4⌉）
    BLOCK_MODE: str = _env("BLOCK_MODE", "fixed")
    INV_INCLUSIVE: bool = _env("INV_INCLUSIVE", "false").lower() == "true"

    # ==================== 探索アルゴリズム ====================

    EVAL_BUDGET: int = int(_env("EVAL_BUDGET", "10000"))
    COOLING: float = float(_env("COOLING", "0.98"))  # λ
    T0_SAMPLES: int = int(_env("T0_SAMPLES", "100"))  # 初期温度推定のサンプル数
    INITIAL_TEMPERATURE: Optional[float] = None  # Noneの場合は自動推定
    THETA: Optional[int] = None  # Noneの場合はブロック数
    REFSET_SIZE: int = int(_env("REFSET_SIZE", "10"))
    NEHB_BUDGET_SHARE: float = 0.5  # 参照集合の構築に使える評価回数の割合
    APS_INB_MIN_SIZE: int = int(_env("APS_INB_MIN_SIZE", "200"))  # n ≥ この値でINB

    # ==================== ランドスケープ解析 ====================

    WALK_LENGTH: int = int(_env("WALK_LENGTH", "500"))
    AC_LAG: int = 1
    LON_TOY_RUNS: int = 1000
    LON_TOY_STAGNATION: int = 10_000
    LON_RUNS: int = 50
    LON_STAGNATION: int = 1000
    LON_TOY_MAX_SIZE: int = 99  # n ≤ この値は小規模扱い
    LON_HASH_MIN_SIZE: int = 100  # n ≥ この値でノードキーをハッシュ化
    LON_MODE: str = _env("LON_MODE", "strict")
    PLATEAU_TOLERANCE: float = 1e-6

    # ==================== ベンチマーク ====================

    RESULTS_PATH: str = _env("RESULTS_PATH", "output/results.csv")
    METRICS_PATH: str = _env("METRICS_PATH", "output/metrics.csv")
    OUTPUT_DIR: str = _env("OUTPUT_DIR", "output")
    MASTER_SEED: int = int(_env("MASTER_SEED", "1"))
    REPS: int = int(_env("REPS", "30"))
    MAX_WORKERS: int = int(_env("MAX_WORKERS", "1"))

    # ==================== ロギング設定 ====================

    LOG_LEVEL: str = _env("LOG_LEVEL", os.getenv("LOG_LEVEL", "INFO"))
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_DATE_FORMAT: str = "%Y-%m-%d %H:%M:%S"

    @classmethod
    def load(cls, path: Optional[str] = None) -> "Config":
        """
        設定ファイル（KEY=VALUE形式）で上書きした設定インスタンスを作成する

        Args:
            path: 設定ファイルのパス。Noneの場合はデフォルト値のみ

        Returns:
            Config: 上書き済みの設定インスタンス

        Raises:
            ValueError: 未知のキーまたは型変換できない値の場合
            FileNotFoundError: ファイルが存在しない場合
        """
        config = cls()
        if path is None:
            return config
        if not os.path.exists(path):
            raise FileNotFoundError(f"設定ファイルが見つかりません: {path}")

        overrides = dotenv_values(path)
        config.apply(overrides)
        logging.getLogger(__name__).info(f"設定ファイルを読み込みました: {path} ({len(overrides)}件)")
        return config

    def apply(self, overrides: Dict[str, Optional[str]]) -> None:
        """文字列の上書き値を属性の型に合わせて設定する"""
        hints = get_type_hints(type(self))
        for raw_key, raw_value in overrides.items():
            key = raw_key.upper()
            if key.startswith(ENV_PREFIX):
                key = key[len(ENV_PREFIX):]
            if key not in hints:
                raise ValueError(f"unknown config key: {raw_key}")
            setattr(self, key, _cast(hints[key], raw_value, key))

    def validate(self) -> bool:
        """
        設定値を検証する

        Returns:
            bool: 設定が有効な場合True、そうでない場合False
        """
        if not 0 < self.COOLING <= 1:
            logging.error("COOLINGは(0, 1]の範囲である必要があります")
            return False
        if self.THETA is not None and self.THETA < 1:
            logging.error("THETAは1以上である必要があります")
            return False
        if self.EVAL_BUDGET < 1:
            logging.error("EVAL_BUDGETは1以上である必要があります")
            return False
        if self.REFSET_SIZE < 2:
            logging.error("REFSET_SIZEは2以上である必要があります")
            return False
        if self.BLOCK_SIZE < 1:
            logging.error("BLOCK_SIZEは1以上である必要があります")
            return False
        if self.TIE_POLICY not in TIE_POLICIES:
            logging.error(f"TIE_POLICYが不正です: {self.TIE_POLICY}")
            return False
        if self.BLOCK_MODE not in BLOCK_MODES:
            logging.error(f"BLOCK_MODEが不正です: {self.BLOCK_MODE}")
            return False
        if self.LON_MODE not in LON_MODES:
            logging.error(f"LON_MODEが不正です: {self.LON_MODE}")
            return False
        if self.PLATEAU_TOLERANCE <= 0:
            logging.error("PLATEAU_TOLERANCEは正の値である必要があります")
            return False
        if self.MAX_WORKERS < 1:
            logging.error("MAX_WORKERSは1以上である必要があります")
            return False
        return True

    def get_log_level(self) -> int:
        """
        文字列のログレベルをlogging定数に変換する

        Returns:
            int: ロギングレベル定数
        """
        level_map = {
            "DEBUG": logging.DEBUG,
            "INFO": logging.INFO,
            "WARNING": logging.WARNING,
            "ERROR": logging.ERROR,
            "CRITICAL": logging.CRITICAL
        }
        return level_map.get(self.LOG_LEVEL.upper(), logging.INFO)


def _cast(annotation: Any, raw: Optional[str], key: str) -> Any:
    """注釈型に従って文字列を変換する"""
    if raw is None or raw == "":
        if "Optional" in str(annotation):
            return None
        raise ValueError(f"{key} must have a value")
    target = annotation
    if "Optional" in str(annotation):
        target = [a for a in annotation.__args__ if a is not type(None)][0]
    try:
        if target is bool:
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        return target(raw)
    except ValueError:
        raise ValueError(f"{key} must be {target.__name__}, got {raw!r}") from None


def setup_logging(level: Optional[str] = None, config: Optional[Config] = None) -> None:
    """
    アプリケーションのロギングを設定する

    設定されたフォーマットとレベルでコンソールハンドラーをセットアップします。
    level が優先され、次に config の LOG_LEVEL が使われます。

    Args:
        level: ログレベルの上書き（CLIの--log-level用）
        config: 設定ファイルを読み込んだ設定インスタンス
    """
    settings = config or Config()
    if level is not None:
        settings.LOG_LEVEL = level
    logging.basicConfig(
        level=settings.get_log_level(),
        format=settings.LOG_FORMAT,
        datefmt=settings.LOG_DATE_FORMAT,
        handlers=[
            logging.StreamHandler()
        ]
    )
    # 既存のハンドラーは残したままレベルだけ反映する
    logging.getLogger().setLevel(settings.get_log_level())

    # サードパーティライブラリのログレベルをWARNINGに設定してノイズを削減
    logging.getLogger("pydot").setLevel(logging.WARNING)
    logging.getLogger("hypothesis").setLevel(logging.WARNING)


# モジュールインポート時にロギングを初期化
setup_logging()

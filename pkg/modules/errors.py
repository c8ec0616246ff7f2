"""
labsched 例外定義

このモジュールは以下の例外クラスを定義します：
- InstanceParseError: インスタンスファイルの解析エラー
- InfeasibleAssignmentError: 決定変数が制約を満たさない場合のエラー
- DegenerateInputError: 分散ゼロなど統計量が定義できない入力
- BestKnownMissingError: 最良既知値が登録されていない場合のエラー
"""

from typing import Optional


class InstanceParseError(ValueError):
    """
    インスタンスファイルの解析エラー

    Attributes:
        path: ファイルパス
        field: 問題のあるフィールドのJSONパス（例: "lines[1].machines[0].capacity"）
        line: JSONデコードエラーの行番号（該当する場合）
    """

    def __init__(self, message: str, path: Optional[str] = None,
                 field: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.field = field
        self.line = line
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class InfeasibleAssignmentError(ValueError):
    """
    割当て（X, Y, Z）が制約を満たさない場合のエラー

    Attributes:
        constraint: 違反した制約番号（2〜15）
    """

    def __init__(self, constraint: int, message: str):
        self.constraint = constraint
        super().__init__(f"Constraint ({constraint}) violated: {message}")


class DegenerateInputError(ValueError):
    """分散がゼロなど、相関係数が定義できない入力"""


class BestKnownMissingError(LookupError):
    """インスタンスの最良既知値C*が見つからない"""


class BudgetExhausted(Exception):
    """評価回数の上限または停滞上限に達した（探索ループの終了通知）"""

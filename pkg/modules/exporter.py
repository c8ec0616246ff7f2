"""
labsched ファイル出力モジュール

このモジュールは以下の成果物を書き出します：
- スケジュールJSON（読み込みも可能）
- バッチ区間CSV（外部ツールでのガントチャート描画用）
- 局所解ネットワークのGraphML / DOT
- 決定変数（X, Y, Z）のJSON
"""

import json
import logging
import os
from typing import Dict, Union

import networkx as nx
import pandas as pd

from .landscape_analysis import LonGraph, PlateauGraph
from .models import Assignment, Batch, OperationRef, Schedule

logger = logging.getLogger(__name__)

GRAPH_FORMATS = ("graphml", "dot")


def ensure_output_dir(path: str) -> None:
    """
    出力先ファイルの親ディレクトリが存在することを確認し、なければ作成する

    Raises:
        OSError: ディレクトリの作成に失敗した場合
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        if not os.path.exists(directory):
            os.makedirs(directory)
            logger.info(f"出力ディレクトリを作成しました: {directory}")
    except OSError as e:
        logger.error(f"出力ディレクトリの作成に失敗しました: {e}")
        raise


# ==================== スケジュール ====================


def schedule_to_dict(sched: Schedule) -> dict:
    """スケジュールをJSON化できる辞書に変換する"""
    return {
        "line_of": {str(i): l for i, l in sorted(sched.line_of.items())},
        "batches": [
            {
                "l": b.line,
                "k": b.machine,
                "r": b.position,
                "members": [[i, j] for i, j in b.members],
                "p": b.processing_time,
                "start": b.start,
                "completion": b.completion,
            }
            for b in sorted(sched.batches, key=lambda b: (b.line, b.machine, b.position))
        ],
        "tat": {str(i): t for i, t in sorted(sched.tat.items())},
        "mtat": round(sched.mtat, 2),
    }


def schedule_from_dict(data: dict) -> Schedule:
    """
    辞書からスケジュールを復元する

    到着時刻 E はバッチの完了時刻から導出します。バッチの "p" がなければ
    completion − start、"tat" がなければ最終工程の完了時刻を使います。
    記載された "tat" はそのまま読み込むため、検証で制約 (15) を確認できます。

    Raises:
        ValueError: 必須キーが欠けている場合
    """
    try:
        batches = tuple(
            Batch(
                line=int(b["l"]),
                machine=int(b["k"]),
                position=int(b["r"]),
                members=tuple((int(i), int(j)) for i, j in b["members"]),
                processing_time=int(b["p"]) if "p" in b else int(b["completion"]) - int(b["start"]),
                start=int(b["start"]),
                completion=int(b["completion"]),
            )
            for b in data["batches"]
        )
        line_of = {int(i): int(l) for i, l in data["line_of"].items()}
        stated_tat = {int(i): int(t) for i, t in data["tat"].items()} if "tat" in data else None
    except (KeyError, TypeError) as e:
        raise ValueError(f"schedule document is missing a field: {e}") from None

    completion: Dict[OperationRef, int] = {m: b.completion for b in batches for m in b.members}
    available: Dict[OperationRef, int] = {}
    last_op: Dict[int, int] = {}
    for (i, j) in sorted(completion):
        available[(i, j)] = 0 if j == 1 else completion.get((i, j - 1), 0)
        last_op[i] = max(last_op.get(i, 0), j)
    if stated_tat is None:
        stated_tat = {i: completion[(i, j)] for i, j in last_op.items()}
    return Schedule(line_of=line_of, batches=batches, available=available, tat=stated_tat)


def write_schedule(sched: Schedule, path: str) -> str:
    """
    スケジュールをJSONファイルに書き出す

    Returns:
        str: 書き出したファイルパス

    Raises:
        OSError: 書き込みに失敗した場合
    """
    ensure_output_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(schedule_to_dict(sched), f, indent=1)
    logger.info(f"スケジュールを保存しました: {path} (MTAT={sched.mtat:.2f})")
    return path


def read_schedule(path: str) -> Schedule:
    """JSONファイルからスケジュールを読み込む"""
    with open(path, encoding="utf-8") as f:
        return schedule_from_dict(json.load(f))


def batch_intervals(sched: Schedule) -> pd.DataFrame:
    """バッチごとの (装置, 開始, 終了, メンバー) 表"""
    rows = [
        {
            "machine": f"M{b.line},{b.machine}",
            "line": b.line,
            "machine_index": b.machine,
            "position": b.position,
            "start": b.start,
            "completion": b.completion,
            "processing_time": b.processing_time,
            "members": " ".join(f"O{i},{j}" for i, j in b.members),
        }
        for b in sched.batches
    ]
    columns = ["machine", "line", "machine_index", "position", "start", "completion", "processing_time", "members"]
    return pd.DataFrame(rows, columns=columns).sort_values(["line", "machine_index", "position"]).reset_index(drop=True)


def write_batch_intervals(sched: Schedule, path: str) -> str:
    """バッチ区間CSVを書き出す"""
    ensure_output_dir(path)
    batch_intervals(sched).to_csv(path, index=False)
    logger.info(f"バッチ区間を保存しました: {path}")
    return path


# ==================== グラフ ====================


def _export_view(g: Union[LonGraph, PlateauGraph]) -> nx.DiGraph:
    """出力用に属性を整えたグラフ（ノード・エッジはキー順）"""
    plateaus = g if isinstance(g, PlateauGraph) else None
    source = g.lon.graph if plateaus is not None else g.graph

    view = nx.DiGraph()
    for key in sorted(source.nodes):
        attrs = source.nodes[key]
        node = {"fitness": float(attrs["fitness"]), "size": int(attrs["in_weight"])}
        if plateaus is not None:
            index = plateaus.plateau_of[key]
            node["plateau"] = index
            node["sink"] = bool(plateaus.sinks[index])
        view.add_node(key, **node)
    for u, v in sorted(source.edges):
        view.add_edge(u, v, weight=int(source.edges[u, v]["weight"]))
    return view


def graph_to_dot(g: Union[LonGraph, PlateauGraph]) -> str:
    """DOT形式の文字列に変換する"""
    return nx.nx_pydot.to_pydot(_export_view(g)).to_string()


def export_graph(g: Union[LonGraph, PlateauGraph], path: str, fmt: str = "graphml") -> str:
    """
    局所解ネットワークをファイルに書き出す

    ノード属性は fitness、size（重み付き入次数）、プラトー圧縮済みの場合は
    plateau と sink、エッジ属性は weight です。同じグラフからは同じバイト列が
    出力されます。

    Args:
        g: LonGraph または PlateauGraph
        path: 出力ファイルパス
        fmt: "graphml" | "dot"

    Returns:
        str: 書き出したファイルパス

    Raises:
        ValueError: 未知の形式の場合
        OSError: 書き込みに失敗した場合
    """
    if fmt not in GRAPH_FORMATS:
        raise ValueError(f"fmt must be one of {GRAPH_FORMATS}, got {fmt}")
    ensure_output_dir(path)
    if fmt == "graphml":
        nx.write_graphml(_export_view(g), path)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(graph_to_dot(g))
    logger.info(f"グラフを保存しました: {path}")
    return path


def read_graphml(path: str) -> nx.DiGraph:
    """GraphMLを読み込む（属性の型は保存時のまま）"""
    return nx.read_graphml(path)


# ==================== 決定変数 ====================


def write_assignment(asg: Assignment, path: str) -> str:
    """値が1の決定変数を x / y / z の添字リストとしてJSONに書き出す"""
    ensure_output_dir(path)
    data = {
        "x": [list(v) for v in sorted(asg.x)],
        "y": [list(v) for v in sorted(asg.y)],
        "z": [list(v) for v in sorted(asg.z)],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=1)
    logger.info(f"決定変数を保存しました: {path}")
    return path

"""
labsched インスタンスモデル

このモジュールは以下の機能を提供します：
- 実規模・小規模の生成プロファイル
- カウンタベース乱数によるインスタンス生成
- インスタンスの検証
- JSON形式での保存・読込（厳格なスキーマ）
- ベンチマーク用インスタンス一覧と例題フィクスチャ
"""

import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import InstanceParseError
from .models import (
    STAGE_ORDER,
    Assignment,
    GenerationProfile,
    Instance,
    Machine,
    Specimen,
    StageBounds,
    StageKind,
    ValidationReport,
    route_for,
)

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

NAME_PATTERN = re.compile(r"^INSTANCE_(\d+)_(\d+)_(\d+)$")

TOY_SIZES: Tuple[Tuple[int, int], ...] = ((1, 1), (2, 2), (3, 3), (4, 4))
REALISTIC_SIZES: Tuple[int, ...] = (100, 200, 300, 400, 500)
REALISTIC_RATIOS: Tuple[Tuple[int, int], ...] = ((1, 4), (1, 1), (4, 1))

_TOP_FIELDS = {"name", "seed", "lines", "specimens", "times"}
_LINE_FIELDS = {"machines"}
_MACHINE_FIELDS = {"stage", "capacity"}
_SPECIMEN_FIELDS = {"id", "kind", "route"}
_TIME_FIELDS = {"i", "j", "line", "seconds"}

_MAX_SEED = 2 ** 64


# ==================== 生成プロファイル ====================


def realistic_profile() -> GenerationProfile:
    """
    実規模の生成プロファイルを返す

    2つの地域の検査室の装置構成（台数・容量・処理時間の範囲）です。

    Returns:
        GenerationProfile: 実規模プロファイル
    """
    region1 = {
        StageKind.CENTRIFUGATION: StageBounds(count=2, capacity=84, lower=480, upper=600),
        StageKind.DECAPPING: StageBounds(count=1, capacity=1, lower=2, upper=2),
        StageKind.BIOCHEMICAL_TEST: StageBounds(count=2, capacity=84, lower=480, upper=600),
        StageKind.IMMUNOLOGIC_TEST: StageBounds(count=2, capacity=84, lower=1080, upper=1800),
        StageKind.VALIDATION: StageBounds(count=1, capacity=1, lower=4, upper=6),
    }
    region2 = {
        StageKind.CENTRIFUGATION: StageBounds(count=4, capacity=32, lower=300, upper=360),
        StageKind.DECAPPING: StageBounds(count=1, capacity=1, lower=4, upper=6),
        StageKind.BIOCHEMICAL_TEST: StageBounds(count=2, capacity=60, lower=300, upper=720),
        StageKind.IMMUNOLOGIC_TEST: StageBounds(count=2, capacity=48, lower=900, upper=2700),
        StageKind.VALIDATION: StageBounds(count=1, capacity=1, lower=4, upper=6),
    }
    return GenerationProfile(name="realistic", lines=(region1, region2))


def toy_profile() -> GenerationProfile:
    """
    小規模の生成プロファイルを返す

    実規模プロファイルから、地域2の遠心分離機を2台にし、遠心分離機・
    生化学分析装置・免疫分析装置の容量を両地域とも2にしたものです。

    Returns:
        GenerationProfile: 小規模プロファイル
    """
    batch_stages = (StageKind.CENTRIFUGATION, StageKind.BIOCHEMICAL_TEST, StageKind.IMMUNOLOGIC_TEST)
    lines = []
    for line_index, stages in enumerate(realistic_profile().lines, start=1):
        adjusted = {}
        for stage, bounds in stages.items():
            count = bounds.count
            capacity = bounds.capacity
            if stage in batch_stages:
                capacity = 2
            if line_index == 2 and stage == StageKind.CENTRIFUGATION:
                count = 2
            adjusted[stage] = StageBounds(count=count, capacity=capacity, lower=bounds.lower, upper=bounds.upper)
        lines.append(adjusted)
    return GenerationProfile(name="toy", lines=tuple(lines))


def get_profile(name: str) -> GenerationProfile:
    """プロファイル名からプロファイルを取得する"""
    profiles = {"realistic": realistic_profile, "toy": toy_profile}
    if name not in profiles:
        raise ValueError(f"profile must be one of {sorted(profiles)}, got {name}")
    return profiles[name]()


# ==================== 生成 ====================


def instance_name(n_bio: int, n_immuno: int, idx: int) -> str:
    return f"INSTANCE_{n_bio}_{n_immuno}_{idx}"


def parse_instance_name(name: str) -> Tuple[int, int, int]:
    """
    インスタンス名から (生化学数, 免疫数, 番号) を取り出す

    Raises:
        ValueError: 命名規則に合わない場合
    """
    match = NAME_PATTERN.match(name)
    if match is None:
        raise ValueError(f"name must follow INSTANCE_BT_IT_Idx, got {name}")
    return int(match.group(1)), int(match.group(2)), int(match.group(3))


def build_lines(profile: GenerationProfile) -> Tuple[Tuple[Machine, ...], ...]:
    """プロファイルから工程順に装置を並べたラインを作る"""
    lines = []
    for line_index, stages in enumerate(profile.lines, start=1):
        machines = []
        for stage in STAGE_ORDER:
            bounds = stages[stage]
            for _ in range(bounds.count):
                machines.append(Machine(line_index, len(machines) + 1, stage, bounds.capacity))
        lines.append(tuple(machines))
    return tuple(lines)


def _draw_seconds(entropy: List[int], lower: int, upper: int) -> int:
    """(シード, 検体, 工程, ライン) をキーとする独立ストリームから整数を1つ引く"""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
    return int(rng.integers(lower, upper, endpoint=True))


def generate_instance(
    profile: GenerationProfile,
    n_bio: int,
    n_immuno: int,
    idx: int,
    seed: int
) -> Instance:
    """
    インスタンスを生成する

    検体 1..n_bio が生化学検査、それ以降が免疫検査です。各処理時間は
    プロファイルの範囲から一様に（両端を含む整数で）引かれ、乱数は
    (seed, 検体数, 番号, i, j, l) をキーとするPhiloxのサブストリームから
    得るため、プラットフォームや生成順序によらず再現できます。

    Args:
        profile: 生成プロファイル
        n_bio: 生化学検査の検体数
        n_immuno: 免疫検査の検体数
        idx: インスタンス番号
        seed: 64ビットのシード

    Returns:
        Instance: 生成されたインスタンス

    Raises:
        ValueError: 検体数が0、またはシードが範囲外の場合

    Examples:
        >>> inst = generate_instance(realistic_profile(), 20, 80, 5, seed=1)
        >>> inst.name, inst.n
        ('INSTANCE_20_80_5', 100)
    """
    if n_bio < 0 or n_immuno < 0:
        raise ValueError(f"specimen counts must be non-negative, got {n_bio}, {n_immuno}")
    if n_bio + n_immuno < 1:
        raise ValueError("n_bio + n_immuno must be at least 1")
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit non-negative integer, got {seed}")

    lines = build_lines(profile)
    specimens = []
    for i in range(1, n_bio + n_immuno + 1):
        kind = "biochemical" if i <= n_bio else "immunologic"
        specimens.append(Specimen(id=i, test_kind=kind, route=route_for(kind)))

    times: Dict[Tuple[int, int, int], int] = {}
    for specimen in specimens:
        for j, stage in enumerate(specimen.route, start=1):
            for line in range(1, len(lines) + 1):
                bounds = profile.bounds(line, stage)
                entropy = [seed, n_bio, n_immuno, idx, specimen.id, j, line]
                times[(specimen.id, j, line)] = _draw_seconds(entropy, bounds.lower, bounds.upper)

    inst = Instance(
        name=instance_name(n_bio, n_immuno, idx),
        lines=lines,
        specimens=tuple(specimens),
        times=times,
        generation_seed=seed,
    )
    logger.debug(f"インスタンスを生成しました: {inst.name} (n={inst.n}, profile={profile.name})")
    return inst


def benchmark_plan(
    toy_count: int = 5,
    realistic_count: int = 10
) -> List[Tuple[str, int, int, int]]:
    """
    ベンチマークのインスタンス一覧を返す

    小規模は {2,4,6,8} 検体 × toy_count、実規模は {100..500} 検体 ×
    比率 {1:4, 1:1, 4:1} × realistic_count です。

    Returns:
        List[Tuple[str, int, int, int]]: (プロファイル名, 生化学数, 免疫数, 番号)
    """
    plan = []
    for n_bio, n_immuno in TOY_SIZES:
        for idx in range(1, toy_count + 1):
            plan.append(("toy", n_bio, n_immuno, idx))
    for size in REALISTIC_SIZES:
        for bio_part, immuno_part in REALISTIC_RATIOS:
            n_bio = size * bio_part // (bio_part + immuno_part)
            for idx in range(1, realistic_count + 1):
                plan.append(("realistic", n_bio, size - n_bio, idx))
    return plan


# ==================== 検証 ====================


def validate_instance(inst: Instance, profile: Optional[GenerationProfile] = None) -> ValidationReport:
    """
    インスタンスの不変条件を検証する

    違反は例外ではなくレポートの項目として返します。profileを渡すと
    処理時間が範囲内かどうかも検査します。

    Args:
        inst: 検証するインスタンス
        profile: 処理時間範囲の検査に使うプロファイル（任意）

    Returns:
        ValidationReport: 違反がなければ空
    """
    report = ValidationReport()

    if inst.f != 2:
        report.add(0, f"instance must have 2 lines, got {inst.f}")

    for line_index, line in enumerate(inst.lines, start=1):
        for machine_index, machine in enumerate(line, start=1):
            if machine.key != (line_index, machine_index):
                report.add(0, f"machine index mismatch: expected M{line_index},{machine_index}", machine.label)
            if machine.capacity < 1:
                report.add(0, f"capacity must be at least 1, got {machine.capacity}", machine.label)

    ids = [s.id for s in inst.specimens]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        report.add(0, f"specimen ids must be 1..{len(ids)}")

    for specimen in inst.specimens:
        if specimen.route != route_for(specimen.test_kind):
            report.add(0, f"route does not match test kind {specimen.test_kind}", f"J{specimen.id}")
        for j, stage in enumerate(specimen.route, start=1):
            for line in range(1, inst.f + 1):
                key = (specimen.id, j, line)
                if not inst.machines_for(stage, line):
                    report.add(2, f"no {stage.value} machine on line {line}", str(key))
                seconds = inst.times.get(key)
                if seconds is None:
                    report.add(0, "missing processing time", str(key))
                    continue
                if seconds < 1:
                    report.add(0, f"processing time must be positive, got {seconds}", str(key))
                if profile is not None and line <= len(profile.lines):
                    bounds = profile.bounds(line, stage)
                    if not bounds.lower <= seconds <= bounds.upper:
                        report.add(
                            0,
                            f"processing time {seconds} outside [{bounds.lower}, {bounds.upper}]",
                            str(key),
                        )

    if report.violations:
        logger.warning(f"{inst.name}: インスタンス検証で{len(report)}件の違反が見つかりました")
    return report


# ==================== 保存・読込 ====================


def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    """インスタンスをJSON互換の辞書に変換する"""
    return {
        "name": inst.name,
        "seed": inst.generation_seed,
        "lines": [
            {"machines": [{"stage": m.stage.value, "capacity": m.capacity} for m in line]}
            for line in inst.lines
        ],
        "specimens": [
            {"id": s.id, "kind": s.test_kind, "route": [stage.value for stage in s.route]}
            for s in inst.specimens
        ],
        "times": [
            {"i": i, "j": j, "line": line, "seconds": seconds}
            for (i, j, line), seconds in sorted(inst.times.items())
        ],
    }


def save_instance(inst: Instance, path: str) -> str:
    """
    インスタンスをJSONファイルに保存する

    Args:
        inst: 保存するインスタンス
        path: 保存先パス

    Returns:
        str: 保存したファイルパス

    Raises:
        OSError: 書き込みに失敗した場合
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")
    logger.debug(f"インスタンスを保存しました: {path}")
    return path


def _require_fields(obj: Any, expected: set, where: str, path: str) -> None:
    if not isinstance(obj, dict):
        raise InstanceParseError("expected an object", path=path, field=where or "<root>")
    unknown = sorted(set(obj) - expected)
    if unknown:
        name = f"{where}.{unknown[0]}" if where else unknown[0]
        raise InstanceParseError(f"unknown field '{unknown[0]}'", path=path, field=name)
    missing = sorted(expected - set(obj))
    if missing:
        name = f"{where}.{missing[0]}" if where else missing[0]
        raise InstanceParseError(f"missing field '{missing[0]}'", path=path, field=name)


def _require_int(value: Any, where: str, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceParseError(f"expected an integer, got {value!r}", path=path, field=where)
    return value


def _require_list(value: Any, where: str, path: str) -> List[Any]:
    if not isinstance(value, list):
        raise InstanceParseError(f"expected a list, got {type(value).__name__}", path=path, field=where)
    return value


def _require_stage(value: Any, where: str, path: str) -> StageKind:
    try:
        return StageKind(value)
    except ValueError:
        raise InstanceParseError(f"unknown stage {value!r}", path=path, field=where) from None


def instance_from_dict(data: Any, path: str = "<memory>") -> Instance:
    """
    辞書からインスタンスを復元する（未知のフィールドはエラー）

    Raises:
        InstanceParseError: スキーマに合わない場合
    """
    _require_fields(data, _TOP_FIELDS, "", path)
    if not isinstance(data["name"], str):
        raise InstanceParseError("expected a string", path=path, field="name")
    seed = _require_int(data["seed"], "seed", path)

    lines = []
    for l_pos, line in enumerate(_require_list(data["lines"], "lines", path)):
        where = f"lines[{l_pos}]"
        _require_fields(line, _LINE_FIELDS, where, path)
        machines = []
        for k_pos, raw in enumerate(_require_list(line["machines"], f"{where}.machines", path)):
            m_where = f"{where}.machines[{k_pos}]"
            _require_fields(raw, _MACHINE_FIELDS, m_where, path)
            stage = _require_stage(raw["stage"], f"{m_where}.stage", path)
            capacity = _require_int(raw["capacity"], f"{m_where}.capacity", path)
            machines.append(Machine(l_pos + 1, k_pos + 1, stage, capacity))
        lines.append(tuple(machines))

    specimens = []
    for s_pos, raw in enumerate(_require_list(data["specimens"], "specimens", path)):
        where = f"specimens[{s_pos}]"
        _require_fields(raw, _SPECIMEN_FIELDS, where, path)
        sid = _require_int(raw["id"], f"{where}.id", path)
        route = tuple(
            _require_stage(stage, f"{where}.route[{r_pos}]", path)
            for r_pos, stage in enumerate(_require_list(raw["route"], f"{where}.route", path))
        )
        try:
            specimens.append(Specimen(id=sid, test_kind=raw["kind"], route=route))
        except ValueError as e:
            raise InstanceParseError(str(e), path=path, field=f"{where}.kind") from None

    times: Dict[Tuple[int, int, int], int] = {}
    for t_pos, raw in enumerate(_require_list(data["times"], "times", path)):
        where = f"times[{t_pos}]"
        _require_fields(raw, _TIME_FIELDS, where, path)
        key = (
            _require_int(raw["i"], f"{where}.i", path),
            _require_int(raw["j"], f"{where}.j", path),
            _require_int(raw["line"], f"{where}.line", path),
        )
        if key in times:
            raise InstanceParseError(f"duplicate entry {key}", path=path, field=where)
        times[key] = _require_int(raw["seconds"], f"{where}.seconds", path)

    return Instance(
        name=data["name"],
        lines=tuple(lines),
        specimens=tuple(specimens),
        times=times,
        generation_seed=seed,
    )


def load_instance(path: str) -> Instance:
    """
    JSONファイルからインスタンスを読み込む

    Args:
        path: ファイルパス

    Returns:
        Instance: 読み込んだインスタンス

    Raises:
        InstanceParseError: JSONが壊れている、またはスキーマに合わない場合
        FileNotFoundError: ファイルが存在しない場合
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(e.msg, path=str(path), line=e.lineno) from None
    inst = instance_from_dict(data, path=str(path))
    logger.debug(f"インスタンスを読み込みました: {inst.name} ({path})")
    return inst


# ==================== 例題フィクスチャ ====================


def example6_instance() -> Instance:
    """6検体・2ラインの例題インスタンスを読み込む"""
    return load_instance(str(DATA_DIR / "example6.json"))


def load_assignment(path: str) -> Assignment:
    """
    決定変数（値が1の X, Y, Z の添字）をJSONファイルから読み込む

    Raises:
        InstanceParseError: JSONが壊れている、または x / y / z が欠けている場合
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(e.msg, path=str(path), line=e.lineno) from None
    _require_fields(data, {"x", "y", "z"}, "", str(path))
    return Assignment(
        x=frozenset(tuple(int(a) for a in v) for v in data["x"]),
        y=frozenset(tuple(int(a) for a in v) for v in data["y"]),
        z=frozenset(tuple(int(a) for a in v) for v in data["z"]),
    )


def load_example6_assignment() -> Assignment:
    """例題の決定変数（値が1のもの）を読み込む"""
    return load_assignment(str(DATA_DIR / "example6_assignment.json"))


def load_example6_tie_choices() -> List[Tuple[int, int]]:
    """例題のタイブレーク記録（(l, k) の列）を読み込む"""
    with open(DATA_DIR / "example6_ties.json", "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [tuple(choice) for choice in data["choices"]]

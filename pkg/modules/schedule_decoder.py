"""
labsched スケジュールデコーダ

このモジュールは以下の機能を提供します：
- FABM（First Available Batch Machine）による検体順序のデコード
- タイブレーク方針（seeded-random / lowest-index / recorded）
- MTATの評価
- 決定変数（X, Y, Z）からのタイミング実現
- 制約 (2)〜(15) に対するスケジュール検証
- スケジュールから決定変数への書き出し
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import InfeasibleAssignmentError
from .models import (
    Assignment,
    Batch,
    Instance,
    OperationRef,
    Schedule,
    ValidationReport,
)

logger = logging.getLogger(__name__)

MachineKey = Tuple[int, int]


# ==================== タイブレーク ====================


class LowestIndexTieBreaker:
    """(l, k) の昇順で最小の装置を選ぶ"""

    def choose(self, candidates: Sequence[MachineKey]) -> MachineKey:
        return min(candidates)


class SeededRandomTieBreaker:
    """シード付き乱数で候補から一様に選ぶ"""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def choose(self, candidates: Sequence[MachineKey]) -> MachineKey:
        ordered = sorted(candidates)
        return ordered[int(self.rng.integers(len(ordered)))]


class RecordedTieBreaker:
    """
    記録された選択を順に消費する

    記録された装置が候補にない場合や記録を使い切った場合は
    (l, k) の昇順で最小の装置を選びます。
    """

    def __init__(self, choices: Sequence[MachineKey]):
        self.choices = list(choices)
        self.cursor = 0

    def choose(self, candidates: Sequence[MachineKey]) -> MachineKey:
        if self.cursor < len(self.choices):
            choice = tuple(self.choices[self.cursor])
            self.cursor += 1
            if choice in candidates:
                return choice
        return min(candidates)


TIE_POLICY_ALIASES = {"paper-example": "recorded"}


def make_tie_breaker(
    policy: str,
    seed: int = 0,
    choices: Optional[Sequence[MachineKey]] = None
):
    """
    タイブレーク方針からタイブレーカーを作成する

    Args:
        policy: "seeded-random" | "lowest-index" | "recorded"（"paper-example" は "recorded" の別名）
        seed: seeded-randomのシード
        choices: recordedの記録（Noneの場合は例題の記録を読み込む）

    Raises:
        ValueError: 未知の方針の場合
    """
    policy = TIE_POLICY_ALIASES.get(policy, policy)
    if policy == "lowest-index":
        return LowestIndexTieBreaker()
    if policy == "seeded-random":
        return SeededRandomTieBreaker(seed)
    if policy == "recorded":
        if choices is None:
            from .instance_model import load_example6_tie_choices
            choices = load_example6_tie_choices()
        return RecordedTieBreaker(choices)
    raise ValueError(f"tie_policy must be seeded-random, lowest-index or recorded, got {policy}")


# ==================== FABM ====================


@dataclass
class _MachineState:
    """1工程分の装置の状態"""
    key: MachineKey
    capacity: int
    free_at: int = 0
    open_chunk: List[Tuple[int, int, int]] = field(default_factory=list)  # (検体, 到着, 処理時間)
    closed: List[Tuple[Tuple[int, ...], int, int, int]] = field(default_factory=list)
    position_offset: int = 0

    def available(self, arrival: int) -> bool:
        return bool(self.open_chunk) or self.free_at <= arrival

    def remaining_after(self) -> int:
        return self.capacity - len(self.open_chunk) - 1

    def add(self, sid: int, arrival: int, seconds: int) -> None:
        self.open_chunk.append((sid, arrival, seconds))
        if len(self.open_chunk) >= self.capacity:
            self.close()

    def close(self) -> None:
        if not self.open_chunk:
            return
        members = tuple(sid for sid, _, _ in self.open_chunk)
        ready = max(arrival for _, arrival, _ in self.open_chunk)
        seconds = max(p for _, _, p in self.open_chunk)
        start = max(self.free_at, ready)
        self.free_at = start + seconds
        self.closed.append((members, seconds, start, self.free_at))
        self.open_chunk = []


def _check_permutation(inst: Instance, vss: Sequence[int], full: bool) -> List[int]:
    order = [int(i) for i in vss]
    known = set(inst.specimen_ids)
    if len(set(order)) != len(order):
        raise ValueError(f"vss must not repeat specimen ids, got {order}")
    unknown = [i for i in order if i not in known]
    if unknown:
        raise ValueError(f"vss contains unknown specimen ids {unknown}")
    if full and len(order) != len(known):
        raise ValueError(f"vss must be a permutation of {inst.n} specimens, got {len(order)} ids")
    return order


def _decode(inst: Instance, order: List[int], tie_breaker) -> Schedule:
    position = {sid: p for p, sid in enumerate(order)}
    arrival = dict.fromkeys(order, 0)
    line_of: Dict[int, int] = {}
    available: Dict[OperationRef, int] = {}
    tat: Dict[int, int] = {}
    batches: List[Batch] = []
    routes = {sid: inst.specimen_by_id[sid].route for sid in order}
    positions_used: Dict[MachineKey, int] = {}
    max_ops = max((len(r) for r in routes.values()), default=0)

    for j in range(1, max_ops + 1):
        queue = sorted((sid for sid in order if j <= len(routes[sid])),
                       key=lambda sid: (arrival[sid], position[sid]))
        states: Dict[MachineKey, _MachineState] = {}

        for sid in queue:
            stage = routes[sid][j - 1]
            if j == 1:
                candidates = [m for line in range(1, inst.f + 1) for m in inst.machines_for(stage, line)]
            else:
                candidates = list(inst.machines_for(stage, line_of[sid]))
            if not candidates:
                raise ValueError(f"no eligible machine for operation ({sid}, {j})")

            pool = []
            for machine in candidates:
                state = states.get(machine.key)
                if state is None:
                    state = _MachineState(machine.key, machine.capacity)
                    states[machine.key] = state
                pool.append(state)

            t = arrival[sid]
            ready = [s for s in pool if s.available(t)]
            if ready:
                best = min(s.remaining_after() for s in ready)
                tied = [s.key for s in ready if s.remaining_after() == best]
            else:
                earliest = min(s.free_at for s in pool)
                tied = [s.key for s in pool if s.free_at == earliest]
            chosen = tied[0] if len(tied) == 1 else tie_breaker.choose(tied)

            available[(sid, j)] = t
            if j == 1:
                line_of[sid] = chosen[0]
            states[chosen].add(sid, t, inst.times[(sid, j, chosen[0])])

        for key in sorted(states):
            state = states[key]
            state.close()
            for members, seconds, start, completion in state.closed:
                r = positions_used.get(key, 0) + 1
                positions_used[key] = r
                batches.append(Batch(
                    line=key[0],
                    machine=key[1],
                    position=r,
                    members=tuple((sid, j) for sid in members),
                    processing_time=seconds,
                    start=start,
                    completion=completion,
                ))
                for sid in members:
                    arrival[sid] = completion
                    if j == len(routes[sid]):
                        tat[sid] = completion

    return Schedule(line_of=line_of, batches=tuple(batches), available=available, tat=tat)


def decode_fabm(
    inst: Instance,
    vss: Sequence[int],
    tie_policy: str = "seeded-random",
    tie_seed: int = 0,
    tie_choices: Optional[Sequence[MachineKey]] = None
) -> Schedule:
    """
    FABMで検体順序を実行可能なバッチスケジュールにデコードする

    工程ごとに、到着時刻の昇順（同着は順序の先のもの優先）で検体を処理します。
    第1工程では両ラインの装置が候補となり、選ばれた装置のラインが検体の
    ラインに固定されます。利用可能な装置（未満杯のバッチを持つか、到着時に
    空いている装置）のうち追加後の残り容量が最小のものを選び、同点は
    タイブレーク方針で決めます。利用可能な装置がなければ最も早く空く装置の
    待ち行列に並びます。装置ごとの割当ては到着順に容量単位で区切って
    バッチとし、バッチは全メンバーが到着し装置が空いた時点で開始します。

    Args:
        inst: インスタンス
        vss: 検体順序（全検体の順列）
        tie_policy: タイブレーク方針
        tie_seed: seeded-randomのシード
        tie_choices: recordedの記録

    Returns:
        Schedule: 実行可能なスケジュール

    Raises:
        ValueError: vssが検体の順列でない場合

    Examples:
        >>> inst = example6_instance()
        >>> decode_fabm(inst, [3, 1, 6, 4, 5, 2], "recorded").mtat
        1569.5
    """
    order = _check_permutation(inst, vss, full=True)
    return _decode(inst, order, make_tie_breaker(tie_policy, tie_seed, tie_choices))


def decode_partial(
    inst: Instance,
    vss: Sequence[int],
    tie_policy: str = "seeded-random",
    tie_seed: int = 0
) -> Schedule:
    """検体の部分集合の順序をデコードする（構築法の挿入評価用）"""
    order = _check_permutation(inst, vss, full=False)
    return _decode(inst, order, make_tie_breaker(tie_policy, tie_seed))


def evaluate_mtat(sched: Schedule) -> float:
    """平均TAT（秒）"""
    return sched.mtat


def format_mtat(value: float) -> str:
    """MTATを小数2桁で表記する"""
    return f"{value:.2f}"


# ==================== 決定変数からの実現 ====================


def realize_from_assignment(inst: Instance, asg: Assignment) -> Schedule:
    """
    決定変数（X, Y, Z）から最早開始のタイミングを実現する

    各バッチは装置上の直前バッチの完了時刻と、メンバーの到着時刻の最大値の
    遅い方で開始します。第1工程の到着時刻は0です。

    Args:
        inst: インスタンス
        asg: 値が1の決定変数

    Returns:
        Schedule: タイミングを計算したスケジュール

    Raises:
        InfeasibleAssignmentError: 割当てが制約を満たさない場合（制約番号付き）
    """
    line_of: Dict[int, int] = {}
    for i, line in sorted(asg.x):
        if i not in inst.specimen_by_id:
            raise InfeasibleAssignmentError(2, f"unknown specimen {i} in X")
        if not 1 <= line <= inst.f:
            raise InfeasibleAssignmentError(2, f"specimen {i} assigned to unknown line {line}")
        if i in line_of:
            raise InfeasibleAssignmentError(2, f"specimen {i} assigned to more than one line")
        line_of[i] = line
    missing = sorted(set(inst.specimen_ids) - set(line_of))
    if missing:
        raise InfeasibleAssignmentError(2, f"specimens {missing} have no line")

    batch_members: Dict[Tuple[int, int, int], List[OperationRef]] = {}
    placed: Dict[OperationRef, Tuple[int, int, int]] = {}
    for i, j, d, line, k in sorted(asg.y):
        if (i, j) in placed:
            raise InfeasibleAssignmentError(4, f"operation ({i}, {j}) assigned to more than one batch")
        if line_of.get(i) != line:
            raise InfeasibleAssignmentError(3, f"operation ({i}, {j}) placed on line {line}, specimen is on line {line_of.get(i)}")
        if not inst.eligible(i, j, line, k):
            raise InfeasibleAssignmentError(3, f"operation ({i}, {j}) is not eligible on M{line},{k}")
        placed[(i, j)] = (line, k, d)
        batch_members.setdefault((line, k, d), []).append((i, j))
    for specimen in inst.specimens:
        for j in range(1, len(specimen.route) + 1):
            if (specimen.id, j) not in placed:
                raise InfeasibleAssignmentError(4, f"operation ({specimen.id}, {j}) is not assigned")

    for (line, k, d), members in batch_members.items():
        capacity = inst.machine_by_key[(line, k)].capacity
        if len(members) > capacity:
            raise InfeasibleAssignmentError(5, f"batch {d} on M{line},{k} holds {len(members)} > {capacity}")

    position_of: Dict[Tuple[int, int, int], int] = {}
    occupied: Dict[Tuple[int, int, int], Tuple[int, int, int]] = {}
    for d, line, k, r in sorted(asg.z):
        key = (line, k, d)
        if key not in batch_members:
            raise InfeasibleAssignmentError(7, f"position given to empty batch {d} on M{line},{k}")
        if key in position_of:
            raise InfeasibleAssignmentError(7, f"batch {d} on M{line},{k} has more than one position")
        if (line, k, r) in occupied:
            raise InfeasibleAssignmentError(6, f"position {r} on M{line},{k} holds more than one batch")
        position_of[key] = r
        occupied[(line, k, r)] = key
    for key in batch_members:
        if key not in position_of:
            raise InfeasibleAssignmentError(7, f"batch {key[2]} on M{key[0]},{key[1]} has no position")

    sequences: Dict[MachineKey, List[Tuple[int, int, int]]] = {}
    for key in sorted(batch_members, key=lambda b: position_of[b]):
        sequences.setdefault((key[0], key[1]), []).append(key)
    for machine_key, keys in sequences.items():
        if [position_of[b] for b in keys] != list(range(1, len(keys) + 1)):
            raise InfeasibleAssignmentError(6, f"positions on M{machine_key[0]},{machine_key[1]} are not 1..{len(keys)}")

    graph = nx.DiGraph()
    graph.add_nodes_from(batch_members)
    for keys in sequences.values():
        graph.add_edges_from(zip(keys, keys[1:]))
    for (i, j), key in placed.items():
        if (i, j + 1) in placed:
            graph.add_edge(key, placed[(i, j + 1)])
    try:
        order = list(nx.lexicographical_topological_sort(graph))
    except nx.NetworkXUnfeasible:
        raise InfeasibleAssignmentError(12, "machine sequences contradict operation precedence") from None

    completion: Dict[Tuple[int, int, int], int] = {}
    available: Dict[OperationRef, int] = {}
    tat: Dict[int, int] = {}
    batches: List[Batch] = []
    for key in order:
        line, k, d = key
        r = position_of[key]
        members = sorted(batch_members[key])
        for i, j in members:
            available[(i, j)] = 0 if j == 1 else completion[placed[(i, j - 1)]]
        previous = completion[sequences[(line, k)][r - 2]] if r > 1 else 0
        seconds = max(inst.times[(i, j, line)] for i, j in members)
        start = max([previous] + [available[m] for m in members])
        completion[key] = start + seconds
        batches.append(Batch(line, k, r, tuple(members), seconds, start, start + seconds))
        for i, j in members:
            if j == len(inst.specimen_by_id[i].route):
                tat[i] = start + seconds

    batches.sort(key=lambda b: (b.line, b.machine, b.position))
    return Schedule(line_of=line_of, batches=tuple(batches), available=available, tat=tat)


# ==================== 検証 ====================


def validate_schedule(inst: Instance, sched: Schedule) -> ValidationReport:
    """
    スケジュールを制約 (2)〜(15) に照らして検証する

    違反は制約番号付きでレポートに追加され、例外は送出しません。

    Args:
        inst: インスタンス
        sched: 検証するスケジュール

    Returns:
        ValidationReport: 違反がなければ空
    """
    report = ValidationReport()

    for specimen in inst.specimens:
        line = sched.line_of.get(specimen.id)
        if line is None or not 1 <= line <= inst.f:
            report.add(2, f"specimen {specimen.id} has no valid line", f"J{specimen.id}")

    batch_of: Dict[OperationRef, Batch] = {}
    for batch in sched.batches:
        machine = inst.machine_by_key.get(batch.machine_key)
        label = f"M{batch.line},{batch.machine}"
        if machine is None:
            report.add(3, "batch on unknown machine", label)
            continue
        for i, j in batch.members:
            if (i, j) in batch_of:
                report.add(4, f"operation ({i}, {j}) appears in more than one batch", label)
            batch_of[(i, j)] = batch
            if i not in inst.specimen_by_id or not inst.eligible(i, j, batch.line, batch.machine):
                report.add(3, f"operation ({i}, {j}) is not eligible", label)
            elif sched.line_of.get(i) != batch.line:
                report.add(3, f"operation ({i}, {j}) is off its line {sched.line_of.get(i)}", label)
        if len(batch.members) > machine.capacity:
            report.add(5, f"batch holds {len(batch.members)} > capacity {machine.capacity}", label)
        try:
            expected = max(inst.times[(i, j, batch.line)] for i, j in batch.members)
        except (KeyError, ValueError):
            expected = None
        if expected is not None and batch.processing_time != expected:
            report.add(8, f"processing time {batch.processing_time} != max member time {expected}", label)
        if batch.completion != batch.start + batch.processing_time:
            report.add(9, "completion != start + processing time", label)
        if batch.start < 0:
            report.add(13, f"negative start {batch.start}", label)

    for specimen in inst.specimens:
        for j in range(1, len(specimen.route) + 1):
            if (specimen.id, j) not in batch_of:
                report.add(4, f"operation ({specimen.id}, {j}) is not scheduled", f"J{specimen.id}")

    for machine_key, batches in sched.machine_batches.items():
        label = f"M{machine_key[0]},{machine_key[1]}"
        positions = [b.position for b in batches]
        if positions != list(range(1, len(batches) + 1)):
            if len(set(positions)) != len(positions):
                report.add(6, f"positions {positions} repeat", label)
            else:
                report.add(7, f"positions {positions} are not 1..{len(batches)}", label)
        for previous, current in zip(batches, batches[1:]):
            if current.start < previous.completion:
                report.add(10, f"batch at position {current.position} starts before position {previous.position} completes", label)

    for (i, j), batch in batch_of.items():
        arrival = sched.available.get((i, j))
        if arrival is None:
            report.add(11, f"operation ({i}, {j}) has no availability time", f"J{i}")
            continue
        if arrival < 0:
            report.add(14, f"negative availability {arrival}", f"O{i},{j}")
        if j == 1 and arrival != 0:
            report.add(13, f"first operation availability must be 0, got {arrival}", f"O{i},{j}")
        if batch.start < arrival:
            report.add(11, f"operation ({i}, {j}) starts at {batch.start} before availability {arrival}", f"O{i},{j}")
        following = batch_of.get((i, j + 1))
        if following is not None:
            if following.start < batch.completion:
                report.add(12, f"operation ({i}, {j + 1}) starts before operation ({i}, {j}) completes", f"O{i},{j + 1}")
            next_arrival = sched.available.get((i, j + 1))
            if next_arrival is not None and next_arrival < batch.completion:
                report.add(12, f"availability of ({i}, {j + 1}) precedes completion of ({i}, {j})", f"O{i},{j + 1}")

    for specimen in inst.specimens:
        last = batch_of.get((specimen.id, len(specimen.route)))
        if last is None:
            continue
        if sched.tat.get(specimen.id) != last.completion:
            report.add(15, f"TAT {sched.tat.get(specimen.id)} != last completion {last.completion}", f"J{specimen.id}")
    if set(sched.tat) != set(inst.specimen_ids):
        report.add(15, "TAT must be defined for exactly the instance specimens")

    if report.violations:
        logger.debug(f"スケジュール検証で{len(report)}件の違反: 制約 {report.constraints()}")
    return report


# ==================== 決定変数の書き出し ====================


def export_assignment(sched: Schedule) -> Assignment:
    """
    スケジュールから値が1の決定変数を書き出す

    バッチ番号 d は装置ごとにメンバーの最小検体番号の昇順で振ります。

    Args:
        sched: スケジュール

    Returns:
        Assignment: X, Y, Z の集合
    """
    x = frozenset((i, line) for i, line in sched.line_of.items())
    y = set()
    z = set()
    for (line, k), batches in sched.machine_batches.items():
        labelled = sorted(batches, key=lambda b: min(i for i, _ in b.members))
        for d, batch in enumerate(labelled, start=1):
            z.add((d, line, k, batch.position))
            for i, j in batch.members:
                y.add((i, j, d, line, k))
    return Assignment(x=x, y=frozenset(y), z=frozenset(z))

"""
テスト用の補助関数（全列挙による最適値、決定変数の列挙と標本化など）
"""

from itertools import permutations, product

from modules.errors import InfeasibleAssignmentError
from modules.models import Assignment
from modules.schedule_decoder import decode_fabm, realize_from_assignment


def brute_force_values(inst, tie_policy="seeded-random", tie_seed=0):
    """全順列をデコードした (順序, MTAT) の一覧"""
    return [
        (list(p), decode_fabm(inst, p, tie_policy, tie_seed).mtat)
        for p in permutations(inst.specimen_ids)
    ]


def brute_force_optimum(inst, tie_policy="seeded-random", tie_seed=0):
    """全列挙による最小MTAT"""
    return min(value for _, value in brute_force_values(inst, tie_policy, tie_seed))


def _operations(inst):
    return [(s.id, j) for s in inst.specimens for j in range(1, len(s.route) + 1)]


def _stage(inst, i, j):
    return inst.specimen_by_id[i].route[j - 1]


def _build_assignment(line_of, layouts):
    """装置ごとのバッチ列（処理順）から決定変数を組み立てる（d は位置と同じ）"""
    y, z = set(), set()
    for (line, k), groups in layouts:
        for r, group in enumerate(groups, start=1):
            z.add((r, line, k, r))
            for i, j in group:
                y.add((i, j, r, line, k))
    return Assignment(x=frozenset(line_of.items()), y=frozenset(y), z=frozenset(z))


def _pair_layouts(inst, key, members):
    """1台の装置に載る操作（2検体なので最大2つ）の並べ方"""
    if len(members) == 1:
        return [(key, (tuple(members),))]
    a, b = members
    layouts = [(key, ((a,), (b,))), (key, ((b,), (a,)))]
    if inst.machine_by_key[key].capacity >= 2:
        layouts.append((key, ((a, b),)))
    return layouts


def feasible_assignments(inst):
    """
    2検体インスタンスの実行可能な決定変数 (X, Y, Z) をすべて列挙する

    ライン割当て・装置選択・バッチ化・処理順のすべての組合せを作り、
    工程の先行関係と矛盾するもの（制約 (12)）を除いて (割当て, スケジュール) を返す。
    """
    first, second = inst.specimen_ids
    operations = _operations(inst)
    for lines in product(range(1, inst.f + 1), repeat=2):
        line_of = {first: lines[0], second: lines[1]}
        choices = [
            [m.machine_index for m in inst.machines_for(_stage(inst, i, j), line_of[i])]
            for i, j in operations
        ]
        for picks in product(*choices):
            on_machine = {}
            for (i, j), k in zip(operations, picks):
                on_machine.setdefault((line_of[i], k), []).append((i, j))
            options = [_pair_layouts(inst, key, members) for key, members in sorted(on_machine.items())]
            for layouts in product(*options):
                asg = _build_assignment(line_of, layouts)
                try:
                    yield asg, realize_from_assignment(inst, asg)
                except InfeasibleAssignmentError as e:
                    if e.constraint != 12:
                        raise


def assignment_optimum(inst):
    """決定変数の全列挙による最小MTAT（2検体用）"""
    return min(sched.mtat for _, sched in feasible_assignments(inst))


def random_assignment(inst, rng):
    """
    容量・適合度・ラインの制約を満たす決定変数を無作為に1つ作る

    装置ごとの処理順は無作為なので、工程の先行関係と矛盾することがある。
    """
    line_of = {i: int(rng.integers(1, inst.f + 1)) for i in inst.specimen_ids}
    on_machine = {}
    for i, j in _operations(inst):
        machines = inst.machines_for(_stage(inst, i, j), line_of[i])
        k = machines[int(rng.integers(len(machines)))].machine_index
        on_machine.setdefault((line_of[i], k), []).append((i, j))

    layouts = []
    for key, members in sorted(on_machine.items()):
        capacity = inst.machine_by_key[key].capacity
        shuffled = [members[p] for p in rng.permutation(len(members))]
        groups = []
        while shuffled:
            size = int(rng.integers(1, min(capacity, len(shuffled)) + 1))
            groups.append(tuple(shuffled[:size]))
            shuffled = shuffled[size:]
        layouts.append((key, tuple(groups)))
    return _build_assignment(line_of, layouts)

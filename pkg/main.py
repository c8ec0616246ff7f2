"""
labsched コマンドラインインターフェース

このスクリプトは以下のサブコマンドを提供します：
- gen: インスタンス生成（--benchmark で全ベンチマーク一覧）
- solve: 探索アルゴリズムの実行
- decode: 検体順序のFABMデコード
- validate: インスタンス・スケジュール・決定変数の検証
- distance: 2つの順序のJPR距離
- moments: 近傍間距離の理論値と経験値の表
- landscape fdc|ac|lon: ランドスケープ解析
- bench: マニフェストに従った実験
- metrics: 結果CSVからの指標計算
- bestknown: 最良既知値の表の作成
"""

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

import pandas as pd

from config import TIE_POLICIES, Config, setup_logging
from modules.bench_harness import (
    RESULT_COLUMNS,
    append_rows,
    best_known_table,
    friedman_ranks,
    load_best_known,
    metrics_table,
    read_results,
    run_suite,
    save_best_known,
    summarize_by_size,
)
from modules.exporter import export_graph, read_schedule, write_assignment, write_batch_intervals, write_schedule
from modules.instance_model import (
    benchmark_plan,
    generate_instance,
    get_profile,
    load_assignment,
    load_instance,
    save_instance,
    validate_instance,
)
from modules.landscape_analysis import (
    autocorrelation_table,
    build_lon,
    compress_plateaus,
    correlation_length,
    fdc,
    fdc_samples_from_run,
    plateau_stats,
    random_walk,
)
from modules.models import ResultRecord
from modules.neighborhoods import jpr_distance, moments_table
from modules.schedule_decoder import (
    decode_fabm,
    export_assignment,
    format_mtat,
    realize_from_assignment,
    validate_schedule,
)
from modules.search_engines import ALGORITHMS, NEIGHBORHOODS, run_algorithm

logger = logging.getLogger(__name__)

BANNER = "=" * 80


def parse_vss(text: str) -> List[int]:
    """ "3,1,6,4,5,2" 形式の検体順序を解析する"""
    try:
        return [int(token) for token in text.replace(" ", "").split(",") if token]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid specimen sequence: {text}") from None


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list: {text}") from None


# ==================== サブコマンド ====================


def cmd_gen(args: argparse.Namespace, config: Config) -> int:
    """インスタンスを生成して保存する"""
    out_dir = args.out or config.INSTANCE_DIR
    seed = config.GENERATION_SEED if args.seed is None else args.seed
    if args.benchmark:
        plan = benchmark_plan(config.TOY_INSTANCES_PER_SIZE, config.INSTANCES_PER_SIZE)
    else:
        if args.bio is None or args.immuno is None:
            logger.error("--bio と --immuno を指定してください（または --benchmark）")
            return 1
        plan = [(args.profile, args.bio, args.immuno, idx) for idx in range(args.idx, args.idx + args.count)]

    for profile_name, n_bio, n_immuno, idx in plan:
        inst = generate_instance(get_profile(profile_name), n_bio, n_immuno, idx, seed)
        save_instance(inst, os.path.join(out_dir, f"{inst.name}.json"))
    logger.info(f"インスタンスを生成しました: {len(plan)}件 → {out_dir}")
    return 0


def cmd_solve(args: argparse.Namespace, config: Config) -> int:
    """
    探索を反復実行する

    反復 r のシードは seed + r − 1 です。--out が .csv の場合は反復ごとの
    結果行を追記し、それ以外は接頭辞として最良スケジュールを書き出します。
    """
    if args.reps < 1:
        logger.error(f"--reps は1以上を指定してください: {args.reps}")
        return 1
    inst = load_instance(args.instance)
    budget = args.budget or config.EVAL_BUDGET
    best = None
    rows = []
    for rep in range(1, args.reps + 1):
        seed = args.seed + rep - 1
        result = run_algorithm(inst, args.algo, args.nbhd, budget, seed, config=config)
        logger.info(
            f"{inst.name}: {args.algo}/{args.nbhd} 反復{rep} 最良MTAT={format_mtat(result.best_mtat)} "
            f"(評価回数={result.evaluations}, CPU={result.cpu_seconds:.2f}秒)"
        )
        print(format_mtat(result.best_mtat))
        record = ResultRecord(inst.name, args.algo, args.nbhd, seed, rep,
                              result.best_mtat, result.evaluations, result.cpu_seconds)
        rows.append({c: getattr(record, c) for c in RESULT_COLUMNS})
        if best is None or result.best_mtat < best.best_mtat:
            best = result

    if args.out and args.out.endswith(".csv"):
        append_rows(args.out, rows, RESULT_COLUMNS)
        logger.info(f"結果を保存しました: {args.out} ({len(rows)}行)")
    elif args.out:
        sched = decode_fabm(inst, best.best_vss, config.TIE_POLICY, config.TIE_SEED)
        write_schedule(sched, f"{args.out}.json")
        write_batch_intervals(sched, f"{args.out}_batches.csv")
    return 0


def cmd_decode(args: argparse.Namespace, config: Config) -> int:
    """検体順序をデコードしてMTATを表示する"""
    inst = load_instance(args.instance)
    policy = args.tie_policy or config.TIE_POLICY
    seed = config.TIE_SEED if args.tie_seed is None else args.tie_seed
    sched = decode_fabm(inst, args.vss, policy, seed)
    print(format_mtat(sched.mtat))
    if args.out:
        write_schedule(sched, f"{args.out}.json")
        write_batch_intervals(sched, f"{args.out}_batches.csv")
        write_assignment(export_assignment(sched), f"{args.out}_assignment.json")
    return 0


def cmd_validate(args: argparse.Namespace, config: Config) -> int:
    """インスタンスと、指定があればスケジュール・決定変数を検証する"""
    inst = load_instance(args.instance)
    reports = [("instance", validate_instance(inst))]
    if args.schedule:
        reports.append(("schedule", validate_schedule(inst, read_schedule(args.schedule))))
    if args.assignment:
        sched = realize_from_assignment(inst, load_assignment(args.assignment))
        reports.append(("assignment", validate_schedule(inst, sched)))
        print(format_mtat(sched.mtat))

    failed = False
    for label, report in reports:
        if report.ok:
            logger.info(f"{label}: 違反なし")
            continue
        failed = True
        for violation in report.violations:
            logger.error(f"{label}: 制約({violation.constraint}) {violation.message} {violation.location}".rstrip())
    return 1 if failed else 0


def cmd_distance(args: argparse.Namespace, config: Config) -> int:
    p1 = args.p1_flag or args.p1
    p2 = args.p2_flag or args.p2
    if p1 is None or p2 is None:
        logger.error("2つの検体順序を指定してください（--p1 と --p2）")
        return 1
    print(f"{jpr_distance(p1, p2):.6f}")
    return 0


def cmd_moments(args: argparse.Namespace, config: Config) -> int:
    """近傍間距離の理論値（と経験値）の表を出力する"""
    table = moments_table(
        args.kinds.split(","),
        args.sizes,
        block_size=args.block_size or config.BLOCK_SIZE,
        samples=args.samples,
        seed=args.seed,
    )
    if args.out:
        table.to_csv(args.out, index=False)
        logger.info(f"モーメント表を保存しました: {args.out}")
    print(table.to_string(index=False))
    return 0


def cmd_landscape(args: argparse.Namespace, config: Config) -> int:
    """FDC・自己相関・LONを計算してCSV/グラフを出力する"""
    inst = load_instance(args.instance)
    prefix = args.out or os.path.join(config.OUTPUT_DIR, inst.name)
    os.makedirs(os.path.dirname(os.path.abspath(prefix)), exist_ok=True)

    if args.analysis == "fdc":
        budget = args.budget or config.EVAL_BUDGET
        result = run_algorithm(inst, args.algo, args.nbhd, budget, args.seed, config=config, record_accepted=True)
        samples = fdc_samples_from_run(result)
        pd.DataFrame([(s.fitness, s.distance) for s in samples], columns=["fitness", "distance"]).to_csv(
            f"{prefix}_fdc.csv", index=False)
        value = fdc(samples)
        logger.info(f"{inst.name}: FDC={value:.4f} ({len(samples)}標本)")
        print(f"{value:.6f}")
    elif args.analysis == "ac":
        kind = "swp" if args.nbhd in ("ml", "auto") else args.nbhd
        series = random_walk(inst, kind, args.walk or config.WALK_LENGTH, args.seed, config.BLOCK_SIZE)
        table = autocorrelation_table(series, range(0, args.lag + 1))
        table.to_csv(f"{prefix}_ac.csv", index=False)
        ac1 = float(table.loc[table["lag"] == min(1, args.lag), "ac"].iloc[0])
        logger.info(f"{inst.name}: AC({min(1, args.lag)})={ac1:.4f}, 相関長={correlation_length(ac1):.3f}")
        print(table.to_string(index=False))
    else:
        lon = build_lon(
            inst, args.algo, args.nbhd,
            runs=args.runs, stagnation=args.stagnation, seed=args.seed,
            workers=args.workers or config.MAX_WORKERS, mode=args.mode, config=config,
        )
        plateaus = compress_plateaus(lon, config.PLATEAU_TOLERANCE)
        export_graph(plateaus, f"{prefix}.{args.format}", args.format)
        stats = plateau_stats(plateaus)
        stats.to_csv(f"{prefix}_plateaus.csv", index=False)
        print(stats.to_string(index=False))
    return 0


def cmd_bench(args: argparse.Namespace, config: Config) -> int:
    summary = run_suite(args.manifest, config)
    logger.info(f"計画{summary.planned}セル: 実行{summary.completed}, 失敗{summary.failed}, スキップ{summary.skipped}")
    return 0


def cmd_metrics(args: argparse.Namespace, config: Config) -> int:
    """結果CSVから指標・規模別集計・フリードマン平均順位を出力する"""
    results = read_results(args.results or config.RESULTS_PATH)
    best_known = load_best_known(args.best_known) if args.best_known else best_known_table(results)
    metrics = metrics_table(results, best_known)
    out = args.out or config.METRICS_PATH
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    metrics.to_csv(out, index=False)
    logger.info(f"指標を保存しました: {out} ({len(metrics)}行)")

    if args.summary:
        summarize_by_size(metrics).to_csv(args.summary, index=False)
        logger.info(f"規模別集計を保存しました: {args.summary}")

    if args.friedman:
        subset = metrics[metrics["algo"] == args.friedman]
        matrix = subset.pivot_table(index="instance", columns="nbhd", values="ARPD").dropna()
        if matrix.empty or matrix.shape[1] < 2:
            logger.error(f"{args.friedman}: フリードマン検定に必要な近傍が揃っていません")
            return 1
        result = friedman_ranks(matrix.values.tolist())
        for nbhd, rank in zip(matrix.columns, result.average_ranks):
            print(f"{nbhd}\t{rank:.3f}")
        print(f"chi2={result.statistic:.4f}\tp={result.p_value:.4g}")
    return 0


def cmd_bestknown(args: argparse.Namespace, config: Config) -> int:
    results = read_results(args.results or config.RESULTS_PATH)
    table = best_known_table(results)
    if not table:
        logger.error("結果が空のため最良既知値を作成できません")
        return 1
    save_best_known(table, args.out)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Config], int]] = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "decode": cmd_decode,
    "validate": cmd_validate,
    "distance": cmd_distance,
    "moments": cmd_moments,
    "landscape": cmd_landscape,
    "bench": cmd_bench,
    "metrics": cmd_metrics,
    "bestknown": cmd_bestknown,
}


# ==================== 引数 ====================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labsched", description="臨床検査ラインのバッチスケジューリング")
    parser.add_argument("--config", help="KEY=VALUE形式の設定ファイル")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="ログレベル")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="インスタンス生成")
    p.add_argument("--profile", choices=["toy", "realistic"], default="realistic")
    p.add_argument("--bio", type=int, help="生化学検体数")
    p.add_argument("--immuno", type=int, help="免疫検体数")
    p.add_argument("--idx", type=int, default=1)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, help="生成シード（省略時は設定値）")
    p.add_argument("--out", help="出力ディレクトリ")
    p.add_argument("--benchmark", action="store_true", help="ベンチマークの全インスタンスを生成")

    p = sub.add_parser("solve", help="探索の実行")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=ALGORITHMS, default="ss")
    p.add_argument("--nbhd", choices=NEIGHBORHOODS, default="swp")
    p.add_argument("--budget", "--evals", dest="budget", type=int, help="評価回数の上限")
    p.add_argument("--reps", type=int, default=1, help="反復回数")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="結果CSV（.csv）または出力ファイルの接頭辞")

    p = sub.add_parser("decode", help="FABMデコード")
    p.add_argument("--instance", required=True)
    p.add_argument("--vss", type=parse_vss, required=True, help="例: 3,1,6,4,5,2")
    p.add_argument("--tie", "--tie-policy", dest="tie_policy", choices=TIE_POLICIES)
    p.add_argument("--tie-seed", type=int)
    p.add_argument("--out", help="出力ファイルの接頭辞")

    p = sub.add_parser("validate", help="検証")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", help="スケジュールJSON")
    p.add_argument("--assignment", help="決定変数JSON")

    p = sub.add_parser("distance", help="JPR距離")
    p.add_argument("p1", type=parse_vss, nargs="?")
    p.add_argument("p2", type=parse_vss, nargs="?")
    p.add_argument("--p1", dest="p1_flag", type=parse_vss)
    p.add_argument("--p2", dest="p2_flag", type=parse_vss)

    p = sub.add_parser("moments", help="近傍間距離のモーメント表")
    p.add_argument("--kinds", "--kind", dest="kinds", default="ins,swp,inv,inb")
    p.add_argument("--sizes", "--n", dest="sizes", type=parse_int_list, default=[100, 200, 300, 400, 500])
    p.add_argument("--block-size", "--block", dest="block_size", type=int)
    p.add_argument("--samples", type=int, default=0, help="モンテカルロ標本数（0で理論値のみ）")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV出力先")

    p = sub.add_parser("landscape", help="ランドスケープ解析")
    p.add_argument("analysis", choices=["fdc", "ac", "lon"])
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=ALGORITHMS, default="sa")
    p.add_argument("--nbhd", choices=NEIGHBORHOODS, default="swp")
    p.add_argument("--budget", type=int)
    p.add_argument("--walk", type=int, help="ランダムウォーク長")
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--runs", type=int)
    p.add_argument("--stagnation", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--mode", choices=["strict", "neutral"])
    p.add_argument("--format", choices=["graphml", "dot"], default="graphml")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="出力ファイルの接頭辞")

    p = sub.add_parser("bench", help="実験の実行")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("metrics", help="指標の計算")
    p.add_argument("--results")
    p.add_argument("--best-known")
    p.add_argument("--out")
    p.add_argument("--summary", help="規模別集計のCSV出力先")
    p.add_argument("--friedman", choices=ALGORITHMS, help="近傍間のフリードマン平均順位を計算するアルゴリズム")

    p = sub.add_parser("bestknown", help="最良既知値の表")
    p.add_argument("--results")
    p.add_argument("--out", required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    メイン実行関数

    引数を解析し、設定を読み込んで検証した後、サブコマンドを実行します。

    Returns:
        int: 終了コード（0: 成功、1: 失敗）
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = Config.load(args.config)
    except (OSError, ValueError) as e:
        logger.error(f"設定の読み込みに失敗しました: {e}")
        return 1
    setup_logging(args.log_level, config)
    if not config.validate():
        logger.error("設定の検証に失敗しました。設定値を確認してください。")
        return 1

    logger.info(BANNER)
    logger.info(f"labsched {args.command} 開始")
    logger.info(BANNER)
    try:
        code = COMMANDS[args.command](args, config)
    except (OSError, ValueError, LookupError) as e:
        logger.error(f"{args.command}でエラーが発生しました: {e}")
        return 1
    logger.info(BANNER)
    logger.info(f"labsched {args.command} {'完了' if code == 0 else '失敗'}")
    logger.info(BANNER)
    return code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("\n処理が中断されました")
        sys.exit(130)
    except Exception as e:
        logger.error(f"予期しないエラーが発生しました: {e}", exc_info=True)
        sys.exit(1)

"""
studies/runner.py - 검증 오케스트레이터

CLI 진입점:
    uv run python -m studies.runner <command> --config configs/viscous_riemann.yaml
        [--out DIR] [--seed N] [--expect strong|defect] [--levels N]

command: generate | verify | defect | liouville [--counterexample] | jensen | dichotomy | report
종료 코드: 0 정상/기대 일치, 1 실행 오류, 2 기대 불일치, 3 판정 보류
"""

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from lib.base import env_setting, fmt_num
from lib.defects import estimate_defects, weak_limit_estimate
from lib.eos import energy_full_vector, energy_isentropic_vector
from lib.grid import Grid, make_bump, save_field
from lib.liouville import (
    PotentialBump, counterexample_field, counterexample_refinement, liouville_verdict,
)
from lib.residuals import consistency_battery, energy_inequality_isentropic, stability_check
from lib.young import empirical_young
from studies.config import ExperimentConfig, apply_overrides, dump_config, load_config
from studies.full import run_dichotomy_full
from studies.isentropic import LEVEL_COLUMNS, build_batteries, defect_frame, run_dichotomy_isentropic
from studies.sequences import build_sequence, build_target
from studies.storage import emit_report
from studies.verdicts import EXIT_ERROR, EXIT_OK, PipelineResult, exit_code

logger = logging.getLogger(__name__)

COMMANDS = ["generate", "verify", "defect", "liouville", "jensen", "dichotomy", "report"]


def _level_rows(sequence, consistency=None, energy=None) -> pd.DataFrame:
    rows = []
    for n, f in enumerate(sequence):
        row = {c: np.nan for c in LEVEL_COLUMNS}
        row.update(level=f.level, h=f.grid.h, eps=float(f.meta.get("eps", 0.0)), verdict="")
        if consistency is not None:
            r = consistency.levels[n]
            row.update(e1_sup=r.e1_sup, e2_sup=r.e2_sup)
        if energy is not None:
            row.update(energy_slack=energy[n].min_slack, verdict="pass" if energy[n].passed else "fail")
        rows.append(row)
    return pd.DataFrame(rows, columns=LEVEL_COLUMNS)


# ── 명령 ──

def run_generate(cfg: ExperimentConfig) -> PipelineResult:
    """레벨별 장을 CSV 로 저장"""
    print("\n[생성] 근사해 수열...")
    sequence = build_sequence(cfg)
    fields_dir = Path(cfg.output.directory) / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    for f in sequence:
        path = save_field(f, fields_dir / f"level_{f.level}.csv")
        print(f"  레벨 {f.level}: {f.grid.cells} 셀, {len(f.times)} 시각 → {path.name}")
    return PipelineResult(config=cfg, levels=_level_rows(sequence))


def run_verify(cfg: ExperimentConfig) -> PipelineResult:
    """일관성 배터리 + 레벨별 에너지 부등식 (완전계는 안정성)"""
    g = cfg.sequence.gas
    print("\n[검증] 일관성 배터리...")
    sequence = build_sequence(cfg)
    scalar, vector = build_batteries(cfg, cfg.sequence.coarse_grid)
    report = consistency_battery(sequence, scalar, vector, g, tol_consistency=cfg.tolerances.tol_consistency)
    reports = {"consistency": report.model_dump()}
    energy = None
    if cfg.sequence.system == "isentropic":
        energy = [energy_inequality_isentropic(f, g) for f in sequence]
        reports["energy_inequality"] = [e.model_dump() for e in energy]
    else:
        reports["stability"] = stability_check(sequence, g, cfg.stability).model_dump()
    for row in report.levels:
        print(f"  레벨 {row.level}: sup|e1| {fmt_num(row.e1_sup)} | sup|e2| {fmt_num(row.e2_sup)}")
    print(f"  판정: {report.verdict} (기울기 {fmt_num(report.e1_slope)}, {fmt_num(report.e2_slope)})")
    return PipelineResult(config=cfg, levels=_level_rows(sequence, report, energy), reports=reports)


def _defects(cfg: ExperimentConfig):
    spec = cfg.sequence
    sequence = build_sequence(cfg)
    target = build_target(cfg, sequence)
    limit = weak_limit_estimate(sequence, spec.coarse_grid, window=cfg.window)
    report = estimate_defects(sequence, limit, spec.coarse_grid, spec.far, spec.gas, cfg.window, target)
    return sequence, report


def run_defect(cfg: ExperimentConfig) -> PipelineResult:
    print("\n[결함] R_e, R_v, D...")
    sequence, report = _defects(cfg)
    print(f"  ||D|| {fmt_num(report.D.total_variation)} | PSD {'통과' if report.psd.passed else '실패'} | "
          f"항등식 간격 {fmt_num(report.identity.relative_gap)}")
    levels = _level_rows(sequence)
    levels["defect_mass"] = report.level_masses
    return PipelineResult(
        config=cfg, levels=levels, defects=defect_frame(report, cfg.sequence.coarse_grid),
        reports={"psd": report.psd.model_dump(exclude={"min_eig_cells"}), "identity": report.identity.model_dump()},
        defect_map=report.D.operator_norms(),
    )


def _counterexample_grid(cfg: ExperimentConfig) -> Grid:
    spec = cfg.sequence
    if spec.dim == 2:
        return spec.coarse_grid
    return Grid(dim=2, cells=64, extent=[(-1.0, 1.0), (-1.0, 1.0)])


def run_liouville(cfg: ExperimentConfig, counterexample: bool = False) -> PipelineResult:
    print("\n[Liouville] div D = 0 점검...")
    reports = {}
    if counterexample:
        grid = _counterexample_grid(cfg)
        D = counterexample_field(grid)
        L = float(grid.inner_hi[0] - grid.inner_lo[0])
        center = 0.5 * (grid.inner_lo + grid.inner_hi)
        potential = PotentialBump(center=tuple(float(c) for c in center), radius=0.3 * L)
        tf = make_bump(center + 0.05 * L, 0.35 * L, kind="vector", direction=(1.0, 0.0), grid=grid)
        study = counterexample_refinement(grid, 3, tf, potential)
        reports["refinement"] = study.model_dump()
        print(f"  세분 쌍대: {', '.join(fmt_num(p) for p in study.pairings)} (기울기 {fmt_num(study.slope)})")
        frame = None
    else:
        _, report = _defects(cfg)
        D = report.D
        frame = defect_frame(report, cfg.sequence.coarse_grid)
    verdict = liouville_verdict(D, mode=cfg.mode, seed=cfg.battery.seed, rtol_div=cfg.tolerances.tol_div)
    reports["liouville"] = verdict.model_dump()
    print(f"  {verdict.message} | ||D|| {fmt_num(verdict.total_variation)} | 최소 고유값 {fmt_num(verdict.min_eig)} | "
          f"sup div {fmt_num(verdict.sup_div)} (허용 {fmt_num(verdict.tol_div)})")
    return PipelineResult(config=cfg, defects=frame if frame is not None else pd.DataFrame(), reports=reports,
                          defect_map=D.operator_norms())


def run_jensen(cfg: ExperimentConfig) -> PipelineResult:
    """마지막 레벨의 경험적 Young 측도 + 셀별 분류"""
    g = cfg.sequence.gas
    print("\n[Jensen] 경험적 Young 측도...")
    sequence = build_sequence(cfg)
    young = empirical_young(sequence[-1], cfg.sequence.coarse_grid)
    if cfg.sequence.system == "full":
        E = lambda y: energy_full_vector(y, g)  # noqa: E731
    else:
        E = lambda y: energy_isentropic_vector(y, g)  # noqa: E731
    labels = young.classify(E, s_lower=cfg.s_lower if cfg.sequence.system == "full" else None)
    counts = {k: labels.count(k) for k in ("dirac", "strict", "zero_set_supported")}
    print(f"  분류: {counts}")
    return PipelineResult(config=cfg, young=young.to_frame(), reports={"jensen_counts": counts},
                          defect_map=young.jensen_gaps(E))


def run_dichotomy(cfg: ExperimentConfig) -> PipelineResult:
    if cfg.sequence.system == "full":
        return run_dichotomy_full(cfg)
    return run_dichotomy_isentropic(cfg)


def run_report(directory: str) -> int:
    """저장된 summary.json 요약 출력, 저장된 종료 코드 반환"""
    path = Path(directory) / "summary.json"
    with open(path) as f:
        summary = json.load(f)
    print(f"\n[보고] {summary['name']}")
    print(f"  판정: {summary['branch']} (기대 {summary['expect']})")
    for reason in summary.get("reasons", []):
        print(f"  - {reason}")
    levels = Path(directory) / "levels.csv"
    if levels.exists():
        print(pd.read_csv(levels).to_string(index=False))
    return int(summary.get("exit_code", EXIT_OK))


# ── 진입점 ──

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='압축성 오일러 근사해 검증')
    parser.add_argument('command', choices=COMMANDS, help='실행할 단계')
    parser.add_argument('--config', help='실험 설정 YAML')
    parser.add_argument('--out', help='출력 디렉터리 (설정/환경 변수보다 우선)')
    parser.add_argument('--seed', type=int, help='시험함수 seed')
    parser.add_argument('--expect', choices=['strong', 'defect'], help='기대 갈래')
    parser.add_argument('--levels', type=int, help='레벨 수')
    parser.add_argument('--counterexample', action='store_true', help='liouville: 헤시안 회전 반례')
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=env_setting("LOG_LEVEL", "WARNING").upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    print("=" * 60)
    print("압축성 오일러 근사해 검증")
    print(f"{datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"명령: {args.command}")
    print("=" * 60)

    if args.command == "report":
        try:
            return run_report(args.out or env_setting("OUT", "results"))
        except (OSError, ValueError, KeyError) as e:
            print(f"  보고서 읽기 실패: {e}")
            return EXIT_ERROR

    if not args.config:
        print("  --config 필요")
        return EXIT_ERROR
    try:
        cfg = apply_overrides(load_config(args.config), out=args.out, seed=args.seed,
                              levels=args.levels, expect=args.expect)
        if args.command == "generate":
            result = run_generate(cfg)
        elif args.command == "verify":
            result = run_verify(cfg)
        elif args.command == "defect":
            result = run_defect(cfg)
        elif args.command == "liouville":
            result = run_liouville(cfg, counterexample=args.counterexample)
        elif args.command == "jensen":
            result = run_jensen(cfg)
        else:
            result = run_dichotomy(cfg)
        emit_report(result)
        dump_config(cfg, Path(cfg.output.directory) / "config.yaml")
    except Exception as e:
        logger.exception("command %s failed", args.command)
        print(f"\n실행 실패: {e}")
        return EXIT_ERROR

    code = exit_code(result.verdict, cfg.expect)
    print("\n" + "=" * 60)
    if result.verdict is not None:
        print(f"판정: {result.verdict.branch}" + (f" (기대 {cfg.expect})" if cfg.expect else ""))
    print(f"종료 코드: {code}")
    return code


if __name__ == '__main__':
    sys.exit(main())

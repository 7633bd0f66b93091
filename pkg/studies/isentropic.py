"""
studies/isentropic.py - 등엔트로피 이분법 파이프라인

생성 → 일관성 배터리 → 약극한 → 극한 잔차 → 결함 (R_e, R_v, D)
→ Liouville 판정 + 운동량-결함 방정식 → 분류
"""

import logging

import numpy as np
import pandas as pd

from lib.base import ROUNDOFF_FLOOR, fmt_num
from lib.defects import DefectReport, estimate_defects, relative_energy_trend, weak_limit_estimate
from lib.grid import Grid, make_battery
from lib.liouville import liouville_verdict, momentum_defect_equation_check
from lib.residuals import (
    consistency_battery, continuity_residual, energy_inequality_isentropic, field_energy_history,
    momentum_residual,
)
from studies.config import ExperimentConfig
from studies.sequences import build_sequence, build_target, sequence_warnings
from studies.verdicts import PipelineResult, classify_isentropic

logger = logging.getLogger(__name__)

LEVEL_COLUMNS = [
    "level", "h", "eps", "e1_sup", "e2_sup", "energy_slack", "entropy_min_slack",
    "relative_energy", "defect_mass", "verdict",
]


def build_batteries(cfg: ExperimentConfig, grid: Grid, time_bumps: bool = True):
    """(스칼라, 벡터) 시험함수 묶음, 벡터는 seed + 1"""
    T = cfg.sequence.T if time_bumps else None
    b = cfg.battery
    scalar = make_battery(grid, b.scalar_count, b.seed, T=T, kind="scalar", radius_range=b.radius_range)
    vector = make_battery(grid, b.vector_count, b.seed + 1, T=T, kind="vector", radius_range=b.radius_range)
    return scalar, vector


def defect_frame(report: DefectReport, grid: Grid) -> pd.DataFrame:
    """조밀 셀별 결함 표 (C 순서)"""
    x = grid.mesh().reshape(-1, grid.dim)
    D = report.D.mats
    frame = pd.DataFrame({"cell": np.arange(x.shape[0])})
    for i in range(grid.dim):
        frame[f"x_{i}"] = x[:, i]
    frame["R_e"] = report.R_e.weights.reshape(-1)
    frame["R_v_trace"] = report.R_v.trace.reshape(-1)
    frame["D_min_eig"] = np.linalg.eigvalsh(D)[..., 0].reshape(-1)
    frame["D_norm"] = report.D.operator_norms().reshape(-1)
    frame["energy_defect"] = report.energy_defect.weights.reshape(-1)
    return frame


def run_dichotomy_isentropic(cfg: ExperimentConfig) -> PipelineResult:
    spec = cfg.sequence
    g = spec.gas
    tol = cfg.tolerances
    if spec.system != "isentropic":
        raise ValueError("isentropic pipeline needs an isentropic sequence")
    coarse = spec.coarse_grid

    # ── 1. 생성 ──
    print(f"\n[1/6] 근사해 수열 생성 ({cfg.generator.kind}, {spec.levels} 레벨)...")
    sequence = build_sequence(cfg)
    target = build_target(cfg, sequence)

    # ── 2. 일관성 ──
    print("\n[2/6] 일관성 배터리...")
    scalar, vector = build_batteries(cfg, coarse)
    consistency = consistency_battery(sequence, scalar, vector, g, tol_consistency=tol.tol_consistency)
    energy = [energy_inequality_isentropic(f, g) for f in sequence]
    for row, ei in zip(consistency.levels, energy):
        print(f"  레벨 {row.level}: sup|e1| {fmt_num(row.e1_sup)} | sup|e2| {fmt_num(row.e2_sup)} | "
              f"에너지 여유 {fmt_num(ei.min_slack)}")
    print(f"  판정: {consistency.verdict}")

    # ── 3. 약극한 + 극한 잔차 ──
    print("\n[3/6] 약극한 추정...")
    limit = weak_limit_estimate(sequence, coarse, window=cfg.window)
    limit_e1 = [continuity_residual(limit, tf) for tf in scalar]
    limit_e2 = [momentum_residual(limit, tf, g) for tf in vector]
    print(f"  외삽: {limit.meta['extrapolation_counts']}")
    print(f"  극한 잔차: sup|e1| {fmt_num(max(map(abs, limit_e1)))} | sup|e2| {fmt_num(max(map(abs, limit_e2)))}")

    # ── 4. 결함 ──
    print("\n[4/6] 결함 측도...")
    defects = estimate_defects(sequence, limit, coarse, spec.far, g, cfg.window, target)
    trend = relative_energy_trend(sequence, limit, coarse, g, target)
    print(f"  ||D|| {fmt_num(defects.D.total_variation)} | 최소 고유값 {fmt_num(defects.psd.min_eig)} | "
          f"항등식 간격 {fmt_num(defects.identity.relative_gap)}")
    print(f"  상대에너지: {', '.join(fmt_num(v) for v in trend)}")

    # ── 5. Liouville + 운동량-결함 방정식 ──
    print("\n[5/6] Liouville 판정...")
    liouville = liouville_verdict(defects.D, mode=cfg.mode, seed=cfg.battery.seed, rtol_div=tol.tol_div)
    s1 = momentum_defect_equation_check(limit, sequence, vector, g, far=spec.far, rtol=tol.tol_s1)
    print(f"  {liouville.message} | 운동량-결함 방정식 {'통과' if s1.passed else '실패'}")

    # ── 6. 분류 ──
    print("\n[6/6] 분류...")
    histories = {f.level: (f.times.tolist(), field_energy_history(f, g).tolist()) for f in sequence}
    energy_scale = max(ROUNDOFF_FLOOR, max(abs(h[1][0]) for h in histories.values()))
    verdict = classify_isentropic(consistency, trend, defects.level_masses, energy_scale, s1, liouville, tol)
    warnings = sequence_warnings(sequence)
    verdict.reasons.extend(warnings)
    print(f"  → {verdict.branch}")

    rows = []
    for row, ei, rel, mass in zip(consistency.levels, energy, trend, defects.level_masses):
        rows.append({
            "level": row.level, "h": row.h, "eps": row.eps, "e1_sup": row.e1_sup, "e2_sup": row.e2_sup,
            "energy_slack": ei.min_slack, "entropy_min_slack": np.nan, "relative_energy": rel,
            "defect_mass": mass, "verdict": "pass" if ei.passed else "fail",
        })
    reports = {
        "consistency": consistency.model_dump(),
        "energy_inequality": [ei.model_dump() for ei in energy],
        "limit_residuals": {"e1": limit_e1, "e2": limit_e2},
        "extrapolation": limit.meta["extrapolation_counts"],
        "psd": defects.psd.model_dump(exclude={"min_eig_cells"}),
        "identity": defects.identity.model_dump(),
        "liouville": liouville.model_dump(),
        "momentum_defect": s1.model_dump(),
        "warnings": warnings,
    }
    return PipelineResult(
        config=cfg,
        verdict=verdict,
        levels=pd.DataFrame(rows, columns=LEVEL_COLUMNS),
        defects=defect_frame(defects, coarse),
        reports=reports,
        energy_histories=histories,
        defect_map=defects.D.operator_norms(),
    )

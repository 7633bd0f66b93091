"""
studies/full.py - 완전계 이분법 파이프라인

생성 → 엔트로피 하한 → 안정성 → 절단 평균 극한(biting 대용)
→ 후보 잔차 + 에너지 균형 + 엔트로피 → Young 측도 + 날카로운 Jensen → 분류
"""

import logging
from typing import Optional

import numpy as np
import pandas as pd

from lib.base import ROUNDOFF_FLOOR, TOLERANCES, fmt_num, fmt_pct
from lib.defects import relative_energy_trend, weak_limit_estimate
from lib.eos import GasParameters, energy_full_vector
from lib.generators import entropy_floor_enforce
from lib.grid import Grid, SpaceTimeField
from lib.residuals import (
    consistency_battery, continuity_residual, energy_residual_full, entropy_battery, field_energy_history,
    momentum_residual, renormalization_library, snapshot_energy, stability_check,
)
from lib.young import DichotomyViolation, empirical_young
from studies.config import ExperimentConfig
from studies.isentropic import LEVEL_COLUMNS, build_batteries
from studies.sequences import build_sequence, sequence_warnings
from studies.verdicts import PipelineResult, classify_full

logger = logging.getLogger(__name__)


def entropy_lower_bound(cfg: ExperimentConfig) -> float:
    """s_lower: 설정값 → 수열의 entropy_floor → s_ref"""
    if cfg.s_lower is not None:
        return cfg.s_lower
    if cfg.sequence.entropy_floor is not None:
        return cfg.sequence.entropy_floor
    return cfg.sequence.s_ref


def initial_energy_limit(sequence: list[SpaceTimeField], limit: SpaceTimeField, coarse: Grid,
                         g: GasParameters) -> np.ndarray:
    """t = 0 에너지 밀도의 조밀 셀 평균을 극한과 같은 레벨 가중치로 결합"""
    W = limit.meta["level_weights"]
    per_level = []
    for f in sequence:
        per_level.append(f.grid.cell_average_to(coarse, snapshot_energy(f.snapshots[0], g)))
    return np.sum(W * np.stack(per_level), axis=0)


def energy_balance_sup(limit: SpaceTimeField, battery, g, initial_energy: np.ndarray) -> float:
    """sup |R(phi)| / int E_0 |phi|, psi = 1 시험함수"""
    x = limit.grid.mesh()
    vol = limit.grid.cell_volume
    worst = 0.0
    for tf in battery:
        R = energy_residual_full(limit, tf, g, initial_energy=initial_energy)
        scale = vol * float(np.sum(np.abs(initial_energy * tf.phi(x)))) + ROUNDOFF_FLOOR
        worst = max(worst, abs(R) / scale)
    return worst


def _young_window(cfg: ExperimentConfig) -> Optional[tuple[float, float]]:
    w = cfg.window
    if w.kind != "average" or (w.t0 is None and w.t1 is None):
        return None
    return (0.0 if w.t0 is None else w.t0, cfg.sequence.T if w.t1 is None else w.t1)


def run_dichotomy_full(cfg: ExperimentConfig) -> PipelineResult:
    spec = cfg.sequence
    g = spec.gas
    tol = cfg.tolerances
    if spec.system != "full":
        raise ValueError("full pipeline needs a full-system sequence")
    coarse = spec.coarse_grid
    s_lower = entropy_lower_bound(cfg)

    # ── 1. 생성 + 엔트로피 하한 ──
    print(f"\n[1/6] 근사해 수열 생성 ({cfg.generator.kind}, {spec.levels} 레벨)...")
    sequence = build_sequence(cfg)
    floors = [entropy_floor_enforce(f, s_lower)[1] for f in sequence]
    violations = sum(r.violations for r in floors)
    for f, r in zip(sequence, floors):
        print(f"  레벨 {f.level}: 엔트로피 하한 위반 {r.violations} | 최소 여유 {fmt_num(r.min_margin)}")

    # ── 2. 안정성 ──
    print("\n[2/6] 안정성 점검...")
    stability = stability_check(sequence, g, cfg.stability)
    print(f"  판정: {stability.verdict}" + (f" ({'; '.join(stability.reasons)})" if stability.reasons else ""))

    # ── 3. 절단 평균 극한 ──
    print("\n[3/6] 절단 평균 극한 (biting 대용)...")
    limit = weak_limit_estimate(sequence, coarse, window=cfg.window, trim=True, g=g)
    trimmed = limit.meta["trimmed"]
    print(f"  제외 셀 비율: {', '.join(fmt_pct(t) for t in trimmed)}")

    # ── 4. 후보 잔차, 에너지 균형, 엔트로피 ──
    print("\n[4/6] 극한 후보 잔차...")
    scalar, vector = build_batteries(cfg, coarse)
    consistency = consistency_battery(sequence, scalar, vector, g, tol_consistency=tol.tol_consistency)
    limit_e1 = [continuity_residual(limit, tf) for tf in scalar]
    limit_e2 = [momentum_residual(limit, tf, g) for tf in vector]
    flat, _ = build_batteries(cfg, coarse, time_bumps=False)
    E0 = initial_energy_limit(sequence, limit, coarse, g)
    balance = energy_balance_sup(limit, flat, g, E0)
    entropy = entropy_battery(limit, scalar, renormalization_library())
    entropy_min = float(entropy.min()) if entropy.size else None
    residual_sup = max(max(map(abs, limit_e1), default=0.0), max(map(abs, limit_e2), default=0.0))
    try:
        trend = relative_energy_trend(sequence, limit, coarse, g)
    except ValueError as e:
        logger.warning("relative energy trend unavailable: %s", e)
        trend = [np.nan] * len(sequence)
    print(f"  sup|e1| {fmt_num(max(map(abs, limit_e1)))} | sup|e2| {fmt_num(max(map(abs, limit_e2)))} | "
          f"에너지 균형 {fmt_num(balance)} | 엔트로피 결함 최소 {fmt_num(entropy_min)}")
    print(f"  상대에너지: {', '.join(fmt_num(v) for v in trend)}")

    # ── 5. Young 측도 + Jensen ──
    print("\n[5/6] Young 측도...")
    young = empirical_young(sequence[-1], coarse, window=_young_window(cfg))
    E = lambda y: energy_full_vector(y, g)  # noqa: E731
    violation = None
    try:
        labels = young.classify(E, tol=TOLERANCES["tol_inequality"], s_lower=s_lower)
    except DichotomyViolation as e:
        logger.error("%s", e)
        labels, violation = [], str(e)
    gaps = young.jensen_gaps(E)
    print(f"  셀 {len(young.measures)}개 | 최대 Jensen 간격 {fmt_num(float(gaps.max()))}")

    # ── 6. 분류 ──
    print("\n[6/6] 분류...")
    verdict = classify_full(stability, violations, balance, labels, tol, relative_energy=trend,
                            entropy_min=entropy_min, limit_residual_sup=residual_sup)
    warnings = sequence_warnings(sequence)
    verdict.reasons.extend(warnings)
    if violation is not None:
        verdict.reasons.append(violation)
    print(f"  → {verdict.branch}")

    histories = {f.level: (f.times.tolist(), field_energy_history(f, g).tolist()) for f in sequence}
    rows = []
    for row, r, rel in zip(consistency.levels, floors, trend):
        energy = np.asarray(histories[row.level][1])
        rows.append({
            "level": row.level, "h": row.h, "eps": row.eps, "e1_sup": row.e1_sup, "e2_sup": row.e2_sup,
            "energy_slack": float(np.min(energy[0] - energy)), "entropy_min_slack": r.min_margin,
            "relative_energy": rel, "defect_mass": np.nan, "verdict": "pass" if r.violations == 0 else "fail",
        })
    reports = {
        "entropy_floor": [r.model_dump() for r in floors],
        "stability": stability.model_dump(),
        "consistency": consistency.model_dump(),
        "limit_residuals": {"e1": limit_e1, "e2": limit_e2},
        "extrapolation": limit.meta["extrapolation_counts"],
        "trimmed": trimmed,
        "energy_balance_sup": balance,
        "entropy_battery": entropy.tolist(),
        "relative_energy": [float(v) for v in trend],
        "jensen_labels": labels,
        "warnings": warnings,
    }
    return PipelineResult(
        config=cfg,
        verdict=verdict,
        levels=pd.DataFrame(rows, columns=LEVEL_COLUMNS),
        young=young.to_frame(),
        reports=reports,
        energy_histories=histories,
        defect_map=gaps,
    )

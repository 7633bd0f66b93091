"""
studies/verdicts.py - 이분법 판정

공통 유틸리티:
- classify_isentropic(...) → strong_convergence / not_a_weak_solution / inconclusive
- classify_full(...)       → 같은 세 갈래 (안정 근사 + Young 측도 근거)
- exit_code(verdict, expect) → 0 / 2 / 3
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from lib.base import ROUNDOFF_FLOOR, strictly_decreasing
from lib.liouville import LiouvilleVerdict, MomentumDefectReport
from lib.residuals import ResidualReport, StabilityReport
from studies.config import ExperimentConfig, Tolerances

logger = logging.getLogger(__name__)

Branch = Literal["strong_convergence", "not_a_weak_solution", "inconclusive"]

EXPECTED_BRANCH = {
    "strong": "strong_convergence",
    "defect": "not_a_weak_solution",
}

# 종료 코드
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISMATCH = 2
EXIT_INCONCLUSIVE = 3


class DichotomyVerdict(BaseModel):
    branch: Branch
    evidence: dict[str, Any] = Field(default_factory=dict)
    reasons: list[str] = Field(default_factory=list)


@dataclass(eq=False)
class PipelineResult:
    """파이프라인 산출물 (emit_report 입력)

    levels  : 레벨별 표 (LEVEL_COLUMNS)
    defects : 조밀 셀별 결함 표
    young   : Young 측도 원자 표
    reports : 단계별 보고서 (JSON 직렬화 가능한 dict)
    """
    config: ExperimentConfig
    verdict: Optional[DichotomyVerdict] = None
    levels: pd.DataFrame = field(default_factory=pd.DataFrame)
    defects: pd.DataFrame = field(default_factory=pd.DataFrame)
    young: pd.DataFrame = field(default_factory=pd.DataFrame)
    reports: dict = field(default_factory=dict)
    energy_histories: dict = field(default_factory=dict)
    defect_map: Optional[np.ndarray] = None


# ── 근거 판정 ──

def energy_trend_vanishes(trend: Sequence[float], tol_strong: float) -> tuple[bool, str]:
    """상대에너지 추세: 엄격 감소(또는 반올림 바닥) + 마지막 < tol_strong * 레벨 1"""
    v = np.asarray(trend, dtype=float)
    if v.size == 0:
        return False, "no relative-energy data"
    floor = ROUNDOFF_FLOOR * max(1.0, float(np.max(np.abs(v))))
    if np.all(v <= floor):
        return True, "relative energy at round-off floor"
    if not strictly_decreasing(v):
        return False, "relative energy not strictly decreasing"
    if v[-1] >= tol_strong * v[0]:
        return False, f"final relative energy {v[-1]:.3e} not below {tol_strong:g} of level 1 ({v[0]:.3e})"
    return True, "relative energy decreasing"


def defect_mass_persists(masses: Sequence[float], energy_scale: float, tol: Tolerances) -> tuple[bool, str]:
    """마지막 레벨 질량 > tol_defect * 에너지 규모, 상위 두 레벨이 tol_defect_stability 이내"""
    if len(masses) < 2:
        return False, "fewer than two levels of defect mass"
    last, prev = float(masses[-1]), float(masses[-2])
    if last <= tol.tol_defect * energy_scale:
        return False, f"defect mass {last:.3e} below {tol.tol_defect:g} of energy scale {energy_scale:.3e}"
    spread = abs(last - prev) / max(last, prev)
    if spread > tol.tol_defect_stability:
        return False, f"defect mass not stable across top levels (spread {spread:.1%})"
    return True, "defect mass stable"


def momentum_pairing_nonzero(s1: MomentumDefectReport, tol_consistency: float) -> bool:
    """결함 쌍대 또는 극한 잔차가 플럭스 규모 대비 0 이 아님"""
    for row in s1.rows:
        scale = max(row.flux_scale, ROUNDOFF_FLOOR)
        if abs(row.rhs) > tol_consistency * scale or abs(row.limit_residual) > tol_consistency * scale:
            return True
    return False


def classify_isentropic(
    consistency: ResidualReport,
    relative_energy: Sequence[float],
    level_masses: Sequence[float],
    energy_scale: float,
    s1: MomentumDefectReport,
    liouville: LiouvilleVerdict,
    tol: Tolerances,
) -> DichotomyVerdict:
    """등엔트로피 이분법

    strong_convergence  : 일관 + 상대에너지 소멸
    not_a_weak_solution : 결함 질량 지속 + 운동량 결함 쌍대 0 아님
    둘 다 또는 둘 다 아니면 inconclusive
    """
    reasons = []
    energy_ok, energy_note = energy_trend_vanishes(relative_energy, tol.tol_strong)
    strong = consistency.verdict == "consistent" and energy_ok
    if consistency.verdict != "consistent":
        reasons.append("sequence not consistent")
    if not energy_ok:
        reasons.append(energy_note)

    mass_ok, mass_note = defect_mass_persists(level_masses, energy_scale, tol)
    pairing = momentum_pairing_nonzero(s1, tol.tol_consistency)
    defect = mass_ok and pairing
    if not mass_ok:
        reasons.append(mass_note)
    elif not pairing:
        reasons.append("defect pairing vanishes on the battery")

    if liouville.label == "theorem_violation":
        reasons.append(liouville.message)
        strong = defect = False
    if not s1.passed:
        reasons.append(f"momentum-defect equation gap {s1.sup_relative_gap:.3e} of defect scale")

    evidence = {
        "consistency": consistency.verdict,
        "e1_slope": consistency.e1_slope,
        "e2_slope": consistency.e2_slope,
        "relative_energy": [float(v) for v in relative_energy],
        "defect_mass": [float(v) for v in level_masses],
        "energy_scale": float(energy_scale),
        "liouville": liouville.label,
        "s1_passed": s1.passed,
        "s1_sup_gap": s1.sup_gap,
    }
    if strong and defect:
        branch = "inconclusive"
        reasons.append("both branches supported; evidence conflicts")
    elif strong:
        branch, reasons = "strong_convergence", []
    elif defect:
        branch, reasons = "not_a_weak_solution", [r for r in reasons if "momentum-defect" in r]
    else:
        branch = "inconclusive"
    logger.info("isentropic dichotomy: %s", branch)
    return DichotomyVerdict(branch=branch, evidence=evidence, reasons=reasons)


def classify_full(
    stability: StabilityReport,
    floor_violations: int,
    balance_sup: float,
    labels: Sequence[str],
    tol: Tolerances,
    relative_energy: Sequence[float] = (),
    entropy_min: Optional[float] = None,
    limit_residual_sup: Optional[float] = None,
) -> DichotomyVerdict:
    """완전계 이분법

    엔트로피 하한 위반 또는 불안정 → inconclusive (사유 기록)
    모든 셀 dirac + 에너지 균형 + 상대에너지 소멸 + 엔트로피 결함 >= -tol + 극한 잔차 <= tol
      → strong_convergence
    strict 셀 존재 + 에너지 균형 실패 → not_a_weak_solution
    """
    counts = {k: int(sum(1 for lab in labels if lab == k)) for k in ("dirac", "strict", "zero_set_supported")}
    balance_ok = balance_sup <= tol.tol_consistency
    energy_ok, energy_note = energy_trend_vanishes(relative_energy, tol.tol_strong)
    entropy_ok = entropy_min is not None and entropy_min >= -tol.tol_consistency
    residual_ok = limit_residual_sup is not None and limit_residual_sup <= tol.tol_consistency
    evidence = {
        "stability": stability.verdict,
        "entropy_floor_violations": int(floor_violations),
        "energy_balance_sup": float(balance_sup),
        "energy_balance_ok": balance_ok,
        "jensen_counts": counts,
        "relative_energy": [float(v) for v in relative_energy],
        "entropy_min": entropy_min,
        "limit_residual_sup": limit_residual_sup,
    }
    reasons = []
    if floor_violations:
        reasons.append(f"entropy floor violated in {floor_violations} cells")
    if stability.verdict != "stable":
        reasons.extend(stability.reasons or ["not stable"])
    if reasons:
        return DichotomyVerdict(branch="inconclusive", evidence=evidence, reasons=reasons)

    all_dirac = bool(labels) and counts["dirac"] == len(labels)
    if all_dirac and balance_ok and energy_ok and entropy_ok and residual_ok:
        branch = "strong_convergence"
    elif counts["strict"] > 0 and not balance_ok:
        branch = "not_a_weak_solution"
    else:
        branch = "inconclusive"
        if counts["strict"] > 0:
            reasons.append("strict Jensen cells but energy balance holds")
        if not balance_ok:
            reasons.append(f"energy balance fails ({balance_sup:.3e}) without strict Jensen cells")
        if counts["zero_set_supported"]:
            reasons.append(f"{counts['zero_set_supported']} zero-set-supported cells")
        if all_dirac and not energy_ok:
            reasons.append(energy_note)
        if all_dirac and not entropy_ok:
            reasons.append("entropy battery has no data" if entropy_min is None
                           else f"entropy defect {entropy_min:.3e} below -{tol.tol_consistency:g}")
        if all_dirac and not residual_ok:
            reasons.append("limit residuals missing" if limit_residual_sup is None
                           else f"limit residual {limit_residual_sup:.3e} above {tol.tol_consistency:g}")
    logger.info("full dichotomy: %s %s", branch, counts)
    return DichotomyVerdict(branch=branch, evidence=evidence, reasons=reasons)


def exit_code(verdict: Optional[DichotomyVerdict], expect: Optional[str]) -> int:
    """inconclusive 는 3, 기대 갈래 불일치는 2"""
    if verdict is None:
        return EXIT_OK
    if verdict.branch == "inconclusive":
        return EXIT_INCONCLUSIVE
    if expect is not None and EXPECTED_BRANCH[expect] != verdict.branch:
        return EXIT_MISMATCH
    return EXIT_OK

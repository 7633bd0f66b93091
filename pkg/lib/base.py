"""
lib/base.py - 공통 상수와 유틸리티
모든 모듈이 공유하는 허용오차, 환경 설정, 숫자 포맷, 추세 계산
"""

import os
import logging

import numpy as np
from dotenv import load_dotenv

# .env 파일 로드 (프로젝트 루트)
load_dotenv(os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), ".env"))

logger = logging.getLogger(__name__)

ENV_PREFIX = "EULERDEFECT_"

# 진공 판정: rho <= VACUUM_EPS * rho_ref
VACUUM_EPS = 1e-12

# 기본 허용오차 (설정 파일에서 덮어쓸 수 있음)
TOLERANCES = {
    "tol_consistency": 1e-3,
    "tol_psd": 1e-8,
    "tol_div": 1e-6,
    "tol_identity": 1e-6,
    "tol_s1": 0.05,
    "tol_inequality": 1e-8,
    "tol_merge": 1e-9,
    "tol_dirac": 1e-6,
}

# 배정밀도 구적 반올림 바닥
ROUNDOFF_FLOOR = 1e-11


def env_setting(name: str, default=None):
    """EULERDEFECT_* 환경 변수 조회"""
    return os.getenv(ENV_PREFIX + name, default)


def fmt_num(n, digits: int = 3) -> str:
    """숫자 포맷팅 (과학 표기)"""
    if n is None:
        return "N/A"
    if n == float("inf"):
        return "+inf"
    if n == 0:
        return "0"
    if 1e-2 <= abs(n) < 1e4:
        return f"{n:.{digits + 1}g}"
    return f"{n:.{digits}e}"


def fmt_pct(n, decimals: int = 2) -> str:
    """퍼센트 포맷팅"""
    if n is None:
        return "N/A"
    return f"{n * 100:.{decimals}f}%"


def log2_slope(values) -> float | None:
    """레벨 인덱스 대비 log2(values)의 최소제곱 기울기

    양수가 아닌 값이 섞이면 None (추세 정의 불가)
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2 or np.any(v <= 0) or not np.all(np.isfinite(v)):
        return None
    levels = np.arange(v.size, dtype=float)
    slope, _ = np.polyfit(levels, np.log2(v), 1)
    return float(slope)


def strictly_decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(v.size >= 2 and np.all(np.diff(v) < 0))


def decays_to_zero(values, floor: float = ROUNDOFF_FLOOR, max_slope: float = -0.5) -> bool:
    """레벨 수열이 0으로 가는 추세인지 판정

    - 전부 반올림 바닥 이하 → True
    - 엄격 감소 + log2 기울기 <= max_slope → True
    """
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return True
    scale = max(1.0, float(np.max(v)))
    if np.all(v <= floor * scale):
        return True
    if v[-1] <= floor * scale and np.all(np.diff(v) <= 0):
        return True
    slope = log2_slope(v)
    return strictly_decreasing(v) and slope is not None and slope <= max_slope

"""
studies/config.py - 실험 설정
YAML 파일 -> ExperimentConfig (pydantic), 환경 변수/CLI 덮어쓰기
우선순위: CLI > 환경 변수(EULERDEFECT_*) > 파일
"""

import logging
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field

from lib.base import TOLERANCES, env_setting
from lib.defects import Window
from lib.eos import FullState
from lib.generators import SequenceSpec
from lib.residuals import StabilityBudget

logger = logging.getLogger(__name__)


class GeneratorConfig(BaseModel):
    """수열 생성기 선택과 인자"""
    kind: Literal["constant", "viscous", "riemann_exact", "oscillatory", "concentration"] = "constant"
    # oscillatory
    state_a: Optional[FullState] = None
    state_b: Optional[FullState] = None
    lam: float = Field(0.5, gt=0.0, le=1.0)
    pattern_cells: int = Field(8, ge=1)
    region: Optional[list[tuple[float, float]]] = None
    # concentration
    amplitude: float = 1.0
    radius: Optional[float] = None
    x0: Optional[list[float]] = None


class BatteryConfig(BaseModel):
    scalar_count: int = Field(8, ge=1)
    vector_count: int = Field(8, ge=1)
    seed: int = 0
    radius_range: tuple[float, float] = (0.1, 0.3)


class Tolerances(BaseModel):
    tol_consistency: float = Field(TOLERANCES["tol_consistency"], gt=0.0)
    tol_psd: float = Field(TOLERANCES["tol_psd"], gt=0.0)
    tol_div: float = Field(TOLERANCES["tol_div"], gt=0.0)
    tol_identity: float = Field(TOLERANCES["tol_identity"], gt=0.0)
    tol_s1: float = Field(TOLERANCES["tol_s1"], gt=0.0)
    tol_strong: float = Field(0.1, gt=0.0)
    tol_defect: float = Field(1e-3, gt=0.0)
    tol_defect_stability: float = Field(0.2, gt=0.0)


class FaultConfig(BaseModel):
    """결함 주입 (파이프라인 판정 점검용)

    entropy_dip  : 해당 레벨 중앙 셀의 S 를 rho (s_lower - magnitude) 로
    energy_blowup: 해당 레벨 운동량에 (1 + magnitude t/T) 곱
    frozen       : 모든 레벨을 레벨 1 로 고정 (세분 없음)
    """
    kind: Literal["none", "entropy_dip", "energy_blowup", "frozen"] = "none"
    level: Optional[int] = None
    magnitude: float = Field(0.5, gt=0.0)


class OutputConfig(BaseModel):
    directory: str = "results"
    plots: bool = False


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    mode: Literal["whole_space", "bounded"] = "whole_space"
    target: Literal["weak_limit", "exact", "finest"] = "weak_limit"
    expect: Optional[Literal["strong", "defect"]] = None
    sequence: SequenceSpec = Field(default_factory=SequenceSpec)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    battery: BatteryConfig = Field(default_factory=BatteryConfig)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    window: Window = Field(default_factory=Window)
    stability: StabilityBudget = Field(default_factory=StabilityBudget)
    s_lower: Optional[float] = None
    fault: FaultConfig = Field(default_factory=FaultConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    return ExperimentConfig.model_validate(raw)


def dump_config(cfg: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=False)
    return path


def apply_overrides(
    cfg: ExperimentConfig,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    levels: Optional[int] = None,
    expect: Optional[str] = None,
) -> ExperimentConfig:
    """환경 변수 다음 CLI 값 순서로 덮어쓰기 (검증 포함 재생성)"""
    data = cfg.model_dump(mode="json")

    env_out = env_setting("OUT")
    env_seed = env_setting("SEED")
    if env_out:
        data["output"]["directory"] = env_out
    if env_seed:
        data["battery"]["seed"] = int(env_seed)

    if out is not None:
        data["output"]["directory"] = out
    if seed is not None:
        data["battery"]["seed"] = seed
    if levels is not None:
        data["sequence"]["levels"] = levels
    if expect is not None:
        data["expect"] = expect
    resolved = ExperimentConfig.model_validate(data)
    if resolved != cfg:
        logger.info("config overrides applied: out=%s seed=%s levels=%s expect=%s",
                    resolved.output.directory, resolved.battery.seed, resolved.sequence.levels, resolved.expect)
    return resolved

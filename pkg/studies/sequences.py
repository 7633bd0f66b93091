"""
studies/sequences.py - 설정 -> 근사해 수열
생성기 분기, 목표장(정확해/최세분), 결함 주입
"""

import logging
from typing import Optional

import numpy as np

from lib.defects import prolong
from lib.eos import IsentropicState
from lib.generators import (
    RiemannData, concentration_bump, constant_state_sequence, oscillatory_two_state,
    riemann_exact_isentropic, vanishing_viscosity_solve,
)
from lib.grid import SpaceTimeField, field_from_arrays, resample_times
from studies.config import ExperimentConfig

logger = logging.getLogger(__name__)


def _riemann_data(cfg: ExperimentConfig) -> RiemannData:
    init = cfg.sequence.initial
    if init.kind != "riemann" or init.left is None or init.right is None:
        raise ValueError("riemann initial data (left, right, x0) required")
    return RiemannData(left=init.left, right=init.right, x0=init.x0)


def _two_states(cfg: ExperimentConfig):
    gen = cfg.generator
    if gen.state_a is None or gen.state_b is None:
        raise ValueError("oscillatory generator needs state_a and state_b")
    if cfg.sequence.system == "full":
        return gen.state_a, gen.state_b
    return (IsentropicState(rho=gen.state_a.rho, m=gen.state_a.m),
            IsentropicState(rho=gen.state_b.rho, m=gen.state_b.m))


def build_sequence(cfg: ExperimentConfig) -> list[SpaceTimeField]:
    """생성기 실패는 종류/레벨 문맥을 붙여 RuntimeError 로"""
    spec = cfg.sequence
    kind = cfg.generator.kind
    if kind == "viscous":
        out = []
        for n in range(1, spec.levels + 1):
            try:
                out.append(vanishing_viscosity_solve(spec, n))
            except (RuntimeError, ValueError) as e:
                raise RuntimeError(f"generator {kind} failed at level {n}: {e}") from e
        return inject_fault(cfg, out)

    try:
        if kind == "constant":
            out = constant_state_sequence(spec)
        elif kind == "riemann_exact":
            data = _riemann_data(cfg)
            out = [riemann_exact_isentropic(data, spec.gas, spec.grid(n), spec.times(n), far=spec.far, level=n)
                   for n in range(1, spec.levels + 1)]
        elif kind == "oscillatory":
            A, B = _two_states(cfg)
            out = oscillatory_two_state(spec, A, B, cfg.generator.lam, cfg.generator.pattern_cells,
                                        cfg.generator.region)
        elif kind == "concentration":
            out = concentration_bump(spec, cfg.generator.amplitude, cfg.generator.radius, cfg.generator.x0)
        else:
            raise ValueError(f"unknown generator {kind}")
    except (RuntimeError, ValueError) as e:
        raise RuntimeError(f"generator {kind} failed at level 1..{spec.levels}: {e}") from e
    return inject_fault(cfg, out)


def build_target(cfg: ExperimentConfig, sequence: list[SpaceTimeField]) -> Optional[list[SpaceTimeField]]:
    """레벨별 강수렴 목표장 (weak_limit 이면 None)"""
    spec = cfg.sequence
    if cfg.target == "weak_limit":
        return None
    if cfg.target == "exact":
        data = _riemann_data(cfg)
        return [riemann_exact_isentropic(data, spec.gas, f.grid, f.times, far=spec.far, level=f.level)
                for f in sequence]
    finest = sequence[-1]
    return [finest for _ in sequence]


# ── 결함 주입 ──

def _replace(field: SpaceTimeField, rho=None, m=None, S=None, meta=None) -> SpaceTimeField:
    return field_from_arrays(
        field.grid, field.times,
        field.rho if rho is None else rho,
        field.m if m is None else m,
        field.S if S is None else S,
        far=field.far, level=field.level, meta=meta or field.meta,
    )


def inject_fault(cfg: ExperimentConfig, sequence: list[SpaceTimeField]) -> list[SpaceTimeField]:
    fault = cfg.fault
    if fault.kind == "none":
        return sequence
    level = fault.level or len(sequence)
    idx = level - 1
    if not 0 <= idx < len(sequence):
        raise ValueError(f"fault level {level} outside 1..{len(sequence)}")
    out = list(sequence)
    field = out[idx]
    logger.warning("injecting fault %s at level %d (magnitude %.3g)", fault.kind, level, fault.magnitude)

    if fault.kind == "entropy_dip":
        if not field.is_full:
            raise ValueError("entropy dip needs a full-system sequence")
        s_lower = cfg.s_lower if cfg.s_lower is not None else cfg.sequence.s_ref
        S = field.S.copy()
        rho = field.rho
        center = tuple(c // 2 for c in field.grid.shape)
        S[(slice(1, None),) + center] = rho[(slice(1, None),) + center] * (s_lower - fault.magnitude)
        out[idx] = _replace(field, S=S, meta={**field.meta, "fault": "entropy_dip"})
    elif fault.kind == "energy_blowup":
        growth = 1.0 + fault.magnitude * field.times / field.T
        m = field.m * growth.reshape((-1,) + (1,) * (field.m.ndim - 1))
        # 정지 상태면 운동량을 만들어 에너지를 키움
        if np.allclose(field.m, 0.0):
            m = m.copy()
            m[..., 0] = field.rho * fault.magnitude * (field.times / field.T).reshape((-1,) + (1,) * field.grid.dim)
        out[idx] = _replace(field, m=m, meta={**field.meta, "fault": "energy_blowup"})
    elif fault.kind == "frozen":
        base = sequence[0]
        frozen = []
        for f in sequence:
            k = base.grid.refinement_factor(f.grid)
            src = base if len(base.times) == len(f.times) else resample_times(base, f.times)
            frozen.append(field_from_arrays(
                f.grid, f.times, prolong(src.rho, k, f.grid.dim), prolong(src.m, k, f.grid.dim),
                None if src.S is None else prolong(src.S, k, f.grid.dim),
                far=f.far, level=f.level, meta={**f.meta, "fault": "frozen"},
            ))
        logger.info("frozen sequence: every level copies level 1")
        out = frozen
    return out



def sequence_warnings(sequence: list[SpaceTimeField]) -> list[str]:
    """생성기가 run_log 에 남긴 경고 (예: eps < c h) 모음"""
    return [w for f in sequence for w in f.run_log.get("warnings", [])]

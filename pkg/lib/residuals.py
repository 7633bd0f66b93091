"""
lib/residuals.py - 약형식 잔차와 허용성 점검
연속 방정식 / 운동량 / 총에너지 / 재규격화 엔트로피 잔차,
등엔트로피 에너지 부등식, 안정성 예산, 일관성 배터리

부호 규약 (q_t + div F = 0):
    R = int_0^tau int [q psi' phi + psi F : grad phi] dx dt - [int q psi phi dx]_0^tau
엔트로피는 부등식 결함 -R 을 반환 (>= -tol 이면 통과)
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from lib.base import ROUNDOFF_FLOOR, TOLERANCES, decays_to_zero, log2_slope
from lib.eos import (
    GasParameters, energy_full_array, energy_isentropic_array, pressure_full_array,
    pressure_isentropic, relative_energy_fields,
)
from lib.grid import AnyTest, SpaceTimeField, Snapshot, weak_pairing

logger = logging.getLogger(__name__)


# ── 재규격화 함수 Z ──

@dataclass(frozen=True)
class RenormalizationFunction:
    """유계 C^1 단조 Z: 상수 또는 tanh((s - shift)/scale)"""
    name: str
    kind: Literal["constant", "tanh"]
    constant: float = 1.0
    scale: float = 1.0
    shift: float = 0.0

    def value(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full_like(s, self.constant)
        return np.tanh((s - self.shift) / self.scale)

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(s)
        return 1.0 / np.cosh((s - self.shift) / self.scale) ** 2 / self.scale

    @property
    def bound(self) -> float:
        return abs(self.constant) if self.kind == "constant" else 1.0

    @property
    def monotone(self) -> bool:
        s = np.linspace(-50.0, 50.0, 20001)
        return bool(np.all(self.derivative(s) >= 0))


def renormalization_library() -> list[RenormalizationFunction]:
    """상수 2개 + tanh 6개 (scale {0.5, 2} x shift {-1, 0, 1})"""
    lib = [
        RenormalizationFunction("const+1", "constant", constant=1.0),
        RenormalizationFunction("const-1", "constant", constant=-1.0),
    ]
    for scale in (0.5, 2.0):
        for shift in (-1.0, 0.0, 1.0):
            lib.append(RenormalizationFunction(f"tanh(s{shift:+g})/{scale:g}", "tanh", scale=scale, shift=shift))
    return lib


# ── 플럭스 ──

def _vacuum_safe(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vac = rho <= 1e-12
    return vac, np.where(vac, 1.0, rho)


def snapshot_pressure(snap: Snapshot, g: GasParameters) -> np.ndarray:
    if snap.is_full:
        return pressure_full_array(snap.rho, snap.S, g)
    return pressure_isentropic(snap.rho, g)


def convective_tensor(rho: np.ndarray, m: np.ndarray) -> np.ndarray:
    """1_{rho>0} m (x) m / rho"""
    vac, safe = _vacuum_safe(rho)
    out = m[..., :, None] * m[..., None, :] / safe[..., None, None]
    return np.where(vac[..., None, None], 0.0, out)


def momentum_flux(snap: Snapshot, g: GasParameters) -> np.ndarray:
    F = convective_tensor(snap.rho, snap.m)
    p = snapshot_pressure(snap, g)
    d = snap.grid.dim
    return F + p[..., None, None] * np.eye(d)


def snapshot_energy(snap: Snapshot, g: GasParameters) -> np.ndarray:
    if snap.is_full:
        return energy_full_array(snap.rho, snap.m, snap.S, g)
    return energy_isentropic_array(snap.rho, snap.m, g)


# ── 잔차 ──

def continuity_residual(field: SpaceTimeField, tf: AnyTest, tau: Optional[float] = None) -> float:
    """e1 = int int [rho psi' phi + psi m . grad phi]"""
    if tf.kind != "scalar":
        raise ValueError("continuity residual needs a scalar test function")
    return weak_pairing(field, tf, density=lambda s: s.rho, flux=lambda s: s.m, tau=tau)


def momentum_residual(field: SpaceTimeField, tf: AnyTest, g: GasParameters, tau: Optional[float] = None) -> float:
    """e2 = int int [m . psi' phi + psi (1_{rho>0} m(x)m/rho + p I) : grad phi]"""
    if tf.kind != "vector":
        raise ValueError("momentum residual needs a vector test function")
    return weak_pairing(field, tf, density=lambda s: s.m, flux=lambda s: momentum_flux(s, g), tau=tau)


def energy_residual_full(
    field: SpaceTimeField,
    tf: AnyTest,
    g: GasParameters,
    tau: Optional[float] = None,
    initial_energy: Optional[np.ndarray] = None,
) -> float:
    """총에너지 균형 잔차: E psi' phi + psi 1_{rho>0} (E + p) m/rho . grad phi

    initial_energy: t = 0 경계항에 쓸 초기 에너지 밀도 (극한 후보 점검용)
    """
    if not field.is_full:
        raise ValueError("energy balance residual needs a full-system field")
    if tf.kind != "scalar":
        raise ValueError("energy residual needs a scalar test function")
    first = field.snapshots[0]

    def density(snap):
        if initial_energy is not None and snap is first:
            return np.asarray(initial_energy, dtype=float)
        return snapshot_energy(snap, g)

    def flux(snap):
        E = snapshot_energy(snap, g)
        p = snapshot_pressure(snap, g)
        vac, safe = _vacuum_safe(snap.rho)
        out = ((E + p) / safe)[..., None] * snap.m
        return np.where(vac[..., None], 0.0, out)

    return weak_pairing(field, tf, density=density, flux=flux, tau=tau)


def entropy_residual(
    field: SpaceTimeField,
    tf: AnyTest,
    Z: RenormalizationFunction,
    tau: Optional[float] = None,
) -> float:
    """재규격화 엔트로피 부등식 결함

    -( int int [rho Z(S/rho) psi' phi + psi Z(S/rho) m . grad phi] - [int rho Z phi]_0^tau )
    허용해는 >= 0
    """
    if not field.is_full:
        raise ValueError("entropy residual needs a full-system field")
    if tf.kind != "scalar" or not tf.nonnegative():
        raise ValueError("entropy test function must be scalar and nonnegative")

    def specific(snap):
        vac, safe = _vacuum_safe(snap.rho)
        return vac, np.where(vac, 0.0, snap.S / safe)

    def density(snap):
        vac, s = specific(snap)
        return np.where(vac, 0.0, snap.rho * Z.value(s))

    def flux(snap):
        vac, s = specific(snap)
        return np.where(vac[..., None], 0.0, Z.value(s)[..., None] * snap.m)

    return -weak_pairing(field, tf, density=density, flux=flux, tau=tau)


# ── 에너지 부등식 ──

class EnergyInequalityReport(BaseModel):
    passed: bool
    min_slack: float
    slacks: list[float]
    tol: float


def field_energy_history(field: SpaceTimeField, g: GasParameters) -> np.ndarray:
    """시각별 int E (원방 기준 상대에너지, 원방 없거나 완전계면 총에너지)"""
    vol = field.grid.cell_volume
    out = []
    far = field.far
    for snap in field.snapshots:
        if not snap.is_full and far is not None and far.rho_inf > 0:
            dens = relative_energy_fields(snap.rho, snap.m, far.rho_inf, far.m_inf, g)
        else:
            dens = snapshot_energy(snap, g)
        out.append(float(np.sum(dens)) * vol)
    return np.array(out)


def energy_inequality_isentropic(
    field: SpaceTimeField,
    g: GasParameters,
    tau: Optional[float] = None,
    rtol: float = TOLERANCES["tol_inequality"],
) -> EnergyInequalityReport:
    """slack(t) = int E(init | far) - int E(t | far), 모든 t <= tau 에서 >= -tol"""
    tau = field.T if tau is None else tau
    energy = field_energy_history(field, g)
    K = int(np.searchsorted(field.times, tau * (1 + 1e-12), side="right"))
    slacks = energy[0] - energy[:K]
    tol = rtol * max(1.0, abs(float(energy[0])))
    return EnergyInequalityReport(
        passed=bool(np.all(slacks >= -tol)),
        min_slack=float(slacks.min()),
        slacks=slacks.tolist(),
        tol=tol,
    )


# ── 안정성 ──

class StabilityBudget(BaseModel):
    M: Optional[float] = None
    S_lower: Optional[float] = None
    e_tol: float = ROUNDOFF_FLOOR


class LevelStability(BaseModel):
    level: int
    mass_sup: float
    entropy_inf: Optional[float] = None
    energy_initial: float
    e_n: float
    l1_sup: float


class StabilityReport(BaseModel):
    levels: list[LevelStability]
    M: float
    S_lower: Optional[float] = None
    l1_bound: float
    verdict: Literal["stable", "not stable"]
    offending_level: Optional[int] = None
    reasons: list[str] = Field(default_factory=list)


def stability_check(sequence: Sequence[SpaceTimeField], g: GasParameters,
                    budget: Optional[StabilityBudget] = None) -> StabilityReport:
    """질량 상한, 엔트로피 적분 하한, 레벨별 에너지 초과분 e_n, L1 상한"""
    budget = budget or StabilityBudget()
    rows = []
    for field in sequence:
        vol = field.grid.cell_volume
        rho, m, S = field.rho, field.m, field.S
        spatial = tuple(range(1, rho.ndim))
        mass = rho.sum(axis=spatial) * vol
        l1 = mass + np.abs(m).sum(axis=spatial + (rho.ndim,)) * vol
        entropy_inf = None
        if S is not None:
            total_S = S.sum(axis=spatial) * vol
            entropy_inf = float(total_S.min())
            l1 = l1 + np.abs(S).sum(axis=spatial) * vol
        energy = field_energy_history(field, g)
        e_n = max(0.0, float(np.max(energy - energy[0])))
        rows.append(LevelStability(level=field.level, mass_sup=float(mass.max()), entropy_inf=entropy_inf,
                                   energy_initial=float(energy[0]), e_n=e_n, l1_sup=float(l1.max())))

    reasons = []
    offending = None
    M = budget.M if budget.M is not None else max(r.mass_sup for r in rows)
    for r in rows:
        if r.mass_sup > M * (1 + 1e-12):
            reasons.append(f"mass bound exceeded at level {r.level}")
            offending = offending or r.level
    S_inf = None
    if rows[0].entropy_inf is not None:
        S_inf = budget.S_lower if budget.S_lower is not None else min(r.entropy_inf for r in rows)
        for r in rows:
            if r.entropy_inf < S_inf - 1e-12 * max(1.0, abs(S_inf)):
                reasons.append(f"entropy integral below bound at level {r.level}")
                offending = offending or r.level

    e = np.array([r.e_n for r in rows])
    scale = max(1.0, max(abs(r.energy_initial) for r in rows))
    if not (np.all(e <= budget.e_tol * scale) or decays_to_zero(e, floor=budget.e_tol)):
        worst = int(np.argmax(e))
        reasons.append(f"energy excess does not vanish (max e_n={e[worst]:.3e} at level {rows[worst].level})")
        offending = offending or rows[worst].level

    verdict = "not stable" if reasons else "stable"
    if reasons:
        logger.warning("stability: %s", "; ".join(reasons))
    return StabilityReport(levels=rows, M=M, S_lower=S_inf, l1_bound=max(r.l1_sup for r in rows),
                           verdict=verdict, offending_level=offending, reasons=reasons)


# ── 일관성 배터리 ──

class LevelResidual(BaseModel):
    level: int
    h: float
    eps: float
    e1_sup: float
    e2_sup: float
    e1: list[float]
    e2: list[float]


class ResidualReport(BaseModel):
    levels: list[LevelResidual]
    e1_slope: Optional[float] = None
    e2_slope: Optional[float] = None
    verdict: Literal["consistent", "not consistent"]
    converged: bool = False


def consistency_battery(
    sequence: Sequence[SpaceTimeField],
    scalar_battery: Sequence[AnyTest],
    vector_battery: Sequence[AnyTest],
    g: GasParameters,
    tau: Optional[float] = None,
    tol_consistency: float = TOLERANCES["tol_consistency"],
) -> ResidualReport:
    """레벨별 sup |e1_n|, sup |e2_n|

    consistent: 두 수열 모두 반올림 바닥 이하이거나 엄격 감소 + log2 기울기 <= -0.5
    converged : 마지막 레벨이 레벨 1 값의 tol_consistency 배 미만
    """
    if not scalar_battery and not vector_battery:
        raise ValueError("empty test-function battery")
    rows = []
    for field in sequence:
        e1 = [continuity_residual(field, tf, tau) for tf in scalar_battery]
        e2 = [momentum_residual(field, tf, g, tau) for tf in vector_battery]
        rows.append(LevelResidual(
            level=field.level,
            h=float(field.meta.get("h", field.grid.h)),
            eps=float(field.meta.get("eps", 0.0)),
            e1_sup=float(np.max(np.abs(e1))) if e1 else 0.0,
            e2_sup=float(np.max(np.abs(e2))) if e2 else 0.0,
            e1=e1,
            e2=e2,
        ))
        logger.info("level %d: sup|e1|=%.3e sup|e2|=%.3e", field.level, rows[-1].e1_sup, rows[-1].e2_sup)

    s1 = [r.e1_sup for r in rows]
    s2 = [r.e2_sup for r in rows]
    ok = decays_to_zero(s1) and decays_to_zero(s2)
    converged = all(
        v[-1] <= tol_consistency * max(v[0], ROUNDOFF_FLOOR) or v[-1] <= ROUNDOFF_FLOOR
        for v in (s1, s2)
    )
    return ResidualReport(
        levels=rows,
        e1_slope=log2_slope(s1),
        e2_slope=log2_slope(s2),
        verdict="consistent" if ok else "not consistent",
        converged=converged,
    )


def entropy_battery(
    field: SpaceTimeField,
    battery: Sequence[AnyTest],
    library: Sequence[RenormalizationFunction],
    tau: Optional[float] = None,
) -> np.ndarray:
    """(시험함수 x Z) 엔트로피 결함 행렬"""
    return np.array([[entropy_residual(field, tf, Z, tau) for Z in library] for tf in battery])

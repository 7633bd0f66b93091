"""
lib/eos.py - 상태방정식과 에너지 함수
완전 Euler(폴리트로픽) / 등엔트로피 Euler의 압력, 온도, 총에너지,
상대에너지(Bregman 발산), 볼록성 점검

상태 벡터 규약:
    완전계    y = (rho, m_1..m_d, S)
    등엔트로피 y = (rho, m_1..m_d)
"""

import math
import logging
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from lib.base import VACUUM_EPS

logger = logging.getLogger(__name__)

# exp 인자가 이 값을 넘으면 +inf 취급
_EXP_LIMIT = 700.0


class GasParameters(BaseModel):
    """기체 상수: gamma > 1, a > 0, c_v = 1/(gamma-1)"""
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(1.4, gt=1.0)
    a: float = Field(1.0, gt=0.0)

    @computed_field
    @property
    def c_v(self) -> float:
        return 1.0 / (self.gamma - 1.0)


class FullState(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float
    m: list[float]
    S: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.rho, *self.m, self.S], dtype=float)

    @classmethod
    def from_vector(cls, y) -> "FullState":
        y = np.asarray(y, dtype=float)
        return cls(rho=float(y[0]), m=[float(v) for v in y[1:-1]], S=float(y[-1]))


class IsentropicState(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float
    m: list[float]

    def vector(self) -> np.ndarray:
        return np.array([self.rho, *self.m], dtype=float)

    @classmethod
    def from_vector(cls, y) -> "IsentropicState":
        y = np.asarray(y, dtype=float)
        return cls(rho=float(y[0]), m=[float(v) for v in y[1:]])


class FarField(BaseModel):
    """원방 경계 조건 (rho_inf, u_inf), m_inf = rho_inf * u_inf"""
    model_config = ConfigDict(frozen=True)

    rho_inf: float = Field(1.0, ge=0.0)
    u_inf: list[float] = Field(default_factory=lambda: [0.0])

    @computed_field
    @property
    def m_inf(self) -> list[float]:
        return [self.rho_inf * u for u in self.u_inf]

    @property
    def dim(self) -> int:
        return len(self.u_inf)

    def state(self) -> IsentropicState:
        return IsentropicState(rho=self.rho_inf, m=self.m_inf)


class ExtendedReal:
    """[0, +inf] 값. +inf는 태그로 표현하며 NaN과 음수는 허용하지 않음

    덧셈/비교는 측도론 규약을 따름 (inf + x = inf, 뺄셈은 정의하지 않음)
    """
    __slots__ = ("_value", "_infinite")

    def __init__(self, value: float = 0.0, infinite: bool = False):
        if infinite:
            value = math.inf
        else:
            value = float(value)
            if math.isnan(value):
                raise ValueError("invalid state")
            if math.isinf(value):
                if value < 0:
                    raise ValueError("negative extended real")
                infinite = True
            elif value < 0:
                raise ValueError("negative extended real")
        self._value = value
        self._infinite = infinite

    @classmethod
    def clipped(cls, value: float, scale: float = 1.0, rtol: float = 1e-10) -> "ExtendedReal":
        """반올림 수준의 음수(-rtol*scale 이상)는 0으로 올림"""
        if math.isnan(value):
            raise ValueError("invalid state")
        if value < 0 and value >= -rtol * max(1.0, abs(scale)):
            value = 0.0
        return cls(value)

    @property
    def value(self) -> float:
        return self._value

    @property
    def is_infinite(self) -> bool:
        return self._infinite

    @property
    def is_finite(self) -> bool:
        return not self._infinite

    def __float__(self) -> float:
        return self._value

    def __add__(self, other):
        other = other if isinstance(other, ExtendedReal) else ExtendedReal(other)
        if self._infinite or other._infinite:
            return INF
        return ExtendedReal(self._value + other._value)

    __radd__ = __add__

    def __mul__(self, weight: float):
        # 0 * inf = 0 (측도론 규약)
        if weight < 0:
            raise ValueError("negative weight")
        if weight == 0:
            return ExtendedReal(0.0)
        if self._infinite:
            return INF
        return ExtendedReal(self._value * weight)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (ExtendedReal, int, float)):
            return self._value == float(other)
        return NotImplemented

    def __lt__(self, other):
        return self._value < float(other)

    def __le__(self, other):
        return self._value <= float(other)

    def __gt__(self, other):
        return self._value > float(other)

    def __ge__(self, other):
        return self._value >= float(other)

    def __hash__(self):
        return hash(self._value)

    def __repr__(self):
        return "ExtendedReal(+inf)" if self._infinite else f"ExtendedReal({self._value!r})"


INF = ExtendedReal(infinite=True)
ZERO = ExtendedReal(0.0)


def _check_state(*values) -> None:
    for v in values:
        arr = np.asarray(v, dtype=float)
        if np.any(np.isnan(arr)):
            raise ValueError("invalid state")


def _is_vacuum(rho: float, rho_ref: float = 1.0) -> bool:
    return rho <= VACUUM_EPS * rho_ref


# ── 압력 / 포텐셜 (스칼라 또는 배열) ──

def pressure_isentropic(rho, g: GasParameters):
    """p(rho) = a rho^gamma"""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative density")
    out = g.a * np.power(r, g.gamma)
    return float(out) if out.ndim == 0 else out


def pressure_potential(rho, g: GasParameters):
    """P(rho) = a/(gamma-1) rho^gamma, rho P'(rho) - P(rho) = p(rho)"""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative density")
    out = g.a / (g.gamma - 1.0) * np.power(r, g.gamma)
    return float(out) if out.ndim == 0 else out


def pressure_potential_derivative(rho, g: GasParameters):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative density")
    out = g.a * g.gamma / (g.gamma - 1.0) * np.power(r, g.gamma - 1.0)
    return float(out) if out.ndim == 0 else out


def sound_speed(rho, g: GasParameters):
    """등엔트로피 음속 c = sqrt(a gamma rho^(gamma-1))"""
    r = np.asarray(rho, dtype=float)
    out = np.sqrt(g.a * g.gamma * np.power(np.maximum(r, 0.0), g.gamma - 1.0))
    return float(out) if out.ndim == 0 else out


# ── 완전계 ──

def _internal_exponent(rho: float, S: float, g: GasParameters) -> float:
    return S / (g.c_v * rho)


def total_energy_full(s: FullState, g: GasParameters) -> ExtendedReal:
    """E = |m|^2/(2 rho) + rho^gamma exp(S/(c_v rho))

    rho = 0 에서는 m = 0, S <= 0 일 때만 0, 그 외 및 rho < 0 은 +inf
    """
    _check_state(s.rho, s.m, s.S)
    m = np.asarray(s.m, dtype=float)
    if s.rho < 0:
        return INF
    if _is_vacuum(s.rho):
        if np.all(m == 0) and s.S <= 0:
            return ZERO
        return INF
    z = _internal_exponent(s.rho, s.S, g)
    if z > _EXP_LIMIT:
        return INF
    kinetic = 0.5 * float(m @ m) / s.rho
    internal = s.rho ** g.gamma * math.exp(z)
    if not math.isfinite(kinetic + internal):
        return INF
    return ExtendedReal(kinetic + internal)


def pressure_full(s: FullState, g: GasParameters) -> float:
    """p = (gamma-1) rho^gamma exp(S/(c_v rho)), 진공에서 0"""
    _check_state(s.rho, s.m, s.S)
    if s.rho < 0:
        raise ValueError("negative density")
    if _is_vacuum(s.rho):
        return 0.0
    z = _internal_exponent(s.rho, s.S, g)
    return (g.gamma - 1.0) * s.rho ** g.gamma * math.exp(min(z, _EXP_LIMIT))


def temperature(s: FullState, g: GasParameters) -> float:
    """theta = dE/dS = rho^(gamma-1) exp(S/(c_v rho)) / c_v"""
    _check_state(s.rho, s.m, s.S)
    if s.rho <= 0:
        raise ValueError("temperature undefined at vacuum")
    z = _internal_exponent(s.rho, s.S, g)
    return s.rho ** (g.gamma - 1.0) * math.exp(min(z, _EXP_LIMIT)) / g.c_v


def full_energy_gradient(s: FullState, g: GasParameters) -> np.ndarray:
    """내부점 해석적 기울기 (dE/drho, dE/dm, dE/dS)"""
    _check_state(s.rho, s.m, s.S)
    if s.rho <= 0:
        raise ValueError("reference outside domain")
    m = np.asarray(s.m, dtype=float)
    e = math.exp(_internal_exponent(s.rho, s.S, g))
    d_rho = -0.5 * float(m @ m) / s.rho ** 2 + e * s.rho ** (g.gamma - 2.0) * (g.gamma * s.rho - s.S / g.c_v)
    d_m = m / s.rho
    d_S = temperature(s, g)
    return np.concatenate([[d_rho], d_m, [d_S]])


def energy_full_vector(y, g: GasParameters) -> ExtendedReal:
    return total_energy_full(FullState.from_vector(y), g)


# ── 등엔트로피계 ──

def total_energy_isentropic(s: IsentropicState, g: GasParameters) -> ExtendedReal:
    """E = |m|^2/(2 rho) + P(rho), 진공/음밀도 규약은 완전계와 동일"""
    _check_state(s.rho, s.m)
    m = np.asarray(s.m, dtype=float)
    if s.rho < 0:
        return INF
    if _is_vacuum(s.rho):
        return ZERO if np.all(m == 0) else INF
    return ExtendedReal(0.5 * float(m @ m) / s.rho + pressure_potential(s.rho, g))


def isentropic_energy_gradient(s: IsentropicState, g: GasParameters) -> np.ndarray:
    _check_state(s.rho, s.m)
    if s.rho <= 0:
        raise ValueError("reference outside domain")
    m = np.asarray(s.m, dtype=float)
    d_rho = -0.5 * float(m @ m) / s.rho ** 2 + pressure_potential_derivative(s.rho, g)
    return np.concatenate([[d_rho], m / s.rho])


def energy_isentropic_vector(y, g: GasParameters) -> ExtendedReal:
    return total_energy_isentropic(IsentropicState.from_vector(y), g)


def _far_terms(far: FarField, g: GasParameters) -> tuple[float, float]:
    return pressure_potential(far.rho_inf, g), pressure_potential_derivative(far.rho_inf, g)


def relative_energy_isentropic(s: IsentropicState, far: FarField, g: GasParameters) -> ExtendedReal:
    """E(rho, m | rho_inf, m_inf) = rho|m/rho - u_inf|^2/2 + P(rho) - P'(rho_inf)(rho - rho_inf) - P(rho_inf)"""
    _check_state(s.rho, s.m)
    m = np.asarray(s.m, dtype=float)
    u_inf = np.asarray(far.u_inf, dtype=float)
    if s.rho < 0:
        return INF
    P_inf, dP_inf = _far_terms(far, g)
    if _is_vacuum(s.rho):
        if not np.all(m == 0):
            return INF
        kinetic = 0.0
    else:
        w = m / s.rho - u_inf
        kinetic = 0.5 * s.rho * float(w @ w)
    P = pressure_potential(s.rho, g)
    value = kinetic + P - dP_inf * (s.rho - far.rho_inf) - P_inf
    return ExtendedReal.clipped(value, scale=P + P_inf + kinetic)


def relative_energy_isentropic_expanded(s: IsentropicState, far: FarField, g: GasParameters) -> ExtendedReal:
    """전개형: |m|^2/(2 rho) - m.u_inf + rho|u_inf|^2/2 + P(rho) - P'(rho_inf)(rho - rho_inf) - P(rho_inf)"""
    _check_state(s.rho, s.m)
    m = np.asarray(s.m, dtype=float)
    u_inf = np.asarray(far.u_inf, dtype=float)
    if s.rho < 0:
        return INF
    if _is_vacuum(s.rho) and not np.all(m == 0):
        return INF
    P_inf, dP_inf = _far_terms(far, g)
    kinetic = 0.0 if _is_vacuum(s.rho) else 0.5 * float(m @ m) / s.rho
    P = pressure_potential(s.rho, g)
    value = kinetic - float(m @ u_inf) + 0.5 * s.rho * float(u_inf @ u_inf) + P - dP_inf * (s.rho - far.rho_inf) - P_inf
    return ExtendedReal.clipped(value, scale=P + P_inf + kinetic)


def bregman_pointwise(E: Callable, U, V, xi) -> ExtendedReal:
    """Bregman 발산 E(U) - xi.(U - V) - E(V), xi 는 V 에서의 부분기울기"""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_state(U, V, xi)
    EV = E(V)
    EV = EV if isinstance(EV, ExtendedReal) else ExtendedReal(EV)
    if EV.is_infinite:
        raise ValueError("reference outside domain")
    EU = E(U)
    EU = EU if isinstance(EU, ExtendedReal) else ExtendedReal(EU)
    if EU.is_infinite:
        return INF
    value = EU.value - float(xi @ (U - V)) - EV.value
    return ExtendedReal.clipped(value, scale=EU.value + EV.value)


def relative_energy_full(s: FullState, ref: FullState, g: GasParameters) -> ExtendedReal:
    """정지 기준상태 (rho~, 0, S~) 에서의 완전계 Bregman 발산"""
    if ref.rho <= 0 or any(v != 0 for v in ref.m):
        raise ValueError("reference outside domain")
    xi = full_energy_gradient(ref, g)
    return bregman_pointwise(lambda y: energy_full_vector(y, g), s.vector(), ref.vector(), xi)


def relative_energy_fields(rho, m, rho_ref, m_ref, g: GasParameters) -> np.ndarray:
    """두 등엔트로피 장 사이의 점별 상대에너지 (기준장은 rho_ref > 0)

    m 배열은 마지막 축이 성분
    """
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    rho_ref = np.broadcast_to(np.asarray(rho_ref, dtype=float), rho.shape)
    m_ref = np.broadcast_to(np.asarray(m_ref, dtype=float), m.shape)
    if np.any(rho_ref <= 0):
        raise ValueError("reference outside domain")
    if np.any(rho < 0):
        raise ValueError("negative density")
    u_ref = m_ref / rho_ref[..., None]
    vac = rho <= VACUUM_EPS
    safe = np.where(vac, 1.0, rho)
    w = m / safe[..., None] - u_ref
    kinetic = np.where(vac, 0.0, 0.5 * rho * np.sum(w * w, axis=-1))
    P = pressure_potential(rho, g)
    P_ref = pressure_potential(rho_ref, g)
    dP_ref = pressure_potential_derivative(rho_ref, g)
    out = kinetic + P - dP_ref * (rho - rho_ref) - P_ref
    out = np.where(vac & np.any(m != 0, axis=-1), np.inf, out)
    return np.maximum(out, 0.0)


def energy_isentropic_array(rho, m, g: GasParameters) -> np.ndarray:
    """배열 커널: 진공(rho<=eps)의 운동항은 1_{rho>0} 규약"""
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(rho < 0):
        raise ValueError("negative density")
    vac = rho <= VACUUM_EPS
    safe = np.where(vac, 1.0, rho)
    kinetic = np.where(vac, 0.0, 0.5 * np.sum(m * m, axis=-1) / safe)
    out = kinetic + pressure_potential(rho, g)
    return np.where(vac & np.any(m != 0, axis=-1), np.inf, out)


def energy_full_array(rho, m, S, g: GasParameters) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(rho < 0):
        raise ValueError("negative density")
    vac = rho <= VACUUM_EPS
    safe = np.where(vac, 1.0, rho)
    z = np.minimum(np.where(vac, 0.0, S / (g.c_v * safe)), _EXP_LIMIT)
    kinetic = 0.5 * np.sum(m * m, axis=-1) / safe
    internal = np.power(safe, g.gamma) * np.exp(z)
    out = np.where(vac, 0.0, kinetic + internal)
    bad_vacuum = vac & (np.any(m != 0, axis=-1) | (S > 0))
    return np.where(bad_vacuum, np.inf, out)


def relative_energy_full_fields(rho, m, S, rho_ref, m_ref, S_ref, g: GasParameters) -> np.ndarray:
    """두 완전계 장 사이의 점별 Bregman 발산 E(U) - E(V) - grad E(V).(U - V)

    기준장 V 는 rho_ref > 0 인 내부점, 기울기는 해석식. m 배열은 마지막 축이 성분
    """
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    S = np.asarray(S, dtype=float)
    rho_ref = np.broadcast_to(np.asarray(rho_ref, dtype=float), rho.shape)
    m_ref = np.broadcast_to(np.asarray(m_ref, dtype=float), m.shape)
    S_ref = np.broadcast_to(np.asarray(S_ref, dtype=float), S.shape)
    if np.any(rho_ref <= 0):
        raise ValueError("reference outside domain")
    gam, c_v = g.gamma, g.c_v
    e_ref = np.exp(np.minimum(S_ref / (c_v * rho_ref), _EXP_LIMIT))
    u_ref = m_ref / rho_ref[..., None]
    d_rho = -0.5 * np.sum(u_ref * u_ref, axis=-1) + e_ref * rho_ref ** (gam - 2.0) * (gam * rho_ref - S_ref / c_v)
    d_S = rho_ref ** (gam - 1.0) * e_ref / c_v
    linear = d_rho * (rho - rho_ref) + np.sum(u_ref * (m - m_ref), axis=-1) + d_S * (S - S_ref)
    out = energy_full_array(rho, m, S, g) - energy_full_array(rho_ref, m_ref, S_ref, g) - linear
    return np.maximum(out, 0.0)


def pressure_full_array(rho, S, g: GasParameters) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(rho < 0):
        raise ValueError("negative density")
    vac = rho <= VACUUM_EPS
    safe = np.where(vac, 1.0, rho)
    z = np.minimum(S / (g.c_v * safe), _EXP_LIMIT)
    return np.where(vac, 0.0, (g.gamma - 1.0) * np.power(safe, g.gamma) * np.exp(z))


# ── 하한 / 지배 상수 보정 ──

class LowerBoundResult(BaseModel):
    branch: Literal["near", "far"]
    ratio: Optional[float] = None
    note: str = ""
    constant: Optional[float] = None
    passed: Optional[bool] = None


class LowerBoundCalibration(BaseModel):
    near: float
    far: float
    samples: int


def _near_branch(s: IsentropicState, far: FarField) -> bool:
    m = float(np.linalg.norm(s.m))
    m_inf = float(np.linalg.norm(far.m_inf))
    return (0.5 * far.rho_inf <= s.rho <= 2.0 * far.rho_inf) and (0.5 * m_inf <= m <= 2.0 * m_inf)


def lower_bound_check(
    s: IsentropicState,
    far: FarField,
    g: GasParameters,
    calibration: Optional[LowerBoundCalibration] = None,
) -> LowerBoundResult:
    """상대에너지 하한 분기 판정

    near: E(.|.) / (|rho - rho_inf|^2 + |m - m_inf|^2)
    far : E(.|.) / (1 + rho^gamma + |m|^2/rho)
    """
    if far.rho_inf <= 0:
        raise ValueError("reference outside domain")
    rel = relative_energy_isentropic(s, far, g)
    m = np.asarray(s.m, dtype=float)
    if _near_branch(s, far):
        dm = m - np.asarray(far.m_inf, dtype=float)
        quad = (s.rho - far.rho_inf) ** 2 + float(dm @ dm)
        if quad == 0:
            return LowerBoundResult(branch="near", note="at reference, bound vacuous")
        ratio = rel.value / quad
        branch = "near"
    else:
        kinetic = 0.0 if _is_vacuum(s.rho) else float(m @ m) / s.rho
        if rel.is_infinite:
            return LowerBoundResult(branch="far", note="outside energy domain")
        ratio = rel.value / (1.0 + max(s.rho, 0.0) ** g.gamma + kinetic)
        branch = "far"
    result = LowerBoundResult(branch=branch, ratio=ratio)
    if calibration is not None:
        c = calibration.near if branch == "near" else calibration.far
        result = LowerBoundResult(branch=branch, ratio=ratio, constant=c, passed=ratio >= c * (1 - 1e-9))
    return result


def calibrate_lower_bound(
    far: FarField,
    g: GasParameters,
    n_samples: int = 20000,
    seed: int = 0,
    rho_max_factor: float = 50.0,
) -> LowerBoundCalibration:
    """그리드/무작위 탐색으로 분기별 최소 비율을 구함 (하드코딩 금지)"""
    rng = np.random.default_rng(seed)
    d = far.dim
    m_inf = np.asarray(far.m_inf, dtype=float)
    m_scale = 1.0 + float(np.linalg.norm(m_inf))
    near_min, far_min = np.inf, np.inf

    rhos = np.concatenate([
        rng.uniform(0.5 * far.rho_inf, 2.0 * far.rho_inf, n_samples // 2),
        rng.uniform(0.0, rho_max_factor * far.rho_inf, n_samples - n_samples // 2),
    ])
    for rho in rhos:
        if rng.random() < 0.5 and np.any(m_inf != 0):
            # near 분기 모멘텀: |m| in [|m_inf|/2, 2|m_inf|]
            direction = rng.normal(size=d)
            direction /= np.linalg.norm(direction)
            m = direction * rng.uniform(0.5, 2.0) * np.linalg.norm(m_inf)
        else:
            m = rng.uniform(-10.0, 10.0, d) * m_scale
        if rng.random() < 0.1:
            m = m_inf.copy()
        if rho <= VACUUM_EPS:
            m = np.zeros(d)
        res = lower_bound_check(IsentropicState(rho=float(rho), m=m.tolist()), far, g)
        if res.ratio is None:
            continue
        if res.branch == "near":
            near_min = min(near_min, res.ratio)
        else:
            far_min = min(far_min, res.ratio)
    calib = LowerBoundCalibration(
        near=float(near_min if np.isfinite(near_min) else 0.0),
        far=float(far_min if np.isfinite(far_min) else 0.0),
        samples=n_samples,
    )
    logger.info("lower bound calibration: near=%.4e far=%.4e (%d samples)", calib.near, calib.far, n_samples)
    return calib


def calibrate_dominance(ref: FullState, g: GasParameters, n_directions: int = 20000, seed: int = 0) -> float:
    """E(y|ref) >= c |y - ref|_1 (|y - ref|_1 >= 1) 의 상수 c

    f(r) = E(ref + r v | ref) 는 볼록이고 f(0) = 0 이므로 f(r)/r 는 r 에 대해
    비감소. 따라서 단위 L1 구면 위의 최솟값이 c 가 됨
    """
    rng = np.random.default_rng(seed)
    y0 = ref.vector()
    k = y0.size
    axes = np.vstack([np.eye(k), -np.eye(k)])
    dirs = rng.normal(size=(n_directions, k))
    dirs = np.vstack([axes, dirs / np.sum(np.abs(dirs), axis=1, keepdims=True)])
    best = np.inf
    for v in dirs:
        value = relative_energy_full(FullState.from_vector(y0 + v), ref, g)
        if value.is_finite:
            best = min(best, value.value)
    logger.info("dominance constant for rho=%.3g S=%.3g: %.4e", ref.rho, ref.S, best)
    return float(best)


# ── 볼록성 점검 ──

class ConvexityReport(BaseModel):
    pairs_checked: int = 0
    skipped: int = 0
    violations: int = 0
    min_gap: Optional[float] = None
    notes: list[str] = Field(default_factory=list)


def convexity_probe(E: Callable, samples, rtol: float = 1e-12) -> ConvexityReport:
    """E((y1+y2)/2) < (E(y1)+E(y2))/2 점검, 최소 격차 보고"""
    report = ConvexityReport()
    min_gap = np.inf
    for y1, y2 in samples:
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if np.array_equal(y1, y2):
            report.skipped += 1
            continue
        e1, e2 = E(y1), E(y2)
        e1 = e1 if isinstance(e1, ExtendedReal) else ExtendedReal(e1)
        e2 = e2 if isinstance(e2, ExtendedReal) else ExtendedReal(e2)
        if e1.is_infinite or e2.is_infinite or e1.value == 0:
            report.skipped += 1
            if len(report.notes) < 20:
                report.notes.append(f"skipped pair outside domain: {y1.tolist()} / {y2.tolist()}")
            continue
        mid = E(0.5 * (y1 + y2))
        mid = mid if isinstance(mid, ExtendedReal) else ExtendedReal(mid)
        gap = 0.5 * (e1.value + e2.value) - mid.value
        report.pairs_checked += 1
        min_gap = min(min_gap, gap)
        if gap < -rtol * max(1.0, e1.value, e2.value):
            report.violations += 1
    report.min_gap = float(min_gap) if np.isfinite(min_gap) else None
    return report


def hessian_min_eigenvalue(E: Callable, y, h: float = 1e-4) -> tuple[float, float]:
    """중심차분 헤시안의 최소 고유값과 스케일(max |H_ij|, 1)"""
    y = np.asarray(y, dtype=float)
    k = y.size
    f = lambda z: float(E(z))
    H = np.zeros((k, k))
    f0 = f(y)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h
        H[i, i] = (f(y + ei) - 2 * f0 + f(y - ei)) / h ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h
            H[i, j] = H[j, i] = (f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)) / (4 * h ** 2)
    scale = max(1.0, float(np.max(np.abs(H))))
    return float(np.linalg.eigvalsh(H)[0]), scale


def vacuum_admissibility_flags(rho, S) -> int:
    """rho = 0, S < 0 셀 수 (에너지는 유한이나 약해 허용성에서는 S = 0 요구)"""
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    return int(np.count_nonzero((rho <= VACUUM_EPS) & (S < 0)))

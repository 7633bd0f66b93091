"""
lib/defects.py - 결함 측도 추정
약극한 추정(레벨 외삽), 내부에너지 결함 R_e, 점성 결함 R_v,
총결함 D = R_v + (gamma-1) R_e I, 양반정치 점검, 에너지-결함 항등식

외삽 가중치 w_n(c) 는 조밀 셀마다 한 번 정해 극한과 모든 결함에 공유
(sum_n w_n = 1 이므로 선형항이 정확히 상쇄됨)
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

from lib.base import ROUNDOFF_FLOOR, TOLERANCES
from lib.eos import (
    FarField, GasParameters, energy_full_array, energy_isentropic_array, pressure_potential,
    pressure_potential_derivative, relative_energy_fields, relative_energy_full_fields,
)
from lib.grid import Grid, SpaceTimeField, TimeBump, field_from_arrays, resample_times, restrict, time_weights

logger = logging.getLogger(__name__)

RICHARDSON_MAX_RATIO = 0.95
COLLINEAR_TOL = 0.1


# ── 측도 컨테이너 ──

@dataclass(frozen=True, eq=False)
class ScalarMeasureField:
    """조밀 셀마다 비음 질량. 음수는 0으로 잘라내고 잘린 질량을 기록"""
    grid: Grid
    weights: np.ndarray
    clip_mass: float = 0.0

    @classmethod
    def from_values(cls, grid: Grid, values, label: str = "measure") -> "ScalarMeasureField":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("measure shape does not match grid")
        neg = values < 0
        clip = float(-values[neg].sum())
        if clip > 0:
            logger.info("%s: clipped %d negative cells, mass %.3e (total %.3e)",
                        label, int(neg.sum()), clip, float(np.abs(values).sum()))
        return cls(grid=grid, weights=np.where(neg, 0.0, values), clip_mass=clip)

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def _triu(d: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(d)


@dataclass(frozen=True, eq=False)
class MatrixMeasureField:
    """셀마다 대칭 d x d 행렬, 상삼각만 저장"""
    grid: Grid
    upper: np.ndarray

    @classmethod
    def from_matrices(cls, grid: Grid, mats) -> "MatrixMeasureField":
        mats = np.asarray(mats, dtype=float)
        d = grid.dim
        if mats.shape != grid.shape + (d, d):
            raise ValueError("matrix measure shape does not match grid")
        i, j = _triu(d)
        return cls(grid=grid, upper=mats[..., i, j].copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "MatrixMeasureField":
        return cls.from_matrices(grid, np.zeros(grid.shape + (grid.dim, grid.dim)))

    @property
    def mats(self) -> np.ndarray:
        d = self.grid.dim
        i, j = _triu(d)
        out = np.zeros(self.grid.shape + (d, d))
        out[..., i, j] = self.upper
        out[..., j, i] = self.upper
        return out

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.mats, axis1=-2, axis2=-1)

    def operator_norms(self) -> np.ndarray:
        return np.max(np.abs(np.linalg.eigvalsh(self.mats)), axis=-1)

    @property
    def total_variation(self) -> float:
        return float(self.operator_norms().sum())

    def __add__(self, other: "MatrixMeasureField") -> "MatrixMeasureField":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return MatrixMeasureField(grid=self.grid, upper=self.upper + other.upper)

    def scaled(self, c: float) -> "MatrixMeasureField":
        return MatrixMeasureField(grid=self.grid, upper=c * self.upper)


# ── 시간 창 ──

class Window(BaseModel):
    """average: [t0, t1] 시간 평균, psi: TimeBump 가중 적분"""
    kind: Literal["average", "psi"] = "average"
    t0: Optional[float] = None
    t1: Optional[float] = None
    center: Optional[float] = None
    radius: Optional[float] = None

    def weights(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.kind == "psi":
            return time_weights(times, TimeBump(center=self.center, radius=self.radius))
        if len(times) == 1:
            return np.ones(1)
        t0 = times[0] if self.t0 is None else self.t0
        t1 = times[-1] if self.t1 is None else self.t1
        w = np.zeros(len(times))
        covered = 0.0
        tol = 1e-12 * max(1.0, times[-1])
        for k in range(len(times) - 1):
            a, b = times[k], times[k + 1]
            if a >= t0 - tol and b <= t1 + tol:
                w[k] += (b - a) / 2
                w[k + 1] += (b - a) / 2
                covered += b - a
        if covered <= 0:
            raise ValueError("empty window")
        return w / covered


# ── 레벨 자료 ──

def _state_arrays(field: SpaceTimeField) -> np.ndarray:
    """(nt, *shape, k): rho, m_1..m_d[, S]"""
    parts = [field.rho[..., None], field.m]
    if field.is_full:
        parts.append(field.S[..., None])
    return np.concatenate(parts, axis=-1)


def _on_times(field: SpaceTimeField, times: np.ndarray) -> SpaceTimeField:
    if len(field.times) == len(times) and np.allclose(field.times, times, rtol=0, atol=1e-12 * max(1.0, times[-1])):
        return field
    return resample_times(field, times)


def common_times(sequence: Sequence[SpaceTimeField]) -> np.ndarray:
    T = sequence[0].T
    if any(abs(f.T - T) > 1e-12 * max(1.0, T) for f in sequence):
        raise ValueError("sequence members end at different times")
    return np.array(min((f.times for f in sequence), key=len), dtype=float)


def _trim_mask(field: SpaceTimeField, g: GasParameters, quantile: float, factor: float) -> np.ndarray:
    rho, m = field.rho, field.m
    if field.is_full:
        e = energy_full_array(rho, m, field.S, g)
    else:
        e = energy_isentropic_array(rho, m, g)
    axes = tuple(range(1, e.ndim))
    q = np.quantile(e, quantile, axis=axes, keepdims=True)
    mean = e.mean(axis=axes, keepdims=True)
    return ~((e > q) & (e > factor * mean))


def _masked_restrict(arr: np.ndarray, mask: np.ndarray, factor: int, dim: int) -> np.ndarray:
    """마스크 블록 평균 (블록 전체가 마스크되면 전체 평균)"""
    extra = arr.ndim - mask.ndim
    mk = mask.reshape(mask.shape + (1,) * extra).astype(float)
    num = restrict(arr * mk, factor, dim, lead=1)
    den = restrict(np.broadcast_to(mk, arr.shape), factor, dim, lead=1)
    plain = restrict(arr, factor, dim, lead=1)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), plain)


def prolong(arr: np.ndarray, factor: int, dim: int, lead: int = 1) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    for i in range(dim):
        out = np.repeat(out, factor, axis=lead + i)
    return out


def level_weights(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """셀별 외삽 가중치

    values: (N, *shape, k) 레벨별 창 평균 상태 벡터
    반환: weights (N, *shape), choice (*shape) 0=converged, 1=last, 2=richardson
    비율 q = <d1, d2>/|d1|^2 (d1 = V_{N-1}-V_{N-2}, d2 = V_N-V_{N-1}),
    0 < q < 0.95 이고 꼬리가 공선이면 w_N = 1/(1-q), w_{N-1} = -q/(1-q)
    """
    N = values.shape[0]
    if N < 3:
        raise ValueError("cannot extrapolate")
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    scale = np.maximum(1.0, np.linalg.norm(values[-1], axis=-1))
    n1 = np.linalg.norm(d1, axis=-1)
    n2 = np.linalg.norm(d2, axis=-1)
    safe = np.where(n1 > 0, n1, 1.0)
    q = np.sum(d1 * d2, axis=-1) / safe ** 2
    off = np.linalg.norm(d2 - q[..., None] * d1, axis=-1)
    converged = n2 <= 1e-12 * scale
    geometric = (~converged) & (n1 > 1e-12 * scale) & (q > 0) & (q < RICHARDSON_MAX_RATIO) & (off <= COLLINEAR_TOL * n2)

    weights = np.zeros((N,) + values.shape[1:-1])
    weights[-1] = 1.0
    qg = np.where(geometric, q, 0.0)
    weights[-1] = np.where(geometric, 1.0 / (1.0 - qg), 1.0)
    weights[-2] = np.where(geometric, -qg / (1.0 - qg), 0.0)
    choice = np.where(converged, 0, np.where(geometric, 2, 1))
    return weights, choice


class _LevelData:
    """조밀 격자로 내린 레벨별 시계열 캐시"""

    def __init__(self, sequence, coarse: Grid, times: np.ndarray, isentropic: bool = False):
        if isentropic and any(f.is_full for f in sequence):
            raise ValueError("defect measures need an isentropic sequence")
        self.coarse = coarse
        self.times = times
        self.fields = [_on_times(f, times) for f in sequence]
        self.factors = [coarse.refinement_factor(f.grid) for f in self.fields]

    def block_average(self, n: int, arr: np.ndarray) -> np.ndarray:
        return restrict(arr, self.factors[n], self.coarse.dim, lead=1)


def weak_limit_estimate(
    sequence: Sequence[SpaceTimeField],
    coarse_grid: Grid,
    window: Optional[Window] = None,
    trim: bool = False,
    g: Optional[GasParameters] = None,
    trim_quantile: float = 0.99,
    trim_factor: float = 10.0,
) -> SpaceTimeField:
    """레벨별 조밀 셀 평균 -> 셀별 Richardson 또는 마지막 레벨

    trim: 절단 평균 (에너지 상위 분위 + 평균의 trim_factor 배 초과 세분 셀 제외)
    """
    if len(sequence) < 3:
        raise ValueError("cannot extrapolate")
    window = window or Window()
    times = common_times(sequence)
    data = _LevelData(sequence, coarse_grid, times)
    dim = coarse_grid.dim

    series = []
    trimmed = []
    for n, field in enumerate(data.fields):
        U = _state_arrays(field)
        if trim:
            if g is None:
                raise ValueError("trimming needs gas parameters")
            mask = _trim_mask(field, g, trim_quantile, trim_factor)
            trimmed.append(float(1.0 - mask.mean()))
            series.append(_masked_restrict(U, mask, data.factors[n], dim))
        else:
            series.append(data.block_average(n, U))
    series = np.stack(series)                      # (N, nt, *shape, k)
    w_t = window.weights(times)
    windowed = np.tensordot(w_t, series, axes=([0], [1]))  # (N, *shape, k)
    weights, choice = level_weights(windowed)
    limit = np.einsum("n...,nt...k->t...k", weights, series)

    # 외삽 밀도가 양수가 아니면 마지막 레벨로
    bad = np.any(limit[..., 0] <= 0, axis=0)
    if np.any(bad):
        logger.warning("extrapolated density non-positive in %d cells; using last level there", int(bad.sum()))
        weights[:, bad] = 0.0
        weights[-1, bad] = 1.0
        choice = np.where(bad, 1, choice)
        limit = np.einsum("n...,nt...k->t...k", weights, series)

    counts = {name: int(np.sum(choice == v)) for v, name in enumerate(("converged", "last", "richardson"))}
    logger.info("weak limit: %s", counts)
    for idx in zip(*np.nonzero(choice == 2)):
        logger.debug("cell %s: richardson", tuple(int(i) for i in idx))
    if trim:
        logger.info("trimmed fine-cell fraction per level: %s", ["%.4f" % t for t in trimmed])

    d = coarse_grid.dim
    rho = limit[..., 0]
    m = limit[..., 1:1 + d]
    S = limit[..., 1 + d] if sequence[0].is_full else None
    out = field_from_arrays(coarse_grid, times, rho, m, S, far=sequence[0].far, level=0,
                            meta={"level_weights": weights, "choice": choice, "trimmed": trimmed,
                                  "extrapolation_counts": counts})
    return out


# ── 결함 ──

def _reference_arrays(data: _LevelData, n: int, limit: Optional[SpaceTimeField], target) -> np.ndarray:
    """레벨 n 세분 격자 위의 기준 상태 (nt, *fine_shape, k)"""
    if target is not None:
        ref = _on_times(target[n], data.times)
        factor = data.fields[n].grid.refinement_factor(ref.grid)
        return restrict(_state_arrays(ref), factor, data.coarse.dim, lead=1)
    return prolong(_state_arrays(limit), data.factors[n], data.coarse.dim)


def _windowed_cell_integrals(data: _LevelData, n: int, dens: np.ndarray, w_t: np.ndarray) -> np.ndarray:
    """창 가중 int_c dens dx, dens (nt, *fine, ...)"""
    avg = data.block_average(n, dens)
    return np.tensordot(w_t, avg, axes=([0], [0])) * data.coarse.cell_volume


def _weights_of(limit: SpaceTimeField) -> np.ndarray:
    W = limit.meta.get("level_weights")
    if W is None:
        raise ValueError("limit carries no level weights; use weak_limit_estimate")
    return W


def _combine(W: np.ndarray, per_level: list) -> np.ndarray:
    per_level = np.stack(per_level)
    extra = per_level.ndim - W.ndim
    return np.sum(W.reshape(W.shape + (1,) * extra) * per_level, axis=0)


def _split(U: np.ndarray, d: int):
    return U[..., 0], U[..., 1:1 + d]


def internal_energy_defect(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    g: GasParameters,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> ScalarMeasureField:
    """R_e(c) = sum_n w_n int_c [P(rho_n) - P(rho) - P'(rho)(rho_n - rho)]

    기준이 조밀 극한이면 선형항이 상쇄되어 sum_n w_n int_c P(rho_n) - |c| P(rho) 와 같음
    """
    window = window or Window()
    times = limit.times
    data = _LevelData(sequence, coarse_grid, times, isentropic=True)
    W = _weights_of(limit)
    w_t = window.weights(times)
    d = coarse_grid.dim
    per_level = []
    for n, field in enumerate(data.fields):
        rho_n = field.rho
        rho_r, _ = _split(_reference_arrays(data, n, limit, target), d)
        dens = pressure_potential(rho_n, g) - pressure_potential(rho_r, g) \
            - pressure_potential_derivative(rho_r, g) * (rho_n - rho_r)
        per_level.append(_windowed_cell_integrals(data, n, dens, w_t))
    return ScalarMeasureField.from_values(coarse_grid, _combine(W, per_level), label="R_e")


def _convective_corrected(rho: np.ndarray, m: np.ndarray, u_inf: np.ndarray) -> np.ndarray:
    """C = (m - rho u_inf) (x) (m - rho u_inf) / rho, 진공에서 0"""
    w = m - rho[..., None] * u_inf
    vac = rho <= 1e-12
    safe = np.where(vac, 1.0, rho)
    out = w[..., :, None] * w[..., None, :] / safe[..., None, None]
    return np.where(vac[..., None, None], 0.0, out)


def viscosity_defect(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    far: FarField,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> MatrixMeasureField:
    """R_v(c) = sum_n w_n int_c C_n - |c| C(limit), C 는 u_inf 보정 대류 텐서

    레벨별 목표장이 주어지면 행렬 Bregman 형태 rho_n (u_n - u_T) (x) (u_n - u_T)
    """
    window = window or Window()
    times = limit.times
    data = _LevelData(sequence, coarse_grid, times, isentropic=True)
    W = _weights_of(limit)
    w_t = window.weights(times)
    d = coarse_grid.dim
    u_inf = np.asarray(far.u_inf, dtype=float)
    per_level = []
    for n, field in enumerate(data.fields):
        rho_n, m_n = field.rho, field.m
        rho_r, m_r = _split(_reference_arrays(data, n, limit, target), d)
        if target is None:
            dens = _convective_corrected(rho_n, m_n, u_inf) - _convective_corrected(rho_r, m_r, u_inf)
        else:
            vac = rho_n <= 1e-12
            u_n = m_n / np.where(vac, 1.0, rho_n)[..., None]
            du = u_n - m_r / rho_r[..., None]
            dens = np.where(vac[..., None, None], 0.0, rho_n[..., None, None] * du[..., :, None] * du[..., None, :])
        per_level.append(_windowed_cell_integrals(data, n, dens, w_t))
    return MatrixMeasureField.from_matrices(coarse_grid, _combine(W, per_level))


def total_defect(R_v: MatrixMeasureField, R_e: ScalarMeasureField, g: GasParameters) -> MatrixMeasureField:
    """D = R_v + (gamma-1) R_e I"""
    if R_v.grid != R_e.grid:
        raise ValueError("grid mismatch")
    d = R_v.grid.dim
    iso = (g.gamma - 1.0) * R_e.weights[..., None, None] * np.eye(d)
    return MatrixMeasureField.from_matrices(R_v.grid, R_v.mats + iso)


class PsdReport(BaseModel):
    passed: bool
    min_eig: float
    min_quadratic: float
    tol: float
    failing_cells: int
    min_eig_cells: list = Field(default_factory=list)


def psd_check(M: MatrixMeasureField, n_random: int = 20, seed: int = 0, rtol: float = TOLERANCES["tol_psd"]) -> PsdReport:
    """축 벡터 + 무작위 단위벡터로 xi^T M xi, 그리고 정확한 최소 고유값"""
    d = M.grid.dim
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n_random, d))
    xi = np.vstack([np.eye(d), xi / np.linalg.norm(xi, axis=1, keepdims=True)])
    mats = M.mats
    quad = np.einsum("bi,...ij,bj->...b", xi, mats, xi)
    eig = np.linalg.eigvalsh(mats)[..., 0]
    scale = float(np.max(np.abs(M.trace))) if mats.size else 0.0
    tol = rtol * scale
    failing = eig < -tol
    return PsdReport(
        passed=not bool(np.any(failing)),
        min_eig=float(eig.min()) if eig.size else 0.0,
        min_quadratic=float(quad.min()) if quad.size else 0.0,
        tol=tol,
        failing_cells=int(failing.sum()),
        min_eig_cells=eig.reshape(-1).tolist(),
    )


class IdentityReport(BaseModel):
    gap: float
    relative_gap: float
    defect_total: float
    passed: bool


def energy_defect_measure(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    far: FarField,
    g: GasParameters,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> np.ndarray:
    """원방 기준 상대에너지로 계산한 결함

    sum_n w_n int_c [E(U_n|far) - E(T_n|far) - dE(T_n|far).(U_n - T_n)]
    """
    window = window or Window()
    times = limit.times
    data = _LevelData(sequence, coarse_grid, times, isentropic=True)
    W = _weights_of(limit)
    w_t = window.weights(times)
    d = coarse_grid.dim
    u_inf = np.asarray(far.u_inf, dtype=float)
    dP_inf = pressure_potential_derivative(far.rho_inf, g)
    per_level = []
    for n, field in enumerate(data.fields):
        rho_n, m_n = field.rho, field.m
        rho_r, m_r = _split(_reference_arrays(data, n, limit, target), d)
        if far.rho_inf > 0:
            e_n = relative_energy_fields(rho_n, m_n, far.rho_inf, far.m_inf, g)
            e_r = relative_energy_fields(rho_r, m_r, far.rho_inf, far.m_inf, g)
        else:
            e_n = energy_isentropic_array(rho_n, m_n, g)
            e_r = energy_isentropic_array(rho_r, m_r, g)
        # E(.|far) 의 기울기: drho = -|u|^2/2 + |u_inf|^2/2 + P'(rho) - P'(rho_inf), dm = u - u_inf
        u_r = m_r / rho_r[..., None]
        g_rho = -0.5 * np.sum(u_r * u_r, axis=-1) + 0.5 * float(u_inf @ u_inf) \
            + pressure_potential_derivative(rho_r, g) - dP_inf
        g_m = u_r - u_inf
        linear = g_rho * (rho_n - rho_r) + np.sum(g_m * (m_n - m_r), axis=-1)
        per_level.append(_windowed_cell_integrals(data, n, e_n - e_r - linear, w_t))
    return _combine(W, per_level)


def energy_defect_identity(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    R_v: MatrixMeasureField,
    R_e: ScalarMeasureField,
    far: FarField,
    g: GasParameters,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
    rtol: float = TOLERANCES["tol_identity"],
) -> IdentityReport:
    """gap = sum_c |energy defect - (trace R_v / 2 + R_e)|"""
    energy = energy_defect_measure(sequence, limit, R_v.grid, far, g, window, target)
    predicted = 0.5 * R_v.trace + R_e.weights
    gap = float(np.sum(np.abs(energy - predicted)))
    total = float(np.sum(np.abs(energy)))
    scale = max(total, float(np.sum(np.abs(predicted))))
    floor = ROUNDOFF_FLOOR * max(1.0, scale)
    rel = gap / (total + floor)
    return IdentityReport(gap=gap, relative_gap=rel, defect_total=total, passed=gap <= floor or gap < rtol * total)


@dataclass(eq=False)
class DefectReport:
    R_e: ScalarMeasureField
    R_v: MatrixMeasureField
    D: MatrixMeasureField
    energy_defect: ScalarMeasureField
    psd: PsdReport
    identity: IdentityReport
    level_masses: list

    @property
    def psd_min_eig(self) -> np.ndarray:
        return np.asarray(self.psd.min_eig_cells).reshape(self.R_v.grid.shape)

    @property
    def identity_gap(self) -> float:
        return self.identity.gap


def level_defect_masses(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    g: GasParameters,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> list[float]:
    """외삽 전 레벨별 결함 질량 sum_c ||r_v,n + (gamma-1) r_e,n I||"""
    window = window or Window()
    times = limit.times
    data = _LevelData(sequence, coarse_grid, times, isentropic=True)
    w_t = window.weights(times)
    d = coarse_grid.dim
    out = []
    for n, field in enumerate(data.fields):
        rho_n, m_n = field.rho, field.m
        rho_r, m_r = _split(_reference_arrays(data, n, limit, target), d)
        r_e = pressure_potential(rho_n, g) - pressure_potential(rho_r, g) \
            - pressure_potential_derivative(rho_r, g) * (rho_n - rho_r)
        vac = rho_n <= 1e-12
        du = m_n / np.where(vac, 1.0, rho_n)[..., None] - m_r / rho_r[..., None]
        r_v = np.where(vac[..., None, None], 0.0, rho_n[..., None, None] * du[..., :, None] * du[..., None, :])
        D = _windowed_cell_integrals(data, n, r_v + (g.gamma - 1.0) * r_e[..., None, None] * np.eye(d), w_t)
        out.append(float(np.max(np.abs(np.linalg.eigvalsh(D)), axis=-1).sum()))
    return out


def estimate_defects(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    far: FarField,
    g: GasParameters,
    window: Optional[Window] = None,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> DefectReport:
    R_e = internal_energy_defect(sequence, limit, coarse_grid, g, window, target)
    R_v = viscosity_defect(sequence, limit, coarse_grid, far, window, target)
    D = total_defect(R_v, R_e, g)
    energy = energy_defect_measure(sequence, limit, coarse_grid, far, g, window, target)
    identity = energy_defect_identity(sequence, limit, R_v, R_e, far, g, window, target)
    return DefectReport(
        R_e=R_e, R_v=R_v, D=D,
        energy_defect=ScalarMeasureField.from_values(coarse_grid, energy, label="energy defect"),
        psd=psd_check(R_v),
        identity=identity,
        level_masses=level_defect_masses(sequence, limit, coarse_grid, g, window, target),
    )


def relative_energy_trend(
    sequence: Sequence[SpaceTimeField],
    limit: SpaceTimeField,
    coarse_grid: Grid,
    g: GasParameters,
    target: Optional[Sequence[SpaceTimeField]] = None,
) -> list[float]:
    """레벨별 int_0^T int E(U_n | U) dx dt (등엔트로피 또는 완전계)

    기준은 레벨별 목표장 또는 조밀 극한(세분 격자로 펼침), 시간 적분은 사다리꼴
    """
    times = limit.times
    data = _LevelData(sequence, coarse_grid, times)
    d = coarse_grid.dim
    out = []
    for n, field in enumerate(data.fields):
        ref = _reference_arrays(data, n, limit, target)
        rho_r, m_r = _split(ref, d)
        if field.is_full:
            dens = relative_energy_full_fields(field.rho, field.m, field.S, rho_r, m_r, ref[..., 1 + d], g)
        else:
            dens = relative_energy_fields(field.rho, field.m, rho_r, m_r, g)
        per_time = dens.reshape(len(times), -1).sum(axis=1) * field.grid.cell_volume
        out.append(float(trapezoid(per_time, times)))
    return out

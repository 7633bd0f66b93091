"""
lib/generators.py - 근사해 수열 생성기
- 상수 상태 수열
- 소멸 점성 유한체적 (Rusanov + eps 라플라시안, 등엔트로피)
- 등엔트로피 리만 문제 정확해
- 합성 수열: 두 상태 진동, 집중 범프
- 엔트로피 하한 점검/보정
"""

import logging
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize

from lib.eos import (
    FarField, FullState, GasParameters, IsentropicState,
    pressure_isentropic, relative_energy_fields, sound_speed,
)
from lib.grid import Grid, SpaceTimeField, field_from_arrays, make_bump

logger = logging.getLogger(__name__)

MAX_CFL = 0.45


class PositivityLost(RuntimeError):
    pass


class InitialData(BaseModel):
    """초기 자료 서술자

    constant: 원방 상태
    riemann : x0 기준 좌/우 상태 (1차원)
    smooth  : 원방 상태 + 밀도 범프 rho_inf * (1 + amplitude * phi)
    """
    kind: Literal["constant", "riemann", "smooth"] = "constant"
    left: Optional[IsentropicState] = None
    right: Optional[IsentropicState] = None
    x0: float = 0.0
    amplitude: float = 0.2
    radius: float = 0.25
    center: list[float] = Field(default_factory=lambda: [0.0])


class SequenceSpec(BaseModel):
    """레벨 n: cells = base_cells 2^(n-1), eps_n = eps0 2^-(n-1)"""
    model_config = ConfigDict(frozen=True)

    system: Literal["isentropic", "full"] = "isentropic"
    levels: int = Field(3, ge=1)
    dim: Literal[1, 2] = 1
    base_cells: int = Field(64, ge=2)
    coarse_cells: Optional[int] = None
    extent: list[tuple[float, float]] = Field(default_factory=lambda: [(-1.0, 1.0)])
    boundary_mode: Literal["far_field_padded", "bounded_domain"] = "far_field_padded"
    padding: float = Field(0.0, ge=0.0)
    eps0: float = Field(0.0, ge=0.0)
    eps_min_ratio: float = 0.25
    T: float = Field(0.2, gt=0.0)
    n_times: int = Field(11, ge=2)
    refine_times: bool = True
    cfl: float = Field(MAX_CFL, gt=0.0)
    far: FarField = Field(default_factory=FarField)
    gas: GasParameters = Field(default_factory=GasParameters)
    initial: InitialData = Field(default_factory=InitialData)
    entropy_floor: Optional[float] = None
    s_ref: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if len(self.extent) != self.dim:
            raise ValueError("extent must list one interval per axis")
        if self.far.dim != self.dim:
            raise ValueError("far-field velocity dimension mismatch")
        coarse = self.coarse_cells or self.base_cells
        if self.base_cells % coarse:
            raise ValueError("base_cells must be a multiple of coarse_cells")
        return self

    def cells(self, level: int) -> int:
        return self.base_cells * 2 ** (level - 1)

    def eps(self, level: int) -> float:
        return self.eps0 * 2.0 ** (-(level - 1))

    def grid(self, level: int) -> Grid:
        return Grid(dim=self.dim, cells=self.cells(level), extent=self.extent,
                    boundary_mode=self.boundary_mode, padding=self.padding)

    @property
    def coarse_grid(self) -> Grid:
        return Grid(dim=self.dim, cells=self.coarse_cells or self.base_cells, extent=self.extent,
                    boundary_mode=self.boundary_mode, padding=self.padding)

    def times(self, level: int = 1) -> np.ndarray:
        """출력 시각: refine_times 이면 레벨마다 간격 절반"""
        k = 2 ** (level - 1) if self.refine_times else 1
        return np.linspace(0.0, self.T, (self.n_times - 1) * k + 1)

    def level_meta(self, level: int) -> dict:
        return {"h": self.grid(level).h, "eps": self.eps(level), "cells": self.cells(level)}


# ── 상수 수열 ──

def constant_state_sequence(spec: SequenceSpec) -> list[SpaceTimeField]:
    """모든 레벨이 원방 상태 (rho_inf, m_inf) 와 같음"""
    out = []
    for n in range(1, spec.levels + 1):
        grid = spec.grid(n)
        times = spec.times(1)
        nt = len(times)
        rho = np.full((nt,) + grid.shape, spec.far.rho_inf)
        m = np.broadcast_to(np.asarray(spec.far.m_inf), (nt,) + grid.shape + (grid.dim,)).copy()
        S = rho * spec.s_ref if spec.system == "full" else None
        out.append(field_from_arrays(grid, times, rho, m, S, far=spec.far, level=n, meta=spec.level_meta(n)))
    return out


# ── 초기 자료 ──

def _initial_arrays(spec: SequenceSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    init = spec.initial
    x = grid.mesh()
    rho = np.full(grid.shape, spec.far.rho_inf)
    m = np.broadcast_to(np.asarray(spec.far.m_inf), grid.shape + (grid.dim,)).copy()
    if init.kind == "riemann":
        if init.left is None or init.right is None:
            raise ValueError("riemann initial data needs left and right states")
        left = x[..., 0] < init.x0
        rho = np.where(left, init.left.rho, init.right.rho)
        m = np.zeros(grid.shape + (grid.dim,))
        m[..., 0] = np.where(left, init.left.m[0], init.right.m[0])
    elif init.kind == "smooth":
        bump = make_bump(init.center, init.radius)
        rho = spec.far.rho_inf * (1.0 + init.amplitude * bump.phi(x))
    return rho, m


# ── 소멸 점성 유한체적 ──

def _flux(U: np.ndarray, axis: int, g: GasParameters) -> np.ndarray:
    rho, m = U[0], U[1:]
    u = m[axis] / rho
    F = np.empty_like(U)
    F[0] = m[axis]
    F[1:] = m * u
    F[1 + axis] += pressure_isentropic(rho, g)
    return F


def _max_speed(U: np.ndarray, axis: int, g: GasParameters) -> np.ndarray:
    return np.abs(U[1 + axis] / U[0]) + sound_speed(U[0], g)


def _slice(ndim: int, axis: int, sl: slice) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def _pad(U: np.ndarray, axis: int, ghosts: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """고정 유령 셀 (초기 경계값 = 원방값) 한 겹"""
    lo, hi = ghosts
    return np.concatenate([lo, U, hi], axis=axis + 1)


def _rusanov_step(U: np.ndarray, dt: float, h: float, eps: float, ghosts: list, g: GasParameters) -> np.ndarray:
    dim = U.ndim - 1
    dU = np.zeros_like(U)
    for axis in range(dim):
        Up = _pad(U, axis, ghosts[axis])
        n = Up.shape[axis + 1]
        UL = Up[_slice(U.ndim, axis + 1, slice(0, n - 1))]
        UR = Up[_slice(U.ndim, axis + 1, slice(1, n))]
        alpha = np.maximum(_max_speed(UL, axis, g), _max_speed(UR, axis, g))
        Fh = 0.5 * (_flux(UL, axis, g) + _flux(UR, axis, g)) - 0.5 * alpha * (UR - UL)
        m = Fh.shape[axis + 1]
        dU -= (Fh[_slice(U.ndim, axis + 1, slice(1, m))] - Fh[_slice(U.ndim, axis + 1, slice(0, m - 1))]) / h
        if eps > 0:
            lap = (Up[_slice(U.ndim, axis + 1, slice(2, n))] - 2 * U
                   + Up[_slice(U.ndim, axis + 1, slice(0, n - 2))])
            dU += eps * lap / h ** 2
    return U + dt * dU


def vanishing_viscosity_solve(spec: SequenceSpec, level: int, dt_factor: float = 1.0) -> SpaceTimeField:
    """등엔트로피 Euler + eps_n 라플라시안, 명시적 1차 시간적분

    dt = cfl / (d smax/h + 2 d eps/h^2) * dt_factor, 출력 시각은 정확히 맞춤
    """
    if spec.system != "isentropic":
        raise ValueError("vanishing viscosity solver covers the isentropic system only")
    if spec.cfl > MAX_CFL:
        raise ValueError(f"CFL number {spec.cfl} exceeds {MAX_CFL}")
    g = spec.gas
    grid = spec.grid(level)
    h, eps, dim = grid.h, spec.eps(level), grid.dim
    warnings = []
    if 0 < eps < spec.eps_min_ratio * h:
        warnings.append(f"level {level}: eps={eps:.3e} under-resolved (h={h:.3e})")
        logger.warning("%s", warnings[-1])

    rho0, m0 = _initial_arrays(spec, grid)
    U = np.concatenate([rho0[None], np.moveaxis(m0, -1, 0)], axis=0)
    ghosts = []
    for axis in range(dim):
        n = U.shape[axis + 1]
        ghosts.append((U[_slice(U.ndim, axis + 1, slice(0, 1))].copy(),
                       U[_slice(U.ndim, axis + 1, slice(n - 1, n))].copy()))

    times = spec.times(level)
    rhos, ms = [U[0].copy()], [np.moveaxis(U[1:], 0, -1).copy()]
    t, k_out, steps = 0.0, 1, 0
    dt_min, dt_max, rho_min = np.inf, 0.0, float(U[0].min())

    while k_out < len(times):
        smax = max(float(np.max(_max_speed(U, a, g))) for a in range(dim))
        dt = spec.cfl / (dim * smax / h + 2 * dim * eps / h ** 2) * dt_factor
        target = times[k_out]
        dt = min(dt, target - t)
        U = _rusanov_step(U, dt, h, eps, ghosts, g)
        t += dt
        steps += 1
        dt_min, dt_max = min(dt_min, dt), max(dt_max, dt)
        r_min = float(U[0].min())
        rho_min = min(rho_min, r_min)
        if not np.isfinite(r_min) or r_min <= 0:
            raise PositivityLost("positivity lost; reduce CFL or raise ε")
        if t >= target - 1e-12 * spec.T:
            t = float(target)
            rhos.append(U[0].copy())
            ms.append(np.moveaxis(U[1:], 0, -1).copy())
            k_out += 1

    rho, m = np.stack(rhos), np.stack(ms)
    field = field_from_arrays(grid, times, rho, m, far=spec.far, level=level, meta=spec.level_meta(level))
    energy = [
        float(np.sum(relative_energy_fields(rho[k], m[k], spec.far.rho_inf, spec.far.m_inf, g)) * grid.cell_volume)
        for k in range(len(times))
    ] if spec.far.rho_inf > 0 else []
    field.run_log = {
        "steps": steps,
        "dt_min": dt_min,
        "dt_max": dt_max,
        "min_density": rho_min,
        "energy_history": energy,
        "warnings": warnings,
    }
    logger.info("level %d: %d cells, eps=%.3e, %d steps, min rho=%.4e", level, grid.cells, eps, steps, rho_min)
    return field


def viscous_sequence(spec: SequenceSpec) -> list[SpaceTimeField]:
    return [vanishing_viscosity_solve(spec, n) for n in range(1, spec.levels + 1)]


# ── 리만 문제 정확해 ──

class RiemannData(BaseModel):
    left: IsentropicState
    right: IsentropicState
    x0: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if self.left.rho <= 0 or self.right.rho <= 0:
            raise ValueError("Riemann states must have positive density")
        return self


class Wave(BaseModel):
    family: Literal[1, 2]
    kind: Literal["shock", "rarefaction"]
    speeds: tuple[float, float]
    left: IsentropicState
    right: IsentropicState


class RiemannSolution(BaseModel):
    data: RiemannData
    rho_star: float
    u_star: float
    waves: list[Wave]


def _wave_function(rho: float, state_rho: float, g: GasParameters) -> float:
    """u 변화량 f_K(rho): 충격파(RH) 또는 희박파(리만 불변량)"""
    if rho > state_rho:
        dp = pressure_isentropic(rho, g) - pressure_isentropic(state_rho, g)
        return float(np.sqrt(dp * (rho - state_rho) / (rho * state_rho)))
    return 2.0 / (g.gamma - 1.0) * (sound_speed(rho, g) - sound_speed(state_rho, g))


def _rho_from_c(c, g: GasParameters):
    return np.power(np.maximum(c, 0.0) ** 2 / (g.a * g.gamma), 1.0 / (g.gamma - 1.0))


def solve_riemann_isentropic(data: RiemannData, g: GasParameters) -> RiemannSolution:
    """중간 상태: f_L(rho) + f_R(rho) + u_R - u_L = 0 을 이분법으로 (상대오차 1e-12 이하)"""
    if not 1.0 < g.gamma <= 3.0:
        raise ValueError("gamma must lie in (1, 3]")
    rl, rr = data.left.rho, data.right.rho
    ul, ur = data.left.m[0] / rl, data.right.m[0] / rr

    G = lambda r: _wave_function(r, rl, g) + _wave_function(r, rr, g) + ur - ul
    if G(0.0) >= 0:
        raise ValueError("vacuum Riemann problem out of scope")
    hi = max(rl, rr)
    while G(hi) < 0:
        hi *= 2.0
    rho_star = optimize.bisect(G, 0.0, hi, xtol=1e-15 * hi, rtol=1e-14, maxiter=500)
    if rho_star <= 1e-8 * min(rl, rr):
        raise ValueError("vacuum Riemann problem out of scope")
    # 세기 0인 파동은 정확히 소멸시킴
    for side in (rl, rr):
        if abs(rho_star - side) <= 1e-12 * side:
            rho_star = side
    u_star = 0.5 * (ul - _wave_function(rho_star, rl, g) + ur + _wave_function(rho_star, rr, g))
    star = IsentropicState(rho=rho_star, m=[rho_star * u_star])

    waves = []
    cl, cr, cs = sound_speed(rl, g), sound_speed(rr, g), sound_speed(rho_star, g)
    if rho_star > rl:
        s = (rho_star * u_star - rl * ul) / (rho_star - rl)
        waves.append(Wave(family=1, kind="shock", speeds=(s, s), left=data.left, right=star))
    else:
        waves.append(Wave(family=1, kind="rarefaction", speeds=(ul - cl, u_star - cs), left=data.left, right=star))
    if rho_star > rr:
        s = (rr * ur - rho_star * u_star) / (rr - rho_star)
        waves.append(Wave(family=2, kind="shock", speeds=(s, s), left=star, right=data.right))
    else:
        waves.append(Wave(family=2, kind="rarefaction", speeds=(u_star + cs, ur + cr), left=star, right=data.right))
    return RiemannSolution(data=data, rho_star=rho_star, u_star=u_star, waves=waves)


def sample_riemann(sol: RiemannSolution, xi: np.ndarray, g: GasParameters) -> tuple[np.ndarray, np.ndarray]:
    """자기상사 변수 xi = (x - x0)/t 에서 (rho, u)"""
    xi = np.asarray(xi, dtype=float)
    L, R = sol.data.left, sol.data.right
    ul, ur = L.m[0] / L.rho, R.m[0] / R.rho
    w1, w2 = sol.waves
    rho = np.full(xi.shape, sol.rho_star)
    u = np.full(xi.shape, sol.u_star)

    left_of_1 = xi < w1.speeds[0]
    rho[left_of_1], u[left_of_1] = L.rho, ul
    if w1.kind == "rarefaction":
        fan = (xi >= w1.speeds[0]) & (xi < w1.speeds[1])
        wl = ul + 2.0 * sound_speed(L.rho, g) / (g.gamma - 1.0)
        c = (wl - xi[fan]) * (g.gamma - 1.0) / (g.gamma + 1.0)
        rho[fan], u[fan] = _rho_from_c(c, g), xi[fan] + c

    right_of_2 = xi >= w2.speeds[1]
    rho[right_of_2], u[right_of_2] = R.rho, ur
    if w2.kind == "rarefaction":
        fan = (xi >= w2.speeds[0]) & (xi < w2.speeds[1])
        wr = ur - 2.0 * sound_speed(R.rho, g) / (g.gamma - 1.0)
        c = (xi[fan] - wr) * (g.gamma - 1.0) / (g.gamma + 1.0)
        rho[fan], u[fan] = _rho_from_c(c, g), xi[fan] - c
    return rho, u


def riemann_exact_isentropic(
    data: RiemannData,
    g: GasParameters,
    grid: Grid,
    times,
    far: Optional[FarField] = None,
    level: int = 1,
    subsamples: int = 16,
) -> SpaceTimeField:
    """정확해의 셀 평균 (셀당 subsamples 개 중점 평균), 1차원"""
    if grid.dim != 1:
        raise ValueError("exact Riemann sampling is one-dimensional")
    sol = solve_riemann_isentropic(data, g)
    lo = grid.extent[0][0]
    offsets = (np.arange(subsamples) + 0.5) / subsamples
    x = lo + (np.arange(grid.cells)[:, None] + offsets[None, :]) * grid.h

    rhos, ms = [], []
    for t in np.asarray(times, dtype=float):
        if t == 0:
            left = x < data.x0
            r = np.where(left, data.left.rho, data.right.rho)
            u = np.where(left, data.left.m[0] / data.left.rho, data.right.m[0] / data.right.rho)
        else:
            r, u = sample_riemann(sol, (x - data.x0) / t, g)
        rhos.append(r.mean(axis=1))
        ms.append((r * u).mean(axis=1)[:, None])
    field = field_from_arrays(grid, times, np.stack(rhos), np.stack(ms), far=far, level=level,
                              meta={"h": grid.h, "eps": 0.0, "cells": grid.cells, "exact": True})
    field.run_log = {"rho_star": sol.rho_star, "u_star": sol.u_star,
                     "waves": [w.model_dump() for w in sol.waves]}
    return field


def shock_partner(base: IsentropicState, rho_other: float, g: GasParameters, family: Literal[1, 2] = 1) -> IsentropicState:
    """base 와 Lax 허용 충격파로 연결된 상태

    family 1: base 가 왼쪽, 반환은 오른쪽 (rho_other > base.rho)
    family 2: base 가 오른쪽, 반환은 왼쪽 (rho_other > base.rho)
    """
    if rho_other <= base.rho:
        raise ValueError("shock partner must be denser than the base state (Lax condition)")
    u = base.m[0] / base.rho
    jump = _wave_function(rho_other, base.rho, g)
    u_other = u - jump if family == 1 else u + jump
    return IsentropicState(rho=rho_other, m=[rho_other * u_other])


def rankine_hugoniot_residual(wave: Wave, g: GasParameters) -> tuple[float, float]:
    """(s[rho] - [m], s[m] - [m^2/rho + p])"""
    s = wave.speeds[0]
    L, R = wave.left, wave.right
    flux = lambda st: st.m[0] ** 2 / st.rho + pressure_isentropic(st.rho, g)
    return (s * (R.rho - L.rho) - (R.m[0] - L.m[0]),
            s * (R.m[0] - L.m[0]) - (flux(R) - flux(L)))


def lax_admissible(wave: Wave, g: GasParameters) -> bool:
    """1-충격파: u_L - c_L > s > u_R - c_R, 2-충격파: u_L + c_L > s > u_R + c_R"""
    s = wave.speeds[0]
    L, R = wave.left, wave.right
    sign = -1.0 if wave.family == 1 else 1.0
    lam = lambda st: st.m[0] / st.rho + sign * sound_speed(st.rho, g)
    return lam(L) > s > lam(R)


# ── 합성 수열 ──

def _as_full(state, s_ref: float) -> FullState:
    if isinstance(state, FullState):
        return state
    return FullState(rho=state.rho, m=state.m, S=state.rho * s_ref)


def oscillatory_two_state(
    spec: SequenceSpec,
    A,
    B,
    lam: float,
    pattern_cells: int = 8,
    region: Optional[list[tuple[float, float]]] = None,
) -> list[SpaceTimeField]:
    """레벨 n: 축 0 방향 줄무늬, 주기 pattern_cells 개 세분 셀 (주기 ~ 2^-n)

    각 주기의 앞 lam*pattern_cells 셀은 A, 나머지는 B. region 밖은 B.
    다차원에서도 축 0 방향으로만 줄무늬가 생기고 나머지 축은 균일 (체커보드 아님).
    시간에 대해 상수
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("volume fraction must lie in (0, 1]")
    n_a = lam * pattern_cells
    if abs(n_a - round(n_a)) > 1e-9:
        raise ValueError("lam * pattern_cells must be an integer")
    n_a = int(round(n_a))
    full = spec.system == "full"
    if full:
        A, B = _as_full(A, spec.s_ref), _as_full(B, spec.s_ref)

    out = []
    for n in range(1, spec.levels + 1):
        grid = spec.grid(n)
        x = grid.mesh()
        idx = np.indices(grid.shape)[0]
        mask = (idx % pattern_cells) < n_a
        if region is not None:
            inside = np.ones(grid.shape, dtype=bool)
            for axis, (lo, hi) in enumerate(region):
                inside &= (x[..., axis] > lo) & (x[..., axis] < hi)
            mask &= inside
        rho = np.where(mask, A.rho, B.rho)
        m = np.where(mask[..., None], np.asarray(A.m), np.asarray(B.m))
        S = np.where(mask, A.S, B.S) if full else None
        times = spec.times(1)
        nt = len(times)
        tile = lambda a: np.broadcast_to(a, (nt,) + a.shape).copy()
        field = field_from_arrays(grid, times, tile(rho), tile(m), None if S is None else tile(S),
                                  far=spec.far, level=n, meta=spec.level_meta(n))
        out.append(field)
    return out


def concentration_bump(
    spec: SequenceSpec,
    amplitude: float = 1.0,
    radius: Optional[float] = None,
    x0: Optional[list[float]] = None,
) -> list[SpaceTimeField]:
    """rho_n = rho_inf, m_n = m_inf + k^(d/2) amplitude chi(k (x - x0)/r1) e_1, k = 2^(n-1)

    x0 는 level-1 격자 면 위에 놓아야 레벨 간 이산 운동에너지가 정확히 같음
    """
    coarse = spec.coarse_grid
    h1 = spec.grid(1).h
    if radius is None:
        radius = 0.5 * coarse.h
    if x0 is None:
        # 원점에 가장 가까운 조밀 셀 중심
        centers = [coarse.centers_1d(i) for i in range(spec.dim)]
        mid = 0.5 * (coarse.lo + coarse.hi)
        x0 = [float(c[np.argmin(np.abs(c - mid[i]))]) for i, c in enumerate(centers)]
    x0 = np.asarray(x0, dtype=float)
    lo = spec.grid(1).lo
    face = (x0 - lo) / h1
    if np.any(np.abs(face - np.round(face)) > 1e-9):
        logger.warning("bump center %s is not on a level-1 cell face; discrete energy drifts", x0.tolist())
    if np.any(x0 - radius < spec.grid(1).inner_lo) or np.any(x0 + radius > spec.grid(1).inner_hi):
        raise ValueError("bump support leaves inner box at level 1")

    full = spec.system == "full"
    out = []
    for n in range(1, spec.levels + 1):
        grid = spec.grid(n)
        k = 2.0 ** (n - 1)
        z = (grid.mesh() - x0) * k / radius
        chi = np.prod(np.where(np.abs(z) < 1, (1 - z * z) ** 2, 0.0), axis=-1)
        rho = np.full(grid.shape, spec.far.rho_inf)
        m = np.broadcast_to(np.asarray(spec.far.m_inf), grid.shape + (grid.dim,)).copy()
        m[..., 0] += k ** (spec.dim / 2.0) * amplitude * chi
        S = rho * spec.s_ref if full else None
        times = spec.times(1)
        nt = len(times)
        tile = lambda a: np.broadcast_to(a, (nt,) + a.shape).copy()
        field = field_from_arrays(grid, times, tile(rho), tile(m), None if S is None else tile(S),
                                  far=spec.far, level=n,
                                  meta={**spec.level_meta(n), "x0": x0.tolist(), "radius": radius})
        out.append(field)
    return out


def concentration_kinetic_energy(amplitude: float, radius: float, dim: int, rho_inf: float) -> float:
    """||chi||^2 / (2 rho_inf), chi = amplitude * prod b(x_i / r1)

    int_{-1}^{1} (1 - z^2)^4 dz = 256/315
    """
    return amplitude ** 2 * (256.0 / 315.0 * radius) ** dim / (2.0 * rho_inf)


# ── 엔트로피 하한 ──

class EntropyFloorReport(BaseModel):
    applicable: bool = True
    note: str = ""
    violations: int = 0
    min_margin: Optional[float] = None
    correction_mass: float = 0.0
    correction_history: list[float] = Field(default_factory=list)


def entropy_floor_enforce(field: SpaceTimeField, s_lower: float, clip: bool = False) -> tuple[SpaceTimeField, EntropyFloorReport]:
    """S >= rho s_lower 셀 단위 점검, clip 이면 하한으로 올리고 보정 질량 기록"""
    if not field.is_full:
        return field, EntropyFloorReport(applicable=False, note="not applicable")
    rho, S = field.rho, field.S
    floor = rho * s_lower
    margin = S - floor
    bad = margin < -1e-12 * np.maximum(1.0, np.abs(floor))
    report = EntropyFloorReport(violations=int(np.count_nonzero(bad)), min_margin=float(margin.min()))
    if report.violations:
        logger.warning("level %d: %d cells below entropy floor (min margin %.3e)",
                       field.level, report.violations, report.min_margin)
    if clip and report.violations:
        fixed = np.where(bad, floor, S)
        spatial = tuple(range(1, S.ndim))
        history = (fixed - S).sum(axis=spatial) * field.grid.cell_volume
        report.correction_history = [float(v) for v in history]
        report.correction_mass = float(history.sum())
        logger.info("entropy floor clip: correction mass %.3e over %d samples", report.correction_mass, len(history))
        field = field_from_arrays(field.grid, field.times, rho, field.m, fixed, far=field.far,
                                  level=field.level, meta=field.meta)
    return field, report

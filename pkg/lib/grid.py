"""
lib/grid.py - 이산화 기반
균등 격자, 시공간 장, 구적, 해석적 시험함수(4차 범프), 컷오프 족,
장 CSV 직렬화

시간 적분: 스냅샷 사이를 선형 보간한 자료와 해석적 psi, psi' 의 곱을
정확히 적분 (구간별 hat 함수 가중치)
"""

import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from lib.eos import FarField

logger = logging.getLogger(__name__)

FIELD_FORMAT_TAG = "# eulerdefect field v1"


class Grid(BaseModel):
    """균등 직교 격자 (축마다 같은 셀 수와 같은 셀 폭)"""
    model_config = ConfigDict(frozen=True)

    dim: Literal[1, 2] = 1
    cells: int = Field(..., ge=2)
    extent: list[tuple[float, float]]
    boundary_mode: Literal["far_field_padded", "bounded_domain"] = "far_field_padded"
    padding: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_extent(self):
        if len(self.extent) != self.dim:
            raise ValueError("extent must list one interval per axis")
        widths = [hi - lo for lo, hi in self.extent]
        if any(w <= 0 for w in widths):
            raise ValueError("empty extent")
        if any(abs(w - widths[0]) > 1e-12 * widths[0] for w in widths):
            raise ValueError("cell width must be identical per axis")
        if 2 * self.padding >= widths[0]:
            raise ValueError("padding leaves no inner box")
        return self

    @property
    def h(self) -> float:
        lo, hi = self.extent[0]
        return (hi - lo) / self.cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def lo(self) -> np.ndarray:
        return np.array([e[0] for e in self.extent])

    @property
    def hi(self) -> np.ndarray:
        return np.array([e[1] for e in self.extent])

    @property
    def inner_lo(self) -> np.ndarray:
        return self.lo + self.padding

    @property
    def inner_hi(self) -> np.ndarray:
        return self.hi - self.padding

    def centers_1d(self, axis: int = 0) -> np.ndarray:
        lo = self.extent[axis][0]
        return lo + (np.arange(self.cells) + 0.5) * self.h

    def mesh(self) -> np.ndarray:
        """셀 중심 좌표, shape (*shape, dim)"""
        axes = [self.centers_1d(i) for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def refine(self, factor: int) -> "Grid":
        return self.model_copy(update={"cells": self.cells * factor})

    def refinement_factor(self, fine: "Grid") -> int:
        """fine 이 self 를 정수배로 세분하는지 확인"""
        if fine.dim != self.dim or fine.extent != self.extent or fine.cells % self.cells:
            raise ValueError("fine grid does not refine coarse grid")
        return fine.cells // self.cells

    def dist_to_boundary(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.min(np.minimum(x - self.lo, self.hi - x), axis=-1)

    def interior(self, margin: float, x: Optional[np.ndarray] = None) -> np.ndarray:
        """경계에서 margin 보다 먼 점 (기본은 셀 중심) 의 bool 마스크"""
        return self.dist_to_boundary(self.mesh() if x is None else x) > margin

    def cell_average_to(self, coarse: "Grid", arr: np.ndarray, lead: int = 0) -> np.ndarray:
        """self 위 배열을 coarse 셀 평균으로 내림, lead 는 앞쪽 비공간 축 수"""
        return restrict(arr, coarse.refinement_factor(self), self.dim, lead=lead)


def restrict(arr: np.ndarray, factor: int, dim: int, lead: int = 0) -> np.ndarray:
    """세분 격자 배열을 factor^dim 블록 평균으로 조밀 격자에 내림

    lead: 앞쪽 비공간 축 수 (예: 시간축)
    """
    if factor == 1:
        return np.array(arr, dtype=float)
    arr = np.asarray(arr, dtype=float)
    shape = arr.shape
    new_shape = list(shape[:lead])
    for i in range(dim):
        new_shape += [shape[lead + i] // factor, factor]
    new_shape += list(shape[lead + dim:])
    blocks = arr.reshape(new_shape)
    return blocks.mean(axis=tuple(lead + 2 * i + 1 for i in range(dim)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Snapshot:
    """한 시각의 셀 평균 (rho, m[, S])"""
    grid: Grid
    rho: np.ndarray
    m: np.ndarray
    S: Optional[np.ndarray] = None

    def __post_init__(self):
        rho = _readonly(self.rho)
        m = _readonly(self.m)
        if rho.shape != self.grid.shape:
            raise ValueError(f"rho shape {rho.shape} != grid shape {self.grid.shape}")
        if m.shape != self.grid.shape + (self.grid.dim,):
            raise ValueError(f"m shape {m.shape} != {self.grid.shape + (self.grid.dim,)}")
        if np.any(np.isnan(rho)) or np.any(np.isnan(m)):
            raise ValueError("invalid state")
        if np.any(rho < 0):
            raise ValueError("negative density")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "m", m)
        if self.S is not None:
            S = _readonly(self.S)
            if S.shape != self.grid.shape:
                raise ValueError("S shape mismatch")
            object.__setattr__(self, "S", S)

    @property
    def is_full(self) -> bool:
        return self.S is not None


@dataclass(eq=False)
class SpaceTimeField:
    """근사해 수열의 한 멤버: 시각별 스냅샷과 원방 상태, 레벨"""
    times: np.ndarray
    snapshots: list
    far: Optional[FarField] = None
    level: int = 1
    meta: dict = dc_field(default_factory=dict)
    run_log: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = _readonly(self.times)
        if len(self.times) != len(self.snapshots) or len(self.times) == 0:
            raise ValueError("one snapshot per time required")
        if self.times[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        grid = self.snapshots[0].grid
        if any(s.grid != grid for s in self.snapshots):
            raise ValueError("all snapshots must share one grid")
        full = self.snapshots[0].is_full
        if any(s.is_full != full for s in self.snapshots):
            raise ValueError("mixed isentropic/full snapshots")

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def is_full(self) -> bool:
        return self.snapshots[0].is_full

    @property
    def rho(self) -> np.ndarray:
        return np.stack([s.rho for s in self.snapshots])

    @property
    def m(self) -> np.ndarray:
        return np.stack([s.m for s in self.snapshots])

    @property
    def S(self) -> Optional[np.ndarray]:
        if not self.is_full:
            return None
        return np.stack([s.S for s in self.snapshots])


def field_from_arrays(grid: Grid, times, rho, m, S=None, far=None, level=1, meta=None) -> SpaceTimeField:
    """시간축이 맨 앞인 배열 묶음으로 SpaceTimeField 생성"""
    snaps = [
        Snapshot(grid=grid, rho=rho[k], m=m[k], S=None if S is None else S[k])
        for k in range(len(times))
    ]
    return SpaceTimeField(times=np.asarray(times, dtype=float), snapshots=snaps, far=far,
                          level=level, meta=dict(meta or {}))


# ── 시험함수 ──

def _b(z):
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) < 1, (1 - z * z) ** 2, 0.0)


def _db(z):
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) < 1, -4 * z * (1 - z * z), 0.0)


def _B0(z):
    """int_{-1}^{z} b"""
    z = np.clip(z, -1.0, 1.0)
    F = lambda s: s - 2 * s ** 3 / 3 + s ** 5 / 5
    return F(z) - F(-1.0)


def _B1(z):
    """int_{-1}^{z} s b(s) ds"""
    z = np.clip(z, -1.0, 1.0)
    F = lambda s: s ** 2 / 2 - s ** 4 / 2 + s ** 6 / 6
    return F(z) - F(-1.0)


@dataclass(frozen=True)
class TimeBump:
    """psi(t) = (1 - ((t - center)/radius)^2)^2, 지지집합 [center - radius, center + radius]"""
    center: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    def value(self, t):
        return _b((np.asarray(t, dtype=float) - self.center) / self.radius)

    def derivative(self, t):
        return _db((np.asarray(t, dtype=float) - self.center) / self.radius) / self.radius

    def moments(self, a: float, b: float) -> tuple[float, float]:
        """(int_a^b psi, int_a^b t psi)"""
        za, zb = (a - self.center) / self.radius, (b - self.center) / self.radius
        i0 = self.radius * (_B0(zb) - _B0(za))
        i1 = self.center * i0 + self.radius ** 2 * (_B1(zb) - _B1(za))
        return float(i0), float(i1)

    def derivative_moments(self, a: float, b: float) -> tuple[float, float]:
        """(int_a^b psi', int_a^b t psi')"""
        pa, pb = float(self.value(a)), float(self.value(b))
        i0 = pb - pa
        i1 = b * pb - a * pa - self.moments(a, b)[0]
        return i0, i1


def _hat_weights(times: np.ndarray, moments: Callable[[float, float], tuple[float, float]]) -> np.ndarray:
    """w_k = int f(t) l_k(t) dt, l_k 는 구간별 선형 hat 함수"""
    w = np.zeros(len(times))
    for k in range(len(times) - 1):
        a, b = float(times[k]), float(times[k + 1])
        i0, i1 = moments(a, b)
        dt = b - a
        # l_k = (b - t)/dt, l_{k+1} = (t - a)/dt
        w[k] += (b * i0 - i1) / dt
        w[k + 1] += (i1 - a * i0) / dt
    return w


def time_weights(times, time_factor: Optional[TimeBump], derivative: bool = False) -> np.ndarray:
    """선형 보간 자료에 대한 정확한 시간 가중치 (psi 또는 psi')"""
    times = np.asarray(times, dtype=float)
    if len(times) == 1:
        return np.zeros(1)
    if time_factor is None:
        if derivative:
            return np.zeros(len(times))
        dt = np.diff(times)
        w = np.zeros(len(times))
        w[:-1] += dt / 2
        w[1:] += dt / 2
        return w
    if derivative:
        return _hat_weights(times, time_factor.derivative_moments)
    return _hat_weights(times, time_factor.moments)


@dataclass(frozen=True)
class Bump:
    """phi(x) = prod_i b((x_i - c_i)/r_i), C^1, 해석적 기울기"""
    center: tuple
    radius: tuple

    @property
    def dim(self) -> int:
        return len(self.center)

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        return (x - np.asarray(self.center)) / np.asarray(self.radius)

    def value(self, x) -> np.ndarray:
        return np.prod(_b(self._z(x)), axis=-1)

    def gradient(self, x) -> np.ndarray:
        z = self._z(x)
        bz = _b(z)
        dbz = _db(z) / np.asarray(self.radius)
        grads = []
        for i in range(self.dim):
            others = np.prod(np.delete(bz, i, axis=-1), axis=-1) if self.dim > 1 else 1.0
            grads.append(dbz[..., i] * others)
        return np.stack(grads, axis=-1)

    @property
    def c1_norm(self) -> float:
        # sup|b| = 1, sup|b'| = 8/(3 sqrt 3)
        return 1.0 + 8.0 / (3.0 * np.sqrt(3.0)) / min(self.radius)

    def cell_averages(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """셀마다 정확한 평균 (phi, grad phi), shape (*shape), (*shape, d)

        축별 적분의 곱: int b = r [B0]_zl^zr, int d_i b = [b]_zl^zr
        """
        vals, ders = [], []
        for i in range(self.dim):
            r = self.radius[i]
            faces = grid.lo[i] + np.arange(grid.cells + 1) * grid.h
            z = (faces - self.center[i]) / r
            vals.append(r * np.diff(_B0(z)) / grid.h)
            ders.append(np.diff(_b(z)) / grid.h)
        value = _outer(vals)
        gradient = np.stack([_outer([ders[j] if j == i else vals[j] for j in range(self.dim)])
                             for i in range(self.dim)], axis=-1)
        return value, gradient


def _outer(factors: list[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


@dataclass(frozen=True)
class TestFunction:
    """시공간 시험함수 psi(t) phi(x) (스칼라) 또는 psi(t) phi(x) direction (벡터)

    time_factor 가 None 이면 psi = 1 (경계항으로 [0, tau] 처리)
    """
    space: Bump
    time_factor: Optional[TimeBump] = None
    kind: Literal["scalar", "vector"] = "scalar"
    direction: Optional[tuple] = None
    amplitude: float = 1.0

    __test__ = False

    def __post_init__(self):
        if self.kind == "vector":
            if self.direction is None or len(self.direction) != self.space.dim:
                raise ValueError("vector test function needs a direction of length dim")

    @property
    def dim(self) -> int:
        return self.space.dim

    def _lift(self, v: np.ndarray) -> np.ndarray:
        v = self.amplitude * v
        if self.kind == "vector":
            return v[..., None] * np.asarray(self.direction, dtype=float)
        return v

    def _lift_grad(self, gphi: np.ndarray) -> np.ndarray:
        gphi = self.amplitude * gphi
        if self.kind == "vector":
            return np.asarray(self.direction, dtype=float)[:, None] * gphi[..., None, :]
        return gphi

    def _lift_div(self, gphi: np.ndarray) -> np.ndarray:
        if self.kind != "vector":
            raise ValueError("divergence of a scalar test function")
        return self.amplitude * gphi @ np.asarray(self.direction, dtype=float)

    def phi(self, x) -> np.ndarray:
        return self._lift(self.space.value(x))

    def grad(self, x) -> np.ndarray:
        """스칼라: (..., d); 벡터: (..., d, d), [i, j] = d_j phi_i"""
        return self._lift_grad(self.space.gradient(x))

    def div(self, x) -> np.ndarray:
        return self._lift_div(self.space.gradient(x))

    def cell_phi(self, grid: Grid) -> np.ndarray:
        """phi 의 셀 평균 (레이아웃은 phi 와 같음)"""
        return self._lift(self.space.cell_averages(grid)[0])

    def cell_grad(self, grid: Grid) -> np.ndarray:
        return self._lift_grad(self.space.cell_averages(grid)[1])

    def cell_div(self, grid: Grid) -> np.ndarray:
        return self._lift_div(self.space.cell_averages(grid)[1])

    def psi(self, t):
        if self.time_factor is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return self.time_factor.value(t)

    def nonnegative(self) -> bool:
        return self.kind == "scalar" and self.amplitude >= 0

    @property
    def c1_norm(self) -> float:
        return abs(self.amplitude) * self.space.c1_norm

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.space, self.time_factor, self.kind, self.direction, self.amplitude * factor)


@dataclass(frozen=True)
class TestFunctionSum:
    """시험함수의 선형결합 sum_k c_k f_k"""
    terms: tuple

    __test__ = False

    @property
    def kind(self) -> str:
        return self.terms[0][1].kind

    def nonnegative(self) -> bool:
        return all(c >= 0 and f.nonnegative() for c, f in self.terms)


AnyTest = Union[TestFunction, TestFunctionSum]


def make_bump(
    center: Sequence[float],
    radius,
    kind: Literal["scalar", "vector"] = "scalar",
    direction: Optional[Sequence[float]] = None,
    time_factor: Optional[TimeBump] = None,
    grid: Optional[Grid] = None,
    amplitude: float = 1.0,
) -> TestFunction:
    center = tuple(float(c) for c in center)
    radius = tuple(float(r) for r in np.broadcast_to(np.asarray(radius, dtype=float), (len(center),)))
    if any(r <= 0 for r in radius):
        raise ValueError("radius must be positive")
    tf = TestFunction(
        space=Bump(center=center, radius=radius),
        time_factor=time_factor,
        kind=kind,
        direction=None if direction is None else tuple(float(v) for v in direction),
        amplitude=amplitude,
    )
    if grid is not None:
        check_support(tf, grid)
    return tf


def check_support(tf: AnyTest, grid: Grid, tau: Optional[float] = None) -> None:
    """공간 지지집합이 내부 상자 안, 시간 지지집합이 [0, tau] 안인지 확인"""
    if isinstance(tf, TestFunctionSum):
        for _, f in tf.terms:
            check_support(f, grid, tau)
        return
    c = np.asarray(tf.space.center)
    r = np.asarray(tf.space.radius)
    slack = 1e-12 * float(np.max(grid.hi - grid.lo))
    if np.any(c - r < grid.inner_lo - slack) or np.any(c + r > grid.inner_hi + slack):
        raise ValueError("test function not compactly supported in domain")
    if tau is not None and tf.time_factor is not None:
        a, b = tf.time_factor.support
        if a < -1e-12 * tau or b > tau * (1 + 1e-12):
            raise ValueError("test function not compactly supported in domain")


def make_battery(
    grid: Grid,
    count: int,
    seed: int,
    T: Optional[float] = None,
    kind: Literal["scalar", "vector"] = "scalar",
    radius_range: tuple[float, float] = (0.1, 0.3),
) -> list[TestFunction]:
    """결정적 의사난수 범프 묶음 (중심, 반지름, 방향, 시간 인자)

    같은 seed 이면 비트 단위로 동일
    """
    rng = np.random.default_rng(seed)
    L = float(grid.inner_hi[0] - grid.inner_lo[0])
    battery = []
    for _ in range(count):
        radius = rng.uniform(radius_range[0], radius_range[1], grid.dim) * L
        center = rng.uniform(grid.inner_lo + radius, grid.inner_hi - radius)
        direction = None
        if kind == "vector":
            v = rng.normal(size=grid.dim)
            direction = v / np.linalg.norm(v)
        time_factor = None
        if T is not None:
            tc = rng.uniform(0.35, 0.65) * T
            tr = rng.uniform(0.15, 0.3) * T
            time_factor = TimeBump(center=float(tc), radius=float(tr))
        battery.append(make_bump(center, radius, kind=kind, direction=direction,
                                 time_factor=time_factor, grid=grid))
    return battery


# ── 구적 ──

def integrate_space(where: Union[Snapshot, Grid], integrand) -> float:
    """중점 규칙 sum f(x_c) h^d"""
    grid = where.grid if isinstance(where, Snapshot) else where
    f = np.asarray(integrand, dtype=float)
    if np.any(np.isnan(f)):
        raise ValueError("NaN in integrand")
    return float(np.sum(f) * grid.cell_volume)


def weak_pairing(
    field: SpaceTimeField,
    tf: AnyTest,
    density: Optional[Callable[[Snapshot], np.ndarray]] = None,
    flux: Optional[Callable[[Snapshot], np.ndarray]] = None,
    tau: Optional[float] = None,
) -> float:
    """int_0^tau int [q psi' phi + psi F : grad phi] dx dt - [int q psi phi dx]_0^tau

    density(snap): 스칼라 tf 이면 (*shape), 벡터 tf 이면 (*shape, d)
    flux(snap)   : 스칼라 tf 이면 (*shape, d), 벡터 tf 이면 (*shape, d, d)
    공간 적분은 셀 평균 자료와 시험함수의 정확한 셀 적분의 곱
    tau 는 tau 이하의 마지막 샘플 시각으로 맞춤
    """
    if isinstance(tf, TestFunctionSum):
        return float(sum(c * weak_pairing(field, f, density, flux, tau) for c, f in tf.terms))

    grid = field.grid
    tau = field.T if tau is None else float(tau)
    K = int(np.searchsorted(field.times, tau * (1 + 1e-12), side="right"))
    if K == 0:
        raise ValueError("tau precedes the first sample")
    if abs(field.times[K - 1] - tau) > 1e-12 * max(1.0, tau):
        logger.info("tau=%.6g snapped to sample t=%.6g", tau, field.times[K - 1])
    times = field.times[:K]
    check_support(tf, grid, float(times[-1]))

    phi = tf.cell_phi(grid)
    grad = tf.cell_grad(grid)
    vol = grid.cell_volume
    w = time_weights(times, tf.time_factor)
    w_d = time_weights(times, tf.time_factor, derivative=True)

    total = 0.0
    for k in range(K):
        snap = field.snapshots[k]
        q_phi = 0.0
        if density is not None and (w_d[k] != 0 or k in (0, K - 1)):
            q = np.asarray(density(snap), dtype=float)
            q_phi = float(np.sum(q * phi)) * vol
        f_grad = 0.0
        if flux is not None and w[k] != 0:
            F = np.asarray(flux(snap), dtype=float)
            f_grad = float(np.sum(F * grad)) * vol
        total += w_d[k] * q_phi + w[k] * f_grad
        if density is not None:
            psi_k = float(tf.psi(times[k]))
            if k == K - 1:
                total -= psi_k * q_phi
            if k == 0:
                total += psi_k * q_phi
    return float(total)


# ── 컷오프 ──

def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3 - 2 * s)


def _dsmoothstep(s):
    s = np.asarray(s, dtype=float)
    return np.where((s > 0) & (s < 1), 6 * s * (1 - s), 0.0)


@dataclass(frozen=True)
class CutoffFamily:
    """whole_space: |x| <= nL 에서 1, |x| >= 2nL 에서 0
    boundary_layer: dist(x, dOmega) >= 1/n 에서 1, dist <= 1/(2n) 에서 0
    """
    mode: Literal["whole_space", "boundary_layer"]
    n: int
    scale: float = 1.0
    domain: Optional[Grid] = None
    gradient_bound: float = 0.0

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mode == "whole_space":
            r = np.linalg.norm(x, axis=-1)
            R = self.n * self.scale
            return 1.0 - _smoothstep((r - R) / R)
        d = self.domain.dist_to_boundary(x)
        w = 1.0 / (2 * self.n)
        return _smoothstep((d - w) / w)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mode == "whole_space":
            r = np.linalg.norm(x, axis=-1)
            R = self.n * self.scale
            safe = np.where(r > 0, r, 1.0)
            radial = -_dsmoothstep((r - R) / R) / R
            return (radial / safe)[..., None] * x * (r > 0)[..., None]
        grid = self.domain
        lo_gap = x - grid.lo
        hi_gap = grid.hi - x
        gaps = np.minimum(lo_gap, hi_gap)
        axis = np.argmin(gaps, axis=-1)
        sign = np.where(np.take_along_axis(lo_gap <= hi_gap, axis[..., None], axis=-1)[..., 0], 1.0, -1.0)
        d = np.min(gaps, axis=-1)
        w = 1.0 / (2 * self.n)
        mag = _dsmoothstep((d - w) / w) / w
        g = np.zeros_like(x)
        np.put_along_axis(g, axis[..., None], (mag * sign)[..., None], axis=-1)
        return g


def cutoff(mode: Literal["whole_space", "boundary_layer"], n: int, geometry=None, samples: int = 4001) -> CutoffFamily:
    """컷오프 족 생성, 조밀 샘플링으로 sup|grad psi_n| * n (전공간) 또는 / n (경계층) 측정

    geometry: whole_space 이면 길이 단위(float, 기본 1), boundary_layer 이면 Grid (Omega)
    """
    if n < 1:
        raise ValueError("cutoff index must be >= 1")
    if mode == "whole_space":
        scale = 1.0 if geometry is None else float(geometry)
        fam = CutoffFamily(mode=mode, n=n, scale=scale)
        r = np.linspace(0.0, 3.0 * n * scale, samples)
        x = r[:, None]
        g = np.abs(fam.gradient(x)[:, 0])
        bound = float(np.max(g)) * n
    elif mode == "boundary_layer":
        if not isinstance(geometry, Grid):
            raise ValueError("boundary_layer cutoff needs the domain grid")
        fam = CutoffFamily(mode=mode, n=n, domain=geometry)
        lo, hi = geometry.extent[0]
        t = np.linspace(lo, lo + min(2.0 / n, (hi - lo) / 2), samples)
        x = np.tile(0.5 * (geometry.lo + geometry.hi), (samples, 1))
        x[:, 0] = t
        bound = float(np.max(np.linalg.norm(fam.gradient(x), axis=-1))) / n
    else:
        raise ValueError(f"unknown cutoff mode {mode}")
    return CutoffFamily(mode=fam.mode, n=fam.n, scale=fam.scale, domain=fam.domain, gradient_bound=bound)


# ── 시간 재표본 / 역전 ──

def resample_times(field: SpaceTimeField, times) -> SpaceTimeField:
    """스냅샷 선형 보간으로 새 시각에 재표본"""
    times = np.asarray(times, dtype=float)
    if times[0] != 0 or times[-1] > field.T * (1 + 1e-12):
        raise ValueError("resample times outside [0, T]")
    rho, m, S = field.rho, field.m, field.S

    def interp(arr):
        out = np.empty((len(times),) + arr.shape[1:])
        for i, t in enumerate(times):
            k = int(np.clip(np.searchsorted(field.times, t, side="right") - 1, 0, len(field.times) - 1))
            if k == len(field.times) - 1:
                out[i] = arr[k]
                continue
            a, b = field.times[k], field.times[k + 1]
            s = (t - a) / (b - a)
            out[i] = (1 - s) * arr[k] + s * arr[k + 1]
        return out

    return field_from_arrays(field.grid, times, interp(rho), interp(m),
                             None if S is None else interp(S), far=field.far,
                             level=field.level, meta=field.meta)


def time_reversed(field: SpaceTimeField) -> SpaceTimeField:
    """t -> T - t, m -> -m"""
    T = field.T
    times = (T - field.times)[::-1]
    times[0] = 0.0
    S = field.S
    return field_from_arrays(field.grid, times, field.rho[::-1], -field.m[::-1],
                             None if S is None else S[::-1], far=field.far,
                             level=field.level, meta={**field.meta, "reversed": True})


# ── 직렬화 ──

def save_field(field: SpaceTimeField, path: Union[str, Path]) -> Path:
    """docs/formats.md 의 CSV 레이아웃으로 저장 (%.17g, 무손실)"""
    path = Path(path)
    grid = field.grid
    lines = [
        FIELD_FORMAT_TAG,
        f"dim,{grid.dim}",
        f"cells,{grid.cells}",
        "extent," + ",".join(f"{lo!r},{hi!r}" for lo, hi in grid.extent),
        f"boundary_mode,{grid.boundary_mode}",
        f"padding,{grid.padding!r}",
        f"level,{field.level}",
        f"system,{'full' if field.is_full else 'isentropic'}",
        "far,none" if field.far is None else
        "far," + ",".join(repr(float(v)) for v in [field.far.rho_inf, *field.far.u_inf]),
        "times," + ",".join(repr(float(t)) for t in field.times),
        "data",
    ]
    n_cells = grid.cells ** grid.dim
    frames = []
    for k, snap in enumerate(field.snapshots):
        cols = {"k": np.full(n_cells, k), "cell": np.arange(n_cells), "rho": snap.rho.reshape(-1)}
        m = snap.m.reshape(n_cells, grid.dim)
        for i in range(grid.dim):
            cols[f"m_{i + 1}"] = m[:, i]
        if snap.is_full:
            cols["S"] = snap.S.reshape(-1)
        frames.append(pd.DataFrame(cols))
    body = pd.concat(frames, ignore_index=True)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
        body.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")
    return path


def load_field(path: Union[str, Path]) -> SpaceTimeField:
    path = Path(path)
    header = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != FIELD_FORMAT_TAG:
            raise ValueError(f"not a field file: {path}")
        for line in fh:
            line = line.rstrip("\n")
            if line == "data":
                break
            key, _, rest = line.partition(",")
            header[key] = rest.split(",")
        body = pd.read_csv(fh, float_precision="round_trip")
    dim = int(header["dim"][0])
    ext = [float(v) for v in header["extent"]]
    grid = Grid(dim=dim, cells=int(header["cells"][0]),
                extent=[(ext[2 * i], ext[2 * i + 1]) for i in range(dim)],
                boundary_mode=header["boundary_mode"][0], padding=float(header["padding"][0]))
    far = None
    if header["far"][0] != "none":
        vals = [float(v) for v in header["far"]]
        far = FarField(rho_inf=vals[0], u_inf=vals[1:])
    times = np.array([float(v) for v in header["times"]])
    full = header["system"][0] == "full"
    snaps = []
    for k in range(len(times)):
        part = body[body["k"] == k].sort_values("cell")
        rho = part["rho"].to_numpy().reshape(grid.shape)
        m = np.stack([part[f"m_{i + 1}"].to_numpy() for i in range(dim)], axis=-1).reshape(grid.shape + (dim,))
        S = part["S"].to_numpy().reshape(grid.shape) if full else None
        snaps.append(Snapshot(grid=grid, rho=rho, m=m, S=S))
    return SpaceTimeField(times=times, snapshots=snaps, far=far, level=int(header["level"][0]))

"""
lib/liouville.py - div D = 0 점검
발산 쌍대, 컷오프 선형 확장, 경계 흔적 조건, 반례(헤시안 회전장),
극한 운동량-결함 방정식
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from lib.base import ROUNDOFF_FLOOR, TOLERANCES
from lib.defects import (
    MatrixMeasureField, Window, internal_energy_defect, level_weights, psd_check,
    viscosity_defect,
)
from lib.eos import FarField, GasParameters, pressure_isentropic
from lib.grid import (
    Grid, SpaceTimeField, TestFunction, TestFunctionSum, check_support, cutoff, make_battery, make_bump,
    time_weights,
)
from lib.residuals import momentum_residual

logger = logging.getLogger(__name__)

DIV_BATTERY_SIZE = 64


# ── 발산 쌍대 ──

def _central_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """0 확장 중심차분 (f_{i+1} - f_{i-1}) / 2h, 반대칭 연산자"""
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    g = np.pad(f, pad)
    n = f.shape[axis]
    hi = np.take(g, np.arange(2, n + 2), axis=axis)
    lo = np.take(g, np.arange(0, n), axis=axis)
    return (hi - lo) / (2 * h)


def _discrete_gradient(phi: np.ndarray, h: float, dim: int) -> np.ndarray:
    """phi (*shape, d) -> (*shape, d, d), [i, j] = delta_j phi_i"""
    cols = [_central_diff(phi, h, axis=j) for j in range(dim)]
    return np.stack(cols, axis=-1)


def _pair(D: MatrixMeasureField, grad: np.ndarray) -> float:
    return float(np.sum(grad * D.mats))


def div_pairing(
    D: MatrixMeasureField,
    tf,
    gradient: Literal["discrete", "analytic"] = "discrete",
) -> float:
    """sum_c grad phi(x_c) : D_c

    discrete: 셀 중심 표본의 중심차분 기울기, analytic: 해석적 기울기
    """
    if isinstance(tf, TestFunctionSum):
        return float(sum(c * div_pairing(D, f, gradient) for c, f in tf.terms))
    if tf.kind != "vector":
        raise ValueError("div pairing needs a vector test function")
    check_support(tf, D.grid)
    x = D.grid.mesh()
    if gradient == "analytic":
        grad = tf.grad(x)
    else:
        grad = _discrete_gradient(tf.phi(x), D.grid.h, D.grid.dim)
    return _pair(D, grad)


def _atom_probes(D: MatrixMeasureField, count: int = 4) -> list[TestFunction]:
    """질량 큰 셀을 가로지르는 범프 (중심을 반지름 절반만큼 비켜 둠)"""
    grid = D.grid
    norms = D.operator_norms().reshape(-1)
    if not np.any(norms > 0):
        return []
    order = np.argsort(norms)[::-1][:count]
    x = grid.mesh().reshape(-1, grid.dim)
    r = 3.0 * grid.h
    probes = []
    for idx in order:
        if norms[idx] <= 0:
            continue
        for axis in range(grid.dim):
            e = np.zeros(grid.dim)
            e[axis] = 1.0
            center = x[idx] - 0.5 * r * e
            try:
                probes.append(make_bump(center, r, kind="vector", direction=e, grid=grid))
            except ValueError:
                continue
    return probes


def div_battery(D: MatrixMeasureField, seed: int = 0, count: int = DIV_BATTERY_SIZE) -> list[TestFunction]:
    battery = make_battery(D.grid, count, seed, kind="vector")
    return battery + _atom_probes(D)


# ── 선형 확장 ──

class LinearExtensionReport(BaseModel):
    xi: list[float]
    ns: list[int]
    interior: list[float]
    annulus_grad: list[float]
    annulus_cut: list[float]
    totals: list[float]
    discrete_totals: list[float]
    tail_mass: list[float]
    annulus_bounded: bool
    tail_negligible: bool
    value: float


def linear_extension_pairing(
    D: MatrixMeasureField,
    xi,
    mode: Literal["whole_space", "bounded"] = "whole_space",
    ns: Sequence[int] = (1, 2, 4, 8),
    scale: Optional[float] = None,
) -> LinearExtensionReport:
    """psi_n xi (xi . x) 와의 쌍대, 세 항으로 분리

    interior     : psi_n = 1 인 셀의 xi(x)xi : D
    annulus_grad : 0 < psi_n < 1 인 셀의 psi_n xi(x)xi : D
    annulus_cut  : (xi (xi . x)) (x) grad psi_n : D
    """
    grid = D.grid
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (grid.dim,):
        raise ValueError("xi must have length dim")
    center = 0.5 * (grid.lo + grid.hi)
    x = grid.mesh() - center
    if scale is None:
        scale = 0.5 * float(grid.inner_hi[0] - grid.inner_lo[0]) / (2 * max(ns))
    xx = np.einsum("i,j->ij", xi, xi)
    quad = np.einsum("...ij,ij->...", D.mats, xx)
    norms = D.operator_norms()
    total_mass = float(norms.sum())
    phi = (x @ xi)[..., None] * xi

    interior, ann_grad, ann_cut, totals, discrete, tails = [], [], [], [], [], []
    bounded = True
    for n in ns:
        if mode == "whole_space":
            fam = cutoff("whole_space", n, scale)
            psi = fam.value(x)
            dpsi = fam.gradient(x)
            outside = np.linalg.norm(x, axis=-1) > n * scale
            const = 1.0 + 2.0 * fam.gradient_bound * scale
        else:
            fam = cutoff("boundary_layer", n, grid)
            psi = fam.value(x + center)
            dpsi = fam.gradient(x + center)
            outside = grid.dist_to_boundary(x + center) < 1.0 / n
            reach = float(np.max(np.linalg.norm(x, axis=-1)))
            const = 1.0 + fam.gradient_bound * n * reach
        full = psi >= 1.0 - 1e-15
        i_term = float(np.sum(np.where(full, quad, 0.0)))
        g_term = float(np.sum(np.where(full, 0.0, psi * quad)))
        c_term = float(np.sum(phi[..., :, None] * dpsi[..., None, :] * D.mats))
        tail = float(norms[outside].sum())
        interior.append(i_term)
        ann_grad.append(g_term)
        ann_cut.append(c_term)
        totals.append(i_term + g_term + c_term)
        discrete.append(_pair(D, _discrete_gradient(psi[..., None] * phi, grid.h, grid.dim)))
        tails.append(tail)
        if abs(g_term) + abs(c_term) > const * tail * (1 + 1e-9) + ROUNDOFF_FLOOR * max(1.0, total_mass):
            bounded = False

    negligible = tails[-1] <= 1e-3 * max(total_mass, ROUNDOFF_FLOOR)
    if total_mass > 0 and not negligible:
        logger.warning("tail not negligible: mass %.3e outside cutoff plateau (total %.3e)", tails[-1], total_mass)
    return LinearExtensionReport(
        xi=xi.tolist(), ns=list(ns), interior=interior, annulus_grad=ann_grad, annulus_cut=ann_cut,
        totals=totals, discrete_totals=discrete, tail_mass=tails, annulus_bounded=bounded, tail_negligible=negligible,
        value=float(np.sum(quad)),
    )


# ── 경계 흔적 ──

class BoundaryTraceReport(BaseModel):
    deltas: list[float]
    values: list[float]
    slope: Optional[float] = None
    verdict: Literal["trend-pass", "fail"]

    @property
    def passed(self) -> bool:
        return self.verdict == "trend-pass"


def default_deltas(grid: Grid, domain: Grid) -> list[float]:
    """h 2^k (k = 3..0) 중 상자 폭의 1/4 이하, 없으면 [h]"""
    width = float(np.min(domain.hi - domain.lo))
    deltas = [grid.h * 2 ** k for k in range(3, -1, -1) if grid.h * 2 ** k <= 0.25 * width]
    return deltas or [grid.h]


def boundary_trace_check(D: MatrixMeasureField, domain: Grid, deltas: Sequence[float],
                         rtol: float = TOLERANCES["tol_div"]) -> BoundaryTraceReport:
    """delta -> (1/delta) (경계에서 delta 이내 셀의 trace 질량)

    감소해 0(반올림 바닥)에 닿거나, log-log 기울기 >= 0.5 로 엄격 감소하면 trend-pass
    """
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must decrease")
    if min(deltas) < D.grid.h * (1 - 1e-12):
        raise ValueError("unresolvable layer")
    x = D.grid.mesh()
    trace = D.trace
    values = [float(trace[~domain.interior(d, x)].sum()) / d for d in deltas]
    scale = max(float(np.abs(trace).sum()), ROUNDOFF_FLOOR)
    floor = rtol * scale

    slope = None
    if all(v > floor for v in values) and len(values) >= 2:
        slope = float(np.polyfit(np.log(deltas), np.log(values), 1)[0])
    non_increasing = all(b <= a * (1 + 1e-12) + floor for a, b in zip(values, values[1:]))
    if non_increasing and values[-1] <= floor:
        verdict = "trend-pass"
    elif slope is not None and slope >= 0.5 and all(b < a for a, b in zip(values, values[1:])):
        verdict = "trend-pass"
    else:
        verdict = "fail"
    return BoundaryTraceReport(deltas=deltas, values=values, slope=slope, verdict=verdict)


# ── 판정 ──

class LiouvilleVerdict(BaseModel):
    label: Literal["theorem-consistent", "psd_hypothesis_violated", "boundary_hypothesis_violated", "theorem_violation"]
    message: str
    psd: bool
    min_eig: float
    div_free: bool
    sup_div: float
    tol_div: float
    total_variation: float
    linear_extension: list[float] = Field(default_factory=list)
    boundary: Optional[BoundaryTraceReport] = None


_MESSAGES = {
    "theorem-consistent": "theorem-consistent",
    "psd_hypothesis_violated": "PSD hypothesis violated; theorem inapplicable",
    "boundary_hypothesis_violated": "boundary trace hypothesis violated; theorem inapplicable",
    "theorem_violation": "THEOREM VIOLATION; check quadrature",
}


def liouville_verdict(
    D: MatrixMeasureField,
    mode: Literal["whole_space", "bounded"] = "whole_space",
    domain: Optional[Grid] = None,
    deltas: Optional[Sequence[float]] = None,
    seed: int = 0,
    n_xi: int = 8,
    rtol_div: float = TOLERANCES["tol_div"],
) -> LiouvilleVerdict:
    grid = D.grid
    norm = D.total_variation
    psd = psd_check(D, seed=seed)

    battery = div_battery(D, seed=seed)
    pairings = [abs(div_pairing(D, tf)) for tf in battery]
    c1 = max((tf.c1_norm for tf in battery), default=1.0)
    tol_div = rtol_div * max(norm, ROUNDOFF_FLOOR) * c1

    rng = np.random.default_rng(seed)
    xis = list(np.eye(grid.dim))
    for _ in range(n_xi):
        v = rng.normal(size=grid.dim)
        xis.append(v / np.linalg.norm(v))
    ext = [linear_extension_pairing(D, xi, mode="bounded" if mode == "bounded" else "whole_space") for xi in xis]
    ext_totals = [abs(r.discrete_totals[-1]) for r in ext]
    ext_tol = rtol_div * max(norm, ROUNDOFF_FLOOR) * (1.0 + float(np.max(grid.hi - grid.lo)))
    sup_div = max(pairings + [0.0])
    div_free = sup_div <= tol_div and max(ext_totals + [0.0]) <= ext_tol

    boundary = None
    if mode == "bounded":
        domain = domain or grid
        if deltas is None:
            deltas = default_deltas(grid, domain)
        boundary = boundary_trace_check(D, domain, deltas)

    if norm <= ROUNDOFF_FLOOR:
        label = "theorem-consistent"
    elif not psd.passed:
        label = "psd_hypothesis_violated"
    elif not div_free:
        label = "theorem-consistent"
    elif boundary is not None and not boundary.passed:
        label = "boundary_hypothesis_violated"
    else:
        label = "theorem_violation"
        logger.error("PSD, div-free and nonzero D (||D|| = %.3e): check quadrature", norm)

    return LiouvilleVerdict(
        label=label, message=_MESSAGES[label], psd=psd.passed, min_eig=psd.min_eig,
        div_free=div_free, sup_div=sup_div, tol_div=tol_div, total_variation=norm,
        linear_extension=[r.value for r in ext], boundary=boundary,
    )


# ── 반례: 헤시안 회전장 ──

@dataclass(frozen=True)
class PotentialBump:
    """phi(x, y) = A f(zx) f(zy), f(z) = (1 - z^2)^power, C^(power-1)"""
    center: tuple
    radius: float
    power: int = 5
    amplitude: float = 1.0

    def _f(self, z, order: int = 0):
        p = self.power
        inside = np.abs(z) < 1
        w = np.where(inside, 1 - z * z, 0.0)
        if order == 0:
            return np.where(inside, w ** p, 0.0)
        if order == 1:
            return np.where(inside, -2 * p * z * w ** (p - 1), 0.0)
        return np.where(inside, -2 * p * w ** (p - 1) + 4 * p * (p - 1) * z * z * w ** (p - 2), 0.0)

    def _z(self, x):
        return (np.asarray(x, dtype=float) - np.asarray(self.center)) / self.radius

    def value(self, x) -> np.ndarray:
        z = self._z(x)
        return self.amplitude * self._f(z[..., 0]) * self._f(z[..., 1])

    def hessian(self, x) -> np.ndarray:
        z = self._z(x)
        fx, fy = self._f(z[..., 0]), self._f(z[..., 1])
        f1x, f1y = self._f(z[..., 0], 1), self._f(z[..., 1], 1)
        f2x, f2y = self._f(z[..., 0], 2), self._f(z[..., 1], 2)
        r2 = self.radius ** 2
        H = np.empty(z.shape[:-1] + (2, 2))
        H[..., 0, 0] = f2x * fy
        H[..., 1, 1] = fx * f2y
        H[..., 0, 1] = H[..., 1, 0] = f1x * f1y
        return self.amplitude * H / r2


def counterexample_field(
    grid: Grid,
    potential: Optional[PotentialBump] = None,
    discrete: bool = True,
) -> MatrixMeasureField:
    """D = [[phi_yy, -phi_xy], [-phi_xy, phi_xx]] (셀 질량)

    discrete: 중심차분 헤시안이라 이산 발산이 반올림 수준에서 0
    """
    if grid.dim != 2:
        raise ValueError("counterexample field needs d = 2")
    if potential is None:
        center = tuple(float(c) for c in 0.5 * (grid.inner_lo + grid.inner_hi))
        radius = 0.3 * float(grid.inner_hi[0] - grid.inner_lo[0])
        potential = PotentialBump(center=center, radius=radius)
    if potential.power < 5:
        raise ValueError("potential not C4; raise power to at least 5")
    if potential.radius < 8 * grid.h:
        raise ValueError("potential under-resolved; fourth differences blow up")
    c = np.asarray(potential.center)
    if np.any(c - potential.radius < grid.inner_lo) or np.any(c + potential.radius > grid.inner_hi):
        raise ValueError("potential not compactly supported in domain")

    x = grid.mesh()
    vol = grid.cell_volume
    if discrete:
        phi = potential.value(x)
        h = grid.h
        dxx = _central_diff(_central_diff(phi, h, 0), h, 0)
        dyy = _central_diff(_central_diff(phi, h, 1), h, 1)
        dxy = _central_diff(_central_diff(phi, h, 0), h, 1)
    else:
        H = potential.hessian(x)
        dxx, dyy, dxy = H[..., 0, 0], H[..., 1, 1], H[..., 0, 1]
    mats = np.empty(grid.shape + (2, 2))
    mats[..., 0, 0] = dyy
    mats[..., 1, 1] = dxx
    mats[..., 0, 1] = mats[..., 1, 0] = -dxy
    return MatrixMeasureField.from_matrices(grid, mats * vol)


class RefinementStudy(BaseModel):
    cells: list[int]
    h: list[float]
    pairings: list[float]
    slope: Optional[float] = None
    min_eig: list[float]
    total_variation: list[float]


def counterexample_refinement(
    base: Grid,
    levels: int,
    tf: TestFunction,
    potential: Optional[PotentialBump] = None,
) -> RefinementStudy:
    """해석적 표본 반례장 + 해석적 기울기 쌍대의 세분 수렴 (기대 기울기 2)"""
    cells, hs, pairs, eigs, norms = [], [], [], [], []
    for n in range(levels):
        grid = base.refine(2 ** n)
        D = counterexample_field(grid, potential, discrete=False)
        cells.append(grid.cells)
        hs.append(grid.h)
        pairs.append(abs(div_pairing(D, tf, gradient="analytic")))
        eigs.append(float(np.linalg.eigvalsh(D.mats)[..., 0].min()))
        norms.append(D.total_variation)
    slope = None
    if all(p > 0 for p in pairs) and len(pairs) >= 2:
        slope = float(np.polyfit(np.log(hs), np.log(pairs), 1)[0])
    return RefinementStudy(cells=cells, h=hs, pairings=pairs, slope=slope, min_eig=eigs, total_variation=norms)


# ── 극한 운동량-결함 방정식 ──

class MomentumDefectRow(BaseModel):
    limit_residual: float
    sequence_limit: float
    lhs: float
    rhs: float
    gap: float
    defect_scale: float
    flux_scale: float


class MomentumDefectReport(BaseModel):
    rows: list[MomentumDefectRow]
    sup_gap: float
    sup_relative_gap: float
    passed: bool


def _extrapolated_scalar(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)[:, None, None]
    w, _ = level_weights(v)
    return float(np.sum(w[:, 0] * v[:, 0, 0]))


def _window_for(tf: TestFunction, tau: float) -> tuple[Window, float]:
    if tf.time_factor is None:
        return Window(kind="average", t0=0.0, t1=tau), tau
    return Window(kind="psi", center=tf.time_factor.center, radius=tf.time_factor.radius), 1.0


def _flux_scale(field: SpaceTimeField, tf: TestFunction, g: GasParameters, weights: np.ndarray) -> float:
    grad = np.abs(tf.cell_grad(field.grid))
    vol = field.grid.cell_volume
    total = 0.0
    for k, snap in enumerate(field.snapshots):
        if weights[k] == 0:
            continue
        rho = snap.rho
        safe = np.where(rho > 1e-12, rho, 1.0)
        kin = np.abs(snap.m[..., :, None] * snap.m[..., None, :]) / safe[..., None, None]
        p = pressure_isentropic(rho, g)
        F = kin + p[..., None, None] * np.eye(field.grid.dim)
        total += abs(weights[k]) * float(np.sum(F * grad)) * vol
    return total


def momentum_defect_equation_check(
    limit: SpaceTimeField,
    sequence: Sequence[SpaceTimeField],
    battery: Sequence[TestFunction],
    g: GasParameters,
    far: Optional[FarField] = None,
    tau: Optional[float] = None,
    rtol: float = TOLERANCES["tol_s1"],
) -> MomentumDefectReport:
    """R_limit(psi, phi) - lim_n e2_n(psi, phi) = -int psi [grad phi : dR_v + (gamma-1) div phi dR_e]

    결함은 시험함수의 시간 인자 psi 로 가중한 창에서 계산 (같은 psi 는 캐시)
    lim e2_n 은 레벨 비율 검정으로 외삽. 좌우변이 모두 플럭스 규모의 rtol 이하면 통과
    """
    far = far or limit.far or FarField(rho_inf=1.0, u_inf=[0.0] * limit.grid.dim)
    coarse = limit.grid
    tau = limit.T if tau is None else tau
    cache: dict = {}
    rows = []
    for tf in battery:
        window, factor = _window_for(tf, tau)
        key = (window.kind, window.center, window.radius, window.t0, window.t1)
        if key not in cache:
            R_e = internal_energy_defect(sequence, limit, coarse, g, window)
            R_v = viscosity_defect(sequence, limit, coarse, far, window)
            cache[key] = (R_v, R_e)
        R_v, R_e = cache[key]

        grad = tf.cell_grad(coarse)
        div = tf.cell_div(coarse)
        rhs = -factor * (float(np.sum(grad * R_v.mats)) + (g.gamma - 1.0) * float(np.sum(div * R_e.weights)))
        defect_scale = factor * (float(np.sum(np.abs(grad) * np.abs(R_v.mats)))
                                 + (g.gamma - 1.0) * float(np.sum(np.abs(div) * R_e.weights)))

        r_lim = momentum_residual(limit, tf, g, tau)
        e2 = [momentum_residual(f, tf, g, tau) for f in sequence]
        e2_lim = _extrapolated_scalar(e2)
        lhs = r_lim - e2_lim
        w = time_weights(limit.times, tf.time_factor)
        flux_scale = _flux_scale(limit, tf, g, w)
        rows.append(MomentumDefectRow(limit_residual=r_lim, sequence_limit=e2_lim, lhs=lhs, rhs=rhs,
                                      gap=abs(lhs - rhs), defect_scale=defect_scale, flux_scale=flux_scale))

    passed = True
    rel = []
    for row in rows:
        negligible = abs(row.lhs) <= rtol * row.flux_scale and abs(row.rhs) <= rtol * row.flux_scale \
            and row.defect_scale <= rtol * row.flux_scale
        ok = row.gap <= rtol * row.defect_scale + ROUNDOFF_FLOOR * max(1.0, row.flux_scale)
        if not (ok or negligible):
            passed = False
        rel.append(row.gap / max(row.defect_scale, ROUNDOFF_FLOOR))
    return MomentumDefectReport(
        rows=rows,
        sup_gap=max((r.gap for r in rows), default=0.0),
        sup_relative_gap=max(rel, default=0.0),
        passed=passed,
    )

"""
lib/young.py - 경험적 Young 측도와 Jensen 이분법
조밀 셀마다 세분 셀 값(시간 창 포함)을 원자로 모은 확률측도,
Jensen 간격, 날카로운 Jensen 분류(디랙 / 영집합 지지 / 엄격), 엔트로피 선 배제
"""

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import numpy as np
import pandas as pd

from lib.base import TOLERANCES
from lib.eos import INF, ExtendedReal
from lib.grid import Grid, SpaceTimeField

logger = logging.getLogger(__name__)

Classification = Literal["strict", "dirac", "zero_set_supported"]


class DichotomyViolation(RuntimeError):
    """볼록 에너지에서 있을 수 없는 분류 결과"""


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """원자 (K, p) 와 양의 가중치 (K,), 합 1"""
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if atoms.shape[0] != weights.shape[0] or atoms.shape[0] == 0:
            raise ValueError("one weight per atom required")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(np.isnan(atoms)):
            raise ValueError("invalid state")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, point) -> "AtomicMeasure":
        return cls(atoms=np.asarray(point, dtype=float)[None, :], weights=np.ones(1))

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def phase_dim(self) -> int:
        return self.atoms.shape[1]


def merge_atoms(values: np.ndarray, rtol: float = TOLERANCES["tol_merge"]) -> AtomicMeasure:
    """같은 가중치의 표본을 위상 허용오차 안에서 병합 (병합 원자 = 구성원 평균)"""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 0:
        raise ValueError("empty window")
    scale = max(1.0, float(np.max(np.abs(values))))
    quantum = rtol * scale
    keys = np.round(values / quantum).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), values.shape[1]))
    np.add.at(sums, inverse, values)
    atoms = sums / counts[:, None]
    return AtomicMeasure(atoms=atoms, weights=counts / counts.sum())


def barycenter(nu: AtomicMeasure) -> np.ndarray:
    return nu.weights @ nu.atoms


def second_moment(nu: AtomicMeasure) -> float:
    """barycenter 주변 2차 모멘트"""
    d = nu.atoms - barycenter(nu)
    return float(nu.weights @ np.sum(d * d, axis=1))


def jensen_gap(nu: AtomicMeasure, E: Callable[[np.ndarray], ExtendedReal]) -> ExtendedReal:
    """<nu; E> - E(<nu; y>) >= 0, 원자가 정의역 밖이면 +inf"""
    mean = ExtendedReal(0.0)
    for w, a in zip(nu.weights, nu.atoms):
        mean = mean + E(a) * float(w)
    if mean.is_infinite:
        return INF
    at_bary = E(barycenter(nu))
    if at_bary.is_infinite:
        raise ValueError("barycenter outside domain")
    return ExtendedReal.clipped(mean.value - at_bary.value, scale=mean.value)


def sharp_jensen_classify(
    nu: AtomicMeasure,
    E: Callable[[np.ndarray], ExtendedReal],
    tol: float = TOLERANCES["tol_inequality"],
    phase_tol: float = TOLERANCES["tol_dirac"],
) -> Classification:
    """간격 > tol 이면 strict, 2차 모멘트 < phase_tol^2 이면 dirac,
    모든 원자에서 E < tol 이면 zero_set_supported, 그 외는 DichotomyViolation
    """
    gap = jensen_gap(nu, E)
    values = [E(a) for a in nu.atoms]
    scale = max(1.0, max((v.value for v in values if v.is_finite), default=1.0))
    if gap > tol * scale:
        return "strict"
    if second_moment(nu) < phase_tol ** 2:
        return "dirac"
    if all(v < tol for v in values):
        return "zero_set_supported"
    raise DichotomyViolation(
        f"dichotomy violation: gap {gap.value:.3e}, spread {second_moment(nu):.3e}, "
        f"max atom energy {max(v.value for v in values):.3e}"
    )


def entropy_line_check(nu: AtomicMeasure, s_lower: float, rtol: float = 1e-12) -> bool:
    """barycenter 가 S >= rho s_lower 위에 있는지 (원자는 (rho, m, S))"""
    if nu.phase_dim < 3:
        raise ValueError("entropy line needs full-system atoms")
    b = barycenter(nu)
    rho, S = b[0], b[-1]
    slack = rtol * max(1.0, abs(S), abs(rho * s_lower))
    return bool(S >= rho * s_lower - slack)


def resolve_with_entropy_line(
    nu: AtomicMeasure,
    E: Callable[[np.ndarray], ExtendedReal],
    s_lower: float,
    tol: float = TOLERANCES["tol_inequality"],
    phase_tol: float = TOLERANCES["tol_dirac"],
) -> Classification:
    """영집합 지지 + 엔트로피 선 통과 => 디랙

    영집합은 rho = 0, m = 0, S <= 0 이고 선은 S >= 0 을 강제하므로 원자가 모두 0 으로 모임
    """
    label = sharp_jensen_classify(nu, E, tol, phase_tol)
    if label != "zero_set_supported":
        return label
    if not entropy_line_check(nu, s_lower):
        logger.info("zero-set-supported measure below the entropy line; not excluded")
        return label
    spread = second_moment(nu)
    if spread >= phase_tol ** 2:
        logger.warning("entropy line passes but atoms spread %.3e; keeping zero_set_supported", spread)
        return label
    return "dirac"


# ── 경험적 Young 측도 ──

@dataclass(frozen=True, eq=False)
class EmpiricalYoungMeasure:
    """조밀 격자 셀별 AtomicMeasure (C 순서)"""
    grid: Grid
    measures: list
    times: np.ndarray

    def cell(self, index) -> AtomicMeasure:
        flat = int(np.ravel_multi_index(tuple(np.atleast_1d(index)), self.grid.shape))
        return self.measures[flat]

    def barycenters(self) -> np.ndarray:
        p = self.measures[0].phase_dim
        return np.stack([barycenter(nu) for nu in self.measures]).reshape(self.grid.shape + (p,))

    def jensen_gaps(self, E) -> np.ndarray:
        return np.array([jensen_gap(nu, E).value for nu in self.measures]).reshape(self.grid.shape)

    def classify(self, E, tol: float = TOLERANCES["tol_inequality"],
                 phase_tol: float = TOLERANCES["tol_dirac"], s_lower: Optional[float] = None) -> list[str]:
        if s_lower is None:
            return [sharp_jensen_classify(nu, E, tol, phase_tol) for nu in self.measures]
        return [resolve_with_entropy_line(nu, E, s_lower, tol, phase_tol) for nu in self.measures]

    def to_frame(self) -> pd.DataFrame:
        """(cell, atom, y_0..y_p, weight) 표"""
        rows = []
        for c, nu in enumerate(self.measures):
            for k, (a, w) in enumerate(zip(nu.atoms, nu.weights)):
                rows.append({"cell": c, "atom": k, **{f"y_{i}": float(v) for i, v in enumerate(a)}, "weight": float(w)})
        p = self.measures[0].phase_dim if self.measures else 0
        return pd.DataFrame(rows, columns=["cell", "atom", *[f"y_{i}" for i in range(p)], "weight"])


def _window_indices(times: np.ndarray, window: Optional[Sequence[float]]) -> np.ndarray:
    if window is None:
        return np.arange(len(times))
    t0, t1 = window
    tol = 1e-12 * max(1.0, float(times[-1]))
    idx = np.nonzero((times >= t0 - tol) & (times <= t1 + tol))[0]
    if len(idx) == 0:
        raise ValueError("empty window")
    return idx


def empirical_young(
    field: SpaceTimeField,
    coarse_grid: Grid,
    window: Optional[Sequence[float]] = None,
    rtol: float = TOLERANCES["tol_merge"],
) -> EmpiricalYoungMeasure:
    """조밀 셀마다 창 안의 모든 (시각, 세분 셀) 값을 균등 가중 원자로"""
    factor = coarse_grid.refinement_factor(field.grid)
    idx = _window_indices(field.times, window)
    parts = [field.rho[idx][..., None], field.m[idx]]
    if field.is_full:
        parts.append(field.S[idx][..., None])
    U = np.concatenate(parts, axis=-1)          # (nt, *fine, p)
    d = coarse_grid.dim
    p = U.shape[-1]
    nc = coarse_grid.cells

    # (nt, nc, f[, nc, f], p) -> (nc[, nc], nt * f^d, p)
    shape = [len(idx)]
    for _ in range(d):
        shape += [nc, factor]
    blocks = U.reshape(shape + [p])
    coarse_axes = [1 + 2 * i for i in range(d)]
    fine_axes = [0] + [2 + 2 * i for i in range(d)]
    blocks = np.transpose(blocks, coarse_axes + fine_axes + [blocks.ndim - 1])
    blocks = blocks.reshape((nc ** d, -1, p))

    measures = [merge_atoms(b, rtol) for b in blocks]
    merged = sum(b.shape[0] - nu.size for b, nu in zip(blocks, measures))
    logger.info("empirical young: %d cells, %d samples per cell, %d merged", len(measures), blocks.shape[1], merged)
    return EmpiricalYoungMeasure(grid=coarse_grid, measures=measures, times=field.times[idx])


def window_cell_average(field: SpaceTimeField, coarse_grid: Grid, window: Optional[Sequence[float]] = None) -> np.ndarray:
    """창 안 표본 시각의 균등 평균 + 조밀 셀 평균 (barycenter 와 같은 값)"""
    idx = _window_indices(field.times, window)
    parts = [field.rho[idx][..., None], field.m[idx]]
    if field.is_full:
        parts.append(field.S[idx][..., None])
    U = np.concatenate(parts, axis=-1)
    return field.grid.cell_average_to(coarse_grid, U, lead=1).mean(axis=0)

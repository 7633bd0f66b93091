"""
Tests for lib/defects.py - 약극한 외삽, R_e / R_v / D, 양반정치, 에너지-결함 항등식
"""
import numpy as np
import pytest

from lib.eos import FarField, FullState, GasParameters, IsentropicState, pressure_potential
from lib.generators import SequenceSpec, constant_state_sequence, oscillatory_two_state
from lib.grid import Grid
from lib.defects import (
    MatrixMeasureField, ScalarMeasureField, Window, estimate_defects, level_weights, psd_check,
    relative_energy_trend, weak_limit_estimate,
)

GAS = GasParameters(gamma=1.4, a=1.0)


def _spec(**kw):
    base = dict(levels=3, base_cells=32, coarse_cells=4, T=0.1, n_times=3)
    base.update(kw)
    return SequenceSpec(**base)


def _oscillatory(spec):
    rest = lambda r: IsentropicState(rho=r, m=[0.0])  # noqa: E731
    return oscillatory_two_state(spec, rest(2.0), rest(1.0), lam=0.5, pattern_cells=8)


class TestLevelWeights:
    """셀별 외삽 가중치"""

    def test_needs_three_levels(self):
        with pytest.raises(ValueError, match="cannot extrapolate"):
            level_weights(np.zeros((2, 1, 1)))

    def test_geometric_tail_extrapolated(self):
        """0, 1, 1.5 -> q = 1/2 -> 극한 2"""
        values = np.array([0.0, 1.0, 1.5]).reshape(3, 1, 1)
        w, choice = level_weights(values)
        assert choice[0] == 2
        assert w[:, 0] == pytest.approx([0.0, -1.0, 2.0])
        assert w[:, 0].sum() == pytest.approx(1.0)
        assert float(w[:, 0] @ values[:, 0, 0]) == pytest.approx(2.0)

    def test_converged_cell_uses_last_level(self):
        values = np.ones((3, 2, 1))
        w, choice = level_weights(values)
        assert np.all(choice == 0)
        assert np.all(w[-1] == 1.0)

    def test_oscillating_tail_falls_back(self):
        values = np.array([0.0, 1.0, 0.0]).reshape(3, 1, 1)
        w, choice = level_weights(values)
        assert choice[0] == 1
        assert w[:, 0] == pytest.approx([0.0, 0.0, 1.0])


class TestWindow:
    """시간 창 가중치"""

    def test_average_sums_to_one(self):
        assert Window().weights(np.linspace(0.0, 1.0, 5)).sum() == pytest.approx(1.0)

    def test_sub_window(self):
        w = Window(t0=0.5, t1=1.0).weights(np.linspace(0.0, 1.0, 5))
        assert w[:2] == pytest.approx([0.0, 0.0])
        assert w.sum() == pytest.approx(1.0)

    def test_empty_window(self):
        with pytest.raises(ValueError, match="empty window"):
            Window(t0=0.5, t1=0.6).weights([0.0, 1.0])


class TestMeasureContainers:
    """스칼라/행렬 측도"""

    def test_negative_mass_clipped_and_recorded(self):
        grid = Grid(dim=1, cells=2, extent=[(-1.0, 1.0)])
        mu = ScalarMeasureField.from_values(grid, [-1.0, 2.0])
        assert mu.weights.tolist() == [0.0, 2.0]
        assert mu.clip_mass == pytest.approx(1.0)

    def test_matrix_shape_checked(self):
        grid = Grid(dim=2, cells=2, extent=[(-1.0, 1.0)] * 2)
        with pytest.raises(ValueError, match="does not match grid"):
            MatrixMeasureField.from_matrices(grid, np.zeros((2, 2, 1, 1)))

    def test_add_needs_same_grid(self):
        a = MatrixMeasureField.zeros(Grid(dim=1, cells=2, extent=[(-1.0, 1.0)]))
        b = MatrixMeasureField.zeros(Grid(dim=1, cells=4, extent=[(-1.0, 1.0)]))
        with pytest.raises(ValueError, match="grid mismatch"):
            a + b

    def test_psd_check_flags_negative_cells(self):
        grid = Grid(dim=2, cells=2, extent=[(-1.0, 1.0)] * 2)
        mats = np.broadcast_to(np.diag([1.0, -1.0]), (2, 2, 2, 2))
        report = psd_check(MatrixMeasureField.from_matrices(grid, mats))
        assert not report.passed
        assert report.failing_cells == 4
        assert report.min_eig == pytest.approx(-1.0)


class TestWeakLimit:
    """약극한 추정"""

    def test_constant_sequence_is_its_own_limit(self):
        spec = _spec(far=FarField(rho_inf=1.2, u_inf=[0.5]))
        limit = weak_limit_estimate(constant_state_sequence(spec), spec.coarse_grid)
        assert np.allclose(limit.rho, 1.2)
        assert np.allclose(limit.m, 0.6)
        assert limit.meta["extrapolation_counts"]["converged"] == 4

    def test_oscillation_averages(self):
        spec = _spec()
        limit = weak_limit_estimate(_oscillatory(spec), spec.coarse_grid)
        assert limit.rho == pytest.approx(np.full(limit.rho.shape, 1.5), rel=1e-13)

    def test_too_few_levels(self):
        spec = _spec(levels=2)
        with pytest.raises(ValueError, match="cannot extrapolate"):
            weak_limit_estimate(constant_state_sequence(spec), spec.coarse_grid)

    def test_trim_needs_gas(self):
        spec = _spec()
        with pytest.raises(ValueError, match="gas parameters"):
            weak_limit_estimate(constant_state_sequence(spec), spec.coarse_grid, trim=True)


class TestDefects:
    """결함 측도"""

    def test_constant_sequence_has_no_defect(self):
        spec = _spec(far=FarField(rho_inf=1.2, u_inf=[0.5]))
        seq = constant_state_sequence(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        report = estimate_defects(seq, limit, spec.coarse_grid, spec.far, GAS)
        assert report.D.total_variation == pytest.approx(0.0, abs=1e-12)
        assert report.psd.passed
        assert report.identity.passed
        assert report.level_masses == pytest.approx([0.0] * 3, abs=1e-12)

    def test_oscillation_creates_internal_energy_defect(self):
        """R_e(c) = |c| [(P(2) + P(1))/2 - P(3/2)], R_v = 0"""
        spec = _spec()
        seq = _oscillatory(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        report = estimate_defects(seq, limit, spec.coarse_grid, spec.far, GAS)
        gap = 0.5 * (pressure_potential(2.0, GAS) + pressure_potential(1.0, GAS)) - pressure_potential(1.5, GAS)
        expected = spec.coarse_grid.cell_volume * gap
        assert report.R_e.weights == pytest.approx(np.full(4, expected), rel=1e-10)
        assert np.allclose(report.R_v.mats, 0.0, atol=1e-14)
        assert report.D.operator_norms() == pytest.approx(np.full(4, 0.4 * expected), rel=1e-10)

    def test_oscillation_identity_holds(self):
        spec = _spec()
        seq = _oscillatory(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        report = estimate_defects(seq, limit, spec.coarse_grid, spec.far, GAS)
        assert report.identity.passed
        assert report.identity.relative_gap < 1e-8
        assert report.psd.passed

    def test_defect_mass_persists_across_levels(self):
        spec = _spec()
        seq = _oscillatory(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        masses = estimate_defects(seq, limit, spec.coarse_grid, spec.far, GAS).level_masses
        assert masses[0] > 0
        assert masses == pytest.approx([masses[0]] * 3, rel=1e-10)

    def test_full_sequence_rejected(self):
        spec = _spec(system="full")
        seq = constant_state_sequence(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        with pytest.raises(ValueError, match="isentropic sequence"):
            estimate_defects(seq, limit, spec.coarse_grid, spec.far, GAS)


class TestRelativeEnergyTrend:
    """레벨별 상대에너지"""

    def test_constant_sequence_zero(self):
        spec = _spec()
        seq = constant_state_sequence(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        assert relative_energy_trend(seq, limit, spec.coarse_grid, GAS) == pytest.approx([0.0] * 3, abs=1e-14)

    def test_oscillation_does_not_vanish(self):
        spec = _spec()
        seq = _oscillatory(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        trend = relative_energy_trend(seq, limit, spec.coarse_grid, GAS)
        assert trend[-1] > 0
        assert trend == pytest.approx([trend[0]] * 3, rel=1e-10)

    def test_full_constant_sequence_zero(self):
        spec = _spec(system="full")
        seq = constant_state_sequence(spec)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        assert relative_energy_trend(seq, limit, spec.coarse_grid, GAS) == pytest.approx([0.0] * 3, abs=1e-12)

    def test_full_oscillation_does_not_vanish(self):
        spec = _spec(system="full")
        seq = oscillatory_two_state(spec, FullState(rho=2.0, m=[0.0], S=0.0), FullState(rho=1.0, m=[0.0], S=1.0),
                                    lam=0.5, pattern_cells=8)
        limit = weak_limit_estimate(seq, spec.coarse_grid)
        trend = relative_energy_trend(seq, limit, spec.coarse_grid, GAS)
        assert trend[-1] > 1e-3
        assert trend == pytest.approx([trend[0]] * 3, rel=1e-10)

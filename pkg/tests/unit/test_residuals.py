"""
Tests for lib/residuals.py - 약형식 잔차, 에너지 부등식, 안정성, 일관성 배터리
"""
import numpy as np
import pytest

from lib.eos import FarField, GasParameters
from lib.generators import SequenceSpec, constant_state_sequence
from lib.grid import Grid, TimeBump, field_from_arrays, make_battery, make_bump
from lib.residuals import (
    StabilityBudget, consistency_battery, continuity_residual, energy_inequality_isentropic,
    energy_residual_full, entropy_battery, entropy_residual, momentum_residual, renormalization_library,
    stability_check,
)

GAS = GasParameters(gamma=1.4, a=1.0)
PSI = TimeBump(center=0.05, radius=0.04)


def _rest_spec(**kw):
    base = dict(levels=3, base_cells=16, T=0.1, n_times=5, far=FarField(rho_inf=1.3, u_inf=[0.0]))
    base.update(kw)
    return SequenceSpec(**base)


def _symmetric_tests():
    """격자 중심 대칭 범프: 이산 int grad phi = 0"""
    scalar = [make_bump([0.0], 0.5, time_factor=PSI)]
    vector = [make_bump([0.0], 0.5, kind="vector", direction=(1.0,), time_factor=PSI)]
    return scalar, vector


def _ramp_field(rho_end, level=1, cells=16):
    grid = Grid(dim=1, cells=cells, extent=[(-1.0, 1.0)])
    times = np.array([0.0, 0.05, 0.1])
    rho = np.stack([np.full(cells, r) for r in (1.0, 0.5 * (1.0 + rho_end), rho_end)])
    return field_from_arrays(grid, times, rho, np.zeros((3, cells, 1)),
                             far=FarField(rho_inf=1.0, u_inf=[0.0]), level=level)


class TestRenormalization:
    """유계 단조 Z 라이브러리"""

    def test_library_shape(self):
        lib = renormalization_library()
        assert len(lib) == 8
        assert len({Z.name for Z in lib}) == 8

    def test_all_monotone_and_bounded(self):
        s = np.linspace(-10.0, 10.0, 101)
        for Z in renormalization_library():
            assert Z.monotone
            assert np.all(np.abs(Z.value(s)) <= Z.bound + 1e-15)


class TestWeakResiduals:
    """정지 상수 상태의 잔차는 반올림 수준"""

    def test_constant_state_residuals_vanish(self):
        field = constant_state_sequence(_rest_spec(levels=1))[0]
        scalar, vector = _symmetric_tests()
        assert abs(continuity_residual(field, scalar[0])) < 1e-13
        assert abs(momentum_residual(field, vector[0], GAS)) < 1e-13

    def test_kind_mismatch(self):
        field = constant_state_sequence(_rest_spec(levels=1))[0]
        scalar, vector = _symmetric_tests()
        with pytest.raises(ValueError, match="scalar test function"):
            continuity_residual(field, vector[0])
        with pytest.raises(ValueError, match="vector test function"):
            momentum_residual(field, scalar[0], GAS)

    def test_moving_constant_state_vanishes_for_off_centre_bumps(self):
        field = constant_state_sequence(_rest_spec(levels=1, far=FarField(rho_inf=1.3, u_inf=[0.5])))[0]
        for tf in make_battery(field.grid, 5, seed=2, T=0.1):
            assert abs(continuity_residual(field, tf)) < 1e-13
        for tf in make_battery(field.grid, 5, seed=3, T=0.1, kind="vector"):
            assert abs(momentum_residual(field, tf, GAS)) < 1e-12

    def test_energy_residual_needs_full_field(self):
        field = constant_state_sequence(_rest_spec(levels=1))[0]
        with pytest.raises(ValueError, match="full-system field"):
            energy_residual_full(field, _symmetric_tests()[0][0], GAS)

    def test_full_constant_state_balances(self):
        field = constant_state_sequence(_rest_spec(levels=1, system="full", s_ref=0.3))[0]
        tf = _symmetric_tests()[0][0]
        assert abs(energy_residual_full(field, tf, GAS)) < 1e-12


class TestEntropyResidual:
    """재규격화 엔트로피 결함"""

    def test_isentropic_field_rejected(self):
        field = constant_state_sequence(_rest_spec(levels=1))[0]
        with pytest.raises(ValueError, match="full-system field"):
            entropy_residual(field, _symmetric_tests()[0][0], renormalization_library()[2])

    def test_vector_test_rejected(self):
        field = constant_state_sequence(_rest_spec(levels=1, system="full"))[0]
        with pytest.raises(ValueError, match="scalar and nonnegative"):
            entropy_residual(field, _symmetric_tests()[1][0], renormalization_library()[2])

    def test_constant_state_battery(self):
        field = constant_state_sequence(_rest_spec(levels=1, system="full", s_ref=0.3))[0]
        table = entropy_battery(field, _symmetric_tests()[0], renormalization_library())
        assert table.shape == (1, 8)
        assert np.all(np.abs(table) < 1e-13)


class TestEnergyInequality:
    """int E(t | far) <= int E(0 | far)"""

    def test_constant_state_passes(self):
        field = constant_state_sequence(_rest_spec(levels=1))[0]
        report = energy_inequality_isentropic(field, GAS)
        assert report.passed
        assert report.min_slack == pytest.approx(0.0, abs=1e-14)

    def test_energy_growth_fails(self):
        report = energy_inequality_isentropic(_ramp_field(1.5), GAS)
        assert not report.passed
        assert report.min_slack < 0
        assert len(report.slacks) == 3

    def test_tau_truncates(self):
        report = energy_inequality_isentropic(_ramp_field(1.5), GAS, tau=0.0)
        assert report.passed
        assert report.slacks == [0.0]


class TestStability:
    """질량/엔트로피/에너지 예산"""

    def test_constant_full_sequence_stable(self):
        report = stability_check(constant_state_sequence(_rest_spec(system="full", s_ref=0.3)), GAS)
        assert report.verdict == "stable"
        assert report.S_lower == pytest.approx(0.3 * 1.3 * 2.0)

    def test_mass_budget_exceeded(self):
        seq = constant_state_sequence(_rest_spec())
        report = stability_check(seq, GAS, StabilityBudget(M=0.1))
        assert report.verdict == "not stable"
        assert report.offending_level == 1
        assert any("mass bound" in r for r in report.reasons)

    def test_persistent_energy_excess(self):
        seq = [_ramp_field(1.5, level=n, cells=16 * 2 ** (n - 1)) for n in (1, 2, 3)]
        report = stability_check(seq, GAS)
        assert report.verdict == "not stable"
        assert any("energy excess" in r for r in report.reasons)


class TestConsistencyBattery:
    """레벨별 sup 잔차와 판정"""

    def test_constant_sequence_consistent(self):
        scalar, vector = _symmetric_tests()
        report = consistency_battery(constant_state_sequence(_rest_spec()), scalar, vector, GAS)
        assert report.verdict == "consistent"
        assert report.converged
        assert [r.level for r in report.levels] == [1, 2, 3]

    def test_empty_battery(self):
        with pytest.raises(ValueError, match="empty test-function battery"):
            consistency_battery(constant_state_sequence(_rest_spec()), [], [], GAS)

"""
Tests for lib/generators.py - 상수/점성/리만/합성 수열, 엔트로피 하한
"""
import numpy as np
import pytest

from lib.eos import FarField, FullState, GasParameters, IsentropicState
from lib.generators import (
    InitialData, RiemannData, SequenceSpec, Wave, concentration_bump, constant_state_sequence,
    entropy_floor_enforce, lax_admissible, oscillatory_two_state, rankine_hugoniot_residual,
    riemann_exact_isentropic, shock_partner, solve_riemann_isentropic, vanishing_viscosity_solve,
)
from lib.grid import Grid, field_from_arrays, restrict
from lib.residuals import field_energy_history

GAS = GasParameters(gamma=1.4, a=1.0)


def _at_rest(rho):
    return IsentropicState(rho=rho, m=[0.0])


def _spec(**kw):
    base = dict(levels=3, base_cells=32, coarse_cells=16, T=0.1, n_times=3)
    base.update(kw)
    return SequenceSpec(**base)


class TestSequenceSpec:
    """레벨 규약"""

    def test_level_scaling(self):
        spec = _spec(eps0=0.04)
        assert spec.cells(3) == 128
        assert spec.eps(3) == pytest.approx(0.01)
        assert len(spec.times(2)) == 2 * (spec.n_times - 1) + 1

    def test_coarse_must_divide_base(self):
        with pytest.raises(ValueError, match="multiple of coarse_cells"):
            _spec(coarse_cells=12)

    def test_far_field_dimension_checked(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            _spec(far=FarField(rho_inf=1.0, u_inf=[0.0, 0.0]))


class TestConstantSequence:
    """상수 상태 수열"""

    def test_every_level_is_far_state(self):
        spec = _spec(far=FarField(rho_inf=1.3, u_inf=[0.5]))
        seq = constant_state_sequence(spec)
        assert [f.level for f in seq] == [1, 2, 3]
        for f in seq:
            assert np.all(f.rho == 1.3)
            assert np.allclose(f.m, 0.65)

    def test_full_system_carries_entropy(self):
        seq = constant_state_sequence(_spec(system="full", s_ref=0.5, levels=1))
        assert seq[0].is_full
        assert np.allclose(seq[0].S, 0.5)


class TestViscousSolver:
    """Rusanov + eps 라플라시안"""

    def test_constant_state_preserved(self):
        spec = _spec(levels=1, eps0=0.01, T=0.05, far=FarField(rho_inf=1.2, u_inf=[0.3]))
        field = vanishing_viscosity_solve(spec, 1)
        assert np.allclose(field.rho, 1.2, rtol=1e-13)
        assert np.allclose(field.m, 0.36, rtol=1e-13)

    def test_under_resolved_eps_recorded(self):
        far = FarField(rho_inf=1.0, u_inf=[0.0])
        coarse = vanishing_viscosity_solve(_spec(levels=1, eps0=0.01, T=0.01, far=far), 1)
        assert len(coarse.run_log["warnings"]) == 1
        assert "under-resolved" in coarse.run_log["warnings"][0]
        resolved = vanishing_viscosity_solve(_spec(levels=1, eps0=0.05, T=0.01, far=far), 1)
        assert resolved.run_log["warnings"] == []

    def test_riemann_mass_conserved_before_waves_reach_boundary(self):
        init = InitialData(kind="riemann", left=_at_rest(2.0), right=_at_rest(1.0))
        spec = _spec(levels=1, base_cells=64, coarse_cells=16, eps0=0.01, T=0.05, initial=init)
        field = vanishing_viscosity_solve(spec, 1)
        mass = field.rho.sum(axis=1) * field.grid.h
        assert mass == pytest.approx(np.full(len(mass), mass[0]), rel=1e-12)
        assert field.run_log["steps"] > 0
        assert field.run_log["min_density"] > 0

    def test_cfl_limit(self):
        with pytest.raises(ValueError, match="CFL number"):
            vanishing_viscosity_solve(_spec(levels=1, cfl=0.9), 1)

    def test_full_system_rejected(self):
        with pytest.raises(ValueError, match="isentropic system only"):
            vanishing_viscosity_solve(_spec(levels=1, system="full"), 1)


class TestRiemann:
    """등엔트로피 리만 문제 정확해"""

    def test_dam_break_structure(self):
        """왼쪽 고밀도: 1-희박파 + 2-충격파"""
        sol = solve_riemann_isentropic(RiemannData(left=_at_rest(2.0), right=_at_rest(1.0)), GAS)
        assert [w.kind for w in sol.waves] == ["rarefaction", "shock"]
        assert 1.0 < sol.rho_star < 2.0
        assert sol.u_star > 0

    def test_shock_satisfies_rankine_hugoniot_and_lax(self):
        sol = solve_riemann_isentropic(RiemannData(left=_at_rest(2.0), right=_at_rest(1.0)), GAS)
        shock = sol.waves[1]
        mass, momentum = rankine_hugoniot_residual(shock, GAS)
        assert abs(mass) < 1e-10
        assert abs(momentum) < 1e-8
        assert lax_admissible(shock, GAS)

    def test_shock_partner_gives_single_shock(self):
        base = _at_rest(1.0)
        partner = shock_partner(base, 2.0, GAS, family=1)
        sol = solve_riemann_isentropic(RiemannData(left=base, right=partner), GAS)
        assert sol.rho_star == pytest.approx(2.0, rel=1e-10)
        assert sol.waves[0].kind == "shock"
        s = (partner.m[0] - base.m[0]) / (partner.rho - base.rho)
        wave = Wave(family=1, kind="shock", speeds=(s, s), left=base, right=partner)
        assert abs(rankine_hugoniot_residual(wave, GAS)[1]) < 1e-12
        assert lax_admissible(wave, GAS)

    def test_shock_partner_needs_denser_state(self):
        with pytest.raises(ValueError, match="Lax condition"):
            shock_partner(_at_rest(1.0), 0.5, GAS)

    def test_vacuum_out_of_scope(self):
        data = RiemannData(left=IsentropicState(rho=1.0, m=[-10.0]), right=IsentropicState(rho=1.0, m=[10.0]))
        with pytest.raises(ValueError, match="vacuum"):
            solve_riemann_isentropic(data, GAS)

    def test_gamma_range(self):
        data = RiemannData(left=_at_rest(2.0), right=_at_rest(1.0))
        with pytest.raises(ValueError, match="gamma"):
            solve_riemann_isentropic(data, GasParameters(gamma=3.5))

    def test_cell_averages_conserve_mass(self):
        grid = Grid(dim=1, cells=64, extent=[(-1.0, 1.0)])
        data = RiemannData(left=_at_rest(2.0), right=_at_rest(1.0))
        field = riemann_exact_isentropic(data, GAS, grid, np.linspace(0.0, 0.1, 5))
        mass = field.rho.sum(axis=1) * grid.h
        assert mass == pytest.approx(np.full(5, 3.0), rel=5e-3)

    def test_exact_sampling_is_one_dimensional(self):
        grid = Grid(dim=2, cells=8, extent=[(-1.0, 1.0)] * 2)
        data = RiemannData(left=_at_rest(2.0), right=_at_rest(1.0))
        with pytest.raises(ValueError, match="one-dimensional"):
            riemann_exact_isentropic(data, GAS, grid, [0.0, 0.1])


class TestOscillatory:
    """두 상태 진동 수열"""

    def test_volume_fraction_range(self):
        with pytest.raises(ValueError, match="volume fraction"):
            oscillatory_two_state(_spec(), _at_rest(2.0), _at_rest(1.0), lam=0.0)

    def test_volume_fraction_must_fit_pattern(self):
        with pytest.raises(ValueError, match="must be an integer"):
            oscillatory_two_state(_spec(), _at_rest(2.0), _at_rest(1.0), lam=0.3, pattern_cells=8)

    def test_coarse_averages_equal_across_levels(self):
        """조밀 셀 평균 = lam A + (1 - lam) B"""
        spec = _spec(coarse_cells=4)
        seq = oscillatory_two_state(spec, _at_rest(2.0), _at_rest(1.0), lam=0.5, pattern_cells=8)
        for f in seq:
            factor = spec.coarse_grid.refinement_factor(f.grid)
            assert restrict(f.rho[0], factor, 1) == pytest.approx(np.full(4, 1.5), rel=1e-14)

    def test_full_states_promoted(self):
        spec = _spec(system="full", s_ref=0.2, levels=1)
        A = FullState(rho=2.0, m=[0.0], S=1.0)
        seq = oscillatory_two_state(spec, A, _at_rest(1.0), lam=0.5, pattern_cells=8)
        assert set(np.unique(seq[0].S)) == {0.2, 1.0}

    def test_two_dimensional_stripes_follow_axis_zero(self):
        """2차원: 축 1 방향으로는 균일 (체커보드 아님)"""
        spec = _spec(dim=2, extent=[(-1.0, 1.0)] * 2, levels=1, base_cells=16, coarse_cells=4,
                     far=FarField(rho_inf=1.0, u_inf=[0.0, 0.0]))
        A = IsentropicState(rho=2.0, m=[0.0, 0.0])
        B = IsentropicState(rho=1.0, m=[0.0, 0.0])
        rho = oscillatory_two_state(spec, A, B, lam=0.5, pattern_cells=8)[0].rho[0]
        assert np.all(rho == rho[:, :1])
        assert set(np.unique(rho[:, 0])) == {1.0, 2.0}


class TestConcentration:
    """집중 범프 수열"""

    def test_discrete_energy_equal_across_levels(self):
        spec = _spec(far=FarField(rho_inf=1.0, u_inf=[0.0]))
        seq = concentration_bump(spec, amplitude=1.0)
        energies = [field_energy_history(f, GAS)[0] for f in seq]
        assert energies[0] > 0
        assert energies == pytest.approx([energies[0]] * len(seq), rel=1e-12)

    def test_bump_must_fit_inner_box(self):
        with pytest.raises(ValueError, match="inner box"):
            concentration_bump(_spec(), radius=0.5, x0=[0.75])


class TestEntropyFloor:
    """S >= rho s_lower"""

    def _field(self):
        grid = Grid(dim=1, cells=8, extent=[(-1.0, 1.0)])
        times = np.array([0.0, 1.0])
        rho = np.ones((2, 8))
        S = np.full((2, 8), 0.5)
        S[1, 3] = -0.5
        return field_from_arrays(grid, times, rho, np.zeros((2, 8, 1)), S)

    def test_violation_counted(self):
        _, report = entropy_floor_enforce(self._field(), 0.0)
        assert report.violations == 1
        assert report.min_margin == pytest.approx(-0.5)

    def test_clip_lifts_to_floor(self):
        fixed, report = entropy_floor_enforce(self._field(), 0.0, clip=True)
        assert fixed.S.min() == 0.0
        assert report.correction_mass == pytest.approx(0.5 * 0.25)

    def test_correction_mass_sums_every_sample(self):
        field = self._field()
        S = field.S.copy()
        S[0, 5] = -0.25
        field = field_from_arrays(field.grid, field.times, field.rho, field.m, S)
        _, report = entropy_floor_enforce(field, 0.0, clip=True)
        assert report.correction_history == pytest.approx([0.25 * 0.25, 0.5 * 0.25])
        assert report.correction_mass == pytest.approx(0.75 * 0.25)

    def test_isentropic_field_not_applicable(self):
        field = constant_state_sequence(_spec(levels=1))[0]
        _, report = entropy_floor_enforce(field, 0.0)
        assert not report.applicable

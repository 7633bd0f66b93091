"""
Tests for lib/young.py - 원자 측도, Jensen 간격, 이분법 분류, 경험적 Young 측도
"""
import numpy as np
import pytest

from lib.eos import ExtendedReal, GasParameters, IsentropicState, energy_full_vector, energy_isentropic_vector
from lib.generators import SequenceSpec, constant_state_sequence, oscillatory_two_state
from lib.young import (
    AtomicMeasure, DichotomyViolation, barycenter, empirical_young, entropy_line_check, jensen_gap,
    merge_atoms, resolve_with_entropy_line, second_moment, sharp_jensen_classify, window_cell_average,
)

GAS = GasParameters(gamma=1.4, a=1.0)


def E_iso(y):
    return energy_isentropic_vector(y, GAS)


def E_full(y):
    return energy_full_vector(y, GAS)


def _spec(**kw):
    base = dict(levels=1, base_cells=32, coarse_cells=4, T=0.1, n_times=3)
    base.update(kw)
    return SequenceSpec(**base)


def _two_state(rho_a=2.0, rho_b=1.0):
    return AtomicMeasure(atoms=[[rho_a, 0.0], [rho_b, 0.0]], weights=[0.5, 0.5])


class TestAtomicMeasure:
    """원자와 가중치 검증"""

    def test_weights_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            AtomicMeasure(atoms=[[1.0], [2.0]], weights=[0.5, 0.6])

    def test_weight_per_atom(self):
        with pytest.raises(ValueError, match="one weight per atom"):
            AtomicMeasure(atoms=[[1.0], [2.0]], weights=[1.0])

    def test_moments(self):
        nu = _two_state()
        assert barycenter(nu) == pytest.approx([1.5, 0.0])
        assert second_moment(nu) == pytest.approx(0.25)


class TestMergeAtoms:
    """같은 값 표본 병합"""

    def test_duplicates_merged(self):
        nu = merge_atoms([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert nu.size == 2
        assert sorted(nu.weights.tolist()) == pytest.approx([1 / 3, 2 / 3])

    def test_near_duplicates_within_tolerance(self):
        nu = merge_atoms([[1.0], [1.0 + 1e-13]])
        assert nu.size == 1

    def test_empty(self):
        with pytest.raises(ValueError, match="empty window"):
            merge_atoms(np.zeros((0, 2)))


class TestJensen:
    """<nu; E> - E(<nu; y>)"""

    def test_dirac_has_no_gap(self):
        assert jensen_gap(AtomicMeasure.dirac([1.3, 0.4]), E_iso).value == pytest.approx(0.0, abs=1e-14)

    def test_two_densities_strict(self):
        gap = jensen_gap(_two_state(), E_iso).value
        P = lambda r: r ** 1.4 / 0.4  # noqa: E731
        assert gap == pytest.approx(0.5 * (P(2.0) + P(1.0)) - P(1.5), rel=1e-12)
        assert sharp_jensen_classify(_two_state(), E_iso) == "strict"

    def test_atom_outside_domain_is_inf(self):
        nu = AtomicMeasure(atoms=[[0.0, 1.0], [2.0, 0.0]], weights=[0.5, 0.5])
        assert jensen_gap(nu, E_iso).is_infinite

    def test_dirac_label(self):
        assert sharp_jensen_classify(AtomicMeasure.dirac([1.0, 0.5]), E_iso) == "dirac"

    def test_zero_set_supported(self):
        """진공 원자 (0, 0, S <= 0) 만 가진 측도"""
        nu = AtomicMeasure(atoms=[[0.0, 0.0, 0.0], [0.0, 0.0, -1.0]], weights=[0.5, 0.5])
        assert sharp_jensen_classify(nu, E_full) == "zero_set_supported"

    def test_flat_energy_raises_violation(self):
        linear = lambda y: ExtendedReal(float(y[0]))  # noqa: E731
        with pytest.raises(DichotomyViolation, match="dichotomy violation"):
            sharp_jensen_classify(_two_state(), linear)


class TestEntropyLine:
    """S >= rho s_lower 로 영집합 지지 배제"""

    def test_needs_full_atoms(self):
        with pytest.raises(ValueError, match="full-system atoms"):
            entropy_line_check(_two_state(), 0.0)

    def test_zero_set_below_line_kept(self):
        nu = AtomicMeasure(atoms=[[0.0, 0.0, 0.0], [0.0, 0.0, -1.0]], weights=[0.5, 0.5])
        assert not entropy_line_check(nu, 0.0)
        assert resolve_with_entropy_line(nu, E_full, 0.0) == "zero_set_supported"

    def test_strict_passes_through(self):
        nu = AtomicMeasure(atoms=[[2.0, 0.0, 1.0], [1.0, 0.0, 0.0]], weights=[0.5, 0.5])
        assert resolve_with_entropy_line(nu, E_full, 0.0) == "strict"

    def test_vacuum_dirac_on_line(self):
        assert resolve_with_entropy_line(AtomicMeasure.dirac([0.0, 0.0, 0.0]), E_full, 0.0) == "dirac"


class TestEmpiricalYoung:
    """조밀 셀별 경험적 측도"""

    def _oscillatory(self):
        spec = _spec()
        rest = lambda r: IsentropicState(rho=r, m=[0.0])  # noqa: E731
        return spec, oscillatory_two_state(spec, rest(2.0), rest(1.0), lam=0.5, pattern_cells=8)[0]

    def test_two_atoms_per_cell(self):
        spec, field = self._oscillatory()
        young = empirical_young(field, spec.coarse_grid)
        assert len(young.measures) == 4
        for nu in young.measures:
            assert nu.size == 2
            assert nu.weights == pytest.approx([0.5, 0.5])
        assert young.classify(E_iso) == ["strict"] * 4

    def test_barycenter_matches_cell_average(self):
        spec, field = self._oscillatory()
        young = empirical_young(field, spec.coarse_grid)
        assert young.barycenters() == pytest.approx(window_cell_average(field, spec.coarse_grid), rel=1e-14)

    def test_constant_field_is_dirac(self):
        spec = _spec()
        field = constant_state_sequence(spec)[0]
        young = empirical_young(field, spec.coarse_grid)
        assert young.classify(E_iso) == ["dirac"] * 4
        assert np.allclose(young.jensen_gaps(E_iso), 0.0, atol=1e-14)

    def test_frame_layout(self):
        spec, field = self._oscillatory()
        frame = empirical_young(field, spec.coarse_grid).to_frame()
        assert list(frame.columns) == ["cell", "atom", "y_0", "y_1", "weight"]
        assert len(frame) == 8

    def test_window_selects_times(self):
        spec, field = self._oscillatory()
        young = empirical_young(field, spec.coarse_grid, window=(0.05, 0.1))
        assert len(young.times) == 2

    def test_empty_window(self):
        spec, field = self._oscillatory()
        with pytest.raises(ValueError, match="empty window"):
            empirical_young(field, spec.coarse_grid, window=(0.2, 0.3))

"""
Tests for lib/grid.py - 격자, 시공간 장, 시험함수, 시간 가중치, 직렬화
"""
import numpy as np
import pytest

from lib.eos import FarField
from lib.grid import (
    Grid, Snapshot, TimeBump, check_support, cutoff, field_from_arrays, integrate_space, load_field,
    make_battery, make_bump, resample_times, restrict, save_field, time_reversed, time_weights, weak_pairing,
)

# int_{-1}^{1} (1 - z^2)^2 dz
BUMP_MASS = 16.0 / 15.0


def _grid(cells=8, dim=1):
    return Grid(dim=dim, cells=cells, extent=[(-1.0, 1.0)] * dim)


def _field(grid, times, rho_of_t, full=False):
    nt = len(times)
    rho = np.stack([np.full(grid.shape, rho_of_t(t)) for t in times])
    m = np.zeros((nt,) + grid.shape + (grid.dim,))
    S = 0.5 * rho if full else None
    return field_from_arrays(grid, times, rho, m, S, far=FarField(rho_inf=1.0, u_inf=[0.0] * grid.dim))


class TestGrid:
    """균등 격자"""

    def test_geometry(self):
        g = _grid(cells=8, dim=2)
        assert g.h == pytest.approx(0.25)
        assert g.shape == (8, 8)
        assert g.mesh().shape == (8, 8, 2)
        assert g.mesh()[0, 0] == pytest.approx([-0.875, -0.875])

    def test_refinement_factor(self):
        g = _grid(8)
        assert g.refinement_factor(g.refine(4)) == 4

    def test_non_nested_refinement_rejected(self):
        with pytest.raises(ValueError, match="does not refine"):
            _grid(8).refinement_factor(_grid(12))

    def test_unequal_cell_width_rejected(self):
        with pytest.raises(ValueError):
            Grid(dim=2, cells=8, extent=[(-1.0, 1.0), (0.0, 1.0)])

    def test_restrict_block_average(self):
        """2 셀 블록 평균"""
        arr = np.arange(8, dtype=float)
        assert restrict(arr, 2, 1) == pytest.approx([0.5, 2.5, 4.5, 6.5])

    def test_restrict_keeps_leading_axis(self):
        arr = np.ones((3, 8, 8, 2))
        assert restrict(arr, 4, 2, lead=1).shape == (3, 2, 2, 2)

    def test_cell_average_to_coarse_grid(self):
        fine, coarse = _grid(8), _grid(4)
        arr = np.arange(8, dtype=float)
        assert fine.cell_average_to(coarse, arr) == pytest.approx([0.5, 2.5, 4.5, 6.5])
        stacked = np.stack([arr, 2 * arr])
        assert fine.cell_average_to(coarse, stacked, lead=1)[1] == pytest.approx([1.0, 5.0, 9.0, 13.0])

    def test_cell_average_to_needs_nested_grid(self):
        with pytest.raises(ValueError, match="does not refine"):
            _grid(6).cell_average_to(_grid(4), np.zeros(6))

    def test_interior_mask(self):
        g = _grid(8)
        # 중심 -0.875, -0.625, ..., 0.875
        assert g.interior(0.25).tolist() == [False, True, True, True, True, True, True, False]
        assert g.interior(0.5).sum() == 4
        assert g.interior(0.1, np.array([[0.95], [0.0]])).tolist() == [False, True]


class TestSpaceTimeField:
    """스냅샷 검증"""

    def test_negative_density_rejected(self):
        g = _grid()
        with pytest.raises(ValueError, match="negative density"):
            Snapshot(grid=g, rho=-np.ones(g.shape), m=np.zeros(g.shape + (1,)))

    def test_nan_rejected(self):
        g = _grid()
        rho = np.ones(g.shape)
        rho[0] = np.nan
        with pytest.raises(ValueError, match="invalid state"):
            Snapshot(grid=g, rho=rho, m=np.zeros(g.shape + (1,)))

    def test_times_start_at_zero(self):
        g = _grid()
        with pytest.raises(ValueError, match="start at 0"):
            _field(g, np.array([0.1, 0.2]), lambda t: 1.0)

    def test_snapshots_read_only(self):
        f = _field(_grid(), np.array([0.0, 1.0]), lambda t: 1.0)
        with pytest.raises(ValueError):
            f.snapshots[0].rho[0] = 2.0


class TestTimeWeights:
    """선형 보간 자료의 정확한 시간 적분"""

    def test_plain_weights_sum_to_T(self):
        times = np.linspace(0.0, 0.7, 8)
        assert time_weights(times, None).sum() == pytest.approx(0.7, rel=1e-14)

    def test_bump_weights_integrate_psi(self):
        times = np.linspace(0.0, 1.0, 21)
        psi = TimeBump(center=0.5, radius=0.3)
        assert time_weights(times, psi).sum() == pytest.approx(0.3 * BUMP_MASS, rel=1e-12)

    def test_linear_data_exact(self):
        """int t psi dt = center int psi (대칭)"""
        times = np.linspace(0.0, 1.0, 7)
        psi = TimeBump(center=0.45, radius=0.3)
        w = time_weights(times, psi)
        assert w @ times == pytest.approx(0.45 * 0.3 * BUMP_MASS, rel=1e-12)

    def test_derivative_weights_sum_to_zero(self):
        times = np.linspace(0.0, 1.0, 11)
        psi = TimeBump(center=0.5, radius=0.4)
        assert abs(time_weights(times, psi, derivative=True).sum()) < 1e-14


class TestTestFunctions:
    """범프 시험함수와 배터리"""

    def test_support_outside_domain_rejected(self):
        with pytest.raises(ValueError, match="test function not compactly supported in domain"):
            make_bump([0.9], 0.3, grid=_grid())

    def test_time_support_checked(self):
        tf = make_bump([0.0], 0.5, time_factor=TimeBump(center=0.9, radius=0.3))
        with pytest.raises(ValueError, match="test function not compactly supported in domain"):
            check_support(tf, _grid(), tau=1.0)

    def test_vector_needs_direction(self):
        with pytest.raises(ValueError, match="direction"):
            make_bump([0.0], 0.5, kind="vector")

    def test_gradient_matches_finite_difference(self):
        tf = make_bump([0.1, -0.2], [0.5, 0.4])
        x = np.array([[0.2, -0.1]])
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (tf.phi(x + e) - tf.phi(x - e)) / (2 * h)
            assert fd[0] == pytest.approx(tf.grad(x)[0, i], rel=1e-6)

    def test_battery_deterministic(self):
        a = make_battery(_grid(16), 5, seed=7, T=1.0, kind="vector")
        b = make_battery(_grid(16), 5, seed=7, T=1.0, kind="vector")
        assert [t.space.center for t in a] == [t.space.center for t in b]
        assert [t.direction for t in a] == [t.direction for t in b]

    def test_battery_inside_domain(self):
        g = _grid(16, dim=2)
        for tf in make_battery(g, 20, seed=1, T=1.0):
            check_support(tf, g, tau=1.0)


class TestWeakPairing:
    """시공간 쌍대"""

    def test_integrate_space_midpoint(self):
        g = _grid(8, dim=2)
        assert integrate_space(g, np.ones(g.shape)) == pytest.approx(4.0)
        field = _field(_grid(16), [0.0, 1.0], lambda t: 2.0)
        assert integrate_space(field.snapshots[0], field.snapshots[0].rho) == pytest.approx(4.0)

    def test_integrate_space_rejects_nan(self):
        g = _grid(4)
        with pytest.raises(ValueError, match="NaN"):
            integrate_space(g, [1.0, float("nan"), 0.0, 0.0])

    def test_integrate_space_exported_from_package(self):
        import lib
        assert lib.integrate_space is integrate_space

    def test_linear_in_time_density(self):
        """rho = 1 + t: int int rho psi' phi = -int phi int psi"""
        g = _grid(32)
        times = np.linspace(0.0, 1.0, 6)
        field = _field(g, times, lambda t: 1.0 + t)
        tf = make_bump([0.0], 0.6, time_factor=TimeBump(center=0.5, radius=0.3))
        value = weak_pairing(field, tf, density=lambda s: s.rho)
        space = 0.6 * BUMP_MASS
        assert value == pytest.approx(-space * 0.3 * BUMP_MASS, rel=1e-12)

    def test_unit_time_factor_boundary_terms(self):
        """psi = 1: -[int rho phi]_0^tau"""
        g = _grid(32)
        times = np.linspace(0.0, 1.0, 6)
        field = _field(g, times, lambda t: 1.0 + t)
        tf = make_bump([0.0], 0.6)
        space = 0.6 * BUMP_MASS
        assert weak_pairing(field, tf, density=lambda s: s.rho) == pytest.approx(-space, rel=1e-12)

    def test_moving_constant_state_pairs_to_zero(self):
        """상수 상태의 연속방정식 잔차는 임의 범프에서 반올림 수준"""
        g = _grid(16, dim=2)
        times = np.linspace(0.0, 1.0, 5)
        rho = np.full((5,) + g.shape, 1.2)
        m = np.broadcast_to(np.array([0.6, -0.3]), (5,) + g.shape + (2,)).copy()
        field = field_from_arrays(g, times, rho, m)
        for tf in make_battery(g, 6, seed=3, T=1.0):
            value = weak_pairing(field, tf, density=lambda s: s.rho, flux=lambda s: s.m)
            assert abs(value) < 1e-13


class TestCellAverages:
    """시험함수의 정확한 셀 평균"""

    def test_mass_is_exact(self):
        g = _grid(8, dim=2)
        tf = make_bump([0.1, -0.2], [0.5, 0.4])
        assert float(np.sum(tf.cell_phi(g))) * g.cell_volume == pytest.approx(0.5 * 0.4 * BUMP_MASS ** 2, rel=1e-12)

    def test_gradient_integrates_to_zero(self):
        g = _grid(8, dim=2)
        tf = make_bump([0.1, -0.2], [0.5, 0.4], kind="vector", direction=[0.6, 0.8])
        assert np.abs(tf.cell_grad(g).sum(axis=(0, 1))).max() < 1e-13
        assert abs(float(tf.cell_div(g).sum())) < 1e-13

    def test_gradient_is_face_difference(self):
        g = _grid(16)
        tf = make_bump([0.1], 0.5)
        faces = g.lo[0] + np.arange(g.cells + 1) * g.h
        expected = np.diff(tf.phi(faces[:, None])) / g.h
        assert tf.cell_grad(g)[:, 0] == pytest.approx(expected, abs=1e-14)

    def test_close_to_midpoint_on_fine_grid(self):
        g = _grid(512)
        tf = make_bump([0.1], 0.5)
        assert tf.cell_phi(g) == pytest.approx(tf.phi(g.mesh()), abs=1e-4)


class TestCutoff:
    """컷오프 족의 기울기 상한"""

    def test_whole_space_bound_scales_like_one_over_n(self):
        for n in (1, 2, 4):
            fam = cutoff("whole_space", n)
            assert fam.value(np.zeros((1, 1)))[0] == pytest.approx(1.0)
            assert fam.value(np.array([[2.0 * n]]))[0] == pytest.approx(0.0)
            assert fam.gradient_bound == pytest.approx(1.5, rel=1e-3)

    def test_boundary_layer_needs_domain(self):
        with pytest.raises(ValueError, match="domain grid"):
            cutoff("boundary_layer", 2)

    def test_boundary_layer_bound_scales_like_n(self):
        g = _grid(64)
        assert cutoff("boundary_layer", 4, g).gradient_bound == pytest.approx(3.0, rel=1e-2)


class TestResampleAndReverse:
    """시간 재표본, 역전"""

    def test_resample_midpoints_linear(self):
        g = _grid()
        field = _field(g, np.array([0.0, 1.0]), lambda t: 1.0 + 2.0 * t)
        out = resample_times(field, [0.0, 0.25, 0.5])
        assert out.rho[:, 0] == pytest.approx([1.0, 1.5, 2.0])

    def test_resample_beyond_T_rejected(self):
        field = _field(_grid(), np.array([0.0, 1.0]), lambda t: 1.0)
        with pytest.raises(ValueError, match="outside"):
            resample_times(field, [0.0, 2.0])

    def test_reverse_twice_is_identity(self):
        field = _field(_grid(), np.linspace(0.0, 1.0, 5), lambda t: 1.0 + t)
        back = time_reversed(time_reversed(field))
        assert np.array_equal(back.rho, field.rho)
        assert np.allclose(back.times, field.times)


class TestSerialization:
    """장 CSV 저장/불러오기"""

    def test_round_trip_lossless(self, tmp_path):
        g = _grid(4, dim=2)
        rng = np.random.default_rng(0)
        times = np.array([0.0, 0.1, 0.3])
        rho = rng.uniform(0.5, 2.0, (3, 4, 4))
        m = rng.normal(size=(3, 4, 4, 2))
        S = rng.normal(size=(3, 4, 4))
        field = field_from_arrays(g, times, rho, m, S, far=FarField(rho_inf=1.0, u_inf=[0.1, 0.2]), level=3)
        back = load_field(save_field(field, tmp_path / "f.csv"))
        assert back.level == 3
        assert back.far == field.far
        assert np.array_equal(back.rho, field.rho)
        assert np.array_equal(back.m, field.m)
        assert np.array_equal(back.S, field.S)

    def test_not_a_field_file(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="not a field file"):
            load_field(path)

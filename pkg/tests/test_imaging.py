import warnings

import numpy as np
import pytest
from scipy import special

from nfsampling import bie, imaging, nearfield
from nfsampling.exceptions import EigenvalueProximityError, FormatError
from nfsampling.imaging import GridSpec, ImagingGrid, ProbeGrowthWarning
from nfsampling.nearfield import Mode, NearFieldMatrix, SensorRing

from conftest import near_field

# first zero of J_0, frozen from mpmath.besseljzero(0, 1)
J0_FIRST_ZERO = 2.4048255576957727686

OBSTACLE_RING = SensorRing(5.0, 128)
CAVITY_RING = SensorRing(1.0, 32, Mode.CAVITY)


def _rays_argmax(nf, radii, n_rays=16, **kw):
    angles = 2 * np.pi * np.arange(n_rays) / n_rays + 0.1
    out = []
    for a in angles:
        pts = radii[:, None] * np.array([np.cos(a), np.sin(a)])
        out.append(imaging.indicator_values(nf, pts, **kw))
    return np.array(out)


class TestProbes:
    def test_obstacle_probe_at_origin(self):
        p = imaging.probe_obstacle((0.0, 0.0), OBSTACLE_RING, 10.0, M=32)
        expect = 4 / (1j * 5.0 * np.pi * 2 * special.hankel1(0, 50.0))
        np.testing.assert_allclose(p.values, expect, rtol=1e-13)
        assert p.mode is Mode.OBSTACLE and p.truncation == 32

    def test_cavity_probe_at_origin(self):
        p = imaging.probe_cavity((0.0, 0.0), CAVITY_RING, 0.2, m=3)
        expect = 4 / (1j * 1.0 * np.pi * 2) / special.j0(0.2)
        np.testing.assert_allclose(p.values, expect, rtol=1e-13)

    @pytest.mark.parametrize("shift", [1, 5, -3])
    def test_rotation_is_a_cyclic_shift(self, shift):
        z = np.array([0.8, -1.3])
        a = shift * 2 * np.pi / 128
        rz = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]) @ z
        p = imaging.probe_obstacle(z, OBSTACLE_RING, 10.0).values
        q = imaging.probe_obstacle(rz, OBSTACLE_RING, 10.0).values
        np.testing.assert_allclose(q, np.roll(p, shift), atol=1e-12 * np.max(np.abs(p)))

    def test_delta_doubles_nonzero_orders(self):
        z = (1.1, 0.4)
        rho = np.hypot(*z)
        d = imaging.probe_obstacle(z, OBSTACLE_RING, 10.0, normalization="delta").values
        u = imaging.probe_obstacle(z, OBSTACLE_RING, 10.0, normalization="uniform").values
        zero = imaging.probe_obstacle((0, 0), OBSTACLE_RING, 10.0, normalization="uniform").values
        np.testing.assert_allclose(d, 2 * u - special.j0(10 * rho) * zero, atol=1e-13 * np.max(np.abs(d)))

    def test_obstacle_quadrature_identity(self):
        x, z, k = np.array([1.5, 0.7]), np.array([0.5, -0.2]), 10.0
        ring = OBSTACLE_RING
        p = imaging.probe_obstacle(z, ring, k, M=32, normalization="uniform").values
        phi = bie.fundamental_solution(x[None], ring.points, k)
        lhs = ring.weight * np.sum(phi * p)
        assert abs(lhs - imaging.h_phi_closed_form(x, z, k, 32)) < 1e-8

    def test_cavity_quadrature_identity(self):
        x, z, k = np.array([3.0, 0.0]) @ [[0.6, 0.8], [-0.8, 0.6]], np.array([0.3, 0.4]), 0.2
        ring = CAVITY_RING
        p = imaging.probe_cavity(z, ring, k, m=3, normalization="uniform").values
        phi = bie.fundamental_solution(x[None], ring.points, k)
        lhs = ring.weight * np.sum(phi * p)
        assert abs(lhs - imaging.s_psi_closed_form(x, z, k, 3)) < 1e-8

    @pytest.mark.parametrize("n", [4, 6])
    def test_cavity_term_growth(self, n):
        z = np.array([0.0, 0.6])
        top = imaging.probe_cavity(z, CAVITY_RING, 0.2, m=n, normalization="uniform").values
        below = imaging.probe_cavity(z, CAVITY_RING, 0.2, m=n - 1, normalization="uniform").values
        coef = 2 * 2 / (1j * np.pi * 1.0)
        # the n-th term at the sensor facing z has cos = 1
        j = np.argmin(np.abs(CAVITY_RING.angles - np.pi / 2))
        ratio = abs((top - below)[j] / coef) / 0.6 ** n
        assert ratio == pytest.approx(1.0, rel=0.01)

    def test_cavity_eigenvalue_rejected(self):
        with pytest.raises(EigenvalueProximityError):
            imaging.probe_cavity((0.1, 0.0), CAVITY_RING, J0_FIRST_ZERO, m=3)

    def test_cavity_growth_warning(self):
        with pytest.warns(ProbeGrowthWarning):
            imaging.probe_cavity((30.0, 0.0), CAVITY_RING, 0.2, m=6)
        with warnings.catch_warnings():
            warnings.simplefilter("error", ProbeGrowthWarning)
            imaging.probe_cavity((3.0, 0.0), CAVITY_RING, 0.2, m=3)

    def test_wrong_ring_mode(self):
        with pytest.raises(ValueError):
            imaging.probe_cavity((0, 0), OBSTACLE_RING, 1.0)
        with pytest.raises(ValueError):
            imaging.probe_obstacle((0, 0), CAVITY_RING, 1.0)

    @pytest.mark.parametrize("kw", [dict(M=-1), dict(M=2.5), dict(normalization="other")])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            imaging.probe_obstacle((0, 0), OBSTACLE_RING, 1.0, **kw)

    def test_probe_matrix_matches_single_probes(self, rng):
        pts = rng.uniform(-3, 3, size=(7, 2))
        mat = imaging.probe_matrix(pts, OBSTACLE_RING, 10.0, 32)
        for row, z in zip(mat, pts):
            single = imaging.probe_obstacle(z, OBSTACLE_RING, 10.0).values
            np.testing.assert_allclose(row, single, rtol=1e-13, atol=1e-15)


class TestIndicators:
    def setup_method(self):
        self.v = imaging.probe_obstacle((0.7, 0.2), SensorRing(5.0, 16), 3.0)
        self.w = imaging.probe_cavity((0.3, -0.1), SensorRing(1.0, 16, Mode.CAVITY), 0.2)

    def test_zero_matrix(self):
        z = np.zeros((16, 16))
        assert imaging.indicator_obstacle(z, self.v) == 0.0
        assert imaging.indicator_cavity(z, self.w) == 0.0

    def test_identity_obstacle_is_bilinear(self):
        v = self.v.values
        out = imaging.indicator_obstacle(np.eye(16), self.v)
        assert out == pytest.approx(abs(np.sum(v ** 2)), rel=1e-13)
        assert out != pytest.approx(np.sum(np.abs(v) ** 2), rel=1e-3)

    def test_identity_cavity_is_sesquilinear(self):
        w = self.w.values
        assert imaging.indicator_cavity(np.eye(16), self.w) == pytest.approx(np.sum(np.abs(w) ** 2), rel=1e-13)

    def test_hermitian_positive_definite(self, rng):
        a = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        assert imaging.indicator_cavity(a.conj().T @ a + np.eye(16), self.w) > 0

    def test_complex_scaling(self, rng):
        n = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        c = 2.5 - 1.5j
        for f, p in [(imaging.indicator_obstacle, self.v), (imaging.indicator_cavity, self.w)]:
            assert f(c * n, p) == pytest.approx(abs(c) * f(n, p), rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            imaging.indicator_obstacle(np.eye(8), self.v)
        with pytest.raises(ValueError):
            imaging.indicator_cavity(np.eye(8), self.w)

    def test_vectorized_matches_pointwise(self, kite_obstacle, disk_cavity, rng):
        pts = rng.uniform(-2, 2, size=(9, 2))
        fast = imaging.indicator_values(kite_obstacle, pts)
        slow = [imaging.indicator_obstacle(kite_obstacle, imaging.probe_obstacle(z, kite_obstacle.ring, 10.0))
                for z in pts]
        np.testing.assert_allclose(fast, slow, rtol=1e-10)
        fast = imaging.indicator_values(disk_cavity, pts)
        slow = [imaging.indicator_cavity(disk_cavity, imaging.probe_cavity(z, disk_cavity.ring, 0.2))
                for z in pts]
        np.testing.assert_allclose(fast, slow, rtol=1e-10)


class TestSweep:
    SMALL = GridSpec(-4.0, 4.0, -4.0, 4.0, 41, 41)

    def test_max_is_one(self, kite_obstacle):
        grid = imaging.sweep(kite_obstacle, self.SMALL)
        assert grid.values.max() == 1.0
        assert grid.values.min() >= 0.0
        assert grid.values.shape == (41, 41)

    def test_scaling_invariance(self, kite_obstacle):
        a = imaging.sweep(kite_obstacle, self.SMALL)
        scaled = NearFieldMatrix((3 - 4j) * kite_obstacle.entries, kite_obstacle.ring, 10.0)
        b = imaging.sweep(scaled, self.SMALL)
        np.testing.assert_allclose(b.values, a.values, rtol=1e-12, atol=1e-14)

    def test_thread_count_does_not_change_output(self, kite_obstacle):
        a = imaging.indicator_values(kite_obstacle, self.SMALL.points(), threads=1, chunk=100)
        b = imaging.indicator_values(kite_obstacle, self.SMALL.points(), threads=4, chunk=100)
        np.testing.assert_array_equal(a, b)

    def test_rotation_covariance_for_centred_circle(self, rng):
        nf = near_field("circle", 10.0, 5.0, 128, circle_radius=2.0)
        pts = rng.uniform(-4, 4, size=(200, 2))
        a = 2 * np.pi / 128
        rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        base = imaging.indicator_values(nf, pts)
        turned = imaging.indicator_values(nf, pts @ rot.T)
        assert np.max(np.abs(turned - base)) < 1e-6 * base.max()

    def test_circle_obstacle_peaks_on_boundary(self):
        nf = near_field("circle", 10.0, 5.0, 128, circle_radius=2.0)
        radii = np.linspace(0.0, 4.5, 91)
        vals = _rays_argmax(nf, radii)
        peaks = radii[np.argmax(vals, axis=1)]
        assert np.all((peaks >= 1.9) & (peaks <= 2.1))

    def test_circle_obstacle_peaks_on_boundary_with_noise(self):
        nf = nearfield.add_noise(near_field("circle", 10.0, 5.0, 128, circle_radius=2.0), 0.1, seed=0)
        radii = np.linspace(0.0, 4.5, 91)
        peaks = radii[np.argmax(_rays_argmax(nf, radii), axis=1)]
        assert np.all((peaks >= 1.8) & (peaks <= 2.2))

    def test_empty_scene_cannot_be_normalized(self):
        nf = nearfield.synthesize([], SensorRing(5.0, 16), 1.0)
        with pytest.raises(FloatingPointError):
            imaging.sweep(nf, self.SMALL)

    def test_bad_grids(self):
        with pytest.raises(ValueError):
            GridSpec(nx=0)
        with pytest.raises(ValueError):
            GridSpec(x0=1.0, x1=-1.0)

    def test_default_grids(self):
        assert imaging.DEFAULT_GRIDS[Mode.OBSTACLE] == GridSpec(-5, 5, -5, 5, 301, 301)
        assert imaging.DEFAULT_GRIDS[Mode.CAVITY] == GridSpec(-4, 4, -4, 4, 81, 81)

    def test_grid_points_row_major_y_increasing(self):
        pts = GridSpec(0, 1, 10, 12, 2, 3).points()
        np.testing.assert_array_equal(pts, [[0, 10], [1, 10], [0, 11], [1, 11], [0, 12], [1, 12]])


class TestClosedForms:
    def test_j0_identity_random_pairs(self, rng):
        k = 10.0
        worst = 0.0
        for _ in range(100):
            x, z = (rng.uniform(0, 5) * np.array([np.cos(t), np.sin(t)])
                    for t in rng.uniform(0, 2 * np.pi, 2))
            M = int(np.ceil(k * (np.hypot(*x) + np.hypot(*z)))) + 40
            val = imaging.h_phi_closed_form(x, z, k, M)
            worst = max(worst, abs(val - special.j0(k * np.hypot(*(x - z)))))
        assert worst < 1e-8

    def test_coincident_points(self):
        x = (1.2, -0.4)
        assert imaging.h_phi_closed_form(x, x, 10.0, 60) == pytest.approx(1.0, abs=1e-8)

    def test_first_zero(self):
        x = np.array([0.3, 0.2])
        z = x + J0_FIRST_ZERO / 10.0 * np.array([0.6, 0.8])
        assert abs(imaging.h_phi_closed_form(x, z, 10.0, 80)) < 1e-8

    def test_symmetric(self):
        x, z = (1.0, 2.0), (-0.5, 0.3)
        assert imaging.h_phi_closed_form(x, z, 7.0, 20) == imaging.h_phi_closed_form(z, x, 7.0, 20)

    def test_s_psi_at_origin(self):
        x = (1.5, 2.0)
        assert imaging.s_psi_closed_form(x, (0, 0), 0.2, 5) == pytest.approx(special.hankel1(0, 0.5), rel=1e-14)

    def test_s_psi_large_m(self):
        x, z = np.array([3.0, 0.0]), np.array([0.6, 0.8])
        val = imaging.s_psi_closed_form(x, z, 0.2, 40)
        assert abs(val - special.hankel1(0, 0.2 * np.hypot(*(x - z)))) < 1e-6

    def test_s_psi_real_part(self):
        x, z = (2.0, 1.0), (0.4, -0.3)
        assert imaging.s_psi_closed_form(x, z, 0.9, 6).real == pytest.approx(
            imaging.h_phi_closed_form(x, z, 0.9, 6), rel=1e-13
        )

    def test_s_psi_rejects_origin(self):
        with pytest.raises(ValueError):
            imaging.s_psi_closed_form((0, 0), (0.1, 0), 1.0, 3)


class TestGridFiles:
    def test_roundtrip(self, tmp_path, rng):
        spec = GridSpec(-1.0, 2.0, 0.5, 1.5, 7, 4)
        g = ImagingGrid(spec, rng.uniform(size=(4, 7)))
        g.save(tmp_path / "g.img")
        back = ImagingGrid.load(tmp_path / "g.img")
        assert back.spec == spec
        np.testing.assert_array_equal(back.values, g.values)

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            ImagingGrid(GridSpec(nx=3, ny=2), np.zeros((3, 2)))

    @pytest.mark.parametrize("text", [
        "IMG 2\nnx=1 ny=1 x0=0 x1=0 y0=0 y1=0\n0\n",
        "IMG 1\nnx=2 ny=1 x0=0 x1=1 y0=0 y1=0\n0\n",
        "IMG 1\nnx=1 ny=1 x0=0 x1=0\n0\n",
    ])
    def test_malformed(self, tmp_path, text):
        (tmp_path / "bad.img").write_text(text)
        with pytest.raises(FormatError):
            ImagingGrid.load(tmp_path / "bad.img")

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sbsgeom.sphere import (
    Chart,
    SpherePoint,
    TangentVector,
    apply_su2,
    chordal_distance,
    fs_area_density,
    su2_sending_to_infinity,
    su2_sending_to_origin,
)

EAST = SpherePoint.from_homogeneous(1, 0)  # [1:0], z = 0
NORTH = SpherePoint.from_homogeneous(0, 1)  # [0:1], z = inf


def stereographic(z: complex) -> np.ndarray:
    """Independent oracle: unit-sphere point of the z-plane coordinate."""
    s = 1 + abs(z) ** 2
    return np.array([2 * z.real / s, 2 * z.imag / s, (abs(z) ** 2 - 1) / s])


def random_points(rng, n):
    zs = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.exp(rng.normal(size=n))
    return [SpherePoint.from_z(z) for z in zs]


class TestChordal:
    def test_identity(self):
        assert chordal_distance(EAST, EAST) == 0.0

    def test_antipodal(self):
        assert chordal_distance(EAST, NORTH) == pytest.approx(1.0, abs=1e-15)

    def test_plus_minus_one(self):
        d = chordal_distance(SpherePoint.from_z(1), SpherePoint.from_z(-1))
        assert d == pytest.approx(1.0, abs=1e-15)

    def test_matches_stereographic_chord(self):
        rng = np.random.default_rng(0)
        pts = random_points(rng, 200)
        for p, q in zip(pts[::2], pts[1::2]):
            chord = np.linalg.norm(stereographic(p.z) - stereographic(q.z)) / 2
            assert chordal_distance(p, q) == pytest.approx(chord, abs=1e-13)

    def test_symmetric_and_chart_independent(self):
        p = SpherePoint(Chart.AFFINE0, 0.9 + 0.2j)
        q = SpherePoint(Chart.AFFINE1, 0.3 - 0.5j)
        q_other = SpherePoint(Chart.AFFINE0, 1 / q.coord)
        assert chordal_distance(p, q) == pytest.approx(chordal_distance(q, p), abs=1e-16)
        assert chordal_distance(p, q) == pytest.approx(chordal_distance(p, q_other), abs=1e-15)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1)
        pts = random_points(rng, 3000)
        for a, b, c in zip(pts[0::3], pts[1::3], pts[2::3]):
            assert chordal_distance(a, c) <= chordal_distance(a, b) + chordal_distance(b, c) + 1e-12


class TestCharts:
    def test_round_trip(self):
        rng = np.random.default_rng(2)
        zs = (rng.normal(size=10_000) + 1j * rng.normal(size=10_000)) * 3
        zs = zs[np.abs(zs) > 1e-3]
        w = 1.0 / zs
        back = 1.0 / w
        assert np.max(np.abs(back - zs) / np.maximum(1, np.abs(zs))) < 1e-13
        for z in zs[:2000]:
            p = SpherePoint(Chart.AFFINE0, complex(z))
            q = SpherePoint(Chart.AFFINE1, p.in_chart(Chart.AFFINE1))
            assert abs(q.in_chart(Chart.AFFINE0) - z) <= 1e-13 * max(1.0, abs(z))

    def test_normalized_picks_smaller_coordinate(self):
        rng = np.random.default_rng(3)
        for p in random_points(rng, 500):
            assert abs(p.coord) <= 1.0 + 1e-12

    def test_hysteresis_band(self):
        p = SpherePoint(Chart.AFFINE0, 1.05)
        assert p.rechart().chart is Chart.AFFINE0
        q = SpherePoint(Chart.AFFINE0, 1.2)
        assert q.rechart().chart is Chart.AFFINE1
        assert q.rechart().coord == pytest.approx(1 / 1.2)

    def test_poles(self):
        assert SpherePoint.from_z(math.inf) == NORTH
        assert NORTH.chart is Chart.AFFINE1 and NORTH.coord == 0
        assert np.allclose(NORTH.to_vector(), [0, 0, 1])
        assert np.allclose(EAST.to_vector(), [0, 0, -1])

    def test_vector_round_trip(self):
        rng = np.random.default_rng(4)
        for p in random_points(rng, 200):
            q = SpherePoint.from_vector(p.to_vector())
            assert chordal_distance(p, q) < 1e-14
            assert np.allclose(p.to_vector(), stereographic(p.z) if np.isfinite(p.z) else [0, 0, 1])

    def test_tangent_vector_transform(self):
        z, v, h = 0.7 + 0.4j, 0.3 - 1.1j, 1e-6
        tv = TangentVector(SpherePoint(Chart.AFFINE0, z), v)
        fd = (1 / (z + h * v) - 1 / (z - h * v)) / (2 * h)
        assert tv.in_chart(Chart.AFFINE1) == pytest.approx(fd, abs=1e-8)

    @settings(max_examples=100, deadline=None)
    @given(
        st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
        st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
    )
    def test_homogeneous_scaling(self, z1, lam):
        p = SpherePoint.from_homogeneous(1.0, z1)
        q = SpherePoint.from_homogeneous(lam, lam * z1)
        assert chordal_distance(p, q) < 1e-12


class TestArea:
    def test_origin(self):
        assert fs_area_density(EAST, 1.0) == pytest.approx(1 / math.pi)
        assert fs_area_density(EAST, 3.0) == pytest.approx(3 / math.pi)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            fs_area_density(EAST, 0.0)

    @pytest.mark.parametrize("scale", [1.0, 3.0])
    def test_total_flux(self, scale):
        # unit disc of each chart, adaptive 2D quadrature in polar coordinates
        total = 0.0
        for chart in Chart:
            val, _ = integrate.dblquad(
                lambda r, t: fs_area_density(SpherePoint(chart, r * np.exp(1j * t)), scale) * r,
                0, 2 * np.pi, 0, 1, epsabs=1e-12, epsrel=1e-12,
            )
            total += val
        assert total == pytest.approx(scale, rel=1e-6)


class TestFrames:
    def test_su2_targets(self):
        rng = np.random.default_rng(5)
        for p in random_points(rng, 50):
            u = su2_sending_to_infinity(p)
            assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-14)
            assert chordal_distance(apply_su2(u, p), NORTH) < 1e-14
            v = su2_sending_to_origin(p)
            assert chordal_distance(apply_su2(v, p), EAST) < 1e-14

    def test_su2_is_isometry(self):
        rng = np.random.default_rng(6)
        pts = random_points(rng, 40)
        u = su2_sending_to_infinity(pts[0])
        for p, q in zip(pts[::2], pts[1::2]):
            assert chordal_distance(apply_su2(u, p), apply_su2(u, q)) == pytest.approx(
                chordal_distance(p, q), abs=1e-14
            )

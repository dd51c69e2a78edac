"""Two-chart atlas, Fubini-Study metric and SU(2) frames on CP^1.

Points are stored with homogeneous coordinates ``[z0 : z1]``. Chart
``AFFINE0`` uses ``z = z1/z0`` and chart ``AFFINE1`` uses ``w = z0/z1``; on
the overlap ``w = 1/z``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

CHART_BAND = 0.1
# |coord| ties within this band stay in AFFINE0 so symmetric inputs
# (e.g. roots of unity) get a stable chart.
_TIE = 1e-12


class Chart(enum.IntEnum):
    AFFINE0 = 0
    AFFINE1 = 1

    @property
    def other(self) -> "Chart":
        return Chart(1 - self.value)


@dataclass(frozen=True)
class SpherePoint:
    chart: Chart
    coord: complex

    @classmethod
    def from_z(cls, z: complex) -> "SpherePoint":
        """Point with affine coordinate ``z`` (``inf`` allowed), normalized."""
        if not np.isfinite(z):
            return cls(Chart.AFFINE1, 0j)
        return cls(Chart.AFFINE0, complex(z)).normalized()

    @classmethod
    def from_w(cls, w: complex) -> "SpherePoint":
        if not np.isfinite(w):
            return cls(Chart.AFFINE0, 0j)
        return cls(Chart.AFFINE1, complex(w)).normalized()

    @classmethod
    def from_homogeneous(cls, z0: complex, z1: complex) -> "SpherePoint":
        if abs(z0) == 0 and abs(z1) == 0:
            raise ValueError("[0:0] is not a point of CP^1")
        if abs(z1) <= abs(z0) * (1.0 + _TIE):
            return cls(Chart.AFFINE0, complex(z1 / z0))
        return cls(Chart.AFFINE1, complex(z0 / z1))

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        """Inverse of :meth:`to_vector` (unit 3-vector, north pole = [0:1])."""
        x, y, h = (float(t) for t in v)
        if h <= 0:
            return cls(Chart.AFFINE0, complex(x, y) / (1.0 - h)).normalized()
        return cls(Chart.AFFINE1, complex(x, -y) / (1.0 + h)).normalized()

    def normalized(self) -> "SpherePoint":
        """Re-chart into the chart where the coordinate is smaller."""
        if abs(self.coord) > 1.0 + _TIE:
            return SpherePoint(self.chart.other, 1.0 / self.coord)
        if self.chart is Chart.AFFINE1 and abs(self.coord) >= 1.0 - _TIE:
            return SpherePoint(Chart.AFFINE0, 1.0 / self.coord)
        return self

    def rechart(self, band: float = CHART_BAND) -> "SpherePoint":
        """Switch chart only once ``|coord|`` leaves the hysteresis band."""
        if abs(self.coord) > 1.0 + band:
            return SpherePoint(self.chart.other, 1.0 / self.coord)
        return self

    def in_chart(self, chart: Chart) -> complex:
        """Coordinate in ``chart``; ``inf`` for the chart's point at infinity."""
        if chart is self.chart:
            return self.coord
        if self.coord == 0:
            return complex(math.inf, 0.0)
        return 1.0 / self.coord

    @property
    def z(self) -> complex:
        return self.in_chart(Chart.AFFINE0)

    @property
    def w(self) -> complex:
        return self.in_chart(Chart.AFFINE1)

    def homogeneous(self) -> np.ndarray:
        """Unit-norm homogeneous representative ``(z0, z1)``."""
        if self.chart is Chart.AFFINE0:
            v = np.array([1.0, self.coord], dtype=complex)
        else:
            v = np.array([self.coord, 1.0], dtype=complex)
        return v / np.linalg.norm(v)

    def to_vector(self) -> np.ndarray:
        """Unit 3-vector by stereographic projection of the z-plane."""
        z0, z1 = self.homogeneous()
        # z = z1/z0 maps to ((2 Re z, 2 Im z, |z|^2 - 1) / (1 + |z|^2))
        s = z1 * np.conj(z0)
        return np.array([2 * s.real, 2 * s.imag, abs(z1) ** 2 - abs(z0) ** 2])


@dataclass(frozen=True)
class TangentVector:
    base: SpherePoint
    value: complex

    def in_chart(self, chart: Chart) -> complex:
        if chart is self.base.chart:
            return self.value
        # d(1/u) = -du / u^2
        return -self.value / self.base.coord**2


def chordal_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Fubini-Study chordal distance, ``|z_p - z_q| / sqrt((1+|z_p|^2)(1+|z_q|^2))``.

    Evaluated on unit homogeneous representatives so it is valid in any
    chart combination. Antipodal points are at distance 1.
    """
    u = p.homogeneous()
    v = q.homogeneous()
    return float(abs(u[0] * v[1] - u[1] * v[0]))


def chordal_matrix(points: list[SpherePoint]) -> np.ndarray:
    h = np.array([p.homogeneous() for p in points]).reshape(-1, 2)
    return np.abs(np.outer(h[:, 0], h[:, 1]) - np.outer(h[:, 1], h[:, 0]))


def conformal_factor(z, scale: float):
    """Density ``sigma`` of g = sigma |dz|^2 and omega = sigma dx^dy."""
    return scale / np.pi / (1.0 + np.abs(z) ** 2) ** 2


def fs_area_density(p: SpherePoint, scale: float) -> float:
    """Fubini-Study area density in the chart of ``p``, total flux ``scale``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return float(conformal_factor(p.coord, scale))


# -- SU(2) frames -------------------------------------------------------------


def su2_sending_to_infinity(p: SpherePoint) -> np.ndarray:
    """U in SU(2) with ``U p = [0:1]``."""
    a, b = p.homogeneous()
    return np.array([[b, -a], [np.conj(a), np.conj(b)]])


def su2_sending_to_origin(p: SpherePoint) -> np.ndarray:
    """U in SU(2) with ``U p = [1:0]``."""
    a, b = p.homogeneous()
    return np.array([[np.conj(a), np.conj(b)], [-b, a]])


def apply_su2(u: np.ndarray, p: SpherePoint) -> SpherePoint:
    z0, z1 = u @ p.homogeneous()
    return SpherePoint.from_homogeneous(z0, z1)


def affine_image(u: np.ndarray, points: list[SpherePoint]) -> np.ndarray:
    """z-coordinates (chart AFFINE0) of ``U p`` for each point."""
    h = np.array([p.homogeneous() for p in points]).reshape(-1, 2) @ u.T
    with np.errstate(divide="ignore", invalid="ignore"):
        return h[:, 1] / h[:, 0]


def points_from_affine(u: np.ndarray, zs) -> list[SpherePoint]:
    """Inverse of :func:`affine_image`: ``U^-1 [1 : z]`` for each ``z``."""
    zs = np.asarray(zs, dtype=complex)
    h = np.stack([np.ones_like(zs), zs], axis=1) @ np.conj(u)
    return [SpherePoint.from_homogeneous(a, b) for a, b in h]

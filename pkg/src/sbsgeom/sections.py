"""Holomorphic sections of O(d) on CP^1 and the forms they induce.

Conventions used throughout the package:

* ``|alpha|_h = |P(z0, z1)| / (|z0|^2 + |z1|^2)^(d/2)`` (Fubini-Study hermitian
  structure), potential ``psi = -ln |alpha|_h``.
* ``rho = d' ln |alpha|_h^2``, so ``Re rho = d ln |alpha|_h = -d psi``.
* Liouville form ``lambda = -Im rho``; it satisfies ``d lambda = 2 pi omega``
  with ``omega`` the Fubini-Study form of total area ``d``.

In a chart with affine polynomial ``p`` one has ``rho = A dz`` where
``A = p'/p - d conj(z) / (1 + |z|^2)``; every derivative below is taken
analytically from ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DivisorPole, IllConditioned
from .sphere import Chart, SpherePoint, chordal_matrix

NORM_POLE_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-10
# Backward-error threshold for accepting a root cluster as one multiple
# root; merges simple roots closer than ~2e-7.
MULTIPLE_ROOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class BinaryForm:
    """Homogeneous ``P(z0, z1) = sum_k c_k z0^(d-k) z1^k``."""

    coefficients: tuple[complex, ...]

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if len(coeffs) < 2:
            raise ValueError("a binary form needs degree >= 1")
        if not any(c != 0 for c in coeffs):
            raise ValueError("the zero form is not a section")
        if not all(np.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @cached_property
    def coeffs(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def chart_coefficients(self, chart: Chart) -> np.ndarray:
        """Ascending coefficients of the affine polynomial in ``chart``."""
        if chart is Chart.AFFINE0:
            return self.coeffs
        return self.coeffs[::-1].copy()

    def __eq__(self, other):
        if not isinstance(other, BinaryForm):
            return NotImplemented
        return self.coefficients == other.coefficients

    def __hash__(self):
        return hash(self.coefficients)

    def __repr__(self):
        return f"BinaryForm({list(self.coefficients)!r})"

    # -- constructors and transformations --------------------------------

    @classmethod
    def from_roots(cls, roots, leading: complex = 1.0) -> "BinaryForm":
        """Form vanishing at the given affine points (``inf`` allowed)."""
        poly = np.array([leading], dtype=complex)
        deficit = 0
        for r in roots:
            if np.isfinite(r):
                poly = npoly.polymul(poly, [-r, 1.0])
            else:
                deficit += 1
        poly = np.concatenate([poly, np.zeros(deficit, dtype=complex)])
        return cls(tuple(poly))

    def scaled(self, factor: complex) -> "BinaryForm":
        return BinaryForm(tuple(self.coeffs * factor))

    def normalized(self) -> "BinaryForm":
        return self.scaled(1.0 / self.norm)

    def transformed(self, u: np.ndarray) -> "BinaryForm":
        """Form ``P'`` with ``P'(U x) = P(x)`` for ``U`` in SU(2).

        ``|alpha|_h`` is U(2)-invariant, so the geometry of ``P'`` is the
        image of the geometry of ``P`` under ``U``.
        """
        d = self.degree
        uh = np.conj(u).T
        # (z0, z1) = U^H (1, t)
        lin0 = np.array([uh[0, 0], uh[0, 1]])
        lin1 = np.array([uh[1, 0], uh[1, 1]])
        out = np.zeros(d + 1, dtype=complex)
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            term = npoly.polymul(npoly.polypow(lin0, d - k), npoly.polypow(lin1, k))
            out[: len(term)] += c * term
        return BinaryForm(tuple(out))

    def rotated(self, theta: float) -> "BinaryForm":
        """Image of the section under the isometry ``z -> e^(i theta) z``."""
        k = np.arange(self.degree + 1)
        return BinaryForm(tuple(self.coeffs * np.exp(-1j * k * theta)))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BinaryForm":
        coeffs = tuple(complex(re, im) for re, im in data["coefficients"])
        if "degree" in data and int(data["degree"]) != len(coeffs) - 1:
            raise ValueError(
                f"degree {data['degree']} does not match {len(coeffs)} coefficients"
            )
        return cls(coeffs)


@dataclass(frozen=True)
class Divisor:
    points: tuple[tuple[SpherePoint, int], ...]

    @property
    def locations(self) -> list[SpherePoint]:
        return [p for p, _ in self.points]

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.points]

    @property
    def degree(self) -> int:
        return sum(self.multiplicities)

    @property
    def is_simple(self) -> bool:
        return all(m == 1 for m in self.multiplicities)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class OneFormSample:
    base: SpherePoint
    real_part: np.ndarray
    imag_part: np.ndarray

    def real_pairing(self, v: complex) -> float:
        return float(self.real_part[0] * v.real + self.real_part[1] * v.imag)

    def imag_pairing(self, v: complex) -> float:
        return float(self.imag_part[0] * v.real + self.imag_part[1] * v.imag)


# -- array kernels -------------------------------------------------------------


def horner(a: np.ndarray, z, derivatives: int = 0):
    """Evaluate an ascending-coefficient polynomial and its derivatives."""
    z = np.asarray(z, dtype=complex)
    p = np.zeros_like(z) + a[-1]
    d1 = np.zeros_like(z)
    d2 = np.zeros_like(z)
    for c in a[-2::-1]:
        if derivatives >= 2:
            d2 = d2 * z + 2 * d1
        if derivatives >= 1:
            d1 = d1 * z + p
        p = p * z + c
    if derivatives == 0:
        return p
    if derivatives == 1:
        return p, d1
    return p, d1, d2


def log_norm(a: np.ndarray, d: int, z):
    """``ln |alpha|_h`` in a chart with affine coefficients ``a``."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(horner(a, z))) - 0.5 * d * np.log1p(np.abs(z) ** 2)


def rho_coefficient(a: np.ndarray, d: int, z):
    """``A`` with ``rho = A dz``."""
    z = np.asarray(z, dtype=complex)
    p, p1 = horner(a, z, 1)
    return p1 / p - d * np.conj(z) / (1.0 + np.abs(z) ** 2)


def psi_derivatives(a: np.ndarray, d: int, z):
    """Return ``(A, psi_zz, psi_zzbar)`` in the chart of ``a``.

    ``psi_z = -A/2``; the real Hessian of ``psi`` has eigenvalues
    ``2 psi_zzbar +- 2 |psi_zz|``.
    """
    z = np.asarray(z, dtype=complex)
    p, p1, p2 = horner(a, z, 2)
    r = p1 / p
    s = 1.0 + np.abs(z) ** 2
    A = r - d * np.conj(z) / s
    psi_zz = -0.5 * (p2 / p - r * r) - 0.5 * d * np.conj(z) ** 2 / s**2
    psi_zzbar = 0.5 * d / s**2
    return A, psi_zz, psi_zzbar


def _chart(form: BinaryForm, p: SpherePoint):
    return form.chart_coefficients(p.chart), form.degree


# -- operations ----------------------------------------------------------------


def section_norm(form: BinaryForm, p: SpherePoint) -> float:
    """Fubini-Study norm ``|alpha|_h`` at ``p``."""
    a, d = _chart(form, p)
    return float(abs(horner(a, p.coord)) / (1.0 + abs(p.coord) ** 2) ** (0.5 * d))


def _require_off_divisor(form: BinaryForm, p: SpherePoint) -> None:
    if section_norm(form, p) < NORM_POLE_TOL * form.norm:
        raise DivisorPole(f"{p} lies on the zero divisor")


def kahler_potential(form: BinaryForm, p: SpherePoint) -> float:
    """``psi = -ln |alpha|_h``."""
    _require_off_divisor(form, p)
    return -math.log(section_norm(form, p))


def rho_form(form: BinaryForm, p: SpherePoint) -> OneFormSample:
    """Sample of ``rho = d' ln |alpha|_h^2`` as real and imaginary covectors."""
    _require_off_divisor(form, p)
    a, d = _chart(form, p)
    A = complex(rho_coefficient(a, d, p.coord))
    # A (dx + i dy)
    return OneFormSample(
        base=p,
        real_part=np.array([A.real, -A.imag]),
        imag_part=np.array([A.imag, A.real]),
    )


def liouville_form(form: BinaryForm, p: SpherePoint) -> np.ndarray:
    """Covector of ``lambda = -Im rho`` in the chart of ``p``."""
    return -rho_form(form, p).imag_part


# -- zeros ---------------------------------------------------------------------


def _taylor(a: np.ndarray, c: complex) -> np.ndarray:
    """Coefficients of ``p(c + x)`` in ascending powers of ``x``."""
    out = np.array([a[-1]], dtype=complex)
    for coef in a[-2::-1]:
        # out(x) * (x + c) + coef
        out = np.concatenate([[0], out]) + np.concatenate([c * out, [0]])
        out[0] += coef
    return out


def _newton(a: np.ndarray, z: complex, order: int = 0, max_steps: int = 100):
    """Newton iteration on the ``order``-th derivative of the polynomial."""
    b = a
    for _ in range(order):
        b = npoly.polyder(b)
    mags = np.abs(b)
    for _ in range(max_steps):
        p, p1 = horner(b, z, 1)
        p, p1 = complex(p), complex(p1)
        if p == 0:
            return z, True
        if p1 == 0:
            return z, False
        step = p / p1
        z = z - step
        if abs(step) <= 4e-16 * (1.0 + abs(z)):
            return z, True
        # residual at rounding level: further steps only chase noise
        floor = 8 * np.finfo(float).eps * float(npoly.polyval(abs(z), mags))
        if abs(complex(horner(b, z))) <= floor:
            return z, True
    return z, False


def _chart_point(p: SpherePoint, chart: Chart) -> complex:
    return p.coord if p.chart is chart else 1.0 / p.coord


def _resolve_cluster(form: BinaryForm, pts: list[SpherePoint], radius: float):
    """Split ``pts`` into (point, multiplicity) pairs, polishing each."""
    n = len(pts)
    if n == 1:
        return [(_polish_simple(form, pts[0]), 1)]
    dist = chordal_matrix(pts)
    labels = list(range(n))

    def find(i):
        while labels[i] != i:
            labels[i] = labels[labels[i]]
            i = labels[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] < radius:
                labels[find(i)] = find(j)
    groups: dict[int, list[SpherePoint]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(pts[i])
    out = []
    for grp in groups.values():
        if len(grp) == 1:
            out.append((_polish_simple(form, grp[0]), 1))
            continue
        merged = _try_multiple(form, grp)
        if merged is not None:
            out.append((merged, len(grp)))
        elif radius > 1e-9:
            out.extend(_resolve_cluster(form, grp, radius / 30.0))
        else:
            out.extend((_polish_simple(form, q), 1) for q in grp)
    return out


def _try_multiple(form: BinaryForm, grp: list[SpherePoint]) -> SpherePoint | None:
    m = len(grp)
    chart = SpherePoint(grp[0].chart, grp[0].coord).normalized().chart
    a = form.chart_coefficients(chart)
    c0 = complex(np.mean([_chart_point(q, chart) for q in grp]))
    c, ok = _newton(a, c0, order=m - 1)
    if not ok or not np.isfinite(c):
        return None
    t = np.abs(_taylor(a, c))
    if t[:m].max() <= MULTIPLE_ROOT_TOL * t.max():
        return SpherePoint(chart, c).normalized()
    return None


def _polish_simple(form: BinaryForm, p: SpherePoint) -> SpherePoint:
    a = form.chart_coefficients(p.chart)
    z, ok = _newton(a, p.coord)
    if not ok:
        raise IllConditioned(f"Newton polishing did not converge near {p}")
    q = SpherePoint(p.chart, z)
    residual = abs(complex(horner(a, z)))
    if residual > ROOT_RESIDUAL_TOL * form.norm * max(1.0, abs(z)) ** form.degree:
        raise IllConditioned(f"root residual {residual:.3e} too large at {q}")
    return q.normalized()


def _root_sort_key(p: SpherePoint):
    ang = math.atan2(p.coord.imag, p.coord.real) % (2 * math.pi)
    if ang > 2 * math.pi - 1e-9:
        ang = 0.0
    return (int(p.chart), round(ang, 9), round(abs(p.coord), 9))


def divisor_roots(form: BinaryForm) -> Divisor:
    """All zeros of the section with multiplicities.

    Companion-matrix eigenvalues of the affine polynomial seed the search;
    roots outside the unit disc are re-solved in the opposite chart.
    Clusters of raw roots are tested for being a single multiple root by a
    Taylor-coefficient backward-error test, otherwise polished one by one.
    """
    d = form.degree
    a = form.coeffs
    nz = np.flatnonzero(a)
    top = int(nz[-1])
    raw: list[SpherePoint] = []
    if top > 0:
        for r in np.roots(a[: top + 1][::-1]):
            r = complex(r)
            if abs(r) <= 1.0:
                raw.append(SpherePoint(Chart.AFFINE0, r))
            else:
                raw.append(SpherePoint(Chart.AFFINE1, 1.0 / r))
    raw.extend(SpherePoint(Chart.AFFINE1, 0j) for _ in range(d - top))
    resolved = _resolve_cluster(form, raw, 1e-3)
    resolved.sort(key=lambda pm: _root_sort_key(pm[0]))
    return Divisor(tuple(resolved))


def discriminant_distance(form: BinaryForm, divisor: Divisor | None = None) -> float:
    """Smallest chordal distance between zeros; 0 for a multiple zero.

    A single zero (degree 1) returns the maximal distance 1.
    """
    div = divisor if divisor is not None else divisor_roots(form)
    if not div.is_simple:
        return 0.0
    if len(div) < 2:
        return 1.0
    dist = chordal_matrix(div.locations)
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())

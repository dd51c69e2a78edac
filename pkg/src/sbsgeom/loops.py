"""Loop calculus on CP^1 minus the divisor.

Every loop integral is evaluated in an SU(2) frame that moves a point far
from the loop to infinity, so the loop is a bounded, smooth periodic
curve in the frame's affine chart. Integrals are periodic trapezoid sums
with spectral differentiation of the samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (
    AmbiguousWinding,
    DivisorPole,
    NearDiscriminant,
    NoExactRadius,
    ResolutionTooCoarse,
    SelfIntersecting,
)
from .sections import BinaryForm, Divisor, divisor_roots, rho_coefficient
from .sphere import (
    Chart,
    SpherePoint,
    affine_image,
    conformal_factor,
    points_from_affine,
    su2_sending_to_infinity,
    su2_sending_to_origin,
)

MIN_SAMPLES = 64
MAX_GAP = 0.05
DIVISOR_CLEARANCE = 1e-6
RICHARDSON_TOL = 1e-6
WINDING_RESIDUAL = 0.05
MAX_EXACT_SAMPLES = 8192


@dataclass(frozen=True)
class LoopCurve:
    """Closed curve given by ``N`` uniformly parameterized samples.

    The closing sample ``points[N] == points[0]`` is implicit.
    """

    points: tuple[SpherePoint, ...]

    def __post_init__(self):
        n = len(self.points)
        if n < MIN_SAMPLES or n % 2:
            raise ValueError(f"a loop needs an even number >= {MIN_SAMPLES} of samples, got {n}")
        h = _homogeneous(self.points)
        nxt = np.roll(h, -1, axis=0)
        gaps = np.abs(h[:, 0] * nxt[:, 1] - h[:, 1] * nxt[:, 0])
        if gaps.max() >= MAX_GAP:
            raise ValueError(f"adjacent samples {gaps.max():.3g} apart; refine the loop")

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_affine(cls, zs, chart: Chart = Chart.AFFINE0) -> "LoopCurve":
        pts = [SpherePoint(chart, complex(z)).normalized() for z in np.asarray(zs)]
        return cls(tuple(pts))

    @classmethod
    def from_frame(cls, u: np.ndarray, zs) -> "LoopCurve":
        return cls(tuple(points_from_affine(u, zs)))

    def reversed(self) -> "LoopCurve":
        return LoopCurve(self.points[::-1])

    def to_json(self) -> dict:
        return {
            "n": len(self.points),
            "points": [[int(p.chart), p.coord.real, p.coord.imag] for p in self.points],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LoopCurve":
        pts = tuple(SpherePoint(Chart(int(c)), complex(re, im)) for c, re, im in data["points"])
        if "n" in data and int(data["n"]) != len(pts):
            raise ValueError("loop 'n' does not match the number of points")
        return cls(pts)


@dataclass(frozen=True)
class LoopReport:
    action: float
    enclosed_area: float
    winding: tuple[int, ...]
    holonomy: complex
    is_exact: bool
    is_d_monotonic: bool
    stokes_area: float
    length: float

    def to_json(self, total: float | None = None) -> dict:
        out = {
            "action": self.action,
            "enclosed_area": self.enclosed_area,
            "winding": list(self.winding),
            "holonomy": [self.holonomy.real, self.holonomy.imag],
            "is_exact": self.is_exact,
            "is_d_monotonic": self.is_d_monotonic,
            "stokes_area": self.stokes_area,
            "length": self.length,
        }
        if total is not None:
            out["enclosed_area_fraction"] = self.enclosed_area / total
        return out


def _homogeneous(points) -> np.ndarray:
    return np.array([p.homogeneous() for p in points]).reshape(-1, 2)


# -- frames ----------------------------------------------------------------------


def _choose_pole(points) -> SpherePoint:
    """Point of the sphere roughly farthest from every sample."""
    vecs = np.array([p.to_vector() for p in points])
    cands = [np.eye(3)[i] * s for i in range(3) for s in (1.0, -1.0)]
    mean = vecs.mean(axis=0)
    if np.linalg.norm(mean) > 1e-8:
        cands.append(-mean / np.linalg.norm(mean))
    _, evecs = np.linalg.eigh(vecs.T @ vecs)
    cands.extend([evecs[:, 0], -evecs[:, 0]])
    best = max(cands, key=lambda c: np.min(np.linalg.norm(vecs - c, axis=1)))
    return SpherePoint.from_vector(best)


@dataclass
class _Frame:
    u: np.ndarray
    form: BinaryForm
    zs: np.ndarray
    dz: np.ndarray
    zeros: np.ndarray
    mult: np.ndarray
    divisor: Divisor


def spectral_derivative(zs: np.ndarray) -> np.ndarray:
    """``dz/dtheta`` of periodic samples on ``theta = 2 pi k / N``."""
    n = len(zs)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(zs))


def _frame(
    form: BinaryForm, loop: LoopCurve, divisor: Divisor | None = None, clearance: bool = True
) -> _Frame:
    div = divisor if divisor is not None else divisor_roots(form)
    h = _homogeneous(loop.points)
    for q, _ in div.points if clearance else ():
        v = q.homogeneous()
        if np.min(np.abs(h[:, 0] * v[1] - h[:, 1] * v[0])) < DIVISOR_CLEARANCE:
            raise DivisorPole(f"loop passes within {DIVISOR_CLEARANCE} of the zero {q}")
    u = su2_sending_to_infinity(_choose_pole(loop.points))
    zs = affine_image(u, list(loop.points))
    zeros = affine_image(u, div.locations)
    return _Frame(
        u=u,
        form=form.transformed(u),
        zs=zs,
        dz=spectral_derivative(zs),
        zeros=zeros,
        mult=np.array(div.multiplicities),
        divisor=div,
    )


# -- planar kernels ----------------------------------------------------------------


def _action(a, d, zs, dz) -> float:
    A = rho_coefficient(a, d, zs)
    return float(-np.mean((A * dz).imag) * 2 * np.pi)


def _winding(zs, dz, point: complex) -> tuple[int, float]:
    if not np.isfinite(point):
        return 0, 0.0
    val = float(np.mean((dz / (zs - point)).imag))
    n = round(val)
    return int(n), abs(val - n)


def _signed_area(zs, dz, scale: float) -> float:
    """omega-area of the bounded region, positive for counterclockwise loops."""
    integrand = (np.conj(zs) * dz).imag / (1.0 + np.abs(zs) ** 2)
    return float(scale / (2 * np.pi) * np.mean(integrand) * 2 * np.pi)


def _length(zs, dz, scale: float) -> float:
    return float(np.mean(np.sqrt(conformal_factor(zs, scale)) * np.abs(dz)) * 2 * np.pi)


def _self_intersects(zs: np.ndarray) -> bool:
    a = zs
    b = np.roll(zs, -1)
    n = len(zs)

    def cross(o, p, q):
        return ((p - o).conj() * (q - o)).imag

    d1 = cross(a[:, None], b[:, None], a[None, :])
    d2 = cross(a[:, None], b[:, None], b[None, :])
    d3 = cross(a[None, :], b[None, :], a[:, None])
    d4 = cross(a[None, :], b[None, :], b[:, None])
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    hit &= (gap > 1) & (gap < n - 1)
    return bool(hit.any())


def _indicators(fr: _Frame, orientation: int) -> np.ndarray:
    """Intersection number of each zero with the disc left of the loop."""
    out = []
    for z in fr.zeros:
        n, res = _winding(fr.zs, fr.dz, z)
        if res >= WINDING_RESIDUAL:
            raise AmbiguousWinding(f"winding residual {res:.3f} around frame point {z}")
        out.append(n + (1 - orientation) // 2)
    return np.array(out, dtype=int)


# -- operations -----------------------------------------------------------------------


def action_integral(form: BinaryForm, loop: LoopCurve, divisor: Divisor | None = None) -> float:
    """``integral of lambda`` along the loop, oriented by sample order.

    Raises
    ------
    ResolutionTooCoarse
        If the N and N/2 sample quadratures differ by more than 1e-6.
    """
    fr = _frame(form, loop, divisor)
    a, d = fr.form.coeffs, form.degree
    full = _action(a, d, fr.zs, fr.dz)
    half_z = fr.zs[::2]
    half = _action(a, d, half_z, spectral_derivative(half_z))
    if abs(full - half) > RICHARDSON_TOL:
        raise ResolutionTooCoarse(f"action {full:.12g} vs {half:.12g} at N/2; refine the loop")
    return full


def real_rho_integral(form: BinaryForm, loop: LoopCurve) -> float:
    """``integral of Re rho`` (zero for closed loops, ``Re rho`` being exact).

    Raises
    ------
    ResolutionTooCoarse
        If the N and N/2 sample quadratures differ by more than 1e-9.
    """
    fr = _frame(form, loop)

    def quad(zs, dz):
        A = rho_coefficient(fr.form.coeffs, form.degree, zs)
        return float(np.mean((A * dz).real) * 2 * np.pi)

    full = quad(fr.zs, fr.dz)
    half_z = fr.zs[::2]
    half = quad(half_z, spectral_derivative(half_z))
    if abs(full - half) > 1e-9:
        raise ResolutionTooCoarse(f"Re rho integral {full:.3g} vs {half:.3g} at N/2; refine the loop")
    return full


def winding_numbers(form: BinaryForm, loop: LoopCurve, divisor: Divisor | None = None) -> tuple[int, ...]:
    """Signed winding of the loop around each zero.

    Measured in the z-plane (chart AFFINE0); if the loop runs through the
    neighbourhood of ``z = inf``, the w-plane is used instead.
    """
    fr = _frame(form, loop, divisor)
    raw = []
    for z in fr.zeros:
        n, res = _winding(fr.zs, fr.dz, z)
        if res >= WINDING_RESIDUAL:
            raise AmbiguousWinding(f"winding residual {res:.3f}; refine the loop")
        raw.append(n)
    for ref in (SpherePoint(Chart.AFFINE1, 0j), SpherePoint(Chart.AFFINE0, 0j)):
        (zr,) = affine_image(fr.u, [ref])
        n, res = _winding(fr.zs, fr.dz, zr)
        if res < WINDING_RESIDUAL:
            return tuple(int(m - n) for m in raw)
    return tuple(raw)


def orientation(form: BinaryForm, loop: LoopCurve) -> int:
    """+1 if the disc left of the loop is the frame's bounded region."""
    fr = _frame(form, loop)
    return 1 if _signed_area(fr.zs, fr.dz, 1.0) > 0 else -1


def enclosed_area(
    form: BinaryForm, loop: LoopCurve, scale: float | None = None, divisor: Divisor | None = None
) -> float:
    """omega-area of the disc to the left of the loop (total area ``d``).

    Computed from the action and the winding data,
    ``area = action / 2 pi + sum_i m_i [p_i in disc]``.
    """
    fr = _frame(form, loop, divisor)
    if _self_intersects(fr.zs):
        raise SelfIntersecting("loop is not embedded at sample resolution")
    orient = 1 if _signed_area(fr.zs, fr.dz, 1.0) > 0 else -1
    ind = _indicators(fr, orient)
    act = action_integral(form, loop, fr.divisor)
    area = act / (2 * np.pi) + float(np.dot(ind, fr.mult))
    if scale is not None:
        area *= scale / form.degree
    return area


def quadrature_area(form: BinaryForm, loop: LoopCurve, scale: float | None = None) -> float:
    """Left-disc area from a smooth primitive of omega (no use of lambda)."""
    s = float(form.degree if scale is None else scale)
    fr = _frame(form, loop)
    signed = _signed_area(fr.zs, fr.dz, s)
    return signed if signed > 0 else s + signed


def holonomy(form: BinaryForm, loop: LoopCurve) -> complex:
    """Parallel transport ``exp(-i action)`` of the prequantum connection."""
    return complex(np.exp(-1j * action_integral(form, loop)))


def is_bohr_sommerfeld(form: BinaryForm, loop: LoopCurve, tol: float = 1e-6) -> bool:
    return abs(holonomy(form, loop) - 1.0) < tol


def check_proposition(
    form: BinaryForm, loop: LoopCurve, tol: float = 1e-6, action_tol: float | None = None
) -> LoopReport:
    """Exactness and D-monotonicity of an embedded loop, computed independently.

    Exactness comes from the action quadrature. D-monotonicity compares
    the left-disc area from a smooth primitive of omega with the number of
    zeros inside; the two flags should agree for every embedded loop.
    Tolerances are ``tol`` (area) and ``action_tol`` (default ``2 pi tol``),
    both scaled by ``max(1, length)``.
    """
    d = form.degree
    fr = _frame(form, loop)
    if _self_intersects(fr.zs):
        raise SelfIntersecting("loop is not embedded at sample resolution")
    signed = _signed_area(fr.zs, fr.dz, float(d))
    orient = 1 if signed > 0 else -1
    area = signed if orient > 0 else d + signed
    ind = _indicators(fr, orient)
    inside = float(np.dot(ind, fr.mult))
    act = action_integral(form, loop, fr.divisor)
    length = _length(fr.zs, fr.dz, float(d))
    factor = max(1.0, length)
    a_tol = 2 * np.pi * tol if action_tol is None else action_tol
    return LoopReport(
        action=act,
        enclosed_area=area,
        winding=tuple(int(i) for i in ind),
        holonomy=complex(np.exp(-1j * act)),
        is_exact=abs(act) < a_tol * factor,
        is_d_monotonic=abs(area - inside) < tol * factor,
        stokes_area=act / (2 * np.pi) + inside,
        length=length,
    )


def loop_inner_product(form: BinaryForm, loop: LoopCurve, f1, f2, scale: float | None = None) -> float:
    """``integral f1 f2 dmu`` for the Fubini-Study arc length of the loop.

    Both functions are first projected to zero mean against the same
    measure.
    """
    s = float(form.degree if scale is None else scale)
    fr = _frame(form, loop, clearance=False)
    w = np.sqrt(conformal_factor(fr.zs, s)) * np.abs(fr.dz) * (2 * np.pi / len(fr.zs))
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    f1 = f1 - np.dot(w, f1) / w.sum()
    f2 = f2 - np.dot(w, f2) / w.sum()
    return float(np.dot(w, f1 * f2))


def loop_length(form: BinaryForm, loop: LoopCurve, scale: float | None = None) -> float:
    fr = _frame(form, loop, clearance=False)
    return _length(fr.zs, fr.dz, float(form.degree if scale is None else scale))


# -- exact loops -------------------------------------------------------------------------


def cap_loop(center: SpherePoint, radius: float, n: int = 256) -> LoopCurve:
    """Boundary of the geodesic disc ``|zeta| < radius``, zeta centered at ``center``.

    Counterclockwise around ``center``; the disc has area fraction
    ``radius^2 / (1 + radius^2)``.
    """
    u = su2_sending_to_origin(center)
    theta = 2 * np.pi * np.arange(n) / n
    return LoopCurve.from_frame(u, radius * np.exp(1j * theta))


def _angle(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.arccos(np.clip(np.dot(p, q), -1.0, 1.0)))


def _best_center(target: np.ndarray, others: list[np.ndarray], cap: float):
    """Center of a cap of angular radius ``cap`` with ``target`` deepest inside
    and every other zero farthest outside."""

    def margin(c):
        c = c / np.linalg.norm(c)
        m = cap - _angle(c, target)
        for o in others:
            m = min(m, _angle(c, o) - cap)
        return m

    # Orthonormal frame (target, e1, e2) for the seed search.
    e1 = np.cross(target, [0.0, 0.0, 1.0])
    if np.linalg.norm(e1) < 1e-8:
        e1 = np.cross(target, [1.0, 0.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(target, e1)
    best_c, best_m = target, margin(target)
    for dist in np.linspace(0.0, cap, 16, endpoint=False)[1:]:
        for phi in np.linspace(0.0, 2 * np.pi, 48, endpoint=False):
            c = np.cos(dist) * target + np.sin(dist) * (np.cos(phi) * e1 + np.sin(phi) * e2)
            m = margin(c)
            if m > best_m:
                best_c, best_m = c, m
    res = optimize.minimize(lambda c: -margin(c), best_c, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    if -res.fun > best_m:
        best_c, best_m = res.x / np.linalg.norm(res.x), -res.fun
    return best_c, best_m


def _circle_action(a, d, r, n):
    zs = r * np.exp(2j * np.pi * np.arange(n) / n)
    dz = 1j * zs
    return _action(a, d, zs, dz)


def construct_exact_loop(
    form: BinaryForm,
    zero_index: int,
    n_samples: int = 256,
    tol: float = 1e-6,
    divisor: Divisor | None = None,
) -> LoopCurve:
    """Smooth exact loop surrounding exactly one zero.

    Searches the one-parameter family of round caps about a center (the
    zero itself when the other zeros are far enough, otherwise the center
    that best separates the zero from the rest), bisects on the cap radius
    for zero action, then Newton-polishes the radius.

    ``n_samples`` is doubled (up to ``MAX_EXACT_SAMPLES``) while the
    Richardson check on the final loop fails.

    Raises
    ------
    NoExactRadius
        If the action keeps one sign across the admissible radii.
    """
    div = divisor if divisor is not None else divisor_roots(form)
    if not 0 <= zero_index < len(div):
        raise IndexError(f"zero_index {zero_index} out of range for {len(div)} zeros")
    if div.multiplicities[zero_index] != 1:
        raise NearDiscriminant(f"zero {zero_index} is not simple")
    d = form.degree
    locs = [p.to_vector() for p in div.locations]
    target = locs[zero_index]
    others = [v for i, v in enumerate(locs) if i != zero_index]
    # a cap of area 1 (out of d) has angular radius cap_angle
    cap_angle = math.acos(max(-1.0, 1.0 - 2.0 / d))
    gap = min((_angle(target, o) for o in others), default=math.pi)
    if d == 1 or gap > 1.05 * cap_angle:
        center = target
    else:
        center, m = _best_center(target, others, cap_angle)
        if m <= 0:
            raise NoExactRadius(
                "no cap of unit area separates this zero from the others",
                {"cap_angle": cap_angle, "margin": m},
            )
    c_pt = SpherePoint.from_vector(center)
    u = su2_sending_to_origin(c_pt)
    a = form.transformed(u).coeffs
    inner = _angle(center, target)
    outer = min((_angle(center, o) for o in others), default=math.pi)
    lo_ang = inner + 0.02 * (outer - inner)
    hi_ang = min(outer - 0.02 * (outer - inner), 0.999 * math.pi)
    r_lo, r_hi = math.tan(lo_ang / 2), math.tan(hi_ang / 2)
    f_lo = _circle_action(a, d, r_lo, n_samples)
    f_hi = _circle_action(a, d, r_hi, n_samples)
    if not (f_lo < 0 < f_hi):
        raise NoExactRadius(
            "action does not change sign over the admissible radii",
            {"r_lo": r_lo, "r_hi": r_hi, "action_lo": f_lo, "action_hi": f_hi},
        )
    for _ in range(200):
        mid = 0.5 * (r_lo + r_hi)
        f_mid = _circle_action(a, d, mid, n_samples)
        if f_mid < 0:
            r_lo = mid
        else:
            r_hi = mid
        if r_hi - r_lo < 1e-7 * (1.0 + r_hi):
            break
    r = 0.5 * (r_lo + r_hi)
    n = n_samples
    while True:
        for _ in range(8):
            f = _circle_action(a, d, r, n)
            if abs(f) < 1e-13:
                break
            dr = 1e-7 * (1.0 + r)
            slope = (_circle_action(a, d, r + dr, n) - _circle_action(a, d, r - dr, n)) / (2 * dr)
            r -= f / slope
        loop = cap_loop(c_pt, r, n)
        try:
            act = action_integral(form, loop, div)
            break
        except ResolutionTooCoarse:
            # caps squeezed between close zeros need finer sampling
            if n >= MAX_EXACT_SAMPLES:
                raise
            n *= 2
    if abs(act) >= tol:
        raise NoExactRadius(f"polished loop has action {act:.3e}", {"radius": r, "action": act})
    return loop

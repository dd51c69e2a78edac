"""Gradient flow of the Kahler potential and its Lagrangian skeleton."""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rk
from .errors import DegenerateCritical, NearDiscriminant, SbsError, SkeletonIncomplete
from .sections import (
    BinaryForm,
    Divisor,
    discriminant_distance,
    divisor_roots,
    log_norm,
    psi_derivatives,
    rho_form,
)
from .sphere import (
    CHART_BAND,
    Chart,
    SpherePoint,
    TangentVector,
    chordal_distance,
    conformal_factor,
)

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9
DEDUP_DISTANCE = 1e-7
DISCRIMINANT_GUARD = 1e-6


class CriticalSetIncomplete(SbsError):
    """Morse count of critical points is inconsistent with the topology."""


def worker_count() -> int:
    """Thread cap from ``SBS_THREADS`` (default: min(4, cpu count))."""
    env = os.environ.get("SBS_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class CriticalPoint:
    location: SpherePoint
    index: int
    value: float
    hessian_eigenvalues: tuple[float, float]
    unstable_direction: TangentVector | None = None

    @property
    def kind(self) -> str:
        return "minimum" if self.index == 0 else "saddle"


class Terminus(enum.Enum):
    CRITICAL = "critical"
    DIVISOR = "divisor"
    UNRESOLVED = "unresolved"


class Direction(enum.Enum):
    UP = 1
    DOWN = -1


@dataclass(frozen=True)
class FlowControls:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float = 1e-3
    psi_cap: float = 40.0
    # Double precision cannot resolve |alpha|_h ~ e^-40 around a zero at
    # |z| ~ 1, so proximity to the divisor also ends an escaping trajectory.
    divisor_tol: float = 1e-9
    max_steps: int = 10**6
    grad_tol: float = 1e-9
    critical_tol: float = 1e-6
    scale: float | None = None
    critical_points: tuple[CriticalPoint, ...] | None = None


@dataclass(frozen=True)
class Trajectory:
    times: tuple[float, ...]
    points: tuple[SpherePoint, ...]
    psi: tuple[float, ...]
    velocities: tuple[complex, ...]
    origin: CriticalPoint | None
    terminus: Terminus
    target: CriticalPoint | None = None

    @property
    def samples(self) -> list[tuple[float, SpherePoint]]:
        return list(zip(self.times, self.points))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class SkeletonArc:
    """Closure of the unstable manifold of one saddle.

    ``branches`` are the two downward separatrices; the arc runs from the
    end of the first branch, through the saddle, to the end of the second.
    """

    saddle: CriticalPoint
    branches: tuple[Trajectory, Trajectory]
    sbs_residual: float = 0.0
    saddle_connection: bool = False

    @property
    def endpoints(self) -> tuple[CriticalPoint, CriticalPoint]:
        return self.branches[0].target, self.branches[1].target

    def points(self) -> list[SpherePoint]:
        first, second = self.branches
        return list(first.points[::-1]) + [self.saddle.location] + list(second.points)

    def psi_values(self) -> list[float]:
        first, second = self.branches
        return list(first.psi[::-1]) + [self.saddle.value] + list(second.psi)


@dataclass(frozen=True)
class Skeleton:
    critical_points: tuple[CriticalPoint, ...]
    arcs: tuple[SkeletonArc, ...] = field(default=())

    @property
    def minima(self) -> list[CriticalPoint]:
        return [c for c in self.critical_points if c.index == 0]

    @property
    def saddles(self) -> list[CriticalPoint]:
        return [c for c in self.critical_points if c.index == 1]


# -- local field evaluation ----------------------------------------------------


def _scale(form: BinaryForm, scale: float | None) -> float:
    return float(form.degree if scale is None else scale)


def _grad_coords(a, d, z, scale):
    """Metric gradient of psi in chart coordinates (vectorized)."""
    A, _, _ = psi_derivatives(a, d, z)
    return -np.conj(A) / conformal_factor(z, scale)


def _field(a: list[complex], d: int, sign: float, scale: float):
    """Pure-Python closure for ``sign * grad psi`` used by the stepper."""
    k = sign * math.pi / scale

    def f(z: complex) -> complex:
        p = a[-1]
        p1 = 0j
        for c in a[-2::-1]:
            p1 = p1 * z + p
            p = p * z + c
        r2 = z.real * z.real + z.imag * z.imag
        A = p1 / p - d * z.conjugate() / (1.0 + r2)
        return -k * A.conjugate() * (1.0 + r2) ** 2

    return f


def gradient_field(form: BinaryForm, p: SpherePoint, scale: float | None = None) -> TangentVector:
    """``grad psi`` for the Fubini-Study metric of total area ``scale``.

    Characterized by ``<grad psi, v>_g = d psi(v)`` for all ``v``.
    """
    rho_form(form, p)  # raises DivisorPole on the divisor
    a = form.chart_coefficients(p.chart)
    v = complex(_grad_coords(a, form.degree, p.coord, _scale(form, scale)))
    return TangentVector(p, v)


def gradient_norm(form: BinaryForm, p: SpherePoint, scale: float | None = None) -> float:
    """Metric norm ``|grad psi|_g``."""
    a = form.chart_coefficients(p.chart)
    A, _, _ = psi_derivatives(a, form.degree, p.coord)
    return float(abs(A) / math.sqrt(conformal_factor(p.coord, _scale(form, scale))))


def potential(form: BinaryForm, p: SpherePoint) -> float:
    return float(-log_norm(form.chart_coefficients(p.chart), form.degree, p.coord))


# -- critical points -------------------------------------------------------------


def _newton_step(a, d, z):
    """Newton step for ``grad psi = 0``, vectorized.

    With ``G = psi_x + i psi_y = -conj(A)`` the linearization is
    ``2 psi_zzbar dz + 2 conj(psi_zz) conj(dz) = -G``.
    """
    A, psi_zz, psi_zzbar = psi_derivatives(a, d, z)
    G = -np.conj(A)
    alpha = 2 * psi_zzbar
    beta = 2 * np.conj(psi_zz)
    det = alpha**2 - np.abs(beta) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return (-alpha * G + beta * np.conj(G)) / det


def _seed_newton(a, d, z, scale, iterations=60, cap=0.2):
    with np.errstate(all="ignore"):
        for _ in range(iterations):
            step = _newton_step(a, d, z)
            mag = np.abs(step)
            step = np.where(mag > cap, step * cap / mag, step)
            z = z + step
            z = np.where(np.isfinite(z) & (np.abs(z) < 3.0), z, np.nan)
        A, _, _ = psi_derivatives(a, d, z)
        gnorm = np.abs(A) / np.sqrt(conformal_factor(z, scale))
    ok = np.isfinite(gnorm) & (gnorm < 1e-6) & (np.abs(z) <= 1.0 + 2 * CHART_BAND)
    return z[ok]


def _polish_critical(form: BinaryForm, p: SpherePoint, scale: float, steps: int = 50):
    chart = p.chart
    z = p.coord
    for _ in range(steps):
        a = form.chart_coefficients(chart)
        step = complex(_newton_step(a, form.degree, z))
        if not rk.is_finite(step):
            break
        if abs(step) > 0.2:
            step *= 0.2 / abs(step)
        z += step
        if abs(z) > 1.0 + CHART_BAND:
            chart, z = chart.other, 1.0 / z
        if abs(step) <= 1e-15 * (1.0 + abs(z)):
            break
    return SpherePoint(chart, z).normalized()


def classify_critical(form: BinaryForm, p: SpherePoint, scale: float | None = None) -> CriticalPoint:
    """Morse data at a (polished) critical point.

    Eigenvalues are taken with respect to the Fubini-Study metric, so they
    do not depend on the chart.
    """
    s = _scale(form, scale)
    a = form.chart_coefficients(p.chart)
    _, psi_zz, psi_zzbar = psi_derivatives(a, form.degree, p.coord)
    psi_zz = complex(psi_zz)
    sigma = float(conformal_factor(p.coord, s))
    lo = (2 * float(psi_zzbar) - 2 * abs(psi_zz)) / sigma
    hi = (2 * float(psi_zzbar) + 2 * abs(psi_zz)) / sigma
    if min(abs(lo), abs(hi)) < DEGENERACY_TOL:
        raise DegenerateCritical(
            f"critical point at {p} has Hessian eigenvalues ({lo:.3e}, {hi:.3e})"
        )
    index = int(lo < 0) + int(hi < 0)
    direction = None
    if index == 1:
        # Q(e^{ib}) = 2 psi_zzbar + 2 Re(psi_zz e^{2ib}) is minimal here.
        beta = 0.5 * (math.pi - math.atan2(psi_zz.imag, psi_zz.real))
        v = complex(math.cos(beta), math.sin(beta))
        if v.real < -1e-12 or (abs(v.real) <= 1e-12 and v.imag < 0):
            v = -v
        direction = TangentVector(p, v)
    return CriticalPoint(
        location=p,
        index=index,
        value=potential(form, p),
        hessian_eigenvalues=(lo, hi),
        unstable_direction=direction,
    )


def _critical_sort_key(c: CriticalPoint):
    p = c.location
    return (int(p.chart), round(p.coord.real, 9), round(p.coord.imag, 9))


def find_critical_points(
    form: BinaryForm,
    grid_density: int = 64,
    scale: float | None = None,
    divisor: Divisor | None = None,
    grad_tol: float = 1e-10,
) -> list[CriticalPoint]:
    """All critical points of ``psi``, Newton-refined from a grid per chart.

    Raises
    ------
    NearDiscriminant
        If the section has (nearly) multiple zeros.
    DegenerateCritical
        If any critical point found is not Morse.
    """
    s = _scale(form, scale)
    div = divisor if divisor is not None else divisor_roots(form)
    if discriminant_distance(form, div) <= DISCRIMINANT_GUARD:
        raise NearDiscriminant("critical-point search needs simple zeros")
    expected = 2 - len(div)
    density = grid_density
    for _ in range(3):
        crit = _critical_candidates(form, density, s, grad_tol)
        n0 = sum(1 for c in crit if c.index == 0)
        n1 = len(crit) - n0
        if n0 - n1 == expected:
            return sorted(crit, key=_critical_sort_key)
        log.warning("critical count %d - %d != %d at grid %d; refining", n0, n1, expected, density)
        density *= 2
    raise CriticalSetIncomplete(
        f"found {n0} minima and {n1} saddles; Euler characteristic requires n0 - n1 = {expected}"
    )


def _critical_candidates(form: BinaryForm, density: int, scale: float, grad_tol: float):
    """Distinct classified critical points reached from the seed grid.

    Each new point is classified on arrival so a non-Morse form (whose
    critical set may be a whole curve) fails fast.
    """
    d = form.degree
    axis = np.linspace(-1.0 - CHART_BAND, 1.0 + CHART_BAND, density)
    grid = (axis[None, :] + 1j * axis[:, None]).ravel()
    found: list[CriticalPoint] = []
    for chart in (Chart.AFFINE0, Chart.AFFINE1):
        a = form.chart_coefficients(chart)
        for z in _seed_newton(a, d, grid.copy(), scale):
            p = _polish_critical(form, SpherePoint(chart, complex(z)), scale)
            if gradient_norm(form, p, scale) >= grad_tol:
                continue
            if all(chordal_distance(p, q.location) >= DEDUP_DISTANCE for q in found):
                found.append(classify_critical(form, p, scale))
    return found


# -- flow -------------------------------------------------------------------------------


def _nearest(p: SpherePoint, points) -> tuple[float, object]:
    best = (math.inf, None)
    for q in points:
        dist = chordal_distance(p, q.location if isinstance(q, CriticalPoint) else q)
        if dist < best[0]:
            best = (dist, q)
    return best


def integrate_flow(
    form: BinaryForm,
    start: SpherePoint,
    direction: Direction,
    controls: FlowControls | None = None,
    origin: CriticalPoint | None = None,
    divisor: Divisor | None = None,
) -> Trajectory:
    """Integrate ``+grad psi`` (UP) or ``-grad psi`` (DOWN) from ``start``.

    Adaptive Dormand-Prince with chart switching outside the hysteresis
    band. Stops at a critical point, near the divisor, or when the step
    budget runs out (terminus UNRESOLVED).
    """
    ctl = controls or FlowControls()
    s = _scale(form, ctl.scale)
    d = form.degree
    div = divisor if divisor is not None else divisor_roots(form)
    coeffs = {c: [complex(x) for x in form.chart_coefficients(c)] for c in Chart}
    fields = {c: _field(coeffs[c], d, float(direction.value), s) for c in Chart}

    zeros = {c: np.array([q.in_chart(c) for q in div.locations]) for c in Chart}

    def error_scale(z_old, z_new):
        # near a zero the relative term would exceed the distance to it
        dist = np.min(np.abs(zeros[chart] - z_new), initial=math.inf)
        return min(ctl.atol + ctl.rtol * max(abs(z_old), abs(z_new)), 1e-3 * dist)

    p = start.rechart()
    chart, z = p.chart, p.coord
    times = [0.0]
    points = [p]
    psis = [potential(form, p)]
    f = fields[chart]
    k1 = f(z)
    vels = [k1]

    def finish(terminus, target=None):
        return Trajectory(
            tuple(times), tuple(points), tuple(psis), tuple(vels), origin, terminus, target
        )

    def check(q: SpherePoint, psi: float):
        if psi > ctl.psi_cap or _nearest(q, div.locations)[0] < ctl.divisor_tol:
            return finish(Terminus.DIVISOR)
        if gradient_norm(form, q, s) < ctl.grad_tol:
            target = _critical_at(form, q, s, ctl)
            if target is not None:
                return finish(Terminus.CRITICAL, target)
        return None

    done = check(p, psis[0])
    if done is not None:
        return done

    t = 0.0
    h = ctl.h0
    for _ in range(ctl.max_steps):
        z_new, err, k_new = rk.dopri_step(f, z, h, k1)
        if not (rk.is_finite(z_new) and rk.is_finite(err)):
            h *= 0.2
            continue
        enorm = abs(err) / error_scale(z, z_new)
        if enorm > 1.0:
            h = rk.next_step(h, enorm)
            continue
        t += h
        z, k1 = z_new, k_new
        h = rk.next_step(h, enorm)
        if abs(z) > 1.0 + CHART_BAND:
            chart, z = chart.other, 1.0 / z
            f = fields[chart]
            k1 = f(z)
        q = SpherePoint(chart, z)
        psi = potential(form, q)
        times.append(t)
        points.append(q)
        psis.append(psi)
        vels.append(k1)
        done = check(q, psi)
        if done is not None:
            return done
    return finish(Terminus.UNRESOLVED)


def _critical_at(form, q, scale, ctl: FlowControls) -> CriticalPoint | None:
    if ctl.critical_points is not None:
        dist, cp = _nearest(q, ctl.critical_points)
        return cp if dist < ctl.critical_tol else None
    polished = _polish_critical(form, q, scale)
    if chordal_distance(polished, q) >= ctl.critical_tol:
        return None
    try:
        return classify_critical(form, polished, scale)
    except DegenerateCritical:
        return None


# -- skeleton -----------------------------------------------------------------------


def sbs_residual(form: BinaryForm, traj: Trajectory) -> float:
    """Max of ``|Im rho(t)|`` over samples, ``t`` the unit flow tangent."""
    worst = 0.0
    for q, v in zip(traj.points, traj.velocities):
        if v == 0:
            continue
        sample = rho_form(form, q)
        worst = max(worst, abs(sample.imag_pairing(v / abs(v))))
    return worst


def _launch(form, saddle: CriticalPoint, sign: float, eps: float, ctl, div):
    v = saddle.unstable_direction.value
    start = SpherePoint(saddle.location.chart, saddle.location.coord + sign * eps * v)
    return integrate_flow(form, start, Direction.DOWN, ctl, origin=saddle, divisor=div)


def extract_skeleton(
    form: BinaryForm,
    critical_points: list[CriticalPoint] | None = None,
    epsilon: float = 1e-5,
    controls: FlowControls | None = None,
    grid_density: int = 64,
    workers: int | None = None,
) -> Skeleton:
    """Critical points plus the downward separatrices of every saddle.

    Each saddle contributes one arc made of two separatrices launched at
    distance ``epsilon`` along its descending Hessian direction.
    """
    div = divisor_roots(form)
    cps = critical_points
    if cps is None:
        cps = find_critical_points(form, grid_density=grid_density, divisor=div)
    ctl = replace(controls or FlowControls(), critical_points=tuple(cps))
    saddles = [c for c in cps if c.index == 1]
    jobs = [(sd, sign) for sd in saddles for sign in (1.0, -1.0)]
    n_workers = workers or worker_count()
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            trajs = list(pool.map(lambda j: _launch(form, j[0], j[1], epsilon, ctl, div), jobs))
    else:
        trajs = [_launch(form, sd, sign, epsilon, ctl, div) for sd, sign in jobs]

    arcs = []
    for i, sd in enumerate(saddles):
        pair = (trajs[2 * i], trajs[2 * i + 1])
        for tr in pair:
            if tr.terminus is not Terminus.CRITICAL:
                raise SkeletonIncomplete(
                    f"separatrix from saddle {sd.location} ended as {tr.terminus.value}"
                )
        connection = any(tr.target.index == 1 for tr in pair)
        if connection:
            log.warning("saddle connection from %s", sd.location)
        residual = max(sbs_residual(form, tr) for tr in pair)
        arcs.append(SkeletonArc(sd, pair, residual, connection))
    return Skeleton(tuple(cps), tuple(arcs))

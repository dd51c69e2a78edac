"""Fibers of the exact-loop covering over the space of sections, and monodromy."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ContinuationBroken, InvalidPath, NearDiscriminant, NoExactRadius, NoSignChange
from .loops import LoopCurve, LoopReport, check_proposition, construct_exact_loop
from .morse import worker_count
from .sections import BinaryForm, Divisor, discriminant_distance, divisor_roots, horner
from .sphere import SpherePoint, chordal_distance, chordal_matrix

log = logging.getLogger(__name__)

PATH_MARGIN = 1e-4
FIBER_GUARD = 1e-6
CLOSURE_TOL = 1e-10


def _same_point(f: BinaryForm, g: BinaryForm) -> bool:
    """Equality in projective space: coefficients agree up to a complex scale."""
    a, b = f.coeffs, g.coeffs
    overlap = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return bool(overlap > 1.0 - CLOSURE_TOL)


@dataclass(frozen=True)
class Sheet:
    label: int
    zero_index: int
    zero: SpherePoint
    loop: LoopCurve
    report: LoopReport


@dataclass(frozen=True)
class SheetGap:
    label: int
    zero_index: int
    reason: str
    bracket: dict = field(default_factory=dict)
    step: int | None = None


@dataclass(frozen=True)
class ModuliFiber:
    form: BinaryForm
    sheets: tuple[Sheet, ...]
    gaps: tuple[SheetGap, ...] = ()


@dataclass(frozen=True, eq=False)
class CoefficientPath:
    steps: tuple[BinaryForm, ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError("a path needs at least one step")
        degs = {f.degree for f in self.steps}
        if len(degs) != 1:
            raise ValueError(f"path mixes degrees {sorted(degs)}")

    @property
    def is_closed(self) -> bool:
        return _same_point(self.steps[0], self.steps[-1])

    def validate(self) -> list[Divisor]:
        """Divisors of every step; raises InvalidPath at the first bad step."""
        divs = []
        for i, f in enumerate(self.steps):
            div = divisor_roots(f)
            dist = discriminant_distance(f, div)
            if dist <= PATH_MARGIN:
                raise InvalidPath(
                    f"step {i} has discriminant distance {dist:.3e} <= {PATH_MARGIN}", step=i
                )
            divs.append(div)
        return divs

    def reversed(self) -> "CoefficientPath":
        return CoefficientPath(self.steps[::-1])

    def then(self, other: "CoefficientPath") -> "CoefficientPath":
        """Concatenation; ``other`` must start where this path ends."""
        return CoefficientPath(self.steps + other.steps[1:])

    def to_json(self) -> dict:
        return {"schema_version": 1, "steps": [f.to_json() for f in self.steps]}

    @classmethod
    def from_json(cls, data: dict) -> "CoefficientPath":
        return cls(tuple(BinaryForm.from_json(s) for s in data["steps"]))


@dataclass(frozen=True)
class MonodromyResult:
    permutation: tuple[int, ...]
    path: CoefficientPath

    def one_line(self) -> str:
        """One-line notation on 1-based sheet labels."""
        return " ".join(str(j + 1) for j in self.permutation)

    @property
    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.permutation))

    def cycle_type(self) -> list[int]:
        seen = set()
        lengths = []
        for i in range(len(self.permutation)):
            if i in seen:
                continue
            n, j = 0, i
            while j not in seen:
                seen.add(j)
                j = self.permutation[j]
                n += 1
            lengths.append(n)
        return sorted(lengths, reverse=True)


def family_circle(
    base: BinaryForm, direction: BinaryForm, center: complex, radius: float, n: int = 64
) -> CoefficientPath:
    """Closed path ``base + t direction`` with ``t`` on a counterclockwise circle."""
    ts = center + radius * np.exp(2j * np.pi * np.arange(n) / n)
    steps = [BinaryForm(tuple(base.coeffs + t * direction.coeffs)).normalized() for t in ts]
    return CoefficientPath(tuple(steps) + (steps[0],))


def family_segment(
    base: BinaryForm, direction: BinaryForm, t0: complex, t1: complex, n: int = 32
) -> CoefficientPath:
    ts = np.linspace(0.0, 1.0, n + 1)
    steps = [
        BinaryForm(tuple(base.coeffs + (t0 + s * (t1 - t0)) * direction.coeffs)).normalized()
        for s in ts
    ]
    return CoefficientPath(tuple(steps))


def family_lasso(
    base: BinaryForm,
    direction: BinaryForm,
    center: complex,
    radius: float,
    n_circle: int = 64,
    n_tail: int = 32,
) -> CoefficientPath:
    """Closed path based at ``t = 0``: out along the ray towards ``center``,
    once around the circle ``|t - center| = radius`` counterclockwise, and back."""
    if not 0 < radius < abs(center):
        raise ValueError("the circle must not contain t = 0")
    unit = center / abs(center)
    t_near = center - radius * unit
    tail = family_segment(base, direction, 0.0, t_near, n_tail)
    ts = center - radius * unit * np.exp(2j * np.pi * np.arange(n_circle + 1) / n_circle)
    ring = CoefficientPath(
        tuple(BinaryForm(tuple(base.coeffs + t * direction.coeffs)).normalized() for t in ts)
    )
    return tail.then(ring).then(tail.reversed())


# -- fibers ------------------------------------------------------------------------


def _build_sheet(form, div, label, index, n_samples, tol):
    try:
        loop = construct_exact_loop(form, index, n_samples=n_samples, tol=tol, divisor=div)
    except NoExactRadius as exc:
        return SheetGap(label, index, str(exc), exc.bracket)
    report = check_proposition(form, loop, tol=tol)
    return Sheet(label, index, div.locations[index], loop, report)


def _build_all(form, div, pairs, n_samples, tol, workers):
    """``pairs`` is a list of (label, zero_index); result keeps that order."""
    n_workers = workers or worker_count()
    job = lambda lp: _build_sheet(form, div, lp[0], lp[1], n_samples, tol)  # noqa: E731
    if n_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(job, pairs))
    return [job(lp) for lp in pairs]


def _split(items):
    sheets = tuple(x for x in items if isinstance(x, Sheet))
    gaps = tuple(x for x in items if isinstance(x, SheetGap))
    return sheets, gaps


def enumerate_fiber(
    form: BinaryForm, n_samples: int = 256, tol: float = 1e-6, workers: int | None = None
) -> ModuliFiber:
    """One exact loop per simple zero; failures are listed in ``gaps``."""
    div = divisor_roots(form)
    if discriminant_distance(form, div) <= FIBER_GUARD:
        raise NearDiscriminant("fiber enumeration needs simple zeros")
    pairs = [(i, i) for i in range(len(div))]
    sheets, gaps = _split(_build_all(form, div, pairs, n_samples, tol, workers))
    return ModuliFiber(form, sheets, gaps)


# -- continuation ---------------------------------------------------------------------


def match_roots(prev: list[SpherePoint], cur: list[SpherePoint]) -> list[int] | None:
    """Nearest-neighbour matching ``prev[i] -> cur[m[i]]`` or None if ambiguous.

    Accepted only when it is a bijection and every non-matched distance
    exceeds twice the largest matched distance.
    """
    if len(prev) != len(cur):
        return None
    dist = np.array([[chordal_distance(p, q) for q in cur] for p in prev])
    m = dist.argmin(axis=1)
    if len(set(m.tolist())) != len(m):
        return None
    matched = dist[np.arange(len(m)), m]
    cross = dist.copy()
    cross[np.arange(len(m)), m] = np.inf
    if len(m) > 1 and not cross.min() > 2.0 * matched.max():
        return None
    return m.tolist()


def _track(prev_form, prev_roots, form, step_index, depth, max_depth):
    """Roots of ``form`` in the label order of ``prev_roots``, refining if needed."""
    div = divisor_roots(form)
    if discriminant_distance(form, div) <= PATH_MARGIN:
        raise ContinuationBroken(
            f"refined path touches the discriminant near step {step_index}", step=step_index
        )
    m = match_roots(prev_roots, div.locations)
    if m is not None:
        return [div.locations[j] for j in m], div
    if depth >= max_depth:
        raise ContinuationBroken(
            f"ambiguous root matching at step {step_index}; refine the path", step=step_index
        )
    a, b = prev_form.coeffs, form.coeffs
    # align phases so the chord does not pass near the zero vector
    phase = np.vdot(a, b)
    b_al = b * (np.conj(phase) / abs(phase)) if abs(phase) > 0 else b
    mid = BinaryForm(tuple(0.5 * (a + b_al))).normalized()
    mid_roots, _ = _track(prev_form, prev_roots, mid, step_index, depth + 1, max_depth)
    return _track(mid, mid_roots, form, step_index, depth + 1, max_depth)


def continue_roots(path: CoefficientPath, start_roots: list[SpherePoint], max_refine: int = 10):
    """Root positions per label along the path (list per step)."""
    path.validate()
    history = [list(start_roots)]
    roots = list(start_roots)
    for k in range(1, len(path.steps)):
        roots, _ = _track(path.steps[k - 1], roots, path.steps[k], k, 0, max_refine)
        history.append(roots)
    return history


def continue_fiber(
    path: CoefficientPath,
    start: ModuliFiber,
    n_samples: int = 256,
    tol: float = 1e-6,
    rebuild_every_step: bool = True,
    workers: int | None = None,
) -> ModuliFiber:
    """Carry the sheets of ``start`` along ``path``.

    Sheet labels follow their zeros by nearest-neighbour matching; the
    exact loop of every sheet is rebuilt around its continued zero.
    """
    if not _same_point(path.steps[0], start.form):
        raise ValueError("path does not start at the fiber's form")
    path.validate()
    start_div = divisor_roots(start.form)
    labels = sorted([s.label for s in start.sheets] + [g.label for g in start.gaps])
    index_of = {s.label: s.zero_index for s in start.sheets}
    index_of.update({g.label: g.zero_index for g in start.gaps})
    roots = [start_div.locations[index_of[lb]] for lb in labels]
    gaps: list[SheetGap] = []
    last = len(path.steps) - 1
    items = None
    for k in range(1, len(path.steps)):
        roots, div = _track(path.steps[k - 1], roots, path.steps[k], k, 0, 10)
        if rebuild_every_step or k == last:
            loc = div.locations
            pairs = [(lb, _index_in(loc, r)) for lb, r in zip(labels, roots)]
            items = _build_all(path.steps[k], div, pairs, n_samples, tol, workers)
            gaps.extend(
                SheetGap(g.label, g.zero_index, g.reason, g.bracket, step=k)
                for g in items
                if isinstance(g, SheetGap)
            )
    if items is None:
        return start
    sheets, _ = _split(items)
    return ModuliFiber(path.steps[-1], sheets, tuple(gaps))


def _index_in(locations: list[SpherePoint], p: SpherePoint) -> int:
    return int(np.argmin([chordal_distance(p, q) for q in locations]))


def monodromy(path: CoefficientPath, base: ModuliFiber, **kwargs) -> MonodromyResult:
    """Permutation of sheet labels after continuation around a closed path.

    ``permutation[i] = j`` when the sheet starting on zero ``i`` of the base
    form returns on zero ``j``.
    """
    if not path.is_closed:
        raise InvalidPath("monodromy needs a closed path", step=len(path.steps) - 1)
    final = continue_fiber(path, base, **kwargs)
    return _read_permutation(base, final, path)


def _read_permutation(base: ModuliFiber, final: ModuliFiber, path) -> MonodromyResult:
    start = divisor_roots(base.form).locations
    final_div = divisor_roots(final.form)
    last = len(path.steps) - 1
    ends = {s.label: s.zero for s in final.sheets}
    for gap in final.gaps:
        if gap.step == last:
            ends[gap.label] = final_div.locations[gap.zero_index]
    perm = []
    for label in sorted(ends):
        dists = [chordal_distance(ends[label], q) for q in start]
        j = int(np.argmin(dists))
        if dists[j] >= 1e-6:
            raise ContinuationBroken("continued zero does not return to a base zero", step=last)
        perm.append(j)
    return MonodromyResult(tuple(perm), path)


def root_monodromy(path: CoefficientPath) -> MonodromyResult:
    """Permutation of zeros from root tracking alone (no loops)."""
    if not path.is_closed:
        raise InvalidPath("monodromy needs a closed path", step=len(path.steps) - 1)
    start = divisor_roots(path.steps[0]).locations
    end = continue_roots(path, start)[-1]
    perm = []
    for p in end:
        dists = [chordal_distance(p, q) for q in start]
        j = int(np.argmin(dists))
        if dists[j] >= 1e-6:
            raise ContinuationBroken("tracked root does not return to a base zero", step=-1)
        perm.append(j)
    return MonodromyResult(tuple(perm), path)


# -- discriminant ------------------------------------------------------------------------


def _ray_form(base: BinaryForm, direction: BinaryForm, t: float) -> BinaryForm:
    return BinaryForm(tuple(base.coeffs + t * direction.coeffs))


def _ray_distance(base, direction, t) -> float:
    coeffs = base.coeffs + t * direction.coeffs
    if not np.any(coeffs):
        return 0.0
    return discriminant_distance(BinaryForm(tuple(coeffs)))


def _newton_double_root(base, direction, t0, z0, chart, steps=60):
    """Solve ``p = p_z = 0`` in (z, t) for the family ``base + t direction``."""
    b = base.chart_coefficients(chart)
    e = direction.chart_coefficients(chart)
    z, t = complex(z0), complex(t0)
    for _ in range(steps):
        pb, pb1, pb2 = (complex(v) for v in horner(b, z, 2))
        pe, pe1, pe2 = (complex(v) for v in horner(e, z, 2))
        f = np.array([pb + t * pe, pb1 + t * pe1])
        jac = np.array([[pb1 + t * pe1, pe], [pb2 + t * pe2, pe1]])
        try:
            dz, dt = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        z += dz
        t += dt
        if abs(dz) + abs(dt) < 1e-15 * (1 + abs(z) + abs(t)):
            break
    if not (np.isfinite(z) and np.isfinite(t)):
        return None
    return t


def locate_discriminant(
    base: BinaryForm,
    direction: BinaryForm,
    t_max: float = 4.0,
    n_grid: int = 400,
    threshold: float = 1e-6,
    width: float = 1e-8,
) -> float:
    """Smallest ``t`` in ``[0, t_max]`` where ``base + t direction`` has a multiple zero.

    Grid scan for local minima of the discriminant distance, landing on
    the crossing by Newton on ``p = p_z = 0`` (with a bounded scalar
    minimization as fallback), then bisection on ``distance < threshold``
    down to bracket ``width``.
    """
    ts = np.linspace(0.0, t_max, n_grid + 1)
    vals = np.array([_ray_distance(base, direction, t) for t in ts])
    for k in range(len(ts)):
        if vals[k] < threshold:
            if k == 0:
                return 0.0
            return _bisect(base, direction, ts[k - 1], ts[k], threshold, width)
        left = vals[k - 1] if k > 0 else np.inf
        right = vals[k + 1] if k + 1 < len(ts) else np.inf
        if not (vals[k] <= left and vals[k] <= right):
            continue
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        hit = _refine_minimum(base, direction, ts[k], lo, hi, threshold)
        if hit is not None:
            return _bisect(base, direction, lo, hit, threshold, width)
    raise NoSignChange(f"discriminant distance stays above {threshold} on [0, {t_max}]")


def _refine_minimum(base, direction, t0, lo, hi, threshold):
    div = divisor_roots(_ray_form(base, direction, t0))
    locs = div.locations
    if len(locs) >= 2:
        dist = chordal_matrix(locs)
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        chart = locs[i].chart
        zi = locs[i].coord
        zj = locs[j].coord if locs[j].chart is chart else 1.0 / locs[j].coord
        t = _newton_double_root(base, direction, t0, 0.5 * (zi + zj), chart)
        if t is not None and abs(t.imag) < 1e-9 and lo <= t.real <= hi:
            if _ray_distance(base, direction, t.real) < threshold:
                return t.real
    res = optimize.minimize_scalar(
        lambda t: _ray_distance(base, direction, t), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-15},
    )
    if res.fun < threshold:
        return float(res.x)
    return None


def _bisect(base, direction, lo, hi, threshold, width):
    """Shrink [lo, hi] (distance >= threshold at lo, < at hi) to ``width``."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _ray_distance(base, direction, mid) < threshold:
            hi = mid
        else:
            lo = mid
    return hi

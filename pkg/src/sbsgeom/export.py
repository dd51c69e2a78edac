"""JSON payloads, CSV rows and text tables for the command-line reports.

Every payload carries ``"schema_version": 1``; key order is fixed by
``json.dumps(..., sort_keys=True)`` at write time.
"""

from __future__ import annotations

import csv
import io
import json
from importlib import resources

from .config import AreaScaleMode
from .loops import LoopReport
from .moduli import ModuliFiber, MonodromyResult
from .morse import CriticalPoint, Skeleton, SkeletonArc
from .sections import BinaryForm
from .sphere import SpherePoint

SCHEMA_VERSION = 1


def load_schema(command: str) -> dict:
    """JSON schema of a command's output, e.g. ``load_schema("monodromy")``."""
    text = resources.files("sbsgeom").joinpath(f"schemas/{command}.schema.json").read_text()
    return json.loads(text)


def dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def point_json(p: SpherePoint) -> dict:
    return {"chart": int(p.chart), "coord": [p.coord.real, p.coord.imag]}


def critical_point_json(c: CriticalPoint) -> dict:
    out = {
        "location": point_json(c.location),
        "index": c.index,
        "kind": c.kind,
        "value": c.value,
        "hessian_eigenvalues": list(c.hessian_eigenvalues),
        "unstable_direction": None,
    }
    if c.unstable_direction is not None:
        v = c.unstable_direction.value
        out["unstable_direction"] = [v.real, v.imag]
    return out


def critical_points_payload(form: BinaryForm, cps: list[CriticalPoint]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "critical-points",
        "form": form.to_json(),
        "counts": {
            "minima": sum(1 for c in cps if c.index == 0),
            "saddles": sum(1 for c in cps if c.index == 1),
        },
        "critical_points": [critical_point_json(c) for c in cps],
    }


def _arc_times(arc: SkeletonArc) -> list[float]:
    first, second = arc.branches
    return [-t for t in first.times[::-1]] + [0.0] + list(second.times)


def _critical_id(cps, c: CriticalPoint) -> int:
    for i, q in enumerate(cps):
        if q is c or q.location == c.location:
            return i
    return -1


def skeleton_payload(form: BinaryForm, sk: Skeleton) -> dict:
    cps = list(sk.critical_points)
    arcs = []
    for k, arc in enumerate(sk.arcs):
        a, b = arc.endpoints
        arcs.append(
            {
                "id": k,
                "saddle": _critical_id(cps, arc.saddle),
                "endpoints": [_critical_id(cps, a), _critical_id(cps, b)],
                "saddle_connection": arc.saddle_connection,
                "sbs_residual": arc.sbs_residual,
                "n_samples": len(arc.points()),
                "t": _arc_times(arc),
                "points": [[int(p.chart), p.coord.real, p.coord.imag] for p in arc.points()],
                "psi": arc.psi_values(),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "skeleton",
        "form": form.to_json(),
        "critical_points": [critical_point_json(c) for c in cps],
        "arcs": arcs,
    }


def skeleton_csv(sk: Skeleton) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arc", "t", "chart", "re", "im", "psi"])
    for k, arc in enumerate(sk.arcs):
        for t, p, psi in zip(_arc_times(arc), arc.points(), arc.psi_values()):
            w.writerow([k, repr(t), int(p.chart), repr(p.coord.real), repr(p.coord.imag), repr(psi)])
    return buf.getvalue()


def _area_units(report: LoopReport, total: float, mode: AreaScaleMode) -> float:
    return report.enclosed_area / total if mode is AreaScaleMode.UNIT_TOTAL else report.enclosed_area


def exact_loops_payload(fiber: ModuliFiber, mode: AreaScaleMode) -> dict:
    d = float(fiber.form.degree)
    sheets = []
    for s in fiber.sheets:
        rep = s.report.to_json(total=d)
        sheets.append(
            {
                "label": s.label,
                "zero_index": s.zero_index,
                "zero": point_json(s.zero),
                "area": _area_units(s.report, d, mode),
                "report": rep,
                "loop": s.loop.to_json(),
            }
        )
    gaps = [
        {"label": g.label, "zero_index": g.zero_index, "reason": g.reason, "bracket": g.bracket}
        for g in fiber.gaps
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "exact-loops",
        "form": fiber.form.to_json(),
        "area_scale_mode": mode.value,
        "total_flux": d,
        "sheets": sheets,
        "gaps": gaps,
    }


def exact_loops_csv(fiber: ModuliFiber) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sheet", "k", "chart", "re", "im"])
    for s in fiber.sheets:
        for k, p in enumerate(s.loop.points):
            w.writerow([s.label, k, int(p.chart), repr(p.coord.real), repr(p.coord.imag)])
    return buf.getvalue()


def monodromy_payload(result: MonodromyResult, oracle: MonodromyResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "monodromy",
        "n_steps": len(result.path.steps),
        "permutation": list(result.permutation),
        "one_line": result.one_line(),
        "cycle_type": result.cycle_type(),
        "is_identity": result.is_identity,
        "root_braid_permutation": list(oracle.permutation),
        "agrees_with_root_braid": result.permutation == oracle.permutation,
    }


def rows_csv(headers: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def table(headers: list[str], rows: list[list]) -> str:
    """Fixed-width text table."""
    cells = [[str(h) for h in headers]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v + 0.0:.10g}"
    return str(v)

"""Command-line front end.

Exit codes: 0 success, 2 degenerate critical structure, 3 near-discriminant
input, 4 invalid path (with the offending step index), 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import export, svg
from .config import AreaScaleMode, RunConfig
from .errors import (
    ContinuationBroken,
    DegenerateCritical,
    InvalidPath,
    NearDiscriminant,
    SbsError,
)
from .loops import check_proposition
from .moduli import CoefficientPath, enumerate_fiber, monodromy, root_monodromy
from .morse import FlowControls, extract_skeleton, find_critical_points
from .sections import BinaryForm

log = logging.getLogger("sbsgeom")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGENERATE = 2
EXIT_NEAR_DISCRIMINANT = 3
EXIT_INVALID_PATH = 4

SBS_LIMIT = 1e-6


def _load_form(path: str) -> BinaryForm:
    return BinaryForm.from_json(json.loads(Path(path).read_text()))


def _load_path(path: str) -> CoefficientPath:
    return CoefficientPath.from_json(json.loads(Path(path).read_text()))


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.with_scale(args.scale)


def _controls(cfg: RunConfig) -> FlowControls:
    return FlowControls(rtol=cfg.flow_tol, atol=cfg.flow_tol * 1e-2, psi_cap=cfg.psi_cap)


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _require_form(args) -> str:
    if not args.form:
        raise SystemExit("--form FILE is required")
    return args.form


# -- commands ------------------------------------------------------------------


def cmd_critical_points(args) -> str:
    cfg = _config(args)
    form = _load_form(_require_form(args))
    cps = find_critical_points(form, grid_density=cfg.grid_density, grad_tol=cfg.newton_tol)
    payload = export.critical_points_payload(form, cps)
    _write(args.out, "critical_points.json", export.dumps(payload))
    if args.format == "json":
        return export.dumps(payload)
    rows = [
        [c.kind, int(c.location.chart), c.location.coord.real, c.location.coord.imag, c.value,
         *c.hessian_eigenvalues]
        for c in cps
    ]
    if args.format == "csv":
        return export.rows_csv(["kind", "chart", "re", "im", "psi", "eig1", "eig2"], rows)
    counts = payload["counts"]
    head = f"{counts['minima']} minima, {counts['saddles']} saddles\n"
    return head + export.table(["kind", "chart", "re", "im", "psi", "eig1", "eig2"], rows)


def cmd_skeleton(args) -> str:
    cfg = _config(args)
    form = _load_form(_require_form(args))
    cps = find_critical_points(form, grid_density=cfg.grid_density, grad_tol=cfg.newton_tol)
    sk = extract_skeleton(form, cps, controls=_controls(cfg))
    payload = export.skeleton_payload(form, sk)
    text_csv = export.skeleton_csv(sk)
    _write(args.out, "skeleton.json", export.dumps(payload))
    _write(args.out, "skeleton.csv", text_csv)
    _write(
        args.out,
        "skeleton.svg",
        svg.render(form, arcs=[a.points() for a in sk.arcs],
                   markers=[c.location for c in cps], title="skeleton"),
    )
    if args.verify_sbs:
        worst = 0.0
        for k, arc in enumerate(sk.arcs):
            print(f"arc {k}: max |Im rho(tangent)| = {arc.sbs_residual:.3e}", file=sys.stderr)
            worst = max(worst, arc.sbs_residual)
        if worst >= SBS_LIMIT:
            raise SbsError(f"SBS residual {worst:.3e} exceeds {SBS_LIMIT}")
    if args.format == "json":
        return export.dumps(payload)
    if args.format == "csv":
        return text_csv
    rows = [
        [a["id"], a["saddle"], f"{a['endpoints'][0]}-{a['endpoints'][1]}", a["n_samples"],
         a["sbs_residual"]]
        for a in payload["arcs"]
    ]
    return export.table(["arc", "saddle", "joins", "samples", "sbs_residual"], rows)


def cmd_exact_loops(args) -> str:
    cfg = _config(args)
    form = _load_form(_require_form(args))
    fiber = enumerate_fiber(form, n_samples=cfg.loop_samples, tol=cfg.action_tol)
    fiber = _recheck(fiber, cfg)
    payload = export.exact_loops_payload(fiber, cfg.area_scale_mode)
    _write(args.out, "exact_loops.json", export.dumps(payload))
    _write(
        args.out,
        "exact_loops.svg",
        svg.render(form, loops=[list(s.loop.points) for s in fiber.sheets],
                   markers=[s.zero for s in fiber.sheets], title="exact loops"),
    )
    for g in fiber.gaps:
        print(f"zero {g.zero_index}: no exact loop ({g.reason})", file=sys.stderr)
    if args.format == "json":
        return export.dumps(payload)
    if args.format == "csv":
        return export.exact_loops_csv(fiber)
    unit = "fractions of total" if cfg.area_scale_mode is AreaScaleMode.UNIT_TOTAL else "c1 units"
    rows = [
        [s["zero_index"], f"{s['area']:.4f}", s["report"]["action"],
         " ".join(str(w) for w in s["report"]["winding"]), s["report"]["is_exact"]]
        for s in payload["sheets"]
    ]
    head = f"{len(fiber.sheets)} exact loops, {len(fiber.gaps)} gaps (area in {unit})\n"
    return head + export.table(["zero", "area", "action", "winding", "exact"], rows)


def _recheck(fiber, cfg: RunConfig):
    """Re-run the loop reports with the configured tolerances."""
    sheets = tuple(
        replace(s, report=check_proposition(fiber.form, s.loop, tol=cfg.area_tol,
                                             action_tol=cfg.action_tol))
        for s in fiber.sheets
    )
    return replace(fiber, sheets=sheets)


def cmd_monodromy(args) -> str:
    cfg = _config(args)
    if not args.path:
        raise SystemExit("--path FILE is required")
    path = _load_path(args.path)
    path.validate()
    base = enumerate_fiber(path.steps[0], n_samples=cfg.loop_samples, tol=cfg.action_tol)
    result = monodromy(path, base, n_samples=cfg.loop_samples, tol=cfg.action_tol)
    oracle = root_monodromy(path)
    payload = export.monodromy_payload(result, oracle)
    _write(args.out, "monodromy.json", export.dumps(payload))
    if args.format == "json":
        return export.dumps(payload)
    if args.format == "csv":
        row = [result.one_line(), oracle.one_line(), payload["agrees_with_root_braid"]]
        return export.rows_csv(["one_line", "root_braid", "agrees"], [row])
    return (
        f"permutation: {result.one_line()}\n"
        f"cycle type: {result.cycle_type()}\n"
        f"root braid: {oracle.one_line()}\n"
    )


COMMANDS = {
    "critical-points": cmd_critical_points,
    "skeleton": cmd_skeleton,
    "exact-loops": cmd_exact_loops,
    "monodromy": cmd_monodromy,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--form", help="section JSON file")
    common.add_argument("--path", help="coefficient path JSON file")
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--format", choices=("json", "table", "csv"), default="json")
    common.add_argument("--out", type=Path, help="directory for JSON/CSV/SVG outputs")
    common.add_argument("--verify-sbs", action="store_true",
                        help="print the SBS residual of every skeleton arc")
    common.add_argument("--scale", choices=("c1", "unit"),
                        help="report areas in c1 units or as fractions of the total")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(
        prog="sbsgeom",
        description="Skeleta, exact loops and monodromy for sections of O(d) on CP^1.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except DegenerateCritical as exc:
        print(f"error: degenerate critical structure: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NearDiscriminant as exc:
        print(f"error: input is near the discriminant: {exc}", file=sys.stderr)
        return EXIT_NEAR_DISCRIMINANT
    except (InvalidPath, ContinuationBroken) as exc:
        print(f"error: invalid path at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_INVALID_PATH
    except (SbsError, ValueError, TypeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

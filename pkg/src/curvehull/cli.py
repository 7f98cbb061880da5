"""Command-line front end.

Every command prints ``key=value`` lines (or one JSON document with
``--json``). Exit codes: 0 success, 1 domain failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import geometry, oracle
from .curve import CurveSpec, certify_totally_positive, load_curve, parse_curve
from .envelope import envelope
from .errors import CurveHullError
from .hull_param import Side, sample_boundary, write_polygon_text, write_table
from .moment import expected_atom_count, moment_bounds, optimizer_distribution

DEFAULT_CURVE = "moment:3:0:1"
FLOAT_FORMAT = "#.15g"


class UsageError(Exception):
    """Bad arguments or unreadable input; exit code 2."""


class DomainFailure(Exception):
    """A well-formed request whose answer is negative; exit code 1."""

    def __init__(self, reason: str, message: str, record: dict | None = None):
        super().__init__(message)
        self.reason = reason
        self.record = record or {}


# ------------------------------------------------------------------ helpers


def _num(v) -> str:
    return format(float(v), FLOAT_FORMAT)


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_text(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def emit(record: dict, as_json: bool, out) -> None:
    if as_json:
        out.write(json.dumps({k: _jsonable(v) for k, v in record.items()}, indent=2) + "\n")
        return
    for k, v in record.items():
        out.write(f"{k}={_text(v)}\n")


def resolve_curve(text: str) -> CurveSpec:
    """A path to an existing curve-spec file, or the builtin mini-syntax."""
    path = Path(text)
    if path.suffix.lower() == ".json" or path.exists():
        try:
            return load_curve(path)
        except OSError as exc:
            raise UsageError(f"cannot read curve file {text}: {exc.strerror or exc}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad curve file {text}: {exc}") from exc
    try:
        return parse_curve(text)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad curve spec {text!r}: {exc}") from exc


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise UsageError(f"bad vector {text!r}: expected comma-separated numbers") from exc


def _point(curve: CurveSpec, text: str, size: int) -> np.ndarray:
    x = parse_vector(text)
    if x.size != size:
        raise UsageError(f"expected {size} coordinates for {curve.dim}-dimensional curve, got {x.size}")
    return x


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("TPT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"TPT_THREADS must be an integer, got {env!r}") from exc
    return 1


def _require_certified(curve: CurveSpec) -> None:
    rep = certify_totally_positive(curve)
    if not rep.certified:
        pts = ";".join(f"{t:.6g}@{k}" for t, k in rep.failure_points) or "none"
        raise DomainFailure("NotCertified", f"torsion minors are not positive (failures {pts})")


def _quadrature(args) -> geometry.QuadratureConfig:
    return geometry.QuadratureConfig(
        rule_order=args.rule_order, subdivisions=args.subdivisions, target_rel_tol=args.rtol
    )


# ----------------------------------------------------------------- commands


def cmd_certify(args, curve: CurveSpec) -> dict:
    rep = certify_totally_positive(curve, grid_size=args.grid, tol=args.tol)
    rec = {
        "command": "certify",
        "curve": args.curve,
        "certified": rep.certified,
        "grid_size": rep.grid_size,
        "tol": rep.tol,
        "worst_minor_values": list(rep.worst_minor_values),
        "failure_count": len(rep.failure_points),
        "failure_t": [t for t, _ in rep.failure_points],
        "failure_minor": [k for _, k in rep.failure_points],
    }
    if not rep.certified:
        raise DomainFailure("NotCertified", "torsion minors are not positive", rec)
    return rec


def _envelope_record(command: str, args, curve: CurveSpec, side: Side, x: np.ndarray) -> dict:
    res = envelope(curve, x, side, certify=True)
    rec = {
        "command": command,
        "curve": args.curve,
        "side": side.value,
        "x": list(x),
        "value": res.value,
        "location": res.status,
        "residual": res.residual,
        "atoms": list(res.atoms),
        "probs": list(res.probs),
    }
    if res.certificate is not None:
        rec["certificate_verified"] = res.certificate.verified
        rec["certificate_min_slack"] = res.certificate.min_slack
        rec["certificate_d0"] = res.certificate.d0
        rec["certificate_d"] = list(res.certificate.d)
    return rec


def cmd_envelope(args, curve: CurveSpec) -> dict:
    _require_certified(curve)
    x = _point(curve, args.x, curve.n)
    return _envelope_record("envelope", args, curve, Side.parse(args.side), x)


def cmd_bounds(args, curve: CurveSpec) -> dict:
    _require_certified(curve)
    x = _point(curve, args.x, curve.n)
    lo, hi = moment_bounds(curve, x)
    rec = {"command": "bounds", "curve": args.curve, "x": list(x), "lower": lo, "upper": hi}
    for side in (Side.LOWER, Side.UPPER):
        rep = optimizer_distribution(curve, x, side)
        rec[f"{side.value}_atoms"] = list(rep.atoms)
        rec[f"{side.value}_probs"] = list(rep.probs)
        rec[f"{side.value}_residual"] = float(np.max(np.abs(rep.moments(curve)[:-1] - x)))
    return rec


def cmd_decompose(args, curve: CurveSpec) -> dict:
    _require_certified(curve)
    x = _point(curve, args.x, curve.n)
    side = Side.parse(args.side)
    rep = optimizer_distribution(curve, x, side)
    moments = rep.moments(curve)
    return {
        "command": "decompose",
        "curve": args.curve,
        "side": side.value,
        "x": list(x),
        "atoms": list(rep.atoms),
        "probs": list(rep.probs),
        "atom_count": len(rep.atoms),
        "interior_atom_count": expected_atom_count(curve.n, side),
        "objective": moments[-1],
        "moment_error": float(np.max(np.abs(moments[:-1] - x))),
    }


def cmd_volume(args, curve: CurveSpec) -> dict:
    res = geometry.hull_volume(curve, _quadrature(args))
    v1, v2 = res.variants
    rel = abs(v1 - v2) / abs(v1)
    return {
        "command": "volume",
        "curve": args.curve,
        "value": res.value,
        "est_error": res.est_error,
        "variant_1": v1,
        "variant_2": v2,
        "variant_rel_diff": rel,
        "variants_agree": bool(rel <= args.rtol),
        "evaluations": res.evaluations,
    }


def cmd_area(args, curve: CurveSpec) -> dict:
    res = geometry.hull_surface_area(curve, _quadrature(args))
    up, lo = res.variants
    return {
        "command": "area",
        "curve": args.curve,
        "value": res.value,
        "est_error": res.est_error,
        "upper": up,
        "lower": lo,
        "evaluations": res.evaluations,
    }


def cmd_mesh(args, curve: CurveSpec) -> dict:
    mesh = sample_boundary(curve, args.side, args.res)
    try:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_polygon_text(mesh, fh)
        if args.table:
            with open(args.table, "w", encoding="utf-8") as fh:
                write_table(mesh, fh)
    except OSError as exc:
        raise UsageError(f"cannot write mesh: {exc}") from exc
    rec = {
        "command": "mesh",
        "curve": args.curve,
        "side": Side.parse(args.side).value,
        "resolution": args.res,
        "vertices": len(mesh.vertices),
        "facets": len(mesh.facets),
        "dropped_facets": mesh.dropped_facets,
        "output": args.output,
    }
    if args.table:
        rec["table"] = args.table
    return rec


def cmd_oracle(args, curve: CurveSpec) -> dict:
    kind = args.oracle
    if kind == "mc-volume":
        est, err = oracle.mc_volume(curve, args.samples, seed=args.seed, threads=_threads(args))
        return {
            "command": "oracle mc-volume",
            "curve": args.curve,
            "samples": args.samples,
            "seed": args.seed,
            "estimate": est,
            "stderr": err,
        }
    if kind == "lp":
        x = _point(curve, args.x, curve.n)
        side = Side.parse(args.side)
        sol = oracle.lp_envelope(oracle.discretize(curve, args.grid), x, side)
        rec = {
            "command": "oracle lp",
            "curve": args.curve,
            "side": side.value,
            "grid": args.grid,
            "x": list(x),
            "status": sol.status.value,
            "iterations": sol.iterations,
        }
        if sol.status is not oracle.LpStatus.OPTIMAL:
            raise DomainFailure("Infeasible", "no distribution on the grid matches x", rec)
        ts = oracle.discretize(curve, args.grid).ts
        idx = sorted(sol.weights)
        rec.update(value=sol.value, atoms=[ts[i] for i in idx], probs=[sol.weights[i] for i in idx])
        return rec
    if kind == "membership":
        y = _point(curve, args.y, curve.dim)
        m = oracle.hull_membership(curve, y, tol=args.tol)
        return {"command": "oracle membership", "curve": args.curve, "y": list(y), "membership": m.value}
    if kind == "mesh-area":
        total, facets, degenerate = 0.0, 0, 0
        for side in (Side.UPPER, Side.LOWER):
            ma = oracle.mesh_area(sample_boundary(curve, side, args.res))
            total += ma.area
            facets += ma.facets
            degenerate += ma.degenerate
        return {
            "command": "oracle mesh-area",
            "curve": args.curve,
            "resolution": args.res,
            "area": total,
            "facets": facets,
            "degenerate_facets": degenerate,
        }
    raise UsageError(f"unknown oracle {kind!r}")


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--curve", default=argparse.SUPPRESS, help=f"curve-spec file or builtin (default {DEFAULT_CURVE})")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="print one JSON document")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap (fallback TPT_THREADS)")

    p = _Parser(prog="curvehull", description="Convex hulls of curves with totally positive torsion.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", parents=[common], help="check the torsion minors")
    c.add_argument("--grid", type=int, default=256)
    c.add_argument("--tol", type=float, default=1e-12)

    for name, helptext in (("envelope", "upper or lower envelope at x"), ("decompose", "extremal distribution at x")):
        c = sub.add_parser(name, parents=[common], help=helptext)
        c.add_argument("--x", required=True, help="comma-separated point of the projected hull")
        c.add_argument("--side", default="upper", choices=["upper", "lower"])

    c = sub.add_parser("bounds", parents=[common], help="sharp moment bounds at x")
    c.add_argument("--x", required=True)

    for name in ("volume", "area"):
        c = sub.add_parser(name, parents=[common], help=f"hull {name} by quadrature")
        c.add_argument("--rule-order", type=int, default=16)
        c.add_argument("--subdivisions", type=int, default=4)
        c.add_argument("--rtol", type=float, default=1e-9)

    c = sub.add_parser("mesh", parents=[common], help="sample one side of the hull boundary")
    c.add_argument("--side", default="upper", choices=["upper", "lower"])
    c.add_argument("--res", type=int, default=50)
    c.add_argument("-o", "--output", required=True, help="polygon text output path")
    c.add_argument("--table", help="optional CSV of parameters and points")

    o = sub.add_parser("oracle", parents=[common], help="independent brute-force checks")
    osub = o.add_subparsers(dest="oracle", required=True, parser_class=_Parser)
    c = osub.add_parser("mc-volume", parents=[common])
    c.add_argument("--samples", type=int, default=1_000_000)
    c.add_argument("--seed", type=int, default=0)
    c = osub.add_parser("lp", parents=[common])
    c.add_argument("--x", required=True)
    c.add_argument("--side", default="upper", choices=["upper", "lower"])
    c.add_argument("--grid", type=int, default=4001)
    c = osub.add_parser("membership", parents=[common])
    c.add_argument("--y", required=True, help="comma-separated point in the curve's ambient space")
    c.add_argument("--tol", type=float, default=1e-9)
    c = osub.add_parser("mesh-area", parents=[common])
    c.add_argument("--res", type=int, default=200)
    return p


COMMANDS = {
    "certify": cmd_certify,
    "envelope": cmd_envelope,
    "bounds": cmd_bounds,
    "decompose": cmd_decompose,
    "volume": cmd_volume,
    "area": cmd_area,
    "mesh": cmd_mesh,
    "oracle": cmd_oracle,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    as_json = False
    try:
        args = build_parser().parse_args(argv)
        as_json = getattr(args, "json", False)
        if not hasattr(args, "curve"):
            args.curve = DEFAULT_CURVE
        curve = resolve_curve(args.curve)
        emit(COMMANDS[args.command](args, curve), as_json, out)
        return 0
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return 2
    except DomainFailure as exc:
        emit({**exc.record, "status": "error", "reason": exc.reason, "message": str(exc)}, as_json, out)
        return 1
    except (CurveHullError, ValueError) as exc:
        emit({"status": "error", "reason": type(exc).__name__, "message": str(exc)}, as_json, out)
        return 1


if __name__ == "__main__":
    sys.exit(main())

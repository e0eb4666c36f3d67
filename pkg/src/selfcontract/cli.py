"""Command-line front end.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are
the long option names); explicit flags win over config values. Exit status
is 0 on success, 1 when a check command finds a violation and 2 on usage
or validation errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from . import io as sio
from .annulus import (SEGMENT_HEADER, AnnulusParams, annulus_length_estimate,
                      clip_to_annulus, full_length_bound, horizontal_bound_check,
                      polygonal_approximation, vertical_bound_check)
from .curve import (Polyline, check_main_bound, check_self_contracted,
                    check_self_contracted_bruteforce)
from .errors import GeometryError, SelfContractError
from .fields import parse_field
from .flow import (FlowConfig, integrate_gradient, integrate_proximal,
                   reference_spiral_length, truncated_lengths, winding_number)
from .foliation import cond_lambda_holds, torralba_construction, winds_monotonically
from .svg import emit_svg

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
SEED_ENV = "SELFCONTRACT_SEED"

# defaults per command; ``None`` means "no default, may stay unset"
DEFAULTS: Dict[str, Dict[str, object]] = {
    "check-sc": {"input": None, "tolerance": None, "oracle": False, "output": None},
    "bound": {"input": None, "lam": 0.5, "output": None},
    "annulus": {"input": None, "alpha": math.pi / 12, "lam": 0.5, "outer": None,
                "segments": None, "output": None, "svg": None},
    "flow": {"field": None, "x0": None, "method": "adaptive", "step": 1e-2,
             "tmax": 10.0, "rtol": 1e-9, "atol": 1e-9, "output": None,
             "meta": None, "svg": None, "seed": 42},
    "prox": {"field": None, "x0": None, "step": 0.1, "iterations": 10_000,
             "output": None, "meta": None, "svg": None, "seed": 42},
    "spiral": {"tmax": 1000.0, "cutoffs": "10,100,1000", "output": None,
               "svg": None},
    "foliation": {"periods": 5, "M": 720, "substeps": 64, "output": None,
                  "family": None, "svg": None},
    "suite": {"seed": 42, "output": None, "workers": 0},
}


class UsageError(Exception):
    pass


def parse_point(text: str):
    """``x,y`` or ``polar:r,theta`` to a Cartesian pair."""
    polar = text.startswith("polar:")
    body = text[len("polar:"):] if polar else text
    try:
        a, b = (float(v) for v in body.split(","))
    except ValueError as exc:
        raise UsageError(f"x0: expected 'x,y' or 'polar:r,theta', got {text!r}") from exc
    if polar:
        return (a * math.cos(b), a * math.sin(b))
    return (a, b)


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config: top level must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    config = load_config(args.config)
    known = {k.replace("-", "_") for k in DEFAULTS[command]}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"config: unknown field {unknown[0]!r} for {command}")
    out = {}
    for key, default in DEFAULTS[command].items():
        k = key.replace("-", "_")
        flag = getattr(args, k, None)
        out[k] = flag if flag is not None else config.get(k, default)
    if "seed" in out:
        env = os.environ.get(SEED_ENV)
        if args.seed is None and env is not None:
            try:
                out["seed"] = int(env)
            except ValueError as exc:
                raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
        if not isinstance(out["seed"], int) or not 0 <= out["seed"] < 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
    return out


def _require(cfg: dict, *keys: str) -> None:
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"missing required option --{k.replace('_', '-')}")


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_check_sc(cfg: dict) -> int:
    _require(cfg, "input")
    curve = sio.read_polyline(cfg["input"])
    check = check_self_contracted_bruteforce if cfg["oracle"] else check_self_contracted
    verdict = check(curve, cfg["tolerance"])
    _emit(sio.dumps(verdict.to_dict()), cfg["output"])
    return EXIT_OK if verdict.is_self_contracted else EXIT_VIOLATION


def cmd_bound(cfg: dict) -> int:
    _require(cfg, "input")
    curve = sio.read_polyline(cfg["input"])
    main = check_main_bound(curve)
    report = {"main_bound": main.to_dict()}
    last = curve.last
    try:
        report["annuli"] = full_length_bound(curve.translated(-last), cfg["lam"]).to_dict()
    except SelfContractError as exc:
        report["annuli"] = {"error": str(exc)}
    _emit(sio.dumps(report), cfg["output"])
    return EXIT_OK if main.holds else EXIT_VIOLATION


def cmd_annulus(cfg: dict) -> int:
    _require(cfg, "input")
    curve = sio.read_polyline(cfg["input"])
    # annuli are centred at the curve's end point
    centred = curve.translated(-curve.last)
    outer = cfg["outer"] if cfg["outer"] is not None else float(np.hypot(*centred.first))
    params = AnnulusParams(float(cfg["alpha"]), float(cfg["lam"]), float(outer))
    est = annulus_length_estimate(centred, params)
    report = {"alpha": params.alpha, "lam": params.lam, "outer_radius": params.outer_radius,
              "inner_radius": params.inner_radius, "annulus": est.to_dict()}
    ok = est.holds
    piece = clip_to_annulus(centred, params)
    rows = []
    if piece is not None and len(piece) >= 2:
        dec = polygonal_approximation(piece, params)
        vb, hb = vertical_bound_check(dec, params), horizontal_bound_check(dec, params)
        report["vertical"] = vb.to_dict()
        report["horizontal"] = hb.to_dict()
        report["segments"] = len(dec)
        ok = ok and vb.holds and hb.holds
        offset = curve.last
        rows = [(i, float(p[0] + offset[0]), float(p[1] + offset[1]),
                 float(q[0] + offset[0]), float(q[1] + offset[1]), float(t),
                 dec[i].kind.value, float(L))
                for i, (p, q, t, L) in enumerate(zip(dec.p, dec.q, dec.theta, dec.lengths))]
    if cfg["segments"] is not None:
        Path(cfg["segments"]).write_text(sio.rows_to_csv(SEGMENT_HEADER, rows),
                                         encoding="utf-8")
    if cfg["svg"] is not None:
        c = tuple(float(v) for v in curve.last)
        emit_svg([curve], [(c, params.outer_radius), (c, params.inner_radius)], cfg["svg"])
    _emit(sio.dumps(report), cfg["output"])
    return EXIT_OK if ok else EXIT_VIOLATION


def _orbit_outputs(orbit, cfg: dict, summary: dict) -> None:
    if cfg["output"] is not None:
        sio.write_polyline(cfg["output"], orbit.polyline, {"f": orbit.f_values})
        meta_path = cfg["meta"] or str(Path(cfg["output"]).with_suffix(".meta.json"))
        meta = dict(orbit.metadata)
        meta["seed"] = cfg["seed"]
        meta["terminated_by"] = orbit.terminated_by.value
        sio.write_json(meta_path, meta)
    if cfg["svg"] is not None:
        emit_svg([orbit.polyline], [], cfg["svg"])
    sys.stdout.write(sio.dumps(summary))


def _orbit_summary(orbit) -> dict:
    verdict = check_self_contracted(orbit.polyline)
    try:
        turns = winding_number(orbit.polyline)
    except GeometryError:
        # the orbit passes through the origin, where winding is undefined
        turns = None
    return {"samples": len(orbit.polyline), "terminated_by": orbit.terminated_by.value,
            "end": orbit.points[-1], "winding_turns": turns,
            "main_bound": check_main_bound(orbit.polyline).to_dict(),
            "self_contracted": verdict.to_dict()}


def cmd_flow(cfg: dict) -> int:
    _require(cfg, "field", "x0")
    fld = parse_field(cfg["field"])
    x0 = parse_point(cfg["x0"]) if isinstance(cfg["x0"], str) else tuple(cfg["x0"])
    fc = FlowConfig(method=cfg["method"], step=float(cfg["step"]), rtol=float(cfg["rtol"]),
                    atol=float(cfg["atol"]), t_max=float(cfg["tmax"]))
    orbit = integrate_gradient(fld, x0, fc)
    _orbit_outputs(orbit, cfg, _orbit_summary(orbit))
    return EXIT_OK


def cmd_prox(cfg: dict) -> int:
    _require(cfg, "field", "x0")
    fld = parse_field(cfg["field"])
    x0 = parse_point(cfg["x0"]) if isinstance(cfg["x0"], str) else tuple(cfg["x0"])
    orbit = integrate_proximal(fld, x0, float(cfg["step"]), int(cfg["iterations"]))
    _orbit_outputs(orbit, cfg, _orbit_summary(orbit))
    return EXIT_OK


def cmd_spiral(cfg: dict) -> int:
    from .suite import SPIRAL_START
    from .fields import spiral_field
    try:
        cutoffs = [float(v) for v in str(cfg["cutoffs"]).split(",")]
    except ValueError as exc:
        raise UsageError(f"cutoffs: {exc}") from exc
    tmax = float(cfg["tmax"])
    if max(cutoffs) > tmax:
        raise UsageError("cutoffs must not exceed --tmax")
    orbit = integrate_gradient(spiral_field(), (SPIRAL_START, 0.0), FlowConfig(t_max=tmax))
    lengths = truncated_lengths(orbit, cutoffs)
    summary = {"cutoffs": cutoffs, "lengths": lengths,
               "reference_lengths": [reference_spiral_length(T) for T in cutoffs],
               "winding_turns": winding_number(orbit.polyline),
               "samples": len(orbit.polyline)}
    if cfg["output"] is not None:
        sio.write_polyline(cfg["output"], orbit.polyline, {"f": orbit.f_values})
    if cfg["svg"] is not None:
        emit_svg([orbit.polyline], [], cfg["svg"])
    sys.stdout.write(sio.dumps(summary))
    return EXIT_OK


def cmd_foliation(cfg: dict) -> int:
    res = torralba_construction(int(cfg["periods"]), int(cfg["M"]), substeps=int(cfg["substeps"]))
    fam, orbit = res.family, res.orbit
    M = fam.bodies[0].M
    summary = {"theta_deg": math.degrees(res.theta), "K": fam.levels.K,
               "cond_lambda": cond_lambda_holds(fam),
               "monotone_winding": winds_monotonically(orbit, 2 * math.pi / M),
               "winding_turns": winding_number(orbit.polyline),
               "main_bound": check_main_bound(orbit.polyline).to_dict(),
               "samples": len(orbit.polyline)}
    if cfg["output"] is not None:
        sio.write_polyline(cfg["output"], orbit.polyline, {"f": orbit.f_values})
    if cfg["family"] is not None:
        sio.write_json(cfg["family"], fam.to_dict())
    if cfg["svg"] is not None:
        emit_svg([orbit.polyline], [], cfg["svg"],
                 polygons=[b.vertices() for b in fam.bodies])
    sys.stdout.write(sio.dumps(summary))
    return EXIT_OK


def cmd_suite(cfg: dict) -> int:
    from .suite import run_suite
    report = run_suite(cfg["seed"], int(cfg["workers"]))
    _emit(sio.dumps(report), cfg["output"])
    return EXIT_OK if report["all_passed"] else EXIT_VIOLATION


COMMANDS = {"check-sc": cmd_check_sc, "bound": cmd_bound, "annulus": cmd_annulus,
            "flow": cmd_flow, "prox": cmd_prox, "spiral": cmd_spiral,
            "foliation": cmd_foliation, "suite": cmd_suite}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfcontract",
                                     description="Self-contracted curve experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values (flags win)")
        return p

    p = add("check-sc", "check a polyline for self-contractedness")
    p.add_argument("--input", help="polyline CSV (t,x,y) or JSON")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--oracle", action="store_true", default=None,
                   help="use the cubic-time enumeration")
    p.add_argument("--output", help="verdict JSON path (default stdout)")

    p = add("bound", "length against (8 pi + 2) times the endpoint gap")
    p.add_argument("--input")
    p.add_argument("--lam", type=float, help="annulus ratio for the per-annulus sum")
    p.add_argument("--output")

    p = add("annulus", "classify and bound the curve inside one annulus")
    p.add_argument("--input")
    p.add_argument("--alpha", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--outer", type=float, help="outer radius (default: first sample)")
    p.add_argument("--segments", help="CSV of classified segments")
    p.add_argument("--output")
    p.add_argument("--svg")

    for name, help_ in (("flow", "integrate a gradient flow"),
                        ("prox", "run proximal iterations on a convex field")):
        p = add(name, help_)
        p.add_argument("--field", help="e.g. quadratic:1,0,0,4 or spiral")
        p.add_argument("--x0", help="x,y or polar:r,theta")
        p.add_argument("--step", type=float)
        if name == "flow":
            p.add_argument("--method", choices=("adaptive", "rk4"))
            p.add_argument("--tmax", type=float)
            p.add_argument("--rtol", type=float)
            p.add_argument("--atol", type=float)
        else:
            p.add_argument("--iterations", type=int)
        p.add_argument("--output", help="orbit CSV with an f column")
        p.add_argument("--meta", help="metadata JSON (default next to --output)")
        p.add_argument("--svg")
        p.add_argument("--seed", type=int)

    p = add("spiral", "truncated lengths of the spiral-field orbit")
    p.add_argument("--tmax", type=float)
    p.add_argument("--cutoffs", help="comma-separated truncation times")
    p.add_argument("--output")
    p.add_argument("--svg")

    p = add("foliation", "build the nested convex family and its trajectory")
    p.add_argument("--periods", type=int)
    p.add_argument("--M", type=int, help="number of support directions")
    p.add_argument("--substeps", type=int)
    p.add_argument("--output", help="trajectory CSV")
    p.add_argument("--family", help="family JSON")
    p.add_argument("--svg")

    p = add("suite", "run the acceptance battery")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", help="report JSON path (default stdout)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ValueError, SelfContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

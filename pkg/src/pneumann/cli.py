"""Command-line interface.

Exit codes: 0 success, 1 a reproduction criterion failed, 2 invalid
parameters, 3 unreadable input, 4 solver failure, 5 the energy is unbounded
below (no solution).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, capacity, covers, diagnostics, energy, reproduce
from .discrete import discretize
from .errors import InvalidParameterError, MeshError, SizeMismatchError, SolverError
from .geometry import (
    DATA,
    FREE,
    MARKERS,
    OUTER,
    ExhaustionSpec,
    MetricMesh,
    build_annulus_mesh,
    build_cusp_mesh,
    build_exhaustion,
    build_radial_model,
    domain_from_dict,
)
from .optim import CONVERGED, UNBOUNDED

logger = logging.getLogger("pneumann")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4
EXIT_UNBOUNDED = 5

REPORT_SCHEMA = 1


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Output


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # "inf", "nan": JSON has no literal for them
    return obj


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _envelope(args, result, hashes: dict) -> dict:
    doc = {
        "schema_version": REPORT_SCHEMA,
        "tool": "pneumann",
        "version": __version__,
        "command": args.command,
        "config": _solver_config(args).to_dict(),
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)},
        "seed": args.seed,
        "hashes": hashes,
        "result": result,
    }
    doc = _jsonable(doc)
    if args.test_mode:
        doc = _strip_timing(doc)
    return doc


def _emit(args, name: str, result, hashes: dict, extra: dict | None = None) -> Path | None:
    """Write ``<out>/<name>.json`` (plus ``extra`` files) when ``--out`` is set."""
    if not args.out:
        return None
    out = Path(args.out)
    target = out / f"{name}.json"
    write_atomic(target, json.dumps(_envelope(args, result, hashes), indent=2, sort_keys=True) + "\n")
    for fname, text in (extra or {}).items():
        write_atomic(out / fname, text)
    return target


# ---------------------------------------------------------------------------
# Config and inputs


def _solver_config(args) -> energy.SolverConfig:
    base = {}
    if getattr(args, "config", None):
        base = _read_json(args.config)
        if not isinstance(base, dict):
            raise CLIError("config file must hold a JSON object", EXIT_PARSE)
        known = {f.name for f in dataclasses.fields(energy.SolverConfig)}
        unknown = set(base) - known
        if unknown:
            raise CLIError(f"unknown config fields: {sorted(unknown)}", EXIT_INVALID)
    if getattr(args, "p", None) is not None:
        base["p"] = args.p
    if getattr(args, "gauge", None):
        base["gauge"] = args.gauge
    if getattr(args, "tol", None) is not None:
        base["grad_tol"] = args.tol
    return energy.SolverConfig(**base)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: not valid JSON ({exc})", EXIT_PARSE) from exc
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror}", EXIT_PARSE) from exc


def load_domain_file(path):
    doc = _read_json(path)
    try:
        dom = domain_from_dict(doc)
    except (KeyError, TypeError, ValueError, MeshError) as exc:
        raise CLIError(f"{path}: malformed domain ({exc})", EXIT_PARSE) from exc
    return dom


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_FACTORS = [
    (re.compile(rf"^({_NUM})$"), lambda m: (lambda X: np.full(len(X), float(m.group(1))))),
    (re.compile(rf"^\(1\+\|x\|\)\^\(?({_NUM})\)?$"), lambda m: (lambda X: (1.0 + _norm(X)) ** float(m.group(1)))),
    (re.compile(rf"^\|x\|\^\(?({_NUM})\)?$"), lambda m: (lambda X: _norm(X) ** float(m.group(1)))),
    (re.compile(r"^cos\(theta\)$"), lambda m: (lambda X: np.cos(_angle(X)))),
    (re.compile(r"^sin\(theta\)$"), lambda m: (lambda X: np.sin(_angle(X)))),
    (re.compile(r"^sign\(([xy])\)$"), lambda m: (lambda X: np.sign(_coord(X, m.group(1))))),
    (re.compile(rf"^1\{{\|x\|<({_NUM})\}}$"), lambda m: (lambda X: (_norm(X) < float(m.group(1))).astype(float))),
]


def _norm(X):
    return np.linalg.norm(X, axis=1)


def _angle(X):
    if X.shape[1] < 2:
        raise InvalidParameterError("angular expressions need a 2-D mesh")
    return np.arctan2(X[:, 1], X[:, 0])


def _coord(X, name):
    k = "xy".index(name)
    if X.shape[1] <= k:
        raise InvalidParameterError(f"coordinate {name} is not defined on a radial model")
    return X[:, k]


def parse_expression(text: str):
    """Compile a product of whitelisted factors into ``f(points) -> values``.

    Factors: numbers, ``(1+|x|)^s``, ``|x|^s``, ``cos(theta)``,
    ``sin(theta)``, ``sign(x)``, ``sign(y)`` and ``1{|x|<a}``, joined by
    ``*``.  An optional ``data:`` prefix names the boundary marker.
    """
    src = text.strip()
    if src.startswith(f"{DATA}:"):
        src = src[len(DATA) + 1:]
    if not src:
        raise InvalidParameterError("empty data expression")
    parts = []
    for raw in src.replace(" ", "").split("*"):
        for rx, make in _FACTORS:
            m = rx.match(raw)
            if m:
                parts.append(make(m))
                break
        else:
            raise InvalidParameterError(f"unsupported factor {raw!r} in {text!r}")

    def fn(X):
        X = np.asarray(X, dtype=float)
        out = np.ones(len(X))
        for f in parts:
            out = out * f(X)
        return out

    return fn


def _read_csv_column(path) -> np.ndarray:
    vals = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    vals.append(float(row[-1]))
                except ValueError:
                    if vals:
                        raise
    except (OSError, ValueError) as exc:
        raise CLIError(f"{path}: cannot read per-entity values ({exc})", EXIT_PARSE) from exc
    return np.asarray(vals)


def data_spec(args) -> energy.DataSpec:
    f = h = None
    for name in ("f", "h"):
        text = getattr(args, name, None)
        if text and text.endswith(".csv"):
            raise CLIError("per-entity CSV data is tied to one mesh; use an inline expression here", EXIT_INVALID)
    if args.f:
        f = parse_expression(args.f)
    if args.h:
        h = parse_expression(args.h)
    return energy.DataSpec(f, h, label=f"f={args.f or 0}, h={args.h or 0}")


def functional_data(args, domain) -> energy.FunctionalData:
    disc = discretize(domain)
    f = h = None
    if args.f:
        f = _read_csv_column(args.f) if args.f.endswith(".csv") else energy.DataSpec(parse_expression(args.f)).on(domain).f
    if args.h:
        h = _read_csv_column(args.h) if args.h.endswith(".csv") else energy.DataSpec(None, parse_expression(args.h)).on(domain).h
    F = energy.FunctionalData(f, h)
    energy.load_vector(disc, F)  # validates sizes
    return F


# ---------------------------------------------------------------------------
# Domains


def _add_domain_args(p: argparse.ArgumentParser, required: bool = True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--mesh", metavar="FILE", help="mesh or radial-model JSON")
    g.add_argument("--annulus", nargs=2, type=float, metavar=("R_IN", "R_OUT"))
    g.add_argument("--cusp", nargs=3, type=float, metavar=("LAMBDA", "X_MIN", "X_MAX"))
    g.add_argument("--radial-model", nargs=3, type=float, metavar=("N", "R_MIN", "R_MAX"))
    p.add_argument("--res", nargs=2, type=int, metavar=("N1", "N2"), default=None,
                   help="annulus: radial x angular; cusp: axial x cross; radial: cells (first value)")
    p.add_argument("--inner", choices=MARKERS, default=DATA, help="annulus inner circle marker")
    p.add_argument("--tip", choices=MARKERS, default=FREE, help="cusp tip marker")
    p.add_argument("--outer-marker", choices=MARKERS, default=OUTER, help="annulus outer circle marker")
    p.add_argument("--lateral", choices=MARKERS, default=FREE, help="cusp lateral boundary marker")
    p.add_argument("--profile", default="euclidean", help="radial model profile (euclidean | cusp)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="radial cusp exponent")


def build_domain(args):
    if args.mesh:
        return load_domain_file(args.mesh)
    if args.annulus:
        nr, na = args.res or (16, 64)
        return build_annulus_mesh(args.annulus[0], args.annulus[1], nr, na, inner=args.inner, outer=args.outer_marker)
    if args.cusp:
        lam, a, b = args.cusp
        na, nc = args.res or (64, 8)
        return build_cusp_mesh(lam, a, b, na, nc, tip=args.tip, lateral=args.lateral)
    n, a, b = args.radial_model
    cells = (args.res or (256, 0))[0]
    if float(n) != int(n):
        raise InvalidParameterError("radial model dimension must be an integer")
    return build_radial_model(int(n), args.profile, a, b, cells, lam=args.lam)


def _selection(text: str, domain):
    """``--K`` / ``--outer`` values: a marker name, ``inner`` (innermost ring) or a radius."""
    if text in MARKERS:
        return text
    if text == "inner":
        r = discretize(domain).radius
        return float(r.min())
    try:
        return float(text)
    except ValueError:
        raise InvalidParameterError(f"selection {text!r} is neither a marker, 'inner', nor a radius") from None


def _summary(domain) -> dict:
    if isinstance(domain, MetricMesh):
        return {
            "kind": "mesh",
            "vertices": domain.n_vertices,
            "cells": domain.n_cells,
            "area": domain.total_area,
            "boundary_length": {m: domain.boundary_length(m) for m in MARKERS if domain.marker_mask(m).any()},
            "digest": domain.digest(),
        }
    return {
        "kind": "radial",
        "n": domain.n,
        "nodes": domain.n_vertices,
        "r_min": domain.r_min,
        "r_max": domain.r_max,
        "volume": domain.total_volume,
        "digest": domain.digest(),
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_mesh_gen(args) -> int:
    dom = build_domain(args)
    text = json.dumps(dom.to_dict()) + "\n"
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
        return EXIT_OK
    s = _summary(dom)
    print(json.dumps(_jsonable(s)))
    _emit(args, "mesh", s, {"domain": s["digest"]})
    return EXIT_OK


def cmd_mesh_inspect(args) -> int:
    dom = load_domain_file(args.file)
    problems = dom.check() if isinstance(dom, MetricMesh) else []
    s = _summary(dom)
    s["problems"] = problems
    print(json.dumps(_jsonable(s), indent=2))
    _emit(args, "inspect", s, {"domain": s["digest"]})
    return EXIT_PARSE if problems else EXIT_OK


def cmd_capacity(args) -> int:
    dom = build_domain(args)
    prob = capacity.CapacityProblem(dom, _selection(args.K, dom), _selection(args.outer, dom))
    cfg = _solver_config(args)
    ests = capacity.cap_refinement_ladder(prob, cfg.p, args.levels, cfg)
    result = {"levels": [e.to_dict() for e in ests], "value": ests[-1].value}
    print(f"cap_{cfg.p:g} = {ests[-1].value:.10g} (level {ests[-1].level})")
    _emit(args, "capacity", result, {"domain": dom.digest()})
    return EXIT_OK


def _radii(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InvalidParameterError(f"--R expects comma-separated radii, got {text!r}") from None


def _exhaustion_problems(args):
    """Domains and capacity problems for classify/diagnose."""
    if args.exhaustion:
        doc = _read_json(args.exhaustion)
        try:
            spec = ExhaustionSpec(doc["generator"], doc["radii"], doc.get("params", {}), doc.get("per_octave", 8))
        except (KeyError, TypeError) as exc:
            raise CLIError(f"{args.exhaustion}: malformed exhaustion ({exc})", EXIT_PARSE) from exc
    elif args.radial:
        params = {"n": args.n, "profile": args.profile, "r_min": args.r_min}
        if args.lam is not None:
            params["lambda"] = args.lam
        spec = ExhaustionSpec("radial", _radii(args.R), params, args.per_octave)
    elif args.cusp is not None:
        spec = ExhaustionSpec("cusp", _radii(args.R), {"lambda": args.cusp, "n_cross": args.n_cross,
                                                     "lateral": args.lateral, "tip": FREE}, args.per_octave)
    else:
        raise CLIError("choose --radial, --cusp or --exhaustion", EXIT_INVALID)
    doms = build_exhaustion(spec)
    K = args.K
    if K is None:
        K = DATA if spec.generator in ("radial", "annulus") else "1.0"
    probs = [capacity.CapacityProblem(d, _selection(K, d), OUTER,
                                      r_K=None if K in MARKERS or K == "inner" else float(K)) for d in doms]
    return spec, doms, probs


def _add_exhaustion_args(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--radial", action="store_true", help="radial model of R^n (or a radial cusp with --lambda)")
    g.add_argument("--cusp", type=float, metavar="LAMBDA", default=None, help="2-D cusp meshes")
    g.add_argument("--exhaustion", metavar="FILE", help="exhaustion JSON {generator, radii, params, per_octave}")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--profile", default="euclidean")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--r-min", type=float, default=1.0)
    p.add_argument("--R", default="2,4,8,16,32,64,128,256", help="comma-separated truncation radii")
    p.add_argument("--per-octave", type=int, default=8)
    p.add_argument("--n-cross", type=int, default=8)
    p.add_argument("--lateral", choices=MARKERS, default=FREE)
    p.add_argument("--K", default=None, help="compact set: marker, 'inner' or radius (default: data / 1.0)")


def cmd_classify(args) -> int:
    spec, doms, probs = _exhaustion_problems(args)
    cfg = _solver_config(args)
    rep = capacity.classify(probs, cfg.p, cfg)
    print(rep.verdict)
    hashes = {f"stage{k}": d.digest() for k, d in enumerate(doms)}
    _emit(args, "classify", rep.to_dict(), hashes, {"classify_trend.csv": rep.to_csv()})
    return EXIT_OK


def cmd_solve(args) -> int:
    dom = build_domain(args)
    F = functional_data(args, dom)
    cfg = _solver_config(args)
    fixed = None
    if args.dirichlet:
        verts = discretize(dom).marker_vertices(args.dirichlet)
        if not len(verts):
            raise InvalidParameterError(f"no vertices carry marker {args.dirichlet!r}")
        fixed = {int(k): 0.0 for k in verts}
    u, rep = energy.minimize_J(dom, F, cfg, fixed=fixed)
    doc = {"u": u, "report": rep.to_dict()}
    _emit(args, "solve", doc, {"domain": dom.digest()})
    if args.output:
        write_atomic(args.output, json.dumps(_jsonable(doc)) + "\n")
    if rep.status == UNBOUNDED:
        print(f"unbounded below: compatibility (F,1) = (f,1) - (h,1) = {rep.compatibility:.6g} != 0; "
              "a solution needs (F,1) = 0", file=sys.stderr)
        return EXIT_UNBOUNDED
    if rep.status != CONVERGED:
        raise SolverError(f"solver stopped with status {rep.status} after {rep.iterations} iterations")
    print(f"{rep.status}: iterations={rep.iterations} J={rep.J:.10g} weak_residual={rep.weak_residual:.3e}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    spec_ex, doms, probs = _exhaustion_problems(args)
    cfg = _solver_config(args)
    spec = data_spec(args)
    cls = capacity.classify(probs, cfg.p, cfg)
    cut = None
    if cls.verdict == capacity.PARABOLIC:
        cut = capacity.build_cutoffs(probs, cfg.p, cfg)
    series = None
    if args.series:
        last = doms[-1]
        series = diagnostics.theorem31_series(last, spec.on(last), covers.build_annular_cover(last), cfg.p, cfg)
    v = diagnostics.solvability_verdict(doms, spec, cfg.p, cfg, cls, series=series, cutoffs=cut,
                                        r_K=float(probs[0].r_K))
    result = {"verdict": v.to_dict(), "classification": cls.to_dict()}
    if series is not None:
        result["series"] = series.to_dict()
    if args.full and cls.verdict != capacity.INCONCLUSIVE:
        ds = diagnostics.direct_solve(doms, spec, cfg.p, cfg, cls.verdict)
        result["direct_solve"] = ds.to_dict()
        result["consistent"] = diagnostics.consistent(v.verdict, ds.outcome)
    flag = " (inconclusive)" if v.verdict == capacity.INCONCLUSIVE else ""
    print(f"{cls.verdict}: {v.verdict}{flag}")
    hashes = {f"stage{k}": d.digest() for k, d in enumerate(doms)}
    extra = {"series.csv": series.to_csv()} if series is not None else {}
    _emit(args, "diagnose", result, hashes, extra)
    return EXIT_OK


def cmd_cover_check(args) -> int:
    dom = build_domain(args)
    cfg = _solver_config(args)
    p = cfg.p
    cover = covers.build_annular_cover(dom, base=args.base)
    part = covers.build_partition(cover)
    gamma = covers.gamma_default(dom, p, part, exponent=args.gamma_exponent)
    consts = covers.poincare_constants(cover, gamma, p, samples=args.samples, seed=args.seed)
    r32 = covers.condition32_evaluate(cover, gamma, consts, fit_upto=args.fit_upto)
    r33 = covers.condition33_evaluate(cover, gamma, consts, fit_upto=args.fit_upto)
    viol = gamma.violations(part)
    result = {"cover": cover.to_dict(), "gamma_c": gamma.c, "gamma_exponent": gamma.exponent,
              "partition_violations": viol, "condition32": r32.to_dict(), "condition33": r33.to_dict()}
    state = {True: "bounded", False: "growing"}
    print(f"pieces={cover.m} k={cover.multiplicity} violations={viol} "
          f"prefix-sum condition {state[r32.bounded]}, suffix-sum condition {state[r33.bounded]}")
    _emit(args, "cover_check", result, {"domain": dom.digest()}, {"cover_conditions.csv": r32.to_csv(r33)})
    return EXIT_OK


def cmd_reproduce(args) -> int:
    names = list(reproduce.SUITES) if args.suite == "all" else [args.suite]
    ok = True
    results = {}
    for name in names:
        kw = {}
        if name == "properties":
            kw = {"seed": args.seed, "trials": args.trials}
        res = reproduce.SUITES[name](**kw)
        for line in res.lines():
            print(line)
        ok &= res.passed
        results[name] = res.to_dict()
        _emit(args, f"reproduce_{name}", res.to_dict(), {}, res.artifacts)
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON", help="solver configuration file (SolverConfig fields)")
    common.add_argument("--out", metavar="DIR", help="directory for JSON reports and CSV trends")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker cap (computations are sequential)")
    common.add_argument("--test-mode", action="store_true", help="deterministic reports without timings")
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="pneumann", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"pneumann {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="generate or inspect meshes")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen", parents=[common], help="generate a mesh or radial model")
    _add_domain_args(gen)
    gen.add_argument("-o", "--output", metavar="FILE")
    gen.set_defaults(func=cmd_mesh_gen)
    ins = msub.add_parser("inspect", parents=[common], help="check the invariants of a mesh file")
    ins.add_argument("file")
    ins.set_defaults(func=cmd_mesh_inspect)

    cap = sub.add_parser("capacity", parents=[common], help="p-capacity of a condenser")
    _add_domain_args(cap)
    cap.add_argument("--p", type=float, default=2.0)
    cap.add_argument("--K", default=DATA, help="marker, 'inner' or radius")
    cap.add_argument("--outer", default=OUTER, help="marker, or radius")
    cap.add_argument("--levels", type=int, default=0, help="uniform refinements")
    cap.add_argument("--tol", type=float, default=None)
    cap.set_defaults(func=cmd_capacity)

    cl = sub.add_parser("classify", parents=[common], help="p-parabolic / p-hyperbolic classification")
    _add_exhaustion_args(cl)
    cl.add_argument("--p", type=float, default=2.0)
    cl.add_argument("--tol", type=float, default=None)
    cl.set_defaults(func=cmd_classify)

    so = sub.add_parser("solve", parents=[common], help="minimize J for the Neumann problem")
    _add_domain_args(so)
    so.add_argument("--p", type=float, default=2.0)
    so.add_argument("--f", help="volume density: expression or per-cell CSV")
    so.add_argument("--h", help="boundary flux density on 'data' edges: expression or per-edge CSV")
    so.add_argument("--gauge", choices=energy.GAUGES, default=None)
    so.add_argument("--dirichlet", choices=MARKERS, default=None, help="marker whose vertices are fixed to 0")
    so.add_argument("--tol", type=float, default=None)
    so.add_argument("-o", "--output", metavar="FILE", help="solution JSON {u, report}")
    so.set_defaults(func=cmd_solve)

    dg = sub.add_parser("diagnose", parents=[common], help="solvability verdict along an exhaustion")
    _add_exhaustion_args(dg)
    dg.add_argument("--p", type=float, default=2.0)
    dg.add_argument("--f")
    dg.add_argument("--h")
    dg.add_argument("--series", action="store_true", help="always evaluate the cover series")
    dg.add_argument("--cover", action="store_true", help="alias of --series")
    dg.add_argument("--full", action="store_true", help="also solve on every stage and cross-check")
    dg.add_argument("--tol", type=float, default=None)
    dg.set_defaults(func=cmd_diagnose)

    cc = sub.add_parser("cover-check", parents=[common], help="cover conditions on a mesh")
    _add_domain_args(cc)
    cc.add_argument("--p", type=float, default=2.0)
    cc.add_argument("--base", type=float, default=4.0)
    cc.add_argument("--gamma-exponent", type=float, default=None)
    cc.add_argument("--samples", type=int, default=200)
    cc.add_argument("--fit-upto", type=int, default=None)
    cc.set_defaults(func=cmd_cover_check)

    rp = sub.add_parser("reproduce", parents=[common], help="run a reproduction suite")
    rp.add_argument("suite", choices=[*reproduce.SUITES, "all"])
    rp.add_argument("--trials", type=int, default=1000)
    rp.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "cover", False):
        args.series = True
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (InvalidParameterError, SizeMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

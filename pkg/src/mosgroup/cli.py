"""Command-line interface: ``mosgroup <command> <document.json> [options]``.

Every command writes one JSON report to stdout::

    {"command", "inputs_digest", "results", "diagnostics", "timings"}

``results`` depends only on the document and the seed; timings and
tolerance warnings live in separate fields. Exit codes: 0 success,
1 verification or convergence failure, 2 malformed input.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np

from mosgroup import __version__
from mosgroup import numkernel as nk
from mosgroup.covariance import (
    check_limit_deviation_bound,
    check_small_time_limit,
    generator_covariance_oracle,
    refine_to_limit,
)
from mosgroup.cpmaps import gram
from mosgroup.document import ProblemDocument, _num, canonical_digest, load_document, matrix_to_json
from mosgroup.errors import (
    ConvergenceError,
    DegenerateCovarianceError,
    DimensionError,
    DocumentError,
    MosgroupError,
    NotMultiplicativeError,
)
from mosgroup.index import additivity_check, index_lower_bound, select_family, trivial_dilation_check
from mosgroup.selftest import run_selftest
from mosgroup.semigroups import MAX_TIME, evolve
from mosgroup.units import discover_units, verify_unit

COMMANDS = ("mos", "verify-unit", "discover-units", "covariance", "index", "tensor-index", "dilation-check", "selftest")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class Run:
    def __init__(self, command: str):
        self.command = command
        self.diagnostics: list[str] = []
        self.timings: dict[str, float] = {}
        self._t = time.perf_counter()

    def lap(self, phase: str):
        now = time.perf_counter()
        self.timings[phase] = round(1000 * (now - self._t), 3)
        self._t = now


def _complex(z) -> list:
    return [_num(complex(z).real), _num(complex(z).imag)]


def _units_for(doc: ProblemDocument, p, args, run: Run):
    """Document candidates, or a discovered family when none are given."""
    if doc.unit_candidates:
        return list(doc.unit_candidates), False
    found = discover_units(p, doc.options.budget, args.seed, doc.options.unit_grid)
    run.diagnostics.append(f"no unit candidates in document; discovered {len(found)} with seed {args.seed}")
    return select_family(found), True


def cmd_mos(doc, args, run):
    p = doc.semigroup()
    t = args.t
    space = p.space(t)
    run.lap("space")
    g = gram(list(space.basis), space)
    residual = float(np.linalg.norm(g - np.eye(space.rank)))
    psd = nk.is_psd(evolve(p, t).choi, doc.options.psd_tol)
    results = {
        "t": t,
        "rank": space.rank,
        "basis": [matrix_to_json(e) for e in space.basis],
        "weights": [_num(w) for w in space.weights],
        "gram_residual": residual,
        "choi_min_eigenvalue": _num(psd.min_eigenvalue),
        "completely_positive": psd.psd,
    }
    return results, EXIT_OK if psd.psd and residual <= 1e-8 else EXIT_FAIL


def _verification_json(u, v):
    return {
        "label": u.label,
        "verified": v.verified,
        "minimal_k": _num(v.minimal_k) if v.minimal_k is not None else None,
        "worst_margin": _num(v.worst_margin) if v.worst_margin is not None else None,
        "grid": list(v.grid),
        "limit_value": _num(v.limit_value) if v.limit_value is not None else None,
        "failure": v.failure,
    }


def cmd_verify_unit(doc, args, run):
    if not doc.unit_candidates:
        raise DocumentError("unit_candidates", "verify-unit needs at least one candidate")
    p = doc.semigroup()
    out = [_verification_json(u, verify_unit(u, p, doc.options.unit_grid)) for u in doc.unit_candidates]
    run.lap("verify")
    ok = all(r["verified"] for r in out)
    return {"candidates": out, "all_verified": ok}, EXIT_OK if ok else EXIT_FAIL


def cmd_discover(doc, args, run):
    p = doc.semigroup()
    found = discover_units(p, doc.options.budget, args.seed, doc.options.unit_grid)
    run.lap("discover")
    results = {
        "budget": doc.options.budget,
        "seed": args.seed,
        "count": len(found),
        "no_units_flag": not found,
        "units": [{"label": u.label, "k": _num(u.k), "b": matrix_to_json(u.b)} for u in found],
    }
    if not found:
        run.diagnostics.append("no units found in search family")
    return results, EXIT_OK


def _covariance_json(res):
    return {
        "labels": list(res.labels),
        "t": res.t,
        "B": matrix_to_json(res.B),
        "c": matrix_to_json(res.c),
        "refinement_depth": res.refinement_depth,
        "residual": _num(res.residual),
        "shifts": [_num(x) for x in res.shifts],
        "covariance": _complex(res.covariance),
    }


def cmd_covariance(doc, args, run):
    p = doc.semigroup()
    units, _ = _units_for(doc, p, args, run)
    if len(units) < 2:
        raise DocumentError("unit_candidates", "covariance needs at least two units")
    run.lap("units")
    pairs = []
    status = EXIT_OK
    for s, u in itertools.combinations(units, 2):
        try:
            res = refine_to_limit(s, u, p, args.t, doc.options.depth_max)
        except (ConvergenceError, DegenerateCovarianceError) as exc:
            pairs.append({"labels": [s.label, u.label], "error": str(exc)})
            status = EXIT_FAIL
            continue
        run.diagnostics.extend(f"({s.label}, {u.label}): {d}" for d in res.diagnostics)
        entry = _covariance_json(res)
        oracle = generator_covariance_oracle(s, u, p)
        dev = check_limit_deviation_bound(s, u, p, args.t)
        small = check_small_time_limit(s, u, p)
        entry["oracle"] = _complex(oracle)
        entry["oracle_agrees"] = bool(abs(oracle - res.covariance) <= 1e-4)
        entry["deviation_bound"] = {"lhs": _num(dev.lhs), "rhs": _num(dev.rhs), "holds": dev.holds,
                                    "partition_holds": dev.partition_holds}
        entry["small_time_limit"] = small
        if not (entry["oracle_agrees"] and dev.holds and dev.partition_holds and small):
            status = EXIT_FAIL
        pairs.append(entry)
    run.lap("covariance")
    return {"pairs": pairs}, status


def _index_json(rep):
    if rep.no_units_flag:
        return {"no_units_flag": True, "budget": rep.budget, "summary": rep.summary()}
    return {
        "no_units_flag": False,
        "units_used": list(rep.units_used),
        "c_matrix": matrix_to_json(rep.c_matrix),
        "gram": matrix_to_json(rep.gram) if rep.gram.size else [],
        "eigenvalues": [_num(x) for x in rep.eigenvalues],
        "index_lower_bound": rep.index_lower_bound,
        "cpd_margin": _num(rep.cpd_margin),
        "summary": rep.summary(),
    }


def cmd_index(doc, args, run):
    p = doc.semigroup()
    units, _ = _units_for(doc, p, args, run)
    run.lap("units")
    rep = index_lower_bound(units, p, doc.options.rank_tol, budget=doc.options.budget,
                            depth_max=doc.options.depth_max)
    run.lap("index")
    run.diagnostics.extend(rep.diagnostics)
    return _index_json(rep), EXIT_OK if rep.consistent else EXIT_FAIL


def cmd_tensor_index(doc, args, run):
    if not args.other:
        raise DocumentError("--other", "tensor-index needs a second document")
    other = load_document(args.other)
    p, q = doc.semigroup(), other.semigroup()
    if p.dim * q.dim > 8:
        raise DimensionError(f"tensor dimension {p.dim * q.dim} exceeds the supported maximum 8")
    up, _ = _units_for(doc, p, args, run)
    uq, _ = _units_for(other, q, args, run)
    if not up or not uq:
        return {"no_units_flag": True}, EXIT_OK
    run.lap("units")
    rep = additivity_check(p, q, up, uq, doc.options.rank_tol)
    run.lap("additivity")
    results = {
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "product_kernel_ok": rep.product_kernel_ok,
        "max_kernel_error": _num(rep.max_kernel_error),
        "product_units": list(rep.product_labels),
        "unverified": list(rep.unverified),
    }
    return results, EXIT_OK if rep.consistent else EXIT_FAIL


def cmd_dilation(doc, args, run):
    p = doc.semigroup()
    units = list(doc.unit_candidates)
    rep = trivial_dilation_check(p, units)
    run.lap("dilation")
    results = {
        "passed": rep.passed,
        "intertwiner_ok": rep.intertwiner_ok,
        "intertwiner_gap": _num(rep.intertwiner_gap),
        "partition_ok": rep.partition_ok,
        "partition_gap": _num(rep.partition_gap),
        "identity_gap": _num(rep.identity_gap),
        "index_direct": rep.index_direct,
        "index_partition": rep.index_partition,
    }
    return results, EXIT_OK if rep.passed else EXIT_FAIL


def cmd_selftest(args, run):
    paths = [Path(args.document)] if args.document else None
    checks = run_selftest(paths, args.seed)
    run.lap("selftest")
    suites: dict[str, dict[str, int]] = {}
    for c in checks:
        s = suites.setdefault(c.suite, {"passed": 0, "failed": 0})
        s["passed" if c.passed else "failed"] += 1
    failed = [c.to_json() for c in checks if not c.passed]
    results = {
        "total": len(checks),
        "passed": sum(1 for c in checks if c.passed),
        "failed": len(failed),
        "suites": suites,
        "failures": failed,
    }
    return results, EXIT_OK if not failed else EXIT_FAIL


HANDLERS = {
    "mos": cmd_mos,
    "verify-unit": cmd_verify_unit,
    "discover-units": cmd_discover,
    "covariance": cmd_covariance,
    "index": cmd_index,
    "tensor-index": cmd_tensor_index,
    "dilation-check": cmd_dilation,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mosgroup", description="Metric operator spaces, units and index of CP semigroups.")
    ap.add_argument("--version", action="version", version=f"mosgroup {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("document", nargs="?", help="problem document (JSON); optional for selftest")
    ap.add_argument("--t", type=float, default=1.0, help="time for mos and covariance (default 1)")
    ap.add_argument("--other", help="second document for tensor-index")
    ap.add_argument("--pretty", action="store_true", help="also print a table to stderr")
    ap.add_argument("--seed", type=int, default=None, help="override options.seed")
    ap.add_argument("--depth", type=int, default=None, help="override options.depth_max")
    return ap


def _with_overrides(doc: ProblemDocument, args) -> ProblemDocument:
    opts = doc.options
    if args.depth is not None:
        if not 1 <= args.depth <= 14:
            raise DocumentError("--depth", "expected an integer in [1, 14]")
        opts = dataclasses.replace(opts, depth_max=args.depth)
    if args.seed is None:
        args.seed = opts.seed
    elif args.seed < 0:
        raise DocumentError("--seed", "expected a nonnegative integer")
    else:
        opts = dataclasses.replace(opts, seed=args.seed)
    return dataclasses.replace(doc, options=opts)


def _pretty(report: dict, stream):
    rows = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(obj, list) and obj and all(not isinstance(x, (list, dict)) for x in obj):
            rows.append((prefix, ", ".join(f"{x:.6g}" if isinstance(x, float) else str(x) for x in obj)))
        elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
            for i, x in enumerate(obj):
                walk(f"{prefix}[{i}]", x)
        elif isinstance(obj, list):
            rows.append((prefix, f"<{len(obj)} rows>" if obj else "[]"))
        else:
            rows.append((prefix, f"{obj:.6g}" if isinstance(obj, float) else str(obj)))

    walk("", report["results"])
    width = max((len(k) for k, _ in rows), default=0)
    print(f"{report['command']}  digest {report['inputs_digest'][:16]}", file=stream)
    for k, v in rows:
        print(f"  {k.ljust(width)}  {v}", file=stream)
    for d in report["diagnostics"]:
        print(f"  warning: {d}", file=stream)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    rep = Run(args.command)
    digest = ""
    try:
        if args.command == "selftest":
            if args.seed is None:
                args.seed = 42
            if args.document:
                digest = load_document(args.document).digest()
            else:
                digest = canonical_digest({"selftest": "shipped", "seed": args.seed})
            rep.lap("load")
            results, code = cmd_selftest(args, rep)
        else:
            if not args.document:
                raise DocumentError("document", f"{args.command} needs a document path")
            if not 0 < args.t <= MAX_TIME:
                raise DocumentError("--t", f"expected a time in (0, {MAX_TIME:g}]")
            doc = _with_overrides(load_document(args.document), args)
            digest = doc.digest()
            rep.lap("load")
            results, code = HANDLERS[args.command](doc, args, rep)
    except DocumentError as exc:
        print(f"mosgroup: malformed input at {exc.path}: {exc.message}", file=stderr)
        results, code = {"error": {"path": exc.path, "message": exc.message}}, EXIT_INPUT
    except DimensionError as exc:
        print(f"mosgroup: {exc}", file=stderr)
        results, code = {"error": {"path": "dim", "message": str(exc)}}, EXIT_INPUT
    except NotMultiplicativeError as exc:
        print(f"mosgroup: {exc}", file=stderr)
        results, code = {"error": {"message": str(exc)}}, EXIT_FAIL
    except (MosgroupError, ValueError) as exc:
        print(f"mosgroup: {exc}", file=stderr)
        results, code = {"error": {"message": str(exc)}}, EXIT_FAIL
    report = {
        "command": args.command,
        "inputs_digest": digest,
        "results": results,
        "diagnostics": rep.diagnostics,
        "timings": rep.timings,
    }
    stdout.write(json.dumps(report, indent=2) + "\n")
    if args.pretty:
        _pretty(report, stderr)
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())

"""carnot-lab command line.

Exit status: 0 on success, 1 on a domain error, 2 on a usage error.  With
``--json`` every report (and every domain error) is a single JSON object on
stdout with sorted keys, so seeded runs are byte-comparable.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .algebra import GradedVector, algebra_to_dict, load_algebra, save_algebra
from .bch import BCHEngine
from .catalog import FAMILIES, default_entries, entry
from .classify import heisenberg_product_certify, rigidity_classify
from .exceptions import CarnotError, DecompositionIncomplete, UnequalSummandDimensions
from .maps import DilationMap, FhMap, IdentityMap, PiecewisePolynomial, distortion_estimate, ottazzi_basis
from .metric import HomogeneousMetric
from .rank import DEFAULT_BUDGET, DEFAULT_RESTARTS, min_rank_search


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _vector(text: str, dim: int) -> GradedVector:
    try:
        coords = tuple(Fraction(t.strip()) for t in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad vector {text!r}: {exc}") from exc
    if len(coords) != dim:
        raise UsageError(f"vector {text!r} has {len(coords)} entries, the algebra has dimension {dim}")
    return GradedVector(coords)


def _load(args):
    path = args.algebra or args.file
    if not path:
        raise UsageError("an algebra file is required (positional or --algebra)")
    return load_algebra(path)


def _emit(report: dict, args, lines=None) -> None:
    if args.json:
        print(json.dumps(report, sort_keys=True))
        return
    for line in lines if lines is not None else _human(report):
        print(line)


def _human(report: dict, indent: str = ""):
    for key in sorted(report):
        value = report[key]
        if isinstance(value, dict):
            yield f"{indent}{key}:"
            yield from _human(value, indent + "  ")
        else:
            yield f"{indent}{key}: {json.dumps(value) if isinstance(value, list) else value}"


def _classify(a, args):
    return rigidity_classify(a, seed=args.seed, restarts=args.restarts)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args):
    a = _load(args)
    report = {"valid": True, "name": a.name, "layers": list(a.layer_dims), "dim": a.dim, "step": a.step}
    _emit(report, args)


def cmd_classify(args):
    v = _classify(_load(args), args)
    _emit(v.to_dict(), args)


def cmd_rank(args):
    a = _load(args)
    r = min_rank_search(a, args.field, restarts=args.restarts, seed=args.seed,
                        rationalize_budget=args.budget, max_rank=args.max_rank)
    _emit(r.to_dict(), args)


def cmd_bch(args):
    a = _load(args)
    e = BCHEngine(a)
    z = e.product(_vector(args.x, a.dim), _vector(args.y, a.dim))
    text = ",".join(str(c) for c in z.coords)
    _emit({"product": text}, args, [text])


def cmd_norm(args):
    a = _load(args)
    m = HomogeneousMetric(a, args.layer_norm)
    value = m.norm(_vector(args.x, a.dim))
    _emit({"norm": value}, args, [repr(value)])


def cmd_distance(args):
    a = _load(args)
    m = HomogeneousMetric(a, args.layer_norm)
    value = m.distance(_vector(args.x, a.dim), _vector(args.y, a.dim))
    _emit({"distance": value}, args, [repr(value)])


def _decomposition(a, args):
    v = _classify(a, args)
    if v.decomposition is None:
        raise DecompositionIncomplete(f"no Heisenberg decomposition (case {v.case})")
    return v.decomposition


def cmd_decompose(args):
    d = _decomposition(_load(args), args)
    _emit(d.to_dict(), args)


def _matrices(path):
    with open(path) as fh:
        data = json.load(fh)
    try:
        return [[[Fraction(str(c)) for c in row] for row in M] for M in data]
    except (TypeError, ValueError) as exc:
        raise CarnotError(f"malformed automorphism list: {exc}") from exc


def cmd_certify(args):
    d = _decomposition(_load(args), args)
    autos = _matrices(args.automorphisms) if args.automorphisms else None
    try:
        cert = heisenberg_product_certify(d, autos)
    except UnequalSummandDimensions as exc:
        exc.report = exc.certificate.to_dict()
        raise
    _emit(cert.to_dict(), args)


def cmd_distort(args):
    a = _load(args)
    m = HomogeneousMetric(a, args.layer_norm)
    if args.map == "identity":
        fmap = IdentityMap()
    elif args.map == "dilation":
        fmap = DilationMap(a, Fraction(args.t))
    else:
        if not args.e2 or not args.h:
            raise UsageError("--map fh needs --e2 and --h")
        basis = ottazzi_basis(a, _vector(args.e2, a.dim))
        fmap = FhMap(basis, PiecewisePolynomial.load(args.h))
    scales = tuple(float(Fraction(s)) for s in args.scales.split(","))
    report = distortion_estimate(m, fmap, args.pairs, scales, seed=args.seed)
    report["map"] = args.map
    _emit(report, args)


def cmd_catalog(args):
    if args.action == "list":
        rows = [{"family": name, "parameters": FAMILIES[name]} for name in FAMILIES]
        defaults = [{"name": e.name, "parameters": e.parameters, "known_facts": e.known_facts} for e in default_entries()]
        lines = [f"{r['family']} {r['parameters']}".rstrip() for r in rows]
        _emit({"families": rows, "entries": defaults}, args, lines)
        return
    if not args.name:
        raise UsageError("catalog emit needs a family name")
    a = entry(args.name, *args.params).build()
    if args.output:
        save_algebra(a, args.output)
        _emit({"written": args.output, "layers": list(a.layer_dims)}, args, [f"wrote {args.output}"])
    else:
        print(json.dumps(algebra_to_dict(a), sort_keys=True))


# ---------------------------------------------------------------------------
# parser


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carnot-lab", description="Exact computations on Carnot groups.")
    p.add_argument("--version", action="version", version=f"carnot-lab {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, fn, help_text, algebra=True, seeded=False):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=fn)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        if algebra:
            sp.add_argument("file", nargs="?", help="algebra JSON file")
            sp.add_argument("--algebra", help="algebra JSON file")
        if seeded:
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
        return sp

    command("validate", cmd_validate, "check an algebra file")
    command("classify", cmd_classify, "rigidity verdict", seeded=True)
    sp = command("rank", cmd_rank, "minimum first-layer rank", seeded=True)
    sp.add_argument("--field", choices=("real", "complex"), default="real")
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="denominator budget for rationalization")
    sp.add_argument("--max-rank", type=int, default=None)
    sp = command("bch", cmd_bch, "group product x*y")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    for name, fn, two in (("norm", cmd_norm, False), ("distance", cmd_distance, True)):
        sp = command(name, fn, f"homogeneous {name}")
        sp.add_argument("--x", required=True)
        if two:
            sp.add_argument("--y", required=True)
        sp.add_argument("--layer-norm", choices=("euclidean", "max"), default="euclidean")
    command("decompose", cmd_decompose, "Heisenberg sum decomposition", seeded=True)
    sp = command("certify", cmd_certify, "Heisenberg product certificate", seeded=True)
    sp.add_argument("--automorphisms", help="JSON list of square matrices on the reconstruction")
    sp = command("distort", cmd_distort, "empirical distortion of a map")
    sp.add_argument("--map", choices=("fh", "identity", "dilation"), default="fh")
    sp.add_argument("--e2")
    sp.add_argument("--h", help="piecewise polynomial JSON file")
    sp.add_argument("--t", default="2", help="dilation factor")
    sp.add_argument("--pairs", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scales", default="1/4,1,4")
    sp.add_argument("--layer-norm", choices=("euclidean", "max"), default="euclidean")
    sp = command("catalog", cmd_catalog, "list or emit catalog algebras", algebra=False)
    sp.add_argument("action", choices=("list", "emit"))
    sp.add_argument("name", nargs="?")
    sp.add_argument("params", nargs="*", type=int)
    sp.add_argument("-o", "--output")
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = _parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a command is required")
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (CarnotError, OSError, json.JSONDecodeError) as exc:
        if as_json:
            err = {"error": type(exc).__name__, "message": str(exc)}
            if getattr(exc, "report", None) is not None:
                err["report"] = exc.report
            print(json.dumps(err, sort_keys=True))
        else:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

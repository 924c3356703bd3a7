"""Command-line front end: every subcommand prints one JSON object.

Exit status is 0 for any verdict, 2 when a search ends Inconclusive and 1 on
input errors.  Timing and search sizes live under "stats" so the rest of the
output is deterministic.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

from . import __version__
from .freegroup import WordError, format_word, norm, parse_automorphism
from .generators import cmt_automorphisms
from .outerspace import (
    GraphError,
    MarkedMetricGraph,
    candidates,
    displacement,
    graph_from_json,
    graph_to_json,
    min_displacement,
    translation_length,
)
from .plmap import find_train_track
from .stallings import visibly_reducible

EXIT_OK, EXIT_INPUT, EXIT_INCONCLUSIVE = 0, 1, 2


class InputError(Exception):
    pass


def _num(x) -> dict:
    x = Fraction(x)
    return {"exact": str(x), "decimal": float(x)}


def _load_graph(path: str | None, rank: int | None) -> MarkedMetricGraph:
    if path is None:
        return MarkedMetricGraph.uniform_rose(rank)
    try:
        with open(path) as fh:
            X = graph_from_json(json.load(fh))
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc)) from None
    except json.JSONDecodeError as exc:
        raise InputError("%s: invalid JSON at line %d column %d" % (path, exc.lineno, exc.colno)) from None
    if rank is not None and X.rank != rank:
        raise InputError("graph has rank %d, automorphism has rank %d" % (X.rank, rank))
    return X


def _phi(text: str):
    try:
        return parse_automorphism(text)
    except WordError as exc:
        raise InputError(str(exc)) from None


def _write_trace(path: str, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_norm(args) -> tuple[dict, int]:
    phi = _phi(args.phi)
    x = norm(phi)
    return {"norm": str(x), "decimal": float(x)}, EXIT_OK


def _graph_and_phi(args):
    # accepts "[graph.json] phi" positionally as well as --graph
    if len(args.inputs) > 2:
        raise InputError("expected [graph.json] phi")
    graph = args.graph
    if len(args.inputs) == 2:
        if graph is not None:
            raise InputError("graph given twice")
        graph = args.inputs[0]
    phi = _phi(args.inputs[-1])
    return _load_graph(graph, phi.rank), phi


def cmd_displacement(args):
    X, phi = _graph_and_phi(args)
    lam = displacement(X, phi)
    # report a candidate loop realising the maximum
    Y = X.act(phi)
    best = None
    for c in candidates(X.spec):
        w = X.spec.loop_word(c.loop)
        if translation_length(Y, w) == lam * translation_length(X, w):
            best = format_word(w)
            break
    return {"lambda": _num(lam), "realised_by": best, "graph": graph_to_json(X)}, EXIT_OK


def cmd_min_displacement(args):
    X, phi = _graph_and_phi(args)
    r = min_displacement(X.spec, phi)
    return {
        "lambda": _num(r.value),
        "lengths": [str(x) for x in r.lengths],
        "boundary": r.boundary,
        "graph": graph_to_json(X.with_lengths(r.lengths)),
        "stats": {"iterations": r.iterations},
    }, EXIT_OK


def cmd_candidates(args):
    if args.graph is None and args.rank is None:
        raise InputError("give --graph or --rank")
    if args.graph is not None:
        X = _load_graph(args.graph, None)
    else:
        X = MarkedMetricGraph.uniform_rose(args.rank)
    out = []
    for c in candidates(X.spec):
        out.append({"kind": c.kind, "loop": list(c.loop), "word": format_word(X.spec.loop_word(c.loop))})
    return {"rank": X.rank, "count": len(out), "candidates": out}, EXIT_OK


def cmd_train_track(args):
    phi = _phi(args.phi)
    start = _load_graph(args.start, phi.rank) if args.start else None
    r = find_train_track(phi, start=start, max_folds=args.max_folds, time_cap=args.time_cap)
    if args.trace:
        _write_trace(args.trace, r.trace, ["step", "simplex", "lambda", "tension_edges"])
    out = {
        "status": r.status,
        "lambda": _num(r.lam),
        "graph": graph_to_json(r.point),
        "map": r.map.to_json() if r.map is not None else None,
        "stats": {"folds": r.folds, "steps": len(r.trace)},
    }
    if r.witness is not None:
        out["witness"] = [format_word(w) for w in r.witness]
    return out, EXIT_INCONCLUSIVE if r.status == "inconclusive" else EXIT_OK


def _search_config(args):
    from .decide import SearchConfig

    return SearchConfig(
        mu=Fraction(args.mu) if args.mu is not None else None,
        node_cap=args.node_cap,
        time_cap=args.time_cap,
        use_full_K=args.cap_norm is None,
        cap_norm=Fraction(args.cap_norm) if args.cap_norm is not None else None,
    )


def _verdict_output(v):
    out = v.to_json()
    out["stats"] = v.stats
    return out, EXIT_INCONCLUSIVE if v.tag == "Inconclusive" else EXIT_OK


def cmd_conjugate(args):
    from .decide import SearchError, conjugate_irreducible

    phi, psi = _phi(args.phi), _phi(args.psi)
    if phi.rank != psi.rank:
        raise InputError("rank mismatch: %d vs %d" % (phi.rank, psi.rank))
    try:
        v = conjugate_irreducible(phi, psi, _search_config(args))
    except SearchError as exc:
        raise InputError(str(exc)) from None
    if args.trace:
        rows = [(who,) + tuple(row) for who, p in (("phi", phi), ("psi", psi)) for row in find_train_track(p).trace]
        _write_trace(args.trace, rows, ["input", "step", "simplex", "lambda", "tension_edges"])
    return _verdict_output(v)


def cmd_irreducible(args):
    from .decide import SearchError, abelian_irreducibility_certificate, is_irreducible, rank_one_factor_check

    phi = _phi(args.phi)
    try:
        v = is_irreducible(phi, _search_config(args))
    except SearchError as exc:
        raise InputError(str(exc)) from None
    out, code = _verdict_output(v)
    if args.cross_check:
        out["rank_one_factors"] = rank_one_factor_check(phi, args.cross_length)
        out["abelian_certificate"] = abelian_irreducibility_certificate(phi)
    return out, code


def cmd_cmt_gens(args):
    try:
        gens = cmt_automorphisms(args.rank, closure=args.closure)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return gens.to_json(), EXIT_OK


def cmd_visibly_reducible(args):
    phi = _phi(args.phi)
    parts = visibly_reducible(phi)
    if parts is None:
        return {"reducible": False}, EXIT_OK
    return {
        "reducible": True,
        "partition": [[format_word((i + 1,)) for i in p] for p in parts],
    }, EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freeout", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("norm", help="norm realised by cyclic words of length <= 2")
    s.add_argument("phi")
    s.set_defaults(func=cmd_norm)

    for name, func, helptext in (
        ("displacement", cmd_displacement, "Lambda(X, phi X) at a point"),
        ("min-displacement", cmd_min_displacement, "minimize the displacement over a simplex"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("inputs", nargs="+", metavar="[graph.json] phi")
        s.add_argument("--graph", "--simplex", help="marked metric graph JSON (default: uniform rose)")
        s.set_defaults(func=func)

    s = sub.add_parser("candidates", help="candidate loops of a graph")
    s.add_argument("--graph")
    s.add_argument("--rank", type=int)
    s.set_defaults(func=cmd_candidates)

    s = sub.add_parser("train-track", help="search for a train-track point")
    s.add_argument("phi")
    s.add_argument("--start", help="starting graph JSON")
    s.add_argument("--max-folds", type=int, default=50)
    s.add_argument("--time-cap", type=float, default=30.0)
    s.add_argument("--trace", help="write per-step CSV (simplex, lambda, tension size)")
    s.set_defaults(func=cmd_train_track)

    def search_options(s):
        s.add_argument("--mu", help="rational mu above the norms (default: least integer above)")
        s.add_argument("--node-cap", type=int, default=10**6)
        s.add_argument("--time-cap", type=float, default=60.0)
        g = s.add_mutually_exclusive_group()
        g.add_argument("--cap-norm", help="prune at this norm instead of the full bound K")
        g.add_argument("--full-k", action="store_true", help="prune at the full bound K (default)")

    s = sub.add_parser("conjugate", help="conjugacy of irreducible classes")
    s.add_argument("phi")
    s.add_argument("psi")
    search_options(s)
    s.add_argument("--trace", help="write the train-track traces of both inputs as CSV")
    s.set_defaults(func=cmd_conjugate)

    s = sub.add_parser("irreducible", help="irreducibility detection")
    s.add_argument("phi")
    search_options(s)
    s.add_argument("--cross-check", action="store_true", help="add the rank-one factor search and the abelian certificate")
    s.add_argument("--cross-length", type=int, default=6)
    s.set_defaults(func=cmd_irreducible)

    s = sub.add_parser("cmt-gens", help="list the CMT generating set")
    s.add_argument("--rank", type=int, required=True)
    s.add_argument("--closure", choices=("auto", "full", "raw"), default="auto")
    s.add_argument("--json", action="store_true", help="accepted for compatibility; output is always JSON")
    s.set_defaults(func=cmd_cmt_gens)

    s = sub.add_parser("visibly-reducible", help="visible reducibility in the standard basis")
    s.add_argument("phi")
    s.set_defaults(func=cmd_visibly_reducible)
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        out, code = args.func(args)
    except (InputError, GraphError, WordError) as exc:
        json.dump({"error": str(exc)}, stdout)
        stdout.write("\n")
        return EXIT_INPUT
    json.dump(out, stdout)
    stdout.write("\n")
    return code


def main():
    sys.exit(run())

"""Command-line interface.

Exit codes: 0 success, 1 validation or configuration error, 2 numeric
failure (frozen margin, non-convergence, golden mismatch).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import tables
from .classifier import PerformanceReport, simulate
from .documents import (
    EvidenceBlock, build_net, dump_net, load_net, load_net_document, load_scenario,
    net_to_document, parse_evidence,
)
from .errors import ConvergenceError, LegNetError, NumericError, ValidationError
from .net import consistency_error, converge, marginal_of, single_pass, validate

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


def _f7(x: float) -> str:
    return f"{x:.7f}"


def _emit_rows(header: list[str], rows: list[list], fmt: str, out):
    if fmt == "rows":
        for r in rows:
            out.write(json.dumps(dict(zip(header, r))) + "\n")
        return
    cells = [[c if isinstance(c, str) else _f7(c) if isinstance(c, float) else str(c) for c in r]
             for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(header)]
    out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    for r in cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def cmd_reproduce(args, out) -> int:
    rows = tables.reproduce()
    titles = {"1a": "Table 1(a): single pass, I1 then I2", "1b": "Table 1(b): single pass, I2 then I1",
              "2a": "Table 2(a): three sweeps, I1 then I2", "2b": "Table 2(b): three sweeps, I2 then I1"}
    if args.format == "rows":
        for r in rows:
            out.write(json.dumps({
                "table": r.label, "iteration": r.iteration, "variable": r.variable,
                "P(I1)": r.values[0], "P(I2)": r.values[1], "P(O)": r.values[2], "error": r.values[3],
                "expected": list(r.expected), "deviation": r.deviation, "ok": r.ok}) + "\n")
    else:
        for label in ("1a", "1b", "2a", "2b"):
            out.write(f"{titles[label]}\n")
            sweep = label.startswith("2")
            cols = " ".join(f"{h:<9}" for h in ("P(I1)", "P(I2)", "P(O)", "Error"))
            out.write(("Iter  " if sweep else "") + f"Var  {cols} Match\n")
            for r in rows:
                if r.label != label:
                    continue
                prefix = f"{r.iteration:<4}  " if sweep else ""
                mark = "ok" if r.ok else f"MISMATCH (dev {r.deviation:.2e})"
                out.write(f"{prefix}{r.variable:<4} {' '.join(_f7(v) for v in r.values)} {mark}\n")
            out.write("\n")
    bad = [r for r in rows if not r.ok]
    if bad:
        sys.stderr.write(f"{len(bad)} row(s) differ from the golden values\n")
        return EXIT_NUMERIC
    return EXIT_OK


def _evidence(args, net):
    ev = parse_evidence(args.evidence)
    for v in ev:
        net.containing(v)
    if getattr(args, "order", "given") == "sorted":
        ev = dict(sorted(ev.items()))
    return ev


def cmd_propagate(args, out) -> int:
    net = load_net(args.net)
    ev = _evidence(args, net)
    post = single_pass(net, ev)
    rows = [[v, marginal_of(post, v)] for v in post.variables]
    _emit_rows(["variable", "marginal"], rows, args.format, out)
    return EXIT_OK


def cmd_converge(args, out) -> int:
    net = load_net(args.net)
    ev = _evidence(args, net)
    try:
        _, report = converge(net, ev, tol=args.tol, max_iter=args.max_iter)
    except NumericError as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            _emit_report(report, ev, net, args.format, out)
        raise
    _emit_report(report, ev, net, args.format, out)
    status = "converged" if report.converged else "did not converge"
    sys.stderr.write(f"{status} after {report.iterations_used} sweep(s), {len(report.rows)} update(s)\n")
    if not report.converged:
        raise ConvergenceError(f"no convergence to tol {args.tol:g} within {args.max_iter} sweeps")
    return EXIT_OK


def _emit_report(report, ev, net, fmt, out):
    goals = list(report.rows[0].goals) if report.rows else list(net.goal_variables())
    header = ["iteration", "variable"] + [f"P({v})" for v in ev] + [f"P({g})" for g in goals] + ["error"]
    rows = [[r.iteration, r.variable] + [r.evidence[v] for v in ev] + [r.goals[g] for g in goals] + [r.error]
            for r in report.rows]
    _emit_rows(header, rows, fmt, out)


def cmd_check(args, out) -> int:
    doc = load_net_document(args.net)
    net = build_net(doc)
    diags = validate(net)
    for d in diags:
        line = doc.leg_line(d.legs[0]) if d.legs else None
        where = f"{args.net}:{line}: " if line else f"{args.net}: "
        if args.format == "rows":
            out.write(json.dumps({"file": str(args.net), "line": line, "code": d.code, "message": d.message}) + "\n")
        else:
            out.write(f"{where}{d.message}\n")
    if diags:
        return EXIT_INVALID
    err = consistency_error(net)
    if args.format == "rows":
        out.write(json.dumps({"file": str(args.net), "legs": len(net.legs), "variables": len(net.variables),
                              "consistency_error": err}) + "\n")
    else:
        out.write(f"{args.net}: ok ({len(net.legs)} LEGs, {len(net.variables)} variables, "
                  f"consistency error {err:.3g})\n")
    return EXIT_OK


def cmd_estimate(args, out) -> int:
    doc = load_net_document(args.constraints)
    net = build_net(doc)
    text = dump_net(net_to_document(net, [EvidenceBlock(e.name, e.targets) for e in doc.evidence]))
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    if args.out:
        rows = [[leg.name, v, marginal_of(net, v)] for leg in net.legs for v in leg.vars]
        _emit_rows(["leg", "variable", "marginal"], rows, args.format, out)
    return EXIT_OK


def format_report(report: PerformanceReport, fmt: str, out):
    header = ["pipeline", "correct_y", "correct_n", "wrong_y", "wrong_n", "unknown", "score"]
    rows = []
    for name, res in report.results.items():
        c = res.counts
        rows.append([name, c.correct_y, c.correct_n, c.wrong_y, c.wrong_n, c.unknown, res.score])
    if fmt == "rows":
        _emit_rows(header, rows, fmt, out)
        for name, res in report.results.items():
            for oi, trace in enumerate(res.traces):
                out.write(json.dumps({"pipeline": name, "object": oi, "labels": trace,
                                      "fused": res.fused[oi]}) + "\n")
        return
    out.write(f"{report.objects} objects x {report.slots} slots ({report.runtime_s:.2f} s)\n")
    _emit_rows(header, [r[:-1] + [f"{r[-1]:g}"] for r in rows], fmt, out)


def cmd_simulate(args, out) -> int:
    report = simulate(load_scenario(args.scenario))
    if args.out:
        with open(args.out, "w") as fh:
            format_report(report, "rows", fh)
    format_report(report, args.format, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="legnet", description="LEG Net updating and slot classification tools")
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("table", "rows"), default="table",
                     help="human-readable table or JSON lines (default: table)")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("reproduce-tables", parents=[fmt], help="recompute the worked-example update tables")

    sp = sub.add_parser("propagate", parents=[fmt], help="apply evidence once and print marginals")
    sp.add_argument("--net", required=True, help="net document (or builtin:figure2)")
    sp.add_argument("--evidence", required=True, metavar="V=P[,V=P...]")
    sp.add_argument("--order", choices=("given", "sorted"), default="given")

    sp = sub.add_parser("converge", parents=[fmt], help="iterate evidence until the marginals settle")
    sp.add_argument("--net", required=True)
    sp.add_argument("--evidence", required=True, metavar="V=P[,V=P...]")
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-iter", type=int, default=50)

    sp = sub.add_parser("check", parents=[fmt], help="validate a net document")
    sp.add_argument("--net", required=True)

    sp = sub.add_parser("estimate", parents=[fmt], help="estimate CMDs from constraint blocks")
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--out")

    sp = sub.add_parser("simulate", parents=[fmt], help="run a Monte Carlo scenario")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", help="also write machine-readable rows here")
    return p


COMMANDS = {
    "reproduce-tables": cmd_reproduce, "propagate": cmd_propagate, "converge": cmd_converge,
    "check": cmd_check, "estimate": cmd_estimate, "simulate": cmd_simulate,
}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except ValidationError as exc:
        source = getattr(args, "net", None) or getattr(args, "scenario", None) or getattr(args, "constraints", None)
        prefix = f"{source}:{exc.line}: " if source and exc.line else (f"{source}: " if source else "")
        msg = super(ValidationError, exc).__str__()
        sys.stderr.write(f"error: {prefix}{msg}\n")
        return EXIT_INVALID
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc.filename}: file not found\n")
        return EXIT_INVALID
    except NumericError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except LegNetError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

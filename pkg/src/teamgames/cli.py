"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid game or mismatched document,
3 the CIB search produced a no-fixed-point report (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import builtins as bi
from .analysis import analyze
from .coordinator import BudgetExceeded
from .model import GameSpec, SpecError, dump_spec, load_spec
from .serialize import DocumentError, dumps, load_strategies, profile_document, solution_document
from .solver import (
    NoFixedPointReport,
    SolverConfig,
    SolverError,
    certify_nonexistence_tiny,
    solve_cib,
    solve_layered,
    solve_signaling_free,
)
from .spib import SPIBConfig, solve_spib
from .verifier import bne_enumerate_tiny, nash_gap, simulate

EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_NO_FIXED_POINT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", type=Path, help="game description (JSON)")
    src.add_argument("--builtin", help="name of a built-in game")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="built-in parameter")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="write the machine-readable document here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="teamgames", description="Solve and verify dynamic games among teams.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="construct an equilibrium")
    _add_source(p)
    _add_output(p)
    p.add_argument("--mode", choices=["cib", "spib", "signaling-free", "layered"], default="cib")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--offpath-policy", choices=["signaling-free", "uniform"], default="signaling-free")
    p.add_argument("--simple", action="store_true", help="simple prescriptions (separable games only)")
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-outer-iters", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("verify", help="exact Nash gap of a solution or profile")
    _add_source(p)
    _add_output(p)
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full-history", action="store_true", help="responders read their whole history")
    p.add_argument("--dp-trace", type=Path, help="write the best-response tables as TSV")

    p = sub.add_parser("simulate", help="Monte Carlo payoffs of a solution or profile")
    _add_source(p)
    _add_output(p)
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("-n", "--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("enumerate-bne", help="all equilibria of a tiny two-team game")
    _add_source(p)
    _add_output(p)
    p.add_argument("--budget", type=int, help="pure-strategy cap per team")
    p.add_argument("--certify", action="store_true", help="also run the CIB measurability check")

    p = sub.add_parser("analyze", help="dependency graph, class predicates and sizes")
    _add_source(p)
    _add_output(p)

    p = sub.add_parser("examples", help="list or emit built-in games")
    p.add_argument("name", nargs="?")
    p.add_argument("--param", action="append", default=[], metavar="K=V")
    _add_output(p)
    return parser


def _params(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--param expects K=V, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _spec(args) -> GameSpec:
    if args.spec is not None:
        if args.param:
            raise UsageError("--param only applies to --builtin")
        try:
            text = args.spec.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.spec}: {exc}") from None
        return load_spec(text)
    return bi.builtin(args.builtin, _params(args.param))


def _emit(args, doc: dict, summary: list[str]) -> None:
    text = dumps(doc) + "\n"
    if getattr(args, "out", None) is not None:
        args.out.write_text(text)
        for line in summary:
            print(line)
    else:
        sys.stdout.write(text)
        for line in summary:
            print(line, file=sys.stderr)


def _read_doc(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path} is not JSON: {exc}") from None


# ---------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    spec = _spec(args)
    if args.mode == "spib":
        cfg = SPIBConfig(seed=args.seed, workers=args.workers)
        if args.restarts is not None:
            cfg.restarts = args.restarts
        if args.damping is not None:
            cfg.damping = args.damping
        prof = solve_spib(spec, cfg)
        doc = profile_document(spec, prof.tables, prof.certificate, {k: v for k, v in prof.meta.items()})
        _emit(args, doc, [f"spib profile: {sum(len(t) for t in prof.tables)} cells, verifier epsilon {prof.gap:.3e}"])
        return EXIT_OK
    cfg = SolverConfig(seed=args.seed, workers=args.workers, offpath_policy=args.offpath_policy,
                       simple_mode=args.simple, tol=args.tol)
    if args.restarts is not None:
        cfg.restarts = args.restarts
    if args.max_outer_iters is not None:
        cfg.max_outer_iters = args.max_outer_iters
    if args.damping is not None:
        cfg.damping = args.damping
    if args.mode == "cib":
        result = solve_cib(spec, cfg)
    elif args.mode == "layered":
        result = solve_layered(spec, cfg)
    else:
        result = solve_signaling_free(spec, cfg)
    if isinstance(result, NoFixedPointReport):
        _emit(args, result.as_dict(), [
            f"no fixed point found; obstruction at stage t={result.stage} (failed at t={result.failed_stage})",
            "this is not a proof that no equilibrium exists",
        ])
        return EXIT_NO_FIXED_POINT
    doc = solution_document(result)
    eps = (result.verifier_report or {}).get("epsilon")
    _emit(args, doc, [f"{result.mode} solution: {len(result.cells)} cells, verifier epsilon {eps}"])
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _spec(args)
    doc = _read_doc(args.profile)
    profile = load_strategies(spec, doc)
    cert = nash_gap(spec, profile, workers=args.workers, full_history=args.full_history,
                    dp_trace=str(args.dp_trace) if args.dp_trace else None)
    out = cert.as_dict()
    out["profile_kind"] = doc.get("kind")
    _emit(args, out, [f"epsilon {cert.epsilon:.3e}; payoffs {cert.payoff}"])
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _spec(args)
    doc = _read_doc(args.profile)
    if args.samples <= 0:
        raise UsageError("--samples must be positive")
    means, errs = simulate(spec, load_strategies(spec, doc), args.samples, args.seed)
    out = {"spec_hash": spec.hash, "samples": args.samples, "seed": args.seed, "mean": means, "stderr": errs}
    _emit(args, out, [f"mean payoffs {means} (standard errors {errs})"])
    return EXIT_OK


def cmd_enumerate(args) -> int:
    spec = _spec(args)
    if spec.n_teams != 2:
        raise UsageError("enumerate-bne needs a two-team game")
    eqs = bne_enumerate_tiny(spec, args.budget)
    rows = []
    for eq in eqs:
        row = {
            "payoffs": eq.payoffs,
            "isolated": eq.isolated,
            "support_pairs": len(eq.supports),
            "behavior": [
                [{"t": k[0], "h0": [[list(y), list(u)] for y, u in k[1]], "states": list(k[2]), "probs": list(v)}
                 for k, v in sorted(b.items(), key=lambda kv: repr(kv[0]))]
                for b in eq.behavior
            ],
        }
        if args.builtin == "nonexistence":
            p1, p2, qm, qp = bi.nonexistence_parameters(spec, eq.profile())
            row["parameters"] = {"p": [p1, p2], "q": [qm, qp]}
        rows.append(row)
    out = {"spec_hash": spec.hash, "equilibria": rows}
    summary = [f"{len(eqs)} equilibrium(s) after merging realization-equivalent ones"]
    if args.certify:
        cert = certify_nonexistence_tiny(spec, args.budget)
        out["certification"] = cert.as_dict()
        summary.append(f"certification: {cert.status}" + (f" (stage {cert.stage})" if cert.stage else ""))
    _emit(args, out, summary)
    return EXIT_OK


def cmd_analyze(args) -> int:
    spec = _spec(args)
    info = analyze(spec)
    _emit(args, info, [
        f"T={info['horizon']} d={info['delay']} teams={len(info['teams'])} separable={str(info['separable']).lower()}",
        f"signaling-free={str(info['signaling_free']).lower()} components={info['components']}",
    ])
    return EXIT_OK


def cmd_examples(args) -> int:
    if args.name is None:
        out = {"builtins": sorted(bi.BUILTINS)}
        _emit(args, out, [", ".join(sorted(bi.BUILTINS))])
        return EXIT_OK
    spec = bi.builtin(args.name, _params(args.param))
    text = dump_spec(spec, indent=2) + "\n"
    if args.out is not None:
        args.out.write_text(text)
        print(f"{args.name}: hash {spec.hash}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "enumerate-bne": cmd_enumerate,
    "analyze": cmd_analyze,
    "examples": cmd_examples,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, DocumentError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_SPEC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

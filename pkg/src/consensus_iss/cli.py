"""Command line entry point.

Exit status is 0 on success, 1 when a run completes but one of its checks
fails, and 2 when the configuration (or graph file) is unusable. Flags given
on the command line override the matching fields of the config file. Output
goes to ``--outdir`` if given, then to the config's ``output.dir``, then to
``$CONSENSUS_ISS_OUTDIR``, then to ``./runs``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConsensusISSError
from .harness import (
    FIG2_GAMMAS,
    certify_config,
    load_config,
    reproduce_fig2,
    run_experiment,
    sweep,
)
from .network import assemble_k, metropolis_weights, parse_edge_list, validate_k

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


def _gamma_arg(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _overrides(args):
    return {
        "gamma": getattr(args, "gamma", None),
        "horizon": getattr(args, "horizon", None),
        "seed": getattr(args, "seed", None),
        "algorithm": getattr(args, "algorithm", None),
        "stride": getattr(args, "stride", None),
    }


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(**_overrides(args))


def cmd_simulate(args):
    cfg = _load(args)
    report, _ = run_experiment(cfg, outdir=args.outdir)
    print(report.to_json(indent=2))
    if report.iss_holds is False or report.delta_v_holds is False:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_certify(args):
    cfg = _load(args)
    cert = certify_config(cfg)
    print(cert.to_json(indent=2))
    return EXIT_OK


def cmd_validate_graph(args):
    try:
        text = Path(args.edgelist).read_text()
    except OSError as exc:
        raise ConsensusISSError(f"cannot read {args.edgelist}: {exc}") from None
    graph, weights = parse_edge_list(text, n=args.n)
    if weights is None:
        weights = metropolis_weights(graph, args.scale)
    report = validate_k(assemble_k(graph, weights), graph)
    report.add("connected", graph.is_connected())
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report)
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def cmd_reproduce_fig2(args):
    result = reproduce_fig2(outdir=args.outdir, resolution=args.resolution)
    for r in result.runs:
        status = f"diverged at t={r.diverged_at}" if r.diverged else f"bounded, |x - theta*| = {r.final_consensus_error:.3e}"
        print(f"{r.algorithm:18s} gamma={r.gamma:<8g} {status}")
    for name, ok in result.checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    print(f"summary: {result.summary_path}")
    return EXIT_OK if result.ok else EXIT_CHECK_FAILED


def cmd_sweep(args):
    cfg = _load(args)
    result = sweep(cfg, args.gammas, args.amplitudes, outdir=args.outdir, workers=args.workers)
    rows = result.table()
    cols = list(rows[0])
    print(",".join(cols))
    for row in rows:
        print(",".join("" if row[c] is None else str(row[c]) for c in cols))
    failed = any(r.iss_holds is False for line in result.reports for r in line)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="consensus-iss", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("config", help="JSON experiment config")
        sp.add_argument("--gamma", type=_gamma_arg)
        sp.add_argument("--algorithm", choices=("wang_elia", "gradient_tracking"))
        sp.add_argument("--seed", type=int)
        return sp

    sp = with_config(sub.add_parser("simulate", help="run one experiment"))
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--outdir")
    sp.set_defaults(func=cmd_simulate)

    sp = with_config(sub.add_parser("certify", help="print the certificate for a Wang-Elia config"))
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("validate-graph", help="check an edge list yields an admissible K")
    sp.add_argument("edgelist")
    sp.add_argument("--n", type=int, help="number of agents (default: largest id)")
    sp.add_argument("--scale", type=float, default=0.5, help="Metropolis scale for unweighted lists")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_validate_graph)

    sp = sub.add_parser("reproduce-fig2", help="quantized GT versus quantized Wang-Elia")
    sp.add_argument("--outdir")
    sp.add_argument("--resolution", type=float, default=1e-5)
    sp.set_defaults(func=cmd_reproduce_fig2, gammas=FIG2_GAMMAS)

    sp = with_config(sub.add_parser("sweep", help="cross product of step sizes and amplitudes"))
    sp.add_argument("--gammas", type=_gamma_arg, nargs="+", required=True)
    sp.add_argument("--amplitudes", type=float, nargs="+", required=True)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--outdir")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConsensusISSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: seeded runs, file I/O, machine-readable reports.

Every command is a thin composition of library operations.  On success a
single-line JSON summary goes to standard output and declared artifacts are
written to disk; identical invocations produce byte-identical outputs.  On
failure a single-line JSON error report is printed and the exit code tells
the class of failure: 2 for schema/parameter violations, 3 for I/O failures,
4 for exceeded enumeration budgets (with the Monte Carlo fallback suggested),
5 for conditional estimates with no conditioning events.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, dynamics, io, limits, sampler
from .arrays import FiniteArray, pattern_space_size, quantize
from .dynamics import HiddenMajority, HiddenState, RowColumnEntryClocks
from .errors import BudgetExceededError, ConfigError, ExArrayError, InsufficientDataError

EXIT_SCHEMA = 2
EXIT_IO = 3
EXIT_BUDGET = 4
EXIT_INSUFFICIENT = 5


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")


def _write_report(report: dict, path: str | None, fmt: str) -> None:
    if path is None:
        return
    if fmt == "json":
        Path(path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, value in sorted(_flatten(report).items()):
        writer.writerow([key, value])
    Path(path).write_text(buf.getvalue())


def _flatten(obj: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in obj.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            out.update(_flatten(value, name))
        else:
            out[name] = value
    return out


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def _parse_xi(text: str, m: int) -> HiddenState:
    try:
        bits = [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad hidden-type list {text!r}") from exc
    if len(bits) != m:
        raise ConfigError(f"hidden-type list has {len(bits)} entries, state side is {m}")
    return HiddenState(np.array(bits))


def cmd_sample(args: argparse.Namespace) -> dict:
    cfg = io.load_json_config(args.config)
    y, _ = sampler.sample_from_config(cfg, args.m, args.seed)
    io.save_array(y, args.out)
    return {
        "command": "sample",
        "m": y.side,
        "alphabet": io.alphabet_to_json(y.alphabet),
        "out": str(args.out),
    }


def cmd_limit(args: argparse.Namespace) -> dict:
    y = io.load_array(getattr(args, "in"))
    if args.mode == "exact":
        if args.weak:
            mu = limits.empirical_subarray_weak(
                y, args.n, mode="exact", bins=args.bins, budget=args.budget
            )
        else:
            mu = limits.empirical_subarray_exact(y, args.n, bins=args.bins, budget=args.budget)
    else:
        if args.weak:
            mu = limits.empirical_subarray_weak(
                y, args.n, mode="mc", K=args.K, seed=args.seed, bins=args.bins
            )
        else:
            mu = limits.empirical_subarray_mc_pooled(
                y, args.n, args.K, args.seed, bins=args.bins, threads=args.threads
            )
    io.save_measure(mu, args.out)
    return {
        "command": "limit",
        "mode": args.mode,
        "n": args.n,
        "atoms": len(mu),
        "out": str(args.out),
    }


def cmd_graph_density(args: argparse.Namespace) -> dict:
    nF, eF = io.load_edge_list(args.F)
    nG, eG = io.load_edge_list(args.G)
    F = limits.LabeledGraph.from_edges(nF, eF)
    G = limits.LabeledGraph.from_edges(nG, eG)
    ind = limits.graph_ind(F, G, budget=args.budget)
    total = limits.falling_factorial(G.n, F.n)
    return {
        "command": "graph-density",
        "pattern_vertices": F.n,
        "host_vertices": G.n,
        "ind": ind,
        "injections": total,
        "density": ind / total,
    }


def _load_init(args: argparse.Namespace) -> tuple[FiniteArray, np.ndarray | None]:
    if args.init is not None:
        return io.load_array(args.init), None
    cfg = io.load_json_config(args.init_config)
    if args.m is None:
        raise ConfigError("--m is required when the initial state comes from a sampler config")
    return sampler.sample_from_config(cfg, args.m, args.seed)


def cmd_simulate(args: argparse.Namespace) -> dict:
    kernel = dynamics.kernel_from_config(io.load_json_config(args.kernel))
    init, latent = _load_init(args)
    if isinstance(kernel, RowColumnEntryClocks):
        if args.tmax is None:
            raise ConfigError("continuous-time kernels need --tmax")
        traj = dynamics.simulate_ctmc(kernel, init, args.tmax, args.seed)
        events = len(traj.event_log or [])
    else:
        if args.T is None:
            raise ConfigError("discrete-time kernels need --T")
        aux = None
        if isinstance(kernel, HiddenMajority) and kernel.mode == "exact":
            if args.xi is not None:
                aux = _parse_xi(args.xi, init.side)
            elif latent is not None:
                aux = HiddenState(latent)
            else:
                raise ConfigError(
                    "hidden-majority exact mode needs latent types: start from the "
                    "counterexample_initial sampler config or pass --xi"
                )
        traj = dynamics.simulate_discrete(kernel, init, args.T, args.seed, aux=aux)
        events = 0
    io.save_trajectory(traj, args.out)
    return {
        "command": "simulate",
        "kernel": kernel.family,
        "snapshots": len(traj.states),
        "events": events,
        "out": str(args.out),
    }


def cmd_jumps(args: argparse.Namespace) -> dict:
    traj = io.load_trajectory(args.traj)
    events = analysis.classify_jumps(traj, theta_global=args.theta)
    payload = {
        "theta_global": args.theta,
        "events": [
            {
                "t": e.time,
                "class": e.label,
                "index": list(e.index) if isinstance(e.index, tuple) else e.index,
                "changed": [list(c) for c in e.changed],
            }
            for e in events
        ],
    }
    _write_report(payload, args.out, args.format)
    by_class: dict[str, int] = {}
    for e in events:
        by_class[e.label] = by_class.get(e.label, 0) + 1
    return {"command": "jumps", "events": len(events), "by_class": by_class, "out": str(args.out)}


def cmd_markov_test(args: argparse.Namespace) -> dict:
    report = analysis.markov_test(args.m, args.N, args.R, args.seed)
    payload = report.to_json()
    _write_report(payload, args.out, args.format)
    payload["command"] = "markov-test"
    return payload


def cmd_locality_test(args: argparse.Namespace) -> dict:
    kernel = dynamics.kernel_from_config(io.load_json_config(args.kernel))
    x = io.load_array(args.x)
    x_alt = io.load_array(args.x_alt)
    aux = _parse_xi(args.xi, x.side) if args.xi else None
    aux_alt = _parse_xi(args.xi_alt, x_alt.side) if args.xi_alt else None
    tv = analysis.locality_test(
        kernel,
        args.n,
        x,
        x_alt,
        args.T,
        args.R,
        args.seed,
        aux=aux,
        aux_alt=aux_alt,
        threads=args.threads,
    )
    patterns = pattern_space_size(
        x.alphabet, args.n, symmetric=x.symmetric, zero_diagonal=x.zero_diagonal
    )
    payload = {
        "command": "locality-test",
        "tv": tv,
        "noise_band": analysis.mc_noise_band(patterns, args.R),
        "patterns": patterns,
        "runs": args.R,
        "T": args.T,
        "n": args.n,
    }
    _write_report(payload, args.out, args.format)
    return payload


def cmd_exch_test(args: argparse.Namespace) -> dict:
    y = io.load_array(getattr(args, "in"))
    if not y.alphabet.is_finite and args.variant != "row-dispersion":
        y = quantize(y, args.bins)
    report = analysis.exchangeability_test(
        y, args.n, args.P, args.seed, variant=args.variant, K=args.K
    )
    payload = {
        "command": "exch-test",
        "variant": report.variant,
        "statistic": report.statistic,
        "null_band": report.null_band,
    }
    _write_report(payload, args.out, args.format)
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exarray",
        description="Sample, simulate, and statistically analyze exchangeable random arrays.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
        p.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default 0)")
        if out_required:
            p.add_argument("--out", required=True, help="output file path")

    p = sub.add_parser("sample", help="sample an array from a representing-function config")
    p.add_argument("--config", required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    add_common(p)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("limit", help="empirical sub-array distribution of a stored array")
    p.add_argument("--in", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--K", type=_positive_int, default=100_000, help="draws in mc mode")
    p.add_argument("--weak", action="store_true", help="single-injection (symmetric) variant")
    p.add_argument("--bins", type=_positive_int, default=limits.DEFAULT_BINS)
    p.add_argument("--budget", type=_positive_int, default=limits.DEFAULT_BUDGET)
    p.add_argument("--threads", type=_positive_int, default=1)
    add_common(p)
    p.set_defaults(handler=cmd_limit)

    p = sub.add_parser("graph-density", help="induced labelled pattern density of F in G")
    p.add_argument("--F", required=True, help="pattern graph edge list")
    p.add_argument("--G", required=True, help="host graph edge list")
    p.add_argument("--budget", type=_positive_int, default=limits.DEFAULT_BUDGET)
    p.set_defaults(handler=cmd_graph_density)

    p = sub.add_parser("simulate", help="run discrete or continuous-time dynamics")
    p.add_argument("--kernel", required=True, help="kernel config file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--init", help="initial state array file")
    group.add_argument("--init-config", help="sampler config for the initial state")
    p.add_argument("--m", type=_positive_int, help="side when sampling the initial state")
    p.add_argument("--T", type=int, help="number of discrete steps")
    p.add_argument("--tmax", type=float, help="time horizon for continuous kernels")
    p.add_argument("--xi", help="comma-separated latent types for hidden-majority exact mode")
    add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("jumps", help="classify the jumps of a stored trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--theta", type=float, default=analysis.DEFAULT_THETA_GLOBAL)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    add_common(p)
    p.set_defaults(handler=cmd_jumps)

    p = sub.add_parser("markov-test", help="one-step vs history conditioning on the hidden-type chain")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--N", type=_positive_int, required=True)
    p.add_argument("--R", type=_positive_int, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="optional report file")
    p.set_defaults(handler=cmd_markov_test)

    p = sub.add_parser("locality-test", help="restricted-law dependence on the unseen part of the state")
    p.add_argument("--kernel", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--x", required=True, help="first start state file")
    p.add_argument("--x-alt", dest="x_alt", required=True, help="second start state file")
    p.add_argument("--T", type=_positive_int, required=True)
    p.add_argument("--R", type=_positive_int, required=True)
    p.add_argument("--xi", help="latent types for the first start (exact mode)")
    p.add_argument("--xi-alt", dest="xi_alt", help="latent types for the second start")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="optional report file")
    p.set_defaults(handler=cmd_locality_test)

    p = sub.add_parser("exch-test", help="relabelling-invariance probes for one array")
    p.add_argument("--in", required=True)
    p.add_argument("--n", type=_positive_int, default=2)
    p.add_argument("--P", type=_positive_int, default=5, help="random permutations to try")
    p.add_argument("--K", type=_positive_int, default=20_000, help="draws per MC estimate")
    p.add_argument(
        "--variant",
        choices=("row-dispersion", "subarray-mc", "subarray-exact"),
        default="row-dispersion",
    )
    p.add_argument("--bins", type=_positive_int, default=limits.DEFAULT_BINS)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="optional report file")
    p.set_defaults(handler=cmd_exch_test)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        summary = args.handler(args)
    except BudgetExceededError as exc:
        _emit(
            {
                "status": "error",
                "code": EXIT_BUDGET,
                "detail": str(exc),
                "needed": exc.needed,
                "budget": exc.budget,
                "suggestion": exc.suggestion,
            }
        )
        return EXIT_BUDGET
    except InsufficientDataError as exc:
        _emit({"status": "error", "code": EXIT_INSUFFICIENT, "detail": str(exc), "counts": exc.counts})
        return EXIT_INSUFFICIENT
    except (ConfigError, ValueError) as exc:
        _emit({"status": "error", "code": EXIT_SCHEMA, "detail": str(exc)})
        return EXIT_SCHEMA
    except OSError as exc:
        _emit({"status": "error", "code": EXIT_IO, "detail": str(exc)})
        return EXIT_IO
    except ExArrayError as exc:
        _emit({"status": "error", "code": EXIT_SCHEMA, "detail": str(exc)})
        return EXIT_SCHEMA
    summary.setdefault("status", "ok")
    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end for generating, checking, solving, and simulating.

Seven subcommands cover the batch workflow: ``generate`` writes instance
JSON (single draws or a whole benchmark grid), ``check`` validates a
file, ``solve`` runs the branch-and-cut solver, ``separate`` answers one
separation query, ``simulate`` Monte-Carlo-checks a design, ``tradeoff``
sweeps epsilons, and ``bench`` solves a generated grid into a results
table.

Conventions shared by every subcommand: the resolved configuration is
echoed to stderr before any work happens, result tables are append-safe
CSV with a fixed column order (the header is written only when the target
file is new or empty), and exit codes are 0 for success, 1 when the
answer is infeasible or a limit stopped the run (partial outputs are
still written), and 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bnb, instgen, sim
from .model import (
    ModelError,
    NetworkInstance,
    dump_instance,
    load_instance,
    omega_from_epsilon,
)
from .separation import STRATEGIES, SeparationError, separate_bnb, separation_problem

__all__ = ["main"]

# Short separation names on the command line map onto the library's
# strategy identifiers.
SEP_NAMES = {
    "enum": "enum",
    "bqc": "sep-bqc",
    "qcqp": "sep-qcqp",
    "mc": "sep-mc",
    "nw": "sep-nw",
}
OMEGA_MODELS = ("normal", "two-moment", "symmetric-bounded")
GRID_NAMES = {
    "paper-independent": "independent",
    "paper-correlated": "correlated",
    "paper-general": "general",
}

SOLVE_COLUMNS = bnb.csv_header() + ",cost,design"
SEPARATE_COLUMNS = "instance,omega,strategy,status,theta,demand,violation,cut,nodes,time"
SIM_COLUMNS = (
    "instance,design,samples,seed,partitions,demand,"
    "service_level,cut_min,cut_mean,cut_max,truncated_share"
)


class UsageError(ValueError):
    """Bad flag combination or malformed input discovered after parsing."""


# ---------------------------------------------------------------------------
# Small shared helpers
# ---------------------------------------------------------------------------


def _echo(command: str, args: argparse.Namespace, **extra) -> None:
    pairs = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    pairs.update(extra)
    rendered = " ".join(f"{k}={v}" for k, v in sorted(pairs.items()))
    print(f"[{command}] {rendered}", file=sys.stderr)


def _load(path: str) -> NetworkInstance:
    try:
        return load_instance(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from exc


def _emit(path: str | None, header: str, rows: list[str]) -> None:
    if path is None:
        print(header)
        for row in rows:
            print(row)
        return
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise UsageError(f"{flag} expects a comma-separated list of numbers") from exc


def _ints(text: str, flag: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise UsageError(f"{flag} expects a comma-separated list of integers") from exc


def _resolve_omega(args: argparse.Namespace) -> float:
    if (args.epsilon is None) == (args.omega is None):
        raise UsageError("exactly one of --epsilon or --omega is required")
    if args.omega is not None:
        if args.omega < 0:
            raise UsageError("--omega must be non-negative")
        return float(args.omega)
    return omega_from_epsilon(args.omega_model, args.epsilon)


def _solver_config(args: argparse.Namespace, omega: float) -> bnb.SolveConfig:
    cuts = tuple(tok for tok in args.cuts.split(",") if tok)
    for tok in cuts:
        if tok not in bnb.CUT_FAMILIES:
            raise UsageError(
                f"unknown cut family {tok!r}; pick from {', '.join(bnb.CUT_FAMILIES)}"
            )
    try:
        return bnb.SolveConfig(
            omega=omega,
            strategy=SEP_NAMES[args.sep],
            cuts=cuts,
            node_limit=args.node_limit,
            time_limit=args.time_limit,
            seed=args.seed,
            workers=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _design_vector(instance: NetworkInstance, text: str, flag: str) -> np.ndarray:
    ids = _ints(text, flag)
    x = np.zeros(instance.n_arcs)
    for k in ids:
        if not 0 <= k < instance.n_arcs:
            raise UsageError(f"{flag}: arc id {k} outside [0, {instance.n_arcs})")
        x[k] = 1.0
    return x


def _status_code(status: str) -> int:
    return 0 if status == "optimal" else 1


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def run_generate(args: argparse.Namespace) -> int:
    if args.grid is not None:
        if args.output is None:
            raise UsageError("--grid needs --output pointing at a directory")
        regime = GRID_NAMES[args.grid]
        specs = instgen.benchmark_grid(
            regime,
            ns=tuple(_ints(args.ns, "--ns")),
            betas=tuple(_floats(args.betas, "--betas")),
            omegas=tuple(_floats(args.omegas, "--omegas")),
            n_seeds=args.seeds,
            seed0=args.seed,
        )
        _echo("generate", args, regime=regime, count=len(specs))
        os.makedirs(args.output, exist_ok=True)
        for spec in specs:
            inst = instgen.generate(spec)
            dump_instance(inst, os.path.join(args.output, f"{spec.name}.json"))
        print(f"wrote {len(specs)} instances to {args.output}")
        return 0

    for flag, value in (("--nodes", args.nodes), ("--beta", args.beta),
                        ("--omega", args.omega)):
        if value is None:
            raise UsageError(f"{flag} is required without --grid")
    spec = instgen.GenSpec(
        n=args.nodes, omega=args.omega, beta=args.beta,
        regime=args.regime, seed=args.seed,
    )
    _echo("generate", args, name=spec.name)
    inst = instgen.generate(spec)
    path = args.output or f"{spec.name}.json"
    dump_instance(inst, path)
    print(f"wrote {path}: {inst.n_arcs} arcs, demand {inst.demand:g}")
    return 0


def run_check(args: argparse.Namespace) -> int:
    _echo("check", args)
    try:
        inst = _load(args.instance)
    except (ModelError, UsageError) as exc:
        print(f"invalid: {exc}")
        return 1
    print(f"valid, {inst.n_arcs} arcs, demand {inst.demand:g}")
    return 0


def run_solve(args: argparse.Namespace) -> int:
    omega = _resolve_omega(args)
    config = _solver_config(args, omega)
    _echo("solve", args, resolved_omega=f"{omega:.6g}")
    inst = _load(args.instance)
    design, stats = bnb.solve_cqnd(inst, config)
    if stats.status == "infeasible":
        cost, arcs = math.nan, ""
    else:
        cost, arcs = design.cost, ";".join(str(a) for a in design.arcs)
    row = f"{bnb.csv_row(inst, config, stats)},{cost:.10g},{arcs}"
    _emit(args.output, SOLVE_COLUMNS, [row])
    print(f"status {stats.status}, cost {cost:g}", file=sys.stderr)
    return _status_code(stats.status)


def run_separate(args: argparse.Namespace) -> int:
    omega = _resolve_omega(args)
    if (args.arcs is None) == (args.point is None):
        raise UsageError("exactly one of --arcs or --point is required")
    _echo("separate", args, resolved_omega=f"{omega:.6g}")
    inst = _load(args.instance)
    if args.arcs is not None:
        xbar = _design_vector(inst, args.arcs, "--arcs")
    else:
        xbar = np.asarray(_floats(args.point, "--point"))
    try:
        problem = separation_problem(inst, xbar, omega, strategy=SEP_NAMES[args.sep])
        result = separate_bnb(problem, node_limit=args.node_limit,
                              time_limit=args.time_limit)
    except SeparationError as exc:
        raise UsageError(str(exc)) from exc
    cut = ";".join(str(a) for a in result.cut.arc_ids) if result.cut else ""
    row = ",".join((
        inst.name or args.instance,
        f"{omega:.6g}",
        problem.strategy,
        result.status,
        f"{result.theta:.10g}",
        f"{inst.demand:.10g}",
        f"{result.violation:.10g}",
        cut,
        str(result.nodes),
        f"{result.wall_time:.3f}",
    ))
    _emit(args.output, SEPARATE_COLUMNS, [row])
    return 0 if result.status in ("violated-cut", "none-violated") else 1


def run_simulate(args: argparse.Namespace) -> int:
    _echo("simulate", args)
    inst = _load(args.instance)
    x = _design_vector(inst, args.arcs, "--arcs")
    try:
        report = sim.simulate(
            x, inst, n_samples=args.samples, seed=args.seed,
            partitions=args.partitions, workers=args.threads,
        )
    except sim.SimulationError as exc:
        raise UsageError(str(exc)) from exc
    if args.dump_mincuts:
        with open(args.dump_mincuts, "w", encoding="utf-8") as fh:
            for value in report.values:
                fh.write(f"{value:.10g}\n")
    row = ",".join((
        inst.name or args.instance,
        args.arcs.replace(",", ";"),
        str(report.samples),
        str(report.seed),
        str(report.partitions),
        f"{inst.demand:.10g}",
        f"{report.service_level:.6g}",
        f"{report.cut_min:.10g}",
        f"{report.cut_mean:.10g}",
        f"{report.cut_max:.10g}",
        f"{report.truncated_share:.6g}",
    ))
    _emit(args.output, SIM_COLUMNS, [row])
    return 0


def run_tradeoff(args: argparse.Namespace) -> int:
    epsilons = _floats(args.epsilons, "--epsilons")
    if not epsilons:
        raise UsageError("--epsilons needs at least one value")
    config = _solver_config(args, 0.0)
    _echo("tradeoff", args)
    inst = _load(args.instance)
    points = sim.tradeoff_curve(
        inst, epsilons, config=config, omega_model=args.omega_model,
        n_samples=args.samples, seed=args.seed,
    )
    _emit(args.output, sim.tradeoff_header(), [sim.tradeoff_row(p) for p in points])
    worst = max((_status_code(p.status) for p in points), default=0)
    return worst


def run_bench(args: argparse.Namespace) -> int:
    regime = GRID_NAMES[args.grid]
    if args.strategy not in STRATEGIES:
        raise UsageError(
            f"unknown strategy {args.strategy!r}; pick from {', '.join(STRATEGIES)}"
        )
    specs = instgen.benchmark_grid(
        regime,
        ns=tuple(_ints(args.ns, "--ns")),
        betas=tuple(_floats(args.betas, "--betas")),
        omegas=tuple(_floats(args.omegas, "--omegas")),
        n_seeds=args.seeds,
        seed0=args.seed,
    )
    _echo("bench", args, regime=regime, count=len(specs))
    cuts = tuple(tok for tok in args.cuts.split(",") if tok)
    for tok in cuts:
        if tok not in bnb.CUT_FAMILIES:
            raise UsageError(
                f"unknown cut family {tok!r}; pick from {', '.join(bnb.CUT_FAMILIES)}"
            )

    def solve_one(spec: instgen.GenSpec) -> tuple[str, str]:
        inst = instgen.generate(spec)
        config = bnb.SolveConfig(
            omega=spec.omega,
            strategy=args.strategy,
            cuts=cuts,
            node_limit=1 if args.root_only else args.node_limit,
            time_limit=args.time_limit,
        )
        _, stats = bnb.solve_cqnd(inst, config)
        return bnb.csv_row(inst, config, stats), stats.status

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(solve_one, specs))
    else:
        results = [solve_one(spec) for spec in specs]
    _emit(args.output, bnb.csv_header(), [row for row, _ in results])
    worst = max((_status_code(status) for _, status in results), default=0)
    return worst


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_omega_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=None,
                   help="risk level in (0, 0.5]; converted via --omega-model")
    p.add_argument("--omega", type=float, default=None,
                   help="safety factor, used directly instead of --epsilon")
    p.add_argument("--omega-model", choices=OMEGA_MODELS, default="normal",
                   help="distributional assumption behind --epsilon")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cuts", default=",".join(bnb.CUT_FAMILIES),
                   help="comma list of cut families to enable")
    p.add_argument("--sep", choices=sorted(SEP_NAMES), default="enum",
                   help="separation algorithm")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--time-limit", type=float, default=1800.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chancenet",
        description="Chance-constrained network design: generate, solve, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a random instance (or a grid)")
    p.add_argument("--regime", choices=instgen.REGIMES, default="independent")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--grid", choices=sorted(GRID_NAMES), default=None,
                   help="emit the full benchmark grid for this regime")
    p.add_argument("--ns", default="10,15,20", help="grid node counts")
    p.add_argument("--betas", default="0.3,0.6,0.9", help="grid demand fractions")
    p.add_argument("--omegas", default="1,2,3", help="grid safety factors")
    p.add_argument("--seeds", type=int, default=5, help="seeds per grid cell")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", default=None,
                   help="instance file, or directory with --grid")
    p.set_defaults(func=run_generate)

    p = sub.add_parser("check", help="validate an instance file")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=run_check)

    p = sub.add_parser("solve", help="solve one instance to optimality")
    p.add_argument("--instance", required=True)
    _add_omega_flags(p)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", default=None, help="append the result row here")
    p.set_defaults(func=run_solve)

    p = sub.add_parser("separate", help="run one separation query")
    p.add_argument("--instance", required=True)
    p.add_argument("--arcs", default=None, help="comma list of selected arc ids")
    p.add_argument("--point", default=None,
                   help="comma list of fractional values, one per arc")
    _add_omega_flags(p)
    p.add_argument("--sep", choices=sorted(SEP_NAMES), default="enum")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=run_separate)

    p = sub.add_parser("simulate", help="Monte-Carlo check a design")
    p.add_argument("--instance", required=True)
    p.add_argument("--arcs", required=True, help="comma list of selected arc ids")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-mincuts", default=None,
                   help="write one sampled minimum cut per line")
    p.add_argument("--output", default=None)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("tradeoff", help="sweep epsilons into a cost/service table")
    p.add_argument("--instance", required=True)
    p.add_argument("--epsilons", default="0.5,0.3,0.2,0.025,0.01,0.001")
    p.add_argument("--omega-model", choices=OMEGA_MODELS, default="normal")
    _add_solver_flags(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", default=None)
    p.set_defaults(func=run_tradeoff)

    p = sub.add_parser("bench", help="solve a generated grid into a results table")
    p.add_argument("--grid", choices=sorted(GRID_NAMES), required=True)
    p.add_argument("--strategy", default="enum",
                   help="separation strategy (library name, e.g. sep-bqc)")
    p.add_argument("--cuts", default=",".join(bnb.CUT_FAMILIES))
    p.add_argument("--ns", default="10,15,20")
    p.add_argument("--betas", default="0.3,0.6,0.9")
    p.add_argument("--omegas", default="1,2,3")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=1, help="first seed per cell")
    p.add_argument("--root-only", action="store_true",
                   help="stop each solve after the root node")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--time-limit", type=float, default=1800.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", default=None)
    p.set_defaults(func=run_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"chancenet: error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"chancenet: error: {exc}", file=sys.stderr)
        return 2
    except (instgen.GenerationError, sim.SimulationError, SeparationError) as exc:
        print(f"chancenet: error: {exc}", file=sys.stderr)
        return 2
    except bnb.SolveError as exc:
        print(f"chancenet: solver failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

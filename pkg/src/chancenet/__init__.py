"""Chance-constrained single-commodity network design.

The package picks a cheapest subset of candidate arcs so that, with
probability at least 1 - epsilon, every s-t cut of the chosen subgraph
carries the demand even though arc capacities are random.  Cut
requirements take the form  mu'x - omega * sqrt(x' Sigma x) >= d,
one per cut, and the solver works outer approximation, pack, cover,
and polymatroid cuts into a branch-and-cut loop over a bounded-variable
simplex.

Typical flow: load or generate a :class:`NetworkInstance`, call
:func:`solve_cqnd` for a design, then :func:`simulate` to estimate the
achieved service level by Monte Carlo.  The ``chancenet`` console
script exposes the same steps as subcommands.
"""

from .bnb import (
    CUT_FAMILIES,
    Design,
    SolveConfig,
    SolveError,
    SolveStats,
    root_gap,
    solve_cqnd,
)
from .instgen import GenSpec, GenerationError, benchmark_grid, generate
from .model import (
    TOL,
    Arc,
    Cut,
    ModelError,
    NetworkInstance,
    SchemaError,
    dump_instance,
    enumerate_cuts,
    eval_f,
    example_network,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    omega_from_epsilon,
)
from .separation import (
    SeparationError,
    SeparationResult,
    separate_bnb,
    separation_problem,
)
from .sim import SimReport, SimulationError, simulate, tradeoff_curve

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "TOL",
    "Arc",
    "Cut",
    "CUT_FAMILIES",
    "Design",
    "GenSpec",
    "GenerationError",
    "ModelError",
    "NetworkInstance",
    "SchemaError",
    "SeparationError",
    "SeparationResult",
    "SimReport",
    "SimulationError",
    "SolveConfig",
    "SolveError",
    "SolveStats",
    "benchmark_grid",
    "dump_instance",
    "enumerate_cuts",
    "eval_f",
    "example_network",
    "generate",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "omega_from_epsilon",
    "root_gap",
    "separate_bnb",
    "separation_problem",
    "simulate",
    "solve_cqnd",
    "tradeoff_curve",
]

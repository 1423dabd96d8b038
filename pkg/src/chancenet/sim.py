"""Monte-Carlo verification of designs against their stated service level.

A design promises that every cut keeps enough capacity with probability
1 - epsilon.  This module checks that promise empirically: it samples
correlated capacity vectors, computes the minimum-cut capacity of the
selected subnetwork for each sample, and reports the fraction of samples
whose minimum cut covers the demand.  ``tradeoff_curve`` repeats the
exercise across a sweep of epsilons to expose how much extra cost buys
how much extra reliability.

Sampling uses a counter-based generator (Philox) with normal variates via
the inverse c.d.f., so a given seed reproduces bit-identical reports on
any platform.  Samples are split into partitions, each with its own
sub-stream; the report depends only on (seed, partitions), not on how
many workers happened to execute them.  Negative sampled capacities are
truncated to zero, since capacities are physical; the truncated share is
recorded on the report so the bias stays visible.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .bnb import SolveConfig, solve_cqnd
from .flow import dinic_max_flow
from .model import TOL, NetworkInstance, enumerate_cuts, omega_from_epsilon, psd_factor

__all__ = [
    "SimulationError",
    "SimReport",
    "TradeoffPoint",
    "TRADEOFF_COLUMNS",
    "cholesky",
    "draw_capacities",
    "min_cut_values",
    "simulate",
    "tradeoff_curve",
    "tradeoff_header",
    "tradeoff_row",
]

# With this many internal nodes or fewer, per-sample minimum cuts come
# from one matrix product over all 2^k cuts instead of a max-flow loop.
CUT_ENUM_NODES = 12


class SimulationError(ValueError):
    """Raised for simulation requests the sampler cannot honor."""


@dataclass(frozen=True)
class SimReport:
    """Outcome of one Monte-Carlo service check.

    ``service_level`` is the fraction of samples whose minimum-cut
    capacity covers the demand; ``cut_min``/``cut_mean``/``cut_max``
    summarize the sampled minimum-cut distribution, and ``values`` keeps
    the raw per-sample minimum cuts for histograms or dumps.
    ``truncated_share`` is the fraction of sampled capacity entries that
    were clipped at zero.
    """

    samples: int
    service_level: float
    cut_min: float
    cut_mean: float
    cut_max: float
    seed: int
    partitions: int
    truncated_share: float
    values: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.service_level <= 1.0:
            raise SimulationError(
                f"service level {self.service_level} outside [0, 1]"
            )
        if not self.cut_min <= self.cut_mean + TOL.zero:
            raise SimulationError("minimum-cut min exceeds the mean")
        if not self.cut_mean <= self.cut_max + TOL.zero:
            raise SimulationError("minimum-cut mean exceeds the max")


def cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of a covariance matrix.

    Delegates to the shared PSD policy: a diagonal jitter up to 1e-7 is
    tried before giving up, and an indefinite matrix raises.
    """
    L, _ = psd_factor(np.asarray(cov, dtype=float))
    return L


def _partition_sizes(n_samples: int, partitions: int) -> list[int]:
    base, extra = divmod(n_samples, partitions)
    return [base + (1 if p < extra else 0) for p in range(partitions)]


def draw_capacities(
    instance: NetworkInstance,
    n_samples: int,
    seed: int = 0,
    partitions: int = 1,
    truncate: bool = True,
    workers: int = 1,
) -> tuple[np.ndarray, float]:
    """Sample capacity vectors; returns (n_samples-by-m matrix, truncated share).

    Partition p draws from the Philox stream spawned as child p of the
    seed, so the stacked result is a pure function of (seed, partitions).
    With ``truncate`` the entries are clipped at zero after the clipped
    share is measured; pass ``truncate=False`` to study the raw normal
    draws (for example to validate sampler moments).
    """
    if n_samples < 1:
        raise SimulationError(f"need at least one sample, got {n_samples}")
    if not 1 <= partitions <= n_samples:
        raise SimulationError(
            f"partitions must lie in [1, {n_samples}], got {partitions}"
        )
    L = cholesky(instance.cov)
    mu = instance.mu

    def one(part: int, size: int) -> np.ndarray:
        bits = np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(part,)))
        gen = np.random.Generator(bits)
        normals = ndtri(gen.random((size, instance.n_arcs)))
        return mu + normals @ L.T

    sizes = _partition_sizes(n_samples, partitions)
    if workers > 1 and partitions > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(one, range(partitions), sizes))
    else:
        blocks = [one(p, s) for p, s in enumerate(sizes)]
    caps = np.vstack(blocks)
    truncated = float(np.mean(caps < 0.0))
    if truncate:
        caps = np.maximum(caps, 0.0)
    return caps, truncated


def _selection(instance: NetworkInstance, x) -> np.ndarray:
    x = np.asarray(getattr(x, "x", x), dtype=float).ravel()
    if x.size != instance.n_arcs:
        raise SimulationError(
            f"design has {x.size} entries for {instance.n_arcs} arcs"
        )
    return x > 0.5


def _has_path(instance: NetworkInstance, keep: np.ndarray) -> bool:
    out: list[list[int]] = [[] for _ in range(instance.nodes)]
    for k in np.flatnonzero(keep):
        out[instance.tails[k]].append(instance.heads[k])
    seen = {instance.source}
    stack = [instance.source]
    while stack:
        u = stack.pop()
        if u == instance.sink:
            return True
        for v in out[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def min_cut_values(instance: NetworkInstance, x, caps: np.ndarray) -> np.ndarray:
    """Minimum-cut capacity of the selected subnetwork, per capacity row.

    Small networks take the enumeration shortcut: the minimum cut equals
    the minimum over all 2^k source-side subsets of the crossing
    capacity, which is one matrix product for the whole sample block.
    Larger networks fall back to a max-flow computation per row.
    """
    keep = _selection(instance, x)
    caps = np.atleast_2d(np.asarray(caps, dtype=float))
    eff = caps * keep
    internal = instance.internal_nodes()
    if len(internal) <= CUT_ENUM_NODES:
        cuts = enumerate_cuts(instance, limit=CUT_ENUM_NODES)
        theta = np.zeros((len(cuts), instance.n_arcs))
        for r, cut in enumerate(cuts):
            theta[r, list(cut.arc_ids)] = 1.0
        return (eff @ theta.T).min(axis=1)
    values = np.empty(eff.shape[0])
    for i, row in enumerate(eff):
        values[i] = dinic_max_flow(
            instance.nodes, instance.tails, instance.heads, row,
            instance.source, instance.sink,
        ).value
    return values


def simulate(
    x,
    instance: NetworkInstance,
    n_samples: int = 10_000,
    seed: int = 0,
    partitions: int = 1,
    workers: int = 1,
) -> SimReport:
    """Estimate the service level of a design by Monte-Carlo sampling.

    Each sample draws one joint capacity vector, truncates it at zero,
    and takes the minimum-cut capacity over the selected arcs; the
    service level is the fraction of samples meeting the demand.  A
    design with no source-to-sink path is allowed but warned about,
    since every sample then yields a zero cut.
    """
    keep = _selection(instance, x)
    if not _has_path(instance, keep):
        warnings.warn(
            "design has no source-to-sink path; service level is zero",
            RuntimeWarning,
            stacklevel=2,
        )
    caps, truncated = draw_capacities(
        instance, n_samples, seed=seed, partitions=partitions, workers=workers
    )
    values = min_cut_values(instance, keep, caps)
    met = float(np.mean(values >= instance.demand - TOL.zero))
    return SimReport(
        samples=n_samples,
        service_level=met,
        cut_min=float(values.min()),
        cut_mean=float(values.mean()),
        cut_max=float(values.max()),
        seed=seed,
        partitions=partitions,
        truncated_share=truncated,
        values=values,
    )


# ---------------------------------------------------------------------------
# Cost versus service level
# ---------------------------------------------------------------------------


TRADEOFF_COLUMNS = (
    "epsilon",
    "model_service_level",
    "cost",
    "cost_ratio",
    "simulated_service_level",
    "status",
)


@dataclass(frozen=True)
class TradeoffPoint:
    """One sweep row: the design bought at epsilon and how it simulates.

    ``cost_ratio`` is the cost as a percentage of the nominal (epsilon =
    0.5) design's cost.  Solver limit statuses ride along so a row built
    from an unproven incumbent is recognizable as such.
    """

    epsilon: float
    omega: float
    model_service_level: float
    cost: float
    cost_ratio: float
    simulated_service_level: float
    status: str


def tradeoff_header() -> str:
    return ",".join(TRADEOFF_COLUMNS)


def tradeoff_row(point: TradeoffPoint) -> str:
    return ",".join(
        (
            f"{point.epsilon:g}",
            f"{point.model_service_level:g}",
            f"{point.cost:.10g}",
            f"{point.cost_ratio:.10g}",
            f"{point.simulated_service_level:.6g}",
            point.status,
        )
    )


def tradeoff_curve(
    instance: NetworkInstance,
    epsilons,
    config: SolveConfig | None = None,
    omega_model: str = "normal",
    n_samples: int = 10_000,
    seed: int = 0,
) -> list[TradeoffPoint]:
    """Solve per epsilon, simulate each design, and relate cost to service.

    The nominal design (epsilon = 0.5, so omega = 0) anchors the cost
    ratios whether or not 0.5 appears in ``epsilons``.  Infeasible solves
    produce rows with NaN cost and service level; limit statuses keep
    their incumbent's numbers and are flagged in the status column.
    """
    config = config or SolveConfig()
    cache: dict[float, tuple] = {}

    def solved_at(omega: float):
        key = round(omega, 12)
        if key not in cache:
            cache[key] = solve_cqnd(instance, replace(config, omega=omega))
        return cache[key]

    base_design, base_stats = solved_at(0.0)
    base_cost = base_design.cost if base_stats.status != "infeasible" else math.nan

    points = []
    for eps in epsilons:
        omega = omega_from_epsilon(omega_model, eps)
        design, stats = solved_at(omega)
        if stats.status == "infeasible":
            points.append(
                TradeoffPoint(
                    epsilon=float(eps),
                    omega=omega,
                    model_service_level=1.0 - float(eps),
                    cost=math.nan,
                    cost_ratio=math.nan,
                    simulated_service_level=math.nan,
                    status=stats.status,
                )
            )
            continue
        report = simulate(design.x, instance, n_samples=n_samples, seed=seed)
        points.append(
            TradeoffPoint(
                epsilon=float(eps),
                omega=omega,
                model_service_level=1.0 - float(eps),
                cost=design.cost,
                cost_ratio=100.0 * design.cost / base_cost,
                simulated_service_level=report.service_level,
                status=stats.status,
            )
        )
    return points

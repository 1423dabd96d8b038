"""Core data model: networks with random arc capacities.

A design problem instance is a directed network where each arc has a
construction cost, a mean capacity, and (jointly with the other arcs) a
covariance describing capacity uncertainty.  A design x (binary arc
selection) is acceptable when every s-t cut keeps enough capacity with
high probability; after the usual quantile reformulation that reads

    f_C(x) = mu_C'x - Omega * sqrt(x' Sigma_C x) >= d      for every cut C,

with Omega derived from the risk level epsilon and the distributional
assumption.  This module owns the instance schema (JSON in/out), the
restriction of (mu, Sigma, Omega, d) to a cut, the equivalent quadratic
form used by the submodular machinery, and small shared numerics such as
the normal quantile and the centralized tolerance record.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Tolerances",
    "TOL",
    "ModelError",
    "SchemaError",
    "Arc",
    "NetworkInstance",
    "Cut",
    "CapacityModel",
    "QuadraticForm",
    "omega_from_epsilon",
    "eval_f",
    "q_coefficients",
    "check_cv",
    "enumerate_cuts",
    "psd_factor",
    "load_instance",
    "dump_instance",
    "instance_from_dict",
    "instance_to_dict",
    "example_network",
]


# ---------------------------------------------------------------------------
# Tolerances (single shared record; modules take an optional override)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds shared across the package."""

    feasibility: float = 1e-6      # constraint satisfaction slack
    integrality: float = 1e-6      # |x - round(x)| below this counts as integer
    cut_violation: float = 1e-6    # minimum violation before a cut is added
    lp_feasibility: float = 1e-7   # simplex primal feasibility
    lp_pivot: float = 1e-9         # smallest acceptable pivot magnitude
    psd_jitter: float = 1e-7       # largest diagonal perturbation for Cholesky
    zero: float = 1e-9             # generic "numerically zero"


TOL = Tolerances()


class ModelError(Exception):
    """Instance data violates the model contract."""


class SchemaError(ModelError):
    """Raw JSON does not match the instance schema."""


# ---------------------------------------------------------------------------
# Instance schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    cost: float
    mu: float


class NetworkInstance:
    """A directed network with jointly random arc capacities.

    Arcs are indexed 0..m-1 in list order; ``cov`` is the m-by-m capacity
    covariance (dense, symmetric PSD).  Instances validate on construction:
    node indices in range, no self-loops, symmetric PSD covariance,
    covariance entries within the Cauchy-Schwarz envelope, and at least one
    directed source-to-sink path.
    """

    def __init__(
        self,
        nodes: int,
        source: int,
        sink: int,
        demand: float,
        arcs: Sequence[Arc],
        cov: np.ndarray,
        name: str = "",
        tol: Tolerances = TOL,
    ):
        self.nodes = int(nodes)
        self.source = int(source)
        self.sink = int(sink)
        self.demand = float(demand)
        self.arcs = tuple(arcs)
        self.cov = np.array(cov, dtype=float)
        self.name = name
        self._validate(tol)
        self.mu = np.array([a.mu for a in self.arcs])
        self.costs = np.array([a.cost for a in self.arcs])
        self.tails = np.array([a.tail for a in self.arcs], dtype=int)
        self.heads = np.array([a.head for a in self.arcs], dtype=int)
        self.sigma = np.sqrt(np.diag(self.cov))

    # -- validation --------------------------------------------------------

    def _validate(self, tol: Tolerances) -> None:
        if self.nodes < 2:
            raise ModelError("need at least a source and a sink node")
        for label, v in (("source", self.source), ("sink", self.sink)):
            if not 0 <= v < self.nodes:
                raise ModelError(f"{label} index {v} out of range [0, {self.nodes})")
        if self.source == self.sink:
            raise ModelError("source and sink must differ")
        if not math.isfinite(self.demand):
            raise ModelError("demand must be finite")
        if not self.arcs:
            raise ModelError("instance has no arcs")
        for k, a in enumerate(self.arcs):
            if not (0 <= a.tail < self.nodes and 0 <= a.head < self.nodes):
                raise ModelError(f"arc {k} endpoint out of range")
            if a.tail == a.head:
                raise ModelError(f"arc {k} is a self-loop")
            if a.mu < 0 or not math.isfinite(a.mu):
                raise ModelError(f"arc {k} has invalid mean capacity {a.mu}")
            if not math.isfinite(a.cost):
                raise ModelError(f"arc {k} has non-finite cost")
        m = len(self.arcs)
        if self.cov.shape != (m, m):
            raise ModelError(f"covariance shape {self.cov.shape} != ({m}, {m})")
        if not np.allclose(self.cov, self.cov.T, atol=1e-9, rtol=0.0):
            raise ModelError("covariance is not symmetric within 1e-9")
        sd = np.sqrt(np.clip(np.diag(self.cov), 0.0, None))
        env = np.outer(sd, sd) + 1e-9
        if np.any(np.abs(self.cov) > env):
            raise ModelError("covariance entry exceeds its Cauchy-Schwarz bound")
        psd_factor(self.cov, max_jitter=tol.psd_jitter)  # raises when indefinite
        if not self._has_path(self.source, self.sink):
            raise ModelError("no directed path from source to sink")

    def _has_path(self, s: int, t: int) -> bool:
        out: list[list[int]] = [[] for _ in range(self.nodes)]
        for a in self.arcs:
            out[a.tail].append(a.head)
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            if u == t:
                return True
            for v in out[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    # -- convenience -------------------------------------------------------

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def is_diagonal(self) -> bool:
        off = self.cov - np.diag(np.diag(self.cov))
        return bool(np.all(off == 0.0))

    def internal_nodes(self) -> list[int]:
        return [v for v in range(self.nodes) if v not in (self.source, self.sink)]

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = f" {self.name!r}" if self.name else ""
        return (
            f"<NetworkInstance{tag} nodes={self.nodes} arcs={self.n_arcs} "
            f"demand={self.demand}>"
        )


# ---------------------------------------------------------------------------
# Cuts and per-cut capacity models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cut:
    """An s-t cut: the source-side node set and the arcs crossing it."""

    source_side: frozenset[int]
    arc_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "arc_ids", tuple(sorted(self.arc_ids)))


def _crossing_arcs(instance: NetworkInstance, source_side: frozenset[int]) -> tuple[int, ...]:
    return tuple(
        k
        for k, a in enumerate(instance.arcs)
        if a.tail in source_side and a.head not in source_side
    )


def make_cut(instance: NetworkInstance, source_side: Iterable[int]) -> Cut:
    side = frozenset(source_side)
    if instance.source not in side or instance.sink in side:
        raise ModelError("cut source side must contain the source and exclude the sink")
    return Cut(side, _crossing_arcs(instance, side))


def enumerate_cuts(instance: NetworkInstance, limit: int = 22) -> list[Cut]:
    """All s-t cuts, one per subset of internal nodes, in bitmask order.

    Bit k of the subset counter corresponds to the k-th internal node in
    ascending id order, so the output order (and therefore every tie-break
    that scans it) is deterministic.  Refuses instances with more than
    ``limit`` internal nodes.
    """

    internal = instance.internal_nodes()
    if len(internal) > limit:
        raise ModelError(
            f"{len(internal)} internal nodes exceed the enumeration limit {limit}"
        )
    cuts = []
    for mask in range(1 << len(internal)):
        side = frozenset(
            [instance.source] + [internal[i] for i in range(len(internal)) if mask >> i & 1]
        )
        cuts.append(Cut(side, _crossing_arcs(instance, side)))
    return cuts


@dataclass(frozen=True)
class CapacityModel:
    """(mu, Sigma, Omega, d) restricted to one cut's arcs.

    ``arc_ids`` are positions into the parent instance's arc list;
    ``n_parent_arcs`` remembers the parent width so that operations accept
    either a local vector (length == size) or a full design vector.
    """

    arc_ids: tuple[int, ...]
    mu: np.ndarray
    cov: np.ndarray
    omega: float
    demand: float
    n_parent_arcs: int

    @property
    def size(self) -> int:
        return len(self.arc_ids)

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def is_diagonal(self) -> bool:
        off = self.cov - np.diag(np.diag(self.cov))
        return bool(np.all(off == 0.0))

    def restrict(self, x: np.ndarray) -> np.ndarray:
        """Map a design vector (full or already local) to local coordinates."""
        x = np.asarray(x, dtype=float)
        if x.shape == (self.size,):
            return x
        if x.shape == (self.n_parent_arcs,):
            return x[list(self.arc_ids)]
        raise ModelError(
            f"vector of length {x.shape} fits neither the cut ({self.size}) "
            f"nor the parent ({self.n_parent_arcs})"
        )


def capacity_model(
    instance: NetworkInstance,
    omega: float,
    arc_ids: Sequence[int] | None = None,
    demand: float | None = None,
) -> CapacityModel:
    """Build the capacity model of a cut (or of the whole arc set)."""
    if omega < 0:
        raise ModelError("omega must be non-negative")
    ids = tuple(range(instance.n_arcs)) if arc_ids is None else tuple(arc_ids)
    sel = list(ids)
    return CapacityModel(
        arc_ids=ids,
        mu=instance.mu[sel].copy(),
        cov=instance.cov[np.ix_(sel, sel)].copy(),
        omega=float(omega),
        demand=instance.demand if demand is None else float(demand),
        n_parent_arcs=instance.n_arcs,
    )


def eval_f(model: CapacityModel, x: np.ndarray) -> float:
    """Value of f(x) = mu'x - Omega * sqrt(x' Sigma x) on the model's arcs.

    Defined for fractional x as well (the cut loop evaluates it at LP
    points); the radicand is clipped at zero to absorb PSD round-off.
    """

    xl = model.restrict(x)
    quad = float(xl @ model.cov @ xl)
    return float(model.mu @ xl) - model.omega * math.sqrt(max(quad, 0.0))


def check_cv(model: CapacityModel) -> list[int]:
    """Arc ids (parent indexing) violating the per-arc mean/deviation bound.

    The bound mu_a >= Omega * sigma_a is what keeps f non-decreasing and the
    quadratic form submodular; callers switch to the extended form when this
    list is non-empty.
    """

    sd = model.sigma
    bad = [i for i in range(model.size) if model.mu[i] < model.omega * sd[i] - 1e-12]
    return [model.arc_ids[i] for i in bad]


# ---------------------------------------------------------------------------
# Quadratic reformulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticForm:
    """q(x) = alpha'x + x' B x + constant with B symmetric, zero-diagonal.

    Since x'Bx counts each unordered pair twice, the pair (i, j) contributes
    2 * beta_ij, matching the coefficient convention of the derivation.
    The feasible region {f(x) >= d} corresponds to {q(x) <= 0} on designs
    whose mean capacity already covers demand.
    """

    alpha: np.ndarray
    beta: np.ndarray
    constant: float

    def __post_init__(self) -> None:
        b = np.asarray(self.beta, dtype=float)
        if not np.allclose(b, b.T, atol=1e-9):
            raise ModelError("beta matrix must be symmetric")
        if np.any(np.abs(np.diag(b)) > 1e-12):
            raise ModelError("beta matrix must have zero diagonal")

    @property
    def size(self) -> int:
        return len(self.alpha)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.alpha @ x + x @ self.beta @ x + self.constant)

    def value_of_subset(self, mask: int) -> float:
        x = np.array([(mask >> i) & 1 for i in range(self.size)], dtype=float)
        return self.value(x)

    def positive_pairs(self) -> list[tuple[int, int]]:
        n = self.size
        return [(i, j) for i in range(n) for j in range(i + 1, n) if self.beta[i, j] > 0.0]


def q_coefficients(model: CapacityModel) -> QuadraticForm:
    """Quadratic form equivalent to the conic constraint.

    For x with mu'x >= d, f(x) >= d is equivalent to q(x) <= 0 where

        alpha_i  = Omega^2 sigma_i^2 + 2 mu_i d - mu_i^2
        beta_ij  = Omega^2 sigma_ij - mu_i mu_j        (i != j)
        constant = -d^2.
    """

    mu, cov, om, d = model.mu, model.cov, model.omega, model.demand
    alpha = om**2 * np.diag(cov) + 2.0 * mu * d - mu**2
    beta = om**2 * cov - np.outer(mu, mu)
    np.fill_diagonal(beta, 0.0)
    return QuadraticForm(alpha=alpha, beta=beta, constant=-d * d)


# ---------------------------------------------------------------------------
# Omega from epsilon
# ---------------------------------------------------------------------------

_OMEGA_KINDS = ("normal", "two-moment", "symmetric-bounded")


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _normal_quantile(p: float) -> float:
    """Phi^{-1}(p) for p in [0.5, 1) by bisection on the erf-based c.d.f.

    No library dependency beyond math.erf; 90 halvings of [0, 40] land far
    below the 1e-8 absolute-error contract.
    """

    if p == 0.5:
        return 0.0
    lo, hi = 0.0, 40.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if _norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def omega_from_epsilon(assumption_kind: str, epsilon: float) -> float:
    """Safety factor Omega for risk level epsilon under a tail assumption.

    normal            Phi^{-1}(1 - epsilon)
    two-moment        sqrt((1 - epsilon) / epsilon)
    symmetric-bounded sqrt(ln(1 / epsilon))
    """

    if assumption_kind not in _OMEGA_KINDS:
        raise ModelError(f"unknown assumption kind {assumption_kind!r}; want one of {_OMEGA_KINDS}")
    if not (0.0 < epsilon <= 0.5):
        raise ModelError(f"epsilon must lie in (0, 0.5], got {epsilon}")
    if assumption_kind == "normal":
        return _normal_quantile(1.0 - epsilon)
    if assumption_kind == "two-moment":
        return math.sqrt((1.0 - epsilon) / epsilon)
    return math.sqrt(math.log(1.0 / epsilon))


# ---------------------------------------------------------------------------
# PSD factorization with bounded jitter
# ---------------------------------------------------------------------------


def psd_factor(cov: np.ndarray, max_jitter: float = TOL.psd_jitter) -> tuple[np.ndarray, float]:
    """Lower-triangular Cholesky factor, perturbing the diagonal if needed.

    Tries jitter 0, then powers of ten up to ``max_jitter``.  Returns
    (L, jitter_used); raises ModelError when the matrix stays indefinite.
    """

    cov = np.asarray(cov, dtype=float)
    jitters = [0.0]
    j = 1e-12
    while j <= max_jitter * (1 + 1e-12):
        jitters.append(j)
        j *= 10.0
    eye = np.eye(cov.shape[0])
    for jit in jitters:
        try:
            return np.linalg.cholesky(cov + jit * eye), jit
        except np.linalg.LinAlgError:
            continue
    raise ModelError(f"matrix is not PSD within diagonal jitter {max_jitter}")


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def instance_from_dict(data: dict, name: str = "") -> NetworkInstance:
    try:
        nodes = int(data["nodes"])
        source = int(data["source"])
        sink = int(data["sink"])
        demand = float(data["demand"])
        raw_arcs = data["arcs"]
        raw_cov = data["cov"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"missing or malformed field: {exc}") from exc
    arcs = []
    for k, entry in enumerate(raw_arcs):
        try:
            arcs.append(
                Arc(int(entry["tail"]), int(entry["head"]), float(entry["cost"]), float(entry["mu"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"arc {k}: {exc}") from exc
    m = len(arcs)
    if isinstance(raw_cov, dict):
        if "diag" not in raw_cov:
            raise SchemaError("cov object form must carry a 'diag' list")
        diag = [float(v) for v in raw_cov["diag"]]
        if len(diag) != m:
            raise SchemaError(f"cov diag length {len(diag)} != arc count {m}")
        cov = np.diag(diag)
    else:
        cov = np.array(raw_cov, dtype=float)
        if cov.shape != (m, m):
            raise SchemaError(f"cov shape {cov.shape} != ({m}, {m})")
    return NetworkInstance(nodes, source, sink, demand, arcs, cov, name=name)


def instance_to_dict(instance: NetworkInstance) -> dict:
    cov: object
    if instance.is_diagonal:
        cov = {"diag": [float(v) for v in np.diag(instance.cov)]}
    else:
        cov = [[float(v) for v in row] for row in instance.cov]
    return {
        "nodes": instance.nodes,
        "source": instance.source,
        "sink": instance.sink,
        "demand": instance.demand,
        "arcs": [
            {"tail": a.tail, "head": a.head, "cost": a.cost, "mu": a.mu}
            for a in instance.arcs
        ],
        "cov": cov,
    }


def load_instance(path: str) -> NetworkInstance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return instance_from_dict(data, name=path)


def dump_instance(instance: NetworkInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2, sort_keys=True)
        fh.write("\n")


def example_network() -> NetworkInstance:
    """The bundled six-node example network (15 arcs, demand 230)."""
    raw = resources.files("chancenet.data").joinpath("sixnode.json").read_text()
    return instance_from_dict(json.loads(raw), name="sixnode")

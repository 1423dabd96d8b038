"""Random benchmark instance generation.

Networks are drawn on nodes 0..n-1 with source 0 and sink n-1.  Every
node pair (i, j), i < j, receives the arc i -> j with probability
1/sqrt(n); connectivity is then repaired by walking a random permutation
of the internal nodes from source to sink and adding whichever arcs of
that path are missing, so every internal node ends up on some s-t path.

Three capacity regimes:

``independent``   diagonal covariance, mu_a uniform on [0, 100] and
                  sigma_a uniform on [0, mu_a / Omega]; the per-arc
                  mean/deviation bound holds by construction.
``correlated``    dense covariance from a random orthogonal conjugation
                  of a positive spectrum, shifted so the condition
                  number is bounded (the default shift of half the
                  spectral radius gives condition 3), then scaled by a
                  random diagonal congruence; means uniform on
                  [Omega * sigma_a, 2 * Omega * sigma_a].
``general``       same covariance construction, means uniform on
                  [0, 2 * Omega * sigma_a], so the mean/deviation bound
                  can fail and positive bilinear coefficients appear
                  (their share is reported, not enforced).

The demand is beta times the deterministic max flow of the mean
capacities, hence the nominal relaxation is always feasible.  Arc
costs are uniform on [1, 100].  All draws happen in a fixed order from
one seeded generator, so a spec maps to a byte-identical instance JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import dinic_max_flow
from .model import Arc, NetworkInstance, capacity_model, q_coefficients

__all__ = [
    "REGIMES",
    "GenSpec",
    "GenerationError",
    "benchmark_grid",
    "generate",
    "positive_pair_fraction",
]

REGIMES = ("independent", "correlated", "general")


class GenerationError(ValueError):
    """Generation parameters outside their domain."""


@dataclass
class GenSpec:
    """Parameters of one random instance.

    ``condition`` bounds the condition number of the dense covariance
    before the diagonal rescaling (3.0 reproduces the half-spectral-
    radius shift).  ``phi``, the deterministic max flow of the drawn
    means, is filled in by :func:`generate` for reporting.
    """

    n: int
    omega: float
    beta: float
    regime: str
    seed: int
    condition: float = 3.0
    phi: float | None = None

    def __post_init__(self) -> None:
        if self.n < 3:
            raise GenerationError("need at least one internal node (n >= 3)")
        if not (0.0 < self.beta < 1.0):
            raise GenerationError("beta must lie strictly between 0 and 1")
        if not (self.omega > 0.0 and math.isfinite(self.omega)):
            raise GenerationError("omega must be positive and finite")
        if self.regime not in REGIMES:
            raise GenerationError(f"unknown regime {self.regime!r}; pick from {REGIMES}")
        if self.condition <= 1.0:
            raise GenerationError("condition number must exceed 1")

    @property
    def name(self) -> str:
        return (f"{self.regime}-n{self.n}-b{self.beta:g}"
                f"-om{self.omega:g}-s{self.seed}")


def _draw_arcs(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    """Bernoulli(1/sqrt(n)) pair arcs plus the permutation spine."""
    p = 1.0 / math.sqrt(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    present = {pair for pair, u in zip(pairs, rng.random(len(pairs))) if u < p}
    walk = [0] + [int(v) for v in rng.permutation(np.arange(1, n - 1))] + [n - 1]
    for tail, head in zip(walk, walk[1:]):
        present.add((tail, head))
    return sorted(present)


def _dense_cov(rng: np.random.Generator, m: int, condition: float) -> np.ndarray:
    gauss = rng.standard_normal((m, m))
    q, _ = np.linalg.qr(gauss)
    lam = rng.uniform(0.0, 1.0, m)
    shift = lam.max() / (condition - 1.0)
    base = (q * (lam + shift)) @ q.T
    base = 0.5 * (base + base.T)
    scale = rng.uniform(1.0, 12.0, m)
    return base * np.outer(scale, scale)


def generate(spec: GenSpec) -> NetworkInstance:
    """Instance of the spec; also records the computed max flow on it."""
    rng = np.random.default_rng(spec.seed)
    arcs = _draw_arcs(rng, spec.n)
    m = len(arcs)

    if spec.regime == "independent":
        mu = rng.uniform(0.0, 100.0, m)
        sigma = rng.uniform(0.0, mu / spec.omega)
        cov = np.diag(sigma**2)
    else:
        cov = _dense_cov(rng, m, spec.condition)
        sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        if spec.regime == "correlated":
            mu = rng.uniform(spec.omega * sigma, 2.0 * spec.omega * sigma)
        else:
            mu = rng.uniform(0.0, 2.0 * spec.omega * sigma)

    costs = rng.uniform(1.0, 100.0, m)
    tails = np.array([a for a, _ in arcs])
    heads = np.array([b for _, b in arcs])
    phi = dinic_max_flow(spec.n, tails, heads, mu, 0, spec.n - 1).value
    spec.phi = float(phi)

    records = [
        Arc(int(t), int(h), float(c), float(u))
        for (t, h), c, u in zip(arcs, costs, mu)
    ]
    return NetworkInstance(
        nodes=spec.n,
        source=0,
        sink=spec.n - 1,
        demand=float(spec.beta * phi),
        arcs=records,
        cov=cov,
        name=spec.name,
    )


def positive_pair_fraction(instance: NetworkInstance, omega: float) -> float:
    """Share of arc pairs whose bilinear coefficient is positive.

    Measured on the quadratic form of the full arc set.  Only the
    general regime produces positive pairs at all; how many depends on
    the strength of the sampled correlations, so the share is reported
    rather than enforced.
    """
    qf = q_coefficients(capacity_model(instance, omega))
    n = qf.size
    total = n * (n - 1) // 2
    if total == 0:
        return 0.0
    return len(qf.positive_pairs()) / total


def benchmark_grid(
    regime: str,
    ns: tuple[int, ...] = (10, 15, 20),
    betas: tuple[float, ...] = (0.3, 0.6, 0.9),
    omegas: tuple[float, ...] = (1.0, 2.0, 3.0),
    n_seeds: int = 5,
    condition: float = 3.0,
    seed0: int = 1,
) -> list[GenSpec]:
    """The benchmark grid: specs for every n x beta x Omega x seed cell."""
    if n_seeds <= 0:
        raise GenerationError("need at least one seed per grid cell")
    specs = []
    for n in ns:
        for beta in betas:
            for omega in omegas:
                for k in range(n_seeds):
                    specs.append(GenSpec(n=n, omega=omega, beta=beta,
                                         regime=regime, seed=seed0 + k,
                                         condition=condition))
    return specs

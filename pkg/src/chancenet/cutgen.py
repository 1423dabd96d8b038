"""Strengthening inequalities for single-cut capacity constraints.

Every generator here works on one :class:`~chancenet.model.CapacityModel`
(the constraint of a single s-t cut) and emits :class:`LinearCut` records
whose indices refer to the parent instance's arc ids, so a master solver
can assemble rows without knowing how they were derived.  Families:

* outer-approximation gradient cuts for the conic constraint,
* pack and extended (lifted) pack inequalities for diagonal instances
  whose arcs satisfy the per-arc mean/deviation bound,
* cover inequalities with exact lifting for the polymatroid knapsacks
  coming from the quadratic reformulation, plus their aggregated variant,
* the McCormick-linked rewrite of the quadratic form used when some
  off-diagonal coefficient turns positive.

Lifting coefficients are computed by exact subproblems solved through
subset enumeration.  That is deliberate: closed-form lifting functions
for these families are not superadditive in general, and an exact oracle
is both valid by construction and easy to audit.  Enumeration is capped;
past the cap the generators fall back to the unlifted (still valid) cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import TOL, CapacityModel, QuadraticForm, eval_f, q_coefficients

# Abort exact lifting once a single coefficient would need more than this
# many subset evaluations; the unlifted inequality is returned instead.
LIFT_ENUM_CAP = 1 << 18

CUT_KINDS = (
    "oa",
    "pack",
    "extended-pack",
    "polymatroid",
    "cover",
    "lifted-cover",
    "aggregated-cover",
    "mccormick-link",
    "mean-cut",
)


class CutGenerationError(ValueError):
    """Inconsistent inputs to a cut generator."""


@dataclass(frozen=True)
class LinearCut:
    """One row for the master LP.

    ``indices`` hold parent arc ids and ``coefs`` the matching
    coefficients; the row reads  sum_k coefs[k] * x[indices[k]]  sense
    rhs.  McCormick link rows additionally reference one auxiliary
    column through ``z_pair`` (an index into the pair list returned by
    :func:`build_q_tilde`) with coefficient ``z_coef``; every other kind
    leaves ``z_pair`` at -1.  ``origin`` identifies the generating cut
    constraint, -1 when not tied to one.
    """

    kind: str
    indices: tuple[int, ...]
    coefs: tuple[float, ...]
    sense: str
    rhs: float
    origin: int = -1
    z_pair: int = -1
    z_coef: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in CUT_KINDS:
            raise CutGenerationError(f"unknown cut kind {self.kind!r}")
        if self.sense not in ("<=", ">="):
            raise CutGenerationError(f"unknown sense {self.sense!r}")
        if len(self.indices) != len(self.coefs):
            raise CutGenerationError("indices and coefficients differ in length")
        if not all(math.isfinite(c) for c in self.coefs) or not math.isfinite(self.rhs):
            raise CutGenerationError("non-finite cut data")

    def activity(self, x: np.ndarray, z: np.ndarray | None = None) -> float:
        total = float(sum(c * x[i] for i, c in zip(self.indices, self.coefs)))
        if self.z_pair >= 0:
            if z is None:
                raise CutGenerationError("cut references an auxiliary column but no z given")
            total += self.z_coef * float(z[self.z_pair])
        return total

    def violation(self, x: np.ndarray, z: np.ndarray | None = None) -> float:
        """Positive when the point violates the row."""
        act = self.activity(x, z)
        return act - self.rhs if self.sense == "<=" else self.rhs - act

    def coefficient_key(self, ndigits: int = 9) -> tuple:
        """Hashable fingerprint for duplicate suppression in cut pools."""
        items = tuple(sorted(zip(self.indices, (round(c, ndigits) for c in self.coefs))))
        return (self.sense, round(self.rhs, ndigits), items, self.z_pair, round(self.z_coef, ndigits))


# ---------------------------------------------------------------------------
# Outer approximation
# ---------------------------------------------------------------------------


def oa_gradient_cut(cm: CapacityModel, xbar, origin: int = -1) -> LinearCut:
    """Supporting hyperplane of { x : mu'x - Omega*sqrt(x'Sigma x) >= d } at xbar.

    The norm term is convex, so replacing it with its tangent
    (Sigma xbar)'x / sqrt(xbar' Sigma xbar) under-relaxes the constraint:
    the linear row is valid everywhere and coincides with f at xbar.  If
    the norm vanishes at xbar the tangent is taken along xbar + t*1,
    which degenerates to the all-ones subgradient; with a zero matrix the
    cut is simply the mean row mu'x >= d.
    """
    xl = cm.restrict(np.asarray(xbar, dtype=float))
    sig_x = cm.cov @ xl
    norm = math.sqrt(max(float(xl @ sig_x), 0.0))
    if norm > TOL.zero:
        grad = sig_x / norm
    else:
        ones = np.ones(cm.size)
        denom = math.sqrt(max(float(ones @ cm.cov @ ones), 0.0))
        grad = (cm.cov @ ones) / denom if denom > TOL.zero else np.zeros(cm.size)
    coefs = cm.mu - cm.omega * grad
    return LinearCut(
        kind="oa",
        indices=cm.arc_ids,
        coefs=tuple(float(c) for c in coefs),
        sense=">=",
        rhs=cm.demand,
        origin=origin,
    )


def mean_cut(cm: CapacityModel, origin: int = -1) -> LinearCut:
    """Nominal capacity row mu'x >= d (the Omega = 0 face of the constraint)."""
    return LinearCut(
        kind="mean-cut",
        indices=cm.arc_ids,
        coefs=tuple(float(m) for m in cm.mu),
        sense=">=",
        rhs=cm.demand,
        origin=origin,
    )


# ---------------------------------------------------------------------------
# Packs (diagonal case)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pack:
    """Arc subset that cannot carry the demand on its own.

    ``arcs`` are parent ids with f(P) < d; ``slack`` stores d - f(P) > 0.
    ``maximal`` records whether every single-arc extension reaches d.
    """

    arcs: tuple[int, ...]
    slack: float
    maximal: bool


def _f_of_subset(cm: CapacityModel, members: Sequence[int]) -> float:
    x = np.zeros(cm.size)
    x[list(members)] = 1.0
    return eval_f(cm, x)


def find_pack(cm: CapacityModel, xbar, origin: int = -1) -> tuple[Pack, LinearCut] | None:
    """Greedy maximal pack and its inequality x(N \\ P) >= 1.

    Arcs are scanned in non-increasing xbar order (ties toward the lower
    parent id) and added while the selection stays short of the demand.
    Requires the monotone regime: every arc with mu_a >= Omega * sigma_a.
    Returns None when even the empty set meets the demand (d <= 0).
    """
    if cm.demand <= 0.0:
        return None
    xl = cm.restrict(np.asarray(xbar, dtype=float))
    order = np.argsort(-xl, kind="stable")

    members: list[int] = []
    for a in order:
        trial = members + [int(a)]
        if _f_of_subset(cm, trial) < cm.demand:
            members.append(int(a))
    value = _f_of_subset(cm, members)
    maximal = all(
        _f_of_subset(cm, members + [j]) >= cm.demand
        for j in range(cm.size)
        if j not in members
    )
    pack = Pack(
        arcs=tuple(sorted(cm.arc_ids[i] for i in members)),
        slack=float(cm.demand - value),
        maximal=maximal,
    )
    outside = tuple(cm.arc_ids[i] for i in range(cm.size) if i not in members)
    cut = LinearCut(
        kind="pack",
        indices=outside,
        coefs=(1.0,) * len(outside),
        sense=">=",
        rhs=1.0,
        origin=origin,
    )
    return pack, cut


def _min_outside_count(cm: CapacityModel, inside: list[int], outside: list[int]) -> int | None:
    """Smallest number of outside arcs that lifts f(inside + chosen) to d."""
    for size in range(len(outside) + 1):
        best = -math.inf
        for mask in range(1 << len(outside)):
            if bin(mask).count("1") != size:
                continue
            chosen = [outside[k] for k in range(len(outside)) if (mask >> k) & 1]
            best = max(best, _f_of_subset(cm, inside + chosen))
        if best >= cm.demand:
            return size
    return None


def lift_pack(cm: CapacityModel, pack: Pack, xbar, origin: int = -1) -> LinearCut:
    """Extended pack inequality by exact sequential lifting.

    Writing P for the pack and r for the least number of outside arcs
    that restore feasibility with all of P open (r = 1 for a maximal
    pack), the lifted row is

        x(N \\ P)  >=  r + sum_{i in P} gamma_i (1 - x_i),

    where each gamma_i is the exact lifting coefficient obtained by
    minimizing over completions with arc i closed.  Pack members are
    lifted in non-decreasing xbar order (the (1 - x_i) terms of arcs the
    LP already closes contribute the most violation).  Each subproblem
    enumerates subsets of the outside arcs and of the already-lifted
    members; past ``LIFT_ENUM_CAP`` evaluations the plain pack inequality
    is returned unchanged.
    """
    xl = cm.restrict(np.asarray(xbar, dtype=float))
    local_of_parent = {p: i for i, p in enumerate(cm.arc_ids)}
    inside = [local_of_parent[p] for p in pack.arcs]
    outside = [i for i in range(cm.size) if i not in set(inside)]
    outside_parent = tuple(cm.arc_ids[i] for i in outside)

    plain = LinearCut(
        kind="pack",
        indices=outside_parent,
        coefs=(1.0,) * len(outside_parent),
        sense=">=",
        rhs=1.0,
        origin=origin,
    )
    if not outside:
        # The full arc set misses the demand: the constraint is unsatisfiable
        # and the empty >= 1 row encodes that for the master problem.
        return plain

    r = 1 if pack.maximal else None
    if r is None:
        if (1 << len(outside)) * (len(outside) + 1) > LIFT_ENUM_CAP:
            return plain
        r = _min_outside_count(cm, inside, outside)
        if r is None:
            return plain

    lift_order = sorted(inside, key=lambda i: (xl[i], cm.arc_ids[i]))
    gammas: dict[int, float] = {}
    lifted: list[int] = []
    for i in lift_order:
        if (1 << (len(outside) + len(lifted))) > LIFT_ENUM_CAP:
            return plain
        unlifted_open = [j for j in inside if j != i and j not in lifted]
        best = math.inf
        for mask in range(1 << (len(outside) + len(lifted))):
            chosen = [outside[k] for k in range(len(outside)) if (mask >> k) & 1]
            closed_lifted = [
                lifted[k] for k in range(len(lifted)) if (mask >> (len(outside) + k)) & 1
            ]
            open_lifted = [j for j in lifted if j not in closed_lifted]
            support = unlifted_open + open_lifted + chosen
            if _f_of_subset(cm, support) < cm.demand:
                continue
            best = min(best, len(chosen) - r - sum(gammas[j] for j in closed_lifted))
        # Unbounded lifting (arc i is in every feasible completion): cap at r.
        gammas[i] = float(r) if math.isinf(best) else float(best)
        lifted.append(i)

    indices = outside_parent + tuple(cm.arc_ids[i] for i in lift_order)
    coefs = (1.0,) * len(outside_parent) + tuple(gammas[i] for i in lift_order)
    rhs = float(r) + sum(gammas.values())
    return LinearCut(
        kind="extended-pack",
        indices=indices,
        coefs=coefs,
        sense=">=",
        rhs=rhs,
        origin=origin,
    )


# ---------------------------------------------------------------------------
# Covers over polymatroid knapsacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Knapsack:
    """0-1 knapsack  v'x <= gamma  in parent arc ids (weights may be negative)."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    gamma: float

    def folded(self) -> tuple[list[int], list[float], float]:
        """Positive-weight projection after pinning negative-weight arcs to 1.

        Opening a negative-weight arc only adds slack, so any point of the
        knapsack satisfies the positive-support inequality with the folded
        capacity; covers found there remain valid for the original set.
        """
        pos_idx, pos_w = [], []
        cap = self.gamma
        for i, w in zip(self.indices, self.weights):
            if w < 0.0:
                cap -= w
            elif w > 0.0:
                pos_idx.append(i)
                pos_w.append(w)
        return pos_idx, pos_w, cap


def knapsack_from_vertex(indices: Sequence[int], v: Sequence[float], gamma: float) -> Knapsack:
    return Knapsack(tuple(int(i) for i in indices), tuple(float(w) for w in v), float(gamma))


def find_cover(kp: Knapsack, xbar_by_parent: dict[int, float] | None, origin: int = -1):
    """Minimal cover and its inequality sum_{i in C} x_i <= |C| - 1.

    The cover is assembled greedily over the positive-weight support in
    non-increasing xbar order (ties toward the lower id) until the folded
    capacity is exceeded, then minimalized by dropping redundant members
    in non-decreasing xbar order.  Returns None when the positive weights
    cannot exceed the folded capacity.
    """
    pos_idx, pos_w, cap = kp.folded()
    if sum(pos_w) <= cap + TOL.zero:
        return None
    frac = dict.fromkeys(pos_idx, 0.0) if xbar_by_parent is None else {
        i: float(xbar_by_parent.get(i, 0.0)) for i in pos_idx
    }
    order = sorted(range(len(pos_idx)), key=lambda k: (-frac[pos_idx[k]], pos_idx[k]))

    chosen: list[int] = []
    total = 0.0
    for k in order:
        chosen.append(k)
        total += pos_w[k]
        if total > cap + TOL.zero:
            break
    if total <= cap + TOL.zero:
        return None

    # Minimalize: drop members while the rest still overflow the capacity.
    for k in sorted(chosen, key=lambda k: (frac[pos_idx[k]], -pos_idx[k])):
        if total - pos_w[k] > cap + TOL.zero:
            chosen.remove(k)
            total -= pos_w[k]

    members = tuple(sorted(pos_idx[k] for k in chosen))
    cut = LinearCut(
        kind="cover",
        indices=members,
        coefs=(1.0,) * len(members),
        sense="<=",
        rhs=len(members) - 1.0,
        origin=origin,
    )
    return members, cut


def _knapsack_max_profit(weights, profits, capacity, cap_evals=LIFT_ENUM_CAP):
    """Exact max of profits'y over binary y with weights'y <= capacity."""
    n = len(weights)
    if (1 << n) > cap_evals:
        return None
    best = -math.inf
    for mask in range(1 << n):
        w = 0.0
        p = 0.0
        for k in range(n):
            if (mask >> k) & 1:
                w += weights[k]
                p += profits[k]
        if w <= capacity + TOL.zero:
            best = max(best, p)
    return best


def lift_cover(kp: Knapsack, cover: tuple[int, ...], xbar_by_parent: dict[int, float] | None, origin: int = -1) -> LinearCut:
    """Exact sequential lifting of a minimal cover inequality.

    Non-cover arcs of the positive support enter in non-increasing xbar
    order; each coefficient is  (|C| - 1) - max{ current lhs : weights of
    the chosen cover/lifted arcs fit in the remaining capacity }, an exact
    0-1 subproblem solved by enumeration.  Zero-weight arcs lift with
    coefficient zero and are omitted.  When enumeration would exceed the
    cap, the unlifted cover is returned.
    """
    pos_idx, pos_w, cap = kp.folded()
    weight_of = dict(zip(pos_idx, pos_w))
    rhs = len(cover) - 1.0
    outside = [i for i in pos_idx if i not in set(cover)]
    if xbar_by_parent is None:
        frac = dict.fromkeys(outside, 0.0)
    else:
        frac = {i: float(xbar_by_parent.get(i, 0.0)) for i in outside}
    outside.sort(key=lambda i: (-frac[i], i))

    base = LinearCut(
        kind="cover",
        indices=tuple(cover),
        coefs=(1.0,) * len(cover),
        sense="<=",
        rhs=rhs,
        origin=origin,
    )
    lifted_idx: list[int] = []
    lifted_coef: list[float] = []
    for j in outside:
        pool_w = [weight_of[i] for i in cover] + [weight_of[i] for i in lifted_idx]
        pool_p = [1.0] * len(cover) + list(lifted_coef)
        best = _knapsack_max_profit(pool_w, pool_p, cap - weight_of[j])
        if best is None:
            return base
        if best == -math.inf:
            # Even alone, arc j overflows the capacity: x_j = 0 holds
            # throughout the knapsack, lift with the full rhs.
            pi = rhs
        else:
            pi = rhs - best
        if pi > TOL.zero:
            lifted_idx.append(j)
            lifted_coef.append(float(pi))

    if not lifted_idx:
        return base
    return LinearCut(
        kind="lifted-cover",
        indices=tuple(cover) + tuple(lifted_idx),
        coefs=(1.0,) * len(cover) + tuple(lifted_coef),
        sense="<=",
        rhs=rhs,
        origin=origin,
    )


def aggregate_and_cover(cuts: Sequence[LinearCut], xbar_by_parent: dict[int, float] | None, origin: int = -1) -> LinearCut | None:
    """Cover of the unit-weight sum of several <= rows (one constraint's cuts).

    Summing valid <= inequalities is valid; the aggregate is treated as a
    fresh knapsack and sent through cover finding plus exact lifting.
    Returns None when the aggregate admits no cover.
    """
    if not cuts:
        return None
    agg: dict[int, float] = {}
    gamma = 0.0
    for cut in cuts:
        if cut.sense != "<=" or cut.z_pair >= 0:
            raise CutGenerationError("aggregation expects plain <= rows")
        for i, c in zip(cut.indices, cut.coefs):
            agg[i] = agg.get(i, 0.0) + c
        gamma += cut.rhs
    indices = tuple(sorted(agg))
    kp = Knapsack(indices, tuple(agg[i] for i in indices), gamma)
    found = find_cover(kp, xbar_by_parent, origin)
    if found is None:
        return None
    cover, cover_cut = found
    lifted = lift_cover(kp, cover, xbar_by_parent, origin)
    chosen = lifted if lifted.kind == "lifted-cover" else cover_cut
    return LinearCut(
        kind="aggregated-cover",
        indices=chosen.indices,
        coefs=chosen.coefs,
        sense=chosen.sense,
        rhs=chosen.rhs,
        origin=origin,
    )


# ---------------------------------------------------------------------------
# McCormick rewrite for the non-submodular case
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QTilde:
    """Quadratic form with positive off-diagonal terms moved onto z columns.

    ``form`` acts on the extended vector (x, z) of length n + len(pairs);
    ``pairs`` lists the (local_i, local_j) arc pairs, in lexicographic
    order, whose product was replaced; ``links`` are the McCormick rows
    tying each z to its pair.  On binaries satisfying the links with z at
    its lower envelope, the extended form agrees with the original q.
    """

    form: QuadraticForm
    pairs: tuple[tuple[int, int], ...]
    links: tuple[LinearCut, ...]
    n_x: int


def build_q_tilde(cm: CapacityModel, qf: QuadraticForm | None = None, origin: int = -1) -> QTilde:
    """Split positive bilinear terms of q off to auxiliary binaries.

    For every pair with beta_ij > 0 the term 2 beta_ij x_i x_j becomes a
    linear term 2 beta_ij z_ij plus the three link rows z_ij >= x_i + x_j
    - 1, z_ij <= x_i, z_ij <= x_j.  All remaining bilinear coefficients
    are nonpositive, so the extended form is submodular in (x, z).  With
    no positive pair the result is the identity transform.
    """
    if qf is None:
        qf = q_coefficients(cm)
    n = qf.size
    pairs = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if qf.beta[i, j] > TOL.zero
    ]
    alpha_ext = np.concatenate([qf.alpha, np.array([2.0 * qf.beta[i, j] for i, j in pairs])])
    beta_ext = np.zeros((n + len(pairs), n + len(pairs)))
    beta_ext[:n, :n] = qf.beta
    for i, j in pairs:
        beta_ext[i, j] = 0.0
        beta_ext[j, i] = 0.0
    links = []
    for k, (i, j) in enumerate(pairs):
        pi, pj = cm.arc_ids[i], cm.arc_ids[j]
        links.append(LinearCut("mccormick-link", (pi, pj), (-1.0, -1.0), ">=", -1.0,
                               origin=origin, z_pair=k, z_coef=1.0))
        links.append(LinearCut("mccormick-link", (pi,), (-1.0,), "<=", 0.0,
                               origin=origin, z_pair=k, z_coef=1.0))
        links.append(LinearCut("mccormick-link", (pj,), (-1.0,), "<=", 0.0,
                               origin=origin, z_pair=k, z_coef=1.0))
    return QTilde(
        form=QuadraticForm(alpha=alpha_ext, beta=beta_ext, constant=qf.constant),
        pairs=tuple(pairs),
        links=tuple(links),
        n_x=n,
    )

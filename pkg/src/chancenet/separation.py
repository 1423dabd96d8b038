"""Finding a violated probabilistic cut-capacity constraint for a design.

Given a candidate design (possibly fractional) the separation problem asks
for the s-t cut minimizing

    Theta(z) = mu_x'z - Omega * sqrt(z' Sigma_x z),

where mu_x = diag(x)mu and Sigma_x = diag(x) Sigma diag(x) are the design-
weighted moments and z is the crossing-arc indicator of a cut.  A cut with
Theta below the demand certifies that the design's capacity constraint for
that cut is violated.

Five solvers are provided.  ``separate_enumeration`` walks every source
side (the exact oracle, usable while the internal-node count stays small).
``separate_bnb`` builds one of four mixed 0-1 formulations over node labels
w and arc labels z tied together by

    w_i - w_j <= z_ij,    z_ij <= w_i,    z_ij <= 1 - w_j,

with w fixed to 1 at the source and 0 at the sink, and solves it by branch
and bound on the node labels (integer w pins every z exactly):

* ``sep-qcqp``  (independent capacities only)  epigraph variable t for the
  deviation term, outer-approximated by tangents of t^2 <= z'Sigma_x z;
* ``sep-mc``    McCormick variables for every bilinear z_i z_j carried by a
  covariance entry, plus the same epigraph treatment;
* ``sep-nw``    (independent capacities only)  value variable bounded below
  by linearization rows of the supermodular objective, generated lazily at
  integer leaves;
* ``sep-bqc``   the two-stage scheme: a max-flow check of the mean
  capacities answers the linear question, then a search for a cut whose
  squared mean excess over a threshold is dominated by the weighted
  variance.  Rejected integer leaves are excluded by no-good rows, and the
  threshold tightens to just below the incumbent each time a better cut
  appears, so on natural termination the incumbent matches the
  enumeration optimum to within ``THETA_STEP``.

All formulations restrict themselves to arcs with positive design weight
(zero-weight arcs contribute nothing to Theta); reported cuts live on the
full arc set.  Reported values are exact evaluations of Theta, never LP
objective values, so the tolerances below only affect search effort.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import flow
from .lp import BoundedSimplex
from .model import TOL, Cut, NetworkInstance, make_cut

STRATEGIES = ("enum", "sep-qcqp", "sep-mc", "sep-nw", "sep-bqc")

ENUM_MAX_INTERNAL = 22
THETA_STEP = 1e-7       # improvement step of the sep-bqc threshold
SUPPORT_EPS = 1e-9      # design weights at or below this are dropped
LEAF_TOL = 1e-9         # epigraph/value agreement required at integer leaves
BQC_SLACK = 1e-7        # loose acceptance of the squared-excess test


class SeparationError(ValueError):
    """Inapplicable strategy or malformed separation input."""


@dataclass(frozen=True)
class SeparationProblem:
    """A design to separate, with its weighted moments precomputed.

    ``mu_eff`` and ``cov_eff`` are the design-weighted mean vector and
    covariance matrix over all arcs; ``support`` lists the arcs whose
    design weight exceeds the drop threshold.
    """

    instance: NetworkInstance
    xbar: np.ndarray
    omega: float
    demand: float
    mu_eff: np.ndarray
    cov_eff: np.ndarray
    support: tuple[int, ...]
    strategy: str = "enum"


@dataclass
class SeparationResult:
    status: str                 # violated-cut | none-violated | node-limit | time-limit
    cut: Cut | None
    theta: float
    violation: float            # demand - theta; positive means violated
    nodes: int
    wall_time: float


def separation_problem(
    instance: NetworkInstance,
    xbar,
    omega: float,
    demand: float | None = None,
    strategy: str = "enum",
) -> SeparationProblem:
    if strategy not in STRATEGIES:
        raise SeparationError(f"unknown strategy {strategy!r}; pick one of {STRATEGIES}")
    x = np.asarray(xbar, dtype=float).ravel()
    if x.size != instance.n_arcs:
        raise SeparationError("design vector length does not match the arc count")
    if np.any(x < -TOL.zero) or np.any(x > 1.0 + 1e-7):
        raise SeparationError("design vector must lie in the unit box")
    if omega < 0:
        raise SeparationError("omega must be non-negative")
    if np.any(instance.mu < -TOL.zero):
        raise SeparationError("mean capacities must be non-negative")
    mu_eff = x * instance.mu
    cov_eff = instance.cov * np.outer(x, x)
    support = tuple(int(a) for a in np.flatnonzero(x > SUPPORT_EPS))
    return SeparationProblem(
        instance=instance,
        xbar=x,
        omega=float(omega),
        demand=instance.demand if demand is None else float(demand),
        mu_eff=mu_eff,
        cov_eff=cov_eff,
        support=support,
        strategy=strategy,
    )


def crossing_vector(instance: NetworkInstance, source_side) -> np.ndarray:
    side = frozenset(source_side)
    z = np.zeros(instance.n_arcs)
    for a in range(instance.n_arcs):
        if instance.tails[a] in side and instance.heads[a] not in side:
            z[a] = 1.0
    return z


def eval_theta(problem: SeparationProblem, z, w=None) -> float:
    """Theta at an arc-label vector; validates it against w when given."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != problem.instance.n_arcs:
        raise SeparationError("arc-label vector length does not match the arc count")
    if w is not None:
        side = {problem.instance.source} | {
            v for v in problem.instance.internal_nodes() if w[v] >= 0.5
        }
        expected = crossing_vector(problem.instance, side)
        if not np.array_equal(np.round(z), expected):
            raise SeparationError("arc labels do not match the crossing set of the node labels")
    quad = float(z @ problem.cov_eff @ z)
    return float(problem.mu_eff @ z) - problem.omega * math.sqrt(max(quad, 0.0))


def max_flow_min_cut(instance: NetworkInstance, capacities) -> tuple[float, Cut]:
    """Exact max flow / min cut on the instance topology."""
    caps = np.asarray(capacities, dtype=float).ravel()
    if caps.size != instance.n_arcs:
        raise SeparationError("capacity vector length does not match the arc count")
    if np.any(caps < -TOL.zero):
        raise SeparationError("capacities must be non-negative")
    res = flow.dinic_max_flow(
        instance.nodes, instance.tails, instance.heads, np.maximum(caps, 0.0),
        instance.source, instance.sink,
    )
    return res.value, make_cut(instance, res.source_side)


# ---------------------------------------------------------------------------
# Exact oracle
# ---------------------------------------------------------------------------


def separate_enumeration(problem: SeparationProblem) -> SeparationResult:
    """Global minimizer of Theta over every source side (ties: smallest mask)."""
    t0 = time.perf_counter()
    inst = problem.instance
    internal = inst.internal_nodes()
    if len(internal) > ENUM_MAX_INTERNAL:
        raise SeparationError(
            f"{len(internal)} internal nodes exceed the enumeration limit {ENUM_MAX_INTERNAL}"
        )
    best_theta = math.inf
    best_side = None
    for mask in range(1 << len(internal)):
        side = [inst.source] + [internal[i] for i in range(len(internal)) if (mask >> i) & 1]
        theta = eval_theta(problem, crossing_vector(inst, side))
        if theta < best_theta - 1e-12:
            best_theta = theta
            best_side = side
    violated = best_theta < problem.demand - THETA_STEP
    return SeparationResult(
        status="violated-cut" if violated else "none-violated",
        cut=make_cut(inst, best_side),
        theta=float(best_theta),
        violation=float(problem.demand - best_theta),
        nodes=1 << len(internal),
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Shared LP skeleton for the branch-and-bound strategies
# ---------------------------------------------------------------------------


@dataclass
class _Formulation:
    """LP data shared across the tree of one separation run.

    Columns: w for every internal node, z for every support arc, then
    strategy extras (epigraph t, value v, McCormick y's).  ``base_rows``
    hold the labeling constraints with source/sink labels substituted as
    constants plus strategy seed rows; lazily generated rows accumulate in
    ``extra_rows`` and are valid at every node of the tree.
    """

    problem: SeparationProblem
    strategy: str
    internal: list[int] = field(default_factory=list)
    w_col: dict[int, int] = field(default_factory=dict)
    z_col: dict[int, int] = field(default_factory=dict)
    y_col: dict[tuple[int, int], int] = field(default_factory=dict)
    t_col: int = -1
    v_col: int = -1
    n_cols: int = 0
    objective: np.ndarray | None = None
    base_rows: list[tuple[np.ndarray, str, float]] = field(default_factory=list)
    extra_rows: list[tuple[np.ndarray, str, float]] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def add_extra(self, coefs: np.ndarray, sense: str, rhs: float) -> None:
        self.extra_rows.append(_normalize_row(coefs, sense, rhs))


def _normalize_row(coefs: np.ndarray, sense: str, rhs: float) -> tuple[np.ndarray, str, float]:
    """Scale a row to unit max coefficient so feasibility slack stays uniform."""
    scale = max(float(np.abs(coefs).max(initial=0.0)), abs(rhs), 1e-12)
    return coefs / scale, sense, rhs / scale


def _build_formulation(problem: SeparationProblem, strategy: str) -> _Formulation:
    inst = problem.instance
    fm = _Formulation(problem=problem, strategy=strategy)
    fm.internal = inst.internal_nodes()
    for k, v in enumerate(fm.internal):
        fm.w_col[v] = k
    for k, a in enumerate(problem.support):
        fm.z_col[a] = len(fm.internal) + k
    n_cols = len(fm.internal) + len(problem.support)

    if strategy in ("sep-qcqp", "sep-mc"):
        fm.t_col = n_cols
        n_cols += 1
    if strategy == "sep-nw":
        fm.v_col = n_cols
        n_cols += 1
    if strategy == "sep-mc":
        for i_idx, a in enumerate(problem.support):
            for b in problem.support[i_idx + 1:]:
                if abs(problem.cov_eff[a, b]) > TOL.zero:
                    fm.y_col[(a, b)] = n_cols
                    n_cols += 1
    fm.n_cols = n_cols

    lower = np.zeros(n_cols)
    upper = np.ones(n_cols)
    dev_max = math.sqrt(max(float(np.abs(problem.cov_eff).sum()), 0.0))
    if fm.t_col >= 0:
        upper[fm.t_col] = dev_max
    if fm.v_col >= 0:
        lower[fm.v_col] = -problem.omega * dev_max - 1.0
        upper[fm.v_col] = max(float(problem.mu_eff.sum()), 0.0) + 1.0
    fm.lower, fm.upper = lower, upper

    # Labeling rows per support arc, with w_source = 1 and w_sink = 0 folded in.
    for a in problem.support:
        tail, head = int(inst.tails[a]), int(inst.heads[a])
        zc = fm.z_col[a]
        # w_tail - w_head - z <= 0
        row = np.zeros(n_cols)
        rhs = 0.0
        if tail == inst.source:
            rhs -= 1.0
        elif tail != inst.sink:
            row[fm.w_col[tail]] = 1.0
        if head != inst.sink and head != inst.source:
            row[fm.w_col[head]] = -1.0
        row[zc] = -1.0
        fm.base_rows.append((row, "<=", rhs))
        # z - w_tail <= 0
        row = np.zeros(n_cols)
        row[zc] = 1.0
        rhs = 0.0
        if tail == inst.source:
            rhs = 1.0
        elif tail != inst.sink:
            row[fm.w_col[tail]] = -1.0
        fm.base_rows.append((row, "<=", rhs))
        # z + w_head <= 1
        row = np.zeros(n_cols)
        row[zc] = 1.0
        rhs = 1.0
        if head != inst.sink and head != inst.source:
            row[fm.w_col[head]] = 1.0
        fm.base_rows.append((row, "<=", rhs))

    obj = np.zeros(n_cols)
    if strategy in ("sep-qcqp", "sep-mc", "sep-bqc"):
        for a in problem.support:
            obj[fm.z_col[a]] = problem.mu_eff[a]
    if strategy in ("sep-qcqp", "sep-mc"):
        obj[fm.t_col] = -problem.omega
    elif strategy == "sep-nw":
        obj[fm.v_col] = 1.0
    fm.objective = obj

    if strategy == "sep-mc":
        # Only the binding side of each product envelope is kept: every
        # lazy tangent row rewards a larger s(z, y), so the solver pushes
        # y_ab toward min(z_a, z_b) when the covariance entry is positive
        # and toward max(0, z_a + z_b - 1) when it is negative.  Dropping
        # the slack side enlarges the relaxation without changing its
        # optimum, and integer leaves are checked against the exact
        # variance anyway.
        for (a, b), yc in fm.y_col.items():
            za, zb = fm.z_col[a], fm.z_col[b]
            if problem.cov_eff[a, b] > 0:
                row = np.zeros(n_cols); row[yc] = 1.0; row[za] = -1.0
                fm.base_rows.append((row, "<=", 0.0))
                row = np.zeros(n_cols); row[yc] = 1.0; row[zb] = -1.0
                fm.base_rows.append((row, "<=", 0.0))
            else:
                row = np.zeros(n_cols); row[yc] = 1.0; row[za] = -1.0; row[zb] = -1.0
                fm.base_rows.append((row, ">=", -1.0))
    if strategy in ("sep-qcqp", "sep-mc"):
        # A ladder of tangents keeps the root bound from collapsing to
        # mu'z - Omega * dev_max before any leaf has been visited.
        t_at = dev_max
        while t_at > max(1e-6, dev_max * 1e-3):
            fm.base_rows.append(_oa_row(fm, t_at))
            t_at /= 2.0
    if strategy == "sep-nw":
        for anchor in ((), tuple(range(len(problem.support)))):
            fm.base_rows.extend(_nw_rows(fm, anchor))
    fm.base_rows = [_normalize_row(*r) for r in fm.base_rows]
    return fm


def _variance_row(fm: _Formulation) -> np.ndarray:
    """Coefficients of s(z, y) = z' Sigma_x z in the LP columns."""
    problem = fm.problem
    s = np.zeros(fm.n_cols)
    for a, zc in fm.z_col.items():
        s[zc] = problem.cov_eff[a, a]
    for (a, b), yc in fm.y_col.items():
        s[yc] = 2.0 * problem.cov_eff[a, b]
    return s


def _oa_row(fm: _Formulation, t_at: float) -> tuple[np.ndarray, str, float]:
    """Tangent 2*t_at*t - s(z,y) <= t_at^2 of the epigraph t^2 <= s."""
    row = -_variance_row(fm)
    row[fm.t_col] = 2.0 * t_at
    return row, "<=", t_at * t_at


def _nw_rows(fm: _Formulation, anchor: tuple[int, ...]):
    """Both linearization rows of the supermodular objective at one anchor.

    Emitted as  v - coef'z >= constant  with the anchor indexing into the
    support list.  Valid for every binary z because the objective is
    supermodular when the covariance is diagonal: the first variant charges
    members their removal loss from the full ground set and outsiders their
    addition gain at the anchor, the second does the reverse, and both
    collapse to Theta(anchor) exactly at z = chi_anchor.
    """
    problem = fm.problem
    ns = len(problem.support)
    ground = tuple(range(ns))
    in_s = set(anchor)
    diag = np.array([problem.cov_eff[a, a] for a in problem.support])
    mu = np.array([problem.mu_eff[a] for a in problem.support])
    om = problem.omega

    def theta_set(members) -> float:
        mus = float(sum(mu[k] for k in members))
        var = float(sum(diag[k] for k in members))
        return mus - om * math.sqrt(max(var, 0.0))

    def rho(i, members) -> float:
        without = tuple(sorted(set(members) - {i}))
        return theta_set(tuple(sorted(set(without) | {i}))) - theta_set(without)

    rows = []
    for variant in (1, 2):
        coef = np.zeros(ns)
        constant = theta_set(tuple(sorted(anchor)))
        for i in ground:
            if i in in_s:
                r = rho(i, ground if variant == 1 else anchor)
                constant -= r
                coef[i] += r
            else:
                coef[i] += rho(i, anchor if variant == 1 else ())
        row = np.zeros(fm.n_cols)
        row[fm.v_col] = 1.0
        for k in range(ns):
            row[fm.z_col[problem.support[k]]] = -coef[k]
        rows.append((row, ">=", constant))
    return rows


class _TreeLP:
    """One warm-started LP shared by every node of a separation tree.

    Nodes differ only in the bounds of the label columns, and lazy rows
    are valid tree-wide, so each node solve retargets the bounds, appends
    any rows generated since the last solve, and lets the dual simplex
    repair feasibility from the previous basis.
    """

    def __init__(self, fm: _Formulation):
        self.fm = fm
        A = (
            np.array([r[0] for r in fm.base_rows])
            if fm.base_rows
            else np.zeros((0, fm.n_cols))
        )
        self.solver = BoundedSimplex(
            fm.objective,
            A,
            [r[1] for r in fm.base_rows],
            np.array([r[2] for r in fm.base_rows]),
            fm.lower.copy(),
            fm.upper.copy(),
        )
        self._rows_in = len(fm.base_rows)
        self._w_cols = np.array([fm.w_col[v] for v in fm.internal], dtype=int)

    def solve_node(self, fixed: dict[int, int]):
        fm = self.fm
        pending = fm.extra_rows[self._rows_in - len(fm.base_rows):]
        if pending:
            self.solver.add_rows(
                np.array([r[0] for r in pending]),
                [r[1] for r in pending],
                np.array([r[2] for r in pending]),
            )
            self._rows_in += len(pending)
        if self._w_cols.size:
            lows = np.zeros(self._w_cols.size)
            ups = np.ones(self._w_cols.size)
            for k, v in enumerate(fm.internal):
                if v in fixed:
                    lows[k] = ups[k] = float(fixed[v])
            self.solver.set_bounds(self._w_cols, lows, ups)
        return self.solver.resolve()


def _is_integer_w(fm: _Formulation, x: np.ndarray) -> bool:
    return all(
        x[fm.w_col[v]] <= TOL.integrality or x[fm.w_col[v]] >= 1.0 - TOL.integrality
        for v in fm.internal
    )


def _leaf_side(fm: _Formulation, x: np.ndarray, fixed: dict[int, int]) -> list[int]:
    inst = fm.problem.instance
    side = [inst.source]
    for v in fm.internal:
        val = float(fixed[v]) if v in fixed else x[fm.w_col[v]]
        if val >= 0.5:
            side.append(v)
    return side


def _branch_node(fm: _Formulation, fixed: dict[int, int], x: np.ndarray) -> int | None:
    """Label to branch on: capacity-weighted degree, fractional labels first."""
    problem = fm.problem
    inst = problem.instance
    weight = dict.fromkeys(fm.internal, 0.0)
    for a in problem.support:
        for endpoint in (int(inst.tails[a]), int(inst.heads[a])):
            if endpoint in weight:
                weight[endpoint] += problem.mu_eff[a]
    unfixed = [v for v in fm.internal if v not in fixed]
    if not unfixed:
        return None
    fractional = [
        v for v in unfixed if TOL.integrality < x[fm.w_col[v]] < 1.0 - TOL.integrality
    ]
    pool = fractional if fractional else unfixed
    return min(pool, key=lambda v: (-weight[v], v))


def _forced_mean(fm: _Formulation, fixed: dict[int, int]) -> float:
    """Mean mass of support arcs forced to cross by the label fixings."""
    problem = fm.problem
    inst = problem.instance
    total = 0.0
    for a in problem.support:
        tail, head = int(inst.tails[a]), int(inst.heads[a])
        tail_one = tail == inst.source or fixed.get(tail) == 1
        head_zero = head == inst.sink or fixed.get(head) == 0
        if tail_one and head_zero:
            total += max(problem.mu_eff[a], 0.0)
    return total


def _trivial_result(problem: SeparationProblem, t0: float) -> SeparationResult:
    """Every Theta is zero when no arc carries design weight."""
    inst = problem.instance
    cut = make_cut(inst, [inst.source])
    violated = 0.0 < problem.demand - THETA_STEP
    return SeparationResult(
        status="violated-cut" if violated else "none-violated",
        cut=cut,
        theta=0.0,
        violation=float(problem.demand),
        nodes=0,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------


def separate_bnb(
    problem: SeparationProblem,
    strategy: str | None = None,
    node_limit: int = 200_000,
    time_limit: float | None = None,
) -> SeparationResult:
    """Branch-and-bound separation with the chosen formulation.

    Agrees with :func:`separate_enumeration` on the violated/none status
    and on the minimal Theta value to within ``THETA_STEP`` whenever it
    terminates naturally (statuses ``node-limit`` and ``time-limit`` carry
    the best cut found so far instead).
    """
    t0 = time.perf_counter()
    strategy = problem.strategy if strategy is None else strategy
    if strategy == "enum":
        return separate_enumeration(problem)
    if strategy not in STRATEGIES:
        raise SeparationError(f"unknown strategy {strategy!r}; pick one of {STRATEGIES}")
    if strategy in ("sep-qcqp", "sep-nw") and not problem.instance.is_diagonal:
        raise SeparationError(
            f"{strategy} requires independent capacities (diagonal covariance)"
        )
    if not problem.support:
        return _trivial_result(problem, t0)

    inst = problem.instance
    counters = {"nodes": 0}
    deadline = None if time_limit is None else t0 + time_limit

    if strategy == "sep-bqc":
        return _separate_bqc(problem, counters, node_limit, deadline, t0)

    fm = _build_formulation(problem, strategy)
    tree = _TreeLP(fm)

    # The mean-capacity min cut is a real cut, so its Theta seeds the
    # incumbent; the forced-mean bound below needs the largest possible
    # deviation term as a counterweight.
    _, seed_cut = max_flow_min_cut(inst, problem.mu_eff)
    best_side = list(seed_cut.source_side)
    best_theta = eval_theta(problem, crossing_vector(inst, best_side))
    max_dev = problem.omega * math.sqrt(max(float(np.abs(problem.cov_eff).sum()), 0.0))

    heap: list[tuple[float, int, dict[int, int]]] = []
    tick = 0
    heapq.heappush(heap, (-math.inf, tick, {}))
    limit_status = None
    # Leaves whose lazy row is already in the pool: a second rejection of
    # the same leaf would re-derive the same row (the LP meets fresh rows
    # only up to its feasibility slack), so those leaves are accepted and
    # resolved through branching instead.
    sharpened: set[tuple[int, ...]] = set()

    while heap:
        bound, _, fixed = heapq.heappop(heap)
        if bound >= best_theta - 1e-9:
            continue
        if counters["nodes"] >= node_limit:
            limit_status = "node-limit"
            break
        if deadline is not None and time.perf_counter() > deadline:
            limit_status = "time-limit"
            break
        counters["nodes"] += 1

        res = tree.solve_node(fixed)
        if res.status != "optimal":
            continue
        x = res.x
        node_bound = res.objective
        if node_bound >= best_theta - 1e-9:
            continue

        if _is_integer_w(fm, x):
            side = _leaf_side(fm, x, fixed)
            z = crossing_vector(inst, side)
            theta = eval_theta(problem, z)
            members = tuple(k for k, a in enumerate(problem.support) if z[a] >= 0.5)
            loose = (
                x[fm.t_col] > math.sqrt(max(float(z @ problem.cov_eff @ z), 0.0)) + LEAF_TOL
                if strategy in ("sep-qcqp", "sep-mc")
                else x[fm.v_col] < theta - LEAF_TOL
            )
            if loose and members not in sharpened:
                sharpened.add(members)
                if strategy in ("sep-qcqp", "sep-mc"):
                    s_val = float(z @ problem.cov_eff @ z)
                    fm.add_extra(*_oa_row(fm, max(math.sqrt(max(s_val, 0.0)), 1e-9)))
                else:
                    for lazy in _nw_rows(fm, members):
                        fm.add_extra(*lazy)
                tick += 1
                heapq.heappush(heap, (node_bound, tick, fixed))
                continue
            if theta < best_theta - 1e-12:
                best_theta = theta
                best_side = side
            if node_bound >= theta - 1e-9:
                continue
            # The LP value sits below the leaf's exact Theta (feasibility
            # slack); branching splits the node so nothing better hides.

        branch_v = _branch_node(fm, fixed, x)
        if branch_v is None:
            continue
        for val in (0, 1):
            child = dict(fixed)
            child[branch_v] = val
            child_bound = max(node_bound, _forced_mean(fm, child) - max_dev)
            if child_bound < best_theta - 1e-9:
                tick += 1
                heapq.heappush(heap, (child_bound, tick, child))

    violated = best_theta < problem.demand - THETA_STEP
    return SeparationResult(
        status=limit_status or ("violated-cut" if violated else "none-violated"),
        cut=make_cut(inst, best_side),
        theta=float(best_theta),
        violation=float(problem.demand - best_theta),
        nodes=counters["nodes"],
        wall_time=time.perf_counter() - t0,
    )


def _separate_bqc(
    problem: SeparationProblem,
    counters: dict,
    node_limit: int,
    deadline: float | None,
    t0: float,
) -> SeparationResult:
    """Two-stage scheme with a tightening threshold.

    Stage one seeds the incumbent with the mean-capacity min cut, which
    settles the linear question: every cut's mean mass is at least the max
    flow value, so the threshold below always sits strictly under every
    cut's mean.  Stage two searches for any cut z with

        (mu_x'z - tau)^2 <= Omega^2 z'Sigma_x z    (tau just under the incumbent)

    which, the mean mass exceeding tau, forces Theta(z) <= tau; conversely
    any cut with Theta(z) < tau passes the test.  When the search drains
    with no acceptable leaf left the incumbent is within THETA_STEP of the
    true minimum.  Visited integer leaves are excluded by permanent no-good
    rows; rejection is monotone as tau falls, so tightening the threshold
    midway never needs to revisit them.
    """
    inst = problem.instance
    _, mean_cut = max_flow_min_cut(inst, problem.mu_eff)
    best_side = list(mean_cut.source_side)
    best_theta = eval_theta(problem, crossing_vector(inst, best_side))

    fm = _build_formulation(problem, "sep-bqc")
    tree = _TreeLP(fm)
    max_dev = problem.omega * math.sqrt(max(float(np.abs(problem.cov_eff).sum()), 0.0))

    heap: list[tuple[float, int, dict[int, int]]] = []
    tick = 0
    heapq.heappush(heap, (-math.inf, tick, {}))
    limit_status = None

    while heap:
        bound, _, fixed = heapq.heappop(heap)
        tau = best_theta - THETA_STEP
        # A feasible leaf needs mean mass within max_dev of the threshold.
        if bound > tau + max_dev + 1e-3:
            continue
        if counters["nodes"] >= node_limit:
            limit_status = "node-limit"
            break
        if deadline is not None and time.perf_counter() > deadline:
            limit_status = "time-limit"
            break
        counters["nodes"] += 1

        res = tree.solve_node(fixed)
        if res.status != "optimal":
            continue
        x = res.x
        if res.objective > tau + max_dev + 1e-3:
            continue

        if _is_integer_w(fm, x):
            side = _leaf_side(fm, x, fixed)
            z = crossing_vector(inst, side)
            mean = float(problem.mu_eff @ z)
            quad = float(z @ problem.cov_eff @ z)
            if (mean - tau) ** 2 <= problem.omega**2 * quad + BQC_SLACK:
                theta = eval_theta(problem, z)
                if theta < best_theta - 1e-12:
                    best_theta = theta
                    best_side = side
            # Exclude this label assignment for the rest of the run.
            row = np.zeros(fm.n_cols)
            rhs = 1.0
            side_set = set(side)
            for v in fm.internal:
                if v in side_set:
                    row[fm.w_col[v]] = -1.0
                    rhs -= 1.0
                else:
                    row[fm.w_col[v]] = 1.0
            fm.add_extra(row, ">=", rhs)
            if any(v not in fixed for v in fm.internal):
                tick += 1
                heapq.heappush(heap, (res.objective, tick, fixed))
            continue

        branch_v = _branch_node(fm, fixed, x)
        if branch_v is None:
            continue
        for val in (0, 1):
            child = dict(fixed)
            child[branch_v] = val
            child_bound = max(res.objective, _forced_mean(fm, child))
            tick += 1
            heapq.heappush(heap, (child_bound, tick, child))

    violated = best_theta < problem.demand - THETA_STEP
    return SeparationResult(
        status=limit_status or ("violated-cut" if violated else "none-violated"),
        cut=make_cut(inst, best_side),
        theta=float(best_theta),
        violation=float(problem.demand - best_theta),
        nodes=counters["nodes"],
        wall_time=time.perf_counter() - t0,
    )

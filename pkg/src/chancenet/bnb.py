"""Branch-and-cut master solver for chance-constrained network design.

The problem: pick arcs x in {0,1}^m minimizing h'x while every s-t cut
C keeps  mu_C'x - Omega * sqrt(x' Sigma_C x) >= d.  There is one conic
constraint per cut, exponentially many in the node count, so the master
works on a linear relaxation that grows on demand:

* nominal rows mu_C'x >= d arrive lazily from a max-flow separation on
  the mean capacities (this is the relaxation the search starts from);
* whenever the configured separation strategy finds a cut whose conic
  constraint is violated, that constraint is registered permanently and
  an outer-approximation tangent is added; registered constraints get a
  fresh tangent every round they are still violated;
* registered constraints are strengthened with the combinatorial
  families that fit their shape: packs and extended packs when the
  restriction is diagonal and satisfies the mean/deviation bound,
  polymatroid inequalities plus lifted and aggregated covers when the
  quadratic form has no positive bilinear term, and the McCormick
  rewrite with auxiliary z columns (root node only) otherwise.

Integer points never become incumbents on the LP's word alone: each is
certified by the separation oracle (enumeration when the network is
small enough, the configured strategy otherwise) and cut off when the
certificate fails.  The search is deterministic: best-bound node
selection with an insertion counter, most-fractional branching with
cost tie-breaks, and no randomness anywhere.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cutgen import (
    LinearCut,
    aggregate_and_cover,
    build_q_tilde,
    find_cover,
    find_pack,
    knapsack_from_vertex,
    lift_cover,
    lift_pack,
    mean_cut,
    oa_gradient_cut,
)
from .flow import dinic_max_flow
from .lp import BoundedSimplex, LPError, LPResult
from .model import (
    TOL,
    CapacityModel,
    Cut,
    NetworkInstance,
    QuadraticForm,
    capacity_model,
    check_cv,
    eval_f,
    make_cut,
    q_coefficients,
)
from .separation import ENUM_MAX_INTERNAL, STRATEGIES, separate_bnb, separation_problem
from .submodular import SetFunction, separate_polymatroid

__all__ = [
    "CUT_FAMILIES",
    "SOLVE_STATUSES",
    "Design",
    "SolveConfig",
    "SolveError",
    "SolveStats",
    "csv_header",
    "csv_row",
    "root_gap",
    "solve_cqnd",
]

CUT_FAMILIES = ("oa", "pack", "xpack", "polymatroid", "cover", "aggregate")
SOLVE_STATUSES = ("optimal", "infeasible", "node-limit", "time-limit", "memory-limit")
BRANCH_RULES = ("most-fractional",)

NONBINDING_LIMIT = 50    # consecutive slack root solves before a row is retired
AGG_WINDOW = 4           # how many recent vertex rows feed one aggregation attempt
PACK_LIFT_MAX_ARCS = 20  # beyond this, exact pack lifting enumerates too much
PARALLEL_EPS = 1e-5      # cosine margin treating two rows as the same direction
PARALLEL_RHS_GAP = 1e-6  # canonical-rhs gain below which the twin row wins
SEP_NODE_BUDGET = 500_000

_CSV_COLUMNS = ("instance", "n", "m", "beta", "omega", "rgap", "cuts",
                "covers", "nodes", "time", "status", "egap")


class SolveError(ValueError):
    """Configuration or state the solver cannot work with."""


class _TimeUp(Exception):
    """Internal signal: the wall-clock budget ran out mid-search."""


@dataclass(frozen=True)
class SolveConfig:
    """Knobs of one solve.

    ``omega`` is the safety factor of the conic constraints (0 solves
    the nominal design problem).  ``cuts`` lists the enabled
    strengthening families; tangents generated while certifying integer
    points are always kept because the search cannot progress without
    them.  ``root_rounds`` and ``node_rounds`` cap the cutting rounds
    per node, the knob the aggressive-OA comparisons turn.  ``seed`` is
    recorded for bookkeeping; the engine itself is deterministic.  Only
    single-worker solves are implemented, and the defaults mirror the
    customary 1800 s / 500 MB experiment limits.
    """

    omega: float = 0.0
    strategy: str = "enum"
    cuts: tuple[str, ...] = CUT_FAMILIES
    node_limit: int = 200_000
    time_limit: float = 1800.0
    memory_mb: float = 500.0
    branching: str = "most-fractional"
    seed: int = 0
    root_rounds: int = 200
    node_rounds: int = 8
    workers: int = 1

    def __post_init__(self) -> None:
        if self.omega < 0.0 or not math.isfinite(self.omega):
            raise SolveError("omega must be finite and non-negative")
        if self.strategy not in STRATEGIES:
            raise SolveError(f"unknown separation strategy {self.strategy!r}")
        object.__setattr__(self, "cuts", tuple(self.cuts))
        for fam in self.cuts:
            if fam not in CUT_FAMILIES:
                raise SolveError(f"unknown cut family {fam!r}; pick from {CUT_FAMILIES}")
        if self.node_limit <= 0 or self.time_limit <= 0 or self.memory_mb <= 0:
            raise SolveError("node, time and memory limits must be positive")
        if self.branching not in BRANCH_RULES:
            raise SolveError(f"unknown branching rule {self.branching!r}")
        if self.root_rounds <= 0 or self.node_rounds < 0:
            raise SolveError("cutting-round caps must be positive at the root")
        if self.workers != 1:
            raise SolveError("parallel node evaluation is not implemented; use one worker")


@dataclass(frozen=True)
class Design:
    """A binary arc selection with its cost and feasibility margin.

    ``worst_slack`` is min over all cuts of f_C(x) - d, computed by the
    certification oracle; non-negative (within tolerance) for feasible
    designs, negative when the design witnesses infeasibility.
    """

    x: np.ndarray
    cost: float
    worst_slack: float

    @property
    def arcs(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.x > 0.5))


@dataclass
class SolveStats:
    """Search counters in the shape the benchmark tables report.

    Gaps are non-negative fractions: ``rgap`` compares the root bound
    z_r with the final value z_o as |z_r - z_o| / z_o, and ``egap``
    compares the best bound at termination with the best incumbent
    (zero when the solve finished).  ``covers`` totals the three cover
    kinds inside ``cuts_by_family``.  ``root_bound`` is the raw z_r so
    gaps can be recomputed against an optimum obtained elsewhere.
    """

    rgap: float
    egap: float
    cuts_by_family: dict[str, int]
    covers: int
    nodes: int
    wall_time: float
    status: str
    root_bound: float = math.nan

    @property
    def total_cuts(self) -> int:
        return sum(self.cuts_by_family.values())


def csv_header() -> str:
    return ",".join(_CSV_COLUMNS)


def csv_row(instance: NetworkInstance, config: SolveConfig, stats: SolveStats) -> str:
    """One result line matching :func:`csv_header` column order."""
    mf = dinic_max_flow(instance.nodes, instance.tails, instance.heads,
                        instance.mu, instance.source, instance.sink)
    beta = instance.demand / mf.value if mf.value > 0 else math.inf
    fields = (
        instance.name or "instance",
        str(instance.nodes),
        str(instance.n_arcs),
        f"{beta:.6g}",
        f"{config.omega:.6g}",
        f"{stats.rgap:.6g}",
        str(stats.total_cuts),
        str(stats.covers),
        str(stats.nodes),
        f"{stats.wall_time:.3f}",
        stats.status,
        f"{stats.egap:.6g}",
    )
    return ",".join(fields)


# ---------------------------------------------------------------------------
# Master LP
# ---------------------------------------------------------------------------


@dataclass
class _Row:
    """One master row over the x columns and optional z columns."""

    kind: str
    x_idx: tuple[int, ...]
    x_coef: tuple[float, ...]
    z_idx: tuple[int, ...]
    z_coef: tuple[float, ...]
    sense: str
    rhs: float
    scale: float
    unit: np.ndarray | None = None
    urhs: float = 0.0
    active: bool = True
    streak: int = 0

    def activity(self, x: np.ndarray, z: np.ndarray) -> float:
        act = sum(c * float(x[i]) for i, c in zip(self.x_idx, self.x_coef))
        act += sum(c * float(z[k]) for k, c in zip(self.z_idx, self.z_coef))
        return act

    def violation(self, x: np.ndarray, z: np.ndarray) -> float:
        act = self.activity(x, z)
        return act - self.rhs if self.sense == "<=" else self.rhs - act


class _Master:
    """The growing linear relaxation shared by every node of one solve.

    Rows are normalized by their own magnitude before entering the LP so
    the simplex feasibility slack means the same thing for a mean-capacity
    row (coefficients around 100) and a cover row (coefficients of 1).
    During the root loop rows that stay slack for ``NONBINDING_LIMIT``
    consecutive solves are retired; the retirement is applied at
    :meth:`freeze`, after which the solver only ever gains rows and the
    warm dual restart of the LP engine carries it from node to node.
    """

    def __init__(self, instance: NetworkInstance) -> None:
        self.inst = instance
        self.m = instance.n_arcs
        self.n_z = 0
        self.rows: list[_Row] = []
        self.keys: set = set()
        self.solver: BoundedSimplex | None = None
        self.mat: list[int] = []
        self._unmat: list[int] = []
        self.needs_rebuild = True
        self.frozen = False
        self.cur_fix: dict[int, float] = {}

    # ------------------------------------------------------------- rows
    def _key(self, x_idx, x_coef, z_idx, z_coef, sense, rhs, scale):
        xs = tuple(sorted((int(i), round(c / scale, 9)) for i, c in zip(x_idx, x_coef)))
        zs = tuple(sorted((int(k), round(c / scale, 9)) for k, c in zip(z_idx, z_coef)))
        return (sense, round(rhs / scale, 9), xs, zs)

    def add(self, kind, x_idx, x_coef, z_idx, z_coef, sense, rhs,
            point=None, force=False) -> bool:
        """Admit one row; returns False on duplicates or weak violation.

        Violation is measured relative to the row's scale so admission
        stays commensurate with the LP feasibility tolerance (a raw 1e-6
        on a row with coefficients near 100 is below what the simplex
        can even resolve).  ``force`` bypasses the violation gate for
        structurally required rows.
        """
        coefs = tuple(abs(c) for c in x_coef) + tuple(abs(c) for c in z_coef)
        scale = max(max(coefs, default=0.0), abs(rhs), 1.0)
        if not force:
            if point is None:
                raise SolveError("violation-gated rows need the current LP point")
            probe = _Row(kind, tuple(x_idx), tuple(x_coef), tuple(z_idx),
                         tuple(z_coef), sense, rhs, scale)
            if probe.violation(point[0], point[1]) <= TOL.cut_violation * scale:
                return False
        key = self._key(x_idx, x_coef, z_idx, z_coef, sense, rhs, scale)
        if key in self.keys:
            return False
        vec = np.zeros(self.m + self.n_z)
        np.add.at(vec, list(x_idx), np.asarray(x_coef, dtype=float) / scale)
        if z_idx:
            np.add.at(vec, [self.m + k for k in z_idx],
                      np.asarray(z_coef, dtype=float) / scale)
        norm = float(np.linalg.norm(vec))
        if norm <= TOL.zero:
            return False
        sign = -1.0 if sense == "<=" else 1.0
        unit = sign * vec / norm
        urhs = sign * rhs / (scale * norm)
        if not force and self._has_parallel_twin(unit, urhs):
            return False
        self.keys.add(key)
        self.rows.append(_Row(kind, tuple(x_idx), tuple(x_coef), tuple(z_idx),
                              tuple(z_coef), sense, rhs, scale,
                              unit=unit, urhs=urhs))
        self._unmat.append(len(self.rows) - 1)
        return True

    def _has_parallel_twin(self, unit: np.ndarray, urhs: float) -> bool:
        """An active row nearly parallel to this one and at least as deep.

        Outer-approximation tangents taken at slowly moving fractional
        points converge in direction; keeping every one of them plants
        numerically dependent row pairs in the LP basis whenever the
        optimum binds several at once.  A new row whose canonical form
        (pointing the ``>=`` way) matches an existing one to within
        ``PARALLEL_EPS`` and does not deepen it materially is redundant
        for the relaxation bound, so it is refused at the door.
        """
        size = unit.size
        for row in self.rows:
            if not row.active or row.unit is None:
                continue
            w = row.unit
            dot = float(unit[: w.size] @ w) if w.size <= size else float(unit @ w[:size])
            if dot > 1.0 - PARALLEL_EPS and row.urhs >= urhs - PARALLEL_RHS_GAP:
                return True
        return False

    def add_cut(self, cut: LinearCut, zoff: int = -1, point=None, force=False) -> bool:
        if cut.z_pair >= 0:
            if zoff < 0:
                raise SolveError("link row admitted without a z block")
            z_idx, z_coef = (zoff + cut.z_pair,), (cut.z_coef,)
        else:
            z_idx, z_coef = (), ()
        return self.add(cut.kind, cut.indices, cut.coefs, z_idx, z_coef,
                        cut.sense, cut.rhs, point=point, force=force)

    def new_z_block(self, n_pairs: int) -> int:
        if self.frozen:
            raise SolveError("z columns may only be created during the root loop")
        offset = self.n_z
        self.n_z += n_pairs
        self.needs_rebuild = True
        return offset

    # ------------------------------------------------------------- solve
    def _vector(self, row: _Row) -> np.ndarray:
        vec = np.zeros(self.m + self.n_z)
        np.add.at(vec, list(row.x_idx), np.asarray(row.x_coef) / row.scale)
        if row.z_idx:
            np.add.at(vec, [self.m + k for k in row.z_idx],
                      np.asarray(row.z_coef) / row.scale)
        return vec

    def _bounds(self, fixings: dict[int, float]) -> tuple[np.ndarray, np.ndarray]:
        lower = np.zeros(self.m + self.n_z)
        upper = np.ones(self.m + self.n_z)
        for col, val in fixings.items():
            lower[col] = upper[col] = val
        return lower, upper

    def _build(self, fixings: dict[int, float]) -> None:
        costs = np.concatenate([self.inst.costs, np.zeros(self.n_z)])
        self.mat = [k for k, row in enumerate(self.rows) if row.active]
        self._unmat = []
        A = [self._vector(self.rows[k]) for k in self.mat]
        senses = [self.rows[k].sense for k in self.mat]
        rhs = [self.rows[k].rhs / self.rows[k].scale for k in self.mat]
        lower, upper = self._bounds(fixings)
        self.solver = BoundedSimplex(costs, A, senses, rhs, lower, upper)
        self.needs_rebuild = False
        self.cur_fix = dict(fixings)

    def _cold_solve(self) -> LPResult:
        try:
            return self.solver.solve()
        except LPError as exc:
            raise SolveError(f"master relaxation failed numerically: {exc}") from exc

    def solve(self, fixings: dict[int, float]) -> LPResult:
        if self.solver is None or self.needs_rebuild:
            self._build(fixings)
            return self._cold_solve()
        try:
            if self._unmat:
                fresh = [k for k in self._unmat if self.rows[k].active]
                if fresh:
                    self.solver.add_rows(
                        [self._vector(self.rows[k]) for k in fresh],
                        [self.rows[k].sense for k in fresh],
                        [self.rows[k].rhs / self.rows[k].scale for k in fresh],
                    )
                    self.mat.extend(fresh)
                self._unmat = []
            changed = [c for c in set(self.cur_fix) | set(fixings)
                       if self.cur_fix.get(c) != fixings.get(c)]
            if changed:
                lo = [fixings.get(c, 0.0) for c in changed]
                up = [fixings.get(c, 1.0) for c in changed]
                self.solver.set_bounds(changed, lo, up)
                self.cur_fix = dict(fixings)
            return self.solver.resolve()
        except LPError:
            self._build(fixings)
            return self._cold_solve()

    # ------------------------------------------------------- bookkeeping
    def update_streaks(self, x: np.ndarray, z: np.ndarray) -> None:
        """Root-loop retirement bookkeeping on the materialized rows."""
        for k in self.mat:
            row = self.rows[k]
            if not row.active:
                continue
            slack = -row.violation(x, z)
            if slack > TOL.cut_violation * row.scale:
                row.streak += 1
                if row.streak >= NONBINDING_LIMIT:
                    row.active = False
                    self.keys.discard(self._key(row.x_idx, row.x_coef, row.z_idx,
                                                row.z_coef, row.sense, row.rhs, row.scale))
            else:
                row.streak = 0

    def freeze(self) -> None:
        """End of the root loop: drop retired rows, then append-only."""
        self.frozen = True
        if any(not row.active for row in self.rows):
            self.needs_rebuild = True

    def memory_bytes(self) -> int:
        if self.solver is None:
            return 0
        r, c = self.solver.m, self.solver.n
        return 8 * (r * (c + r) + r * r + 4 * (c + r))


# ---------------------------------------------------------------------------
# Registered conic constraints
# ---------------------------------------------------------------------------


def _g_from_form(qf: QuadraticForm) -> SetFunction:
    """Shifted subset evaluation of q, normalized to g(empty) = 0."""

    def evaluate(items: tuple) -> float:
        mask = 0
        for i in items:
            mask |= 1 << i
        return qf.value_of_subset(mask) - qf.constant

    return SetFunction(qf.size, evaluate)


@dataclass
class _Constraint:
    """One cut whose conic constraint was found violated at some point."""

    ident: int
    cut: Cut
    cm: CapacityModel
    qf: QuadraticForm
    diagonal: bool
    cv_ok: bool
    direct: bool                 # no positive bilinear coefficient
    g: SetFunction | None
    g_rhs: float
    zoff: int = -1               # z-column offset once the rewrite exists
    qtilde: object | None = None
    g_ext: SetFunction | None = None
    vertex_rows: list = field(default_factory=list)

    def remember_vertex(self, row: LinearCut) -> None:
        self.vertex_rows.append(row)
        if len(self.vertex_rows) > AGG_WINDOW:
            del self.vertex_rows[0]


class _Registry:
    """Permanent store of violated conic constraints, keyed by arc set."""

    def __init__(self, instance: NetworkInstance, omega: float) -> None:
        self.inst = instance
        self.omega = omega
        self.recs: list[_Constraint] = []
        self.index: dict[tuple, int] = {}

    def get_or_register(self, cut: Cut) -> tuple[_Constraint, bool]:
        key = tuple(sorted(cut.arc_ids))
        if key in self.index:
            return self.recs[self.index[key]], False
        cm = capacity_model(self.inst, self.omega, arc_ids=cut.arc_ids)
        qf = q_coefficients(cm)
        direct = not qf.positive_pairs()
        rec = _Constraint(
            ident=len(self.recs),
            cut=cut,
            cm=cm,
            qf=qf,
            diagonal=cm.is_diagonal,
            cv_ok=not check_cv(cm),
            direct=direct,
            g=_g_from_form(qf) if direct else None,
            g_rhs=-qf.constant,
        )
        self.index[key] = len(self.recs)
        self.recs.append(rec)
        return rec, True


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def _effective_strategy(instance: NetworkInstance, requested: str) -> str:
    """Resolve the strategy actually usable on this instance."""
    internal = len(instance.internal_nodes())
    if requested in ("sep-qcqp", "sep-nw") and not instance.is_diagonal:
        raise SolveError(f"{requested} handles diagonal covariances only")
    if requested == "enum" and internal > ENUM_MAX_INTERNAL:
        return "sep-bqc"
    return requested


def _is_integral(x: np.ndarray) -> bool:
    return bool(np.all(np.minimum(x, 1.0 - x) <= TOL.integrality))


class _Search:
    """State of one solve_cqnd call."""

    def __init__(self, instance: NetworkInstance, config: SolveConfig) -> None:
        self.inst = instance
        self.cfg = config
        self.omega = config.omega
        self.strategy = _effective_strategy(instance, config.strategy)
        self.master = _Master(instance)
        self.registry = _Registry(instance, config.omega)
        self.counts: dict[str, int] = {}
        self.covers = 0
        self.nodes = 0
        self.t0 = time.perf_counter()
        self.deadline = self.t0 + config.time_limit
        self.inc_x: np.ndarray | None = None
        self.inc_cost = math.inf
        self.inc_theta = -math.inf
        self.feas_tol = TOL.feasibility * max(1.0, abs(instance.demand))

    # ----------------------------------------------------------- helpers
    def _remaining(self) -> float:
        left = self.deadline - time.perf_counter()
        if left <= 0.0:
            raise _TimeUp
        return left

    def _count(self, kind: str) -> None:
        self.counts[kind] = self.counts.get(kind, 0) + 1
        if kind in ("cover", "lifted-cover", "aggregated-cover"):
            self.covers += 1

    def _admit(self, cut: LinearCut, zoff: int = -1, point=None, force=False) -> int:
        if self.master.add_cut(cut, zoff=zoff, point=point, force=force):
            self._count(cut.kind)
            return 1
        return 0

    def _separate(self, x: np.ndarray, strategy: str):
        problem = separation_problem(self.inst, np.clip(x, 0.0, 1.0),
                                     self.omega, strategy=strategy)
        result = separate_bnb(problem, node_limit=SEP_NODE_BUDGET,
                              time_limit=self._remaining())
        if result.status in ("node-limit", "time-limit"):
            raise _TimeUp
        return result

    def _certify(self, x: np.ndarray):
        """Conclusive separation at a binary point (enum when it fits)."""
        internal = len(self.inst.internal_nodes())
        strategy = "enum" if internal <= ENUM_MAX_INTERNAL else self.strategy
        return self._separate(x, strategy)

    # --------------------------------------------------------- cut round
    def _mean_stage(self, x: np.ndarray, point) -> int:
        scaled = self.inst.mu * np.clip(x, 0.0, None)
        mf = dinic_max_flow(self.inst.nodes, self.inst.tails, self.inst.heads,
                            scaled, self.inst.source, self.inst.sink)
        if mf.value >= self.inst.demand - self.feas_tol:
            return 0
        cut = make_cut(self.inst, mf.source_side)
        cm = capacity_model(self.inst, self.omega, arc_ids=cut.arc_ids)
        return self._admit(mean_cut(cm, origin=-1), point=point)

    def _probabilistic_stage(self, x: np.ndarray, point) -> int:
        result = self._separate(x, self.strategy)
        if result.status != "violated-cut":
            return 0
        rec, _ = self.registry.get_or_register(result.cut)
        added = self._admit(mean_cut(rec.cm, origin=rec.ident), point=point)
        added += self._admit(oa_gradient_cut(rec.cm, x, origin=rec.ident), point=point)
        return added

    def _oa_stage(self, x: np.ndarray, point) -> int:
        added = 0
        for rec in self.registry.recs:
            if eval_f(rec.cm, x) < rec.cm.demand - self.feas_tol:
                added += self._admit(oa_gradient_cut(rec.cm, x, origin=rec.ident),
                                     point=point)
        return added

    def _pack_stage(self, rec: _Constraint, x: np.ndarray, point) -> int:
        found = find_pack(rec.cm, x, origin=rec.ident)
        if found is None:
            return 0
        pack, row = found
        added = 0
        if "pack" in self.cfg.cuts:
            added += self._admit(row, point=point)
        if "xpack" in self.cfg.cuts and rec.cm.size <= PACK_LIFT_MAX_ARCS:
            added += self._admit(lift_pack(rec.cm, pack, x, origin=rec.ident),
                                 point=point)
        return added

    def _direct_stage(self, rec: _Constraint, x: np.ndarray, point) -> int:
        xl = rec.cm.restrict(np.clip(x, 0.0, 1.0))
        vertex, _ = separate_polymatroid(xl, rec.g, rec.g_rhs)
        row = LinearCut("polymatroid", rec.cm.arc_ids,
                        tuple(float(v) for v in vertex.v), "<=", rec.g_rhs,
                        origin=rec.ident)
        rec.remember_vertex(row)
        added = 0
        if "polymatroid" in self.cfg.cuts:
            added += self._admit(row, point=point)
        frac = {int(i): float(x[i]) for i in rec.cm.arc_ids}
        if "cover" in self.cfg.cuts:
            kp = knapsack_from_vertex(rec.cm.arc_ids, vertex.v, rec.g_rhs)
            found = find_cover(kp, frac, origin=rec.ident)
            if found is not None:
                cover, cover_row = found
                lifted = lift_cover(kp, cover, frac, origin=rec.ident)
                added += self._admit(lifted if lifted.kind == "lifted-cover" else cover_row,
                                     point=point)
        if "aggregate" in self.cfg.cuts and len(rec.vertex_rows) >= 2:
            agg = aggregate_and_cover(rec.vertex_rows, frac, origin=rec.ident)
            if agg is not None:
                added += self._admit(agg, point=point)
        return added

    def _qtilde_stage(self, rec: _Constraint, x: np.ndarray, z: np.ndarray, point) -> int:
        """Root-only strengthening through the McCormick rewrite.

        The extended ground set mixes arcs with pair columns, so cover
        machinery runs on pseudo ids (parent arc ids, then m + absolute
        z index) and the results are split back into x and z parts.
        """
        added = 0
        if rec.zoff < 0:
            rec.qtilde = build_q_tilde(rec.cm, rec.qf, origin=rec.ident)
            if not rec.qtilde.pairs:
                raise SolveError("rewrite requested for a constraint without positive pairs")
            rec.zoff = self.master.new_z_block(len(rec.qtilde.pairs))
            rec.g_ext = _g_from_form(rec.qtilde.form)
            for link in rec.qtilde.links:
                if self.master.add_cut(link, zoff=rec.zoff, force=True):
                    self._count(link.kind)
                    added += 1
            return added

        n_loc = rec.qtilde.n_x
        n_pairs = len(rec.qtilde.pairs)
        xl = rec.cm.restrict(np.clip(x, 0.0, 1.0))
        zl = np.clip(z[rec.zoff:rec.zoff + n_pairs], 0.0, 1.0)
        stacked = np.concatenate([xl, zl])
        vertex, _ = separate_polymatroid(stacked, rec.g_ext, rec.g_rhs)

        pseudo_ids = list(rec.cm.arc_ids) + [self.inst.n_arcs + rec.zoff + k
                                             for k in range(n_pairs)]
        frac = {pid: float(stacked[i]) for i, pid in enumerate(pseudo_ids)}

        def split(indices, coefs):
            x_idx, x_coef, z_idx, z_coef = [], [], [], []
            for i, c in zip(indices, coefs):
                if i < self.inst.n_arcs:
                    x_idx.append(int(i))
                    x_coef.append(float(c))
                else:
                    z_idx.append(int(i) - self.inst.n_arcs)
                    z_coef.append(float(c))
            return tuple(x_idx), tuple(x_coef), tuple(z_idx), tuple(z_coef)

        vertex_row = LinearCut("polymatroid", tuple(pseudo_ids),
                               tuple(float(v) for v in vertex.v), "<=", rec.g_rhs,
                               origin=rec.ident)
        rec.remember_vertex(vertex_row)
        if "polymatroid" in self.cfg.cuts:
            xi, xc, zi, zc = split(vertex_row.indices, vertex_row.coefs)
            if self.master.add("polymatroid", xi, xc, zi, zc, "<=", rec.g_rhs,
                               point=point):
                self._count("polymatroid")
                added += 1
        if "cover" in self.cfg.cuts:
            kp = knapsack_from_vertex(pseudo_ids, vertex.v, rec.g_rhs)
            found = find_cover(kp, frac, origin=rec.ident)
            if found is not None:
                cover, cover_row = found
                lifted = lift_cover(kp, cover, frac, origin=rec.ident)
                chosen = lifted if lifted.kind == "lifted-cover" else cover_row
                xi, xc, zi, zc = split(chosen.indices, chosen.coefs)
                if self.master.add(chosen.kind, xi, xc, zi, zc, chosen.sense,
                                   chosen.rhs, point=point):
                    self._count(chosen.kind)
                    added += 1
        if "aggregate" in self.cfg.cuts and len(rec.vertex_rows) >= 2:
            agg = aggregate_and_cover(rec.vertex_rows, frac, origin=rec.ident)
            if agg is not None:
                xi, xc, zi, zc = split(agg.indices, agg.coefs)
                if self.master.add(agg.kind, xi, xc, zi, zc, agg.sense, agg.rhs,
                                   point=point):
                    self._count(agg.kind)
                    added += 1
        return added

    def _cut_round(self, x: np.ndarray, z: np.ndarray, root: bool) -> int:
        point = (x, z)
        added = self._mean_stage(x, point)
        if added:
            # Stage-1 precedence: the linear repair resolves before any
            # conic machinery spends time on this point.
            return added
        added += self._probabilistic_stage(x, point)
        if "oa" in self.cfg.cuts:
            added += self._oa_stage(x, point)
        for rec in self.registry.recs:
            if rec.diagonal and rec.cv_ok and (
                    "pack" in self.cfg.cuts or "xpack" in self.cfg.cuts):
                added += self._pack_stage(rec, x, point)
            wants_sub = any(f in self.cfg.cuts
                            for f in ("polymatroid", "cover", "aggregate"))
            if not wants_sub:
                continue
            if rec.direct:
                added += self._direct_stage(rec, x, point)
            elif root:
                added += self._qtilde_stage(rec, x, z, point)
        return added

    # -------------------------------------------------------------- node
    def _branch_column(self, x: np.ndarray) -> int:
        dist = np.minimum(x, 1.0 - x)
        candidates = [i for i in range(self.inst.n_arcs) if dist[i] > TOL.integrality]
        if not candidates:
            raise SolveError("asked to branch on an integral point")
        return max(candidates, key=lambda i: (dist[i], self.inst.costs[i], -i))

    def _process(self, fixings: dict[int, float], root: bool):
        """Resolve, cut, and either prune, fathom, or pick a branch column.

        Returns ("pruned", bound) / ("fathomed", obj) / ("branched", obj,
        column, loop_obj); loop_obj is the LP value when the cutting loop
        went quiet, which at the root is the z_r the gap reports use.
        """
        cap = self.cfg.root_rounds if root else self.cfg.node_rounds
        rounds = 0
        while True:
            self._remaining()
            res = self.master.solve(fixings)
            if res.status == "infeasible":
                return ("pruned", math.inf)
            if res.status != "optimal":
                raise SolveError(f"master relaxation came back {res.status}")
            obj = res.objective
            x = res.x[:self.inst.n_arcs]
            z = res.x[self.inst.n_arcs:]
            if root:
                self.master.update_streaks(x, z)
            if obj >= self.inc_cost - 1e-6 * max(1.0, abs(self.inc_cost)):
                return ("pruned", obj)
            if rounds < cap:
                rounds += 1
                if self._cut_round(x, z, root):
                    continue
            if _is_integral(x):
                xb = np.round(np.clip(x, 0.0, 1.0))
                cert = self._certify(xb)
                violation = cert.violation
                if violation > self.feas_tol:
                    rec, _ = self.registry.get_or_register(cert.cut)
                    self._admit(mean_cut(rec.cm, origin=rec.ident),
                                point=(x, z))
                    self._admit(oa_gradient_cut(rec.cm, xb, origin=rec.ident),
                                point=(x, z), force=True)
                    continue
                cost = float(self.inst.costs @ xb)
                if cost < self.inc_cost - 1e-12:
                    self.inc_x = xb
                    self.inc_cost = cost
                    self.inc_theta = cert.theta
                return ("fathomed", obj)
            return ("branched", obj, self._branch_column(x), obj)

    # --------------------------------------------------------------- run
    def run(self) -> tuple[Design, SolveStats]:
        ones = np.ones(self.inst.n_arcs)
        cert = self._certify(ones)
        if cert.violation > self.feas_tol:
            design = Design(ones, float(self.inst.costs @ ones),
                            cert.theta - self.inst.demand)
            return design, self._stats("infeasible", z_root=None, bound=math.inf)
        self.inc_x = ones
        self.inc_cost = float(self.inst.costs @ ones)
        self.inc_theta = cert.theta

        heap: list[tuple[float, int, dict[int, float]]] = [(0.0, 0, {})]
        tick = 1
        z_root: float | None = None
        status = "optimal"
        bound_at_stop = None

        while heap:
            bound = heap[0][0]
            if self.inc_cost - bound <= 1e-6 * max(1.0, abs(self.inc_cost)):
                break
            if self.nodes >= self.cfg.node_limit:
                status, bound_at_stop = "node-limit", bound
                break
            if time.perf_counter() >= self.deadline:
                status, bound_at_stop = "time-limit", bound
                break
            if self.master.memory_bytes() > self.cfg.memory_mb * 2**20:
                status, bound_at_stop = "memory-limit", bound
                break
            _, _, fixings = heapq.heappop(heap)
            self.nodes += 1
            root = self.nodes == 1
            try:
                outcome = self._process(fixings, root)
            except _TimeUp:
                status, bound_at_stop = "time-limit", bound
                break
            if root:
                z_root = outcome[1] if outcome[0] != "pruned" else self.inc_cost
                if outcome[0] == "branched":
                    z_root = outcome[3]
                self.master.freeze()
            if outcome[0] == "branched":
                _, obj, col, _ = outcome
                for val in (0.0, 1.0):
                    child = dict(fixings)
                    child[col] = val
                    heapq.heappush(heap, (obj, tick, child))
                    tick += 1

        if z_root is None:
            z_root = self.inc_cost
        if status == "optimal":
            bound_at_stop = self.inc_cost
        design = Design(self.inc_x, self.inc_cost, self.inc_theta - self.inst.demand)
        return design, self._stats(status, z_root=z_root, bound=bound_at_stop)

    def _stats(self, status: str, z_root: float | None, bound: float) -> SolveStats:
        denom = max(abs(self.inc_cost), 1e-9)
        if status == "infeasible" or z_root is None or not math.isfinite(self.inc_cost):
            rgap = 0.0
        else:
            rgap = max(0.0, (self.inc_cost - z_root) / denom)
        if status in ("optimal", "infeasible") or not math.isfinite(self.inc_cost):
            egap = 0.0
        else:
            egap = max(0.0, (self.inc_cost - bound) / denom)
        return SolveStats(
            rgap=rgap,
            egap=egap,
            cuts_by_family=dict(self.counts),
            covers=self.covers,
            nodes=self.nodes,
            wall_time=time.perf_counter() - self.t0,
            status=status,
            root_bound=math.nan if z_root is None else z_root,
        )


def solve_cqnd(instance: NetworkInstance,
               config: SolveConfig | None = None) -> tuple[Design, SolveStats]:
    """Solve the design problem to proven optimality within the limits.

    Returns the best design found and the search statistics.  With the
    ``infeasible`` status the design is the all-arcs selection whose
    negative ``worst_slack`` certifies that no selection can work; under
    a limit status the design is the best certified incumbent and
    ``egap`` measures the remaining uncertainty.
    """
    return _Search(instance, config or SolveConfig()).run()


def root_gap(instance: NetworkInstance, config: SolveConfig | None = None,
             optimum: float | None = None) -> float:
    """Root-relaxation gap of one solve (fraction of the final value).

    With ``optimum`` given the tree is cut off after the root node and
    the gap is measured against that value, which lets different cut
    configurations be compared without re-proving optimality each time.
    """
    if optimum is None:
        _, stats = solve_cqnd(instance, config)
        return stats.rgap
    config = config or SolveConfig()
    rooted = replace(config, node_limit=1)
    _, stats = solve_cqnd(instance, rooted)
    if not math.isfinite(stats.root_bound) or optimum <= 0:
        return 0.0
    return max(0.0, (optimum - stats.root_bound) / optimum)

"""Bounded-variable simplex: hand cases, cross-checks, warm restarts."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.optimize

from chancenet.lp import BoundedSimplex, LPError, resolve_with_new_rows, solve_lp


def random_program(rng, n=None, m=None):
    """A bounded random LP in the solver's (c, A, senses, rhs, lo, up) form."""
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(1, 8))
    c = rng.normal(size=n).round(3)
    A = rng.normal(size=(m, n)).round(3)
    senses = [rng.choice(["<=", ">=", "="]) for _ in range(m)]
    interior = rng.random(n)
    rhs = A @ interior + np.where([s == "<=" for s in senses], 1.0, -1.0) * rng.random(m)
    rhs = np.where([s == "=" for s in senses], A @ interior, rhs).round(3)
    return c, A, senses, rhs, np.zeros(n), np.ones(n)


def by_linprog(c, A, senses, rhs, lo, up):
    senses = list(senses)
    ub = [i for i, s in enumerate(senses) if s == "<="]
    ge = [i for i, s in enumerate(senses) if s == ">="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    A = np.atleast_2d(A)
    A_ub = np.vstack([A[ub], -A[ge]]) if ub or ge else None
    b_ub = np.concatenate([rhs[ub], -rhs[ge]]) if ub or ge else None
    return scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=b_ub,
        A_eq=A[eq] if eq else None, b_eq=rhs[eq] if eq else None,
        bounds=list(zip(lo, up)), method="highs",
    )


# ---------------------------------------------------------------------------
# Hand-checked programs
# ---------------------------------------------------------------------------


def test_two_variable_program():
    # min -x - 2y  s.t.  x + y <= 1.5, box [0, 1]^2: optimum at (0.5, 1).
    res = solve_lp([-1.0, -2.0], [[1.0, 1.0]], ["<="], [1.5],
                   lower=[0.0, 0.0], upper=[1.0, 1.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-2.5)
    assert res.x == pytest.approx([0.5, 1.0])
    # Shadow price of the binding <= row for a minimization: nonpositive.
    assert res.duals[0] == pytest.approx(-1.0)


def test_equality_row():
    res = solve_lp([1.0, 1.0], [[2.0, 1.0]], ["="], [2.0],
                   lower=[0.0, 0.0], upper=[5.0, 5.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0)
    assert res.x == pytest.approx([1.0, 0.0])


def test_default_bounds_are_nonnegative():
    res = solve_lp([1.0], [[1.0]], [">="], [3.0])
    assert res.status == "optimal"
    assert res.x == pytest.approx([3.0])


def test_infeasible_program():
    res = solve_lp([1.0], [[1.0], [1.0]], [">=", "<="], [2.0, 1.0],
                   lower=[0.0], upper=[5.0])
    assert res.status == "infeasible"


def test_unbounded_program():
    res = solve_lp([-1.0], [[1.0]], [">="], [0.0], lower=[0.0], upper=[np.inf])
    assert res.status == "unbounded"


def test_bounds_only_program():
    res = solve_lp([3.0, -4.0], np.zeros((0, 2)), [], [],
                   lower=[1.0, 0.0], upper=[2.0, 7.0])
    assert res.status == "optimal"
    assert res.x == pytest.approx([1.0, 7.0])


def test_rejects_mismatched_rows():
    with pytest.raises(LPError):
        solve_lp([1.0, 1.0], [[1.0]], ["<="], [1.0])


def test_degenerate_vertex_terminates():
    # Many redundant rows through one corner; anti-cycling must cope.
    A = [[1.0, 1.0], [2.0, 2.0], [1.0, 1.0], [3.0, 3.0], [1.0, 0.0], [0.0, 1.0]]
    senses = ["<="] * 6
    rhs = [1.0, 2.0, 1.0, 3.0, 1.0, 1.0]
    res = solve_lp([-1.0, -1.0], A, senses, rhs, lower=[0.0, 0.0], upper=[2.0, 2.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# Randomized cross-checks
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(40))
def test_matches_reference_solver(seed):
    rng = np.random.default_rng(seed)
    c, A, senses, rhs, lo, up = random_program(rng)
    res = solve_lp(c, A, senses, rhs, lo, up)
    ref = by_linprog(c, A, senses, rhs, lo, up)
    assert res.status == ("optimal" if ref.status == 0 else "infeasible")
    if res.status == "optimal":
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)
        # Primal feasibility of the reported point.
        act = A @ res.x
        for k, s in enumerate(senses):
            if s == "<=":
                assert act[k] <= rhs[k] + 1e-7
            elif s == ">=":
                assert act[k] >= rhs[k] - 1e-7
            else:
                assert act[k] == pytest.approx(rhs[k], abs=1e-7)
        assert np.all(res.x >= lo - 1e-9) and np.all(res.x <= up + 1e-9)


@pytest.mark.parametrize("seed", range(25))
def test_warm_restart_after_new_rows(seed):
    rng = np.random.default_rng(1000 + seed)
    c, A, senses, rhs, lo, up = random_program(rng, n=5, m=4)
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    first = solver.solve()
    extra = rng.normal(size=(2, 5)).round(3)
    erhs = (extra @ first.x - rng.random(2)).round(3) if first.status == "optimal" else rng.normal(size=2).round(3)
    warm = resolve_with_new_rows(solver, extra, ["<=", "<="], erhs)
    cold = solve_lp(c, np.vstack([A, extra]), list(senses) + ["<=", "<="],
                    np.concatenate([rhs, erhs]), lo, up)
    assert warm.status == cold.status
    if warm.status == "optimal":
        assert warm.objective == pytest.approx(cold.objective, abs=1e-7)


@pytest.mark.parametrize("seed", range(15))
def test_warm_restart_after_bound_change(seed):
    rng = np.random.default_rng(2000 + seed)
    c, A, senses, rhs, lo, up = random_program(rng, n=5, m=4)
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    solver.solve()
    fix = int(rng.integers(0, 5))
    value = float(rng.integers(0, 2))
    solver.set_bounds([fix], [value], [value])
    warm = solver.resolve()
    lo2, up2 = lo.copy(), up.copy()
    lo2[fix] = up2[fix] = value
    cold = solve_lp(c, A, senses, rhs, lo2, up2)
    assert warm.status == cold.status
    if warm.status == "optimal":
        assert warm.objective == pytest.approx(cold.objective, abs=1e-7)


def test_interleaved_rows_and_bounds():
    # The branch-and-cut master alternates both warm paths; chain them.
    rng = np.random.default_rng(7)
    c, A, senses, rhs, lo, up = random_program(rng, n=6, m=3)
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    assert solver.solve().status == "optimal"
    rows, row_senses, row_rhs = [list(A)], list(senses), list(rhs)
    lo2, up2 = lo.copy(), up.copy()
    for step in range(6):
        extra = rng.normal(size=(1, 6)).round(3)
        erhs = round(float(rng.normal()) + 1.0, 3)
        solver.add_rows(extra, ["<="], [erhs])
        rows.append(list(extra))
        row_senses.append("<=")
        row_rhs.append(erhs)
        if step % 2:
            fix = int(rng.integers(0, 6))
            solver.set_bounds([fix], [0.0], [0.0])
            lo2[fix] = up2[fix] = 0.0
        warm = solver.resolve()
        cold = solve_lp(c, np.vstack(rows), row_senses, row_rhs, lo2, up2)
        assert warm.status == cold.status
        if warm.status == "optimal":
            assert warm.objective == pytest.approx(cold.objective, abs=1e-7)
        if warm.status == "infeasible":
            break


# ---------------------------------------------------------------------------
# Numerically hostile rows
# ---------------------------------------------------------------------------


def test_near_parallel_rows_survive():
    # Pairs of almost-identical rows are what outer-approximation loops
    # feed the solver; the basis must not go numerically singular.
    rng = np.random.default_rng(42)
    n = 8
    c = -np.ones(n)
    base = rng.random((6, n)) + 0.5
    rows = [base]
    for k in range(6):
        rows.append(base + rng.normal(scale=1e-9, size=base.shape))
    A = np.vstack(rows)
    rhs = A @ (0.35 * np.ones(n))
    senses = ["<="] * A.shape[0]
    res = solve_lp(c, A, senses, rhs, np.zeros(n), np.ones(n))
    assert res.status == "optimal"
    assert np.all(A @ res.x <= rhs + 1e-6)


def test_duplicate_rows_added_warm():
    rng = np.random.default_rng(3)
    c, A, senses, rhs, lo, up = random_program(rng, n=5, m=3)
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    first = solver.solve()
    assert first.status == "optimal"
    tight = np.argmin(np.abs(A @ first.x - rhs))
    clone = A[tight] * (1.0 + 1e-10)
    warm = resolve_with_new_rows(solver, [clone], [senses[tight]], [rhs[tight]])
    assert warm.status == "optimal"
    assert warm.objective == pytest.approx(first.objective, abs=1e-6)

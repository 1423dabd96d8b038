import numpy as np
from scipy.optimize import linprog

from chancenet.lp import BoundedSimplex, solve_lp

rng = np.random.default_rng(99)


def random_program(rng, n, m, fixed_frac=0.1):
    c = rng.normal(size=n) * rng.uniform(0.5, 5)
    A = rng.normal(size=(m, n))
    A[rng.random((m, n)) < 0.3] = 0.0
    senses = rng.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2]).tolist()
    rhs = rng.normal(size=m) * 3
    lo = rng.uniform(-5, 0, size=n)
    up = lo + rng.uniform(0, 6, size=n)
    fix = rng.random(n) < fixed_frac
    up[fix] = lo[fix]
    return c, A, senses, rhs, lo, up


def by_scipy(c, A, senses, rhs, lo, up):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, s, b in zip(A, senses, rhs):
        if s == "<=":
            A_ub.append(row); b_ub.append(b)
        elif s == ">=":
            A_ub.append(-row); b_ub.append(-b)
        else:
            A_eq.append(row); b_eq.append(b)
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None, b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None, b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lo, up)), method="highs",
    )
    if res.status == 0:
        return "optimal", res.fun
    if res.status == 2:
        return "infeasible", None
    if res.status == 3:
        return "unbounded", None
    return f"other{res.status}", None


bad = 0
# Cold solves.
for trial in range(400):
    n, m = rng.integers(2, 12), rng.integers(1, 10)
    c, A, senses, rhs, lo, up = random_program(rng, n, m)
    want_status, want_obj = by_scipy(c, A, senses, rhs, lo, up)
    got = solve_lp(c, A, senses, rhs, lo, up)
    if got.status != want_status or (
        want_status == "optimal" and abs(got.objective - want_obj) > 1e-6 * max(1, abs(want_obj))
    ):
        bad += 1
        print("COLD", trial, want_status, want_obj, "got", got.status, got.objective)
print("cold done, bad =", bad)

# add_rows chains.
for trial in range(200):
    n, m = rng.integers(2, 10), rng.integers(1, 8)
    c, A, senses, rhs, lo, up = random_program(rng, n, m)
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    solver.solve()
    for step in range(3):
        k = rng.integers(1, 4)
        A2 = rng.normal(size=(k, n))
        s2 = rng.choice(["<=", ">="], size=k).tolist()
        b2 = rng.normal(size=k) * 3
        solver.add_rows(A2, s2, b2)
        got = solver.resolve()
        A = np.vstack([A, A2]); senses = senses + s2; rhs = np.concatenate([rhs, b2])
        want_status, want_obj = by_scipy(c, A, senses, rhs, lo, up)
        if got.status != want_status or (
            want_status == "optimal" and abs(got.objective - want_obj) > 1e-6 * max(1, abs(want_obj))
        ):
            bad += 1
            print("ROWS", trial, step, want_status, want_obj, "got", got.status, got.objective)
print("add_rows done, bad =", bad)

# set_bounds chains (the branch-and-bound pattern: repeatedly fix/free columns).
for trial in range(200):
    n, m = rng.integers(3, 12), rng.integers(2, 10)
    c, A, senses, rhs, lo, up = random_program(rng, n, m, fixed_frac=0.0)
    lo0, up0 = lo.copy(), up.copy()
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    solver.solve()
    for step in range(6):
        lo_t, up_t = lo0.copy(), up0.copy()
        which = rng.random(n) < 0.4
        pick = rng.random(n) < 0.5
        lo_t[which & pick] = up0[which & pick]
        up_t[which & ~pick] = lo0[which & ~pick]
        solver.set_bounds(np.arange(n), lo_t, up_t)
        got = solver.resolve()
        want_status, want_obj = by_scipy(c, A, senses, rhs, lo_t, up_t)
        if got.status != want_status or (
            want_status == "optimal" and abs(got.objective - want_obj) > 1e-6 * max(1, abs(want_obj))
        ):
            bad += 1
            print("BNDS", trial, step, want_status, want_obj, "got", got.status, got.objective)
print("set_bounds done, bad =", bad)

# Mixed chains: rows then bounds then rows.
for trial in range(150):
    n, m = rng.integers(3, 10), rng.integers(2, 8)
    c, A, senses, rhs, lo, up = random_program(rng, n, m, fixed_frac=0.0)
    lo0, up0 = lo.copy(), up.copy()
    solver = BoundedSimplex(c, A, senses, rhs, lo, up)
    solver.solve()
    cur_lo, cur_up = lo0.copy(), up0.copy()
    for step in range(5):
        if rng.random() < 0.5:
            k = rng.integers(1, 3)
            A2 = rng.normal(size=(k, n))
            s2 = rng.choice(["<=", ">="], size=k).tolist()
            b2 = rng.normal(size=k) * 3
            solver.add_rows(A2, s2, b2)
            A = np.vstack([A, A2]); senses = senses + s2; rhs = np.concatenate([rhs, b2])
        else:
            cur_lo, cur_up = lo0.copy(), up0.copy()
            which = rng.random(n) < 0.4
            pick = rng.random(n) < 0.5
            cur_lo[which & pick] = up0[which & pick]
            cur_up[which & ~pick] = lo0[which & ~pick]
            solver.set_bounds(np.arange(n), cur_lo, cur_up)
        got = solver.resolve()
        want_status, want_obj = by_scipy(c, A, senses, rhs, cur_lo, cur_up)
        if got.status != want_status or (
            want_status == "optimal" and abs(got.objective - want_obj) > 1e-6 * max(1, abs(want_obj))
        ):
            bad += 1
            print("MIX", trial, step, want_status, want_obj, "got", got.status, got.objective)
print("mixed done, bad =", bad)
print("TOTAL BAD:", bad)

import math
import time

import numpy as np

from chancenet import model, separation

inst = model.example_network()

# Anchor 1: mean-capacity max flow and min cut.
val, cut = separation.max_flow_min_cut(inst, inst.mu)
print("maxflow", val, "side", sorted(cut.source_side))
assert abs(val - 326.0) < 1e-9
assert sorted(cut.source_side) == [0, 4]

# Anchor 2: Theta of the {source} cut at full design, omega = 1.95996.
prob = separation.separation_problem(inst, np.ones(15), 1.959964)
z = separation.crossing_vector(inst, [0])
th = separation.eval_theta(prob, z)
print("theta(source cut)", th)
cut0 = model.make_cut(inst, [0])
cm = model.capacity_model(inst, 1.959964, arc_ids=cut0.arc_ids)
assert abs(th - model.eval_f(cm, np.ones(15))) < 1e-9

# Anchor 3: omega = 0 reduces Theta to the plain mean capacity.
prob0 = separation.separation_problem(inst, np.ones(15), 0.0)
r0 = separation.separate_enumeration(prob0)
print("omega=0 enum:", r0.status, r0.theta, sorted(r0.cut.source_side))
assert abs(r0.theta - 326.0) < 1e-9

# Enumeration on the bundled instance at omega ~ 1.96.
r = separation.separate_enumeration(prob)
print("enum:", r.status, r.theta, sorted(r.cut.source_side), r.nodes)

# All strategies on the bundled instance.
for strat in ("sep-qcqp", "sep-mc", "sep-nw", "sep-bqc"):
    rr = separation.separate_bnb(prob, strat)
    ok = abs(rr.theta - r.theta) <= 1e-6 and rr.status == r.status
    print(f"{strat:10s} theta={rr.theta:.9f} status={rr.status} nodes={rr.nodes} "
          f"t={rr.wall_time:.3f} {'OK' if ok else 'MISMATCH'}")
    assert ok, (strat, rr.theta, r.theta)


def random_instance(rng, n_internal=5, regime="diag"):
    n = n_internal + 2
    src, snk = 0, n - 1
    arcs = []
    perm = list(rng.permutation(np.arange(1, n - 1))) + [snk]
    prev = src
    for nxt in perm:
        arcs.append((prev, int(nxt)))
        prev = int(nxt)
    for i in range(n - 1):
        for j in range(i + 1, n):
            if (i, j) in arcs or (i, j) == (src, snk):
                continue
            if rng.random() < 0.45:
                arcs.append((i, j))
    m = len(arcs)
    mu = rng.uniform(5.0, 100.0, size=m)
    if regime == "diag":
        sig = rng.uniform(0.5, 0.4 * mu)
        cov = np.diag(sig**2)
    else:
        q, _ = np.linalg.qr(rng.normal(size=(m, m)))
        lam = rng.uniform(1.0, 3.0, size=m)
        cov = q @ np.diag(lam) @ q.T
        scale = rng.uniform(1.0, 12.0, size=m)
        cov = cov * np.outer(scale, scale)
        cov = 0.5 * (cov + cov.T)
    rows = [
        model.Arc(int(t), int(h), float(rng.uniform(1, 100)), float(mu[k]))
        for k, (t, h) in enumerate(arcs)
    ]
    return model.NetworkInstance(
        nodes=n, source=src, sink=snk, demand=float(rng.uniform(20, 120)),
        arcs=rows, cov=cov,
    )


rng = np.random.default_rng(20260814)
t_all = time.perf_counter()
checked = 0
times = {s: 0.0 for s in ("sep-qcqp", "sep-mc", "sep-nw", "sep-bqc")}
for trial in range(12):
    regime = "diag" if trial % 2 == 0 else "corr"
    inst_r = random_instance(rng, n_internal=5, regime=regime)
    for rep in range(4):
        xbar = rng.uniform(0.0, 1.0, size=inst_r.n_arcs)
        xbar[rng.random(inst_r.n_arcs) < 0.2] = 0.0
        omega = float(rng.uniform(0.2, 2.5))
        p = separation.separation_problem(inst_r, xbar, omega)
        ref = separation.separate_enumeration(p)
        strategies = ["sep-mc", "sep-bqc"] + (
            ["sep-qcqp", "sep-nw"] if inst_r.is_diagonal else []
        )
        for strat in strategies:
            tt = time.perf_counter()
            got = separation.separate_bnb(p, strat)
            times[strat] += time.perf_counter() - tt
            checked += 1
            if got.status != ref.status or abs(got.theta - ref.theta) > 1e-6:
                print("MISMATCH", trial, rep, strat, regime,
                      "ref", ref.status, ref.theta, "got", got.status, got.theta)
                raise SystemExit(1)
print(f"agreement sweep: {checked} runs OK in {time.perf_counter()-t_all:.1f}s")
print("per-strategy seconds:", {k: round(v, 2) for k, v in times.items()})

import time

import numpy as np

from chancenet import model, separation


def random_instance(rng, n_internal, regime):
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
            if rng.random() < 1.0 / np.sqrt(n):
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
        nodes=n, source=src, sink=snk, demand=float(rng.uniform(20, 160)),
        arcs=rows, cov=cov,
    )


rng = np.random.default_rng(7)
t_all = time.perf_counter()
checked = 0
times = {s: 0.0 for s in ("enum", "sep-qcqp", "sep-mc", "sep-nw", "sep-bqc")}
nodes_tot = {s: 0 for s in times}
worst = {s: 0.0 for s in times}
n_viol = 0
for trial in range(10):
    regime = ("diag", "corr")[trial % 2]
    inst = random_instance(rng, 8, regime)
    for rep in range(5):
        xbar = rng.uniform(0.0, 1.0, size=inst.n_arcs)
        xbar[rng.random(inst.n_arcs) < 0.2] = 0.0
        omega = float(rng.uniform(0.2, 2.5))
        p = separation.separation_problem(inst, xbar, omega)
        tt = time.perf_counter()
        ref = separation.separate_enumeration(p)
        times["enum"] += time.perf_counter() - tt
        n_viol += ref.status == "violated-cut"
        strategies = ["sep-mc", "sep-bqc"] + (
            ["sep-qcqp", "sep-nw"] if inst.is_diagonal else []
        )
        for strat in strategies:
            tt = time.perf_counter()
            got = separation.separate_bnb(p, strat)
            dt = time.perf_counter() - tt
            times[strat] += dt
            worst[strat] = max(worst[strat], dt)
            nodes_tot[strat] += got.nodes
            checked += 1
            if got.status != ref.status or abs(got.theta - ref.theta) > 1e-6:
                print("MISMATCH", trial, rep, strat, regime,
                      "ref", ref.status, ref.theta, "got", got.status, got.theta)
                raise SystemExit(1)
print(f"{checked} runs OK in {time.perf_counter()-t_all:.1f}s; violated {n_viol}/50")
print("seconds:", {k: round(v, 2) for k, v in times.items()})
print("worst:  ", {k: round(v, 3) for k, v in worst.items()})
print("nodes:  ", nodes_tot)

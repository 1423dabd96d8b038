import cProfile
import pstats
import time

import numpy as np

from chancenet import model, separation
from scratch_gen import random_instance

rng = np.random.default_rng(7)
inst_d = random_instance(rng, 8, "diag")
inst_c = random_instance(rng, 8, "corr")
print("diag arcs:", inst_d.n_arcs, " corr arcs:", inst_c.n_arcs)

for inst, tag in ((inst_d, "diag"), (inst_c, "corr")):
    xbar = rng.uniform(0.0, 1.0, size=inst.n_arcs)
    xbar[rng.random(inst.n_arcs) < 0.2] = 0.0
    p = separation.separation_problem(inst, xbar, 1.5)
    t = time.perf_counter()
    ref = separation.separate_enumeration(p)
    print(tag, "enum", round(time.perf_counter() - t, 2), "s theta", round(ref.theta, 3))
    strategies = ["sep-mc", "sep-bqc"] + (["sep-qcqp", "sep-nw"] if inst.is_diagonal else [])
    for strat in strategies:
        t = time.perf_counter()
        got = separation.separate_bnb(p, strat, node_limit=3000)
        dt = time.perf_counter() - t
        print(f"  {tag} {strat:9s} {dt:7.2f}s nodes={got.nodes:5d} status={got.status} "
              f"agree={abs(got.theta - ref.theta) <= 1e-6}")

xbar = rng.uniform(0.0, 1.0, size=inst_c.n_arcs)
p = separation.separation_problem(inst_c, xbar, 1.5)
pr = cProfile.Profile()
pr.enable()
separation.separate_bnb(p, "sep-mc", node_limit=150)
pr.disable()
stats = pstats.Stats(pr)
stats.sort_stats("cumulative").print_stats(14)
